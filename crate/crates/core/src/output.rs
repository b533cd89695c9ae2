//! Plot-ready CSV trajectories and JSON reports. Floats are written with 17
//! significant digits so that files round-trip exactly.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::averaging::{envelope_inversion, AveragedTrajectory};
use crate::error::Result;
use crate::experiments::{HorizonRule, SweepResult};
use crate::full::FullTrajectory;
use crate::harmonic::{eigenvalues_harmonic, numeric_stability, Branch, Classification, HarmonicState};
use crate::model::{EnvelopeState, ModelConstants, PhysicalParams};
use crate::ode::Trajectory;
use crate::reduction::ReducedTrajectory;

pub const FULL_HEADER: &str = "t,A,B,ReC1,ImC1,ReC2,ImC2,charge,energy,lyapunov";
pub const REDUCED_HEADER: &str = "t,ReM,ImM,chart,ReCoord,ImCoord,Z1,Z2,Z3,inversion";
pub const ENVELOPE_HEADER: &str = "t,ReM,ImM,ReQ,ImQ,inversion";
pub const AVERAGED_HEADER: &str = "tau,t,ReM,ImM,ReQ,ImQ,inversion";

fn row<W: Write>(w: &mut W, values: &[f64]) -> io::Result<()> {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
    writeln!(w, "{}", cells.join(","))
}

pub fn write_full_csv<W: Write>(w: &mut W, traj: &FullTrajectory) -> io::Result<()> {
    writeln!(w, "{FULL_HEADER}")?;
    for ((t, x), m) in traj.times.iter().zip(&traj.states).zip(&traj.monitors) {
        row(w, &[*t, x.a, x.b, x.c1.re, x.c1.im, x.c2.re, x.c2.im, m.charge, m.energy, m.lyapunov])?;
    }
    Ok(())
}

/// `chart` is 0 for North and 1 for South.
pub fn write_reduced_csv<W: Write>(w: &mut W, traj: &ReducedTrajectory) -> io::Result<()> {
    writeln!(w, "{REDUCED_HEADER}")?;
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let z = y.bloch_point();
        let cells = [
            format!("{t:.16e}"),
            format!("{:.16e}", y.m.re),
            format!("{:.16e}", y.m.im),
            y.chart.id().to_string(),
            format!("{:.16e}", y.coord.re),
            format!("{:.16e}", y.coord.im),
            format!("{:.16e}", z.z1),
            format!("{:.16e}", z.z2),
            format!("{:.16e}", z.z3),
            format!("{:.16e}", y.inversion()),
        ];
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_envelope_csv<W: Write>(w: &mut W, traj: &Trajectory<EnvelopeState>) -> io::Result<()> {
    writeln!(w, "{ENVELOPE_HEADER}")?;
    for (t, e) in traj.times.iter().zip(&traj.states) {
        row(w, &[*t, e.m.re, e.m.im, e.q.re, e.q.im, envelope_inversion(e)])?;
    }
    Ok(())
}

pub fn write_averaged_csv<W: Write>(w: &mut W, traj: &AveragedTrajectory) -> io::Result<()> {
    writeln!(w, "{AVERAGED_HEADER}")?;
    for ((t, e), tau) in traj.times.iter().zip(&traj.states).zip(&traj.monitors) {
        row(w, &[*tau, *t, e.m.re, e.m.im, e.q.re, e.q.im, envelope_inversion(e)])?;
    }
    Ok(())
}

/// One entry of the `harmonic-states` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicRecord {
    pub branch: Branch,
    #[serde(rename = "Mr")]
    pub mr: [f64; 2],
    #[serde(rename = "Qr")]
    pub qr: [f64; 2],
    pub inversion: f64,
    pub alpha: Option<f64>,
    pub eigenvalues: [[f64; 2]; 4],
    pub classification: Classification,
    pub nu: Option<f64>,
}

/// Closed-form spectra, except for the trivial state whose spectrum is
/// computed numerically.
pub fn harmonic_records(states: &[HarmonicState], params: &PhysicalParams) -> Result<Vec<HarmonicRecord>> {
    states
        .iter()
        .map(|h| {
            let rep = match h.branch {
                Branch::Trivial => numeric_stability(&h.envelope(), params, h.ae),
                _ => eigenvalues_harmonic(h, params)?,
            };
            Ok(HarmonicRecord {
                branch: h.branch,
                mr: [h.mr.re, h.mr.im],
                qr: [h.qr.re, h.qr.im],
                inversion: h.inversion,
                alpha: h.alpha,
                eigenvalues: rep.eigenvalues.map(|l| [l.re, l.im]),
                classification: rep.classification,
                nu: rep.nu,
            })
        })
        .collect()
}

/// Summary of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub params: ModelConstants,
    pub p_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
    pub slope_ci: Option<f64>,
    pub horizon_rule: Option<HorizonRule>,
    pub pass: bool,
    pub seed: u64,
    /// Experiment-specific details.
    pub details: serde_json::Value,
}

impl Summary {
    pub fn from_sweep(experiment: &str, params: &PhysicalParams, sweep: &SweepResult, pass: bool, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            params: params.constants(),
            p_values: sweep.p_values.clone(),
            errors: sweep.errors.clone(),
            slope: Some(sweep.slope),
            slope_ci: Some(sweep.slope_ci),
            horizon_rule: Some(sweep.horizon_rule),
            pass,
            seed,
            details: serde_json::Value::Null,
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
    writeln!(w)
}
