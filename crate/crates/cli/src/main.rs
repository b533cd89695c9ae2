use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use maxwell_bloch::averaging::{integrate_averaged, integrate_envelope, AveragedField, Regime};
use maxwell_bloch::config::ExperimentConfig;
use maxwell_bloch::experiments::{
    default_kbm_domain, kbm_sweep, probe_basin, run_adiabatic, run_attraction, run_averaging_error,
    run_nonresonance, run_uniform, select_branch, SweepResult,
};
use maxwell_bloch::full::integrate_full;
use maxwell_bloch::harmonic::{numeric_stability, stationary_states, Branch};
use maxwell_bloch::output::{
    harmonic_records, write_averaged_csv, write_envelope_csv, write_full_csv, write_json, write_reduced_csv, Summary,
};
use maxwell_bloch::reduction::{integrate_reduced, lift_state, project_state};
use maxwell_bloch::{PhysicalParams, Pumping, ReducedState};
use num_complex::Complex64;
use serde_json::json;

const DEFAULT_P_LIST: [f64; 3] = [3e-3, 1e-3, 3e-4];

#[derive(Parser)]
#[command(name = "mbe-lab", version, about = "Numerical experiments for the damped-driven Maxwell-Bloch equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write trajectories as CSV.
    #[arg(long)]
    csv: bool,
    /// Write the JSON summary into the output directory (it is always printed).
    #[arg(long)]
    json: bool,
    /// Comma-separated coupling values for sweeps.
    #[arg(long, value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
    /// Horizon of the uniform-in-time sweep in units of 1/p.
    #[arg(long)]
    horizon_multiple: Option<f64>,
    /// Seed for randomized probes; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full system on R^2 x S^3.
    SimulateFull(Common),
    /// Integrate the reduced system on C x S^2.
    SimulateReduced(Common),
    /// Integrate the interaction-picture equations.
    SimulateEnvelope(Common),
    /// Integrate the averaged equations in slow time.
    SimulateAveraged(Common),
    /// List the harmonic states of the configuration.
    HarmonicStates(Common),
    /// Closed-form and numeric spectra at every harmonic state.
    Stability(Common),
    /// Deviation from the harmonic orbit over [0, 1/p].
    VerifyAdiabatic(Common),
    /// Deviation from the stable harmonic orbit over [0, k/p].
    VerifyUniform(Common),
    /// Decay rate of perturbations of the stable harmonic orbit.
    VerifyAttraction(Common),
    /// Distance between the envelope and averaged flows over [0, 1/p].
    VerifyAveraging(Common),
    /// Field decay away from resonance.
    VerifyNonresonance(Common),
    /// Averaging order function for several p.
    KbmOrder(Common),
}

struct Run {
    cfg: ExperimentConfig,
    params: PhysicalParams,
    pump: Pumping,
    common: Common,
    seed: u64,
}

impl Run {
    fn new(common: Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let params = cfg.params()?;
        let pump = cfg.pump()?;
        let seed = common.seed.unwrap_or(cfg.seed);
        std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        Ok(Self {
            cfg,
            params,
            pump,
            common,
            seed,
        })
    }

    fn p_list(&self) -> Vec<f64> {
        self.common
            .p_list
            .clone()
            .or_else(|| self.cfg.p_list.clone())
            .unwrap_or_else(|| DEFAULT_P_LIST.to_vec())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.common.out.join(name)
    }

    fn csv<F>(&self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        if self.common.csv {
            create(&self.path(name), write)?;
        }
        Ok(())
    }

    fn emit(&self, summary: &Summary) -> Result<()> {
        let text = serde_json::to_string_pretty(summary)?;
        println!("{text}");
        if self.common.json {
            create(&self.path(&format!("{}.json", summary.experiment)), |w| write_json(w, summary))?;
        }
        Ok(())
    }

    fn summary(&self, experiment: &str, pass: bool, details: serde_json::Value) -> Summary {
        Summary {
            experiment: experiment.to_string(),
            params: self.params.constants(),
            p_values: Vec::new(),
            errors: Vec::new(),
            slope: None,
            slope_ci: None,
            horizon_rule: None,
            pass,
            seed: self.seed,
            details,
        }
    }

    fn sweep_summary(&self, experiment: &str, sweep: &SweepResult, pass: bool, details: serde_json::Value) -> Summary {
        let mut s = Summary::from_sweep(experiment, &self.params, sweep, pass, self.seed);
        s.details = details;
        s
    }
}

fn create<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

fn simulate_full(ctx: &Run) -> Result<()> {
    let x0 = ctx.cfg.initial_full(&ctx.params)?;
    let traj = integrate_full(&x0, &ctx.cfg.solver, &ctx.params, &ctx.pump)?;
    ctx.csv("full.csv", |w| write_full_csv(w, &traj))?;
    let drift = traj.monitors.iter().map(|m| (m.charge - 1.0).abs()).fold(0.0, f64::max);
    let (t, x) = traj.last().context("empty trajectory")?;
    ctx.emit(&ctx.summary(
        "simulate-full",
        true,
        json!({"samples": traj.len(), "t_end": t, "final": [x.a, x.b, [x.c1.re, x.c1.im], [x.c2.re, x.c2.im]],
               "max_charge_drift": drift}),
    ))
}

fn simulate_reduced(ctx: &Run) -> Result<()> {
    let y0 = ctx.cfg.initial_reduced(&ctx.params)?;
    let traj = integrate_reduced(&y0, &ctx.cfg.solver, &ctx.params, &ctx.pump)?;
    ctx.csv("reduced.csv", |w| write_reduced_csv(w, &traj))?;
    let switches = traj.states.windows(2).filter(|w| w[0].chart != w[1].chart).count();
    let (t, y) = traj.last().context("empty trajectory")?;
    ctx.emit(&ctx.summary(
        "simulate-reduced",
        true,
        json!({"samples": traj.len(), "t_end": t, "final_M": [y.m.re, y.m.im], "final_inversion": y.inversion(),
               "sampled_chart_changes": switches}),
    ))
}

fn simulate_envelope(ctx: &Run) -> Result<()> {
    let e0 = ctx.cfg.initial_envelope();
    let traj = integrate_envelope(&e0, &ctx.cfg.solver, &ctx.params, &ctx.pump)?;
    ctx.csv("envelope.csv", |w| write_envelope_csv(w, &traj))?;
    let (t, e) = traj.last().context("empty trajectory")?;
    ctx.emit(&ctx.summary(
        "simulate-envelope",
        true,
        json!({"samples": traj.len(), "t_end": t, "final_M": [e.m.re, e.m.im], "final_Q": [e.q.re, e.q.im]}),
    ))
}

fn simulate_averaged(ctx: &Run) -> Result<()> {
    let e0 = ctx.cfg.initial_envelope();
    let field = AveragedField::new(&ctx.params, &ctx.pump);
    let traj = integrate_averaged(&e0, &ctx.cfg.solver, &field)?;
    ctx.csv("averaged.csv", |w| write_averaged_csv(w, &traj))?;
    let (t, e) = traj.last().context("empty trajectory")?;
    ctx.emit(&ctx.summary(
        "simulate-averaged",
        true,
        json!({"samples": traj.len(), "t_end": t, "regime": format!("{:?}", field.regime()),
               "final_M": [e.m.re, e.m.im], "final_Q": [e.q.re, e.q.im]}),
    ))
}

fn harmonic_states_cmd(ctx: &Run) -> Result<()> {
    let states = stationary_states(&ctx.params, &ctx.pump)?;
    let records = harmonic_records(&states, &ctx.params)?;
    println!("{}", serde_json::to_string_pretty(&records)?);
    if ctx.common.json {
        create(&ctx.path("harmonic-states.json"), |w| write_json(w, &records))?;
    }
    Ok(())
}

fn stability(ctx: &Run) -> Result<()> {
    let states = stationary_states(&ctx.params, &ctx.pump)?;
    let records = harmonic_records(&states, &ctx.params)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (h, rec) in states.iter().zip(&records) {
        let numeric = numeric_stability(&h.envelope(), &ctx.params, h.ae);
        let gap = rec
            .eigenvalues
            .iter()
            .map(|l| {
                let l = Complex64::new(l[0], l[1]);
                numeric.eigenvalues.iter().map(|m| (m - l).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        worst = worst.max(gap);
        rows.push(json!({"branch": h.branch, "classification": rec.classification, "nu": rec.nu,
                         "numeric_gap": gap, "physical_rates": rec.eigenvalues.iter()
                             .map(|l| [l[0] * ctx.params.dipole(), l[1] * ctx.params.dipole()]).collect::<Vec<_>>()}));
    }
    ctx.emit(&ctx.summary("stability", true, json!({"states": rows, "max_numeric_gap": worst})))
}

fn resonant_ratio(ctx: &Run) -> Result<f64> {
    if Regime::of(&ctx.params) != Regime::Resonance {
        bail!("this experiment needs Omega == omega2 - omega1");
    }
    Ok(ctx.cfg.ratio()?)
}

/// Per-p trajectories of a harmonic-orbit sweep, written on request.
fn sweep_trajectories(ctx: &Run, name: &str, r: f64, branch: Branch, horizon: impl Fn(f64) -> f64) -> Result<()> {
    if !ctx.common.csv {
        return Ok(());
    }
    let h = select_branch(&ctx.params, r, ctx.pump.carrier(), branch)?;
    for p in ctx.p_list() {
        let params = ctx.params.with_coupling(p, r)?;
        let y0 = project_state(&lift_state(&ReducedState::north(h.mr, h.qr), &params), &params)?;
        let traj = integrate_reduced(&y0, &ctx.cfg.solver.with_horizon(horizon(p)), &params, &ctx.pump)?;
        create(&ctx.path(&format!("{name}_p{p:e}.csv")), |w| write_reduced_csv(w, &traj))?;
    }
    Ok(())
}

fn verify_adiabatic(ctx: &Run) -> Result<()> {
    let r = resonant_ratio(ctx)?;
    let branch = ctx.cfg.branch.unwrap_or(Branch::NonZeroInvPlus);
    let sweep = run_adiabatic(&ctx.params, r, &ctx.pump, branch, &ctx.p_list(), &ctx.cfg.solver)?;
    sweep_trajectories(ctx, "adiabatic", r, branch, |p| 1.0 / p)?;
    let pass = sweep.passes_half_order();
    ctx.emit(&ctx.sweep_summary("verify-adiabatic", &sweep, pass, json!({"branch": branch, "r": r})))
}

fn verify_uniform(ctx: &Run) -> Result<()> {
    let r = resonant_ratio(ctx)?;
    let k = ctx.common.horizon_multiple.unwrap_or(ctx.cfg.horizon_multiple);
    let sweep = run_uniform(&ctx.params, r, &ctx.pump, &ctx.p_list(), &ctx.cfg.solver, k)?;
    sweep_trajectories(ctx, "uniform", r, Branch::NonZeroInvPlus, |p| k / p)?;
    let pass = sweep.passes_first_order();
    ctx.emit(&ctx.sweep_summary("verify-uniform", &sweep, pass, json!({"r": r, "horizon_multiple": k})))
}

fn verify_attraction(ctx: &Run) -> Result<()> {
    let r = resonant_ratio(ctx)?;
    let p = ctx.params.dipole();
    let rep = run_attraction(&ctx.params, r, &ctx.pump, p, &ctx.cfg.d0, &ctx.cfg.solver)?;
    let pass = rep.entries.iter().all(|e| (0.7..=1.3).contains(&e.ratio));
    let mut s = ctx.summary("verify-attraction", pass, serde_json::to_value(&rep)?);
    s.p_values = vec![p];
    ctx.emit(&s)
}

fn verify_averaging(ctx: &Run) -> Result<()> {
    let r = resonant_ratio(ctx)?;
    let y0 = ctx.cfg.initial_envelope();
    let sweep = run_averaging_error(&ctx.params, r, &ctx.pump, &y0, &ctx.p_list(), &ctx.cfg.solver)?;
    let basin = probe_basin(&ctx.params, r, ctx.pump.carrier(), ctx.cfg.basin_tau)?;
    let pass = sweep.slope >= 0.4 && basin.converged() >= 7;
    ctx.emit(&ctx.sweep_summary(
        "verify-averaging",
        &sweep,
        pass,
        json!({"r": r, "basin_converged": basin.converged(), "basin": basin}),
    ))
}

fn verify_nonresonance(ctx: &Run) -> Result<()> {
    let om = ctx.params.transition_freq();
    if (ctx.params.cavity_freq() - om).abs() < 0.1 * om.abs() {
        bail!("this experiment needs |Omega - omega| >= 0.1 omega");
    }
    let m0 = ctx.cfg.init.m;
    if m0.norm() == 0.0 {
        bail!("init.M must be nonzero");
    }
    let rep = run_nonresonance(&ctx.params, &ctx.pump, m0, &ctx.cfg.solver)?;
    let states = stationary_states(&ctx.params, &ctx.pump)?;
    let pass = rep.misfit <= 0.2 && states.is_empty();
    let mut s = ctx.summary("verify-nonresonance", pass, serde_json::to_value(rep)?);
    s.p_values = vec![ctx.params.dipole()];
    s.errors = vec![rep.misfit];
    ctx.emit(&s)
}

fn kbm_order_cmd(ctx: &Run) -> Result<()> {
    let domain = default_kbm_domain(ctx.pump.carrier());
    let rep = kbm_sweep(&ctx.params, &ctx.pump, &ctx.p_list(), &domain)?;
    // First order: each delta ratio tracks the p ratio to within a factor of 2.
    let pass = !rep.ratios.is_empty()
        && rep
            .ratios
            .iter()
            .zip(rep.p_values.windows(2))
            .all(|(q, w)| (0.5..=2.0).contains(&(q / (w[1] / w[0]))));
    let mut s = ctx.summary("kbm-order", pass, json!({"ratios": rep.ratios}));
    s.p_values = rep.p_values.clone();
    s.errors = rep.deltas.clone();
    s.slope = rep.slope;
    ctx.emit(&s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, common): (fn(&Run) -> Result<()>, Common) = match cli.command {
        Command::SimulateFull(c) => (simulate_full, c),
        Command::SimulateReduced(c) => (simulate_reduced, c),
        Command::SimulateEnvelope(c) => (simulate_envelope, c),
        Command::SimulateAveraged(c) => (simulate_averaged, c),
        Command::HarmonicStates(c) => (harmonic_states_cmd, c),
        Command::Stability(c) => (stability, c),
        Command::VerifyAdiabatic(c) => (verify_adiabatic, c),
        Command::VerifyUniform(c) => (verify_uniform, c),
        Command::VerifyAttraction(c) => (verify_attraction, c),
        Command::VerifyAveraging(c) => (verify_averaging, c),
        Command::VerifyNonresonance(c) => (verify_nonresonance, c),
        Command::KbmOrder(c) => (kbm_order_cmd, c),
    };
    match Run::new(common).and_then(|ctx| run(&ctx)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
