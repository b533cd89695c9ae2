//! The Maxwell–Bloch system on `R^2 x S^3`: vector field, integration and the
//! charge, energy and Lyapunov monitors.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hamiltonian, PhysicalParams, Pumping, PureState};
use crate::ode::{self, OdeSystem, SolverConfig, Trajectory};

/// Input states must satisfy the charge constraint to this accuracy.
pub const CHARGE_TOL: f64 = 1e-9;

/// Tangent vector `(dA, dB, dC1, dC2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullTangent {
    pub da: f64,
    pub db: f64,
    pub dc1: Complex64,
    pub dc2: Complex64,
}

/// Per-sample monitor values of a full trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullMonitor {
    pub charge: f64,
    pub energy: f64,
    pub lyapunov: f64,
}

pub type FullTrajectory = Trajectory<PureState, FullMonitor>;

pub fn mbe_rhs(x: &PureState, t: f64, params: &PhysicalParams, pump: &Pumping) -> FullTangent {
    let om = params.cavity_freq();
    let current = 2.0 * params.coupling() * (x.c1.conj() * x.c2).im;
    // a / hbar = b (A + A^e)
    let ah = params.bloch_coupling() * (x.a + pump.eval(params, t));
    FullTangent {
        da: x.b,
        db: -om * om * x.a - params.gamma() * x.b + params.c() * current,
        dc1: Complex64::new(0.0, -params.omega1()) * x.c1 + ah * x.c2,
        dc2: Complex64::new(0.0, -params.omega2()) * x.c2 - ah * x.c1,
    }
}

/// Largest step that still resolves every frequency of the problem.
pub fn step_cap(params: &PhysicalParams, pump: &Pumping) -> f64 {
    let f = pump
        .max_frequency(params)
        .max(params.omega1().abs())
        .max(params.omega2().abs())
        .max(params.transition_freq());
    TAU / (50.0 * f)
}

struct FullSystem<'a> {
    params: &'a PhysicalParams,
    pump: &'a Pumping,
}

impl OdeSystem<6> for FullSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64; 6]) -> [f64; 6] {
        let d = mbe_rhs(&PureState::from_array(y), t, self.params, self.pump);
        [d.da, d.db, d.dc1.re, d.dc1.im, d.dc2.re, d.dc2.im]
    }
}

/// Default Lyapunov parameter `min(gamma/4, Omega/2)`.
pub fn default_eps(params: &PhysicalParams) -> f64 {
    (params.gamma() / 4.0).min(params.cavity_freq() / 2.0)
}

/// `V = (Omega^2 A^2 + B^2)/2 + eps A B`.
///
/// `eps = 0` is accepted so that the conservative case `gamma = 0` has a
/// monitor; positivity needs `eps < Omega`.
pub fn lyapunov_value(a: f64, b: f64, params: &PhysicalParams, eps: f64) -> Result<f64> {
    let om = params.cavity_freq();
    if !(0.0..om).contains(&eps) {
        return Err(Error::EpsOutOfRange { eps, omega: om });
    }
    Ok(0.5 * (om * om * a * a + b * b) + eps * a * b)
}

/// Streams the full flow to `observe`; no charge renormalization is applied.
pub fn integrate_full_with<F>(
    x0: &PureState,
    cfg: &SolverConfig,
    params: &PhysicalParams,
    pump: &Pumping,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(f64, &PureState),
{
    let charge = x0.charge();
    if !((charge - 1.0).abs() <= CHARGE_TOL) {
        return Err(Error::NotNormalized { charge });
    }
    let mut sys = FullSystem { params, pump };
    ode::integrate(&mut sys, x0.to_array(), cfg, step_cap(params, pump), |t, y, _| {
        observe(t, &PureState::from_array(y))
    })?;
    Ok(())
}

pub fn integrate_full(
    x0: &PureState,
    cfg: &SolverConfig,
    params: &PhysicalParams,
    pump: &Pumping,
) -> Result<FullTrajectory> {
    let eps = default_eps(params);
    let mut traj = Trajectory::new();
    integrate_full_with(x0, cfg, params, pump, |t, x| {
        let mon = FullMonitor {
            charge: x.charge(),
            energy: hamiltonian(x, t, params, pump),
            lyapunov: lyapunov_value(x.a, x.b, params, eps).unwrap_or(f64::NAN),
        };
        traj.push(t, *x, mon);
    })?;
    Ok(traj)
}

/// Outcome of the a priori bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub sup_v: f64,
    pub v0: f64,
    /// `sup_t (A^2 + B^2)`.
    pub sup_field: f64,
    /// `A(0)^2 + B(0)^2 + r^2`.
    pub reference: f64,
    /// Smallest `D` with `sup (A^2 + B^2) <= D (A(0)^2 + B(0)^2 + r^2)`.
    pub ratio: f64,
    /// False if the field energy was unbounded (non-finite) along the run.
    pub bounded: bool,
}

pub fn apriori_bound_check(traj: &FullTrajectory, params: &PhysicalParams) -> AprioriReport {
    let eps = default_eps(params);
    let v = |x: &PureState| lyapunov_value(x.a, x.b, params, eps).unwrap_or(f64::NAN);
    let v0 = traj.states.first().map(v).unwrap_or(0.0);
    let mut sup_v: f64 = 0.0;
    let mut sup_field: f64 = 0.0;
    let mut bounded = true;
    for x in &traj.states {
        let e = x.a * x.a + x.b * x.b;
        bounded &= e.is_finite();
        sup_field = sup_field.max(e);
        sup_v = sup_v.max(v(x));
    }
    let r = params.ratio();
    let reference = traj.states.first().map(|x| x.a * x.a + x.b * x.b).unwrap_or(0.0) + r * r;
    AprioriReport {
        sup_v,
        v0,
        sup_field,
        reference,
        ratio: if reference > 0.0 { sup_field / reference } else { 0.0 },
        bounded,
    }
}
