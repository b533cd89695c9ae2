//! Interaction picture `M = e^{-i Omega t} MM`, `Q = e^{-i omega t} QQ`, the
//! averaged vector field, its quadrature counterpart and the order function
//! of the averaging.
//!
//! All "scaled" fields carry the global factor `p`; the "unscaled" ones are
//! `f_r`, `g_r` and their averages, which depend on `r` but not on `p`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Chart, EnvelopeState, PhysicalParams, Pumping};
use crate::ode::{self, OdeSystem, SolverConfig, Trajectory};
use crate::reduction::inversion_of;

/// Quadrature nodes per period of the fastest frequency.
pub const POINTS_PER_PERIOD: f64 = 200.0;

/// Window, in carrier periods, for numerically averaged coefficients.
pub const DEFAULT_AVERAGING_PERIODS: f64 = 1e4;

/// Number of horizons in the order-function grid.
pub const KBM_GRID: usize = 32;

/// Averaged trajectory; the monitor is the slow time `tau = p t`.
pub type AveragedTrajectory = Trajectory<EnvelopeState, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Resonance,
    NonResonance,
}

impl Regime {
    pub fn of(params: &PhysicalParams) -> Regime {
        if params.is_resonant() {
            Regime::Resonance
        } else {
            Regime::NonResonance
        }
    }
}

/// `x . y = Re(conj(x) y)`, the Euclidean product of `C = R^2`.
pub fn dot(x: Complex64, y: Complex64) -> f64 {
    (x.conj() * y).re
}

/// `x ^ y = Im(conj(x) y) = x1 y2 - x2 y1`.
pub fn wedge(x: Complex64, y: Complex64) -> f64 {
    (x.conj() * y).im
}

/// Highest frequency in the interaction-picture field.
pub fn envelope_max_frequency(params: &PhysicalParams, pump: &Pumping) -> f64 {
    pump.max_frequency(params) + params.transition_freq()
}

fn envelope_field(
    e: &EnvelopeState,
    chart: Chart,
    t: f64,
    params: &PhysicalParams,
    pump: &Pumping,
    (gamma, kappa, b): (f64, f64, f64),
) -> EnvelopeState {
    let rot_m = Complex64::cis(params.cavity_freq() * t);
    let rot_q = Complex64::cis(params.transition_freq() * t);
    let m = rot_m.conj() * e.m;
    let q = rot_q.conj() * e.q;
    let dm = -Complex64::i() * rot_m * (gamma * m.im - kappa * q.im / (e.q.norm_sqr() + 1.0));
    let drive = m.re + pump.eval(params, t);
    let dq = -b * rot_q * drive * (e.q * e.q * rot_q.conj() * rot_q.conj() + 1.0);
    EnvelopeState {
        m: dm,
        q: match chart {
            Chart::North => dq,
            Chart::South => -dq,
        },
    }
}

/// `p (f_r, g_r)`: the right-hand side of the envelope equations.
pub fn envelope_rhs(e: &EnvelopeState, t: f64, params: &PhysicalParams, pump: &Pumping) -> EnvelopeState {
    envelope_rhs_chart(e, Chart::North, t, params, pump)
}

/// Envelope equations with `QQ` read as a coordinate of `chart`; in the
/// South chart `Sigma = e^{-i omega t} QQ`.
pub fn envelope_rhs_chart(
    e: &EnvelopeState,
    chart: Chart,
    t: f64,
    params: &PhysicalParams,
    pump: &Pumping,
) -> EnvelopeState {
    let k = (params.gamma(), params.field_coupling(), params.bloch_coupling());
    envelope_field(e, chart, t, params, pump, k)
}

/// `(f_r, g_r)` without the factor `p`; needs `p > 0`.
pub fn envelope_unscaled(e: &EnvelopeState, t: f64, params: &PhysicalParams, pump: &Pumping) -> EnvelopeState {
    let k = (
        params.scaled_damping(),
        params.scaled_field_coupling(),
        params.scaled_bloch_coupling(),
    );
    envelope_field(e, Chart::North, t, params, pump, k)
}

/// Composite Simpson rule on `[0, t_total]` with an even number of panels.
fn simpson<F>(f: F, t_total: f64, n: usize) -> [f64; 4]
where
    F: Fn(f64) -> [f64; 4],
{
    let n = n.max(2) + n % 2;
    let h = t_total / n as f64;
    let mut acc = [0.0; 4];
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = f(k as f64 * h);
        for i in 0..4 {
            acc[i] += w * v[i];
        }
    }
    acc.map(|a| a * h / 3.0)
}

fn panels(t_total: f64, f_max: f64) -> usize {
    let h = TAU / (POINTS_PER_PERIOD * f_max);
    let n = (t_total / h).ceil() as usize;
    n + n % 2
}

fn to4(e: EnvelopeState) -> [f64; 4] {
    [e.m.re, e.m.im, e.q.re, e.q.im]
}

fn from4(v: [f64; 4]) -> EnvelopeState {
    EnvelopeState::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]))
}

/// Time average of [`envelope_rhs_chart`] over `[0, t_avg]` at a frozen state.
pub fn numeric_average_chart(
    e: &EnvelopeState,
    chart: Chart,
    params: &PhysicalParams,
    pump: &Pumping,
    t_avg: f64,
) -> Result<EnvelopeState> {
    if !(t_avg > 0.0 && t_avg.is_finite()) {
        return Err(Error::InvalidParams(format!("averaging window must be positive, got {t_avg}")));
    }
    let n = panels(t_avg, envelope_max_frequency(params, pump));
    let s = simpson(|t| to4(envelope_rhs_chart(e, chart, t, params, pump)), t_avg, n);
    Ok(from4(s.map(|v| v / t_avg)))
}

/// Time average of [`envelope_rhs`] (North chart), i.e. `p` times the
/// averaged field.
pub fn numeric_average(e: &EnvelopeState, params: &PhysicalParams, pump: &Pumping, t_avg: f64) -> Result<EnvelopeState> {
    numeric_average_chart(e, Chart::North, params, pump, t_avg)
}

/// The averaged field `(f, g)`.
///
/// `g` is written as `-b1 (u + conj(u) QQ^2)` with
/// `u = MM1 <e^{i omega t} cos Omega t> + MM2 <e^{i omega t} sin Omega t> + <e^{i omega t} A^e(t)>`;
/// in resonance this is the closed form, otherwise the pump term is averaged
/// by quadrature and the Maxwell terms vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedField {
    params: PhysicalParams,
    regime: Regime,
    ae: Complex64,
    u_pump: Complex64,
}

impl AveragedField {
    /// Closed form (resonance) or quadrature with the default window.
    pub fn new(params: &PhysicalParams, pump: &Pumping) -> Self {
        let window = DEFAULT_AVERAGING_PERIODS * TAU / params.cavity_freq();
        match Regime::of(params) {
            Regime::Resonance => Self::closed_form(params, pump.carrier()),
            Regime::NonResonance => Self::numeric(params, pump, window),
        }
    }

    /// Resonance field driven by the carrier coefficient `ae`.
    pub fn closed_form(params: &PhysicalParams, ae: Complex64) -> Self {
        Self {
            params: *params,
            regime: Regime::Resonance,
            ae,
            u_pump: ae / 2.0,
        }
    }

    /// Non-resonance field with `<e^{i omega t} A^e(t)>` taken over `[0, window]`.
    pub fn numeric(params: &PhysicalParams, pump: &Pumping, window: f64) -> Self {
        let om = params.transition_freq();
        let n = panels(window, pump.max_frequency(params) + om);
        let s = simpson(
            |t| {
                let v = Complex64::cis(om * t) * pump.eval(params, t);
                [v.re, v.im, 0.0, 0.0]
            },
            window,
            n,
        );
        Self {
            params: *params,
            regime: Regime::of(params),
            ae: pump.carrier(),
            u_pump: Complex64::new(s[0], s[1]) / window,
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn carrier(&self) -> Complex64 {
        self.ae
    }

    /// `<e^{i omega t} A^e(t)>`.
    pub fn pump_coefficient(&self) -> Complex64 {
        self.u_pump
    }

    fn eval(&self, e: &EnvelopeState, gamma: f64, kappa: f64, b: f64) -> EnvelopeState {
        let den = e.q.norm_sqr() + 1.0;
        match self.regime {
            Regime::Resonance => {
                let n = e.m + self.ae;
                EnvelopeState {
                    m: -gamma / 2.0 * e.m + kappa / 2.0 * e.q / den,
                    q: b / 2.0 * (n * (e.q.norm_sqr() - 1.0) - 2.0 * e.q * dot(n, e.q)),
                }
            }
            Regime::NonResonance => EnvelopeState {
                m: -gamma / 2.0 * e.m,
                q: -b * (self.u_pump + self.u_pump.conj() * e.q * e.q),
            },
        }
    }

    /// `(f, g)`, independent of `p`.
    pub fn unscaled(&self, e: &EnvelopeState) -> EnvelopeState {
        let p = &self.params;
        self.eval(e, p.scaled_damping(), p.scaled_field_coupling(), p.scaled_bloch_coupling())
    }

    /// `p (f, g)`; well defined at `p = 0`.
    pub fn scaled(&self, e: &EnvelopeState) -> EnvelopeState {
        let p = &self.params;
        self.eval(e, p.gamma(), p.field_coupling(), p.bloch_coupling())
    }
}

/// `p (f, g)` for a pump consisting of the carrier `ae` alone.
pub fn averaged_rhs(e: &EnvelopeState, params: &PhysicalParams, ae: Complex64) -> EnvelopeState {
    match Regime::of(params) {
        Regime::Resonance => AveragedField::closed_form(params, ae).scaled(e),
        Regime::NonResonance => AveragedField::new(params, &Pumping::carrier_only(ae)).scaled(e),
    }
}

/// Order function `delta(p) = p max_E max_T |int_0^T (v - <v>) dt|` over a
/// 32-point log grid of horizons in `[2 pi / f_max, 1/p]`, at ratio
/// `r = params.ratio()`.
pub fn kbm_order(params: &PhysicalParams, pump: &Pumping, p: f64, domain: &[EnvelopeState]) -> Result<f64> {
    if domain.is_empty() {
        return Err(Error::InvalidParams("order function needs a non-empty domain".into()));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParams(format!("coupling must be positive, got {p}")));
    }
    let r = params.ratio();
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!("ratio p/gamma must be positive, got {r}")));
    }
    let params = params.with_coupling(p, r)?;
    let field = AveragedField::new(&params, pump);
    let f_max = envelope_max_frequency(&params, pump);
    let t_min = TAU / f_max;
    let t_max = 1.0 / p;
    if t_max <= t_min {
        return Err(Error::InvalidParams(format!("horizon 1/p = {t_max} is shorter than one period")));
    }
    let h = TAU / (POINTS_PER_PERIOD * f_max);
    // Even node indices at which the running integral is read.
    let mut marks: Vec<usize> = (0..KBM_GRID)
        .map(|j| {
            let s = j as f64 / (KBM_GRID - 1) as f64;
            let t = t_min * (t_max / t_min).powf(s);
            let k = (t / h).round() as usize;
            (k + k % 2).max(2)
        })
        .collect();
    marks.dedup();

    let sup = |e: &EnvelopeState| -> f64 {
        let mean = to4(field.unscaled(e));
        let dev = |t: f64| {
            let v = to4(envelope_unscaled(e, t, &params, pump));
            std::array::from_fn::<f64, 4, _>(|i| v[i] - mean[i])
        };
        let mut acc = [0.0; 4];
        let mut best: f64 = 0.0;
        let mut prev = dev(0.0);
        let mut mark = 0;
        let mut k = 0;
        while mark < marks.len() {
            let mid = dev((k + 1) as f64 * h);
            let end = dev((k + 2) as f64 * h);
            for i in 0..4 {
                acc[i] += h / 3.0 * (prev[i] + 4.0 * mid[i] + end[i]);
            }
            prev = end;
            k += 2;
            while mark < marks.len() && marks[mark] == k {
                best = best.max(acc.iter().map(|a| a * a).sum::<f64>().sqrt());
                mark += 1;
            }
        }
        best
    };
    let worst = domain.par_iter().map(sup).reduce(|| 0.0, f64::max);
    Ok(p * worst)
}

struct AveragedSystem<'a> {
    field: &'a AveragedField,
}

impl OdeSystem<4> for AveragedSystem<'_> {
    fn rhs(&self, _tau: f64, y: &[f64; 4]) -> [f64; 4] {
        self.field.unscaled(&EnvelopeState::from_array(y)).to_array()
    }
}

/// Streams the averaged flow in slow time `tau = p t`; `cfg` is given in
/// physical time and `observe` receives `(t, tau, state)`.
pub fn integrate_averaged_with<F>(e0: &EnvelopeState, cfg: &SolverConfig, field: &AveragedField, mut observe: F) -> Result<()>
where
    F: FnMut(f64, f64, &EnvelopeState),
{
    let p = field.params().dipole();
    if !(p > 0.0) {
        return Err(Error::InvalidParams("averaged integration in slow time needs p > 0".into()));
    }
    let slow = SolverConfig {
        t_end: cfg.t_end * p,
        sample_dt: cfg.sample_dt * p,
        dt: cfg.dt * p,
        ..*cfg
    };
    let mut sys = AveragedSystem { field };
    ode::integrate(&mut sys, e0.to_array(), &slow, f64::INFINITY, |tau, y, _| {
        observe(tau / p, tau, &EnvelopeState::from_array(y))
    })?;
    Ok(())
}

pub fn integrate_averaged(e0: &EnvelopeState, cfg: &SolverConfig, field: &AveragedField) -> Result<AveragedTrajectory> {
    let mut traj = Trajectory::new();
    integrate_averaged_with(e0, cfg, field, |t, tau, e| traj.push(t, *e, tau))?;
    Ok(traj)
}

struct EnvelopeSystem<'a> {
    params: &'a PhysicalParams,
    pump: &'a Pumping,
}

impl OdeSystem<4> for EnvelopeSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        envelope_rhs(&EnvelopeState::from_array(y), t, self.params, self.pump).to_array()
    }
}

/// Streams the envelope equations in physical time.
pub fn integrate_envelope_with<F>(
    e0: &EnvelopeState,
    cfg: &SolverConfig,
    params: &PhysicalParams,
    pump: &Pumping,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(f64, &EnvelopeState),
{
    let cap = TAU / (50.0 * envelope_max_frequency(params, pump));
    let mut sys = EnvelopeSystem { params, pump };
    ode::integrate(&mut sys, e0.to_array(), cfg, cap, |t, y, _| observe(t, &EnvelopeState::from_array(y)))?;
    Ok(())
}

pub fn integrate_envelope(
    e0: &EnvelopeState,
    cfg: &SolverConfig,
    params: &PhysicalParams,
    pump: &Pumping,
) -> Result<Trajectory<EnvelopeState>> {
    let mut traj = Trajectory::new();
    integrate_envelope_with(e0, cfg, params, pump, |t, e| traj.push(t, *e, ()))?;
    Ok(traj)
}

/// Inversion of an envelope state; `|Q| = |QQ|`.
pub fn envelope_inversion(e: &EnvelopeState) -> f64 {
    inversion_of(e.q)
}
