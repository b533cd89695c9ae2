//! p-sweeps that measure how far true trajectories stay from the rotating
//! harmonic orbits, the averaging error, attraction rates, the off-resonance
//! decay law, the averaging order function and the a priori field bound.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{integrate_averaged_with, integrate_envelope_with, kbm_order, AveragedField};
use crate::error::{Error, Result};
use crate::full::{apriori_bound_check, integrate_full, integrate_full_with, AprioriReport};
use crate::harmonic::{eigenvalues_harmonic, harmonic_states, Branch, HarmonicState};
use crate::model::{EnvelopeState, PhysicalParams, Pumping, PureState, ReducedState};
use crate::ode::SolverConfig;
use crate::reduction::{integrate_reduced_with, lift_state, project_state, ReducedTrajectory};

/// Convergence threshold of the basin probe.
pub const BASIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorizonRule {
    /// `T = p^{-1/2}`.
    InvSqrtP,
    /// `T = 1/p`.
    InvP,
    /// `T = k/p`.
    MultipleInvP,
}

impl HorizonRule {
    pub fn horizon(self, p: f64, multiple: f64) -> f64 {
        match self {
            HorizonRule::InvSqrtP => p.powf(-0.5),
            HorizonRule::InvP => 1.0 / p,
            HorizonRule::MultipleInvP => multiple / p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Strictly decreasing.
    pub p_values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log p`.
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub slope_ci: f64,
    pub horizon_rule: HorizonRule,
}

impl SweepResult {
    fn new(mut rows: Vec<(f64, f64)>, horizon_rule: HorizonRule) -> Result<Self> {
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (p_values, errors): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let (slope, slope_ci) = fit_loglog(&p_values, &errors)?;
        Ok(Self {
            p_values,
            errors,
            slope,
            slope_ci,
            horizon_rule,
        })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }

    /// Acceptance band of the `O(p^{1/2})` statements.
    pub fn passes_half_order(&self) -> bool {
        self.strictly_decreasing() && self.slope >= 0.4
    }

    /// Acceptance band of the `O(p)` statements.
    pub fn passes_first_order(&self) -> bool {
        (0.8..=1.2).contains(&self.slope)
    }
}

/// Ordinary least squares of `ln y` on `ln x`; returns `(slope, rms residual)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParams("slope fit needs at least 3 (p, error) pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParams("slope fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = ols(&lx, &ly);
    let rms = (lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / lx.len() as f64).sqrt();
    Ok((slope, rms))
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn check_p_list(p_list: &[f64]) -> Result<()> {
    if p_list.len() < 3 {
        return Err(Error::InvalidParams("a sweep needs at least 3 values of p".into()));
    }
    if p_list.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParams("every p must be positive".into()));
    }
    Ok(())
}

/// `|M - e^{-i Omega t} Mr| + |Q - e^{-i Omega t} Qr|` at one sample.
pub fn orbit_deviation(t: f64, y: &ReducedState, mr: Complex64, qr: Complex64, omega: f64) -> Result<f64> {
    let q = y.north_q().map_err(|_| Error::ChartConversionFailure { t })?;
    let rot = Complex64::cis(-omega * t);
    Ok((y.m - rot * mr).norm() + (q - rot * qr).norm())
}

/// Largest deviation of a reduced trajectory from the harmonic orbit
/// `(e^{-i Omega t} Mr, e^{-i Omega t} Qr)`, compared in the North chart.
pub fn error_metric(traj: &ReducedTrajectory, mr: Complex64, qr: Complex64, omega: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (t, y) in traj.times.iter().zip(&traj.states) {
        worst = worst.max(orbit_deviation(*t, y, mr, qr, omega)?);
    }
    Ok(worst)
}

fn require_resonance(base: &PhysicalParams) -> Result<()> {
    if base.is_resonant() {
        Ok(())
    } else {
        Err(Error::NotResonant)
    }
}

/// The harmonic state on `branch` for ratio `r`, carrier `ae` and `c = base.c()`.
pub fn select_branch(base: &PhysicalParams, r: f64, ae: Complex64, branch: Branch) -> Result<HarmonicState> {
    harmonic_states(r, ae, base.c())?
        .into_iter()
        .find(|h| h.branch == branch)
        .ok_or_else(|| Error::BranchUnavailable {
            branch: branch.to_string(),
            cr: base.c() * r,
            ae: ae.norm(),
        })
}

/// Sup-deviation from the harmonic orbit of `h` over `[0, horizon]`, starting
/// from the lift of the harmonic state.
pub fn harmonic_run(params: &PhysicalParams, pump: &Pumping, h: &HarmonicState, horizon: f64, cfg: &SolverConfig) -> Result<f64> {
    let y0 = ReducedState::north(h.mr, h.qr);
    let y0 = project_state(&lift_state(&y0, params), params)?;
    let om = params.cavity_freq();
    let mut worst: f64 = 0.0;
    let mut failure = None;
    integrate_reduced_with(&y0, &cfg.with_horizon(horizon), params, pump, |t, y| {
        match orbit_deviation(t, y, h.mr, h.qr, om) {
            Ok(e) => worst = worst.max(e),
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    })?;
    failure.map_or(Ok(worst), Err)
}

fn sweep<F>(p_list: &[f64], rule: HorizonRule, run: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    check_p_list(p_list)?;
    let rows = p_list
        .par_iter()
        .map(|&p| run(p).map(|e| (p, e)))
        .collect::<Result<Vec<_>>>()?;
    SweepResult::new(rows, rule)
}

/// Deviation from the rotating harmonic orbit over `[0, 1/p]` for each `p`,
/// with `gamma = p / r`. The harmonic state is that of the carrier of `pump`.
///
/// Under a carrier-only pump the NonZeroInv orbits are exact solutions
/// (`A + A^e == 0` along them), so the recorded error is integration noise.
pub fn run_adiabatic(
    base: &PhysicalParams,
    r: f64,
    pump: &Pumping,
    branch: Branch,
    p_list: &[f64],
    cfg: &SolverConfig,
) -> Result<SweepResult> {
    require_resonance(base)?;
    let h = select_branch(base, r, pump.carrier(), branch)?;
    sweep(p_list, HorizonRule::InvP, |p| {
        let params = base.with_coupling(p, r)?;
        harmonic_run(&params, pump, &h, 1.0 / p, cfg)
    })
}

/// Same protocol on the stable branch over `[0, horizon_multiple / p]`.
pub fn run_uniform(
    base: &PhysicalParams,
    r: f64,
    pump: &Pumping,
    p_list: &[f64],
    cfg: &SolverConfig,
    horizon_multiple: f64,
) -> Result<SweepResult> {
    let ae = pump.carrier();
    require_resonance(base)?;
    if !(horizon_multiple > 0.0) {
        return Err(Error::InvalidParams(format!("horizon multiple must be positive, got {horizon_multiple}")));
    }
    if base.c() * r <= ae.norm() {
        return Err(Error::BranchUnavailable {
            branch: Branch::NonZeroInvPlus.to_string(),
            cr: base.c() * r,
            ae: ae.norm(),
        });
    }
    let h = select_branch(base, r, ae, Branch::NonZeroInvPlus)?;
    sweep(p_list, HorizonRule::MultipleInvP, |p| {
        let params = base.with_coupling(p, r)?;
        harmonic_run(&params, pump, &h, horizon_multiple / p, cfg)
    })
}

/// Deviation of the full Maxwell amplitude from the free rotation,
/// `max |M(t) - e^{-i Omega t} M(0)|` over `[0, p^{-1/2}]`, from a fixed state.
pub fn run_baseline(
    base: &PhysicalParams,
    r: f64,
    pump: &Pumping,
    x0: &PureState,
    p_list: &[f64],
    cfg: &SolverConfig,
) -> Result<SweepResult> {
    let om = base.cavity_freq();
    let m0 = x0.maxwell_amplitude(om);
    sweep(p_list, HorizonRule::InvSqrtP, |p| {
        let params = base.with_coupling(p, r)?;
        let mut worst: f64 = 0.0;
        integrate_full_with(x0, &cfg.with_horizon(p.powf(-0.5)), &params, pump, |t, x| {
            worst = worst.max((x.maxwell_amplitude(om) - Complex64::cis(-om * t) * m0).norm());
        })?;
        Ok(worst)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractionEntry {
    pub d0: f64,
    /// Fitted decay rate of the distance between perturbed and unperturbed runs.
    pub fitted_rate: f64,
    /// `fitted_rate / (p nu)`.
    pub ratio: f64,
    /// Fit window `[0, t_fit]`.
    pub t_fit: f64,
    /// Sup of the deviation from the harmonic orbit over the window.
    pub sup_error: f64,
    /// Deviation from the harmonic orbit at the end of the window.
    pub final_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionReport {
    pub p: f64,
    /// `-Re lambda` at the stable state.
    pub nu: f64,
    /// `|Im lambda|` at the stable state.
    pub eta: f64,
    pub entries: Vec<AttractionEntry>,
}

/// Slow periods of `e^{i p eta t}` covered by the attraction fit.
pub const ATTRACTION_PERIODS: f64 = 2.0;

/// Perturbs `QQ` of the stable harmonic state by `d0` (real direction), lifts,
/// and fits the exponential decay of the distance to the unperturbed run.
///
/// The distance between the two runs has no `O(p)` floor, so the fit is an
/// ordinary least-squares line through `ln dist(t)` over whole periods of the
/// slow rotation.
pub fn run_attraction(
    base: &PhysicalParams,
    r: f64,
    pump: &Pumping,
    p: f64,
    d0_list: &[f64],
    cfg: &SolverConfig,
) -> Result<AttractionReport> {
    require_resonance(base)?;
    let h = select_branch(base, r, pump.carrier(), Branch::NonZeroInvPlus)?;
    let params = base.with_coupling(p, r)?;
    let report = eigenvalues_harmonic(&h, &params)?;
    let nu = report
        .nu
        .ok_or_else(|| Error::InvalidParams("the NonZeroInvPlus state is not linearly stable".into()))?;
    let eta = report.eigenvalues.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
    let t_fit = if eta > 0.0 {
        ATTRACTION_PERIODS * TAU / (p * eta)
    } else {
        4.0 / (p * nu)
    };
    let cfg = cfg.with_horizon(t_fit);
    let om = params.cavity_freq();

    let run = |qq: Complex64| -> Result<Vec<(f64, ReducedState)>> {
        let y0 = project_state(&lift_state(&ReducedState::north(h.mr, qq), &params), &params)?;
        let mut out = Vec::new();
        integrate_reduced_with(&y0, &cfg, &params, pump, |t, y| out.push((t, *y)))?;
        Ok(out)
    };
    let reference = run(h.qr)?;
    let entries = d0_list
        .par_iter()
        .map(|&d0| {
            let pert = run(h.qr + d0)?;
            let mut ts = Vec::with_capacity(pert.len());
            let mut ls = Vec::with_capacity(pert.len());
            let mut sup_error: f64 = 0.0;
            let mut final_error = 0.0;
            for ((t, y), (_, y_ref)) in pert.iter().zip(&reference) {
                let q = y.north_q().map_err(|_| Error::ChartConversionFailure { t: *t })?;
                let q_ref = y_ref.north_q().map_err(|_| Error::ChartConversionFailure { t: *t })?;
                let dist = (y.m - y_ref.m).norm() + (q - q_ref).norm();
                let e = orbit_deviation(*t, y, h.mr, h.qr, om)?;
                sup_error = sup_error.max(e);
                final_error = e;
                if dist > 0.0 {
                    ts.push(*t);
                    ls.push(dist.ln());
                }
            }
            let (slope, _) = ols(&ts, &ls);
            Ok(AttractionEntry {
                d0,
                fitted_rate: -slope,
                ratio: -slope / (p * nu),
                t_fit,
                sup_error,
                final_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttractionReport { p, nu, eta, entries })
}

/// Sup-distance between the envelope flow and the averaged flow from `y0`
/// over `[0, 1/p]`.
pub fn run_averaging_error(
    base: &PhysicalParams,
    r: f64,
    pump: &Pumping,
    y0: &EnvelopeState,
    p_list: &[f64],
    cfg: &SolverConfig,
) -> Result<SweepResult> {
    require_resonance(base)?;
    sweep(p_list, HorizonRule::InvP, |p| {
        let params = base.with_coupling(p, r)?;
        let cfg = cfg.with_horizon(1.0 / p);
        let mut env = Vec::new();
        integrate_envelope_with(y0, &cfg, &params, pump, |_, e| env.push(*e))?;
        let field = AveragedField::new(&params, pump);
        let mut worst: f64 = 0.0;
        let mut k = 0;
        integrate_averaged_with(y0, &cfg, &field, |_, _, e| {
            if let Some(x) = env.get(k) {
                worst = worst.max(x.distance(e));
            }
            k += 1;
        })?;
        Ok(worst)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinPoint {
    pub start: EnvelopeState,
    pub final_distance: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub target: EnvelopeState,
    pub tau_end: f64,
    pub points: Vec<BasinPoint>,
}

impl BasinReport {
    pub fn converged(&self) -> usize {
        self.points.iter().filter(|b| b.converged).count()
    }
}

/// Nine starts in the disk `|QQ - QQ+| <= 0.5`: the center, four points at
/// radius 0.25 and four at radius 0.5 rotated by 45 degrees, all with
/// `MM = MM+`.
pub fn basin_grid(target: &EnvelopeState) -> Vec<EnvelopeState> {
    let mut pts = vec![*target];
    for k in 0..4 {
        let a = k as f64 * TAU / 4.0;
        pts.push(EnvelopeState::new(target.m, target.q + Complex64::from_polar(0.25, a)));
    }
    for k in 0..4 {
        let a = k as f64 * TAU / 4.0 + TAU / 8.0;
        pts.push(EnvelopeState::new(target.m, target.q + Complex64::from_polar(0.5, a)));
    }
    pts
}

/// Runs the averaged flow for `tau_end` slow time units from each grid point.
pub fn probe_basin(base: &PhysicalParams, r: f64, ae: Complex64, tau_end: f64) -> Result<BasinReport> {
    require_resonance(base)?;
    let h = select_branch(base, r, ae, Branch::NonZeroInvPlus)?;
    let p = if base.dipole() > 0.0 { base.dipole() } else { 1e-3 };
    let params = base.with_coupling(p, r)?;
    let field = AveragedField::closed_form(&params, ae);
    let target = h.envelope();
    let cfg = SolverConfig::adaptive(tau_end / p, tau_end / p, 1e-10);
    let points = basin_grid(&target)
        .par_iter()
        .map(|start| {
            let mut last = *start;
            integrate_averaged_with(start, &cfg, &field, |_, _, e| last = *e)?;
            let final_distance = last.distance(&target);
            Ok(BasinPoint {
                start: *start,
                final_distance,
                converged: final_distance.is_finite() && final_distance < BASIN_TOL,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BasinReport { target, tau_end, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonResonanceReport {
    pub t_star: f64,
    pub observed: f64,
    pub predicted: f64,
    /// `|observed / predicted - 1|` at `t_star = 2 / gamma`.
    pub misfit: f64,
    /// Least-squares rate of `ln |M(t)|`.
    pub fitted_rate: f64,
    /// `fitted_rate / (gamma / 2)`.
    pub rate_ratio: f64,
}

/// Full run from `M(0) = m0` with the molecule in the ground state, compared
/// with the decay law `|M(0)| e^{-gamma t / 2}` at `t = 2 / gamma`.
pub fn run_nonresonance(params: &PhysicalParams, pump: &Pumping, m0: Complex64, cfg: &SolverConfig) -> Result<NonResonanceReport> {
    let g = params.gamma();
    if !(g > 0.0) {
        return Err(Error::InvalidParams("the decay law needs gamma > 0".into()));
    }
    let om = params.cavity_freq();
    let t_star = 2.0 / g;
    let (a, b) = crate::model::field_from_amplitude(m0, om);
    let x0 = PureState::ground(a, b);
    let mut ts = Vec::new();
    let mut ls = Vec::new();
    let mut observed = 0.0;
    integrate_full_with(&x0, &cfg.with_horizon(t_star), params, pump, |t, x| {
        let m = x.maxwell_amplitude(om).norm();
        ts.push(t);
        ls.push(m.ln());
        observed = m;
    })?;
    let predicted = m0.norm() * (-g * t_star / 2.0).exp();
    let (slope, _) = ols(&ts, &ls);
    Ok(NonResonanceReport {
        t_star,
        observed,
        predicted,
        misfit: (observed / predicted - 1.0).abs(),
        fitted_rate: -slope,
        rate_ratio: -slope / (g / 2.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbmReport {
    pub p_values: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `delta(p_{k+1}) / delta(p_k)`.
    pub ratios: Vec<f64>,
    pub slope: Option<f64>,
}

/// The order function at each `p`, keeping `r = params.ratio()`.
pub fn kbm_sweep(params: &PhysicalParams, pump: &Pumping, p_list: &[f64], domain: &[EnvelopeState]) -> Result<KbmReport> {
    let mut p_values = p_list.to_vec();
    p_values.sort_by(|a, b| b.total_cmp(a));
    let deltas = p_values
        .iter()
        .map(|&p| kbm_order(params, pump, p, domain))
        .collect::<Result<Vec<_>>>()?;
    let ratios = deltas.windows(2).map(|w| w[1] / w[0]).collect();
    let slope = fit_loglog(&p_values, &deltas).ok().map(|s| s.0);
    Ok(KbmReport {
        p_values,
        deltas,
        ratios,
        slope,
    })
}

/// A fixed small domain around the origin and the stable state.
pub fn default_kbm_domain(ae: Complex64) -> Vec<EnvelopeState> {
    let mut d = vec![
        EnvelopeState::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        EnvelopeState::new(Complex64::new(0.5, -0.5), Complex64::new(0.5, 0.5)),
        EnvelopeState::new(Complex64::new(-1.0, 0.2), Complex64::new(-0.3, 0.1)),
    ];
    if ae.norm() > 0.0 {
        d.push(EnvelopeState::new(-ae, -0.27 * ae / ae.norm()));
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriEntry {
    pub r: f64,
    /// Largest `sup (A^2 + B^2) / (A(0)^2 + B(0)^2 + r^2)` over the starts.
    pub fitted_d: f64,
    pub sup_field: f64,
    pub all_bounded: bool,
    pub reports: Vec<AprioriReport>,
}

/// Random starts (seeded) integrated over `[0, 10 / gamma]` for each `r`.
pub fn run_apriori(
    base: &PhysicalParams,
    pump: &Pumping,
    p: f64,
    r_list: &[f64],
    n_states: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Vec<AprioriEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<PureState> = (0..n_states).map(|_| random_pure_state(&mut rng, 2.0)).collect();
    r_list
        .iter()
        .map(|&r| {
            let params = base.with_coupling(p, r)?;
            let horizon = 10.0 / params.gamma();
            let reports = starts
                .par_iter()
                .map(|x0| {
                    let traj = integrate_full(x0, &cfg.with_horizon(horizon), &params, pump)?;
                    Ok(apriori_bound_check(&traj, &params))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AprioriEntry {
                r,
                fitted_d: reports.iter().map(|x| x.ratio).fold(0.0, f64::max),
                sup_field: reports.iter().map(|x| x.sup_field).fold(0.0, f64::max),
                all_bounded: reports.iter().all(|x| x.bounded && x.sup_field.is_finite()),
                reports,
            })
        })
        .collect()
}

/// Uniform point of `[-field, field]^2 x S^3`.
pub fn random_pure_state<R: Rng>(rng: &mut R, field: f64) -> PureState {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let s = n2.sqrt();
            return PureState::unchecked(
                rng.gen_range(-field..field),
                rng.gen_range(-field..field),
                Complex64::new(v[0] / s, v[1] / s),
                Complex64::new(v[2] / s, v[3] / s),
            );
        }
    }
}
