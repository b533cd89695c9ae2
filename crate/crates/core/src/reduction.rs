//! Hopf projection `S^3 -> S^2`, the two stereographic charts of the Bloch
//! sphere, and the reduced flow on `R^2 x S^2`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::full::{self, step_cap, CHARGE_TOL};
use crate::model::{field_from_amplitude, BlochPoint, Chart, PhysicalParams, Pumping, PureState, ReducedState};
use crate::ode::{self, OdeSystem, SolverConfig, Trajectory};

/// The active coordinate is replaced once its modulus exceeds this.
pub const CHART_SWITCH: f64 = 2.0;

/// Distance to a pole below which the opposite chart is undefined.
pub const POLE_TOL: f64 = 1e-12;

pub type ReducedTrajectory = Trajectory<ReducedState>;

pub fn hopf_project(c1: Complex64, c2: Complex64) -> Result<BlochPoint> {
    let charge = c1.norm_sqr() + c2.norm_sqr();
    if !((charge - 1.0).abs() <= CHARGE_TOL) {
        return Err(Error::NotNormalized { charge });
    }
    let z = c1.conj() * c2;
    Ok(BlochPoint {
        z1: z.re,
        z2: z.im,
        z3: 0.5 * (c2.norm_sqr() - c1.norm_sqr()),
    })
}

pub fn north_coord(zp: &BlochPoint) -> Result<Complex64> {
    let den = 0.5 - zp.z3;
    if den < POLE_TOL {
        return Err(Error::AtNorthPole);
    }
    Ok(zp.z() / den)
}

pub fn south_coord(zp: &BlochPoint) -> Result<Complex64> {
    let den = 0.5 + zp.z3;
    if den < POLE_TOL {
        return Err(Error::AtSouthPole);
    }
    Ok(zp.z() / den)
}

pub fn bloch_from_north(q: Complex64) -> BlochPoint {
    let s = 1.0 / (q.norm_sqr() + 1.0);
    let z = q * s;
    BlochPoint {
        z1: z.re,
        z2: z.im,
        z3: 0.5 - s,
    }
}

pub fn bloch_from_south(sigma: Complex64) -> BlochPoint {
    let s = 1.0 / (sigma.norm_sqr() + 1.0);
    let z = sigma * s;
    BlochPoint {
        z1: z.re,
        z2: z.im,
        z3: s - 0.5,
    }
}

/// Overlap map `Q = 1 / conj(Sigma)`; it is an involution.
pub fn invert_coord(w: Complex64) -> Complex64 {
    1.0 / w.conj()
}

/// Population inversion `(|Q|^2 - 1)/(|Q|^2 + 1)` in the North chart.
pub fn inversion_of(q: Complex64) -> f64 {
    let n = q.norm_sqr();
    (n - 1.0) / (n + 1.0)
}

/// Population inversion `(1 - |Sigma|^2)/(1 + |Sigma|^2)` in the South chart.
pub fn inversion_of_south(sigma: Complex64) -> f64 {
    -inversion_of(sigma)
}

impl ReducedState {
    pub fn bloch_point(&self) -> BlochPoint {
        match self.chart {
            Chart::North => bloch_from_north(self.coord),
            Chart::South => bloch_from_south(self.coord),
        }
    }

    pub fn inversion(&self) -> f64 {
        match self.chart {
            Chart::North => inversion_of(self.coord),
            Chart::South => inversion_of_south(self.coord),
        }
    }

    /// Same point expressed in `chart`.
    pub fn in_chart(&self, chart: Chart) -> Result<ReducedState> {
        if chart == self.chart {
            return Ok(*self);
        }
        if self.coord.norm_sqr() == 0.0 {
            return Err(match chart {
                Chart::North => Error::AtNorthPole,
                Chart::South => Error::AtSouthPole,
            });
        }
        Ok(ReducedState {
            m: self.m,
            chart,
            coord: invert_coord(self.coord),
        })
    }

    /// The North coordinate `Q`, if defined.
    pub fn north_q(&self) -> Result<Complex64> {
        self.in_chart(Chart::North).map(|s| s.coord)
    }

    /// Switches to the other chart when the coordinate modulus exceeds `limit`.
    pub fn rebalanced(&self, limit: f64) -> ReducedState {
        if self.coord.norm() > limit {
            ReducedState {
                m: self.m,
                chart: self.chart.other(),
                coord: invert_coord(self.coord),
            }
        } else {
            *self
        }
    }
}

/// Reduction map: `M = A + i B / Omega` and the Bloch point of `(C1, C2)`,
/// in the North chart iff `|Q| <= 1`.
pub fn project_state(x: &PureState, params: &PhysicalParams) -> Result<ReducedState> {
    let zp = hopf_project(x.c1, x.c2)?;
    let m = x.maxwell_amplitude(params.cavity_freq());
    if zp.z3 <= 0.0 {
        Ok(ReducedState::north(m, north_coord(&zp)?))
    } else {
        Ok(ReducedState::south(m, south_coord(&zp)?))
    }
}

/// Canonical section of the reduction: `C1` real and non-negative, and
/// `arg C2 = 0` on the fiber over the North Pole.
pub fn lift_state(y: &ReducedState, params: &PhysicalParams) -> PureState {
    let (a, b) = field_from_amplitude(y.m, params.cavity_freq());
    let s = 1.0 / (y.coord.norm_sqr() + 1.0).sqrt();
    let (c1, c2) = match y.chart {
        Chart::North => (Complex64::new(s, 0.0), y.coord * s),
        Chart::South => {
            // C1 / C2 = conj(Sigma), so |C1| = |Sigma| s with C2 carrying the phase.
            let r = y.coord.norm();
            let phase = if r > 0.0 { y.coord / r } else { Complex64::new(1.0, 0.0) };
            (Complex64::new(r * s, 0.0), phase * s)
        }
    };
    PureState::unchecked(a, b, c1, c2)
}

/// Tangent `(dM, dcoord)` of the reduced flow in the active chart.
pub fn reduced_rhs(y: &ReducedState, t: f64, params: &PhysicalParams, pump: &Pumping) -> (Complex64, Complex64) {
    let w = y.coord;
    let n = w.norm_sqr() + 1.0;
    // Z2 = Im(conj(C1) C2) in either chart.
    let z2 = w.im / n;
    let dm = -Complex64::i()
        * (params.cavity_freq() * y.m + params.gamma() * y.m.im - params.field_coupling() * z2);
    let drive = params.bloch_coupling() * (y.m.re + pump.eval(params, t));
    let rot = Complex64::new(0.0, -params.transition_freq()) * w;
    let dw = match y.chart {
        Chart::North => rot - drive * (w * w + 1.0),
        Chart::South => rot + drive * (w * w + 1.0),
    };
    (dm, dw)
}

pub(crate) struct ReducedSystem<'a> {
    pub params: &'a PhysicalParams,
    pub pump: &'a Pumping,
    pub chart: Chart,
    pub switches: usize,
}

impl ReducedSystem<'_> {
    pub fn state(&self, y: &[f64; 4]) -> ReducedState {
        ReducedState {
            m: Complex64::new(y[0], y[1]),
            chart: self.chart,
            coord: Complex64::new(y[2], y[3]),
        }
    }
}

impl OdeSystem<4> for ReducedSystem<'_> {
    fn rhs(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let (dm, dw) = reduced_rhs(&self.state(y), t, self.params, self.pump);
        [dm.re, dm.im, dw.re, dw.im]
    }

    fn after_step(&mut self, _t: f64, y: &mut [f64; 4]) -> bool {
        let w = Complex64::new(y[2], y[3]);
        if w.norm() > CHART_SWITCH {
            let v = invert_coord(w);
            y[2] = v.re;
            y[3] = v.im;
            self.chart = self.chart.other();
            self.switches += 1;
            true
        } else {
            false
        }
    }
}

/// Streams the reduced flow; returns the number of chart switches.
pub fn integrate_reduced_with<F>(
    y0: &ReducedState,
    cfg: &SolverConfig,
    params: &PhysicalParams,
    pump: &Pumping,
    mut observe: F,
) -> Result<usize>
where
    F: FnMut(f64, &ReducedState),
{
    let y0 = y0.rebalanced(CHART_SWITCH);
    let mut sys = ReducedSystem {
        params,
        pump,
        chart: y0.chart,
        switches: 0,
    };
    let v = [y0.m.re, y0.m.im, y0.coord.re, y0.coord.im];
    ode::integrate(&mut sys, v, cfg, step_cap(params, pump), |t, y, s| observe(t, &s.state(y)))?;
    Ok(sys.switches)
}

pub fn integrate_reduced(
    y0: &ReducedState,
    cfg: &SolverConfig,
    params: &PhysicalParams,
    pump: &Pumping,
) -> Result<ReducedTrajectory> {
    let mut traj = Trajectory::new();
    integrate_reduced_with(y0, cfg, params, pump, |t, y| traj.push(t, *y, ()))?;
    Ok(traj)
}

/// Projects every sample of a full trajectory.
pub fn project_trajectory(traj: &full::FullTrajectory, params: &PhysicalParams) -> Result<ReducedTrajectory> {
    let mut out = Trajectory::new();
    for (t, x) in traj.times.iter().zip(&traj.states) {
        out.push(*t, project_state(&x.normalized(), params)?, ());
    }
    Ok(out)
}
