//! Harmonic states: stationary points of the resonance averaged system, and
//! the spectra of its linearization there.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::averaging::{dot, wedge, AveragedField, Regime};
use crate::error::{Error, Result};
use crate::model::{EnvelopeState, PhysicalParams, Pumping};
use crate::reduction::inversion_of;

/// Relative tolerance of the degenerate case `c r == |Ae|`.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    ZeroInvPlus,
    ZeroInvMinus,
    Degenerate,
    NonZeroInvPlus,
    NonZeroInvMinus,
    Trivial,
}

impl Branch {
    pub const ALL: [Branch; 6] = [
        Branch::ZeroInvPlus,
        Branch::ZeroInvMinus,
        Branch::Degenerate,
        Branch::NonZeroInvPlus,
        Branch::NonZeroInvMinus,
        Branch::Trivial,
    ];

    pub fn is_zero_inv(self) -> bool {
        matches!(self, Branch::ZeroInvPlus | Branch::ZeroInvMinus)
    }

    pub fn is_nonzero_inv(self) -> bool {
        matches!(self, Branch::NonZeroInvPlus | Branch::NonZeroInvMinus)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Branch::ALL
            .into_iter()
            .find(|b| b.to_string().to_lowercase() == key)
            .ok_or_else(|| Error::InvalidParams(format!("unknown branch `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicState {
    pub mr: Complex64,
    pub qr: Complex64,
    pub branch: Branch,
    pub inversion: f64,
    /// `Mr = alpha Qr`; set on the NonZeroInv branches only.
    pub alpha: Option<f64>,
    /// Carrier coefficient the state belongs to.
    pub ae: Complex64,
}

impl HarmonicState {
    pub fn envelope(&self) -> EnvelopeState {
        EnvelopeState::new(self.mr, self.qr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    LinearlyStable,
    Unstable,
    NotLinearlyStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Eigenvalues of the linearization of the averaged field without the
    /// factor `p`.
    pub eigenvalues: [Complex64; 4],
    pub classification: Classification,
    /// `-max Re(lambda)` when linearly stable.
    pub nu: Option<f64>,
}

impl StabilityReport {
    fn from_eigenvalues(eigenvalues: [Complex64; 4]) -> Self {
        let classification = classify(&eigenvalues);
        let abscissa = spectral_abscissa(&eigenvalues);
        Self {
            eigenvalues,
            classification,
            nu: (classification == Classification::LinearlyStable).then_some(-abscissa),
        }
    }

    /// Eigenvalues of the physical linearization, `p lambda`.
    pub fn scaled(&self, p: f64) -> [Complex64; 4] {
        self.eigenvalues.map(|l| l * p)
    }
}

pub fn spectral_abscissa(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Real parts within `1e-12` of the largest modulus count as zero.
pub fn classify(eigs: &[Complex64]) -> Classification {
    let scale = eigs.iter().map(|l| l.norm()).fold(1e-300, f64::max);
    let a = spectral_abscissa(eigs);
    if a < -1e-12 * scale {
        Classification::LinearlyStable
    } else if a > 1e-12 * scale {
        Classification::Unstable
    } else {
        Classification::NotLinearlyStable
    }
}

/// Orders eigenvalues by real, then imaginary part.
pub fn sort_eigenvalues(eigs: &mut [Complex64]) {
    eigs.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal).then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal)));
}

/// All harmonic states of the resonance averaged system with carrier `ae`.
pub fn harmonic_states(r: f64, ae: Complex64, c: f64) -> Result<Vec<HarmonicState>> {
    if !(r > 0.0 && r.is_finite()) || !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParams(format!("need r > 0 and c > 0, got r = {r}, c = {c}")));
    }
    if !ae.is_finite() {
        return Err(Error::InvalidParams(format!("carrier coefficient must be finite, got {ae}")));
    }
    let a = ae.norm();
    let cr = c * r;
    if a == 0.0 {
        return Ok(vec![HarmonicState {
            mr: Complex64::new(0.0, 0.0),
            qr: Complex64::new(0.0, 0.0),
            branch: Branch::Trivial,
            inversion: -1.0,
            alpha: None,
            ae,
        }]);
    }
    let unit = ae / a;
    if (cr - a).abs() <= DEGENERACY_TOL * cr.max(a) {
        return Ok(vec![HarmonicState {
            mr: -ae,
            qr: -unit,
            branch: Branch::Degenerate,
            inversion: 0.0,
            alpha: None,
            ae,
        }]);
    }
    if cr < a {
        let theta = (-cr / a).clamp(-1.0, 1.0).acos();
        let make = |sign: f64, branch| {
            let q = unit * Complex64::cis(sign * theta);
            HarmonicState {
                mr: cr * q,
                qr: q,
                branch,
                inversion: 0.0,
                alpha: None,
                ae,
            }
        };
        return Ok(vec![make(1.0, Branch::ZeroInvPlus), make(-1.0, Branch::ZeroInvMinus)]);
    }
    let s = ((cr - a) * (cr + a)).sqrt();
    let make = |q: Complex64, branch| {
        let alpha = 2.0 * cr / (q.norm_sqr() + 1.0);
        HarmonicState {
            mr: alpha * q,
            qr: q,
            branch,
            inversion: inversion_of(q),
            alpha: Some(alpha),
            ae,
        }
    };
    Ok(vec![
        make(-ae / (cr + s), Branch::NonZeroInvPlus),
        make(-(cr + s) * unit / a, Branch::NonZeroInvMinus),
    ])
}

/// Angle `theta = arccos(-c r / |Ae|)` of the ZeroInv states.
pub fn zero_inv_angle(r: f64, ae: Complex64, c: f64) -> Option<f64> {
    let a = ae.norm();
    (c * r < a).then(|| (-c * r / a).acos().clamp(0.0, PI))
}

/// Harmonic states for a parameter set and pump. Off resonance the averaged
/// Maxwell equation is a pure decay, so there are none with `Mr != 0`.
pub fn stationary_states(params: &PhysicalParams, pump: &Pumping) -> Result<Vec<HarmonicState>> {
    match Regime::of(params) {
        Regime::Resonance => harmonic_states(params.ratio(), pump.carrier(), params.c()),
        Regime::NonResonance => Ok(Vec::new()),
    }
}

/// Jacobian of the unscaled resonance averaged field in the coordinates
/// `(MM1, MM2, QQ1, QQ2)`.
///
/// With `at_harmonic`, `MM` in the `g`-block is replaced by the point of the
/// ray `f = 0` over `QQ`.
pub fn jacobian_averaged(e: &EnvelopeState, params: &PhysicalParams, ae: Complex64, at_harmonic: bool) -> Matrix4<f64> {
    let g1 = params.scaled_damping();
    let k1 = params.scaled_field_coupling();
    let b1 = params.scaled_bloch_coupling();
    let q = [e.q.re, e.q.im];
    let q2 = e.q.norm_sqr();
    let den = q2 + 1.0;
    let m = if at_harmonic { k1 / g1 * e.q / den } else { e.m };
    let nc = m + ae;
    let n = [nc.re, nc.im];
    let nq = dot(nc, e.q);
    let mut j = Matrix4::zeros();
    for i in 0..2 {
        j[(i, i)] = -g1 / 2.0;
        for k in 0..2 {
            let d = if i == k { 1.0 } else { 0.0 };
            j[(i, 2 + k)] = k1 / 2.0 * (d / den - 2.0 * q[i] * q[k] / (den * den));
            j[(2 + i, k)] = b1 / 2.0 * d * (q2 - 1.0) - b1 * q[i] * q[k];
            j[(2 + i, 2 + k)] = b1 * (n[i] * q[k] - d * nq - q[i] * n[k]);
        }
    }
    j
}

/// Spectrum from a dense eigensolver; the only route for the trivial state.
pub fn numeric_stability(e: &EnvelopeState, params: &PhysicalParams, ae: Complex64) -> StabilityReport {
    let ev = jacobian_averaged(e, params, ae, false).complex_eigenvalues();
    let mut eigs = [ev[0], ev[1], ev[2], ev[3]];
    sort_eigenvalues(&mut eigs);
    StabilityReport::from_eigenvalues(eigs)
}

/// Closed-form spectrum of the linearization at a harmonic state.
///
/// ZeroInv states (and the degenerate one, where `w = 0`) give
/// `{-gamma1/2, -gamma1/2, +i b1 w, -i b1 w}` with `w = Ae ^ Qr`. The
/// NonZeroInv states give the double roots
/// `(-gamma1 +- sqrt(gamma1^2 + 4 b1 kappa1 I)) / 4`.
pub fn eigenvalues_harmonic(h: &HarmonicState, params: &PhysicalParams) -> Result<StabilityReport> {
    let g1 = params.scaled_damping();
    let b1 = params.scaled_bloch_coupling();
    let k1 = params.scaled_field_coupling();
    let eigs = match h.branch {
        Branch::Trivial => return Err(Error::BranchMismatch(h.branch.to_string())),
        Branch::ZeroInvPlus | Branch::ZeroInvMinus | Branch::Degenerate => {
            let w = wedge(h.ae, h.qr);
            let re = Complex64::new(-g1 / 2.0, 0.0);
            [re, re, Complex64::new(0.0, b1 * w), Complex64::new(0.0, -b1 * w)]
        }
        Branch::NonZeroInvPlus | Branch::NonZeroInvMinus => {
            let root = Complex64::new(g1 * g1 + 4.0 * b1 * k1 * h.inversion, 0.0).sqrt();
            let plus = (-g1 + root) / 4.0;
            let minus = (-g1 - root) / 4.0;
            [plus, plus, minus, minus]
        }
    };
    let mut eigs = eigs;
    sort_eigenvalues(&mut eigs);
    Ok(StabilityReport::from_eigenvalues(eigs))
}

/// `|(f, g)|` at the state; zero up to rounding for a harmonic state.
pub fn verify_stationary(h: &HarmonicState, params: &PhysicalParams, ae: Complex64) -> f64 {
    let d = AveragedField::closed_form(params, ae).unscaled(&h.envelope());
    (d.m.norm_sqr() + d.q.norm_sqr()).sqrt()
}
