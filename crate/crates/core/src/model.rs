//! Model constants, the quasiperiodic pumping, and the state types shared by
//! the full, reduced and envelope dynamics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Charge deviations below this are treated as rounding and repaired by
/// [`PureState::new`]; larger ones are rejected.
pub const CHARGE_REPAIR_TOL: f64 = 1e-6;

/// Default relative gap between an off-carrier harmonic and the carrier.
pub const DEFAULT_FREQUENCY_GAP: f64 = 1e-9;

/// Relative tolerance for deciding `Omega == omega`.
pub const RESONANCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("harmonic at frequency {freq} lies within the gap {gap} of the carrier {carrier}")]
    HarmonicOnCarrier { freq: f64, carrier: f64, gap: f64 },
    #[error("charge |C1|^2+|C2|^2 = {charge} deviates from 1 by more than {tol}")]
    ChargeViolation { charge: f64, tol: f64 },
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ModelError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value, reason })
    }
}

/// Raw model constants as they appear in a configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    /// Resonator (carrier) frequency `Omega`.
    pub cavity_freq: f64,
    /// Lower level frequency `omega1`.
    pub omega1: f64,
    /// Upper level frequency `omega2`.
    pub omega2: f64,
    /// Field dissipation `gamma`.
    pub gamma: f64,
    /// Dipole coupling `p`.
    pub dipole: f64,
    /// Light-speed constant.
    pub c: f64,
    /// Action constant.
    pub hbar: f64,
}

impl Default for ModelConstants {
    /// Normalized units: `c = hbar = Omega = omega = 1`, `r = 1`, `p = 1e-3`.
    fn default() -> Self {
        Self {
            cavity_freq: 1.0,
            omega1: 0.0,
            omega2: 1.0,
            gamma: 1e-3,
            dipole: 1e-3,
            c: 1.0,
            hbar: 1.0,
        }
    }
}

/// Validated model constants together with the derived couplings.
///
/// `p` and `gamma` may be zero (the uncoupled and the conservative limits are
/// useful reference runs); the `scaled_*` quantities and [`ratio`] are only
/// meaningful for `p > 0` and `gamma > 0`.
///
/// [`ratio`]: PhysicalParams::ratio
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelConstants", try_from = "ModelConstants")]
pub struct PhysicalParams {
    k: ModelConstants,
    transition: f64,
    coupling: f64,
    bloch_coupling: f64,
}

impl TryFrom<ModelConstants> for PhysicalParams {
    type Error = ModelError;
    fn try_from(k: ModelConstants) -> Result<Self, ModelError> {
        Self::new(k)
    }
}

impl From<PhysicalParams> for ModelConstants {
    fn from(p: PhysicalParams) -> Self {
        p.k
    }
}

impl PhysicalParams {
    pub fn new(k: ModelConstants) -> Result<Self, ModelError> {
        check("Omega", k.cavity_freq, k.cavity_freq > 0.0, "must be positive")?;
        check("omega1", k.omega1, true, "must be finite")?;
        check("omega2", k.omega2, k.omega2 > k.omega1, "must exceed omega1")?;
        check("gamma", k.gamma, k.gamma >= 0.0, "must be non-negative")?;
        check("p", k.dipole, k.dipole >= 0.0, "must be non-negative")?;
        check("c", k.c, k.c > 0.0, "must be positive")?;
        check("hbar", k.hbar, k.hbar > 0.0, "must be positive")?;
        let transition = k.omega2 - k.omega1;
        let coupling = k.dipole * transition;
        Ok(Self {
            k,
            transition,
            coupling,
            bloch_coupling: coupling / (k.c * k.hbar),
        })
    }

    /// Resonant normalized units (`Omega = omega = c = hbar = 1`) with
    /// `gamma = p / r`.
    pub fn normalized(r: f64, p: f64) -> Result<Self, ModelError> {
        check("r", r, r > 0.0, "must be positive")?;
        Self::new(ModelConstants {
            gamma: p / r,
            dipole: p,
            ..ModelConstants::default()
        })
    }

    /// Same constants with the coupling set to `p` and `gamma = p / r`.
    pub fn with_coupling(&self, p: f64, r: f64) -> Result<Self, ModelError> {
        check("r", r, r > 0.0, "must be positive")?;
        Self::new(ModelConstants {
            gamma: p / r,
            dipole: p,
            ..self.k
        })
    }

    pub fn constants(&self) -> ModelConstants {
        self.k
    }
    pub fn cavity_freq(&self) -> f64 {
        self.k.cavity_freq
    }
    pub fn omega1(&self) -> f64 {
        self.k.omega1
    }
    pub fn omega2(&self) -> f64 {
        self.k.omega2
    }
    pub fn gamma(&self) -> f64 {
        self.k.gamma
    }
    pub fn dipole(&self) -> f64 {
        self.k.dipole
    }
    pub fn c(&self) -> f64 {
        self.k.c
    }
    pub fn hbar(&self) -> f64 {
        self.k.hbar
    }

    /// Level splitting `omega = omega2 - omega1`.
    pub fn transition_freq(&self) -> f64 {
        self.transition
    }
    /// `kappa = p * omega`.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }
    /// `b = kappa / (c hbar)`, the rate in the Bloch-sphere equations.
    pub fn bloch_coupling(&self) -> f64 {
        self.bloch_coupling
    }
    /// `2 c kappa / Omega`, the source strength in the `M` equation.
    pub fn field_coupling(&self) -> f64 {
        2.0 * self.k.c * self.coupling / self.k.cavity_freq
    }
    /// `r = p / gamma`.
    pub fn ratio(&self) -> f64 {
        self.k.dipole / self.k.gamma
    }
    /// `gamma1 = gamma / p = 1 / r`.
    pub fn scaled_damping(&self) -> f64 {
        self.k.gamma / self.k.dipole
    }
    /// `kappa1 = 2 c omega / Omega`.
    pub fn scaled_field_coupling(&self) -> f64 {
        2.0 * self.k.c * self.transition / self.k.cavity_freq
    }
    /// `b1 = omega / (c hbar)`.
    pub fn scaled_bloch_coupling(&self) -> f64 {
        self.transition / (self.k.c * self.k.hbar)
    }

    pub fn is_resonant(&self) -> bool {
        let scale = self.k.cavity_freq.max(self.transition);
        (self.k.cavity_freq - self.transition).abs() <= RESONANCE_TOL * scale
    }
}

/// One off-carrier term `Re[amplitude * exp(-i freq t)]` of the pumping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: Complex64,
    pub freq: f64,
}

/// Quasiperiodic external field
/// `Re[carrier e^{-i Omega t} + sum_k a_k e^{-i Omega_k t}]`.
///
/// The carrier is stored apart from the harmonics so that its coefficient is
/// read, not estimated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Pumping {
    carrier: Complex64,
    harmonics: Vec<Harmonic>,
}

impl Pumping {
    /// `A^e == 0`.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn carrier_only(carrier: Complex64) -> Self {
        Self {
            carrier,
            harmonics: Vec::new(),
        }
    }

    pub fn new(carrier: Complex64, harmonics: Vec<Harmonic>, cavity_freq: f64) -> Result<Self, ModelError> {
        Self::with_gap(carrier, harmonics, cavity_freq, DEFAULT_FREQUENCY_GAP)
    }

    /// Rejects harmonics closer than `gap * Omega` to `+-Omega`; a term at
    /// `-Omega` would feed the carrier coefficient through its conjugate.
    pub fn with_gap(
        carrier: Complex64,
        harmonics: Vec<Harmonic>,
        cavity_freq: f64,
        gap: f64,
    ) -> Result<Self, ModelError> {
        check("Omega", cavity_freq, cavity_freq > 0.0, "must be positive")?;
        let min_sep = gap * cavity_freq;
        for h in &harmonics {
            check("pump.harmonic.freq", h.freq, true, "must be finite")?;
            if !(h.amplitude.re.is_finite() && h.amplitude.im.is_finite()) {
                return Err(ModelError::InvalidParameter {
                    name: "pump.harmonic",
                    value: h.amplitude.norm(),
                    reason: "amplitude must be finite",
                });
            }
            if (h.freq - cavity_freq).abs() < min_sep || (h.freq + cavity_freq).abs() < min_sep {
                return Err(ModelError::HarmonicOnCarrier {
                    freq: h.freq,
                    carrier: cavity_freq,
                    gap: min_sep,
                });
            }
        }
        Ok(Self { carrier, harmonics })
    }

    /// The coefficient `A^e` at the carrier frequency.
    pub fn carrier(&self) -> Complex64 {
        self.carrier
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    /// Value of the field at time `t`.
    pub fn eval(&self, params: &PhysicalParams, t: f64) -> f64 {
        let mut v = (self.carrier * Complex64::cis(-params.cavity_freq() * t)).re;
        for h in &self.harmonics {
            v += (h.amplitude * Complex64::cis(-h.freq * t)).re;
        }
        v
    }

    /// Largest angular frequency present (the carrier counts even when zero).
    pub fn max_frequency(&self, params: &PhysicalParams) -> f64 {
        self.harmonics
            .iter()
            .map(|h| h.freq.abs())
            .fold(params.cavity_freq(), f64::max)
    }

    /// Same pumping with every coefficient multiplied by `e^{i phi}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let rot = Complex64::cis(phi);
        Self {
            carrier: self.carrier * rot,
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    amplitude: h.amplitude * rot,
                    freq: h.freq,
                })
                .collect(),
        }
    }
}

/// A point `(A, B, C1, C2)` of the full phase space `R^2 x S^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    pub a: f64,
    pub b: f64,
    pub c1: Complex64,
    pub c2: Complex64,
}

impl PureState {
    /// Builds a state on the charge sphere, renormalizing deviations below
    /// [`CHARGE_REPAIR_TOL`].
    pub fn new(a: f64, b: f64, c1: Complex64, c2: Complex64) -> Result<Self, ModelError> {
        check("A", a, true, "must be finite")?;
        check("B", b, true, "must be finite")?;
        let raw = Self { a, b, c1, c2 };
        let charge = raw.charge();
        if !charge.is_finite() || (charge - 1.0).abs() > CHARGE_REPAIR_TOL {
            return Err(ModelError::ChargeViolation {
                charge,
                tol: CHARGE_REPAIR_TOL,
            });
        }
        Ok(raw.normalized())
    }

    /// No charge check; used for integrator output where drift is a monitor.
    pub fn unchecked(a: f64, b: f64, c1: Complex64, c2: Complex64) -> Self {
        Self { a, b, c1, c2 }
    }

    pub fn ground(a: f64, b: f64) -> Self {
        Self::unchecked(a, b, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// `|C1|^2 + |C2|^2`.
    pub fn charge(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let s = self.charge().sqrt();
        Self {
            c1: self.c1 / s,
            c2: self.c2 / s,
            ..*self
        }
    }

    /// Population inversion `|C2|^2 - |C1|^2`.
    pub fn inversion(&self) -> f64 {
        self.c2.norm_sqr() - self.c1.norm_sqr()
    }

    pub fn maxwell_amplitude(&self, cavity_freq: f64) -> Complex64 {
        maxwell_amplitude(self.a, self.b, cavity_freq)
    }

    pub(crate) fn to_array(self) -> [f64; 6] {
        [self.a, self.b, self.c1.re, self.c1.im, self.c2.re, self.c2.im]
    }

    pub(crate) fn from_array(y: &[f64; 6]) -> Self {
        Self::unchecked(y[0], y[1], Complex64::new(y[2], y[3]), Complex64::new(y[4], y[5]))
    }
}

/// The `U(1)` gauge action `(A, B, e^{i theta} C1, e^{i theta} C2)`.
pub fn gauge_action(theta: f64, x: &PureState) -> PureState {
    let rot = Complex64::cis(theta);
    PureState {
        c1: rot * x.c1,
        c2: rot * x.c2,
        ..*x
    }
}

/// Complex Maxwell amplitude `M = A + i B / Omega`.
pub fn maxwell_amplitude(a: f64, b: f64, cavity_freq: f64) -> Complex64 {
    Complex64::new(a, b / cavity_freq)
}

/// Inverse of [`maxwell_amplitude`]: `(A, B) = (Re M, Omega Im M)`.
pub fn field_from_amplitude(m: Complex64, cavity_freq: f64) -> (f64, f64) {
    (m.re, cavity_freq * m.im)
}

/// Energy of the coupled system in the dipole approximation, including the
/// time-dependent pumping term.
pub fn hamiltonian(x: &PureState, t: f64, params: &PhysicalParams, pump: &Pumping) -> f64 {
    let c = params.c();
    let om = params.cavity_freq();
    let field = (x.b * x.b + om * om * x.a * x.a) / (2.0 * c * c);
    let levels = params.hbar() * (params.omega1() * x.c1.norm_sqr() + params.omega2() * x.c2.norm_sqr());
    let dipole = (x.c1.conj() * x.c2).im;
    field + levels - 2.0 * params.coupling() / c * (x.a + pump.eval(params, t)) * dipole
}

/// Point of the model sphere `|Z| = 1/2`; `Z3` is half the population
/// inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

impl BlochPoint {
    pub const NORTH_POLE: BlochPoint = BlochPoint { z1: 0.0, z2: 0.0, z3: 0.5 };
    pub const SOUTH_POLE: BlochPoint = BlochPoint { z1: 0.0, z2: 0.0, z3: -0.5 };

    /// `Z = Z1 + i Z2`.
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.z1, self.z2)
    }

    /// `|Z|^2 - 1/4`.
    pub fn sphere_defect(&self) -> f64 {
        self.z1 * self.z1 + self.z2 * self.z2 + self.z3 * self.z3 - 0.25
    }

    pub fn inversion(&self) -> f64 {
        2.0 * self.z3
    }

    pub fn distance(&self, other: &BlochPoint) -> f64 {
        ((self.z1 - other.z1).powi(2) + (self.z2 - other.z2).powi(2) + (self.z3 - other.z3).powi(2)).sqrt()
    }
}

/// Stereographic chart of the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    /// Projection from the North Pole; coordinate `Q`, excludes full inversion.
    North,
    /// Projection from the South Pole; coordinate `Sigma`, excludes the ground state.
    South,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::North => Chart::South,
            Chart::South => Chart::North,
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Chart::North => 0,
            Chart::South => 1,
        }
    }
}

/// A point `(M, Bloch point)` of the reduced phase space `R^2 x S^2`, with the
/// Bloch point carried as a coordinate of the active chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub m: Complex64,
    pub chart: Chart,
    pub coord: Complex64,
}

impl ReducedState {
    pub fn north(m: Complex64, q: Complex64) -> Self {
        Self {
            m,
            chart: Chart::North,
            coord: q,
        }
    }

    pub fn south(m: Complex64, sigma: Complex64) -> Self {
        Self {
            m,
            chart: Chart::South,
            coord: sigma,
        }
    }
}

/// Slowly varying envelopes `(M, Q)` of the interaction picture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeState {
    pub m: Complex64,
    pub q: Complex64,
}

impl EnvelopeState {
    pub fn new(m: Complex64, q: Complex64) -> Self {
        Self { m, q }
    }

    /// `|dM| + |dQ|`, the distance used throughout the asymptotics checks.
    pub fn distance(&self, other: &EnvelopeState) -> f64 {
        (self.m - other.m).norm() + (self.q - other.q).norm()
    }

    pub fn rotated(&self, phi: f64) -> Self {
        let rot = Complex64::cis(phi);
        Self {
            m: self.m * rot,
            q: self.q * rot,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.is_finite() && self.q.is_finite()
    }

    pub(crate) fn to_array(self) -> [f64; 4] {
        [self.m.re, self.m.im, self.q.re, self.q.im]
    }

    pub(crate) fn from_array(y: &[f64; 4]) -> Self {
        Self::new(Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn derived_quantities() {
        let p = PhysicalParams::new(ModelConstants {
            cavity_freq: 2.0,
            omega1: 0.5,
            omega2: 3.5,
            gamma: 0.2,
            dipole: 0.1,
            c: 1.5,
            hbar: 0.7,
        })
        .unwrap();
        assert_eq!(p.transition_freq(), 3.0);
        assert!((p.coupling() - 0.3).abs() < 1e-15);
        assert!((p.bloch_coupling() - 0.3 / (1.5 * 0.7)).abs() < 1e-15);
        assert!((p.scaled_damping() * p.ratio() - 1.0).abs() < 1e-15);
        assert!((p.scaled_bloch_coupling() * p.dipole() - p.bloch_coupling()).abs() < 1e-15);
        assert!((p.scaled_field_coupling() * p.dipole() - 2.0 * p.c() * p.coupling() / p.cavity_freq()).abs() < 1e-15);
        assert!(!p.is_resonant());
    }

    #[test]
    fn rejects_bad_constants() {
        let bad = ModelConstants {
            omega2: -1.0,
            ..Default::default()
        };
        assert!(matches!(PhysicalParams::new(bad), Err(ModelError::InvalidParameter { name: "omega2", .. })));
        let bad = ModelConstants {
            cavity_freq: 0.0,
            ..Default::default()
        };
        assert!(PhysicalParams::new(bad).is_err());
        assert!(PhysicalParams::normalized(0.0, 1e-3).is_err());
    }

    #[test]
    fn pumping_values() {
        let params = PhysicalParams::normalized(1.0, 1e-3).unwrap();
        assert_eq!(Pumping::none().eval(&params, 3.7), 0.0);
        assert_eq!(Pumping::carrier_only(c(1.0, 0.0)).eval(&params, 0.0), 1.0);
        let pump = Pumping::new(c(0.0, 0.0), vec![Harmonic { amplitude: c(2.0, 0.0), freq: 3.0 }], 1.0).unwrap();
        assert!((pump.eval(&params, PI / 3.0) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn carrier_read_back() {
        assert_eq!(Pumping::carrier_only(c(1.0, 2.0)).carrier(), c(1.0, 2.0));
        let pump = Pumping::new(c(0.0, 0.0), vec![Harmonic { amplitude: c(5.0, 0.0), freq: 2.0 }], 1.0).unwrap();
        assert_eq!(pump.carrier(), c(0.0, 0.0));
    }

    #[test]
    fn harmonic_on_carrier_rejected() {
        let h = |f| vec![Harmonic { amplitude: c(1.0, 0.0), freq: f }];
        assert!(matches!(Pumping::new(c(1.0, 0.0), h(1.0), 1.0), Err(ModelError::HarmonicOnCarrier { .. })));
        assert!(Pumping::new(c(1.0, 0.0), h(-1.0), 1.0).is_err());
        assert!(Pumping::new(c(1.0, 0.0), h(1.0 + 1e-12), 1.0).is_err());
        assert!(Pumping::new(c(1.0, 0.0), h(1.0 + 1e-6), 1.0).is_ok());
        assert!(Pumping::with_gap(c(1.0, 0.0), h(1.01), 1.0, 0.1).is_err());
    }

    #[test]
    fn gauge_examples() {
        let x = PureState::new(0.3, -0.2, c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert_eq!(gauge_action(0.0, &x), x);
        let y = gauge_action(PI, &PureState::ground(1.0, 2.0));
        assert!((y.c1 - c(-1.0, 0.0)).norm() < 1e-15 && y.c2.norm() < 1e-15);
        assert_eq!((y.a, y.b), (1.0, 2.0));
        let h = PureState::new(0.0, 0.0, c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)).unwrap();
        let z = gauge_action(PI / 2.0, &h);
        assert!((z.c1 - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((z.c2 - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn maxwell_amplitude_examples() {
        assert_eq!(maxwell_amplitude(0.0, 0.0, 1.0), c(0.0, 0.0));
        assert_eq!(maxwell_amplitude(1.0, 0.0, 2.0), c(1.0, 0.0));
        assert_eq!(maxwell_amplitude(3.0, 4.0, 2.0), c(3.0, 2.0));
        assert_eq!(field_from_amplitude(c(3.0, 2.0), 2.0), (3.0, 4.0));
    }

    #[test]
    fn pure_state_charge_policy() {
        let x = PureState::new(0.0, 0.0, c(1.0 + 2e-7, 0.0), c(0.0, 0.0)).unwrap();
        assert!((x.charge() - 1.0).abs() < 1e-15);
        assert!(matches!(
            PureState::new(0.0, 0.0, c(1.1, 0.0), c(0.0, 0.0)),
            Err(ModelError::ChargeViolation { .. })
        ));
    }

    #[test]
    fn hamiltonian_level_terms() {
        let params = PhysicalParams::new(ModelConstants {
            omega1: 0.4,
            omega2: 1.4,
            hbar: 2.0,
            ..Default::default()
        })
        .unwrap();
        let none = Pumping::none();
        let g = PureState::ground(0.0, 0.0);
        let e = PureState::unchecked(0.0, 0.0, c(0.0, 0.0), c(1.0, 0.0));
        assert!((hamiltonian(&g, 0.0, &params, &none) - 0.8).abs() < 1e-15);
        assert!((hamiltonian(&e, 0.0, &params, &none) - 2.8).abs() < 1e-15);
    }

    #[test]
    fn params_roundtrip_through_serde() {
        let p = PhysicalParams::normalized(2.0, 1e-3).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: PhysicalParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
