use thiserror::Error;

use crate::config::ConfigError;
use crate::model::ModelError;
use crate::ode::OdeError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("amplitudes are not normalized: charge = {charge}")]
    NotNormalized { charge: f64 },
    #[error("point is at the North Pole; the North chart is undefined")]
    AtNorthPole,
    #[error("point is at the South Pole; the South chart is undefined")]
    AtSouthPole,
    #[error("Lyapunov parameter eps = {eps} must lie in [0, Omega = {omega})")]
    EpsOutOfRange { eps: f64, omega: f64 },
    #[error("invalid arguments: {0}")]
    InvalidParams(String),
    #[error("no closed-form spectrum for branch {0}")]
    BranchMismatch(String),
    #[error("branch {branch} does not exist for c*r = {cr}, |Ae| = {ae}")]
    BranchUnavailable { branch: String, cr: f64, ae: f64 },
    #[error("sample at t = {t} cannot be expressed in the North chart")]
    ChartConversionFailure { t: f64 },
    #[error("the operation requires the resonance regime Omega == omega")]
    NotResonant,
}
