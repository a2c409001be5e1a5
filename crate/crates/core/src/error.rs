use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("care-unsolvable: {0}")]
    CareUnsolvable(String),

    #[error("unbounded-norm: system matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    UnboundedNorm { abscissa: f64 },

    #[error("plant-irregular: {0}")]
    PlantIrregular(String),

    #[error("synthesis-infeasible: no admissible controller for gamma <= {gamma_max:e}")]
    SynthesisInfeasible { gamma_max: f64 },

    #[error("ill-posed-interconnection: I - D22*DK is singular")]
    IllPosedInterconnection,

    #[error("integration-divergence at t = {time} s")]
    IntegrationDivergence { time: f64 },

    #[error("runtime-divergence: controller state left the finite range after t = {last_finite_time} s")]
    RuntimeDivergence { last_finite_time: f64 },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
