//! Dense continuous-time LTI algebra: state-space realizations, Riccati
//! equations, the H-infinity norm, the lower LFT and output-feedback
//! H-infinity synthesis.

pub mod linalg;
mod norm;
mod plant;
pub mod riccati;
mod state_space;
mod synthesis;

pub use norm::{hinf_norm, is_norm_upper_bound};
pub use plant::{lft_closed_loop, GeneralizedPlant};
pub use riccati::{solve_care, solve_lyapunov, solve_riccati};
pub use state_space::{MatrixDoc, RealizationDoc, StateSpace};
pub use synthesis::{synthesize_hinf, synthesize_hinf_with, HinfController, SynthesisOptions};
