//! Feedback-coupled memory systems: agents steered by incentives read off a
//! decaying environmental memory that their own disagreement feeds.
//!
//! The crate provides the reduced `(S, d)` map and its nonlinear variants,
//! the two-agent and N-agent models, their linearizations and stability
//! boundary, stochastic early-warning statistics, and a set of scripted
//! numerical experiments.

pub mod dynamics;
pub mod error;
pub mod ews;
pub mod experiments;
pub mod meanfield;
pub mod noise;
pub mod params;
pub mod simulate;
pub mod spectral;
pub mod state;

pub use dynamics::{
    global_signal, incentive_field, memory_blind_pair_step, memoryless_step, pair_step,
    perturbed_step, reduced_step, saturated_step, Perturbation,
};
pub use error::{FcmsError, Result};
pub use meanfield::{meanfield_step, meanfield_step_in_place, MeanFieldWorkspace};
pub use noise::{NoiseSpec, NoiseStream, NoiseTarget, PRNG_NAME};
pub use params::ModelParams;
pub use simulate::{
    simulate, simulate_with, ModelKind, SimOptions, StepRecord, SystemState, Trajectory,
};
pub use spectral::{
    critical_beta, eig2, eig_small, full_jacobian, lambda_curve, recovery_time_theory,
    reduced_jacobian, spectral_radius, spectral_report, stability_criterion, Matrix2, Matrix3,
    SpectralReport,
};
pub use state::{PairState, PopulationState, ReducedState};

#[cfg(test)]
mod properties;
