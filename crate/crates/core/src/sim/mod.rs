//! Monte Carlo simulation of the four strategies on streaming linear-regression data.
//!
//! All enabled strategies of a trial advance in lockstep on the same data
//! stream `(u_k,i, d_k,i)`. Each random mechanism (link activations, agent
//! on/off draws, fusion vectors) has its own stream, so turning a strategy
//! on or off never changes what the others see.

mod curves;
mod data;
mod fusion;
mod runner;
mod strategy;

pub use curves::{average_curves, steady_state, tail_window, LearningCurve, SteadyStateEstimate};
pub use data::{generate_sample, AgentSampler, IterationData, ScenarioTruth};
pub use fusion::{sample_fusion_vector, FusionSampler};
pub use runner::{
    run_centralized_async, run_centralized_sync, run_diffusion_async, run_diffusion_sync, run_strategy, run_trial,
    run_trials, InitialWeights, Scenario, SimulationSettings, TrialCurves, WeightHook,
};
pub use strategy::StrategyKind;

/// Runs are aborted once the MSD exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
