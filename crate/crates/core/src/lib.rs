//! Simulation core for a Rydberg-mediated quantum antenna: a single trapped
//! atom coupled by dipolar exchange to a nearby cold ensemble, which writes
//! its excitation into a directional spin wave for photonic entanglement
//! distribution.
//!
//! Internal units are rad/us for angular frequencies, um for lengths and us
//! for times. Conversions from the `2pi x MHz` convention live in [`units`]
//! and are applied once, when a configuration is loaded.

pub mod bessel;
pub mod cloud;
pub mod config;
pub mod coupling;
pub mod error;
pub mod link;
pub mod ode;
pub mod pipeline;
pub mod quadrature;
pub mod retrieval;
pub mod rng;
pub mod units;
pub mod write;

pub use cloud::{AtomCloud, CloudGeometry, TweezerSpec, Vec3};
pub use config::{load_config, Experiment, ExperimentConfig, ProfileMode};
pub use coupling::{ChannelLabel, CollectiveStrength, CouplingSet, RydbergChannel, TwoLevelEff};
pub use error::{Error, Result};
pub use link::{
    AtomPhotonState, BellOutcome, BellState, DetectorPattern, LinkBudget, RateModel, RateReport,
};
pub use ode::{ComplexSystem, Dopri5, StepStats};
pub use pipeline::{
    run_pipeline, two_node_pipeline, PipelineRun, RunReport, Summary, WriteEnsemble,
};
pub use retrieval::{RetrievalParams, SpinWaveProfile};
pub use write::{DecayModel, PulseSchedule, PulseShape, WriteOptions, WriteResult};
