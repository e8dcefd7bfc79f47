//! Simulation of hierarchical, RAN-aware placement and allocation for AI
//! services sharing a heterogeneous edge cluster with virtualized RAN
//! functions.

pub mod allocator;
pub mod critic;
pub mod experiment;
pub mod model;
pub mod placement;
pub mod scalar;
pub mod sim;
pub mod workload;

pub use scalar::Scalar;

pub type InstanceLoad = allocator::InstanceLoad<f64>;
pub type Mlp = critic::Mlp<f64>;
pub type MlpF32 = critic::Mlp<f32>;
pub type CriticModel = critic::CriticModel<f64>;
