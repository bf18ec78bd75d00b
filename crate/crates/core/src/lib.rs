//! Parameter-server simulator for straggler-tolerant and asynchronous SGD.
//!
//! - [`runtime`]: service-time laws, order statistics, aging classes.
//! - [`optimization`]: objectives with known constants, gradient oracles,
//!   learning-rate schedules.
//! - [`sim`]: the discrete-event engine for K-sync, K-batch-sync, K-async
//!   and K-batch-async.
//! - [`theory`]: runtime expectations, error bounds and staleness estimators.
//! - [`experiment`]: config-driven replicated runs, sweeps and outputs.

pub mod error;
pub mod experiment;
pub mod optimization;
pub mod rng;
pub mod runtime;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
pub use optimization::{LogisticObjective, LrSchedule, Objective, ObjectiveConstants, ObjectiveSpec, QuadraticObjective};
pub use runtime::{DistributionKind, Estimate, MonotonicityClass, OrderStatMethod, RuntimeDistribution};
pub use sim::{run, run_replication, Protocol, SimTrace, Simulation, TraceRecord, VariantConfig};
