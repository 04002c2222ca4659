//! Batch-queue prediction and resource management for space-shared
//! supercomputers.
//!
//! The crate reads Standard Workload Format traces, reconstructs queue and
//! processor state at every submission, and provides two predictors: an
//! adaptive queue-wait predictor that dispatches between a standard-deviation
//! minimizer, ridge regression and a weighted average depending on the
//! neighborhood of similar history jobs, and a load-aware execution-time
//! predictor that emits probability-weighted range sets. Both feed two
//! resource-management policies (job molding and delayed submissions) that
//! are evaluated against an EASY backfilling scheduler simulator.

pub mod cluster;
pub mod config;
pub mod exectime;
pub mod experiment;
pub mod manager;
pub mod metrics;
pub mod qwait;
pub mod sched;
pub mod simstate;
pub mod stats;
pub mod synth;
pub mod trace;
