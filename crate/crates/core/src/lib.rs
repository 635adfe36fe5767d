//! Template-based reduction of Linux Audit event streams for periodic
//! real-time tasks.
//!
//! A task's loop iterations produce near-identical syscall sequences. Those
//! sequences are learned offline as templates ([`learner`]), matched at
//! runtime by a per-task prefix automaton ([`reducer`]) and replaced by one
//! record per instance, or one per run of consecutive instances. The
//! [`reconstruct`] module expands reduced logs back into per-syscall records.

pub mod analytics;
pub mod audit_record;
pub mod buffer_sim;
pub mod learner;
pub mod reconstruct;
pub mod reducer;
pub mod scalar;
pub mod template;
pub mod workload_gen;

pub use analytics::{compare, ComparisonReport, Prediction, TaskParams};
pub use audit_record::{parse_record, record_size_bytes, serialize_record, AuditRecord, TaskId};
pub use buffer_sim::{min_capacity_for_lossless, simulate, BufferConfig, DrainParams, SimResult};
pub use learner::{learn, Boundaries, LearnConfig, TemporalPolicy};
pub use reconstruct::{reconstruct, verify_retention, ReconstructOptions, RetentionReport};
pub use reducer::{reduce_stream, Mode, ReduceCounters, StreamReducer, TemporalOverride};
pub use scalar::Scalar;
pub use template::{parse_template_file, serialize_template, Template, TemplateEntry, TemplateSet};

/// Task parameters evaluated in double precision.
pub type TaskParamsF64 = TaskParams<f64>;
/// Task parameters evaluated in single precision.
pub type TaskParamsF32 = TaskParams<f32>;
/// Task parameters evaluated exactly.
pub type ExactTaskParams = TaskParams<num_rational::BigRational>;
