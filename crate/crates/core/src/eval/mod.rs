//! Metrics, the benchmark runner and report output.
//!
//! Costs are l1 distances in encoded space. Success is always re-checked
//! against the classifier rather than taken from the method. Neighbourhood
//! agreement (YNN) uses the training split as reference with `k = 5`.

mod benchmark;
mod method;
mod metrics;
mod report;
mod runner;
mod synthetic;

pub use benchmark::{negative_instances, run_benchmark, BenchmarkConfig, BenchmarkRun};
pub use method::Method;
pub use metrics::{metric_cost, metric_cv, metric_sr, metric_ynn, verify_success, YnnReference, YNN_K};
pub use report::{
    save_records_csv, write_records_csv, BenchmarkReport, MethodSummary, MetricRecord, SeedSummary, REPORT_VERSION,
};
pub use runner::run_method;
pub use synthetic::SyntheticSetup;
