pub mod baseline;
pub mod config;
pub mod random;
pub mod report;
pub mod seeds;
pub mod suite;

pub use baseline::{check_or_write, Baseline, Drift, DEFAULT_DRIFT};
pub use config::{CstarPolicy, SuiteConfig, KNOWN_CHECKS};
pub use random::{random_field, random_nonnegative, random_vector_field};
pub use report::{render_report, ReportFormat};
pub use seeds::trial_seed;
pub use suite::{load_records, run_suite, write_records, ModelContext, Outcome, Task};
