//! Rate studies: noise, parameter rules, log-log fits, tables and the invariant battery.

pub mod fit;
pub mod noise;
pub mod study;
pub mod tables;
pub mod verify;

pub use fit::{fit_rate, RateFit};
pub use noise::{make_noisy_data, NoiseModel};
pub use study::{run_study, CellRecord, NormResult, RateStudyConfig, RateStudyResult, Rule, StudyProblem};
pub use tables::{emit_tables, to_json_string, TableFormat};
pub use verify::{verify_suite, Check, VerifyReport};
