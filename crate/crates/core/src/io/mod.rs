//! Field files, configuration documents and run reports.

pub mod config;
pub mod field;
pub mod report;

pub use config::{apply_override, load_config, load_config_with_overrides, parse_config, validate_config, BuiltProblem, ConfigDoc};
pub use field::{read_field, write_field, FieldHeader};
pub use report::{read_report, write_report, GridMeta, ReportDoc, RunStatus};
