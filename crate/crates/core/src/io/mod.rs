//! Configuration, run orchestration and file formats.

pub mod config;
pub mod export;
pub mod run;

pub use config::{parse_config, parse_config_str, RunConfig, SystemSource};
pub use export::{export_trajectory, read_trajectory, ArtifactMeta, TOOL_NAME, TOOL_VERSION};
pub use run::{error_record, exit_code, run_command, Command, Overrides, RunReport};
