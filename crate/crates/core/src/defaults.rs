//! The shipped default 10-bus system.

use crate::grid::GridParams;

/// Source of the default parameter set, in the same TOML schema accepted by
/// [`crate::io::config`] for inline systems.
pub const DEFAULT_10BUS_TOML: &str = include_str!("../data/default_10bus.toml");

/// Name under which the default system can be requested from a config file.
pub const DEFAULT_PRESET: &str = "default_10bus";

pub fn default_grid() -> GridParams {
    toml::from_str(DEFAULT_10BUS_TOML).expect("shipped default parameters parse")
}
