//! TOML run configuration.
//!
//! ```toml
//! output_dir = "out"          # optional
//!
//! [system]                    # exactly one of: preset, path, inline fields
//! preset = "default_10bus"
//!
//! [episode]                   # all optional
//! steps = 500
//! dt = 0.01
//! ic_noise_half_width = 0.03
//! seed = 0
//! kappa = [-1.0, 0.0, 1.0]
//! reward_mode = "abs_deviation_diff"   # or "signed_diff"
//!
//! [ppo]                       # all optional, see PpoConfig
//! total_env_steps = 1000000
//! ```
//!
//! Unknown keys are rejected. Errors name the offending field as a dotted path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::defaults::{default_grid, DEFAULT_PRESET};
use crate::env::EpisodeConfig;
use crate::error::{Error, Result};
use crate::grid::GridParams;
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    preset: Option<String>,
    path: Option<PathBuf>,
    inertia: Option<Vec<f64>>,
    damping: Option<Vec<f64>>,
    susceptance: Option<Vec<Vec<f64>>>,
    injection: Option<Vec<f64>>,
    droop: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: SystemSection,
    #[serde(default)]
    episode: EpisodeConfig,
    #[serde(default)]
    ppo: PpoConfig,
    output_dir: Option<PathBuf>,
}

/// Where the grid parameters came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    Preset(String),
    File(PathBuf),
    Inline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: GridParams,
    pub system_source: SystemSource,
    pub episode: EpisodeConfig,
    pub ppo: PpoConfig,
    pub output_dir: PathBuf,
}

#[derive(Serialize)]
struct HashedContent<'a> {
    system: &'a GridParams,
    episode: &'a EpisodeConfig,
    ppo: &'a PpoConfig,
}

impl RunConfig {
    /// Defaults everywhere, default 10-bus system.
    pub fn with_defaults() -> Self {
        RunConfig {
            system: default_grid(),
            system_source: SystemSource::Preset(DEFAULT_PRESET.into()),
            episode: EpisodeConfig::default(),
            ppo: PpoConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }

    /// SHA-256 over the resolved system, episode and PPO settings. The output
    /// directory is excluded so identical runs into different folders agree.
    pub fn content_hash(&self) -> String {
        let content = HashedContent {
            system: &self.system,
            episode: &self.episode,
            ppo: &self.ppo,
        };
        let json = serde_json::to_string(&content).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        prefixed("system", self.system.validate())?;
        prefixed("episode", self.episode.validate())?;
        prefixed("ppo", self.ppo.validate())
    }
}

fn prefixed(prefix: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { path: path.to_path_buf(), message },
        other => other,
    })
}

/// Parses config text; relative `system.path` entries resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse {
        path: PathBuf::from("<config>"),
        message: e.to_string(),
    })?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::config(field, e.into_inner().message().to_string())
    })?;

    let (system, system_source) = resolve_system(raw.system, base_dir)?;
    let config = RunConfig {
        system,
        system_source,
        episode: raw.episode,
        ppo: raw.ppo,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
    };
    config.validate()?;
    Ok(config)
}

fn resolve_system(section: SystemSection, base_dir: &Path) -> Result<(GridParams, SystemSource)> {
    let inline = [
        section.inertia.is_some(),
        section.damping.is_some(),
        section.susceptance.is_some(),
        section.injection.is_some(),
        section.droop.is_some(),
    ];
    let any_inline = inline.iter().any(|&b| b);
    let sources = usize::from(section.preset.is_some()) + usize::from(section.path.is_some()) + usize::from(any_inline);
    if sources != 1 {
        return Err(Error::config(
            "system",
            "specify exactly one of `preset`, `path`, or the inline fields",
        ));
    }

    if let Some(name) = section.preset {
        if name != DEFAULT_PRESET {
            return Err(Error::config(
                "system.preset",
                format!("unknown preset `{name}` (available: {DEFAULT_PRESET})"),
            ));
        }
        return Ok((default_grid(), SystemSource::Preset(name)));
    }

    if let Some(rel) = section.path {
        let path = if rel.is_absolute() { rel } else { base_dir.join(rel) };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let de = toml::Deserializer::parse(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let params: GridParams = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = format!("system({}).{}", path.display(), e.path());
            Error::config(field, e.into_inner().message().to_string())
        })?;
        return Ok((params, SystemSource::File(path)));
    }

    let names = ["inertia", "damping", "susceptance", "injection", "droop"];
    if let Some(i) = inline.iter().position(|&b| !b) {
        return Err(Error::config(format!("system.{}", names[i]), "missing field for inline system"));
    }
    let params = GridParams {
        inertia: section.inertia.expect("checked"),
        damping: section.damping.expect("checked"),
        susceptance: section.susceptance.expect("checked"),
        injection: section.injection.expect("checked"),
        droop: section.droop.expect("checked"),
    };
    Ok((params, SystemSource::Inline))
}
