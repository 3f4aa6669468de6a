//! Application config: every tunable default in one TOML document.

use std::path::{Path, PathBuf};

use avr_core::attention_core::{LeakageConfig, DEFAULT_LAST_K};
use avr_core::pem_pipeline::{EndpointConfig, PipelineConfig};
use avr_core::rl_core::{GrpoConfig, RewardConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionSettings {
    /// Number of final layers aggregated by `attn-report`.
    pub last_k: usize,
}

impl Default for AttentionSettings {
    fn default() -> Self {
        AttentionSettings { last_k: DEFAULT_LAST_K }
    }
}

/// File locations. Relative paths are resolved against the directory of
/// the config file they appear in.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labeled: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Scripted samples replayed by `annotate --mock`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Seed for every stochastic subcommand.
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub rewards: RewardConfig,
    pub grpo: GrpoConfig,
    pub attention: AttentionSettings,
    pub leakage: LeakageConfig,
    pub endpoint: EndpointConfig,
    pub paths: PathsConfig,
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|message| CliError::Config { path: path.to_path_buf(), message })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate().map_err(|message| CliError::Config { path: path.to_path_buf(), message })?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.input,
            &mut p.output,
            &mut p.labeled,
            &mut p.report,
            &mut p.mock_script,
            &mut self.endpoint.prompt_template,
        ] {
            if let Some(path) = slot.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.pipeline.validate().map_err(|e| e.to_string())?;
        self.rewards.validate().map_err(|e| e.to_string())?;
        self.grpo.validate().map_err(|e| e.to_string())?;
        if self.attention.last_k == 0 {
            return Err("attention.last_k must be at least 1".into());
        }
        if self.leakage.layers == 0 || self.leakage.dim == 0 {
            return Err("leakage.layers and leakage.dim must be at least 1".into());
        }
        if !(self.endpoint.timeout_secs.is_finite() && self.endpoint.timeout_secs > 0.0) {
            return Err(format!(
                "endpoint.timeout_secs must be positive, got {}",
                self.endpoint.timeout_secs
            ));
        }
        for (name, path) in [
            ("paths.input", &self.paths.input),
            ("paths.mock_script", &self.paths.mock_script),
            ("endpoint.prompt_template", &self.endpoint.prompt_template),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(format!("{name}: {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
