//! TOML configuration: service endpoints, replay settings, registry subset,
//! router thresholds, and the parallelism limit. Every field has a default,
//! so a missing file means "all defaults". Credentials never live in the
//! file; only the names of environment variables do.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use fakescope::analyzers::{AnalyzerConfig, ToolKind};
use fakescope::router::RouterThresholds;
use fakescope::SkillRegistry;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub registry: RegistryConfig,
    pub reasoner: ReasonerConfig,
    pub tools: ToolsConfig,
    pub replay: ReplayConfig,
    pub router: RouterConfig,
    pub analyzers: AnalyzersConfig,
    pub pipeline: PipelineConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistryConfig {
    /// Enabled skill names; empty means the full twelve-skill library.
    pub skills: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReasonerConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub retries: usize,
    /// Name of the environment variable holding the API credential.
    pub credential_env: String,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            endpoint: String::new(),
            model: String::new(),
            temperature: 0.0,
            timeout_secs: 30,
            retries: 2,
            credential_env: "FAKESCOPE_REASONER_KEY".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolsConfig {
    pub timeout_secs: u64,
    pub retries: usize,
    /// Endpoint per tool kind: ocr, lighting, shadow, region.
    pub endpoints: HashMap<String, String>,
}

impl Default for ToolsConfig {
    fn default() -> Self {
        ToolsConfig {
            timeout_secs: 30,
            retries: 2,
            endpoints: HashMap::new(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    /// All external responses come from fixtures; nothing goes on the wire.
    pub enabled: bool,
    pub fixture_dir: String,
    /// Persist live responses as fixtures (mutually exclusive with
    /// `enabled`).
    pub record: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouterConfig {
    pub use_reasoner: bool,
    pub fallback_on_unavailable: bool,
    pub clue_ocr: bool,
    pub text_likelihood_threshold: f64,
    pub hf_ratio_threshold: f64,
    pub residual_energy_threshold: f64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        let thresholds = RouterThresholds::default();
        RouterConfig {
            use_reasoner: true,
            fallback_on_unavailable: true,
            clue_ocr: false,
            text_likelihood_threshold: thresholds.text_likelihood,
            hf_ratio_threshold: thresholds.hf_ratio,
            residual_energy_threshold: thresholds.residual_energy,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzersConfig {
    pub hf_cutoff: f64,
    pub pixel_factor: usize,
}

impl Default for AnalyzersConfig {
    fn default() -> Self {
        let defaults = AnalyzerConfig::default();
        AnalyzersConfig {
            hf_cutoff: defaults.hf_cutoff,
            pixel_factor: defaults.pixel_factor,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub parallelism: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { parallelism: 1 }
    }
}

impl Config {
    /// Loads the file when given, otherwise returns defaults.
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => Config::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replay.enabled && self.replay.fixture_dir.is_empty() {
            bail!("replay mode requires replay.fixture_dir");
        }
        if self.replay.enabled && self.replay.record {
            bail!("replay.enabled and replay.record are mutually exclusive");
        }
        if self.replay.record && self.replay.fixture_dir.is_empty() {
            bail!("recording requires replay.fixture_dir");
        }
        if self.pipeline.parallelism == 0 {
            bail!("pipeline.parallelism must be at least 1");
        }
        for kind in self.tools.endpoints.keys() {
            if ToolKind::parse(kind).is_none() {
                bail!("unknown tool kind {kind:?} in tools.endpoints");
            }
        }
        Ok(())
    }

    /// Registry from the config subset; the full library when unset.
    pub fn registry(&self) -> Result<SkillRegistry> {
        if self.registry.skills.is_empty() {
            Ok(SkillRegistry::full())
        } else {
            Ok(SkillRegistry::with_subset(&self.registry.skills)?)
        }
    }

    pub fn thresholds(&self) -> RouterThresholds {
        RouterThresholds {
            text_likelihood: self.router.text_likelihood_threshold,
            hf_ratio: self.router.hf_ratio_threshold,
            residual_energy: self.router.residual_energy_threshold,
        }
    }

    pub fn analyzer_config(&self) -> AnalyzerConfig {
        AnalyzerConfig {
            hf_cutoff: self.analyzers.hf_cutoff,
            pixel_factor: self.analyzers.pixel_factor,
        }
    }

    pub fn reasoner_timeout(&self) -> Duration {
        Duration::from_secs(self.reasoner.timeout_secs)
    }

    pub fn tools_timeout(&self) -> Duration {
        Duration::from_secs(self.tools.timeout_secs)
    }

    pub fn fixture_dir(&self) -> PathBuf {
        PathBuf::from(&self.replay.fixture_dir)
    }
}
