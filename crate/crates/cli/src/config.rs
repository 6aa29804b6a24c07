use std::path::{Path, PathBuf};

use dytag_core::discriminative::DiscriminativeConfig;
use dytag_core::embedding::EmbeddingConfig;
use dytag_core::generation::GenConfig;
use dytag_core::structural::StructuralConfig;
use dytag_core::textual::TextualConfig;
use dytag_llm::{ChatConfig, ScenarioDescriptors, ScenarioKind};
use serde::{Deserialize, Serialize};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Recency,
    Uniform,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Structural,
    Embedding,
    Textual,
    Discriminative,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub llm_cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub policy: PolicyKind,
    pub scenario: ScenarioKind,
    pub descriptors: ScenarioDescriptors,
    /// Calls per decision before the stub takes over.
    pub parse_attempts: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Recency,
            scenario: ScenarioKind::Generic,
            descriptors: ScenarioDescriptors::default(),
            parse_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub suites: Vec<SuiteKind>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { suites: vec![SuiteKind::Structural, SuiteKind::Embedding, SuiteKind::Discriminative] }
    }
}

/// Everything a run needs. The single `rng_seed` is copied into every
/// module's seed field when the config is resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rng_seed: u64,
    pub jobs: Option<usize>,
    pub paths: Paths,
    pub generation: GenConfig,
    pub agent: AgentConfig,
    pub structural: StructuralConfig,
    pub embedding: EmbeddingConfig,
    pub textual: TextualConfig,
    pub discriminative: DiscriminativeConfig,
    pub endpoint: ChatConfig,
    pub evaluation: EvaluationConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    /// Apply command-line overrides and fan the seed out.
    pub fn resolve(mut self, seed: Option<u64>, jobs: Option<usize>) -> Self {
        if let Some(s) = seed {
            self.rng_seed = s;
        }
        if jobs.is_some() {
            self.jobs = jobs;
        }
        self.generation.rng_seed = self.rng_seed;
        self.embedding.seed = self.rng_seed;
        self.textual.seed = self.rng_seed;
        if let Some(j) = self.jobs {
            self.generation.parallelism = j.max(1);
            self.textual.parallelism = j.max(1);
        }
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn write_beside(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(RESOLVED_CONFIG_FILE), self.to_toml())
    }
}
