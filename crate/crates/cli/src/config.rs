//! TOML run configuration, one section per module:
//!
//! ```toml
//! [generation]            # rewrite run
//! provider = "http"       # or "mock:echo"
//! endpoint = "https://example.invalid/v1/chat/completions"
//! model = "gpt-4o"
//! api_key_env = "GENERATION_API_KEY"
//!
//! [embedding]             # eval semantic
//! provider = "mock:ngram"
//!
//! [rewrite]
//! segment_budget = 2500
//!
//! [embed]
//! batch_size = 32
//! cache_dir = "emb-cache"
//!
//! [eval]
//! granularity = "sentence"
//! thresholds = "0.5:1.0:0.05"
//! tau = 0.7
//!
//! [detect]
//! lexicon = "selftalk.txt"
//! fpr = 0.01
//! ```
//!
//! Every key is optional. Provider sections are merged over role-specific
//! defaults, so `[embedding] provider = "http"` keeps `EMBEDDING_API_KEY`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tracereform::corpus::Granularity;
use tracereform::lexmatch::{EvalConfig, ThresholdGrid};
use tracereform::providers::ProviderSettings;
use tracereform::rewriter::RewriteConfig;
use tracereform::selftalk::SelfTalkLexicon;
use tracereform::semantic::EmbedConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub generation: ProviderSettings,
    pub embedding: ProviderSettings,
    pub rewrite: RewriteConfig,
    pub embed: EmbedSection,
    pub eval: EvalSection,
    pub detect: DetectSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSection {
    #[serde(flatten)]
    pub settings: EmbedConfig,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub granularity: Granularity,
    pub thresholds: String,
    pub tau: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            granularity: Granularity::Sentence,
            thresholds: "0.5:1.0:0.05".into(),
            tau: 0.7,
        }
    }
}

impl EvalSection {
    pub fn to_eval_config(&self) -> Result<EvalConfig> {
        let grid: ThresholdGrid = self.thresholds.parse()?;
        Ok(EvalConfig::new(grid.values(), self.granularity, self.tau)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub lexicon: Option<PathBuf>,
    pub fpr: f64,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection { lexicon: None, fpr: 0.01 }
    }
}

impl DetectSection {
    pub fn load_lexicon(&self) -> Result<SelfTalkLexicon> {
        match &self.lexicon {
            Some(path) => SelfTalkLexicon::load(path).with_context(|| format!("loading lexicon {}", path.display())),
            None => Ok(SelfTalkLexicon::default()),
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    generation: toml::Table,
    embedding: toml::Table,
    rewrite: RewriteConfig,
    embed: EmbedSection,
    eval: EvalSection,
    detect: DetectSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            generation: ProviderSettings::generation_default(),
            embedding: ProviderSettings::embedding_default(),
            rewrite: RewriteConfig::default(),
            embed: EmbedSection::default(),
            eval: EvalSection::default(),
            detect: DetectSection::default(),
        }
    }
}

fn merge_provider(base: ProviderSettings, overrides: toml::Table, section: &str) -> Result<ProviderSettings> {
    let mut table = toml::Table::try_from(&base)?;
    for (k, v) in overrides {
        if !table.contains_key(&k) && !matches!(k.as_str(), "endpoint" | "system_prompt") {
            bail!("unknown key `{k}` in [{section}]");
        }
        table.insert(k, v);
    }
    table
        .try_into()
        .with_context(|| format!("invalid [{section}] section"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let cfg = RunConfig {
            generation: merge_provider(ProviderSettings::generation_default(), raw.generation, "generation")?,
            embedding: merge_provider(ProviderSettings::embedding_default(), raw.embedding, "embedding")?,
            rewrite: raw.rewrite,
            embed: raw.embed,
            eval: raw.eval,
            detect: raw.detect,
        };
        cfg.rewrite.validate()?;
        cfg.eval.to_eval_config()?;
        for (name, p) in [("generation", &cfg.generation), ("embedding", &cfg.embedding)] {
            if !p.is_mock() && p.api_key_env.trim().is_empty() {
                bail!("[{name}] api_key_env must name an environment variable");
            }
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn provider_sections_merge_over_role_defaults() {
        let cfg = RunConfig::parse(
            "[embedding]\nprovider = \"http\"\nendpoint = \"http://localhost:1/v1/embeddings\"\n\n[rewrite]\nsegment_budget = 900\n",
        )
        .unwrap();
        assert_eq!(cfg.embedding.provider, "http");
        assert_eq!(cfg.embedding.api_key_env, "EMBEDDING_API_KEY");
        assert_eq!(cfg.generation, ProviderSettings::generation_default());
        assert_eq!(cfg.rewrite.segment_budget, 900);
        assert_eq!(cfg.rewrite.max_retries, 3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("[generation]\nproviderr = \"http\"\n").is_err());
        assert!(RunConfig::parse("[eval]\nthresholds = \"1:0:0.1\"\n").is_err());
        assert!(RunConfig::parse("[rewrite]\nsegment_budget = 0\n").is_err());
        assert!(RunConfig::parse("[generation]\nprovider = \"http\"\napi_key_env = \"\"\n").is_err());
        assert!(RunConfig::parse("[nonsense]\n").is_err());
    }

    #[test]
    fn embed_section_flattens() {
        let cfg = RunConfig::parse("[embed]\nbatch_size = 4\ncache_dir = \"c\"\n").unwrap();
        assert_eq!(cfg.embed.settings.batch_size, 4);
        assert_eq!(cfg.embed.cache_dir, Some(PathBuf::from("c")));
    }
}
