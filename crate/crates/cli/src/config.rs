//! Experiment configuration file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Command-line flags override individual values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use linkintent::eval::Gain;
use linkintent::index::{Bm25Params, DEFAULT_TOP_K};
use linkintent::rerank::{RerankOptions, StatsScope};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub taxonomy: Option<PathBuf>,
    pub mappings: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    /// Tweet and query label files, merged in order.
    pub labels: Vec<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub index: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub include_linked_docs: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k: DEFAULT_TOP_K,
            include_linked_docs: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub gain: Gain,
    pub cutoff: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            gain: Gain::Linear,
            cutoff: linkintent::eval::DEFAULT_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub bm25: Bm25Params,
    pub retrieval: RetrievalConfig,
    pub rerank: RerankOptions,
    pub eval: EvalConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            bm25: Bm25Params::default(),
            retrieval: RetrievalConfig::default(),
            rerank: RerankOptions::default(),
            eval: EvalConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file, resolves its relative paths and checks that
    /// every referenced input exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check_inputs()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for path in [
            &mut p.taxonomy,
            &mut p.mappings,
            &mut p.corpus,
            &mut p.qrels,
            &mut p.topics,
            &mut p.policy,
            &mut p.rules,
        ]
        .into_iter()
        .flatten()
        {
            join(path);
        }
        // the index snapshot may be an output, so it is resolved but not checked
        if let Some(path) = &mut p.index {
            join(path);
        }
        p.labels.iter_mut().for_each(join);
        join(&mut self.output_dir);
    }

    fn check_inputs(&self) -> Result<()> {
        let p = &self.paths;
        let inputs = [
            &p.taxonomy,
            &p.mappings,
            &p.corpus,
            &p.qrels,
            &p.topics,
            &p.policy,
            &p.rules,
        ];
        for path in inputs.into_iter().flatten().chain(&p.labels) {
            if !path.exists() {
                bail!("configured path {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.bm25.validate()?;
        if self.retrieval.k == 0 {
            bail!("retrieval k must be at least 1");
        }
        if self.rerank.repetition == 0 {
            bail!("rerank repetition must be at least 1");
        }
        if self.eval.cutoff == 0 {
            bail!("eval cutoff must be at least 1");
        }
        Ok(())
    }
}

/// Overrides collected from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub k: Option<usize>,
    pub k1: Option<f64>,
    pub b: Option<f64>,
    pub include_linked_docs: bool,
    pub stats_scope: Option<StatsScope>,
    pub repetition: Option<usize>,
    pub gain: Option<Gain>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(k) = self.k {
            cfg.retrieval.k = k;
        }
        if let Some(k1) = self.k1 {
            cfg.bm25.k1 = k1;
        }
        if let Some(b) = self.b {
            cfg.bm25.b = b;
        }
        if self.include_linked_docs {
            cfg.retrieval.include_linked_docs = true;
        }
        if let Some(s) = self.stats_scope {
            cfg.rerank.stats_scope = s;
        }
        if let Some(r) = self.repetition {
            cfg.rerank.repetition = r;
        }
        if let Some(g) = self.gain {
            cfg.eval.gain = g;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
    }
}
