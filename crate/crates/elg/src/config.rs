//! TOML pipeline configuration with `ELG_<SECTION>_<KEY>` environment
//! overrides. Relative paths are resolved against the config file's
//! directory.

use std::path::{Path, PathBuf};

use elg_core::corpus::CleaningConfig;
use elg_core::embeddings::SkipGramConfig;
use elg_core::events::ExtractionConfig;
use elg_core::graph::MergeConfig;
use elg_core::pairstats::{FeatureConfig, FeatureGroup, FeatureMask};
use elg_core::predict::{DistractorPolicy, McncConfig};
use elg_core::seqrel::{ClassifierKind, CvProtocol, Hyperparams};
use serde::{Deserialize, Serialize};

use crate::error::{ElgError, Result};
use crate::formats::corpus::CorpusFormat;

/// Pipeline stages in execution order.
pub const STAGES: [&str; 8] = ["extract", "count", "embed", "features", "train-seqrel", "causality", "build", "mcnc"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pipeline: PipelineSection,
    pub corpus: CorpusSection,
    pub events: EventsSection,
    pub pairs: PairsSection,
    pub embeddings: EmbeddingsSection,
    pub seqrel: SeqrelSection,
    pub causality: CausalitySection,
    pub graph: GraphSection,
    pub mcnc: McncSection,
    pub service: ServiceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub corpus: Option<PathBuf>,
    /// `conllu` or `jsonl`; guessed from the extension when unset.
    pub format: Option<String>,
    pub output_dir: PathBuf,
    /// Subset of the stage names, plus `serve`.
    pub stages: Vec<String>,
    pub threads: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            corpus: None,
            format: None,
            output_dir: PathBuf::from("elg-out"),
            stages: STAGES.iter().map(|s| s.to_string()).collect(),
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let c = CleaningConfig::default();
        CorpusSection { min_tokens: c.min_tokens, max_tokens: c.max_tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsSection {
    pub min_frequency: u64,
    pub blacklist: Option<PathBuf>,
    pub verb_tags: Vec<String>,
    pub subject_deprels: Vec<String>,
    pub object_deprels: Vec<String>,
}

impl Default for EventsSection {
    fn default() -> Self {
        let e = ExtractionConfig::default();
        EventsSection {
            min_frequency: 2,
            blacklist: None,
            verb_tags: e.verb_tags.into_iter().collect(),
            subject_deprels: e.subject_deprels.into_iter().collect(),
            object_deprels: e.object_deprels.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsSection {
    /// Sentences between paired occurrences; 0 pairs within a sentence only.
    pub window: usize,
    pub pos_inventory: Vec<String>,
}

impl Default for PairsSection {
    fn default() -> Self {
        PairsSection { window: 5, pos_inventory: FeatureConfig::default().pos_inventory }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingsSection {
    /// Pretrained text vectors used instead of training.
    pub pretrained: Option<PathBuf>,
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    pub min_count: u64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingsSection {
    fn default() -> Self {
        let s = SkipGramConfig::default();
        EmbeddingsSection {
            pretrained: None,
            dim: s.dim,
            window: s.window,
            epochs: s.epochs,
            negative_samples: s.negative_samples,
            min_count: s.min_count,
            learning_rate: s.learning_rate,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeqrelSection {
    /// Annotated pairs. Without them pairs are classified by the PMI
    /// threshold and directed by the preceding assumption.
    pub annotations: Option<PathBuf>,
    pub classifier: String,
    /// `all` or groups joined by `+`, e.g. `frequency+ratio`.
    pub mask: String,
    /// Run the 15-mask search for every classifier and report it.
    pub search: bool,
    pub pmi_threshold: f64,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub oversample: bool,
    pub lr_learning_rate: f64,
    pub lr_l2: f64,
    pub lr_max_epochs: usize,
    pub mlp_hidden: usize,
    pub mlp_learning_rate: f64,
    pub mlp_epochs: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
}

impl Default for SeqrelSection {
    fn default() -> Self {
        let h = Hyperparams::default();
        let cv = CvProtocol::default();
        SeqrelSection {
            annotations: None,
            classifier: "lr".into(),
            mask: "all".into(),
            search: false,
            pmi_threshold: 0.0,
            folds: cv.folds,
            repeats: cv.repeats,
            seed: cv.seed,
            oversample: cv.oversample,
            lr_learning_rate: h.lr_learning_rate,
            lr_l2: h.lr_l2,
            lr_max_epochs: h.lr_max_epochs,
            mlp_hidden: h.mlp_hidden,
            mlp_learning_rate: h.mlp_learning_rate,
            mlp_epochs: h.mlp_epochs,
            svm_lambda: h.svm_lambda,
            svm_epochs: h.svm_epochs,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausalitySection {
    /// Rule file; the built-in connective rules when unset.
    pub rules: Option<PathBuf>,
    /// Gold BIO file for evaluating the rules.
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub tau_merge: f64,
    pub tau_link: f64,
    pub max_missing_fraction: f64,
    /// Hand-curated edges (conditional, hypernym-hyponym, ...).
    pub curated: Option<PathBuf>,
}

impl Default for GraphSection {
    fn default() -> Self {
        let m = MergeConfig::default();
        GraphSection { tau_merge: m.tau_merge, tau_link: m.tau_link, max_missing_fraction: m.max_missing_fraction, curated: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McncSection {
    /// Fraction of documents held out for cloze instances.
    pub holdout: f64,
    pub n_candidates: usize,
    pub policy: String,
    pub seed: u64,
    pub beta: f64,
}

impl Default for McncSection {
    fn default() -> Self {
        let m = McncConfig::default();
        McncSection { holdout: 0.2, n_candidates: m.n_candidates, policy: "frequency".into(), seed: m.seed, beta: elg_core::predict::GraphScorer::DEFAULT_BETA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: String,
    pub port: u16,
    /// Defaults to `graph.elg` in the output directory.
    pub graph: Option<PathBuf>,
    pub max_depth: usize,
    pub node_cap: usize,
    pub search_limit: usize,
    pub cors: Vec<String>,
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection { bind: "127.0.0.1".into(), port: 8080, graph: None, max_depth: 3, node_cap: 200, search_limit: 20, cors: Vec::new() }
    }
}

fn usage(msg: impl Into<String>) -> ElgError {
    ElgError::Usage(msg.into())
}

pub fn parse_mask(s: &str) -> Result<FeatureMask> {
    if s == "all" {
        return Ok(FeatureMask::ALL);
    }
    let groups = s
        .split('+')
        .map(|g| FeatureGroup::ALL.into_iter().find(|x| x.name() == g.trim()).ok_or_else(|| usage(format!("unknown feature group `{g}`"))))
        .collect::<Result<Vec<_>>>()?;
    FeatureMask::of(&groups).map_err(|e| usage(e.to_string()))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| usage(format!("config: {e}")))
    }

    /// Reads a file, applies overrides from `env` and resolves relative
    /// paths against the file's directory.
    pub fn load(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(ElgError::io(path))?;
        let cfg = Config::from_toml(&text)?.with_env(env)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `ELG_<SECTION>_<KEY>=value` overrides. The value is typed
    /// after the current value of the key; lists are comma-separated.
    pub fn with_env(self, env: impl IntoIterator<Item = (String, String)>) -> Result<Config> {
        let mut tree = toml::Table::try_from(&self).map_err(|e| ElgError::Internal(e.to_string()))?;
        let mut touched = false;
        for (name, value) in env {
            let Some(rest) = name.strip_prefix("ELG_") else { continue };
            let Some((section, key)) = rest.split_once('_') else { continue };
            let section = section.to_ascii_lowercase();
            let Some(toml::Value::Table(table)) = tree.get_mut(&section) else { continue };
            let key = key.to_ascii_lowercase();
            let typed = match table.get(&key) {
                Some(toml::Value::Integer(_)) => value.trim().parse().map(toml::Value::Integer).map_err(|_| usage(format!("{name}: expected an integer"))),
                Some(toml::Value::Float(_)) => value.trim().parse().map(toml::Value::Float).map_err(|_| usage(format!("{name}: expected a number"))),
                Some(toml::Value::Boolean(_)) => value.trim().parse().map(toml::Value::Boolean).map_err(|_| usage(format!("{name}: expected true or false"))),
                Some(toml::Value::Array(_)) => Ok(toml::Value::Array(value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| toml::Value::String(s.into())).collect())),
                _ => Ok(toml::Value::String(value)),
            }?;
            table.insert(key, typed);
            touched = true;
        }
        if !touched {
            return Ok(self);
        }
        tree.try_into().map_err(|e: toml::de::Error| usage(format!("environment override: {e}")))
    }

    pub fn resolve_paths(mut self, base: &Path) -> Config {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                fix(p);
            }
        };
        fix_opt(&mut self.pipeline.corpus);
        fix(&mut self.pipeline.output_dir);
        fix_opt(&mut self.events.blacklist);
        fix_opt(&mut self.embeddings.pretrained);
        fix_opt(&mut self.seqrel.annotations);
        fix_opt(&mut self.causality.rules);
        fix_opt(&mut self.causality.gold);
        fix_opt(&mut self.graph.curated);
        fix_opt(&mut self.service.graph);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.pipeline.stages {
            if s != "serve" && !STAGES.contains(&s.as_str()) {
                return Err(usage(format!("unknown stage `{s}` (stages: {}, serve)", STAGES.join(", "))));
            }
        }
        if self.pipeline.threads == 0 {
            return Err(usage("pipeline.threads must be at least 1"));
        }
        self.corpus_format()?;
        self.classifier()?;
        parse_mask(&self.seqrel.mask)?;
        self.distractor_policy()?;
        if self.corpus.min_tokens > self.corpus.max_tokens {
            return Err(usage("corpus.min_tokens exceeds corpus.max_tokens"));
        }
        let g = &self.graph;
        if !(0.0..=1.0).contains(&g.tau_link) || !(0.0..=1.0).contains(&g.tau_merge) || g.tau_link > g.tau_merge {
            return Err(usage("graph thresholds must satisfy 0 <= tau_link <= tau_merge <= 1"));
        }
        if !(self.mcnc.holdout > 0.0 && self.mcnc.holdout < 1.0) {
            return Err(usage("mcnc.holdout must lie strictly between 0 and 1"));
        }
        if self.mcnc.n_candidates == 0 {
            return Err(usage("mcnc.n_candidates must be at least 1"));
        }
        let s = &self.service;
        if s.max_depth == 0 || s.node_cap == 0 || s.search_limit == 0 {
            return Err(usage("service caps must be at least 1"));
        }
        if self.seqrel.folds < 2 || self.seqrel.repeats == 0 {
            return Err(usage("seqrel needs at least 2 folds and 1 repeat"));
        }
        Ok(())
    }

    pub fn stage_enabled(&self, stage: &str) -> bool {
        self.pipeline.stages.iter().any(|s| s == stage)
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        self.pipeline.corpus.as_deref().ok_or_else(|| usage("pipeline.corpus is not set"))
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        match &self.pipeline.format {
            Some(f) => CorpusFormat::parse(f).ok_or_else(|| usage(format!("unknown corpus format `{f}`"))),
            None => Ok(self.pipeline.corpus.as_deref().map_or(CorpusFormat::Conllu, CorpusFormat::from_path)),
        }
    }

    pub fn cleaning(&self) -> CleaningConfig {
        CleaningConfig { min_tokens: self.corpus.min_tokens, max_tokens: self.corpus.max_tokens }
    }

    pub fn extraction(&self) -> ExtractionConfig {
        let mut e = ExtractionConfig::default();
        e.verb_tags = self.events.verb_tags.iter().cloned().collect();
        e.subject_deprels = self.events.subject_deprels.iter().cloned().collect();
        e.object_deprels = self.events.object_deprels.iter().cloned().collect();
        e
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig { pos_inventory: self.pairs.pos_inventory.clone() }
    }

    pub fn skipgram(&self) -> SkipGramConfig {
        let e = &self.embeddings;
        SkipGramConfig {
            dim: e.dim,
            window: e.window,
            epochs: e.epochs,
            negative_samples: e.negative_samples,
            min_count: e.min_count,
            learning_rate: e.learning_rate,
            seed: e.seed,
        }
    }

    pub fn classifier(&self) -> Result<ClassifierKind> {
        ClassifierKind::parse(&self.seqrel.classifier).ok_or_else(|| usage(format!("unknown classifier `{}` (nb, lr, mlp, svm)", self.seqrel.classifier)))
    }

    pub fn hyperparams(&self) -> Hyperparams {
        let s = &self.seqrel;
        Hyperparams {
            lr_learning_rate: s.lr_learning_rate,
            lr_l2: s.lr_l2,
            lr_max_epochs: s.lr_max_epochs,
            mlp_hidden: s.mlp_hidden,
            mlp_learning_rate: s.mlp_learning_rate,
            mlp_epochs: s.mlp_epochs,
            svm_lambda: s.svm_lambda,
            svm_epochs: s.svm_epochs,
            ..Hyperparams::default()
        }
    }

    pub fn cv(&self) -> CvProtocol {
        CvProtocol { folds: self.seqrel.folds, repeats: self.seqrel.repeats, seed: self.seqrel.seed, oversample: self.seqrel.oversample }
    }

    pub fn merge(&self) -> MergeConfig {
        MergeConfig { tau_merge: self.graph.tau_merge, tau_link: self.graph.tau_link, max_missing_fraction: self.graph.max_missing_fraction }
    }

    pub fn distractor_policy(&self) -> Result<DistractorPolicy> {
        DistractorPolicy::parse(&self.mcnc.policy).ok_or_else(|| usage(format!("unknown distractor policy `{}`", self.mcnc.policy)))
    }

    pub fn mcnc_config(&self) -> Result<McncConfig> {
        Ok(McncConfig { n_candidates: self.mcnc.n_candidates, seed: self.mcnc.seed, policy: self.distractor_policy()? })
    }

    pub fn graph_path(&self) -> PathBuf {
        self.service.graph.clone().unwrap_or_else(|| self.pipeline.output_dir.join("graph.elg"))
    }
}
