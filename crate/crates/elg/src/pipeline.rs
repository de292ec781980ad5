//! Stage orchestration over file artifacts.
//!
//! Every stage reads its inputs from disk and writes its outputs into the
//! output directory. `manifest.json` records input and output hashes per
//! stage so a rerun with unchanged inputs skips the work.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use elg_core::causality::{apply_rules, default_rules, evaluate_extraction, resolve_events, to_bio, BioTag, BioTagging, CausalMention, CausalRule};
use elg_core::corpus::{clean_corpus, ParsedCorpus};
use elg_core::embeddings::{train_skipgram, EmbeddingTable};
use elg_core::events::{event_frequencies, extract_events, filter_general, filter_low_frequency, GeneralityBlacklist};
use elg_core::graph::{build_graph, merge_similar_events, recompute_probabilities, ClassifiedPair, ElgGraph, MergeReport, Relation, TypedEdge};
use elg_core::pairstats::{build_feature_vector, collect_contexts, count_pairs, CoOccurrenceContext, DocumentEvents, FeatureVector, PairCounts};
use elg_core::predict::{evaluate_mcnc, generate_mcnc, BigramScorer, EmbeddingScorer, EventChain, GraphScorer, McncReport, PmiScorer, RandomScorer, Scorer};
use elg_core::seqrel::{
    cross_validate, feature_group_search, oversample_indices, preceding_assumption_baseline, task_dataset, train_classifier, ClassifierKind, ClassifierSpec, Confusion,
    Direction, EvalMetrics, LabeledPair, Learner, RelationLabel, Task,
};
use elg_core::{EventKey, EventOccurrence};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{parse_mask, Config, STAGES};
use crate::error::{ElgError, Result};
use crate::formats::corpus::{load_corpus, parse_conllu, parse_gold, write_conllu};
use crate::formats::graph::{load_graph, save_graph, sha256_hex};
use crate::formats::mcnc::{write_instances, write_log, ScorerLog};
use crate::formats::tables::{
    load_features, load_mentions, load_occurrences, load_pair_labels, write_features, write_mentions, write_occurrences, write_pair_labels, write_sentences, PairLabel,
    SentenceTexts,
};
use crate::formats::{blacklist::load_blacklist, counts, read_text, rules::load_rule_file, vectors, write_atomic};
use crate::report::{pct, Table};

/// File names inside the output directory.
pub mod names {
    pub const CORPUS: &str = "corpus.conllu";
    pub const EVENTS: &str = "events.tsv";
    pub const LOAD_REPORT: &str = "load_report.tsv";
    pub const COUNTS: &str = "counts.tsv";
    pub const VECTORS: &str = "vectors.txt";
    pub const FEATURES: &str = "features.tsv";
    pub const CLASSIFIED: &str = "classified.tsv";
    pub const MENTIONS: &str = "mentions.tsv";
    pub const GRAPH: &str = "graph.elg";
    pub const SENTENCES: &str = "sentences.tsv";
    pub const MCNC: &str = "mcnc.tsv";
    pub const MCNC_LOG: &str = "mcnc_log.tsv";
    pub const MANIFEST: &str = "manifest.json";
}

/// Bumped when a stage's output format or semantics change, so old
/// manifests stop matching.
const FORMAT_REVISION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: String,
    pub status: StageStatus,
    pub summary: Vec<(String, String)>,
}

impl StageReport {
    pub fn line(&self) -> String {
        let status = match self.status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "skipped (up to date)",
        };
        let details: Vec<String> = self.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
        if details.is_empty() {
            format!("{}: {status}", self.stage)
        } else {
            format!("{}: {status}; {}", self.stage, details.join(", "))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub params: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    fn load(path: &Path) -> Manifest {
        std::fs::read_to_string(path).ok().and_then(|t| serde_json::from_str(&t).ok()).unwrap_or_default()
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| ElgError::Internal(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(ElgError::io(path))?))
}

/// What a stage function hands back.
struct StageOutput {
    outputs: Vec<PathBuf>,
    summary: Vec<(String, String)>,
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

pub struct Pipeline<'a> {
    pub config: &'a Config,
    pub dir: PathBuf,
    /// Limits the sequential-relation report to one task.
    pub task: Option<Task>,
}

/// An input file and the stage that produces it (`None` for user files).
type Input = (PathBuf, Option<&'static str>);

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a Config) -> Self {
        Pipeline { config, dir: config.pipeline.output_dir.clone(), task: None }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn produced(&self, name: &str, stage: &'static str) -> Input {
        (self.path(name), Some(stage))
    }

    fn inputs(&self, stage: &str) -> Result<Vec<Input>> {
        let c = self.config;
        let user = |p: &Option<PathBuf>| p.iter().map(|p| (p.clone(), None)).collect::<Vec<Input>>();
        let mut v = match stage {
            "extract" => {
                let mut v = vec![(c.corpus_path()?.to_path_buf(), None)];
                v.extend(user(&c.events.blacklist));
                v
            }
            "count" => vec![self.produced(names::CORPUS, "extract"), self.produced(names::EVENTS, "extract")],
            "embed" => {
                let mut v = vec![self.produced(names::CORPUS, "extract")];
                v.extend(user(&c.embeddings.pretrained));
                v
            }
            "features" => vec![
                self.produced(names::COUNTS, "count"),
                self.produced(names::EVENTS, "extract"),
                self.produced(names::CORPUS, "extract"),
                self.produced(names::VECTORS, "embed"),
            ],
            "train-seqrel" => {
                let mut v = vec![self.produced(names::FEATURES, "features")];
                v.extend(user(&c.seqrel.annotations));
                v
            }
            "causality" => {
                let mut v = vec![self.produced(names::CORPUS, "extract"), self.produced(names::EVENTS, "extract")];
                v.extend(user(&c.causality.rules));
                v.extend(user(&c.causality.gold));
                v
            }
            "build" => {
                let mut v = vec![
                    self.produced(names::COUNTS, "count"),
                    self.produced(names::CLASSIFIED, "train-seqrel"),
                    self.produced(names::MENTIONS, "causality"),
                    self.produced(names::CORPUS, "extract"),
                    self.produced(names::EVENTS, "extract"),
                    self.produced(names::VECTORS, "embed"),
                ];
                v.extend(user(&c.graph.curated));
                v
            }
            "mcnc" => vec![
                self.produced(names::CORPUS, "extract"),
                self.produced(names::EVENTS, "extract"),
                self.produced(names::CLASSIFIED, "train-seqrel"),
                self.produced(names::MENTIONS, "causality"),
                self.produced(names::VECTORS, "embed"),
            ],
            other => return Err(ElgError::Usage(format!("unknown stage `{other}`"))),
        };
        v.dedup();
        Ok(v)
    }

    /// Hash of the settings a stage depends on.
    fn params(&self, stage: &str) -> String {
        let c = self.config;
        let v = match stage {
            "extract" => serde_json::json!([c.pipeline.format, c.corpus, c.events]),
            "count" => serde_json::json!([c.pairs.window]),
            "embed" => serde_json::json!([c.embeddings]),
            "features" => serde_json::json!([c.pairs]),
            "train-seqrel" => serde_json::json!([c.seqrel]),
            "causality" => serde_json::json!([c.events]),
            "build" => serde_json::json!([c.graph, c.pairs.window]),
            "mcnc" => serde_json::json!([c.mcnc, c.graph, c.pairs.window]),
            _ => serde_json::Value::Null,
        };
        sha256_hex(format!("{FORMAT_REVISION}:{stage}:{v}").as_bytes())
    }

    fn rel(&self, p: &Path) -> String {
        p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().into_owned()
    }

    fn check_inputs(&self, stage: &str) -> Result<BTreeMap<String, String>> {
        let mut hashes = BTreeMap::new();
        for (path, producer) in self.inputs(stage)? {
            if !path.exists() {
                return Err(match producer {
                    Some(stage) => ElgError::MissingArtifact { stage, path },
                    None => ElgError::Usage(format!("input file {} does not exist", path.display())),
                });
            }
            hashes.insert(self.rel(&path), file_hash(&path)?);
        }
        Ok(hashes)
    }

    fn up_to_date(&self, record: &StageRecord, params: &str, inputs: &BTreeMap<String, String>) -> bool {
        record.params == params
            && &record.inputs == inputs
            && !record.outputs.is_empty()
            && record.outputs.iter().all(|(p, h)| file_hash(&self.dir.join(p)).ok().as_deref() == Some(h.as_str()))
    }

    /// Runs one stage; with `force` unset an up-to-date stage is skipped.
    pub fn run_stage(&self, stage: &str, force: bool) -> Result<StageReport> {
        let inputs = self.check_inputs(stage)?;
        let params = self.params(stage);
        let manifest_path = self.path(names::MANIFEST);
        let mut manifest = Manifest::load(&manifest_path);
        if !force && manifest.stages.get(stage).is_some_and(|r| self.up_to_date(r, &params, &inputs)) {
            log::info!("{stage}: up to date");
            return Ok(StageReport { stage: stage.into(), status: StageStatus::Skipped, summary: Vec::new() });
        }
        log::info!("{stage}: running");
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.config.pipeline.threads).build().map_err(|e| ElgError::Internal(e.to_string()))?;
        let out = pool.install(|| self.execute(stage))?;
        let mut outputs = BTreeMap::new();
        for p in &out.outputs {
            outputs.insert(self.rel(p), file_hash(p)?);
        }
        manifest.stages.insert(stage.into(), StageRecord { params, inputs, outputs });
        manifest.save(&manifest_path)?;
        Ok(StageReport { stage: stage.into(), status: StageStatus::Ran, summary: out.summary })
    }

    /// Every enabled stage in order. `serve` is not run here, but a config
    /// that asks for it must have (or build) a graph.
    pub fn run(&self) -> Result<Vec<StageReport>> {
        if self.config.stage_enabled("serve") && !self.config.stage_enabled("build") {
            let graph = self.config.graph_path();
            if !graph.exists() {
                return Err(ElgError::MissingArtifact { stage: "build", path: graph });
            }
        }
        STAGES.iter().filter(|s| self.config.stage_enabled(s)).map(|s| self.run_stage(s, false)).collect()
    }

    fn execute(&self, stage: &str) -> Result<StageOutput> {
        match stage {
            "extract" => self.extract(),
            "count" => self.count(),
            "embed" => self.embed(),
            "features" => self.features(),
            "train-seqrel" => self.train_seqrel(),
            "causality" => self.causality(),
            "build" => self.build(),
            "mcnc" => self.mcnc(),
            other => Err(ElgError::Usage(format!("unknown stage `{other}`"))),
        }
    }

    // ---- loaders for predecessor artifacts ----

    pub fn load_clean_corpus(&self) -> Result<ParsedCorpus> {
        let p = self.path(names::CORPUS);
        Ok(parse_conllu(&read_text(&p)?, &p)?.0)
    }

    fn load_vectors(&self) -> Result<EmbeddingTable> {
        vectors::load_vectors(&self.path(names::VECTORS))
    }

    fn load_docs(&self) -> Result<(ParsedCorpus, Vec<EventOccurrence>, Vec<DocumentEvents>)> {
        let corpus = self.load_clean_corpus()?;
        let occ = load_occurrences(&self.path(names::EVENTS))?;
        let docs = document_events(&corpus, &occ);
        Ok((corpus, occ, docs))
    }

    // ---- stages ----

    fn extract(&self) -> Result<StageOutput> {
        let c = self.config;
        let (raw, load) = load_corpus(c.corpus_path()?, c.corpus_format()?)?;
        let raw_sentences = raw.sentence_count();
        let corpus = clean_corpus(raw, &c.cleaning());
        if corpus.sentence_count() == 0 {
            return Err(elg_core::Error::EmptyCorpus.into());
        }
        let blacklist = match &c.events.blacklist {
            Some(p) => load_blacklist(p)?,
            None => GeneralityBlacklist::default(),
        };
        let extraction = c.extraction();
        let per_doc: Vec<Vec<EventOccurrence>> = corpus
            .documents
            .par_iter()
            .map(|d| d.sentences.iter().flat_map(|s| extract_events(s, &extraction)).collect())
            .collect();
        let all: Vec<EventOccurrence> = per_doc.into_iter().flatten().collect();
        let extracted = all.len();
        let kept = filter_general(filter_low_frequency(all, c.events.min_frequency), &blacklist);

        let mut drops = Table::new("Dropped sentences", &["doc_id", "line", "reason"]);
        for d in &load.dropped {
            drops.push(vec![d.doc_id.clone(), d.line.to_string(), d.reason.clone()]);
        }
        let outputs = vec![self.path(names::CORPUS), self.path(names::EVENTS), self.path(names::LOAD_REPORT)];
        write_atomic(&outputs[0], write_conllu(&corpus).as_bytes())?;
        write_atomic(&outputs[1], write_occurrences(&kept).as_bytes())?;
        write_atomic(&outputs[2], drops.to_tsv().as_bytes())?;
        Ok(StageOutput {
            outputs,
            summary: vec![
                kv("documents", corpus.documents.len()),
                kv("sentences_read", raw_sentences),
                kv("sentences_dropped", load.dropped.len()),
                kv("sentences_kept", corpus.sentence_count()),
                kv("occurrences", extracted),
                kv("occurrences_kept", kept.len()),
                kv("distinct_events", event_frequencies(&kept).len()),
            ],
        })
    }

    fn count(&self) -> Result<StageOutput> {
        let (_, _, docs) = self.load_docs()?;
        let counts = count_pairs(&docs, self.config.pairs.window);
        let out = self.path(names::COUNTS);
        write_atomic(&out, counts::write_counts(&counts).as_bytes())?;
        Ok(StageOutput {
            outputs: vec![out],
            summary: vec![kv("events", counts.events().len()), kv("pairs", counts.unordered_pairs().len()), kv("pairings", counts.n_pairs())],
        })
    }

    fn embed(&self) -> Result<StageOutput> {
        let table = match &self.config.embeddings.pretrained {
            Some(p) => vectors::load_vectors(p)?,
            None => train_skipgram(&self.load_clean_corpus()?, &self.config.skipgram())?,
        };
        let out = self.path(names::VECTORS);
        write_atomic(&out, vectors::write_vectors(&table).as_bytes())?;
        Ok(StageOutput { outputs: vec![out], summary: vec![kv("words", table.len()), kv("dim", table.dim())] })
    }

    fn features(&self) -> Result<StageOutput> {
        let counts = counts::load_counts(&self.path(names::COUNTS))?;
        let (corpus, _, docs) = self.load_docs()?;
        let table = self.load_vectors()?;
        let rows = pair_features(&corpus, &docs, &counts, &table, self.config)?;
        let out = self.path(names::FEATURES);
        write_atomic(&out, write_features(&rows).as_bytes())?;
        Ok(StageOutput { outputs: vec![out], summary: vec![kv("pairs", rows.len())] })
    }

    /// Classification always covers both tasks; the report may be limited.
    fn train_seqrel(&self) -> Result<StageOutput> {
        let task = self.task;
        let c = self.config;
        let features = load_features(&self.path(names::FEATURES))?;
        let mask = parse_mask(&c.seqrel.mask)?;
        let mut report = Table::new("Sequential relation and direction recognition", &["Task", "Features", "Classifier", "Accuracy", "Precision", "Recall", "F1"]);
        let row = |t: &mut Table, task: Task, feats: String, name: &str, m: &EvalMetrics| {
            t.push(vec![task_name(task).into(), feats, name.into(), pct(m.accuracy), pct(m.precision), pct(m.recall), pct(m.f1)]);
        };
        let tasks: Vec<Task> = task.map_or(vec![Task::Relation, Task::Direction], |t| vec![t]);
        let mut summary = Vec::new();

        let classified: Vec<PairLabel> = match &c.seqrel.annotations {
            None => {
                summary.push(kv("mode", "pmi-threshold"));
                features
                    .iter()
                    .map(|f| {
                        let positive = f.pmi[1] >= c.seqrel.pmi_threshold;
                        PairLabel {
                            a: f.pair.0.clone(),
                            b: f.pair.1.clone(),
                            relation: if positive { RelationLabel::Positive } else { RelationLabel::Negative },
                            // rows are oriented so that A precedes B at least as often
                            direction: positive.then_some(Direction::Forward),
                        }
                    })
                    .collect()
            }
            Some(path) => {
                let labels = load_pair_labels(path)?;
                let (pairs, missing) = labeled_pairs(&features, &labels)?;
                summary.push(kv("mode", "supervised"));
                summary.push(kv("annotated", pairs.len()));
                summary.push(kv("annotations_without_features", missing));
                let kind = c.classifier()?;
                let spec = ClassifierSpec { kind, hyperparams: c.hyperparams() };
                let protocol = c.cv();
                for &t in &tasks {
                    let baseline = baseline_metrics(&pairs, t, c.seqrel.pmi_threshold);
                    row(&mut report, t, "-".into(), if t == Task::Relation { "PMI" } else { "Preceding Assumption" }, &baseline);
                    if c.seqrel.search {
                        let learners: Vec<ClassifierSpec> = ClassifierKind::ALL.iter().map(|k| ClassifierSpec { kind: *k, hyperparams: c.hyperparams() }).collect();
                        let refs: Vec<&dyn Learner> = learners.iter().map(|l| l as &dyn Learner).collect();
                        let found = feature_group_search(&refs, &pairs, t, &protocol)?;
                        for r in &found.rows {
                            row(&mut report, t, r.mask.label(), &r.learner, &r.metrics);
                        }
                        let best = found.best_row();
                        summary.push(kv(&format!("best_{}", task_name(t)), format!("{}:{}", best.learner, best.mask.label())));
                    } else {
                        let (x, y) = task_dataset(&pairs, t, mask);
                        let m = cross_validate(&spec, &x, &y, mask, &protocol)?;
                        row(&mut report, t, mask.label(), kind.name(), &m);
                    }
                }
                classify_all(&features, &pairs, kind, c, mask)?
            }
        };
        let positives = classified.iter().filter(|p| p.relation == RelationLabel::Positive).count();
        summary.push(kv("pairs", classified.len()));
        summary.push(kv("positive", positives));
        let out = self.path(names::CLASSIFIED);
        write_atomic(&out, write_pair_labels(&classified).as_bytes())?;
        report.save(&self.dir, "seqrel_report")?;
        Ok(StageOutput { outputs: vec![out, self.path("seqrel_report.tsv"), self.path("seqrel_report.txt")], summary })
    }

    fn rules(&self) -> Result<Vec<CausalRule>> {
        match &self.config.causality.rules {
            Some(p) => load_rule_file(p),
            None => Ok(default_rules()),
        }
    }

    fn causality(&self) -> Result<StageOutput> {
        let c = self.config;
        let rules = self.rules()?;
        let extraction = c.extraction();
        let corpus = self.load_clean_corpus()?;
        let occ = load_occurrences(&self.path(names::EVENTS))?;
        let mut by_sentence: BTreeMap<(&str, usize), Vec<EventOccurrence>> = BTreeMap::new();
        for o in &occ {
            by_sentence.entry((o.doc_id.as_str(), o.sent_index)).or_default().push(o.clone());
        }
        let mut mentions = Vec::new();
        let mut violations = 0;
        for s in corpus.sentences() {
            let mut found = apply_rules(s, &rules, &extraction);
            if found.is_empty() {
                continue;
            }
            let local = by_sentence.get(&(s.doc_id.as_str(), s.sent_index)).map_or(&[][..], Vec::as_slice);
            for m in &mut found {
                resolve_events(m, s, local);
            }
            violations += to_bio(s, &found)?.violations().len();
            mentions.extend(found);
        }
        let mut per_rule: BTreeMap<&str, usize> = BTreeMap::new();
        for m in &mentions {
            *per_rule.entry(m.rule_id.as_str()).or_default() += 1;
        }
        let mut report = Table::new("Causal rule matches", &["Rule", "Priority", "Mentions"]);
        for r in &rules {
            report.push(vec![r.id.clone(), r.priority.to_string(), per_rule.get(r.id.as_str()).copied().unwrap_or(0).to_string()]);
        }
        let resolved = mentions.iter().filter(|m| m.cause_event.is_some() && m.effect_event.is_some()).count();
        let mut summary = vec![kv("mentions", mentions.len()), kv("resolved", resolved), kv("bio_violations", violations)];
        let mut outputs = vec![self.path(names::MENTIONS), self.path("causality_report.tsv"), self.path("causality_report.txt")];
        write_atomic(&outputs[0], write_mentions(&mentions).as_bytes())?;
        report.save(&self.dir, "causality_report")?;

        if let Some(gold_path) = &c.causality.gold {
            let m = evaluate_gold(gold_path, &rules, &extraction)?;
            let mut t = Table::new("Causal extraction against gold", &["Rules", "Accuracy", "Precision", "Recall", "F1"]);
            t.push(vec![format!("{} rules", rules.len()), pct(m.accuracy), pct(m.precision), pct(m.recall), pct(m.f1)]);
            t.save(&self.dir, "causality_eval")?;
            summary.push(kv("gold_f1", pct(m.f1)));
            outputs.push(self.path("causality_eval.tsv"));
            outputs.push(self.path("causality_eval.txt"));
        }
        Ok(StageOutput { outputs, summary })
    }

    fn build(&self) -> Result<StageOutput> {
        let c = self.config;
        let counts = counts::load_counts(&self.path(names::COUNTS))?;
        let labels = load_pair_labels(&self.path(names::CLASSIFIED))?;
        let mentions = load_mentions(&self.path(names::MENTIONS))?;
        let (corpus, _, docs) = self.load_docs()?;
        let table = self.load_vectors()?;
        let (graph, report) = assemble_graph(&corpus, &docs, &counts, &labels, &mentions, &table, c)?;

        let sentences = evidence_sentences(&graph, &corpus);
        let outputs = vec![self.path(names::GRAPH), self.path(names::SENTENCES), self.path("merge_report.tsv"), self.path("merge_report.txt")];
        save_graph(&graph, &outputs[0])?;
        write_atomic(&outputs[1], write_sentences(&sentences).as_bytes())?;
        merge_table(&report).save(&self.dir, "merge_report")?;
        let by_rel = |r: Relation| graph.edges().iter().filter(|e| e.relation == r).count();
        Ok(StageOutput {
            outputs,
            summary: vec![
                kv("nodes", graph.nodes().len()),
                kv("sequential_edges", by_rel(Relation::Sequential)),
                kv("causal_edges", by_rel(Relation::Causal)),
                kv("links", graph.similarity_links().len()),
                kv("merged_clusters", report.merged_clusters),
            ],
        })
    }

    fn mcnc(&self) -> Result<StageOutput> {
        let c = self.config;
        let (corpus, _, docs) = self.load_docs()?;
        let labels = load_pair_labels(&self.path(names::CLASSIFIED))?;
        let mentions = load_mentions(&self.path(names::MENTIONS))?;
        let table = self.load_vectors()?;

        let (train_ids, test_ids) = split_documents(&docs, c.mcnc.holdout, c.mcnc.seed)?;
        let train_docs: Vec<DocumentEvents> = docs.iter().filter(|d| train_ids.contains(&d.doc_id)).cloned().collect();
        let train_corpus = ParsedCorpus {
            documents: corpus.documents.iter().filter(|d| train_ids.contains(&d.doc_id)).cloned().collect(),
            source_meta: corpus.source_meta.clone(),
        };
        let train_mentions: Vec<CausalMention> = mentions.into_iter().filter(|m| train_ids.contains(&m.doc_id)).collect();
        let train_counts = count_pairs(&train_docs, c.pairs.window);
        let train_labels: Vec<PairLabel> = labels.into_iter().filter(|l| train_counts.t1(&l.a, &l.b) > 0).collect();
        let (graph, _) = assemble_graph(&train_corpus, &train_docs, &train_counts, &train_labels, &train_mentions, &table, c)?;

        let mut chains = Vec::new();
        for d in docs.iter().filter(|d| test_ids.contains(&d.doc_id)) {
            let events: Vec<EventKey> = d.occurrences.iter().map(|o| o.event.clone()).collect();
            for k in 2..=events.len() {
                chains.push(EventChain::new(format!("{}#{k}", d.doc_id), events[..k].to_vec())?);
            }
        }
        if chains.is_empty() {
            return Err(ElgError::Usage("no held-out document has two or more events; raise mcnc.holdout or use a larger corpus".into()));
        }
        let instances = generate_mcnc(&chains, train_counts.events(), &c.mcnc_config()?)?;

        let random = RandomScorer { seed: c.mcnc.seed };
        let pmi = PmiScorer { counts: &train_counts };
        let bigram = BigramScorer { counts: &train_counts };
        let embedding = EmbeddingScorer { vectors: &table };
        let graph_scorer = GraphScorer::new(&graph, c.mcnc.beta);
        let scorers: [&dyn Scorer; 5] = [&random, &pmi, &bigram, &embedding, &graph_scorer];
        let reports: Vec<McncReport> = scorers.iter().map(|s| evaluate_mcnc(*s, &instances)).collect::<elg_core::Result<_>>()?;

        let log: ScorerLog = reports.iter().map(|r| (r.scorer.clone(), r.chosen.clone())).collect();
        let answers: Vec<usize> = instances.iter().map(|i| i.answer).collect();
        let table = compare_table(&reports, &reports[0]);
        let outputs = vec![self.path(names::MCNC), self.path(names::MCNC_LOG), self.path("mcnc_report.tsv"), self.path("mcnc_report.txt")];
        write_atomic(&outputs[0], write_instances(&instances).as_bytes())?;
        write_atomic(&outputs[1], write_log(&answers, &log).as_bytes())?;
        table.save(&self.dir, "mcnc_report")?;
        let mut summary = vec![kv("instances", instances.len()), kv("train_documents", train_ids.len()), kv("test_documents", test_ids.len())];
        summary.extend(reports.iter().map(|r| kv(&r.scorer, pct(r.accuracy))));
        Ok(StageOutput { outputs, summary })
    }
}

pub fn task_name(t: Task) -> &'static str {
    match t {
        Task::Relation => "relation",
        Task::Direction => "direction",
    }
}

/// Occurrences grouped per document, in corpus order.
pub fn document_events(corpus: &ParsedCorpus, occ: &[EventOccurrence]) -> Vec<DocumentEvents> {
    let mut by_doc: BTreeMap<&str, Vec<EventOccurrence>> = BTreeMap::new();
    for o in occ {
        by_doc.entry(o.doc_id.as_str()).or_default().push(o.clone());
    }
    corpus
        .documents
        .iter()
        .map(|d| {
            let n_tokens = d.sentences.iter().map(|s| s.len() as u64).sum();
            DocumentEvents::new(d.doc_id.clone(), by_doc.remove(d.doc_id.as_str()).unwrap_or_default(), n_tokens)
        })
        .collect()
}

pub fn all_contexts(corpus: &ParsedCorpus, docs: &[DocumentEvents], window: usize) -> Vec<CoOccurrenceContext> {
    corpus.documents.iter().zip(docs).flat_map(|(d, de)| collect_contexts(de, d, window)).collect()
}

/// Feature rows for every co-occurring pair, oriented so that `A` precedes
/// `B` at least as often as the reverse (ties keep key order).
pub fn pair_features(corpus: &ParsedCorpus, docs: &[DocumentEvents], counts: &PairCounts, table: &EmbeddingTable, config: &Config) -> Result<Vec<FeatureVector>> {
    let contexts = all_contexts(corpus, docs, config.pairs.window);
    let mut by_pair: BTreeMap<(EventKey, EventKey), Vec<CoOccurrenceContext>> = BTreeMap::new();
    for ctx in contexts {
        let key = if ctx.earlier <= ctx.later { (ctx.earlier.clone(), ctx.later.clone()) } else { (ctx.later.clone(), ctx.earlier.clone()) };
        by_pair.entry(key).or_default().push(ctx);
    }
    let args = counts.argument_stats();
    let fc = config.features();
    let pairs = counts.unordered_pairs();
    pairs
        .par_iter()
        .map(|(a, b)| {
            let ctx = by_pair.get(&(a.clone(), b.clone())).map_or(&[][..], Vec::as_slice);
            let (a, b) = if counts.t2(a, b) >= counts.t3(a, b) { (a, b) } else { (b, a) };
            Ok(build_feature_vector(a, b, counts, &args, ctx, table, &fc)?)
        })
        .collect()
}

/// Joins annotations to feature rows. An annotation given in the opposite
/// orientation to its row has its direction flipped.
pub fn labeled_pairs(features: &[FeatureVector], labels: &[PairLabel]) -> Result<(Vec<LabeledPair>, usize)> {
    let index: BTreeMap<(&EventKey, &EventKey), &FeatureVector> = features.iter().map(|f| ((&f.pair.0, &f.pair.1), f)).collect();
    let flip = |d: Direction| match d {
        Direction::Forward => Direction::Backward,
        Direction::Backward => Direction::Forward,
    };
    let mut out = Vec::new();
    let mut missing = 0;
    let mut seen = BTreeSet::new();
    for l in labels {
        let (f, direction) = if let Some(f) = index.get(&(&l.a, &l.b)) {
            (*f, l.direction)
        } else if let Some(f) = index.get(&(&l.b, &l.a)) {
            (*f, l.direction.map(flip))
        } else {
            log::warn!("annotated pair ({}, {}) never co-occurs; skipped", l.a, l.b);
            missing += 1;
            continue;
        };
        if !seen.insert(f.pair.clone()) {
            return Err(ElgError::Usage(format!("pair ({}, {}) is annotated twice", l.a, l.b)));
        }
        out.push(LabeledPair::new(f.clone(), l.relation, direction)?);
    }
    Ok((out, missing))
}

/// PMI threshold for the relation task, preceding assumption for direction.
pub fn baseline_metrics(pairs: &[LabeledPair], task: Task, threshold: f64) -> EvalMetrics {
    match task {
        Task::Relation => {
            let pred = elg_core::seqrel::pmi_threshold_baseline(pairs, threshold);
            let gold: Vec<bool> = pairs.iter().map(|p| p.relation == RelationLabel::Positive).collect();
            EvalMetrics::single(Confusion::from_predictions(&pred, &gold))
        }
        Task::Direction => {
            let positives: Vec<LabeledPair> = pairs.iter().filter(|p| p.direction.is_some()).cloned().collect();
            let pred: Vec<bool> = preceding_assumption_baseline(&positives).into_iter().map(|d| d == Direction::Forward).collect();
            let gold: Vec<bool> = positives.iter().map(|p| p.direction == Some(Direction::Forward)).collect();
            EvalMetrics::single(Confusion::from_predictions(&pred, &gold))
        }
    }
}

/// Trains on every annotated pair (class-balanced when configured) and
/// labels every feature row.
fn classify_all(features: &[FeatureVector], pairs: &[LabeledPair], kind: ClassifierKind, c: &Config, mask: elg_core::pairstats::FeatureMask) -> Result<Vec<PairLabel>> {
    let hp = c.hyperparams();
    let fit = |task: Task| -> Result<elg_core::seqrel::ClassifierModel> {
        let (x, y) = task_dataset(pairs, task, mask);
        let (x, y) = if c.seqrel.oversample {
            let idx = oversample_indices(&y, c.seqrel.seed)?;
            (idx.iter().map(|&i| x[i].clone()).collect::<Vec<_>>(), idx.iter().map(|&i| y[i]).collect::<Vec<_>>())
        } else {
            (x, y)
        };
        Ok(train_classifier(kind, &x, &y, &hp, mask, c.seqrel.seed)?)
    };
    let relation = fit(Task::Relation)?;
    let direction = fit(Task::Direction)?;
    Ok(features
        .iter()
        .map(|f| {
            let row = f.select(mask);
            let positive = relation.predict(&row);
            PairLabel {
                a: f.pair.0.clone(),
                b: f.pair.1.clone(),
                relation: if positive { RelationLabel::Positive } else { RelationLabel::Negative },
                direction: positive.then(|| if direction.predict(&row) { Direction::Forward } else { Direction::Backward }),
            }
        })
        .collect())
}

pub fn evaluate_gold(path: &Path, rules: &[CausalRule], extraction: &elg_core::events::ExtractionConfig) -> Result<EvalMetrics> {
    let gold = parse_gold(&read_text(path)?, path)?;
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    let mut universe = Vec::new();
    for (s, tags) in gold {
        let tags = tags
            .iter()
            .map(|t| BioTag::parse(t).ok_or_else(|| ElgError::Usage(format!("{}: unknown BIO tag `{t}` in {}#{}", path.display(), s.doc_id, s.sent_index))))
            .collect::<Result<Vec<_>>>()?;
        let tagging = BioTagging { tags };
        if !tagging.is_well_formed() {
            return Err(ElgError::Usage(format!("{}: ill-formed BIO sequence in {}#{}", path.display(), s.doc_id, s.sent_index)));
        }
        truth.extend(tagging.decode(&s.doc_id, s.sent_index));
        pred.extend(apply_rules(&s, rules, extraction));
        universe.push(s);
    }
    Ok(evaluate_extraction(&pred, &truth, &universe)?)
}

/// Builds, generalizes and re-estimates the graph.
pub fn assemble_graph(
    corpus: &ParsedCorpus,
    docs: &[DocumentEvents],
    counts: &PairCounts,
    labels: &[PairLabel],
    mentions: &[CausalMention],
    table: &EmbeddingTable,
    c: &Config,
) -> Result<(ElgGraph, MergeReport)> {
    let contexts = all_contexts(corpus, docs, c.pairs.window);
    let pairs: Vec<ClassifiedPair> = labels
        .iter()
        .filter_map(|l| l.direction.map(|direction| ClassifiedPair { a: l.a.clone(), b: l.b.clone(), direction }))
        .collect();
    let mut graph = build_graph(&pairs, mentions, counts, &contexts)?;
    if let Some(path) = &c.graph.curated {
        for e in load_curated(path, &graph)? {
            graph.add_edge(e)?;
        }
    }
    let outcome = merge_similar_events(&graph, table, &c.merge())?;
    for w in &outcome.report.warnings {
        log::warn!("{w}");
    }
    let mut graph = exact_probabilities(&outcome.graph, docs, c.pairs.window)?;
    graph.meta.insert("window".into(), c.pairs.window.to_string());
    graph.meta.insert("sentences".into(), names::SENTENCES.into());
    graph.meta.insert("corpus_sha256".into(), sha256_hex(write_conllu(corpus).as_bytes()));
    Ok((graph, outcome.report))
}

/// Surface form to canonical key for every merged node.
pub fn canonical_map(graph: &ElgGraph) -> BTreeMap<EventKey, EventKey> {
    graph
        .nodes()
        .iter()
        .flat_map(|n| n.surface_forms.iter().filter(|f| **f != n.canonical).map(|f| (f.clone(), n.canonical.clone())))
        .collect()
}

/// Transition probabilities recounted over occurrences relabeled to the
/// graph's canonical keys.
pub fn exact_probabilities(graph: &ElgGraph, docs: &[DocumentEvents], window: usize) -> Result<ElgGraph> {
    let map = canonical_map(graph);
    let relabeled: Vec<DocumentEvents> = docs.iter().map(|d| d.relabel(&map)).collect();
    Ok(recompute_probabilities(graph, &count_pairs(&relabeled, window))?)
}

/// Curated edges: `src <TAB> dst <TAB> relation <TAB> subtype|- <TAB> support`.
fn load_curated(path: &Path, graph: &ElgGraph) -> Result<Vec<TypedEdge>> {
    let text = read_text(path)?;
    crate::formats::data_lines(&text)
        .map(|(line, l)| {
            let c: Vec<&str> = l.split('\t').collect();
            let [src, dst, rel, sub, support] = c[..] else {
                return Err(ElgError::parse(path, line, "expected src, dst, relation, subtype, support"));
            };
            let node = |k: &str| -> Result<u32> {
                let key = EventKey::parse(k).map_err(|e| ElgError::parse(path, line, e.to_string()))?;
                graph.resolve(&key).ok_or_else(|| ElgError::parse(path, line, format!("event {k} is not in the graph")))
            };
            let relation = Relation::parse(rel).ok_or_else(|| ElgError::parse(path, line, format!("unknown relation `{rel}`")))?;
            if relation == Relation::Sequential {
                return Err(ElgError::parse(path, line, "sequential edges come from the corpus, not from curated files"));
            }
            let mut e = TypedEdge::new(node(src)?, node(dst)?, relation, crate::formats::parse_u64(path, line, support)?);
            e.subtype = match sub {
                "-" => None,
                s => Some(elg_core::graph::EdgeSubtype::parse(s).ok_or_else(|| ElgError::parse(path, line, format!("unknown subtype `{s}`")))?),
            };
            Ok(e)
        })
        .collect()
}

/// Text of every sentence referenced as evidence.
pub fn evidence_sentences(graph: &ElgGraph, corpus: &ParsedCorpus) -> SentenceTexts {
    let wanted: BTreeSet<(&str, usize)> = graph.edges().iter().flat_map(|e| e.evidence.iter().map(|(d, s)| (d.as_str(), *s))).collect();
    let mut out = SentenceTexts::new();
    for d in &corpus.documents {
        for s in &d.sentences {
            if wanted.contains(&(d.doc_id.as_str(), s.sent_index)) {
                out.insert((d.doc_id.clone(), s.sent_index), s.text());
            }
        }
    }
    out
}

pub fn merge_table(r: &MergeReport) -> Table {
    let mut t = Table::new("Event generalization", &["Measure", "Value"]);
    for (k, v) in [
        ("nodes_before", r.nodes_before),
        ("nodes_after", r.nodes_after),
        ("merged_clusters", r.merged_clusters),
        ("dropped_self_loops", r.dropped_self_loops),
        ("dropped_self_loop_support", r.dropped_self_loop_support as usize),
        ("missing_vectors", r.missing_vectors),
    ] {
        t.push(vec![k.into(), v.to_string()]);
    }
    t
}

/// Deterministic document split: documents ordered by a seeded hash of
/// their id, the first `holdout` share held out.
pub fn split_documents(docs: &[DocumentEvents], holdout: f64, seed: u64) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    if docs.len() < 2 {
        return Err(elg_core::Error::DatasetTooSmall { have: docs.len(), need: 2 }.into());
    }
    let mut order: Vec<(String, &str)> = docs.iter().map(|d| (sha256_hex(format!("{seed}:{}", d.doc_id).as_bytes()), d.doc_id.as_str())).collect();
    order.sort();
    let n_test = ((holdout * docs.len() as f64).round() as usize).clamp(1, docs.len() - 1);
    let test = order[..n_test].iter().map(|(_, d)| d.to_string()).collect();
    let train = order[n_test..].iter().map(|(_, d)| d.to_string()).collect();
    Ok((train, test))
}

/// Accuracy per scorer with a paired t-test against `baseline`.
pub fn compare_table(reports: &[McncReport], baseline: &McncReport) -> Table {
    let mut t = Table::new("Narrative cloze", &["Method", "Accuracy", "p-value"]);
    for r in reports {
        let p = if r.scorer == baseline.scorer { "-".to_string() } else { format!("{:.3e}", r.p_value_against(baseline)) };
        t.push(vec![r.scorer.clone(), pct(r.accuracy), p]);
    }
    t
}

/// Rebuilds per-scorer reports from a saved log.
pub fn reports_from_log(answers: &[usize], log: &ScorerLog) -> Vec<McncReport> {
    log.iter()
        .map(|(name, chosen)| {
            let correct: Vec<bool> = chosen.iter().zip(answers).map(|(c, a)| c == a).collect();
            let hits = correct.iter().filter(|c| **c).count();
            McncReport { scorer: name.clone(), accuracy: 100.0 * hits as f64 / answers.len().max(1) as f64, chosen: chosen.clone(), correct }
        })
        .collect()
}

/// Loads a graph, naming the stage that produces it when it is missing.
pub fn require_graph(path: &Path) -> Result<ElgGraph> {
    if !path.exists() {
        return Err(ElgError::MissingArtifact { stage: "build", path: path.to_path_buf() });
    }
    load_graph(path)
}
