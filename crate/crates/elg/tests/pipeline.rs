use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use elg::config::{Config, STAGES};
use elg::formats::graph::load_graph;
use elg::formats::read_text;
use elg::formats::tables::{load_features, load_pair_labels, write_pair_labels, PairLabel};
use elg::pipeline::{names, Pipeline, StageStatus};
use elg::ElgError;
use elg_core::seqrel::{Direction, RelationLabel};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn config(out: &Path) -> Config {
    let mut c = Config::load(&data("pipeline.toml"), Vec::<(String, String)>::new()).unwrap();
    c.pipeline.output_dir = out.to_path_buf();
    c
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())).collect()
}

#[test]
fn second_run_skips_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    let first = Pipeline::new(&c).run().unwrap();
    assert_eq!(first.len(), STAGES.len());
    assert!(first.iter().all(|r| r.status == StageStatus::Ran));
    let before = snapshot(tmp.path());
    let second = Pipeline::new(&c).run().unwrap();
    assert!(second.iter().all(|r| r.status == StageStatus::Skipped), "{second:?}");
    assert_eq!(snapshot(tmp.path()), before);
}

#[test]
fn changed_setting_reruns_downstream_only_where_inputs_change() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    Pipeline::new(&c).run().unwrap();
    c.seqrel.pmi_threshold = 0.5;
    let reports = Pipeline::new(&c).run().unwrap();
    let status: BTreeMap<&str, StageStatus> = reports.iter().map(|r| (r.stage.as_str(), r.status)).collect();
    for s in ["extract", "count", "embed", "features", "causality"] {
        assert_eq!(status[s], StageStatus::Skipped, "{s}");
    }
    assert_eq!(status["train-seqrel"], StageStatus::Ran);
    assert_eq!(status["build"], StageStatus::Ran);
}

#[test]
fn edited_artifact_triggers_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    Pipeline::new(&c).run().unwrap();
    let graph = tmp.path().join(names::GRAPH);
    std::fs::write(&graph, b"scribbled").unwrap();
    let r = Pipeline::new(&c).run_stage("build", false).unwrap();
    assert_eq!(r.status, StageStatus::Ran);
    load_graph(&graph).unwrap();
}

#[test]
fn missing_predecessor_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    let p = Pipeline::new(&c);
    for (stage, producer) in [("count", "extract"), ("features", "count"), ("train-seqrel", "features"), ("build", "count"), ("mcnc", "extract")] {
        match p.run_stage(stage, false) {
            Err(ElgError::MissingArtifact { stage: s, .. }) => assert_eq!(s, producer, "{stage}"),
            other => panic!("{stage}: expected a missing artifact, got {other:?}"),
        }
    }
    let err = p.run_stage("count", false).unwrap_err();
    assert!(err.to_string().contains("`extract`"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_stage_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    let err = Pipeline::new(&c).run_stage("bake", false).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn serve_without_build_needs_a_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    c.pipeline.stages = ["extract", "count", "serve"].iter().map(|s| s.to_string()).collect();
    let err = Pipeline::new(&c).run().unwrap_err();
    assert!(matches!(err, ElgError::MissingArtifact { stage: "build", .. }), "{err:?}");
    // nothing ran
    assert!(!tmp.path().join(names::EVENTS).exists());

    let other = tempfile::tempdir().unwrap();
    Pipeline::new(&config(other.path())).run().unwrap();
    c.service.graph = Some(other.path().join(names::GRAPH));
    let reports = Pipeline::new(&c).run().unwrap();
    assert_eq!(reports.len(), 2);
}

#[test]
fn stages_never_touch_predecessor_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    let p = Pipeline::new(&c);
    let mut seen: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for stage in STAGES {
        p.run_stage(stage, true).unwrap();
        let now = snapshot(tmp.path());
        for (name, bytes) in &seen {
            if name != names::MANIFEST {
                assert_eq!(&now[name], bytes, "{stage} rewrote {name}");
            }
        }
        seen = now;
    }
}

#[test]
fn missing_user_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    c.pipeline.corpus = Some(tmp.path().join("nope.conllu"));
    let err = Pipeline::new(&c).run().unwrap_err();
    assert!(matches!(err, ElgError::Usage(_)), "{err:?}");
}

#[test]
fn supervised_mode_labels_every_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    c.seqrel.repeats = 2;
    let p = Pipeline::new(&c);
    for s in ["extract", "count", "embed", "features"] {
        p.run_stage(s, false).unwrap();
    }
    // annotate every pair from its counts; a few come out backward
    let rows = load_features(&tmp.path().join(names::FEATURES)).unwrap();
    let labels: Vec<PairLabel> = rows
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let positive = f.frequency[0] >= 2.0 || i % 3 == 0;
            PairLabel {
                a: f.pair.0.clone(),
                b: f.pair.1.clone(),
                relation: if positive { RelationLabel::Positive } else { RelationLabel::Negative },
                direction: positive.then(|| if i % 5 == 0 { Direction::Backward } else { Direction::Forward }),
            }
        })
        .collect();
    let ann = tmp.path().join("annotations.tsv");
    std::fs::write(&ann, write_pair_labels(&labels)).unwrap();
    c.seqrel.annotations = Some(ann);
    let r = Pipeline::new(&c).run_stage("train-seqrel", false).unwrap();
    assert!(r.summary.iter().any(|(k, v)| k == "mode" && v == "supervised"));
    let classified = load_pair_labels(&tmp.path().join(names::CLASSIFIED)).unwrap();
    assert_eq!(classified.len(), rows.len());
    // every pair gets a model label; positives carry a direction
    for (l, got) in labels.iter().zip(&classified) {
        assert_eq!((&l.a, &l.b), (&got.a, &got.b));
        assert_eq!(got.relation == RelationLabel::Positive, got.direction.is_some());
    }
    let agree = labels.iter().zip(&classified).filter(|(l, g)| l.relation == g.relation).count();
    assert!(agree * 2 > labels.len(), "model agrees with {agree}/{} annotations", labels.len());
    let report = read_text(&tmp.path().join("seqrel_report.txt")).unwrap();
    assert!(report.contains("PMI") && report.contains("Preceding Assumption"), "{report}");
}

#[test]
fn threads_do_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ca = config(a.path());
    ca.pipeline.threads = 1;
    let mut cb = config(b.path());
    cb.pipeline.threads = 4;
    Pipeline::new(&ca).run().unwrap();
    Pipeline::new(&cb).run().unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    for (name, bytes) in &sa {
        if name != names::MANIFEST {
            assert_eq!(&sb[name], bytes, "{name}");
        }
    }
}
