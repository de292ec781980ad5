use std::path::Path;

use elg::formats::corpus::{parse_conllu, write_conllu};
use elg::formats::counts::{parse_counts, write_counts};
use elg::formats::mcnc::{parse_instances, parse_log, write_instances, write_log, ScorerLog};
use elg::formats::read_text;
use elg::formats::tables::{parse_features, parse_occurrences, parse_pair_labels, write_features, write_occurrences, write_pair_labels, PairLabel};
use elg::formats::vectors::{parse_vectors, write_vectors};
use elg::formats::{escape, fmt_f64, unescape};
use elg_core::embeddings::EmbeddingTable;
use elg_core::events::TokenSpan;
use elg_core::pairstats::{count_pairs, DocumentEvents, FeatureVector};
use elg_core::predict::McncInstance;
use elg_core::seqrel::{Direction, RelationLabel};
use elg_core::{EventKey, EventOccurrence};
use proptest::prelude::*;

fn here() -> &'static Path {
    Path::new("test")
}

fn arb_key() -> impl Strategy<Value = EventKey> {
    ("[a-z]{0,3}", "[a-z]{1,4}(_[a-z]{1,3})?", "[a-z]{0,3}").prop_map(|(s, p, o)| EventKey::parse(&format!("{s}|{p}|{o}")).unwrap())
}

fn arb_text() -> impl Strategy<Value = String> {
    "[a-z#\\\\\t\n\r é-]{1,10}"
}

fn arb_f64() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), Just(0.0), Just(-0.0), (-1e3..1e3f64)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn escape_round_trips(s in any::<String>()) {
        let e = escape(&s);
        prop_assert!(!e.contains('\t') && !e.contains('\n'));
        prop_assert_eq!(unescape(&e), Some(s));
    }

    #[test]
    fn floats_round_trip(x in arb_f64()) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn occurrences_round_trip(rows in prop::collection::vec((arb_text(), 0..50usize, 0..20usize, 0..5usize, arb_key(), prop::collection::vec("[a-z]{1,4}", 0..3)), 0..12)) {
        let occ: Vec<EventOccurrence> = rows
            .into_iter()
            .map(|(doc, sent, start, len, event, extra)| EventOccurrence {
                event,
                doc_id: doc,
                sent_index: sent,
                token_span: TokenSpan::new(start, start + len),
                predicate_pos: start + len / 2,
                extra,
            })
            .collect();
        let text = write_occurrences(&occ);
        prop_assert_eq!(parse_occurrences(&text, here()).unwrap(), occ);
    }

    #[test]
    fn features_round_trip(rows in prop::collection::vec((arb_key(), arb_key(), prop::collection::vec(arb_f64(), 25)), 0..6), width in 0..6usize) {
        let fvs: Vec<FeatureVector> = rows
            .into_iter()
            .map(|(a, b, v)| FeatureVector {
                pair: (a, b),
                frequency: v[..9].try_into().unwrap(),
                ratio: v[9..20].try_into().unwrap(),
                context: v[20..20 + width.min(5)].to_vec(),
                pmi: v[20..25].try_into().unwrap(),
            })
            .collect();
        let back = parse_features(&write_features(&fvs), here()).unwrap();
        prop_assert_eq!(back.len(), fvs.len());
        for (x, y) in back.iter().zip(&fvs) {
            prop_assert_eq!(&x.pair, &y.pair);
            let bits = |f: &FeatureVector| f.frequency.iter().chain(&f.ratio).chain(&f.context).chain(&f.pmi).map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(x), bits(y));
        }
    }

    #[test]
    fn counts_round_trip(chains in prop::collection::vec(prop::collection::vec(arb_key(), 1..8), 1..8), window in 1..4usize) {
        let docs: Vec<DocumentEvents> = chains.iter().enumerate().map(|(i, c)| DocumentEvents::from_chain(format!("d{i}"), c)).collect();
        let counts = count_pairs(&docs, window);
        let text = write_counts(&counts);
        let back = parse_counts(&text, here()).unwrap();
        prop_assert_eq!(write_counts(&back), text);
        prop_assert_eq!(back.events(), counts.events());
        prop_assert_eq!(back.directed(), counts.directed());
    }

    #[test]
    fn vectors_round_trip(rows in prop::collection::btree_map("[a-z_]{1,6}", prop::collection::vec(-10.0..10.0f64, 3), 0..10)) {
        let table = EmbeddingTable::from_rows(3, rows.clone().into_iter().collect()).unwrap();
        let text = write_vectors(&table);
        let back = parse_vectors(&text, here()).unwrap();
        prop_assert_eq!(write_vectors(&back), text);
        for (w, v) in &rows {
            prop_assert_eq!(back.get(w).unwrap(), &v[..]);
        }
    }

    #[test]
    fn pair_labels_round_trip(rows in prop::collection::vec((arb_key(), arb_key(), prop::option::of(any::<bool>())), 0..10)) {
        let labels: Vec<PairLabel> = rows
            .into_iter()
            .map(|(a, b, d)| PairLabel {
                a,
                b,
                relation: if d.is_some() { RelationLabel::Positive } else { RelationLabel::Negative },
                direction: d.map(|f| if f { Direction::Forward } else { Direction::Backward }),
            })
            .collect();
        prop_assert_eq!(parse_pair_labels(&write_pair_labels(&labels), here()).unwrap(), labels);
    }

    #[test]
    fn instances_and_logs_round_trip(rows in prop::collection::vec((arb_text(), prop::collection::vec(arb_key(), 0..4), prop::collection::vec(arb_key(), 1..6), any::<prop::sample::Index>()), 0..8)) {
        let inst: Vec<McncInstance> = rows
            .into_iter()
            .map(|(id, context, candidates, i)| McncInstance { chain_id: id, context, answer: i.index(candidates.len()), candidates })
            .collect();
        prop_assert_eq!(parse_instances(&write_instances(&inst), here()).unwrap(), inst.clone());
        let answers: Vec<usize> = inst.iter().map(|i| i.answer).collect();
        let log: ScorerLog = [("graph".to_string(), answers.clone()), ("random".to_string(), vec![0; answers.len()])].into_iter().collect();
        let (a, l) = parse_log(&write_log(&answers, &log), here()).unwrap();
        prop_assert_eq!(a, answers);
        prop_assert_eq!(l, log);
    }
}

#[test]
fn conllu_round_trips_the_fixture() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus.conllu");
    let (corpus, report) = parse_conllu(&read_text(&path).unwrap(), &path).unwrap();
    assert_eq!(report.dropped.len(), 1);
    let text = write_conllu(&corpus);
    let (again, report) = parse_conllu(&text, &path).unwrap();
    assert_eq!(report.dropped.len(), 0);
    assert_eq!(again, corpus);
    assert_eq!(write_conllu(&again), text);
}

#[test]
fn truncated_tables_are_rejected() {
    let bad = "#doc_id\tsent\tstart\tend\tpredicate\tkey\textra\nd1\t0\t3\t1\t2\t|rise|\t-\n";
    assert!(parse_occurrences(bad, here()).is_err());
    let short = "#doc_id\tsent\tstart\tend\tpredicate\tkey\textra\nd1\t0\t1\n";
    let err = parse_occurrences(short, here()).unwrap_err();
    assert!(err.to_string().contains(":2:"), "{err}");
    assert!(parse_counts("[PAIRS]\n|b|\t|a|\t1\t1\t0\n", here()).is_err());
    assert!(parse_pair_labels("|a|\t|b|\tpositive\t-\n", here()).is_err());
}
