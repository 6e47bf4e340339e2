mod oracles;

use std::collections::{BTreeMap, HashSet};

use lsgenre::balance::{balance_by_topic, compute_all_quotas, topic_class_counts};
use lsgenre::cleaning::{clean_text, default_ruleset};
use lsgenre::cluster::{kmeans, EmbeddingSet, KMeansOptions};
use lsgenre::corpus::{manifest_to_string, read_manifest, ClassLabel, Document, Manifest};
use lsgenre::eval::{compute_metrics, split, Stratify};
use lsgenre::features::tokenize;
use oracles::{date, manifest_from_table, oracle_tokens};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = ClassLabel> {
    (0usize..4).prop_map(|i| ClassLabel::ALL[i])
}

fn document() -> impl Strategy<Value = Document> {
    (
        "[a-z0-9]{1,12}",
        label(),
        "[a-z]{1,8}( [a-z]{1,8})?",
        "\\PC{0,80}",
        proptest::option::of("\\PC{0,80}"),
        proptest::option::of("https://[a-z]{1,10}\\.org/[a-z]{0,6}"),
    )
        .prop_map(|(id, label, topic, raw, clean, url)| {
            let mut d = Document::new(id, label, topic, format!("src-{}", label.name()), raw, date());
            if let Some(c) = clean {
                d.set_clean_text(c);
            }
            if let Some(u) = url {
                d = d.with_url(u);
            }
            d
        })
}

fn manifest() -> impl Strategy<Value = Manifest> {
    (proptest::collection::vec(document(), 0..12), any::<u64>()).prop_map(|(docs, seed)| {
        let mut seen = HashSet::new();
        let docs: Vec<Document> = docs.into_iter().filter(|d| seen.insert(d.id.clone())).collect();
        // one label per source is required, which the naming above ensures
        Manifest::new("prop", seed, docs).unwrap()
    })
}

const FRAGMENT: &str = "(Sign up\n|Save Article\n|doi:10\\.1000/[a-z0-9.]{1,6}|References\n|BMJ|\
British Medical Journal|Image credit: [a-z ]{0,8}\n|About the Authors?\n|\u{200B}|\u{00AD}|\u{7}|\
[ \t]{1,3}|\n{1,3}|[a-zA-Z]{1,8}|[.,;:()]|\\PC)";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn manifest_round_trips(m in manifest()) {
        let text = manifest_to_string(&m).unwrap();
        let back = read_manifest(text.as_bytes()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn cleaning_is_idempotent(parts in proptest::collection::vec(proptest::string::string_regex(FRAGMENT).unwrap(), 0..30),
                              source in "(mercola|bmj|news)") {
        let rules = default_ruleset();
        let text: String = parts.concat();
        let once = clean_text(&text, &source, &rules);
        prop_assert_eq!(clean_text(&once, &source, &rules), once);
    }

    #[test]
    fn cleaning_is_idempotent_on_arbitrary_text(text in "\\PC{0,200}") {
        let rules = default_ruleset();
        let once = clean_text(&text, "news", &rules);
        prop_assert_eq!(clean_text(&once, "news", &rules), once);
    }

    #[test]
    fn balanced_cells_are_equal(table in proptest::collection::vec(proptest::array::uniform4(0usize..9), 1..6),
                                seed in any::<u64>()) {
        let mut table = table;
        table[0][0] = table[0][0].max(1);
        let m = manifest_from_table(&table);
        let b = balance_by_topic(&m, &compute_all_quotas(&m), seed).unwrap();
        let counts = topic_class_counts(&b.manifest);
        for (t, row) in table.iter().enumerate() {
            let quota = *row.iter().min().unwrap();
            match counts.get(&format!("topic {t}")) {
                None => prop_assert_eq!(quota, 0),
                Some(c) => {
                    for class in ClassLabel::ALL {
                        prop_assert_eq!(c.get(&class).copied().unwrap_or(0), quota);
                    }
                }
            }
        }
        let ids: HashSet<&str> = m.documents.iter().map(|d| d.id.as_str()).collect();
        prop_assert!(b.selected_ids.iter().all(|i| ids.contains(i.as_str())));
    }

    #[test]
    fn split_partitions_within_one_per_stratum(table in proptest::collection::vec(proptest::array::uniform4(2usize..15), 1..4),
                                               ratio in 0.05f64..0.95, seed in any::<u64>()) {
        let m = manifest_from_table(&table);
        let s = split(&m, ratio, Stratify::ClassTopic, seed).unwrap();
        let train: HashSet<&String> = s.train_ids.iter().collect();
        let test: HashSet<&String> = s.test_ids.iter().collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len() + test.len(), m.len());
        let mut per: BTreeMap<(String, ClassLabel), (usize, usize)> = BTreeMap::new();
        for d in &m.documents {
            let e = per.entry((d.topic.clone(), d.label)).or_default();
            e.0 += 1;
            if test.contains(&d.id) {
                e.1 += 1;
            }
        }
        for (n, t) in per.values() {
            let expected = *n as f64 * (1.0 - ratio);
            prop_assert!((*t as f64 - expected).abs() <= 1.0, "{} of {} against {}", t, n, expected);
        }
        prop_assert_eq!(split(&m, ratio, Stratify::ClassTopic, seed).unwrap(), s);
    }

    #[test]
    fn metrics_are_bounded_and_consistent(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..80)) {
        let t: Vec<ClassLabel> = pairs.iter().map(|p| ClassLabel::ALL[p.0]).collect();
        let p: Vec<ClassLabel> = pairs.iter().map(|p| ClassLabel::ALL[p.1]).collect();
        let r = compute_metrics(&t, &p).unwrap();
        for c in ClassLabel::ALL {
            let m = &r.per_class[&c];
            prop_assert_eq!(r.confusion[c.index()].iter().sum::<u64>(), m.support);
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        for v in [r.accuracy, r.macro_f1, r.weighted_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn weighted_equals_macro_with_equal_supports(k in 1usize..6, preds in proptest::collection::vec(0usize..4, 24)) {
        let t: Vec<ClassLabel> = (0..4 * k).map(|i| ClassLabel::ALL[i % 4]).collect();
        let p: Vec<ClassLabel> = (0..4 * k).map(|i| ClassLabel::ALL[preds[i % 24]]).collect();
        let r = compute_metrics(&t, &p).unwrap();
        prop_assert!((r.weighted_f1 - r.macro_f1).abs() < 1e-12);
    }

    #[test]
    fn tokenizer_matches_oracle(text in "[a-zA-Zàéöß0-9_ ,.'\\-\n\t]{0,80}") {
        prop_assert_eq!(tokenize(&text), oracle_tokens(&text));
    }

    #[test]
    fn kmeans_inertia_never_increases(points in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 4..40),
                                      seed in any::<u64>()) {
        let ids = (0..points.len()).map(|i| i.to_string()).collect();
        let e = EmbeddingSet::new(ids, points, None).unwrap();
        let c = kmeans(&e, &KMeansOptions { n_init: 3, seed, ..Default::default() }).unwrap();
        for w in c.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
        prop_assert_eq!(c.assignment.len(), e.len());
        prop_assert!(c.assignment.iter().all(|&a| a < 4));
    }
}
