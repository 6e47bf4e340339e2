mod oracles;

use std::collections::BTreeMap;

use lsgenre::citations::{select_top_decile_scoped, CitationRecord, DecileScope};
use lsgenre::cluster::max_weight_assignment;
use lsgenre::corpus::ClassLabel;
use lsgenre::eval::{compute_metrics, metrics_from_confusion, split, Stratify};
use lsgenre::explain::extract_forest_rule_terms;
use lsgenre::features::{fit_tfidf, smoothed_idf, tokenize, DocVector, VectorizerKind, DEFAULT_MAX_FEATURES};
use lsgenre::models::{
    fit_sigmoid, logreg_objective, train_random_forest, Dataset, ForestOptions, ModelArtifact, ModelKind,
    TrainConfig,
};
use lsgenre::rng::shuffle;
use lsgenre::synth::{class_markers, generate, SynthOptions};
use oracles::*;
use rand::Rng;

fn labels(idx: &[usize]) -> Vec<ClassLabel> {
    idx.iter().map(|&i| ClassLabel::ALL[i]).collect()
}

fn check_matrix(confusion: &[[u64; 4]; 4]) {
    let (t, p) = expand(confusion);
    if t.is_empty() {
        return;
    }
    let report = compute_metrics(&labels(&t), &labels(&p)).unwrap();
    assert!(same_as_oracle(&report, &metrics_oracle(&t, &p)), "{confusion:?}");
}

#[test]
fn metrics_every_4x4_matrix_with_unit_entries() {
    for bits in 0u32..1 << 16 {
        let mut c = [[0u64; 4]; 4];
        for k in 0..16 {
            c[k / 4][k % 4] = u64::from(bits >> k & 1);
        }
        check_matrix(&c);
    }
}

#[test]
fn metrics_every_3x3_matrix_with_entries_up_to_five() {
    for code in 0u32..6u32.pow(9) {
        let mut c = [[0u64; 4]; 4];
        let mut v = code;
        for k in 0..9 {
            c[k / 3][k % 3] = u64::from(v % 6);
            v /= 6;
        }
        let (t, p) = expand(&c);
        if t.is_empty() {
            continue;
        }
        let report = metrics_from_confusion(c).unwrap();
        assert!(same_as_oracle(&report, &metrics_oracle(&t, &p)), "{c:?}");
    }
}

#[test]
fn metrics_random_4x4_matrices_in_shuffled_order() {
    let mut r = rng(5);
    for _ in 0..20_000 {
        let c: [[u64; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| r.random_range(0..=5)));
        let (t, p) = expand(&c);
        if t.is_empty() {
            continue;
        }
        let mut pairs: Vec<(usize, usize)> = t.iter().copied().zip(p.iter().copied()).collect();
        shuffle(&mut r, &mut pairs);
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let report = compute_metrics(&labels(&t), &labels(&p)).unwrap();
        assert!(same_as_oracle(&report, &metrics_oracle(&t, &p)), "{c:?}");
        assert_eq!(report.confusion, c);
    }
}

/// About 2.8e12 matrices; run with `--ignored` and patience.
#[test]
#[ignore]
fn metrics_every_4x4_matrix_with_entries_up_to_five() {
    let mut cells = [0u64; 16];
    loop {
        let c: [[u64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| cells[i * 4 + j]));
        check_matrix(&c);
        let Some(k) = (0..16).rev().find(|&k| cells[k] < 5) else {
            break;
        };
        cells[k] += 1;
        cells[k + 1..].iter_mut().for_each(|v| *v = 0);
    }
}

#[test]
fn worked_metrics_example() {
    use ClassLabel::{AlternativeScientific as A, Scientific as B};
    let r = compute_metrics(&[A, A, B, B], &[A, B, B, B]).unwrap();
    assert_eq!(r.per_class[&B].precision, 2.0 / 3.0);
    assert_eq!(r.per_class[&B].recall, 1.0);
    assert!((r.per_class[&B].f1 - 0.8).abs() < 1e-15);
    assert!((r.weighted_f1 - 0.733_333_333_333_333_3).abs() < 1e-12);
}

#[test]
fn tfidf_matches_oracle_on_many_corpora() {
    let mut r = rng(7);
    for _ in 0..300 {
        let docs = random_corpus(&mut r);
        let mf = r.random_range(1..=40);
        let o = tfidf_oracle(&docs, mf);
        let Ok(model) = fit_tfidf(&docs, mf) else {
            assert!(o.terms.is_empty());
            continue;
        };
        assert_eq!(model.vocabulary.terms(), o.terms.as_slice());
        for (d, row) in docs.iter().zip(&o.rows) {
            for (a, b) in model.transform(d).to_dense().iter().zip(row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn tokenizer_matches_oracle_on_accented_text() {
    for text in [
        "Café naïve façade — résumé",
        "Über Straße, ÉTÉ; x_y a1 I'm",
        "tab\tsep\nnew-line 42 7",
    ] {
        assert_eq!(tokenize(text), oracle_tokens(text), "{text}");
    }
}

#[test]
fn idf_decreases_with_document_frequency() {
    for n in 1..60 {
        for df in 1..n {
            assert!(smoothed_idf(n, df + 1) < smoothed_idf(n, df));
        }
        assert_eq!(smoothed_idf(n, n), 1.0);
    }
}

#[test]
fn logreg_gradient_matches_finite_differences() {
    let mut r = rng(9);
    let dim = 5;
    let labels: Vec<ClassLabel> = (0..24).map(|i| ClassLabel::ALL[i % 4]).collect();
    let rows = (0..24)
        .map(|_| DocVector::from_dense(&(0..dim).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<_>>()))
        .collect();
    let data = Dataset::new(dim, rows, labels).unwrap();
    let classes = data.classes();
    let theta: Vec<f64> = (0..classes.len() * (dim + 1)).map(|_| r.random_range(-0.5..0.5)).collect();
    let (_, grad) = logreg_objective(&data, &classes, 0.7, &theta);
    let h = 1e-6;
    for i in 0..theta.len() {
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[i] += h;
        down[i] -= h;
        let fd = (logreg_objective(&data, &classes, 0.7, &up).0 - logreg_objective(&data, &classes, 0.7, &down).0) / (2.0 * h);
        assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()), "component {i}: {fd} vs {}", grad[i]);
    }
}

#[test]
fn hungarian_matches_permutation_search() {
    assert_eq!(permutations(4).len(), 24);
    let mut r = rng(13);
    for n in 1..=5 {
        for _ in 0..200 {
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| r.random_range(-5.0..10.0)).collect())
                .collect();
            let a = max_weight_assignment(&w);
            let mut cols = a.clone();
            cols.sort();
            assert_eq!(cols, (0..n).collect::<Vec<_>>());
            let got: f64 = a.iter().enumerate().map(|(i, &j)| w[i][j]).sum();
            assert!((got - best_assignment_weight(&w)).abs() < 1e-9);
        }
    }
}

#[test]
fn forest_counts_match_traversal_on_text_features() {
    let m = generate(&SynthOptions {
        per_cell: 5,
        ..Default::default()
    })
    .unwrap();
    let texts: Vec<&str> = m.documents.iter().map(|d| d.text()).collect();
    let model = fit_tfidf(&texts, 300).unwrap();
    let rows = texts.iter().map(|t| model.transform(t)).collect();
    let data = Dataset::new(model.vocabulary.len(), rows, m.documents.iter().map(|d| d.label).collect()).unwrap();
    let forest = train_random_forest(
        &data,
        &ForestOptions {
            n_trees: 15,
            seed: 3,
            max_depth: None,
        },
    )
    .unwrap();
    let expected: BTreeMap<String, usize> = traversal_counts(&forest.trees)
        .into_iter()
        .map(|(f, c)| (model.vocabulary.term(f).to_owned(), c))
        .collect();
    let all = extract_forest_rule_terms(&forest, &model.vocabulary, usize::MAX).unwrap();
    let got: BTreeMap<String, usize> = all.iter().map(|t| (t.term.clone(), t.count)).collect();
    assert_eq!(got, expected);
    for w in all.windows(2) {
        assert!(w[0].count > w[1].count || (w[0].count == w[1].count && w[0].term < w[1].term));
    }
    let top = extract_forest_rule_terms(&forest, &model.vocabulary, 5).unwrap();
    assert_eq!(top, all[..5]);
}

#[test]
fn per_topic_decile_matches_grouped_oracle() {
    let mut r = rng(17);
    let day = chrono::NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
    for _ in 0..200 {
        let n = r.random_range(1..=80);
        let records: Vec<CitationRecord> = (0..n)
            .map(|k| CitationRecord {
                pmid: k.to_string(),
                topic: Some(format!("t{}", r.random_range(0..3))),
                doi: None,
                citation_count: Some(r.random_range(0..15)),
                fetched_at: day,
                note: None,
            })
            .collect();
        let mut expected = Vec::new();
        for t in ["t0", "t1", "t2"] {
            let group: Vec<&CitationRecord> = records.iter().filter(|r| r.topic.as_deref() == Some(t)).collect();
            let counts: Vec<u64> = group.iter().map(|r| r.citation_count.unwrap()).collect();
            expected.extend(decile_oracle(&counts).into_iter().map(|i| group[i].pmid.clone()));
        }
        expected.sort_by_key(|p| p.parse::<usize>().unwrap());
        let got: Vec<String> = select_top_decile_scoped(&records, DecileScope::PerTopic)
            .unwrap()
            .into_iter()
            .map(|r| r.pmid)
            .collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn split_of_2466_documents() {
    let per_class = [617, 617, 616, 616];
    let m = manifest_from_table(&[per_class]);
    assert_eq!(m.len(), 2466);
    let s = split(&m, 0.85, Stratify::Class, 0).unwrap();
    assert_eq!((s.train_ids.len(), s.test_ids.len()), (2096, 370));
    // the reported 1,988 / 478 corresponds to a train share of 1988/2466
    let s = split(&m, 1988.0 / 2466.0, Stratify::Class, 0).unwrap();
    assert!((s.train_ids.len() as i64 - 1988).abs() <= 1);
    assert!((s.test_ids.len() as i64 - 478).abs() <= 1);
}

#[test]
fn planted_scientific_document_scores_scientific() {
    let m = generate(&SynthOptions {
        per_cell: 20,
        ..Default::default()
    })
    .unwrap();
    let a = ModelArtifact::fit(&m, VectorizerKind::Tfidf, DEFAULT_MAX_FEATURES, &TrainConfig::for_model(ModelKind::Svc)).unwrap();
    let text = class_markers(ClassLabel::Scientific)[..12].join(" ");
    let s = a.score_text(&text, 0.5).unwrap();
    assert_eq!(s.argmax, ClassLabel::Scientific);
    assert!(!s.abstain);
    for c in ClassLabel::ALL {
        if c != ClassLabel::Scientific {
            assert!(s.get(ClassLabel::Scientific) > s.get(c));
        }
    }
}

/// Platt objective with smoothed targets, written out directly.
fn platt_nll(scores: &[f64], positive: &[bool], a: f64, b: f64) -> f64 {
    let n1 = positive.iter().filter(|&&p| p).count() as f64;
    let n0 = positive.len() as f64 - n1;
    scores
        .iter()
        .zip(positive)
        .map(|(&s, &pos)| {
            let t = if pos { (n1 + 1.0) / (n1 + 2.0) } else { 1.0 / (n0 + 2.0) };
            let p = 1.0 / (1.0 + (a * s + b).exp());
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum()
}

/// Minimizer by successively finer grid search.
fn grid_fit(scores: &[f64], positive: &[bool]) -> (f64, f64) {
    let (mut a, mut b, mut width) = (0.0, 0.0, 32.0);
    for _ in 0..40 {
        let mut best = (platt_nll(scores, positive, a, b), a, b);
        for i in -10..=10 {
            for j in -10..=10 {
                let (ca, cb) = (a + width * i as f64 / 10.0, b + width * j as f64 / 10.0);
                let f = platt_nll(scores, positive, ca, cb);
                if f < best.0 {
                    best = (f, ca, cb);
                }
            }
        }
        (a, b) = (best.1, best.2);
        width *= 0.5;
    }
    (a, b)
}

#[test]
fn separated_scores_calibrate_confidently_on_held_out_points() {
    let mut r = rng(19);
    // margin-separated scores: positives in [1, 2], negatives in [-2, -1]
    let draw = |r: &mut rand_chacha::ChaCha20Rng, pos: bool| if pos { 1.0 } else { -1.0 } * r.random_range(1.0..2.0);
    let y: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
    let s: Vec<f64> = y.iter().map(|&p| draw(&mut r, p)).collect();
    let sig = fit_sigmoid(&s, &y);
    let (a, b) = grid_fit(&s, &y);
    for v in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let oracle = 1.0 / (1.0 + (a * v + b).exp());
        assert!((sig.apply(v) - oracle).abs() < 1e-4, "{sig:?} against ({a}, {b}) at {v}");
    }
    for _ in 0..100 {
        let pos = r.random_bool(0.5);
        let v = draw(&mut r, pos);
        let p_true = if pos { sig.apply(v) } else { 1.0 - sig.apply(v) };
        assert!(p_true >= 0.95, "{v}: {p_true}");
    }
}
