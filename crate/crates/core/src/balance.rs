//! Topic- and class-balanced subsampling.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{by_name, ClassLabel, Manifest};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicQuota {
    pub topic: String,
    pub per_class_quota: usize,
    /// Documents available per class; every class is listed, absent ones as 0.
    #[serde(with = "by_name")]
    pub availability: BTreeMap<ClassLabel, usize>,
}

fn availability(m: &Manifest) -> BTreeMap<&str, BTreeMap<ClassLabel, usize>> {
    let mut out: BTreeMap<&str, BTreeMap<ClassLabel, usize>> = BTreeMap::new();
    for d in &m.documents {
        let row = out
            .entry(d.topic.as_str())
            .or_insert_with(|| ClassLabel::ALL.iter().map(|&c| (c, 0)).collect());
        *row.get_mut(&d.label).expect("all classes present") += 1;
    }
    out
}

/// One quota per listed topic: the smallest class availability.
pub fn compute_quotas(m: &Manifest, topics: &[String]) -> Result<Vec<TopicQuota>> {
    let avail = availability(m);
    topics
        .iter()
        .map(|t| {
            let key = t.to_lowercase();
            let row = avail
                .get(key.as_str())
                .ok_or_else(|| Error::invalid(format!("topic {t:?} does not occur in the manifest")))?;
            Ok(TopicQuota {
                topic: key,
                per_class_quota: row.values().copied().min().unwrap_or(0),
                availability: row.clone(),
            })
        })
        .collect()
}

/// Quotas for every topic in the manifest.
pub fn compute_all_quotas(m: &Manifest) -> Vec<TopicQuota> {
    compute_quotas(m, &m.topics()).expect("manifest topics are present")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Balanced {
    pub manifest: Manifest,
    /// Ids of the selected documents in manifest order.
    pub selected_ids: Vec<String>,
    pub zero_quota_topics: Vec<String>,
}

/// Draw exactly `per_class_quota` documents from every (topic, class) cell.
///
/// One ChaCha8 stream seeded with `seed` visits the quotas in the given
/// order and the classes in code order. Each cell draws a partial
/// Fisher-Yates sample of its documents, listed in manifest order. Topics
/// without a quota are dropped. The output keeps manifest order and records
/// `seed`.
pub fn balance_by_topic(m: &Manifest, quotas: &[TopicQuota], seed: u64) -> Result<Balanced> {
    let mut cells: BTreeMap<(&str, ClassLabel), Vec<usize>> = BTreeMap::new();
    for (i, d) in m.documents.iter().enumerate() {
        cells.entry((d.topic.as_str(), d.label)).or_default().push(i);
    }

    let mut r = rng::seeded(seed);
    let mut keep = HashSet::new();
    let mut zero = Vec::new();
    let mut seen_topics = HashSet::new();
    for q in quotas {
        if !seen_topics.insert(q.topic.as_str()) {
            return Err(Error::invalid(format!("topic {:?} has two quotas", q.topic)));
        }
        if q.per_class_quota == 0 {
            log::warn!("topic {} has a zero quota and is dropped", q.topic);
            zero.push(q.topic.clone());
            continue;
        }
        for class in ClassLabel::ALL {
            let docs = cells.get(&(q.topic.as_str(), class)).map(Vec::as_slice).unwrap_or(&[]);
            if q.per_class_quota > docs.len() {
                return Err(Error::invalid(format!(
                    "quota {} for topic {:?} exceeds the {} available {class} documents; recompute the quotas",
                    q.per_class_quota,
                    q.topic,
                    docs.len()
                )));
            }
            for j in rng::sample_indices(&mut r, docs.len(), q.per_class_quota) {
                keep.insert(docs[j]);
            }
        }
    }

    let documents: Vec<_> = m
        .documents
        .iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, d)| d.clone())
        .collect();
    let selected_ids = documents.iter().map(|d| d.id.clone()).collect();
    Ok(Balanced {
        manifest: Manifest::new(m.version.clone(), seed, documents)?,
        selected_ids,
        zero_quota_topics: zero,
    })
}

/// Count matrix topic → class → documents.
pub fn topic_class_counts(m: &Manifest) -> BTreeMap<String, BTreeMap<ClassLabel, usize>> {
    availability(m).into_iter().map(|(t, row)| (t.to_owned(), row)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::doc;

    fn planted(avail: [usize; 4]) -> Manifest {
        let mut docs = Vec::new();
        for (c, &n) in ClassLabel::ALL.iter().zip(&avail) {
            for i in 0..n {
                docs.push(doc(&format!("{}-{i}", c.name()), *c, "flu", "text"));
            }
        }
        Manifest::new("v", 0, docs).unwrap()
    }

    #[test]
    fn quota_is_minimum() {
        // ClassLabel::ALL is in code order: alternative, scientific, vernacular, disinformative.
        let q = compute_quotas(&planted([8, 10, 7, 7]), &["flu".into()]).unwrap();
        assert_eq!(q[0].per_class_quota, 7);
        let q = compute_quotas(&planted([9, 5, 0, 3]), &["flu".into()]).unwrap();
        assert_eq!(q[0].per_class_quota, 0);
    }

    #[test]
    fn unknown_topic_is_error() {
        let err = compute_quotas(&planted([1, 1, 1, 1]), &["urine".into()]).unwrap_err();
        assert!(err.to_string().contains("urine"));
    }

    #[test]
    fn every_class_contributes_quota() {
        let m = planted([8, 8, 8, 5]);
        let q = compute_all_quotas(&m);
        let b = balance_by_topic(&m, &q, 11).unwrap();
        let counts = topic_class_counts(&b.manifest);
        assert!(counts["flu"].values().all(|&n| n == 5));
        assert_eq!(b.manifest.seed, 11);
        assert_eq!(b.selected_ids.len(), 20);
    }

    #[test]
    fn rebalancing_is_deterministic() {
        let m = planted([8, 9, 10, 6]);
        let q = compute_all_quotas(&m);
        assert_eq!(balance_by_topic(&m, &q, 3).unwrap(), balance_by_topic(&m, &q, 3).unwrap());
        assert_ne!(
            balance_by_topic(&m, &q, 3).unwrap().selected_ids,
            balance_by_topic(&m, &q, 4).unwrap().selected_ids
        );
    }

    #[test]
    fn zero_quota_reported() {
        let m = planted([9, 5, 0, 3]);
        let b = balance_by_topic(&m, &compute_all_quotas(&m), 1).unwrap();
        assert!(b.manifest.is_empty());
        assert_eq!(b.zero_quota_topics, vec!["flu".to_string()]);
    }

    #[test]
    fn stale_quota_is_error() {
        let m = planted([2, 2, 2, 2]);
        let mut q = compute_all_quotas(&m);
        q[0].per_class_quota = 3;
        assert!(balance_by_topic(&m, &q, 1).is_err());
    }
}
