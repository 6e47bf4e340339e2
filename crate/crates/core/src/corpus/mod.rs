//! Documents, manifests, and source ingestion.

mod extract;
mod ingest;
mod label;
mod manifest;
mod registry;

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use extract::{extract_html, extract_xml};
pub use ingest::{ingest_registry, ingest_source, IngestFailure, IngestOptions, IngestReport};
pub use label::{as_name, by_name, ClassLabel};
pub use manifest::{load_manifest, manifest_to_string, read_manifest, write_manifest, MANIFEST_FORMAT};
pub use registry::{FetcherKind, InputFormat, SourceKind, SourceRegistry, SourceSpec};

/// One text item of the corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub label: ClassLabel,
    pub topic: String,
    pub source: String,
    pub raw_text: String,
    pub clean_text: Option<String>,
    /// Character count of `clean_text` when present, else of `raw_text`.
    pub char_len: usize,
    pub retrieved_at: NaiveDate,
    pub url: Option<String>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        label: ClassLabel,
        topic: impl Into<String>,
        source: impl Into<String>,
        raw_text: impl Into<String>,
        retrieved_at: NaiveDate,
    ) -> Self {
        let raw_text = raw_text.into();
        Document {
            id: id.into(),
            label,
            topic: topic.into().to_lowercase(),
            source: source.into(),
            char_len: raw_text.chars().count(),
            raw_text,
            clean_text: None,
            retrieved_at,
            url: None,
        }
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self
    }

    /// Text used downstream: the cleaned text when available.
    pub fn text(&self) -> &str {
        self.clean_text.as_deref().unwrap_or(&self.raw_text)
    }

    pub fn is_cleaned(&self) -> bool {
        self.clean_text.is_some()
    }

    pub fn set_clean_text(&mut self, clean: String) {
        self.char_len = clean.chars().count();
        self.clean_text = Some(clean);
    }

    fn expected_char_len(&self) -> usize {
        self.text().chars().count()
    }
}

/// Stable document id: source name plus the first 16 hex digits of the
/// SHA-256 of the url or filename.
pub fn document_id(source: &str, locator: &str) -> String {
    let digest = Sha256::digest(locator.as_bytes());
    format!("{source}-{}", &hex::encode(digest)[..16])
}

/// The canonical corpus listing.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub documents: Vec<Document>,
}

impl Manifest {
    pub fn new(version: impl Into<String>, seed: u64, documents: Vec<Document>) -> Result<Self> {
        let m = Manifest {
            version: version.into(),
            seed,
            documents,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Checks unique ids, non-empty topics, consistent `char_len`, and that
    /// no source appears under two labels.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        let mut source_labels: HashMap<&str, (ClassLabel, usize)> = HashMap::new();
        for (i, d) in self.documents.iter().enumerate() {
            let line = i + 2;
            let fail = |field: &str, message: String| Error::Manifest {
                line,
                record: Some(d.id.clone()),
                field: field.into(),
                message,
            };
            if d.id.is_empty() {
                return Err(fail("id", "empty id".into()));
            }
            if !ids.insert(d.id.as_str()) {
                return Err(fail("id", format!("duplicate id {:?}", d.id)));
            }
            if d.topic.trim().is_empty() {
                return Err(fail("topic", "empty topic".into()));
            }
            if d.topic != d.topic.to_lowercase() {
                return Err(fail("topic", format!("topic {:?} is not lowercase", d.topic)));
            }
            let expected = d.expected_char_len();
            if d.char_len != expected {
                return Err(fail(
                    "char_len",
                    format!("char_len {} does not match text length {expected}", d.char_len),
                ));
            }
            match source_labels.get(d.source.as_str()) {
                Some(&(label, first)) if label != d.label => {
                    return Err(fail(
                        "label",
                        format!(
                            "source {:?} is labeled {} here but {} on line {first}",
                            d.source, d.label, label
                        ),
                    ));
                }
                Some(_) => {}
                None => {
                    source_labels.insert(&d.source, (d.label, line));
                }
            }
        }
        Ok(())
    }

    /// Check every document's source against a registry.
    pub fn validate_sources(&self, registry: &SourceRegistry) -> Result<()> {
        for d in &self.documents {
            let spec = registry
                .get(&d.source)
                .ok_or_else(|| Error::invalid(format!("document {}: unknown source {:?}", d.id, d.source)))?;
            if spec.label != d.label {
                return Err(Error::invalid(format!(
                    "document {}: source {:?} is registered as {}, document says {}",
                    d.id, d.source, spec.label, d.label
                )));
            }
        }
        Ok(())
    }

    pub fn topics(&self) -> Vec<String> {
        let mut t: Vec<String> = self.documents.iter().map(|d| d.topic.clone()).collect();
        t.sort();
        t.dedup();
        t
    }

    /// Subset keeping manifest order, version and seed.
    pub fn filter(&self, mut keep: impl FnMut(&Document) -> bool) -> Manifest {
        Manifest {
            version: self.version.clone(),
            seed: self.seed,
            documents: self.documents.iter().filter(|d| keep(d)).cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    pub mean_char_len: f64,
}

/// Per-class document counts and mean character length.
pub fn corpus_stats(m: &Manifest) -> Result<BTreeMap<ClassLabel, ClassStats>> {
    if m.is_empty() {
        return Err(Error::invalid("cannot compute statistics of an empty manifest"));
    }
    let mut acc: BTreeMap<ClassLabel, (usize, u128)> = BTreeMap::new();
    for d in &m.documents {
        let e = acc.entry(d.label).or_default();
        e.0 += 1;
        e.1 += d.char_len as u128;
    }
    Ok(acc
        .into_iter()
        .map(|(label, (count, total))| {
            (
                label,
                ClassStats {
                    count,
                    mean_char_len: total as f64 / count as f64,
                },
            )
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 6, 4).unwrap()
    }

    pub(crate) fn doc(id: &str, label: ClassLabel, topic: &str, text: &str) -> Document {
        Document::new(id, label, topic, format!("src-{}", label.name()), text, date())
    }

    #[test]
    fn stats_single_doc() {
        let m = Manifest::new("t", 0, vec![doc("a", ClassLabel::Vernacular, "x", "0123456789")]).unwrap();
        let s = corpus_stats(&m).unwrap();
        assert_eq!(s[&ClassLabel::Vernacular].count, 1);
        assert_eq!(s[&ClassLabel::Vernacular].mean_char_len, 10.0);
    }

    #[test]
    fn stats_mean_of_two() {
        let m = Manifest::new(
            "t",
            0,
            vec![
                doc("a", ClassLabel::Scientific, "x", "abcd"),
                doc("b", ClassLabel::Scientific, "x", "abcdef"),
            ],
        )
        .unwrap();
        assert_eq!(corpus_stats(&m).unwrap()[&ClassLabel::Scientific].mean_char_len, 5.0);
    }

    #[test]
    fn stats_prefer_clean_length() {
        let mut d = doc("a", ClassLabel::Scientific, "x", "raw text with junk");
        d.set_clean_text("raw".into());
        let m = Manifest::new("t", 0, vec![d]).unwrap();
        assert_eq!(corpus_stats(&m).unwrap()[&ClassLabel::Scientific].mean_char_len, 3.0);
    }

    #[test]
    fn stats_empty_manifest_is_error() {
        let m = Manifest::new("t", 0, vec![]).unwrap();
        assert!(corpus_stats(&m).is_err());
    }

    #[test]
    fn char_len_counts_chars_not_bytes() {
        let d = doc("a", ClassLabel::Scientific, "x", "héllo");
        assert_eq!(d.char_len, 5);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Manifest::new(
            "t",
            0,
            vec![
                doc("a", ClassLabel::Scientific, "x", "one"),
                doc("a", ClassLabel::Scientific, "x", "two"),
            ],
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn source_with_two_labels_rejected() {
        let mut b = doc("b", ClassLabel::Vernacular, "x", "two");
        b.source = "src-scientific".into();
        let err = Manifest::new("t", 0, vec![doc("a", ClassLabel::Scientific, "x", "one"), b]).unwrap_err();
        assert!(err.to_string().contains("src-scientific"));
    }

    #[test]
    fn document_ids_are_stable() {
        assert_eq!(document_id("pmc", "a.txt"), document_id("pmc", "a.txt"));
        assert_ne!(document_id("pmc", "a.txt"), document_id("pmc", "b.txt"));
        assert!(document_id("pmc", "a.txt").starts_with("pmc-"));
    }
}
