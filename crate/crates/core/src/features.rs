//! Tokenization, count and TF-IDF vectorization, and per-class term
//! characterization.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{ClassLabel, Manifest};
use crate::error::{Error, Result};

/// Word unigrams of two or more word characters, matched after lowercasing.
/// Apostrophes split words, so "you're" gives "you" and "re".
pub const TOKEN_PATTERN: &str = r"\b\w\w+\b";

pub const DEFAULT_MAX_FEATURES: usize = 1000;

pub fn tokenize(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(TOKEN_PATTERN).expect("token pattern compiles"));
    let lower = text.to_lowercase();
    re.find_iter(&lower).map(|m| m.as_str().to_owned()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    None,
}

/// Sparse row with strictly increasing indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
    pub norm: Norm,
}

impl DocVector {
    pub fn zeros(dim: usize) -> Self {
        DocVector {
            dim,
            entries: Vec::new(),
            norm: Norm::None,
        }
    }

    /// Build from possibly unsorted pairs; duplicate indices are summed and
    /// zeros dropped.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>, norm: Norm) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: i + 1,
                });
            }
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        Ok(DocVector { dim, entries, norm })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        DocVector {
            dim: values.len(),
            entries: values.iter().copied().enumerate().filter(|e| e.1 != 0.0).collect(),
            norm: Norm::None,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, x)| x * dense[i]).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    fn l2_normalize(&mut self) {
        let n = self.squared_norm().sqrt();
        if n > 0.0 {
            for e in &mut self.entries {
                e.1 /= n;
            }
        }
        self.norm = Norm::L2;
    }
}

/// Terms indexed in lexicographic order, with document frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    max_features: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    df: Vec<usize>,
    max_features: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.df, r.max_features)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            df: v.df,
            max_features: v.max_features,
        }
    }
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<usize>, max_features: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms,
            df,
            max_features,
            index,
        }
    }

    /// Keep the `max_features` most frequent terms (total occurrences, ties
    /// broken lexicographically), then index them lexicographically.
    fn fit(docs: &[Vec<String>], max_features: usize) -> Result<Self> {
        if max_features == 0 {
            return Err(Error::invalid("max_features must be at least 1"));
        }
        let mut freq: HashMap<&str, (usize, usize)> = HashMap::new();
        for doc in docs {
            let mut seen = std::collections::HashSet::new();
            for t in doc {
                let e = freq.entry(t.as_str()).or_default();
                e.0 += 1;
                if seen.insert(t.as_str()) {
                    e.1 += 1;
                }
            }
        }
        if freq.is_empty() {
            return Err(Error::invalid("corpus has no tokens"));
        }
        let mut ranked: Vec<(&str, usize, usize)> = freq.into_iter().map(|(t, (tf, df))| (t, tf, df)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_features);
        ranked.sort_by(|a, b| a.0.cmp(b.0));
        let terms = ranked.iter().map(|r| r.0.to_owned()).collect();
        let df = ranked.iter().map(|r| r.2).collect();
        Ok(Self::from_parts(terms, df, max_features))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    /// Hex SHA-256 over the newline-joined terms; identifies the feature space.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.terms {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    fn counts(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        let mut c: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.index_of(t) {
                *c.entry(i).or_default() += 1.0;
            }
        }
        c.into_iter().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    pub vocabulary: Vocabulary,
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

impl TfIdfModel {
    /// Raw counts times idf, l2-normalized. Unknown terms are ignored.
    pub fn transform(&self, text: &str) -> DocVector {
        self.transform_tokens(&tokenize(text))
    }

    pub fn transform_tokens(&self, tokens: &[String]) -> DocVector {
        let entries = self
            .vocabulary
            .counts(tokens)
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i]))
            .collect();
        let mut v = DocVector {
            dim: self.vocabulary.len(),
            entries,
            norm: Norm::None,
        };
        v.l2_normalize();
        v
    }
}

/// Smoothed idf: ln((1 + n) / (1 + df)) + 1.
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn fit_tfidf<S: AsRef<str>>(docs: &[S], max_features: usize) -> Result<TfIdfModel> {
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d.as_ref())).collect();
    let vocabulary = Vocabulary::fit(&tokens, max_features)?;
    let idf = vocabulary.df().iter().map(|&df| smoothed_idf(docs.len(), df)).collect();
    Ok(TfIdfModel {
        vocabulary,
        idf,
        n_docs: docs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    pub vocabulary: Vocabulary,
    pub n_docs: usize,
}

impl CountModel {
    /// Raw in-vocabulary term counts.
    pub fn transform(&self, text: &str) -> DocVector {
        DocVector {
            dim: self.vocabulary.len(),
            entries: self.vocabulary.counts(&tokenize(text)),
            norm: Norm::None,
        }
    }
}

pub fn fit_count<S: AsRef<str>>(docs: &[S], max_features: usize) -> Result<CountModel> {
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d.as_ref())).collect();
    Ok(CountModel {
        vocabulary: Vocabulary::fit(&tokens, max_features)?,
        n_docs: docs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorizerKind {
    Count,
    Tfidf,
}

impl std::str::FromStr for VectorizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(VectorizerKind::Count),
            "tfidf" => Ok(VectorizerKind::Tfidf),
            _ => Err(Error::invalid(format!("unknown vectorizer {s:?} (expected count or tfidf)"))),
        }
    }
}

/// Either fitted vectorizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Vectorizer {
    Count(CountModel),
    Tfidf(TfIdfModel),
}

impl Vectorizer {
    pub fn fit<S: AsRef<str>>(kind: VectorizerKind, docs: &[S], max_features: usize) -> Result<Self> {
        Ok(match kind {
            VectorizerKind::Count => Vectorizer::Count(fit_count(docs, max_features)?),
            VectorizerKind::Tfidf => Vectorizer::Tfidf(fit_tfidf(docs, max_features)?),
        })
    }

    pub fn kind(&self) -> VectorizerKind {
        match self {
            Vectorizer::Count(_) => VectorizerKind::Count,
            Vectorizer::Tfidf(_) => VectorizerKind::Tfidf,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        match self {
            Vectorizer::Count(m) => &m.vocabulary,
            Vectorizer::Tfidf(m) => &m.vocabulary,
        }
    }

    pub fn dim(&self) -> usize {
        self.vocabulary().len()
    }

    pub fn transform(&self, text: &str) -> DocVector {
        match self {
            Vectorizer::Count(m) => m.transform(text),
            Vectorizer::Tfidf(m) => m.transform(text),
        }
    }

    pub fn transform_all<S: AsRef<str>>(&self, docs: &[S]) -> Vec<DocVector> {
        docs.iter().map(|d| self.transform(d.as_ref())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermScore {
    pub term: String,
    pub score: f64,
}

/// Per-class distinctive terms.
///
/// Each class's documents are pooled into one pseudo-document whose raw term
/// counts are weighted by the idf of the full corpus (documents counted
/// individually) and l2-normalized. The `k` best terms are returned, ties
/// broken lexicographically. Classes without documents are left out.
pub fn class_characterization(
    m: &Manifest,
    k: usize,
    max_features: usize,
) -> Result<BTreeMap<ClassLabel, Vec<TermScore>>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let tokens: Vec<Vec<String>> = m.documents.iter().map(|d| tokenize(d.text())).collect();
    let model = fit_tfidf(&m.documents.iter().map(|d| d.text()).collect::<Vec<_>>(), max_features)?;
    let mut pooled: BTreeMap<ClassLabel, Vec<String>> = BTreeMap::new();
    for (d, t) in m.documents.iter().zip(tokens) {
        pooled.entry(d.label).or_default().extend(t);
    }
    for c in ClassLabel::ALL {
        if !pooled.contains_key(&c) {
            log::warn!("class {c} has no documents; omitted from the characterization");
        }
    }
    Ok(pooled
        .into_iter()
        .map(|(label, toks)| {
            let v = model.transform_tokens(&toks);
            let mut scored: Vec<TermScore> = v
                .entries
                .iter()
                .map(|&(i, s)| TermScore {
                    term: model.vocabulary.term(i).to_owned(),
                    score: s,
                })
                .collect();
            scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
            scored.truncate(k);
            (label, scored)
        })
        .collect())
}

/// Top-k terms per class for spotting leftover parsing residue.
pub fn residue_audit(m: &Manifest, k: usize) -> Result<BTreeMap<ClassLabel, Vec<TermScore>>> {
    if let Some(d) = m.documents.iter().find(|d| !d.is_cleaned()) {
        return Err(Error::invalid(format!("document {} has not been cleaned", d.id)));
    }
    class_characterization(m, k, DEFAULT_MAX_FEATURES)
}
