//! Rule-driven text cleaning.
//!
//! A [`RuleSet`] is an ordered list of removal rules loaded from TOML. The
//! whole list is applied repeatedly until the text stops changing, so
//! cleaning is idempotent by construction: removing one marker can never
//! expose another that a second run would catch.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Manifest};
use crate::error::{Error, Result};

const DEFAULT_RULES: &str = include_str!("../rules/default.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    LiteralRemove,
    PatternRemove,
    WhitespaceNormalize,
}

/// Which documents a rule applies to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum RuleScope {
    All,
    Source(String),
}

impl From<String> for RuleScope {
    fn from(s: String) -> Self {
        if s == "all" {
            RuleScope::All
        } else {
            RuleScope::Source(s)
        }
    }
}

impl From<RuleScope> for String {
    fn from(s: RuleScope) -> Self {
        match s {
            RuleScope::All => "all".into(),
            RuleScope::Source(name) => name,
        }
    }
}

impl Default for RuleScope {
    fn default() -> Self {
        RuleScope::All
    }
}

/// Part of the text a rule may touch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    #[default]
    All,
    /// Text after the last line reading "References" or "Bibliography".
    /// Empty when no such heading exists.
    References,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleaningRule {
    pub name: String,
    pub kind: RuleKind,
    #[serde(default)]
    pub payload: String,
    #[serde(default)]
    pub scope: RuleScope,
    #[serde(default)]
    pub region: Region,
    /// Curated from incomplete examples; flagged in audits.
    #[serde(default)]
    pub provisional: bool,
}

impl CleaningRule {
    pub fn literal(name: &str, text: &str) -> Self {
        Self::new(name, RuleKind::LiteralRemove, text)
    }

    pub fn pattern(name: &str, re: &str) -> Self {
        Self::new(name, RuleKind::PatternRemove, re)
    }

    pub fn whitespace() -> Self {
        Self::new("whitespace", RuleKind::WhitespaceNormalize, "")
    }

    fn new(name: &str, kind: RuleKind, payload: &str) -> Self {
        CleaningRule {
            name: name.into(),
            kind,
            payload: payload.into(),
            scope: RuleScope::All,
            region: Region::All,
            provisional: false,
        }
    }

    pub fn for_source(mut self, source: &str) -> Self {
        self.scope = RuleScope::Source(source.into());
        self
    }

    pub fn in_references(mut self) -> Self {
        self.region = Region::References;
        self
    }

    fn applies_to(&self, source: &str) -> bool {
        match &self.scope {
            RuleScope::All => true,
            RuleScope::Source(s) => s == source,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    version: String,
    #[serde(default, rename = "rule")]
    rules: Vec<CleaningRule>,
}

#[derive(Clone, Debug)]
enum Compiled {
    Literal(String),
    Pattern(Regex),
    Whitespace,
}

/// A validated, compiled, versioned rule list.
#[derive(Clone, Debug)]
pub struct RuleSet {
    pub version: String,
    rules: Vec<(CleaningRule, Compiled)>,
}

impl RuleSet {
    pub fn new(version: impl Into<String>, rules: Vec<CleaningRule>) -> Result<Self> {
        let mut names = std::collections::HashSet::new();
        let mut compiled = Vec::with_capacity(rules.len());
        for r in rules {
            if r.name.is_empty() || !names.insert(r.name.clone()) {
                return Err(Error::config(format!("cleaning rule name {:?} is empty or repeated", r.name)));
            }
            let c = match r.kind {
                RuleKind::LiteralRemove if r.payload.is_empty() => {
                    return Err(Error::config(format!("rule {}: empty literal", r.name)))
                }
                RuleKind::LiteralRemove => Compiled::Literal(r.payload.clone()),
                RuleKind::PatternRemove => Compiled::Pattern(
                    Regex::new(&r.payload).map_err(|e| Error::config(format!("rule {}: {e}", r.name)))?,
                ),
                RuleKind::WhitespaceNormalize => Compiled::Whitespace,
            };
            compiled.push((r, c));
        }
        Ok(RuleSet {
            version: version.into(),
            rules: compiled,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: RuleFile = toml::from_str(text).map_err(|e| Error::config(format!("cleaning rules: {e}")))?;
        Self::new(f.version, f.rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn rules(&self) -> impl Iterator<Item = &CleaningRule> {
        self.rules.iter().map(|(r, _)| r)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn apply_once(&self, text: &str, source: &str) -> String {
        let mut out = text.to_owned();
        for (rule, c) in &self.rules {
            if !rule.applies_to(source) {
                continue;
            }
            out = match rule.region {
                Region::All => apply_rule(c, &out),
                Region::References => match references_start(&out) {
                    Some(at) => {
                        let (head, tail) = out.split_at(at);
                        let mut s = head.to_owned();
                        s.push_str(&apply_rule(c, tail));
                        s
                    }
                    None => out,
                },
            };
        }
        out
    }
}

/// The built-in rule set.
pub fn default_ruleset() -> RuleSet {
    RuleSet::from_toml(DEFAULT_RULES).expect("built-in cleaning rules are valid")
}

fn apply_rule(c: &Compiled, text: &str) -> String {
    match c {
        Compiled::Literal(lit) => text.replace(lit.as_str(), ""),
        Compiled::Pattern(re) => re.replace_all(text, "").into_owned(),
        Compiled::Whitespace => normalize_whitespace(text),
    }
}

/// Byte offset just past the last "References"/"Bibliography" heading line.
fn references_start(text: &str) -> Option<usize> {
    let mut offset = 0;
    let mut found = None;
    for line in text.split_inclusive('\n') {
        offset += line.len();
        let heading = line.trim();
        if heading.eq_ignore_ascii_case("references") || heading.eq_ignore_ascii_case("bibliography") {
            found = Some(offset);
        }
    }
    found
}

/// Collapse whitespace runs within a line to single spaces, trim each line,
/// and drop empty lines.
pub fn normalize_whitespace(text: &str) -> String {
    text.split('\n')
        .map(|line| line.split(char::is_whitespace).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Apply `rules` until the text stops changing.
///
/// Every pass that changes the text either shortens it or only rewrites
/// whitespace characters into plain spaces, so the loop terminates well
/// within the pass bound below.
pub fn clean_text(text: &str, source: &str, rules: &RuleSet) -> String {
    let bound = 2 * text.chars().count() + 4;
    let mut cur = text.to_owned();
    for _ in 0..bound {
        let next = rules.apply_once(&cur, source);
        if next == cur {
            return cur;
        }
        cur = next;
    }
    log::warn!("cleaning of a {source} document did not settle after {bound} passes");
    cur
}

/// Copy of `doc` with `clean_text` (and `char_len`) set from the raw text.
pub fn clean_document(doc: &Document, rules: &RuleSet) -> Document {
    let mut d = doc.clone();
    let clean = clean_text(&doc.raw_text, &doc.source, rules);
    if clean.trim().is_empty() {
        log::warn!("document {} is empty after cleaning", doc.id);
    }
    d.set_clean_text(clean);
    d
}

pub fn clean_manifest(m: &Manifest, rules: &RuleSet) -> Result<Manifest> {
    let docs = m.documents.iter().map(|d| clean_document(d, rules)).collect();
    Manifest::new(m.version.clone(), m.seed, docs)
}
