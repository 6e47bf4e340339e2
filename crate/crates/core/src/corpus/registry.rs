//! Declarative source registry (TOML).
//!
//! ```toml
//! [[source]]
//! name = "webmd"
//! label = "vernacular"
//! kind = "fetcher"          # or "local-dir"
//! format = "html"           # "text" | "html" | "xml"
//! selector = "div.article"  # CSS selector (html) or element name (xml)
//! [source.config]
//! fetcher = "http-page"     # or "pmc"
//! fixtures = "fixtures/webmd"
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{as_name, ClassLabel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    LocalDir,
    Fetcher,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    Text,
    Html,
    Xml,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FetcherKind {
    /// GET the item URL and extract with the source selector.
    HttpPage,
    /// PMC full text via Entrez efetch; items are PMC ids.
    Pmc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    #[serde(with = "as_name")]
    pub label: ClassLabel,
    pub kind: SourceKind,
    #[serde(default)]
    pub format: InputFormat,
    #[serde(default)]
    pub selector: Option<String>,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl SourceSpec {
    pub fn local(name: impl Into<String>, label: ClassLabel, format: InputFormat) -> Self {
        SourceSpec {
            name: name.into(),
            label,
            kind: SourceKind::LocalDir,
            format,
            selector: None,
            config: BTreeMap::new(),
        }
    }

    pub fn with_selector(mut self, selector: impl Into<String>) -> Self {
        self.selector = Some(selector.into());
        self
    }

    pub fn fetcher_kind(&self) -> Result<FetcherKind> {
        match self.config.get("fetcher").map(String::as_str) {
            Some("http-page") | None => Ok(FetcherKind::HttpPage),
            Some("pmc") => Ok(FetcherKind::Pmc),
            Some(other) => Err(Error::config(format!("source {}: unknown fetcher {other:?}", self.name))),
        }
    }

    /// Fixture directory of a fetcher source.
    pub fn fixtures(&self) -> Option<&str> {
        self.config.get("fixtures").map(String::as_str)
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("source with empty name"));
        }
        if let (InputFormat::Html, Some(sel)) = (self.format, &self.selector) {
            scraper::Selector::parse(sel)
                .map_err(|e| Error::config(format!("source {}: bad selector {sel:?}: {e}", self.name)))?;
        }
        if self.kind == SourceKind::Fetcher {
            self.fetcher_kind()?;
            if self.fixtures().is_none() {
                return Err(Error::config(format!(
                    "fetcher source {} has no `fixtures` entry in its config",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRegistry {
    #[serde(default)]
    pub version: Option<String>,
    #[serde(default, rename = "source")]
    pub sources: Vec<SourceSpec>,
}

impl SourceRegistry {
    pub fn new(sources: Vec<SourceSpec>) -> Result<Self> {
        let r = SourceRegistry { version: None, sources };
        r.validate()?;
        Ok(r)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let r: SourceRegistry = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn get(&self, name: &str) -> Option<&SourceSpec> {
        self.sources.iter().find(|s| s.name == name)
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for s in &self.sources {
            s.validate()?;
            if !names.insert(s.name.as_str()) {
                return Err(Error::config(format!("duplicate source name {:?}", s.name)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
version = "1"

[[source]]
name = "pmc"
label = "scientific"
kind = "local-dir"
format = "xml"
selector = "body"

[[source]]
name = "webmd"
label = "vernacular"
kind = "fetcher"
format = "html"
selector = "div.article-body p"
[source.config]
fetcher = "http-page"
fixtures = "fixtures/webmd"
"#;

    #[test]
    fn parses_sample() {
        let r = SourceRegistry::from_toml(SAMPLE).unwrap();
        assert_eq!(r.sources.len(), 2);
        let w = r.get("webmd").unwrap();
        assert_eq!(w.label, ClassLabel::Vernacular);
        assert_eq!(w.kind, SourceKind::Fetcher);
        assert_eq!(w.fetcher_kind().unwrap(), FetcherKind::HttpPage);
        assert_eq!(r.get("pmc").unwrap().format, InputFormat::Xml);
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = format!("{SAMPLE}\n[[source]]\nname = \"pmc\"\nlabel = \"scientific\"\nkind = \"local-dir\"\n");
        assert!(SourceRegistry::from_toml(&text).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn fetcher_without_fixtures_rejected() {
        let text = "[[source]]\nname = \"x\"\nlabel = \"vernacular\"\nkind = \"fetcher\"\n";
        assert!(SourceRegistry::from_toml(text).unwrap_err().to_string().contains("fixtures"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[[source]]\nname = \"x\"\nlabel = \"vernacular\"\nkind = \"local-dir\"\ncolour = 1\n";
        assert!(SourceRegistry::from_toml(text).is_err());
    }

    #[test]
    fn bad_selector_rejected() {
        let text = "[[source]]\nname = \"x\"\nlabel = \"vernacular\"\nkind = \"local-dir\"\nformat = \"html\"\nselector = \"div[[\"\n";
        assert!(SourceRegistry::from_toml(text).unwrap_err().to_string().contains("selector"));
    }
}
