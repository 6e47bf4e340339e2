use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::{document_id, extract_html, extract_xml, Document, FetcherKind, InputFormat, Manifest, SourceKind, SourceRegistry, SourceSpec};
use crate::citations::pmc_efetch_url;
use crate::error::{Error, Result};
use crate::http::{RateLimiter, RetryPolicy, ServiceClient, Transport};

pub struct IngestOptions<'a> {
    /// Stamped on every document; never read from the clock.
    pub retrieved_at: NaiveDate,
    /// Topic for files directly under the input directory and for fetcher
    /// items without a topic column.
    pub default_topic: Option<String>,
    /// Required for fetcher sources.
    pub transport: Option<&'a dyn Transport>,
    pub requests_per_second: f64,
    pub retry: RetryPolicy,
}

impl<'a> IngestOptions<'a> {
    pub fn new(retrieved_at: NaiveDate) -> Self {
        IngestOptions {
            retrieved_at,
            default_topic: None,
            transport: None,
            requests_per_second: 0.0,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IngestFailure {
    /// Relative file path or fetcher item.
    pub item: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestReport {
    pub documents: Vec<Document>,
    pub failures: Vec<IngestFailure>,
    /// Items that yielded no text.
    pub skipped_empty: Vec<String>,
}

/// Read one source into documents.
///
/// Local directories are read recursively in path order; a file nested
/// under `<input>/<topic>/` takes that topic. Fetcher sources read an item
/// list (`topic<TAB>item` or bare `item` per line) from `input_path`.
/// Unreadable items become [`IngestFailure`]s and ingestion continues.
pub fn ingest_source(spec: &SourceSpec, input_path: &Path, opts: &IngestOptions<'_>) -> Result<IngestReport> {
    if !input_path.exists() {
        return Err(Error::invalid(format!("{}: no such file or directory", input_path.display())));
    }
    match spec.kind {
        SourceKind::LocalDir => ingest_dir(spec, input_path, opts),
        SourceKind::Fetcher => ingest_fetched(spec, input_path, opts),
    }
}

fn ingest_dir(spec: &SourceSpec, root: &Path, opts: &IngestOptions<'_>) -> Result<IngestReport> {
    let mut files = Vec::new();
    collect_files(root, &mut files).map_err(|e| Error::io(root, e))?;
    let mut rel: Vec<(String, PathBuf)> = files
        .into_iter()
        .map(|p| {
            let r = p
                .strip_prefix(root)
                .unwrap_or(&p)
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            (r, p)
        })
        .collect();
    rel.sort();

    let mut report = IngestReport::default();
    for (name, path) in rel {
        let topic = match name.split_once('/') {
            Some((dir, _)) => Some(dir.to_owned()),
            None => opts.default_topic.clone(),
        };
        let Some(topic) = topic.filter(|t| !t.trim().is_empty()) else {
            report.failures.push(IngestFailure {
                item: name,
                message: "no topic: place the file under a topic directory or pass a default topic".into(),
            });
            continue;
        };
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                report.failures.push(IngestFailure {
                    item: name,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let text = match String::from_utf8(bytes) {
            Ok(t) => t,
            Err(_) => {
                report.failures.push(IngestFailure {
                    item: name,
                    message: "not valid UTF-8".into(),
                });
                continue;
            }
        };
        let doc_id = document_id(&spec.name, &name);
        push_extracted(spec, &mut report, name, doc_id, &topic, &text, None, opts);
    }
    Ok(report)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn ingest_fetched(spec: &SourceSpec, items_path: &Path, opts: &IngestOptions<'_>) -> Result<IngestReport> {
    let transport = opts
        .transport
        .ok_or_else(|| Error::config(format!("fetcher source {} needs a transport", spec.name)))?;
    let kind = spec.fetcher_kind()?;
    let listing = std::fs::read_to_string(items_path).map_err(|e| Error::io(items_path, e))?;
    let client = ServiceClient::new(
        spec.name.clone(),
        transport,
        RateLimiter::per_second(opts.requests_per_second),
        opts.retry,
    );

    let mut report = IngestReport::default();
    let mut seen = std::collections::HashSet::new();
    for line in listing.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (topic, item) = match line.split_once('\t') {
            Some((t, i)) => (Some(t.trim().to_owned()), i.trim()),
            None => (opts.default_topic.clone(), line),
        };
        let Some(topic) = topic.filter(|t| !t.is_empty()) else {
            report.failures.push(IngestFailure {
                item: item.into(),
                message: "no topic column and no default topic".into(),
            });
            continue;
        };
        let url = match kind {
            FetcherKind::HttpPage => item.to_owned(),
            FetcherKind::Pmc => pmc_efetch_url(item),
        };
        if !seen.insert(url.clone()) {
            report.failures.push(IngestFailure {
                item: item.into(),
                message: "duplicate item".into(),
            });
            continue;
        }
        let body = match client.get(&url) {
            Ok(r) if r.is_success() => r.body,
            Ok(r) => {
                report.failures.push(IngestFailure {
                    item: item.into(),
                    message: format!("HTTP {}", r.status),
                });
                continue;
            }
            Err(e) => {
                report.failures.push(IngestFailure {
                    item: item.into(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let doc_id = document_id(&spec.name, &url);
        push_extracted(spec, &mut report, item.to_owned(), doc_id, &topic, &body, Some(url), opts);
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn push_extracted(
    spec: &SourceSpec,
    report: &mut IngestReport,
    item: String,
    doc_id: String,
    topic: &str,
    content: &str,
    url: Option<String>,
    opts: &IngestOptions<'_>,
) {
    if content.trim().is_empty() {
        log::warn!("{}: skipping empty item {item}", spec.name);
        report.skipped_empty.push(item);
        return;
    }
    let extracted = match spec.format {
        InputFormat::Text => Ok(content.to_owned()),
        InputFormat::Html => extract_html(content, spec.selector.as_deref()),
        InputFormat::Xml => extract_xml(content, spec.selector.as_deref()),
    };
    match extracted {
        Ok(text) if text.trim().is_empty() => {
            log::warn!("{}: nothing extracted from {item}", spec.name);
            report.skipped_empty.push(item);
        }
        Ok(text) => {
            let mut doc = Document::new(doc_id, spec.label, topic, spec.name.clone(), text, opts.retrieved_at);
            doc.url = url;
            report.documents.push(doc);
        }
        Err(e) => report.failures.push(IngestFailure {
            item,
            message: e.to_string(),
        }),
    }
}

/// Ingest every registered source and merge in (source, item) order.
///
/// Local sources read `<root>/<name>/`; fetcher sources read the item list
/// `<root>/<name>/items.tsv`. Missing source directories are skipped with a
/// warning.
pub fn ingest_registry(
    registry: &SourceRegistry,
    root: &Path,
    version: &str,
    seed: u64,
    opts: &IngestOptions<'_>,
) -> Result<(Manifest, Vec<(String, IngestFailure)>)> {
    let mut specs: Vec<&SourceSpec> = registry.sources.iter().collect();
    specs.sort_by(|a, b| a.name.cmp(&b.name));
    let mut documents = Vec::new();
    let mut failures = Vec::new();
    for spec in specs {
        let input = match spec.kind {
            SourceKind::LocalDir => root.join(&spec.name),
            SourceKind::Fetcher => root.join(&spec.name).join("items.tsv"),
        };
        if !input.exists() {
            log::warn!("source {}: {} not found, skipping", spec.name, input.display());
            continue;
        }
        let report = ingest_source(spec, &input, opts)?;
        documents.extend(report.documents);
        failures.extend(report.failures.into_iter().map(|f| (spec.name.clone(), f)));
    }
    Ok((Manifest::new(version, seed, documents)?, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ClassLabel;
    use crate::http::FixtureTransport;

    fn opts() -> IngestOptions<'static> {
        IngestOptions::new(NaiveDate::from_ymd_opt(2025, 6, 4).unwrap())
    }

    #[test]
    fn three_text_files_become_scientific_documents() {
        let dir = tempfile::tempdir().unwrap();
        let topic = dir.path().join("stroke");
        std::fs::create_dir(&topic).unwrap();
        for (i, body) in ["alpha", "beta", "gamma"].iter().enumerate() {
            std::fs::write(topic.join(format!("{i}.txt")), body).unwrap();
        }
        let spec = SourceSpec::local("pmc", ClassLabel::Scientific, InputFormat::Text);
        let r = ingest_source(&spec, dir.path(), &opts()).unwrap();
        assert_eq!(r.documents.len(), 3);
        assert!(r.documents.iter().all(|d| d.label == ClassLabel::Scientific));
        assert!(r.documents.iter().all(|d| d.topic == "stroke" && d.clean_text.is_none()));
        let texts: Vec<&str> = r.documents.iter().map(|d| d.raw_text.as_str()).collect();
        assert_eq!(texts, ["alpha", "beta", "gamma"]);
    }

    #[test]
    fn empty_directory_is_vacuous_success() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SourceSpec::local("pmc", ClassLabel::Scientific, InputFormat::Text);
        let r = ingest_source(&spec, dir.path(), &opts()).unwrap();
        assert!(r.documents.is_empty() && r.failures.is_empty());
    }

    #[test]
    fn empty_and_unreadable_files_do_not_stop_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("insomnia");
        std::fs::create_dir(&t).unwrap();
        std::fs::write(t.join("a.txt"), "").unwrap();
        std::fs::write(t.join("b.txt"), [0xff, 0xfe, 0x00]).unwrap();
        std::fs::write(t.join("c.txt"), "fine").unwrap();
        let spec = SourceSpec::local("webmd", ClassLabel::Vernacular, InputFormat::Text);
        let r = ingest_source(&spec, dir.path(), &opts()).unwrap();
        assert_eq!(r.documents.len(), 1);
        assert_eq!(r.skipped_empty, vec!["insomnia/a.txt".to_string()]);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].item, "insomnia/b.txt");
    }

    #[test]
    fn top_level_files_need_a_topic() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "x").unwrap();
        let spec = SourceSpec::local("pmc", ClassLabel::Scientific, InputFormat::Text);
        assert_eq!(ingest_source(&spec, dir.path(), &opts()).unwrap().failures.len(), 1);
        let mut o = opts();
        o.default_topic = Some("Dementia".into());
        let r = ingest_source(&spec, dir.path(), &o).unwrap();
        assert_eq!(r.documents[0].topic, "dementia");
    }

    #[test]
    fn fetcher_reads_fixtures_only() {
        let dir = tempfile::tempdir().unwrap();
        let items = dir.path().join("items.tsv");
        std::fs::write(&items, "measles\thttps://news.test/a\nmeasles\thttps://news.test/missing\n").unwrap();
        let transport = FixtureTransport::new().with(
            "https://news.test/a",
            200,
            "<html><body><div id=main><p>Your truth.</p></div><p>ad</p></body></html>",
        );
        let mut spec = SourceSpec::local("healthnews", ClassLabel::Disinformative, InputFormat::Html).with_selector("#main");
        spec.kind = SourceKind::Fetcher;
        spec.config.insert("fixtures".into(), "unused".into());
        let mut o = opts();
        o.transport = Some(&transport);
        o.retry = RetryPolicy::immediate(1);
        let r = ingest_source(&spec, &items, &o).unwrap();
        assert_eq!(r.documents.len(), 1);
        assert_eq!(r.documents[0].raw_text, "Your truth.");
        assert_eq!(r.documents[0].url.as_deref(), Some("https://news.test/a"));
        assert_eq!(r.failures.len(), 1);
    }

    #[test]
    fn missing_input_is_error() {
        let spec = SourceSpec::local("pmc", ClassLabel::Scientific, InputFormat::Text);
        assert!(ingest_source(&spec, Path::new("/definitely/not/here"), &opts()).is_err());
    }
}
