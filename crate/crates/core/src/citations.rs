//! Citation enrichment for scientific candidates: PMID → DOI through the
//! Entrez esummary endpoint, DOI → citing works through the OpenCitations
//! index, and top-decile selection by citation count.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::http::{excerpt, RateLimiter, RetryPolicy, ServiceClient, Transport};

pub const EUTILS_BASE: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";
pub const OPENCITATIONS_BASE: &str = "https://api.opencitations.net/index/v2";

/// Entrez allows 3 requests per second without an API key.
pub const DEFAULT_REQUESTS_PER_SECOND: f64 = 3.0;

pub fn esummary_url(pmid: &str) -> String {
    format!("{EUTILS_BASE}/esummary.fcgi?db=pubmed&id={pmid}&retmode=json")
}

/// efetch URL for a PMC full-text record; accepts `PMC123` or `123`.
pub fn pmc_efetch_url(pmcid: &str) -> String {
    let id = pmcid.trim().trim_start_matches("PMC");
    format!("{EUTILS_BASE}/efetch.fcgi?db=pmc&id={id}&retmode=xml")
}

pub fn citations_url(doi: &str) -> String {
    format!("{OPENCITATIONS_BASE}/citations/doi:{doi}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitationRecord {
    pub pmid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub doi: Option<String>,
    /// Present only when the DOI resolved.
    pub citation_count: Option<u64>,
    pub fetched_at: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub struct EntrezClient<'a> {
    http: ServiceClient<'a>,
    api_key: Option<String>,
}

impl<'a> EntrezClient<'a> {
    pub fn new(transport: &'a dyn Transport, limiter: RateLimiter, retry: RetryPolicy) -> Self {
        EntrezClient {
            http: ServiceClient::new("entrez", transport, limiter, retry),
            api_key: None,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key.filter(|k| !k.is_empty());
        self
    }

    /// DOI of a PubMed record, `None` when the record lists none.
    pub fn pmid_to_doi(&self, pmid: &str) -> Result<Option<String>> {
        let mut url = esummary_url(pmid);
        if let Some(key) = &self.api_key {
            url.push_str("&api_key=");
            url.push_str(key);
        }
        let resp = self.http.get(&url)?;
        if !resp.is_success() {
            return Err(Error::External {
                service: "entrez".into(),
                message: format!("esummary for {pmid}: HTTP {}: {}", resp.status, excerpt(&resp.body)),
            });
        }
        parse_esummary_doi(pmid, &resp.body)
    }
}

fn parse_esummary_doi(pmid: &str, body: &str) -> Result<Option<String>> {
    let malformed = |why: &str| Error::External {
        service: "entrez".into(),
        message: format!("malformed esummary for {pmid} ({why}): {}", excerpt(body)),
    };
    let v: Value = serde_json::from_str(body).map_err(|_| malformed("not JSON"))?;
    let result = v.get("result").ok_or_else(|| malformed("no `result`"))?;
    let Some(record) = result.get(pmid) else {
        return Err(malformed("record missing"));
    };
    if let Some(err) = record.get("error") {
        log::warn!("entrez: pmid {pmid}: {err}");
        return Ok(None);
    }
    let ids = record
        .get("articleids")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("no `articleids`"))?;
    Ok(ids
        .iter()
        .find(|id| id.get("idtype").and_then(Value::as_str) == Some("doi"))
        .and_then(|id| id.get("value").and_then(Value::as_str))
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CitationCount {
    pub count: u64,
    /// False when the index does not know the DOI at all.
    pub indexed: bool,
}

pub struct OpenCitationsClient<'a> {
    http: ServiceClient<'a>,
}

impl<'a> OpenCitationsClient<'a> {
    pub fn new(transport: &'a dyn Transport, limiter: RateLimiter, retry: RetryPolicy) -> Self {
        OpenCitationsClient {
            http: ServiceClient::new("opencitations", transport, limiter, retry),
        }
    }

    /// Number of distinct citing works. An unknown DOI yields zero, not an
    /// error.
    pub fn fetch_citation_count(&self, doi: &str) -> Result<CitationCount> {
        let resp = self.http.get(&citations_url(doi))?;
        if resp.status == 404 {
            return Ok(CitationCount {
                count: 0,
                indexed: false,
            });
        }
        if !resp.is_success() {
            return Err(Error::External {
                service: "opencitations".into(),
                message: format!("{doi}: HTTP {}: {}", resp.status, excerpt(&resp.body)),
            });
        }
        let v: Value = serde_json::from_str(&resp.body).map_err(|_| Error::External {
            service: "opencitations".into(),
            message: format!("malformed response for {doi}: {}", excerpt(&resp.body)),
        })?;
        let Value::Array(items) = v else {
            return Err(Error::External {
                service: "opencitations".into(),
                message: format!("expected a JSON array for {doi}: {}", excerpt(&resp.body)),
            });
        };
        let mut citing = HashSet::new();
        let mut anonymous = 0u64;
        for item in &items {
            match item.get("citing").and_then(Value::as_str) {
                Some(c) => {
                    citing.insert(c);
                }
                None => anonymous += 1,
            }
        }
        Ok(CitationCount {
            count: citing.len() as u64 + anonymous,
            indexed: true,
        })
    }
}

/// Resolve DOIs and citation counts for `(topic, pmid)` pairs. The result is
/// ordered by PMID (numerically where possible).
pub fn enrich(
    pmids: &[(Option<String>, String)],
    entrez: &EntrezClient<'_>,
    citations: &OpenCitationsClient<'_>,
    fetched_at: NaiveDate,
) -> Result<Vec<CitationRecord>> {
    let mut records = Vec::with_capacity(pmids.len());
    for (topic, pmid) in pmids {
        let doi = entrez.pmid_to_doi(pmid)?;
        let (citation_count, note) = match &doi {
            Some(d) => {
                let c = citations.fetch_citation_count(d)?;
                (Some(c.count), (!c.indexed).then(|| "not indexed".to_owned()))
            }
            None => (None, Some("no DOI".to_owned())),
        };
        records.push(CitationRecord {
            pmid: pmid.clone(),
            topic: topic.clone(),
            doi,
            citation_count,
            fetched_at,
            note,
        });
    }
    records.sort_by(|a, b| pmid_key(&a.pmid).cmp(&pmid_key(&b.pmid)));
    Ok(records)
}

fn pmid_key(p: &str) -> (usize, &str) {
    let t = p.trim_start_matches('0');
    (t.len(), t)
}

/// Records in the top 10% by citation count.
///
/// The cut keeps `ceil(n / 10)` records and then every record tied with the
/// last one kept, so the result may be larger. Input order is preserved.
pub fn select_top_decile(records: &[CitationRecord]) -> Result<Vec<CitationRecord>> {
    if records.is_empty() {
        return Err(Error::invalid("top-decile selection needs at least one record"));
    }
    let mut counts = Vec::with_capacity(records.len());
    for r in records {
        let c = r
            .citation_count
            .ok_or_else(|| Error::invalid(format!("record {} has no citation count", r.pmid)))?;
        counts.push(c);
    }
    let keep = records.len().div_ceil(10);
    let mut sorted = counts.clone();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let threshold = sorted[keep - 1];
    Ok(records
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c >= threshold)
        .map(|(r, _)| r.clone())
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DecileScope {
    #[default]
    PerTopic,
    Global,
}

/// Top-decile selection per topic (records without a topic form one group)
/// or over all records. Records lacking a count are dropped first.
pub fn select_top_decile_scoped(records: &[CitationRecord], scope: DecileScope) -> Result<Vec<CitationRecord>> {
    let counted: Vec<CitationRecord> = records.iter().filter(|r| r.citation_count.is_some()).cloned().collect();
    if counted.len() < records.len() {
        log::warn!(
            "{} records without citation counts excluded from decile selection",
            records.len() - counted.len()
        );
    }
    let selected: Vec<CitationRecord> = match scope {
        DecileScope::Global => select_top_decile(&counted)?,
        DecileScope::PerTopic => {
            let mut groups: BTreeMap<Option<&str>, Vec<CitationRecord>> = BTreeMap::new();
            for r in &counted {
                groups.entry(r.topic.as_deref()).or_default().push(r.clone());
            }
            if groups.is_empty() {
                return Err(Error::invalid("top-decile selection needs at least one counted record"));
            }
            let mut out = Vec::new();
            for group in groups.values() {
                out.extend(select_top_decile(group)?);
            }
            out
        }
    };
    let keep: BTreeSet<&str> = selected.iter().map(|r| r.pmid.as_str()).collect();
    Ok(counted.into_iter().filter(|r| keep.contains(r.pmid.as_str())).collect())
}
