//! Minimal blocking HTTP layer with a recorded-fixture mode.
//!
//! Fixture directories hold an `index.json` listing canned responses:
//!
//! ```json
//! [{"url": "https://…", "status": 200, "body_file": "esummary_12345.json"},
//!  {"url": "https://…", "status": 404, "body": ""}]
//! ```
//!
//! In fixture mode nothing touches the network; an unlisted URL is an error.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    fn is_retryable(&self) -> bool {
        self.status >= 500 || self.status == 429
    }
}

pub trait Transport: Send + Sync {
    /// One GET. Non-2xx statuses are returned, not raised.
    fn get(&self, url: &str) -> Result<HttpResponse>;
}

pub struct LiveTransport {
    agent: ureq::Agent,
}

impl LiveTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent(concat!("lsgenre/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        LiveTransport { agent }
    }
}

impl Default for LiveTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl Transport for LiveTransport {
    fn get(&self, url: &str) -> Result<HttpResponse> {
        let external = |e: ureq::Error| Error::External {
            service: host_of(url),
            message: e.to_string(),
        };
        let mut resp = self.agent.get(url).call().map_err(external)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(external)?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureEntry {
    url: String,
    #[serde(default = "ok_status")]
    status: u16,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    body_file: Option<String>,
}

fn ok_status() -> u16 {
    200
}

/// Canned responses keyed by exact URL.
#[derive(Clone, Debug, Default)]
pub struct FixtureTransport {
    responses: BTreeMap<String, HttpResponse>,
}

impl FixtureTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, url: impl Into<String>, status: u16, body: impl Into<String>) -> Self {
        self.insert(url, status, body);
        self
    }

    pub fn insert(&mut self, url: impl Into<String>, status: u16, body: impl Into<String>) {
        self.responses.insert(
            url.into(),
            HttpResponse {
                status,
                body: body.into(),
            },
        );
    }

    /// Load `<dir>/index.json`; `body_file` paths are relative to `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index = dir.join("index.json");
        let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
        let entries: Vec<FixtureEntry> =
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", index.display())))?;
        let mut t = FixtureTransport::new();
        for e in entries {
            let body = match (e.body, e.body_file) {
                (Some(b), None) => b,
                (None, Some(f)) => {
                    let p = dir.join(&f);
                    std::fs::read_to_string(&p).map_err(|err| Error::io(&p, err))?
                }
                (None, None) => String::new(),
                (Some(_), Some(_)) => {
                    return Err(Error::config(format!("fixture {}: both body and body_file given", e.url)))
                }
            };
            t.insert(e.url, e.status, body);
        }
        Ok(t)
    }

    /// Merge the fixtures of another directory into this set.
    pub fn extend(&mut self, other: FixtureTransport) {
        self.responses.extend(other.responses);
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str) -> Result<HttpResponse> {
        self.responses.get(url).cloned().ok_or_else(|| Error::External {
            service: host_of(url),
            message: format!("no recorded fixture for {url}"),
        })
    }
}

/// Enforces a minimum spacing between consecutive requests.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_second(requests: f64) -> Self {
        let min_interval = if requests > 0.0 && requests.is_finite() {
            Duration::from_secs_f64(1.0 / requests)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            min_interval,
            last: Mutex::new(None),
        }
    }

    pub fn unlimited() -> Self {
        Self::per_second(0.0)
    }

    pub fn min_interval(&self) -> Duration {
        self.min_interval
    }

    pub fn wait(&self) {
        let mut last = self.last.lock().expect("rate limiter poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            initial_backoff: Duration::ZERO,
        }
    }
}

/// Rate-limited, retrying GET on top of a [`Transport`].
pub struct ServiceClient<'a> {
    pub service: String,
    transport: &'a dyn Transport,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl<'a> ServiceClient<'a> {
    pub fn new(service: impl Into<String>, transport: &'a dyn Transport, limiter: RateLimiter, retry: RetryPolicy) -> Self {
        ServiceClient {
            service: service.into(),
            transport,
            limiter,
            retry,
        }
    }

    /// GET with retries on transport failures, 5xx and 429, doubling the
    /// backoff each time. Other statuses are returned to the caller.
    pub fn get(&self, url: &str) -> Result<HttpResponse> {
        let attempts = self.retry.max_attempts.max(1);
        let mut backoff = self.retry.initial_backoff;
        let mut last_problem = String::new();
        for attempt in 1..=attempts {
            self.limiter.wait();
            match self.transport.get(url) {
                Ok(resp) if !resp.is_retryable() => return Ok(resp),
                Ok(resp) => last_problem = format!("HTTP {}", resp.status),
                Err(e) => last_problem = e.to_string(),
            }
            log::warn!("{}: attempt {attempt}/{attempts} for {url} failed: {last_problem}", self.service);
            if attempt < attempts && !backoff.is_zero() {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(Error::External {
            service: self.service.clone(),
            message: format!("{url}: giving up after {attempts} attempts ({last_problem})"),
        })
    }
}

pub(crate) fn excerpt(body: &str) -> String {
    const MAX: usize = 160;
    let mut s: String = body.chars().take(MAX).collect();
    if body.chars().count() > MAX {
        s.push('…');
    }
    s
}

fn host_of(url: &str) -> String {
    url.split("://")
        .nth(1)
        .and_then(|rest| rest.split('/').next())
        .unwrap_or(url)
        .to_owned()
}
