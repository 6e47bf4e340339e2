use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::Serialize;

use lsgenre::balance::{balance_by_topic, compute_all_quotas, compute_quotas};
use lsgenre::citations::{enrich, select_top_decile_scoped, DecileScope, EntrezClient, OpenCitationsClient};
use lsgenre::cleaning::{clean_manifest, default_ruleset, RuleSet};
use lsgenre::cluster::{cluster_class_metrics, kmeans, EmbeddingSet, KMeansOptions};
use lsgenre::corpus::{ingest_registry, load_manifest, write_manifest, IngestOptions, Manifest, SourceKind, SourceRegistry};
use lsgenre::eval::{benchmark, benchmark_markdown, evaluate, split, unseen_topic_eval};
use lsgenre::explain::{extract_forest_rule_terms, linear_features_markdown, rule_terms_markdown, top_linear_features};
use lsgenre::features::{residue_audit, Vectorizer};
use lsgenre::http::{FixtureTransport, LiveTransport, RateLimiter, RetryPolicy, Transport};
use lsgenre::models::{BaseModel, ForestModel, ModelArtifact, ModelKind};
use lsgenre::synth::{generate, SynthOptions};
use lsgenre::{Error, Result};

use crate::config::PipelineConfig;
use crate::{Cli, Command, Global};

/// Environment variable holding the optional NCBI API key.
pub const API_KEY_ENV: &str = "NCBI_API_KEY";

fn resolve(g: &Global) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(v) = g.vectorizer {
        c.vectorizer = v;
    }
    if let Some(m) = g.model {
        c.model = m;
    }
    if let Some(t) = g.threshold {
        c.threshold = t;
    }
    if let Some(dir) = &g.fixtures {
        c.fixtures = true;
        c.paths.fixture_dir = Some(dir.clone());
    }
    c.validate()?;
    Ok(c)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn date_or_today(s: Option<&str>) -> Result<NaiveDate> {
    match s {
        Some(s) => NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Config(format!("date {s:?}: {e}"))),
        None => Ok(chrono::Local::now().date_naive()),
    }
}

fn rules(c: &PipelineConfig, flag: Option<PathBuf>) -> Result<RuleSet> {
    match flag.or_else(|| c.paths.rules.clone()) {
        Some(p) => RuleSet::load(p),
        None => Ok(default_ruleset()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let c = resolve(&cli.global)?;
    match cli.command {
        Command::Ingest {
            registry,
            input,
            out,
            retrieved_at,
            version,
            default_topic,
        } => {
            let path = registry
                .or_else(|| c.paths.registry.clone())
                .ok_or_else(|| Error::Config("ingest needs --registry or paths.registry".into()))?;
            let reg = SourceRegistry::load(&path)?;
            let has_fetchers = reg.sources.iter().any(|s| s.kind == SourceKind::Fetcher);
            let transport: Option<Box<dyn Transport>> = match (has_fetchers, c.fixtures) {
                (false, _) => None,
                (true, true) => {
                    let base = path.parent().unwrap_or(Path::new("."));
                    let mut t = match &c.paths.fixture_dir {
                        Some(d) => FixtureTransport::load(d)?,
                        None => FixtureTransport::new(),
                    };
                    for s in reg.sources.iter().filter(|s| s.kind == SourceKind::Fetcher) {
                        t.extend(FixtureTransport::load(base.join(s.fixtures().unwrap_or_default()))?);
                    }
                    Some(Box::new(t))
                }
                (true, false) => Some(Box::new(LiveTransport::default())),
            };
            let mut opts = IngestOptions::new(date_or_today(retrieved_at.as_deref())?);
            opts.default_topic = default_topic;
            opts.transport = transport.as_deref();
            if !c.fixtures {
                opts.requests_per_second = 1.0;
            }
            let (m, failures) = ingest_registry(&reg, &input, &version, c.seed, &opts)?;
            for (source, f) in &failures {
                log::warn!("{source}: {}: {}", f.item, f.message);
            }
            write_manifest(&m, &out)?;
            eprintln!("{} documents, {} failures", m.len(), failures.len());
        }
        Command::Clean { manifest, out, rules: r } => {
            let m = clean_manifest(&load_manifest(&manifest)?, &rules(&c, r)?)?;
            write_manifest(&m, &out)?;
        }
        Command::Audit { manifest, k, out } => {
            let report = residue_audit(&load_manifest(&manifest)?, k)?;
            let mut md = String::new();
            for (class, terms) in &report {
                md.push_str(&format!("## {class}\n\n"));
                for (i, t) in terms.iter().enumerate() {
                    md.push_str(&format!("{}. {} ({:.4})\n", i + 1, t.term, t.score));
                }
                md.push('\n');
            }
            print!("{md}");
            if let Some(p) = out {
                let named: std::collections::BTreeMap<&str, _> = report.iter().map(|(c, t)| (c.name(), t)).collect();
                write_json(&p, &named)?;
            }
        }
        Command::Balance { manifest, out, topics } => {
            let m = load_manifest(&manifest)?;
            let quotas = match topics {
                Some(f) => {
                    let text = fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
                    let t: Vec<String> = text
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty() && !l.starts_with('#'))
                        .map(str::to_owned)
                        .collect();
                    compute_quotas(&m, &t)?
                }
                None => compute_all_quotas(&m),
            };
            let b = balance_by_topic(&m, &quotas, c.seed)?;
            for t in &b.zero_quota_topics {
                log::warn!("topic {t:?} lacks a class and was dropped");
            }
            write_manifest(&b.manifest, &out)?;
        }
        Command::Enrich {
            pmids,
            out,
            top_decile_out,
            scope,
            fetched_at,
            requests_per_second,
        } => {
            let text = fs::read_to_string(&pmids).map_err(|e| Error::io(&pmids, e))?;
            let items: Vec<(Option<String>, String)> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| match l.split_once('\t') {
                    Some((t, p)) => (Some(t.trim().to_lowercase()), p.trim().to_owned()),
                    None => (None, l.to_owned()),
                })
                .collect();
            let transport: Box<dyn Transport> = if c.fixtures {
                let dir = c
                    .paths
                    .fixture_dir
                    .clone()
                    .ok_or_else(|| Error::Config("fixture mode needs paths.fixture_dir".into()))?;
                Box::new(FixtureTransport::load(dir)?)
            } else {
                Box::new(LiveTransport::new(Duration::from_secs(30)))
            };
            let limiter = || {
                if c.fixtures {
                    RateLimiter::unlimited()
                } else {
                    RateLimiter::per_second(requests_per_second)
                }
            };
            let entrez = EntrezClient::new(transport.as_ref(), limiter(), RetryPolicy::default())
                .with_api_key(std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()));
            let oc = OpenCitationsClient::new(transport.as_ref(), limiter(), RetryPolicy::default());
            let records = enrich(&items, &entrez, &oc, date_or_today(fetched_at.as_deref())?)?;
            write_json(&out, &records)?;
            if let Some(p) = top_decile_out {
                let scope = if scope == "global" {
                    DecileScope::Global
                } else {
                    DecileScope::PerTopic
                };
                write_json(&p, &select_top_decile_scoped(&records, scope)?)?;
            }
        }
        Command::Featurize {
            manifest,
            out,
            vectors_out,
            max_features,
        } => {
            let m = load_manifest(&manifest)?;
            let texts: Vec<&str> = m.documents.iter().map(|d| d.text()).collect();
            let v = Vectorizer::fit(c.vectorizer, &texts, max_features.unwrap_or(c.max_features))?;
            write_json(&out, &v)?;
            if let Some(p) = vectors_out {
                #[derive(Serialize)]
                struct Row<'a> {
                    id: &'a str,
                    label: &'a str,
                    dim: usize,
                    entries: &'a [(usize, f64)],
                }
                let mut buf = Vec::new();
                for (d, t) in m.documents.iter().zip(&texts) {
                    let x = v.transform(t);
                    serde_json::to_writer(
                        &mut buf,
                        &Row {
                            id: &d.id,
                            label: d.label.name(),
                            dim: x.dim,
                            entries: &x.entries,
                        },
                    )?;
                    buf.push(b'\n');
                }
                fs::write(&p, buf).map_err(|e| Error::io(&p, e))?;
            }
        }
        Command::Split {
            manifest,
            ratio,
            stratify,
            train_out,
            test_out,
        } => {
            let m = load_manifest(&manifest)?;
            let (train, test) = split(&m, ratio, stratify, c.seed)?.apply(&m);
            write_manifest(&train, &train_out)?;
            write_manifest(&test, &test_out)?;
            eprintln!("{} train, {} test", train.len(), test.len());
        }
        Command::Train {
            manifest,
            out,
            max_features,
        } => {
            let m = load_manifest(&manifest)?;
            let a = ModelArtifact::fit(&m, c.vectorizer, max_features.unwrap_or(c.max_features), &c.train_config())?;
            a.save(&out)?;
        }
        Command::Evaluate {
            artifact,
            manifest,
            out,
            markdown,
            heldout_topics,
            train_manifest,
        } => {
            let a = ModelArtifact::load(&artifact)?;
            let test = load_manifest(&manifest)?;
            match heldout_topics {
                None => {
                    let r = evaluate(&a, &test)?;
                    write_json(&out, &r)?;
                    let md = r.to_markdown();
                    print!("{md}");
                    if let Some(p) = markdown {
                        write_text(&p, &md)?;
                    }
                }
                Some(topics) => {
                    let train = train_manifest
                        .ok_or_else(|| Error::Config("--heldout-topics needs --train-manifest".into()))?;
                    let r = unseen_topic_eval(&a, &load_manifest(&train)?, &topics, &test)?;
                    write_json(&out, &r)?;
                    let md = r.to_markdown();
                    print!("{md}");
                    if let Some(p) = markdown {
                        write_text(&p, &md)?;
                    }
                }
            }
        }
        Command::Benchmark {
            train,
            test,
            out,
            max_features,
        } => {
            let rows = benchmark(
                &load_manifest(&train)?,
                &load_manifest(&test)?,
                c.vectorizer,
                max_features.unwrap_or(c.max_features),
                &c.train_config(),
                &ModelKind::ALL,
            )?;
            write_json(&out, &rows)?;
            print!("{}", benchmark_markdown(&rows));
        }
        Command::Classify { artifact, files } => {
            let a = ModelArtifact::load(&artifact)?;
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for f in files {
                let text = fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
                let s = a.score_text(&text, c.threshold)?;
                #[derive(Serialize)]
                struct Line<'a> {
                    file: String,
                    #[serde(flatten)]
                    scores: &'a lsgenre::models::ClassScores,
                }
                let line = serde_json::to_string(&Line {
                    file: f.display().to_string(),
                    scores: &s,
                })?;
                writeln!(lock, "{line}").map_err(|e| Error::io("<stdout>", e))?;
            }
        }
        Command::Explain { artifact, k, out } => {
            let a = ModelArtifact::load(&artifact)?;
            let vocab = a.vectorizer.vocabulary();
            let (md, json) = match &a.model.base {
                BaseModel::Linear(l) => {
                    let f = top_linear_features(l, vocab, k)?;
                    (linear_features_markdown(&f), serde_json::to_value(&f)?)
                }
                BaseModel::Forest(f) => {
                    let t = extract_forest_rule_terms(f, vocab, k)?;
                    (rule_terms_markdown(&t), serde_json::to_value(&t)?)
                }
                BaseModel::Boost(b) => {
                    // stumps read as a forest of depth-one trees
                    let as_forest = ForestModel {
                        classes: b.classes.clone(),
                        dim: b.dim,
                        seed: 0,
                        max_features: b.dim,
                        trees: b.stages.iter().map(|s| s.stump.clone()).collect(),
                    };
                    let t = extract_forest_rule_terms(&as_forest, vocab, k)?;
                    (rule_terms_markdown(&t), serde_json::to_value(&t)?)
                }
            };
            print!("{md}");
            if let Some(p) = out {
                write_json(&p, &json)?;
            }
        }
        Command::Cluster {
            embeddings,
            manifest,
            out,
            n_init,
        } => {
            let e = EmbeddingSet::load(&embeddings)?;
            let m = load_manifest(&manifest)?;
            let labels: HashMap<String, _> = m.documents.iter().map(|d| (d.id.clone(), d.label)).collect();
            let clustering = kmeans(
                &e,
                &KMeansOptions {
                    n_init,
                    seed: c.seed,
                    ..Default::default()
                },
            )?;
            let report = cluster_class_metrics(&clustering, &labels)?;
            #[derive(Serialize)]
            struct Out<'a> {
                clustering: &'a lsgenre::cluster::Clustering,
                report: &'a lsgenre::cluster::ClusterReport,
            }
            write_json(
                &out,
                &Out {
                    clustering: &clustering,
                    report: &report,
                },
            )?;
            println!(
                "purity {:.4}, weighted-F1 {:.4} (optimal mapping), {:.4} (identity)",
                report.purity, report.optimal.weighted_f1, report.identity.weighted_f1
            );
        }
        Command::Synth {
            out,
            per_cell,
            topics,
            holdout_topics,
        } => {
            let m: Manifest = generate(&SynthOptions {
                per_cell,
                topics,
                holdout_topics,
                seed: c.seed,
                ..Default::default()
            })?;
            write_manifest(&m, &out)?;
        }
    }
    Ok(())
}
