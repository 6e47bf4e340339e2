//! Synthetic four-styles corpus.
//!
//! Each class has its own marker vocabulary; topics have their own content
//! words. Markers are drawn independently of the topic, so a classifier that
//! learns style transfers to topics whose words it has never seen.

use chrono::NaiveDate;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::cleaning::{clean_text, default_ruleset};
use crate::corpus::{document_id, ClassLabel, Document, Manifest};
use crate::error::{Error, Result};
use crate::rng;

const MARKERS: [&[&str]; 4] = [
    &[
        "homeopathic", "homeopathy", "natural", "remedy", "remedies", "holistic", "toxins", "detox",
        "herbal", "organic", "healing", "wellness", "energy", "ancient", "cleanse", "nourish",
        "supplement", "supplements", "essential", "oils", "chiropractic", "naturopathic", "vitality",
        "gut", "inflammation", "mercury", "fluoride", "chemicals", "pharmaceutical", "pharma",
        "wisdom", "turmeric", "vitamin", "alkaline", "raw", "tincture", "acupuncture", "ayurvedic",
        "enzymes", "microbiome",
    ],
    &[
        "study", "studies", "cohort", "participants", "randomized", "trial", "statistically",
        "significant", "analysis", "confidence", "interval", "methods", "results", "conclusion",
        "references", "hypothesis", "observed", "sample", "regression", "baseline", "outcome",
        "outcomes", "measured", "prevalence", "incidence", "controlled", "protocol", "variables",
        "estimates", "association", "findings", "authors", "journal", "reviewed", "placebo",
        "deviation", "covariates", "adjusted", "ratio", "systematic",
    ],
    &[
        "says", "said", "told", "according", "reporter", "news", "people", "doctor", "hospital",
        "week", "officials", "spokesperson", "interview", "recently", "reported", "experts",
        "announced", "families", "community", "local", "public", "program", "department", "last",
        "year", "month", "million", "county", "mayor", "residents", "statement", "friday", "monday",
        "agency", "director", "neighborhood", "story", "staff", "visit", "parents",
    ],
    &[
        "truth", "hidden", "cover", "lies", "mainstream", "media", "agenda", "globalists",
        "censored", "banned", "elites", "wake", "sheeple", "poison", "depopulation", "plandemic",
        "hoax", "scam", "control", "tyranny", "mandates", "freedom", "exposed", "shocking", "secret",
        "bioweapon", "whistleblower", "corrupt", "propaganda", "narrative", "jab", "injured",
        "deadly", "silenced", "treason", "criminals", "genocide", "fraud", "puppets", "overlords",
    ],
];

const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "is", "that", "for", "it", "with", "as", "was", "on", "are",
    "by", "this", "be", "from", "or", "have", "an", "they", "which", "not", "at", "but", "more",
    "can", "these", "has", "been", "their", "also", "may", "were", "its", "other", "some", "than",
    "into",
];

/// Ten training topics followed by three vocabulary-disjoint holdout topics.
const TOPICS: [(&str, &[&str]); 13] = [
    ("cancer", &["tumor", "chemotherapy", "oncology", "malignant", "biopsy", "metastasis", "carcinoma", "radiotherapy", "lymphoma", "melanoma", "leukemia", "mammogram", "tumors", "oncologist", "remission"]),
    ("diabetes", &["insulin", "glucose", "pancreas", "glycemic", "diabetic", "sugar", "metformin", "hyperglycemia", "ketones", "pancreatic", "carbohydrate", "islet", "glucagon", "neuropathy", "amputation"]),
    ("vaccines", &["vaccine", "vaccination", "immunization", "antibodies", "booster", "dose", "doses", "measles", "mumps", "rubella", "adjuvant", "antigen", "shots", "polio", "pertussis"]),
    ("heart", &["cardiac", "cholesterol", "artery", "arteries", "stroke", "blood", "pressure", "hypertension", "statins", "cardiovascular", "coronary", "arrhythmia", "valve", "aorta", "pulse"]),
    ("nutrition", &["diet", "protein", "fiber", "calories", "vegetables", "fruit", "meals", "breakfast", "sodium", "fats", "grains", "dairy", "snacks", "portion", "recipes"]),
    ("mental health", &["depression", "anxiety", "therapy", "antidepressants", "mood", "stress", "psychiatric", "counseling", "trauma", "bipolar", "schizophrenia", "loneliness", "suicide", "psychologist", "burnout"]),
    ("pregnancy", &["pregnant", "fetus", "fetal", "prenatal", "birth", "labor", "midwife", "obstetric", "trimester", "newborn", "breastfeeding", "placenta", "miscarriage", "cesarean", "infant"]),
    ("sleep", &["insomnia", "melatonin", "apnea", "snoring", "bedtime", "nap", "naps", "circadian", "dreams", "drowsiness", "wakefulness", "pillow", "mattress", "rem", "sedatives"]),
    ("obesity", &["weight", "overweight", "bmi", "waist", "adipose", "bariatric", "appetite", "exercise", "fitness", "gym", "metabolism", "sedentary", "pounds", "kilograms", "liposuction"]),
    ("allergies", &["allergy", "allergic", "pollen", "histamine", "antihistamine", "peanut", "asthma", "eczema", "hives", "anaphylaxis", "epinephrine", "sneezing", "dust", "mites", "rhinitis"]),
    ("climate change", &["warming", "emissions", "carbon", "heatwave", "drought", "wildfire", "temperatures", "greenhouse", "flooding", "hurricanes", "glaciers", "humidity", "ozone", "smog", "sea"]),
    ("pandemics", &["outbreak", "virus", "viral", "transmission", "quarantine", "lockdown", "contagion", "epidemic", "pathogen", "spillover", "influenza", "coronavirus", "masks", "isolation", "ventilators"]),
    ("urine", &["bladder", "kidney", "kidneys", "urinary", "urination", "incontinence", "prostate", "urethra", "catheter", "dialysis", "renal", "urologist", "cystitis", "creatinine", "nephrology"]),
];

pub const TRAINING_TOPICS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    /// Documents per (topic, class) cell.
    pub per_cell: usize,
    /// Training topics used, at most ten.
    pub topics: usize,
    /// Holdout topics appended after the training topics, at most three.
    pub holdout_topics: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Probability that a token is a style marker.
    pub marker_rate: f64,
    /// Probability that a marker comes from another class.
    pub marker_noise: f64,
    /// Probability that a non-marker token is a topic word.
    pub topic_rate: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            per_cell: 50,
            topics: TRAINING_TOPICS,
            holdout_topics: 0,
            min_tokens: 200,
            max_tokens: 400,
            marker_rate: 0.04,
            marker_noise: 0.25,
            topic_rate: 0.35,
            seed: 0,
        }
    }
}

pub fn topic_names() -> Vec<&'static str> {
    TOPICS.iter().map(|t| t.0).collect()
}

pub fn holdout_topic_names() -> Vec<&'static str> {
    TOPICS[TRAINING_TOPICS..].iter().map(|t| t.0).collect()
}

pub fn class_markers(class: ClassLabel) -> &'static [&'static str] {
    MARKERS[class.index()]
}

fn pick<'a>(r: &mut impl RngCore, words: &[&'a str]) -> &'a str {
    words[rng::below(r, words.len() as u64) as usize]
}

/// Marker `i` of a class is drawn with weight `1 / (i + 1)`.
fn pick_marker<'a>(r: &mut impl RngCore, words: &[&'a str]) -> &'a str {
    let total: f64 = (1..=words.len()).map(|i| 1.0 / i as f64).sum();
    let mut u = rng::unit_f64(r) * total;
    for (i, w) in words.iter().enumerate() {
        u -= 1.0 / (i + 1) as f64;
        if u < 0.0 {
            return w;
        }
    }
    words[words.len() - 1]
}

fn document_text(r: &mut impl RngCore, class: ClassLabel, topic_words: &[&str], o: &SynthOptions) -> String {
    let span = (o.max_tokens - o.min_tokens) as u64 + 1;
    let n = o.min_tokens + rng::below(r, span) as usize;
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng::unit_f64(r);
        let w = if u < o.marker_rate {
            let from = if rng::unit_f64(r) < o.marker_noise {
                let other = rng::below(r, 3) as usize;
                if other >= class.index() {
                    other + 1
                } else {
                    other
                }
            } else {
                class.index()
            };
            pick_marker(r, MARKERS[from])
        } else if rng::unit_f64(r) < o.topic_rate {
            pick(r, topic_words)
        } else {
            pick(r, FUNCTION_WORDS)
        };
        words.push(w);
    }
    // sentences of 8 to 14 words, a paragraph break every 4 sentences
    let mut text = String::new();
    let mut i = 0;
    let mut sentence = 0;
    while i < words.len() {
        let len = (8 + rng::below(r, 7) as usize).min(words.len() - i);
        if !text.is_empty() {
            text.push(if sentence % 4 == 0 { '\n' } else { ' ' });
        }
        let mut s = words[i..i + len].join(" ");
        s[..1].make_ascii_uppercase();
        text.push_str(&s);
        text.push('.');
        i += len;
        sentence += 1;
    }
    text
}

/// Balanced, cleaned corpus: `per_cell` documents for every class in every
/// topic, training topics first, then holdout topics. Deterministic in
/// `seed`.
pub fn generate(o: &SynthOptions) -> Result<Manifest> {
    if o.topics > TRAINING_TOPICS || o.holdout_topics > TOPICS.len() - TRAINING_TOPICS {
        return Err(Error::invalid(format!(
            "at most {TRAINING_TOPICS} topics and {} holdout topics",
            TOPICS.len() - TRAINING_TOPICS
        )));
    }
    if o.min_tokens == 0 || o.max_tokens < o.min_tokens {
        return Err(Error::invalid("token range must satisfy 1 <= min <= max"));
    }
    for (name, p) in [("marker_rate", o.marker_rate), ("marker_noise", o.marker_noise), ("topic_rate", o.topic_rate)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
        }
    }
    let rules = default_ruleset();
    let date = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    let mut r = rng::seeded(o.seed);
    let topics = TOPICS[..o.topics]
        .iter()
        .chain(&TOPICS[TRAINING_TOPICS..TRAINING_TOPICS + o.holdout_topics]);
    let mut docs = Vec::new();
    for (topic, words) in topics {
        for class in ClassLabel::ALL {
            for k in 0..o.per_cell {
                let source = format!("synth-{}", class.name());
                let text = document_text(&mut r, class, words, o);
                let id = document_id(&source, &format!("{topic}/{k}"));
                let mut d = Document::new(id, class, *topic, source.clone(), text, date);
                let clean = clean_text(&d.raw_text, &source, &rules);
                d.set_clean_text(clean);
                docs.push(d);
            }
        }
    }
    Manifest::new("synthetic", o.seed, docs)
}
