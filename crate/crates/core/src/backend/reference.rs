//! Deterministic multinomial naive Bayes over lowercased word tokens.
//!
//! Tokens are the Unicode word segments (UAX #29) of the lowercased text,
//! so whitespace and punctuation never appear inside a token. Class priors
//! come from training counts and token likelihoods use add-one smoothing:
//!
//! ```text
//! P(t | c) = (n(t, c) + 1 + q(t)) / (N(c) + |V| + Q)
//! ```
//!
//! where `V` is the vocabulary, `q(t)` the warm-start pseudo-count of `t`
//! and `Q` their sum. Tokens outside `V` are ignored at prediction time.
//! Prediction is the argmax of log prior plus summed log likelihoods over
//! classes seen in training, ties going to the earlier schema label.
//!
//! A warm start keeps only the origin model's token statistics: counts are
//! pooled over its classes and rescaled so they total one pseudo-count per
//! distinct origin token, giving a class-symmetric prior. The origin's
//! classes are dropped. Training hyperparameters other than the label set
//! do not affect this backend.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use super::{Backend, CheckpointManifest, InitCheckpoint, Model, TrainConfig};
use crate::corpus::LabeledExample;
use crate::error::{Error, Result};
use crate::schema::TaskSchema;

pub const BACKEND_ID: &str = "reference-nb";
const PAYLOAD_FILE: &str = "naive_bayes.json";

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .unicode_words()
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveBayesBackend;

/// Persisted sufficient statistics; integer-only so round trips are exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Counts {
    labels: Vec<String>,
    class_docs: Vec<u64>,
    /// token -> per-class occurrence counts
    token_counts: BTreeMap<String, Vec<u64>>,
    /// Pooled token counts imported from a warm-start checkpoint.
    prior_counts: BTreeMap<String, u64>,
}

impl Counts {
    fn fit(examples: &[LabeledExample], schema: &TaskSchema) -> Self {
        let n = schema.labels.len();
        let mut class_docs = vec![0u64; n];
        let mut token_counts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for ex in examples {
            let c = schema
                .index_of(&ex.label)
                .expect("labels validated by caller");
            class_docs[c] += 1;
            for tok in tokenize(&ex.text) {
                token_counts.entry(tok).or_insert_with(|| vec![0; n])[c] += 1;
            }
        }
        Counts {
            labels: schema.labels.clone(),
            class_docs,
            token_counts,
            prior_counts: BTreeMap::new(),
        }
    }

    fn pooled(&self) -> BTreeMap<String, u64> {
        self.token_counts
            .iter()
            .map(|(t, per_class)| (t.clone(), per_class.iter().sum()))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n < 2 || self.class_docs.len() != n {
            return Err(Error::Backend(
                "naive Bayes payload: bad class table".into(),
            ));
        }
        if self.token_counts.values().any(|v| v.len() != n) {
            return Err(Error::Backend(
                "naive Bayes payload: ragged token counts".into(),
            ));
        }
        if self.class_docs.iter().all(|&d| d == 0) {
            return Err(Error::Backend(
                "naive Bayes payload: no training documents".into(),
            ));
        }
        Ok(())
    }
}

/// Scoring tables derived from [`Counts`].
struct NaiveBayes {
    counts: Counts,
    /// `None` for classes never seen in training.
    log_prior: Vec<Option<f64>>,
    log_likelihood: HashMap<String, Vec<f64>>,
}

impl NaiveBayes {
    fn new(counts: Counts) -> Result<Self> {
        counts.validate()?;
        let n = counts.labels.len();
        let docs: u64 = counts.class_docs.iter().sum();
        let log_prior = counts
            .class_docs
            .iter()
            .map(|&d| (d > 0).then(|| (d as f64 / docs as f64).ln()))
            .collect();

        let prior_total: u64 = counts.prior_counts.values().sum();
        let prior_vocab = counts.prior_counts.len() as f64;
        let pseudo = |t: &str| -> f64 {
            match counts.prior_counts.get(t) {
                Some(&c) if prior_total > 0 => c as f64 * prior_vocab / prior_total as f64,
                _ => 0.0,
            }
        };
        let pseudo_mass = if prior_total > 0 { prior_vocab } else { 0.0 };

        let mut vocab: Vec<&str> = counts.token_counts.keys().map(String::as_str).collect();
        vocab.extend(
            counts
                .prior_counts
                .keys()
                .map(String::as_str)
                .filter(|t| !counts.token_counts.contains_key(*t)),
        );
        let vocab_size = vocab.len() as f64;

        let mut class_tokens = vec![0u64; n];
        for per_class in counts.token_counts.values() {
            for (c, &k) in per_class.iter().enumerate() {
                class_tokens[c] += k;
            }
        }
        let denom: Vec<f64> = class_tokens
            .iter()
            .map(|&k| k as f64 + vocab_size + pseudo_mass)
            .collect();

        let zeros = vec![0u64; n];
        let log_likelihood = vocab
            .iter()
            .map(|&t| {
                let per_class = counts.token_counts.get(t).unwrap_or(&zeros);
                let q = pseudo(t);
                let row = (0..n)
                    .map(|c| ((per_class[c] as f64 + 1.0 + q) / denom[c]).ln())
                    .collect();
                (t.to_string(), row)
            })
            .collect();

        Ok(NaiveBayes {
            counts,
            log_prior,
            log_likelihood,
        })
    }

    fn classify(&self, text: &str) -> &str {
        let mut scores: Vec<Option<f64>> = self.log_prior.clone();
        for tok in tokenize(text) {
            if let Some(row) = self.log_likelihood.get(&tok) {
                for (s, &ll) in scores.iter_mut().zip(row) {
                    if let Some(s) = s {
                        *s += ll;
                    }
                }
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (c, s) in scores.iter().enumerate() {
            if let Some(s) = *s {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((c, s));
                }
            }
        }
        let (c, _) = best.expect("at least one class has training documents");
        &self.counts.labels[c]
    }
}

impl Model for NaiveBayes {
    fn predict(&self, texts: &[&str]) -> Result<Vec<String>> {
        Ok(texts.iter().map(|t| self.classify(t).to_string()).collect())
    }

    fn save_payload(&self, dir: &Path) -> Result<Vec<String>> {
        let path = dir.join(PAYLOAD_FILE);
        let raw = serde_json::to_vec(&self.counts)?;
        fs::write(&path, raw).map_err(|e| Error::io(&path, e))?;
        Ok(vec![PAYLOAD_FILE.to_string()])
    }
}

fn read_counts(dir: &Path) -> Result<Counts> {
    let path = dir.join(PAYLOAD_FILE);
    if !path.is_file() {
        return Err(Error::MissingArtifact(path));
    }
    let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let counts: Counts = serde_json::from_slice(&raw)?;
    counts.validate()?;
    Ok(counts)
}

impl Backend for NaiveBayesBackend {
    fn id(&self) -> &str {
        BACKEND_ID
    }

    fn train(
        &self,
        examples: &[LabeledExample],
        schema: &TaskSchema,
        _config: &TrainConfig,
        init: Option<InitCheckpoint<'_>>,
    ) -> Result<Box<dyn Model>> {
        let mut counts = Counts::fit(examples, schema);
        if let Some(init) = init {
            counts.prior_counts = read_counts(init.dir)?.pooled();
        }
        Ok(Box::new(NaiveBayes::new(counts)?))
    }

    fn load_model(&self, dir: &Path, manifest: &CheckpointManifest) -> Result<Box<dyn Model>> {
        let counts = read_counts(dir)?;
        if counts.labels != manifest.schema.labels {
            return Err(Error::Backend(
                "naive Bayes payload labels disagree with manifest schema".into(),
            ));
        }
        Ok(Box::new(NaiveBayes::new(counts)?))
    }
}
