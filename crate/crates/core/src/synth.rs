//! Seeded synthetic corpora for demos and end-to-end checks.
//!
//! Every label owns a disjoint keyword vocabulary; texts mix keywords of
//! the true class with shared filler words and a unique serial token, so
//! no two texts collide. With probability `label_noise` the recorded label
//! is swapped for a different, uniformly chosen one.

use crate::corpus::{Corpus, LabeledExample};
use crate::rng::SplitMix64;
use crate::schema::TaskSchema;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub examples: usize,
    pub seed: u64,
    pub label_noise: f64,
    /// Relative class frequencies in schema order; uniform when empty.
    pub class_weights: Vec<f64>,
    pub keywords_per_class: usize,
    pub keywords_per_text: usize,
    pub filler_per_text: usize,
}

impl SynthSpec {
    pub fn new(examples: usize, seed: u64) -> Self {
        SynthSpec {
            examples,
            seed,
            label_noise: 0.0,
            class_weights: Vec::new(),
            keywords_per_class: 40,
            keywords_per_text: 3,
            filler_per_text: 4,
        }
    }
}

const FILLER: &[&str] = &[
    "the", "today", "covid", "just", "really", "people", "think", "home", "week", "news", "virus",
    "going", "still", "time", "everyone", "day", "stay", "safe", "now", "update",
];

fn unit(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn pick_class(rng: &mut SplitMix64, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let r = unit(rng) * total;
    cumulative
        .iter()
        .position(|&c| r < c)
        .unwrap_or(cumulative.len() - 1)
}

pub fn generate(schema: &TaskSchema, spec: &SynthSpec) -> Corpus {
    let n = schema.labels.len();
    let weights: Vec<f64> = if spec.class_weights.len() == n {
        spec.class_weights.clone()
    } else {
        vec![1.0; n]
    };
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w.max(0.0);
            Some(*acc)
        })
        .collect();

    let mut rng = SplitMix64::new(spec.seed);
    let examples = (0..spec.examples)
        .map(|i| {
            let class = pick_class(&mut rng, &cumulative);
            let mut words = Vec::with_capacity(spec.keywords_per_text + spec.filler_per_text + 1);
            for _ in 0..spec.keywords_per_text {
                let k = rng.below(spec.keywords_per_class.max(1) as u64);
                words.push(format!("{}kw{k}", class_prefix(class)));
            }
            for _ in 0..spec.filler_per_text {
                words.push(FILLER[rng.below(FILLER.len() as u64) as usize].to_string());
            }
            words.push(format!("n{i}"));
            let mut label = class;
            if n > 1 && unit(&mut rng) < spec.label_noise {
                let shift = 1 + rng.below(n as u64 - 1) as usize;
                label = (class + shift) % n;
            }
            LabeledExample::new(
                format!("s{}-{i:06}", spec.seed),
                words.join(" "),
                schema.labels[label].clone(),
            )
        })
        .collect();

    Corpus {
        schema: schema.clone(),
        examples,
        provenance: vec![format!("synthetic:seed={}", spec.seed)],
    }
}

fn class_prefix(class: usize) -> String {
    // Letters only, so the word segmenter keeps each keyword whole.
    let mut s = String::new();
    let mut c = class;
    loop {
        s.push((b'a' + (c % 26) as u8) as char);
        c /= 26;
        if c == 0 {
            break;
        }
    }
    s
}
