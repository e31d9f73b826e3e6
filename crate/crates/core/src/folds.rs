//! Seeded k-fold plans and nested training subsamples.
//!
//! Construction: corpus ids are sorted bytewise, shuffled once with a
//! SplitMix64 generator seeded with the plan seed, and dealt round-robin
//! (position `p` goes to fold `p % k`). The same generator then produces
//! each fold's training order: for folds `0..k` in turn, the ids outside
//! the fold are sorted bytewise and shuffled. Training subsets are
//! prefixes of that order, so smaller subsets nest inside larger ones.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledExample};
use crate::error::{Error, Result};
use crate::rng::{SplitMix64, GENERATOR_NAME};

/// Default training-set sizes for a curve.
pub const DEFAULT_SCHEDULE: [usize; 16] = [
    10, 50, 100, 175, 250, 500, 750, 1000, 1500, 2000, 3000, 4000, 5000, 6000, 7000, 8000,
];

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldPlan {
    pub seed: u64,
    pub k: usize,
    pub generator: String,
    pub stratified: bool,
    pub corpus_fingerprint: String,
    pub assignment: BTreeMap<String, usize>,
    /// Per fold, the shuffled ids of the other `k - 1` folds.
    pub order: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Number of examples available for training when `fold` is held out.
    pub fn train_pool_size(&self, fold: usize) -> Result<usize> {
        self.check_fold(fold)?;
        Ok(self.order[fold].len())
    }

    fn check_fold(&self, fold: usize) -> Result<()> {
        if fold >= self.k {
            return Err(Error::InvalidArgument(format!(
                "fold {fold} out of range for k={}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        let fp = corpus.fingerprint();
        if fp != self.corpus_fingerprint {
            return Err(Error::PlanMismatch(format!(
                "plan built for corpus {}, got {}",
                self.corpus_fingerprint, fp
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    /// Parses and validates a persisted plan.
    pub fn from_json(raw: &str) -> Result<Self> {
        let plan: FoldPlan = serde_json::from_str(raw)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut raw = self.to_json();
        raw.push('\n');
        fs::write(path, raw).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw)
    }

    /// Structural consistency: every id in one fold, sizes within 1,
    /// each training order a permutation of the ids outside its fold.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::PlanMismatch(m));
        if self.k < 2 {
            return bad(format!("k={} < 2", self.k));
        }
        if self.order.len() != self.k {
            return bad(format!(
                "{} training orders for k={}",
                self.order.len(),
                self.k
            ));
        }
        if let Some((id, f)) = self.assignment.iter().find(|(_, &f)| f >= self.k) {
            return bad(format!("id {id:?} assigned to fold {f}"));
        }
        let sizes = self.fold_sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo > 1 {
            return bad(format!("fold sizes {sizes:?} differ by more than 1"));
        }
        for (f, order) in self.order.iter().enumerate() {
            if order.len() != self.assignment.len() - sizes[f] {
                return bad(format!("fold {f} training order has wrong length"));
            }
            let mut seen = HashSet::with_capacity(order.len());
            for id in order {
                match self.assignment.get(id) {
                    Some(&g) if g != f && seen.insert(id) => {}
                    _ => return bad(format!("fold {f} training order contains bad id {id:?}")),
                }
            }
        }
        Ok(())
    }
}

pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    make_folds_with(corpus, k, seed, false)
}

/// Like [`make_folds`]; with `stratified`, ids are shuffled within each
/// label (in schema order) before dealing, so each fold mirrors the class mix.
pub fn make_folds_with(corpus: &Corpus, k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if corpus.len() < k {
        return Err(Error::InvalidArgument(format!(
            "corpus of {} examples cannot be split into {k} folds",
            corpus.len()
        )));
    }
    let mut ids: Vec<&str> = corpus.examples.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "duplicate example id {:?}",
            w[0]
        )));
    }

    let mut rng = SplitMix64::new(seed);
    let dealt: Vec<&str> = if stratified {
        let label_of: HashMap<&str, &str> = corpus
            .examples
            .iter()
            .map(|e| (e.id.as_str(), e.label.as_str()))
            .collect();
        let mut out = Vec::with_capacity(ids.len());
        for label in &corpus.schema.labels {
            let mut group: Vec<&str> = ids
                .iter()
                .copied()
                .filter(|id| label_of[id] == label)
                .collect();
            rng.shuffle(&mut group);
            out.extend(group);
        }
        out
    } else {
        rng.shuffle(&mut ids);
        ids
    };

    let assignment: BTreeMap<String, usize> = dealt
        .iter()
        .enumerate()
        .map(|(p, id)| (id.to_string(), p % k))
        .collect();

    // BTreeMap iteration is already bytewise-sorted.
    let order = (0..k)
        .map(|f| {
            let mut train: Vec<String> = assignment
                .iter()
                .filter(|(_, &g)| g != f)
                .map(|(id, _)| id.clone())
                .collect();
            rng.shuffle(&mut train);
            train
        })
        .collect();

    Ok(FoldPlan {
        seed,
        k,
        generator: GENERATOR_NAME.to_string(),
        stratified,
        corpus_fingerprint: corpus.fingerprint(),
        assignment,
        order,
    })
}

fn index_by_id(corpus: &Corpus) -> HashMap<&str, &LabeledExample> {
    corpus.examples.iter().map(|e| (e.id.as_str(), e)).collect()
}

/// The first `min(size, available)` examples of the fold's training order.
pub fn train_subset(
    plan: &FoldPlan,
    corpus: &Corpus,
    held_out_fold: usize,
    size: usize,
) -> Result<Vec<LabeledExample>> {
    plan.check_fold(held_out_fold)?;
    if size < 1 {
        return Err(Error::InvalidArgument(
            "subsample size must be at least 1".into(),
        ));
    }
    let by_id = index_by_id(corpus);
    plan.order[held_out_fold]
        .iter()
        .take(size)
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|&e| e.clone())
                .ok_or_else(|| Error::PlanMismatch(format!("id {id:?} not in corpus")))
        })
        .collect()
}

/// Every example assigned to `fold`, in corpus order.
pub fn held_out(plan: &FoldPlan, corpus: &Corpus, fold: usize) -> Result<Vec<LabeledExample>> {
    plan.check_fold(fold)?;
    corpus
        .examples
        .iter()
        .filter_map(|e| match plan.assignment.get(&e.id) {
            Some(&f) if f == fold => Some(Ok(e.clone())),
            Some(_) => None,
            None => Some(Err(Error::PlanMismatch(format!(
                "id {:?} not in plan",
                e.id
            )))),
        })
        .collect()
}

/// Strictly increasing list of positive training-set sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SubsampleSchedule {
    sizes: Vec<usize>,
}

impl SubsampleSchedule {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("schedule is empty".into()));
        }
        if sizes[0] < 1 {
            return Err(Error::InvalidArgument(
                "schedule sizes must be positive".into(),
            ));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "schedule {sizes:?} is not strictly increasing"
            )));
        }
        Ok(SubsampleSchedule { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Parses `10,50,1000`-style lists.
    pub fn parse(raw: &str) -> Result<Self> {
        let sizes = raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad schedule entry {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }
}

impl Default for SubsampleSchedule {
    fn default() -> Self {
        SubsampleSchedule {
            sizes: DEFAULT_SCHEDULE.to_vec(),
        }
    }
}

impl TryFrom<Vec<usize>> for SubsampleSchedule {
    type Error = Error;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<SubsampleSchedule> for Vec<usize> {
    fn from(s: SubsampleSchedule) -> Self {
        s.sizes
    }
}
