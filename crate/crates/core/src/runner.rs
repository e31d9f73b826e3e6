//! Learning-curve orchestration.
//!
//! A cell is one (fold, training size, arm) combination: train on the
//! fold's nested subsample, predict the held-out fold, score, persist.
//! Records go to one JSON-lines file per (task, arm) under the store root
//! and predictions to `predictions/<task>_<fold>_<size>_<arm>.tsv`. A cell
//! whose latest record succeeded with the current fingerprint and whose
//! prediction file is still present is skipped on resume.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::backend::{self, Backend, CheckpointRef, TrainConfig};
use crate::corpus::{majority_label, Corpus};
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::folds::{held_out, train_subset, FoldPlan, SubsampleSchedule};
use crate::metrics::{self, Score};
use crate::predictions::Predictions;
use crate::schema::MetricKind;

/// Environment variable giving the default run-store root.
pub const STORE_ENV: &str = "LEARNCURVE_STORE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Plain,
    Warm,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Plain => "plain",
            Arm::Warm => "warm",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Arm::Plain),
            "warm" => Ok(Arm::Warm),
            _ => Err(Error::InvalidArgument(format!("unknown arm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub task_id: String,
    pub fold: usize,
    pub train_size_requested: usize,
    pub train_size_actual: usize,
    pub arm: Arm,
    /// Origin task of the warm-start checkpoint.
    pub warm_start: Option<String>,
    pub warm_start_fingerprint: Option<String>,
    pub backend_id: String,
    pub seed: u64,
    pub status: CellStatus,
    pub error: Option<String>,
    pub primary_metric: MetricKind,
    /// Primary metric first.
    pub scores: Vec<Score>,
    pub train_majority: Option<String>,
    pub degenerate_majority: bool,
    /// Relative to the store root.
    pub predictions_path: Option<String>,
    pub config_fingerprint: String,
    pub cell_fingerprint: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    pub fn primary_score(&self) -> Option<&Score> {
        self.scores.iter().find(|s| s.metric == self.primary_metric)
    }

    pub fn key(&self) -> CellKey {
        CellKey {
            arm: self.arm,
            fold: self.fold,
            size: self.train_size_requested,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub arm: Arm,
    pub fold: usize,
    pub size: usize,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Parses a JSON-lines record file. Blank lines are ignored.
pub fn parse_records(raw: &[u8], source: &str) -> Result<Vec<RunRecord>> {
    let text = std::str::from_utf8(raw).map_err(|_| Error::parse(source, 0, "invalid UTF-8"))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(source, i + 1, e.to_string()))
        })
        .collect()
}

/// On-disk run store rooted at one directory.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let preds = root.join("predictions");
        fs::create_dir_all(&preds).map_err(|e| Error::io(&preds, e))?;
        Ok(RunStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records_path(&self, task_id: &str, arm: Arm) -> PathBuf {
        self.root.join(format!("{task_id}_{arm}.jsonl"))
    }

    pub fn plan_path(&self, task_id: &str) -> PathBuf {
        self.root.join(format!("{task_id}_plan.json"))
    }

    pub fn predictions_rel(task_id: &str, fold: usize, size: usize, arm: Arm) -> String {
        format!("predictions/{task_id}_{fold}_{size}_{arm}.tsv")
    }

    pub fn append(&self, record: &RunRecord) -> Result<()> {
        let path = self.records_path(&record.task_id, record.arm);
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        // One write per record keeps lines whole for readers.
        file.write_all(&line).map_err(|e| Error::io(&path, e))
    }

    /// Every record file in the store, in file-name order.
    pub fn record_files(&self) -> Result<Vec<PathBuf>> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.root)
            .map_err(|e| Error::io(&self.root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        Ok(files)
    }

    /// All records in append order, across every task and arm.
    pub fn load_all(&self) -> Result<Vec<RunRecord>> {
        let mut out = Vec::new();
        for path in self.record_files()? {
            let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            out.extend(parse_records(&raw, &path.display().to_string())?);
        }
        Ok(out)
    }

    /// Latest record per cell for one task.
    pub fn latest(&self, task_id: &str) -> Result<BTreeMap<CellKey, RunRecord>> {
        let mut out = BTreeMap::new();
        for arm in [Arm::Plain, Arm::Warm] {
            let path = self.records_path(task_id, arm);
            if !path.exists() {
                continue;
            }
            let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            for rec in parse_records(&raw, &path.display().to_string())? {
                if rec.task_id == task_id {
                    out.insert(rec.key(), rec);
                }
            }
        }
        Ok(out)
    }

    fn is_complete(&self, rec: &RunRecord, cell_fingerprint: &str) -> bool {
        rec.is_ok()
            && rec.cell_fingerprint == cell_fingerprint
            && rec
                .predictions_path
                .as_ref()
                .is_some_and(|p| self.root.join(p).is_file())
    }
}

/// Drives cells against one backend and store.
pub struct Runner<'a> {
    pub backend: &'a dyn Backend,
    pub store: &'a RunStore,
    /// Upper bound on concurrently training cells.
    pub jobs: usize,
}

/// What [`Runner::run_curve`] did.
#[derive(Debug, Clone)]
pub struct CurveRun {
    /// One record per (arm, fold, size), in that order.
    pub records: Vec<RunRecord>,
    pub executed: usize,
    pub skipped: usize,
}

impl<'a> Runner<'a> {
    pub fn new(backend: &'a dyn Backend, store: &'a RunStore) -> Self {
        Runner {
            backend,
            store,
            jobs: 1,
        }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    /// Seed for one cell, derived from the base seed and the cell identity.
    pub fn cell_seed(base_seed: u64, task_id: &str, fold: usize, size: usize, arm: Arm) -> u64 {
        let mut fp = Fingerprinter::new("cell-seed/v1");
        fp.u64(base_seed)
            .str(task_id)
            .u64(fold as u64)
            .u64(size as u64)
            .str(arm.as_str());
        fp.seed()
    }

    fn cell_fingerprint(
        corpus_fp: &str,
        plan_fp: &str,
        config: &TrainConfig,
        key: CellKey,
        warm: Option<&CheckpointRef>,
    ) -> String {
        let mut fp = Fingerprinter::new("cell/v1");
        fp.str(corpus_fp)
            .str(plan_fp)
            .str(&config.fingerprint())
            .u64(key.fold as u64)
            .u64(key.size as u64)
            .str(key.arm.as_str())
            .str(warm.map(|w| w.config_fingerprint.as_str()).unwrap_or(""));
        fp.hex()
    }

    /// Trains on the fold's subsample, scores the held-out fold, writes the
    /// prediction file. Backend failures come back as a failed record.
    pub fn run_cell(
        &self,
        corpus: &Corpus,
        plan: &FoldPlan,
        fold: usize,
        size: usize,
        config: &TrainConfig,
        warm_start: Option<&CheckpointRef>,
    ) -> Result<RunRecord> {
        let arm = if warm_start.is_some() {
            Arm::Warm
        } else {
            Arm::Plain
        };
        let key = CellKey { arm, fold, size };
        let cell_fp = Self::cell_fingerprint(
            &corpus.fingerprint(),
            &plan_fingerprint(plan),
            config,
            key,
            warm_start,
        );
        self.run_cell_inner(corpus, plan, key, config, warm_start, cell_fp)
    }

    fn run_cell_inner(
        &self,
        corpus: &Corpus,
        plan: &FoldPlan,
        key: CellKey,
        base: &TrainConfig,
        warm_start: Option<&CheckpointRef>,
        cell_fingerprint: String,
    ) -> Result<RunRecord> {
        let schema = &corpus.schema;
        let train = train_subset(plan, corpus, key.fold, key.size)?;
        let test = held_out(plan, corpus, key.fold)?;
        let started = now_ms();

        let mut config = base.clone();
        config.seed = Self::cell_seed(base.seed, &schema.task_id, key.fold, key.size, key.arm);
        config.init_checkpoint = warm_start.cloned();
        let train_majority = majority_label(schema, &train);

        let mut record = RunRecord {
            task_id: schema.task_id.clone(),
            fold: key.fold,
            train_size_requested: key.size,
            train_size_actual: train.len(),
            arm: key.arm,
            warm_start: warm_start.map(|w| w.schema_of_origin.task_id.clone()),
            warm_start_fingerprint: warm_start.map(|w| w.config_fingerprint.clone()),
            backend_id: self.backend.id().to_string(),
            seed: config.seed,
            status: CellStatus::Failed,
            error: None,
            primary_metric: schema.primary_metric,
            scores: Vec::new(),
            train_majority: train_majority.clone(),
            degenerate_majority: false,
            predictions_path: None,
            config_fingerprint: config.fingerprint(),
            cell_fingerprint,
            started_unix_ms: started,
            finished_unix_ms: started,
        };

        let outcome = (|| -> Result<(Vec<String>, Vec<Score>)> {
            let handle = backend::train(self.backend, &train, schema, &config)?;
            let texts: Vec<&str> = test.iter().map(|e| e.text.as_str()).collect();
            let pred = backend::predict(&handle, &texts)?;
            let gold: Vec<&str> = test.iter().map(|e| e.label.as_str()).collect();
            let cm = metrics::confusion(&gold, &pred, schema)?;
            Ok((pred, metrics::all_scores(&cm)?))
        })();

        match outcome {
            Ok((pred, scores)) => {
                let rel = RunStore::predictions_rel(&schema.task_id, key.fold, key.size, key.arm);
                let rows = test
                    .iter()
                    .map(|e| e.id.clone())
                    .zip(pred.iter().cloned())
                    .collect();
                Predictions::new(rows).write(&self.store.root.join(&rel))?;
                record.degenerate_majority = train_majority
                    .as_deref()
                    .is_some_and(|m| metrics::is_majority_degenerate(&pred, m));
                record.scores = scores;
                record.predictions_path = Some(rel);
                record.status = CellStatus::Ok;
            }
            Err(e) => {
                log::warn!(
                    "cell {} fold={} size={} arm={} failed: {e}",
                    schema.task_id,
                    key.fold,
                    key.size,
                    key.arm
                );
                record.error = Some(e.to_string());
            }
        }
        record.finished_unix_ms = now_ms();
        Ok(record)
    }

    /// Runs every (arm, fold, size) cell not already complete in the store.
    pub fn run_curve(
        &self,
        corpus: &Corpus,
        plan: &FoldPlan,
        schedule: &SubsampleSchedule,
        config: &TrainConfig,
        arms: &[Arm],
        warm_start: Option<&CheckpointRef>,
    ) -> Result<CurveRun> {
        plan.validate()?;
        plan.check_corpus(corpus)?;
        if arms.is_empty() {
            return Err(Error::InvalidArgument("no arms selected".into()));
        }
        if arms.contains(&Arm::Warm) && warm_start.is_none() {
            return Err(Error::InvalidArgument(
                "warm arm requested without a warm-start checkpoint".into(),
            ));
        }
        config.validate()?;
        if config.backend_id != self.backend.id() {
            return Err(Error::BackendMismatch {
                expected: self.backend.id().to_string(),
                found: config.backend_id.clone(),
            });
        }

        let task_id = corpus.schema.task_id.as_str();
        let corpus_fp = corpus.fingerprint();
        let plan_fp = plan_fingerprint(plan);
        let mut arms = arms.to_vec();
        arms.sort();
        arms.dedup();

        let existing = self.store.latest(task_id)?;
        let mut done: BTreeMap<CellKey, RunRecord> = BTreeMap::new();
        let mut todo: Vec<(CellKey, String)> = Vec::new();
        for &arm in &arms {
            let warm = (arm == Arm::Warm).then_some(warm_start).flatten();
            for fold in 0..plan.k {
                for &size in schedule.sizes() {
                    let key = CellKey { arm, fold, size };
                    let fp = Self::cell_fingerprint(&corpus_fp, &plan_fp, config, key, warm);
                    match existing.get(&key) {
                        Some(rec) if self.store.is_complete(rec, &fp) => {
                            done.insert(key, rec.clone());
                        }
                        _ => todo.push((key, fp)),
                    }
                }
            }
        }
        let skipped = done.len();
        let executed = todo.len();

        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<Result<RunRecord>>();
        let workers = self.jobs.min(todo.len()).max(1);
        let mut first_err = None;
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (todo, next) = (&todo, &next);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some((key, fp)) = todo.get(i) else { break };
                    let warm = (key.arm == Arm::Warm).then_some(warm_start).flatten();
                    let rec = self.run_cell_inner(corpus, plan, *key, config, warm, fp.clone());
                    if tx.send(rec).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            // Single writer: only this thread appends to the store.
            for rec in rx {
                match rec.and_then(|r| self.store.append(&r).map(|_| r)) {
                    Ok(r) => {
                        log::info!(
                            "{} {} fold={} size={} -> {:?}",
                            r.task_id,
                            r.arm,
                            r.fold,
                            r.train_size_requested,
                            r.primary_score().map(Score::rounded)
                        );
                        done.insert(r.key(), r);
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
        });
        if let Some(e) = first_err {
            return Err(e);
        }

        Ok(CurveRun {
            records: done.into_values().collect(),
            executed,
            skipped,
        })
    }

    /// Trains one model on the whole corpus and saves it to `out_dir`.
    pub fn train_full(
        backend: &dyn Backend,
        corpus: &Corpus,
        config: &TrainConfig,
        warm_start: Option<&CheckpointRef>,
        out_dir: &Path,
    ) -> Result<CheckpointRef> {
        if corpus.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot train on an empty corpus".into(),
            ));
        }
        let mut config = config.clone();
        config.init_checkpoint = warm_start.cloned();
        let handle = backend::train(backend, &corpus.examples, &corpus.schema, &config)?;
        backend::save(&handle, out_dir)
    }
}

pub fn plan_fingerprint(plan: &FoldPlan) -> String {
    let mut fp = Fingerprinter::new("plan/v1");
    fp.str(&plan.to_json());
    fp.hex()
}

/// Mean / min / max of the primary metric across folds for one (size, arm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub size: usize,
    pub arm: Arm,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub folds: usize,
    pub train_size_min: usize,
    pub train_size_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub task_id: String,
    pub metric: MetricKind,
    /// Sorted by (arm, size).
    pub cells: Vec<SummaryCell>,
    /// Failed records left out of the aggregates.
    pub failed: usize,
}

impl CurveSummary {
    pub fn cell(&self, size: usize, arm: Arm) -> Option<&SummaryCell> {
        self.cells.iter().find(|c| c.size == size && c.arm == arm)
    }

    pub fn series(&self, arm: Arm) -> impl Iterator<Item = &SummaryCell> {
        self.cells.iter().filter(move |c| c.arm == arm)
    }
}

/// Aggregates records of one task; arms are never pooled.
pub fn summarize(records: &[RunRecord]) -> Result<CurveSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no records to summarize".into()))?;
    if let Some(other) = records.iter().find(|r| r.task_id != first.task_id) {
        return Err(Error::InvalidArgument(format!(
            "records mix tasks {} and {}",
            first.task_id, other.task_id
        )));
    }
    let metric = first.primary_metric;

    // (fold, primary value, actual training size) per (arm, requested size).
    type Group = Vec<(usize, f64, usize)>;
    let mut groups: HashMap<(Arm, usize), Group> = HashMap::new();
    let mut failed = 0;
    for r in records {
        match (r.is_ok(), r.primary_score()) {
            (true, Some(score)) => groups
                .entry((r.arm, r.train_size_requested))
                .or_default()
                .push((r.fold, score.value, r.train_size_actual)),
            _ => failed += 1,
        }
    }

    let mut cells: Vec<SummaryCell> = groups
        .into_iter()
        .map(|((arm, size), mut vals)| {
            // Fixed summation order regardless of record order.
            vals.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let n = vals.len();
            let sum: f64 = vals.iter().map(|v| v.1).sum();
            let min = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            let max = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            // Guard the invariant against rounding in the division.
            let mean = (sum / n as f64).clamp(min, max);
            SummaryCell {
                size,
                arm,
                mean,
                min,
                max,
                folds: n,
                train_size_min: vals.iter().map(|v| v.2).min().unwrap_or(0),
                train_size_max: vals.iter().map(|v| v.2).max().unwrap_or(0),
            }
        })
        .collect();
    cells.sort_by_key(|c| (c.arm, c.size));

    Ok(CurveSummary {
        task_id: first.task_id.clone(),
        metric,
        cells,
        failed,
    })
}
