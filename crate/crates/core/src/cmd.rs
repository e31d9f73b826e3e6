//! Command implementations behind the `learncurve` binary. Each command is
//! a thin composition of library operations and returns what the binary
//! prints or writes, so it can be exercised without spawning a process.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::backend::{self, CheckpointRef, TrainConfig};
use crate::corpus::{self, CorpusManifest};
use crate::ensemble::{majority_vote, EnsembleManifest, MemberInfo, TieRule, VoteSet};
use crate::error::{Error, Result};
use crate::folds::{make_folds_with, FoldPlan, SubsampleSchedule};
use crate::metrics::{self, Score};
use crate::predictions::{self, Predictions};
use crate::report::CurveArtifact;
use crate::runner::{summarize, Arm, CurveRun, CurveSummary, RunStore, Runner};
use crate::schema::{self, TaskSchema};
use crate::synth::{self, SynthSpec};

/// Exit status for a failed command: 2 for usage errors, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Reads TSV pools, merges them in order, drops duplicate texts, and writes
/// `output` (JSON lines) plus its manifest.
pub fn ingest(inputs: &[PathBuf], schema_id: &str, output: &Path) -> Result<CorpusManifest> {
    let schema = schema::resolve(schema_id)?;
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no input files".into()));
    }
    let parts = inputs
        .iter()
        .map(|p| corpus::read_tsv(p, &schema))
        .collect::<Result<Vec<_>>>()?;
    let merged = corpus::merge_and_dedup(&parts)?;
    corpus::save_jsonl(&merged, output)
}

/// Writes a synthetic TSV corpus.
pub fn synth(schema_id: &str, spec: &SynthSpec, output: &Path) -> Result<usize> {
    let schema = schema::resolve(schema_id)?;
    let corpus = synth::generate(&schema, spec);
    let mut out = String::new();
    for ex in &corpus.examples {
        let _ = writeln!(out, "{}\t{}\t{}", ex.id, ex.text, ex.label);
    }
    fs::write(output, out).map_err(|e| Error::io(output, e))?;
    Ok(corpus.len())
}

#[derive(Debug, Clone)]
pub struct BackendChoice {
    pub id: String,
    pub external_program: Option<PathBuf>,
}

impl Default for BackendChoice {
    fn default() -> Self {
        BackendChoice {
            id: backend::reference::BACKEND_ID.to_string(),
            external_program: None,
        }
    }
}

fn base_config(choice: &BackendChoice, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        backend_id: choice.id.clone(),
        ..TrainConfig::default()
    }
}

/// Trains on an entire ingested corpus and saves a checkpoint.
pub fn train_full(
    corpus_path: &Path,
    choice: &BackendChoice,
    seed: u64,
    warm_from: Option<&Path>,
    out: &Path,
) -> Result<CheckpointRef> {
    let (corpus, _) = corpus::load_jsonl(corpus_path)?;
    let be = backend::by_id(&choice.id, choice.external_program.clone())?;
    let warm = warm_from.map(CheckpointRef::from_dir).transpose()?;
    Runner::train_full(
        be.as_ref(),
        &corpus,
        &base_config(choice, seed),
        warm.as_ref(),
        out,
    )
}

#[derive(Debug, Clone)]
pub struct RunCurveOptions {
    pub corpus: PathBuf,
    pub store: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub schedule: SubsampleSchedule,
    pub backend: BackendChoice,
    pub arms: Vec<Arm>,
    pub warm_from: Option<PathBuf>,
    pub jobs: usize,
}

impl RunCurveOptions {
    pub fn new(corpus: impl Into<PathBuf>, store: impl Into<PathBuf>) -> Self {
        RunCurveOptions {
            corpus: corpus.into(),
            store: store.into(),
            k: crate::folds::DEFAULT_K,
            seed: 0,
            stratified: false,
            schedule: SubsampleSchedule::default(),
            backend: BackendChoice::default(),
            arms: vec![Arm::Plain],
            warm_from: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunCurveOutcome {
    pub plan_path: PathBuf,
    pub run: CurveRun,
    pub summary: CurveSummary,
}

impl RunCurveOutcome {
    pub fn failed(&self) -> usize {
        self.run.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Loads the store's fold plan for the corpus's task, or builds and saves one.
pub fn plan_for(
    store: &RunStore,
    corpus: &corpus::Corpus,
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<(FoldPlan, PathBuf)> {
    let path = store.plan_path(&corpus.schema.task_id);
    if path.exists() {
        let plan = FoldPlan::load(&path)?;
        if plan.k != k || plan.seed != seed || plan.stratified != stratified {
            return Err(Error::InvalidArgument(format!(
                "{} holds a plan with k={} seed={} stratified={}; use a fresh store or matching flags",
                path.display(),
                plan.k,
                plan.seed,
                plan.stratified
            )));
        }
        plan.check_corpus(corpus)?;
        return Ok((plan, path));
    }
    let plan = make_folds_with(corpus, k, seed, stratified)?;
    plan.save(&path)?;
    Ok((plan, path))
}

pub fn run_curve(opts: &RunCurveOptions) -> Result<RunCurveOutcome> {
    let (corpus, _) = corpus::load_jsonl(&opts.corpus)?;
    let store = RunStore::open(&opts.store)?;
    let (plan, plan_path) = plan_for(&store, &corpus, opts.k, opts.seed, opts.stratified)?;
    let be = backend::by_id(&opts.backend.id, opts.backend.external_program.clone())?;
    let warm = opts
        .warm_from
        .as_deref()
        .map(CheckpointRef::from_dir)
        .transpose()?;
    let config = base_config(&opts.backend, opts.seed);
    let run = Runner::new(be.as_ref(), &store)
        .with_jobs(opts.jobs)
        .run_curve(
            &corpus,
            &plan,
            &opts.schedule,
            &config,
            &opts.arms,
            warm.as_ref(),
        )?;
    let summary = summarize(&run.records)?;
    Ok(RunCurveOutcome {
        plan_path,
        run,
        summary,
    })
}

/// Fixed-width table of a summary, one row per (arm, size).
pub fn summary_table(summary: &CurveSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} ({})\n{:<6} {:>6} {:>7} {:>7} {:>7} {:>5} {:>6}",
        summary.task_id,
        summary.metric.as_str(),
        "arm",
        "size",
        "mean",
        "min",
        "max",
        "folds",
        "n_max"
    );
    for c in &summary.cells {
        let _ = writeln!(
            out,
            "{:<6} {:>6} {:>7.4} {:>7.4} {:>7.4} {:>5} {:>6}",
            c.arm.as_str(),
            c.size,
            c.mean,
            c.min,
            c.max,
            c.folds,
            c.train_size_max
        );
    }
    if summary.failed > 0 {
        let _ = writeln!(out, "failed cells: {}", summary.failed);
    }
    out
}

#[derive(Debug, Clone)]
pub struct PlotOutput {
    pub task_id: String,
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub artifact: CurveArtifact,
}

/// Summarises every task in the store and writes `<task>_curve.csv` and
/// `<task>_curve.svg` into `out_dir`.
pub fn plot(store_root: &Path, out_dir: &Path) -> Result<Vec<PlotOutput>> {
    let store = RunStore::open(store_root)?;
    let tasks: BTreeSet<String> = store.load_all()?.into_iter().map(|r| r.task_id).collect();
    let mut outputs = Vec::new();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for task in tasks {
        let records: Vec<_> = store.latest(&task)?.into_values().collect();
        let summary = summarize(&records)?;
        if summary.cells.is_empty() {
            continue;
        }
        let artifact = CurveArtifact::from_summary(&summary);
        let csv = out_dir.join(format!("{task}_curve.csv"));
        let svg = out_dir.join(format!("{task}_curve.svg"));
        fs::write(&csv, artifact.to_csv()).map_err(|e| Error::io(&csv, e))?;
        fs::write(&svg, artifact.to_svg()).map_err(|e| Error::io(&svg, e))?;
        outputs.push(PlotOutput {
            task_id: task,
            csv,
            svg,
            artifact,
        });
    }
    if outputs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "run store {} has no completed records",
            store_root.display()
        )));
    }
    Ok(outputs)
}

/// Re-renders an SVG from a curve CSV.
pub fn render_csv(csv: &Path, task_id: &str, svg_out: &Path) -> Result<CurveArtifact> {
    let raw = fs::read_to_string(csv).map_err(|e| Error::io(csv, e))?;
    let artifact = CurveArtifact::from_csv(task_id, &raw)?;
    fs::write(svg_out, artifact.to_svg()).map_err(|e| Error::io(svg_out, e))?;
    Ok(artifact)
}

fn score_json(score: &Score) -> Value {
    let rounded: f64 = score.rounded().parse().expect("rounded score parses");
    json!({
        "metric": score.metric.as_str(),
        "value": rounded,
        "exact": format!("{}/{}", score.numerator, score.denominator),
        "support": score.support,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub task_id: String,
    pub primary_metric: &'static str,
    pub items: usize,
    pub scores: Vec<Value>,
    pub confusion: Vec<Value>,
}

/// Reads gold labels from a prediction-format file, or from a
/// three-column corpus TSV.
pub fn read_gold(path: &Path, schema: &TaskSchema) -> Result<Predictions> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let three_cols = raw
        .split(|&b| b == b'\n')
        .next()
        .is_some_and(|l| l.iter().filter(|&&b| b == b'\t').count() == 2);
    if three_cols {
        let c = corpus::parse_tsv(&raw, schema, &path.display().to_string())?;
        Ok(Predictions::new(
            c.examples.into_iter().map(|e| (e.id, e.label)).collect(),
        ))
    } else {
        predictions::parse(&raw, Some(schema), &path.display().to_string())
    }
}

pub fn score(gold: &Path, pred: &Path, schema_id: &str) -> Result<ScoreReport> {
    let schema = schema::resolve(schema_id)?;
    let gold = read_gold(gold, &schema)?;
    let pred = predictions::read(pred, Some(&schema))?;
    let (g, p) = predictions::align(&gold, &pred)?;
    let cm = metrics::confusion(&g, &p, &schema)?;
    let scores = metrics::all_scores(&cm)?;
    Ok(ScoreReport {
        task_id: schema.task_id.clone(),
        primary_metric: schema.primary_metric.as_str(),
        items: g.len(),
        scores: scores.iter().map(score_json).collect(),
        confusion: cm
            .cells()
            .map(|(g, p, n)| json!({ "gold": g, "pred": p, "count": n }))
            .collect(),
    })
}

/// Fuses member prediction files by majority vote into `output`, writing a
/// `<output>.manifest.json` sidecar. Rows follow the first member's order.
pub fn ensemble(
    members: &[PathBuf],
    schema_id: &str,
    tie_rule: TieRule,
    train_majority: Option<&str>,
    output: &Path,
) -> Result<EnsembleManifest> {
    let schema = schema::resolve(schema_id)?;
    if members.is_empty() {
        return Err(Error::InvalidArgument("no prediction files to fuse".into()));
    }
    if tie_rule == TieRule::TrainMajority && train_majority.is_none() {
        return Err(Error::InvalidArgument(
            "tie rule train_majority needs --train-majority".into(),
        ));
    }
    let train_majority = train_majority
        .map(|l| {
            schema
                .canonical(l)
                .map(str::to_string)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown label {l:?}")))
        })
        .transpose()?;

    let files = members
        .iter()
        .map(|p| predictions::read(p, Some(&schema)))
        .collect::<Result<Vec<_>>>()?;
    let reference = &files[0];
    let mut columns = Vec::with_capacity(files.len());
    for f in &files {
        let (_, labels) = predictions::align(reference, f)?;
        columns.push(labels);
    }
    let mut votes = VoteSet::new(columns, schema.clone(), tie_rule);
    votes.train_majority = train_majority.clone();
    let fused = majority_vote(&votes)?;
    let out = Predictions::new(reference.ids().map(str::to_string).zip(fused).collect());
    out.write(output)?;

    let manifest = EnsembleManifest {
        task_id: schema.task_id.clone(),
        tie_rule,
        train_majority,
        members: members
            .iter()
            .zip(&files)
            .map(|(p, f)| MemberInfo {
                path: p.display().to_string(),
                fingerprint: f.fingerprint(),
            })
            .collect(),
        predictions: out.len(),
    };
    let mpath = corpus::manifest_path(output);
    let mut file = fs::File::create(&mpath).map_err(|e| Error::io(&mpath, e))?;
    serde_json::to_writer_pretty(&mut file, &manifest)?;
    file.write_all(b"\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Parses `id<TAB>text` rows (a trailing label column is ignored) for
/// prediction on unlabeled data.
pub fn parse_unlabeled(raw: &[u8], source: &str) -> Result<Vec<(String, String)>> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let line = raw[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        Error::parse(source, line, "invalid UTF-8")
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if i == 0 && (cols == ["id", "text"] || cols == corpus::TSV_HEADER) {
            continue;
        }
        match cols.as_slice() {
            [id, text] | [id, text, _] if !id.is_empty() => {
                rows.push((id.to_string(), text.to_string()));
            }
            _ => {
                return Err(Error::parse(
                    source,
                    i + 1,
                    "expected id<TAB>text[<TAB>label] with a non-empty id",
                ))
            }
        }
    }
    Ok(rows)
}

/// Predicts labels for an unlabeled TSV with a saved checkpoint.
pub fn predict(
    checkpoint: &Path,
    input: &Path,
    choice: &BackendChoice,
    output: &Path,
) -> Result<usize> {
    let ckpt = CheckpointRef::from_dir(checkpoint)?;
    let be = backend::by_id(&choice.id, choice.external_program.clone())?;
    let handle = backend::load(be.as_ref(), &ckpt)?;
    let raw = fs::read(input).map_err(|e| Error::io(input, e))?;
    let rows = parse_unlabeled(&raw, &input.display().to_string())?;
    let texts: Vec<&str> = rows.iter().map(|(_, t)| t.as_str()).collect();
    let labels = backend::predict(&handle, &texts)?;
    let out = Predictions::new(rows.into_iter().map(|(id, _)| id).zip(labels).collect());
    out.write(output)?;
    Ok(out.len())
}
