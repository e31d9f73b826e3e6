use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use learncurve::cmd::{self, RunCurveOptions};
use learncurve::folds::{FoldPlan, DEFAULT_SCHEDULE};
use learncurve::runner::{Arm, RunStore};
use learncurve::synth::SynthSpec;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_learncurve"))
        .args(args)
        .env_remove("LEARNCURVE_STORE")
        .env_remove("LEARNCURVE_EXTERNAL_BACKEND")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn ingest_matches_library_and_drops_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(
        dir.path(),
        "train.tsv",
        "id\ttext\tlabel\n1\tgot tested today\tpotential\n2\tstay home\tOther\n",
    );
    let dev = write(
        dir.path(),
        "dev.tsv",
        "3\tstay home\tOther\n4\tfever and cough\t1\n",
    );
    let via_cli = dir.path().join("cli.jsonl");
    let out = bin(&[
        "ingest",
        "--schema",
        "smm4h-task5",
        "-o",
        s(&via_cli),
        s(&train),
        s(&dev),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let via_lib = dir.path().join("lib.jsonl");
    let m = cmd::ingest(&[train, dev], "smm4h-task5", &via_lib).unwrap();
    assert_eq!((m.examples, m.removed_duplicates), (3, 1));
    assert_eq!(fs::read(&via_cli).unwrap(), fs::read(&via_lib).unwrap());
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = write(dir.path(), "a.tsv", "1\tx\tOther\n");
    let out = bin(&[
        "ingest",
        "--schema",
        "no-such-task",
        "-o",
        "x.jsonl",
        s(&tsv),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(bin(&["run-curve"]).status.code(), Some(2));

    let bad = write(dir.path(), "bad.tsv", "1\tx\tOther\n2\tonly two columns\n");
    let out = bin(&[
        "ingest",
        "--schema",
        "smm4h-task5",
        "-o",
        s(&dir.path().join("o")),
        s(&bad),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));
}

#[test]
fn score_gold_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(
        dir.path(),
        "gold.tsv",
        "a\tself\nb\tlit-news\nc\tnonpersonal\n",
    );
    let out = bin(&[
        "score",
        "--schema",
        "smm4h-task6",
        "--gold",
        s(&gold),
        "--pred",
        s(&gold),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["primary_metric"], "micro_f1");
    assert_eq!(report["scores"][0]["value"], 1.0);
    assert_eq!(report["items"], 3);
}

#[test]
fn ensemble_votes() {
    let dir = tempfile::tempdir().unwrap();
    let rows = ["Other", "Other", "potential", "potential", "Other"];
    let members: Vec<PathBuf> = rows
        .iter()
        .enumerate()
        .map(|(i, l)| {
            write(
                dir.path(),
                &format!("m{i}.tsv"),
                &format!("x\tpotential\ny\t{l}\n"),
            )
        })
        .collect();
    let out_path = dir.path().join("fused.tsv");
    let mut args = vec!["ensemble", "--schema", "smm4h-task5", "-o", s(&out_path)];
    args.extend(members.iter().map(|p| s(p)));
    let out = bin(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read_to_string(&out_path).unwrap(),
        "x\tpotential\ny\tOther\n"
    );
    assert!(out_path.with_extension("tsv.manifest.json").is_file());
}

#[test]
fn run_curve_defaults_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("synth.tsv");
    let mut spec = SynthSpec::new(300, 3);
    spec.label_noise = 0.1;
    cmd::synth("smm4h-task5", &spec, &tsv).unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    cmd::ingest(&[tsv], "smm4h-task5", &corpus).unwrap();

    let store = dir.path().join("store");
    let out = bin(&["run-curve", "--corpus", s(&corpus), "--store", s(&store)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = RunStore::open(&store).unwrap().load_all().unwrap();
    assert_eq!(records.len(), 5 * DEFAULT_SCHEDULE.len());
    assert!(records.iter().all(|r| r.arm == Arm::Plain));
    let plan = FoldPlan::load(&store.join("smm4h-task5_plan.json")).unwrap();
    assert_eq!(plan.k, 5);

    let plots = dir.path().join("plots");
    let out = bin(&["plot", "--store", s(&store), "-o", s(&plots)]);
    assert!(out.status.success());
    let csv = plots.join("smm4h-task5_curve.csv");
    let svg = plots.join("smm4h-task5_curve.svg");
    assert!(fs::read_to_string(&csv)
        .unwrap()
        .starts_with("size,arm,mean,min,max,folds\n"));

    let again = dir.path().join("again.svg");
    let out = bin(&[
        "plot",
        "--from-csv",
        s(&csv),
        "--task",
        "smm4h-task5",
        "-o",
        s(&again),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&svg).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn run_curve_custom_sizes_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("synth.tsv");
    cmd::synth("smm4h-task6", &SynthSpec::new(200, 4), &tsv).unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    cmd::ingest(&[tsv], "smm4h-task6", &corpus).unwrap();

    let store = dir.path().join("cli");
    let out = bin(&[
        "run-curve",
        "--corpus",
        s(&corpus),
        "--store",
        s(&store),
        "--sizes",
        "10,50",
        "--seed",
        "11",
    ]);
    assert!(out.status.success());
    let mut opts = RunCurveOptions::new(&corpus, dir.path().join("lib"));
    opts.seed = 11;
    opts.schedule = learncurve::folds::SubsampleSchedule::parse("10,50").unwrap();
    let lib = cmd::run_curve(&opts).unwrap();
    assert_eq!(lib.run.records.len(), 10);

    let cli_records = RunStore::open(&store).unwrap().load_all().unwrap();
    let scores = |rs: &[learncurve::runner::RunRecord]| {
        let mut v: Vec<_> = rs
            .iter()
            .map(|r| (r.fold, r.train_size_requested, r.scores.clone()))
            .collect();
        v.sort_by_key(|r| (r.0, r.1));
        v
    };
    assert_eq!(scores(&cli_records), scores(&lib.run.records));
    assert_eq!(
        fs::read(store.join("smm4h-task6_plan.json")).unwrap(),
        fs::read(dir.path().join("lib/smm4h-task6_plan.json")).unwrap()
    );

    let out = bin(&[
        "run-curve",
        "--corpus",
        s(&corpus),
        "--store",
        s(&store),
        "--sizes",
        "10,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_full_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("synth.tsv");
    cmd::synth("smm4h-task5", &SynthSpec::new(200, 5), &tsv).unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    cmd::ingest(std::slice::from_ref(&tsv), "smm4h-task5", &corpus).unwrap();
    let ckpt = dir.path().join("ckpt");
    let out = bin(&["train-full", "--corpus", s(&corpus), "-o", s(&ckpt)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let preds = dir.path().join("preds.tsv");
    let out = bin(&[
        "predict",
        "--checkpoint",
        s(&ckpt),
        "--input",
        s(&tsv),
        "-o",
        s(&preds),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = cmd::score(&tsv, &preds, "smm4h-task5").unwrap();
    assert_eq!(report.items, 200);
}
