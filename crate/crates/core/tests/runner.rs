use std::fs;

use learncurve::backend::{self, NaiveBayesBackend, TrainConfig};
use learncurve::corpus::{majority_label, Corpus};
use learncurve::folds::{make_folds, SubsampleSchedule};
use learncurve::metrics;
use learncurve::runner::{summarize, Arm, RunStore, Runner};
use learncurve::schema::{task5, task6};
use learncurve::synth::{generate, SynthSpec};
use learncurve::Error;

fn separable(n: usize, seed: u64) -> Corpus {
    let mut spec = SynthSpec::new(n, seed);
    spec.class_weights = vec![3.0, 1.0];
    generate(&task5(), &spec)
}

#[test]
fn more_data_scores_at_least_as_well() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let corpus = separable(1500, 1);
    let plan = make_folds(&corpus, 5, 1).unwrap();
    let runner = Runner::new(&NaiveBayesBackend, &store);
    let cfg = TrainConfig::default();
    let small = runner.run_cell(&corpus, &plan, 0, 10, &cfg, None).unwrap();
    let big = runner
        .run_cell(&corpus, &plan, 0, 1000, &cfg, None)
        .unwrap();
    let (s, b) = (
        small.primary_score().unwrap().value,
        big.primary_score().unwrap().value,
    );
    assert!(b >= s, "{b} < {s}");
    assert_eq!(big.train_size_actual, 1000);
    assert!(store.root().join(big.predictions_path.unwrap()).is_file());
}

#[test]
fn oversized_request_is_capped() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let corpus = separable(100, 2);
    let plan = make_folds(&corpus, 5, 0).unwrap();
    let rec = Runner::new(&NaiveBayesBackend, &store)
        .run_cell(&corpus, &plan, 3, 8000, &TrainConfig::default(), None)
        .unwrap();
    assert_eq!(rec.train_size_requested, 8000);
    assert_eq!(rec.train_size_actual, 80);
    assert!(rec.is_ok());
}

#[test]
fn curve_resume_and_summary_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("store")).unwrap();
    let t6 = generate(&task6(), &SynthSpec::new(300, 5));
    let origin = Runner::train_full(
        &NaiveBayesBackend,
        &t6,
        &TrainConfig::default(),
        None,
        &dir.path().join("t6-full"),
    )
    .unwrap();

    let corpus = separable(400, 3);
    let plan = make_folds(&corpus, 5, 9).unwrap();
    let schedule = SubsampleSchedule::new(vec![10, 50, 100]).unwrap();
    let cfg = TrainConfig::default();
    let runner = Runner::new(&NaiveBayesBackend, &store).with_jobs(3);
    let arms = [Arm::Plain, Arm::Warm];

    let first = runner
        .run_curve(&corpus, &plan, &schedule, &cfg, &arms, Some(&origin))
        .unwrap();
    assert_eq!(first.records.len(), 2 * 5 * 3);
    assert_eq!(first.executed, 30);
    for r in &first.records {
        match r.arm {
            Arm::Plain => assert!(r.warm_start.is_none() && r.warm_start_fingerprint.is_none()),
            Arm::Warm => {
                assert_eq!(r.warm_start.as_deref(), Some("smm4h-task6"));
                assert_eq!(
                    r.warm_start_fingerprint.as_deref(),
                    Some(origin.config_fingerprint.as_str())
                );
            }
        }
    }

    let again = runner
        .run_curve(&corpus, &plan, &schedule, &cfg, &arms, Some(&origin))
        .unwrap();
    assert_eq!((again.executed, again.skipped), (0, 30));
    assert_eq!(again.records, first.records);

    for r in first.records.iter().filter(|r| r.arm == Arm::Warm).take(3) {
        fs::remove_file(store.root().join(r.predictions_path.as_ref().unwrap())).unwrap();
    }
    let resumed = runner
        .run_curve(&corpus, &plan, &schedule, &cfg, &arms, Some(&origin))
        .unwrap();
    assert_eq!(resumed.executed, 3);
    assert_eq!(resumed.records.len(), 30);

    // Re-run cells reproduce their scores exactly.
    for (a, b) in first.records.iter().zip(&resumed.records) {
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.seed, b.seed);
    }

    let in_process = summarize(&resumed.records).unwrap();
    let persisted: Vec<_> = store.latest("smm4h-task5").unwrap().into_values().collect();
    assert_eq!(summarize(&persisted).unwrap(), in_process);
    for c in &in_process.cells {
        assert!(c.min <= c.mean && c.mean <= c.max);
        assert_eq!(c.folds, 5);
    }
}

#[test]
fn serial_and_parallel_runs_agree() {
    let corpus = separable(300, 4);
    let plan = make_folds(&corpus, 5, 2).unwrap();
    let schedule = SubsampleSchedule::new(vec![10, 100]).unwrap();
    let mut scores = Vec::new();
    for jobs in [1, 4] {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run = Runner::new(&NaiveBayesBackend, &store)
            .with_jobs(jobs)
            .run_curve(
                &corpus,
                &plan,
                &schedule,
                &TrainConfig::default(),
                &[Arm::Plain],
                None,
            )
            .unwrap();
        scores.push(
            run.records
                .iter()
                .map(|r| r.scores.clone())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(scores[0], scores[1]);
}

#[test]
fn plan_corpus_mismatch_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let corpus = separable(50, 1);
    let plan = make_folds(&separable(50, 2), 5, 0).unwrap();
    let err = Runner::new(&NaiveBayesBackend, &store)
        .run_curve(
            &corpus,
            &plan,
            &SubsampleSchedule::default(),
            &TrainConfig::default(),
            &[Arm::Plain],
            None,
        )
        .unwrap_err();
    assert!(matches!(err, Error::PlanMismatch(_)));
    assert!(store.load_all().unwrap().is_empty());
}

#[test]
fn warm_arm_requires_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let corpus = separable(50, 1);
    let plan = make_folds(&corpus, 5, 0).unwrap();
    let err = Runner::new(&NaiveBayesBackend, &store)
        .run_curve(
            &corpus,
            &plan,
            &SubsampleSchedule::default(),
            &TrainConfig::default(),
            &[Arm::Warm],
            None,
        )
        .unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[cfg(unix)]
#[test]
fn failed_cells_are_recorded_and_excluded() {
    use learncurve::backend::ExternalBackend;
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let corpus = separable(50, 1);
    let plan = make_folds(&corpus, 5, 0).unwrap();
    let be = ExternalBackend::new("/bin/false");
    let cfg = TrainConfig {
        backend_id: "external".into(),
        ..TrainConfig::default()
    };
    let run = Runner::new(&be, &store)
        .run_curve(
            &corpus,
            &plan,
            &SubsampleSchedule::new(vec![10]).unwrap(),
            &cfg,
            &[Arm::Plain],
            None,
        )
        .unwrap();
    assert_eq!(run.records.len(), 5);
    assert!(run
        .records
        .iter()
        .all(|r| !r.is_ok() && r.scores.is_empty() && r.error.is_some()));
    let s = summarize(&run.records).unwrap();
    assert_eq!(s.failed, 5);
    assert!(s.cells.is_empty());
}

#[test]
fn full_training_beats_majority_baseline_on_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SynthSpec::new(2000, 8);
    spec.class_weights = vec![5.0, 1.0];
    spec.label_noise = 0.2;
    let corpus = generate(&task5(), &spec);
    let ckpt = Runner::train_full(
        &NaiveBayesBackend,
        &corpus,
        &TrainConfig::default(),
        None,
        dir.path(),
    )
    .unwrap();
    let handle = backend::load(&NaiveBayesBackend, &ckpt).unwrap();
    assert_eq!(handle.provenance().training_examples, 2000);

    let texts: Vec<&str> = corpus.examples.iter().map(|e| e.text.as_str()).collect();
    let gold: Vec<&str> = corpus.examples.iter().map(|e| e.label.as_str()).collect();
    let pred = backend::predict(&handle, &texts).unwrap();
    let majority = majority_label(&corpus.schema, &corpus.examples).unwrap();
    let baseline = vec![majority.as_str(); gold.len()];
    let model_f1 = metrics::primary(&metrics::confusion(&gold, &pred, &corpus.schema).unwrap())
        .unwrap()
        .value;
    let base_f1 = metrics::primary(&metrics::confusion(&gold, &baseline, &corpus.schema).unwrap())
        .unwrap()
        .value;
    assert!(model_f1 >= base_f1, "{model_f1} < {base_f1}");
    assert!(Runner::train_full(
        &NaiveBayesBackend,
        &Corpus::empty(task5()),
        &TrainConfig::default(),
        None,
        dir.path()
    )
    .is_err());
}
