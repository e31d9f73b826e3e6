use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use learncurve::cmd::{self, BackendChoice, RunCurveOptions};
use learncurve::ensemble::TieRule;
use learncurve::folds::SubsampleSchedule;
use learncurve::runner::{Arm, STORE_ENV};
use learncurve::synth::SynthSpec;
use learncurve::Error;

#[derive(Parser)]
#[command(
    name = "learncurve",
    version,
    about = "k-fold learning curves for tweet classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// Backend id: reference-nb or external.
    #[arg(long, default_value = "reference-nb")]
    backend: String,
    /// Program implementing the external backend protocol.
    #[arg(long, env = "LEARNCURVE_EXTERNAL_BACKEND")]
    backend_program: Option<PathBuf>,
}

impl From<BackendArgs> for BackendChoice {
    fn from(a: BackendArgs) -> Self {
        BackendChoice {
            id: a.backend,
            external_program: a.backend_program,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Merge labeled TSV pools, drop duplicate texts, write a JSON-lines corpus.
    Ingest {
        #[arg(long)]
        schema: String,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Write a seeded synthetic TSV corpus.
    Synth {
        #[arg(long)]
        schema: String,
        #[arg(long, default_value_t = 1000)]
        examples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Comma-separated class weights in schema order.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Train on a whole corpus and save a checkpoint.
    TrainFull {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint from another task to warm-start from.
        #[arg(long)]
        warm_from: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run every (fold, size, arm) cell of a learning curve.
    RunCurve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = STORE_ENV)]
        store: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        stratified: bool,
        /// Comma-separated training sizes; defaults to the 16-size schedule.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "plain")]
        arms: Vec<String>,
        #[arg(long)]
        warm_from: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Write curve CSV and SVG for every task in a run store, or re-render one CSV.
    Plot {
        #[arg(long, env = STORE_ENV, required_unless_present = "from_csv")]
        store: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        /// Re-render this CSV to the SVG path given by --output.
        #[arg(long)]
        from_csv: Option<PathBuf>,
        #[arg(long, default_value = "")]
        task: String,
    },
    /// Score a prediction file against gold labels (JSON report on stdout).
    Score {
        #[arg(long)]
        schema: String,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Majority-vote several prediction files into one.
    Ensemble {
        #[arg(long)]
        schema: String,
        #[arg(long, default_value = "schema_order")]
        tie_rule: String,
        #[arg(long)]
        train_majority: Option<String>,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(required = true)]
        members: Vec<PathBuf>,
    },
    /// Predict an unlabeled TSV (id, text) with a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

fn run(command: Command) -> Result<bool, Error> {
    match command {
        Command::Ingest {
            schema,
            output,
            inputs,
        } => {
            let m = cmd::ingest(&inputs, &schema, &output)?;
            println!(
                "{}: {} examples from {} file(s), {} duplicate(s) removed ({} with conflicting labels)",
                output.display(),
                m.examples,
                m.sources.len(),
                m.removed_duplicates,
                m.label_conflicts
            );
        }
        Command::Synth {
            schema,
            examples,
            seed,
            noise,
            weights,
            output,
        } => {
            let mut spec = SynthSpec::new(examples, seed);
            spec.label_noise = noise;
            spec.class_weights = weights;
            let n = cmd::synth(&schema, &spec, &output)?;
            println!("{}: {n} examples", output.display());
        }
        Command::TrainFull {
            corpus,
            seed,
            warm_from,
            output,
            backend,
        } => {
            let ckpt = cmd::train_full(
                &corpus,
                &backend.into(),
                seed,
                warm_from.as_deref(),
                &output,
            )?;
            println!("{}", serde_json::to_string_pretty(&ckpt)?);
        }
        Command::RunCurve {
            corpus,
            store,
            k,
            seed,
            stratified,
            sizes,
            arms,
            warm_from,
            jobs,
            backend,
        } => {
            let mut opts = RunCurveOptions::new(corpus, store);
            opts.k = k;
            opts.seed = seed;
            opts.stratified = stratified;
            if let Some(s) = sizes {
                opts.schedule = SubsampleSchedule::parse(&s)?;
            }
            opts.arms = arms
                .iter()
                .map(|a| a.parse::<Arm>())
                .collect::<Result<_, _>>()?;
            opts.warm_from = warm_from;
            opts.jobs = jobs;
            opts.backend = backend.into();
            let out = cmd::run_curve(&opts)?;
            println!(
                "plan {}; {} cell(s) run, {} already complete",
                out.plan_path.display(),
                out.run.executed,
                out.run.skipped
            );
            print!("{}", cmd::summary_table(&out.summary));
            let failed = out.failed();
            if failed > 0 {
                eprintln!("{failed} cell(s) failed:");
                for r in out.run.records.iter().filter(|r| !r.is_ok()) {
                    eprintln!(
                        "  {} fold={} size={}: {}",
                        r.arm,
                        r.fold,
                        r.train_size_requested,
                        r.error.as_deref().unwrap_or("?")
                    );
                }
                return Ok(false);
            }
        }
        Command::Plot {
            store,
            output,
            from_csv,
            task,
        } => match from_csv {
            Some(csv) => {
                cmd::render_csv(&csv, &task, &output)?;
                println!("{}", output.display());
            }
            None => {
                let store = store.expect("clap enforces --store");
                for p in cmd::plot(&store, &output)? {
                    println!("{}: {} {}", p.task_id, p.csv.display(), p.svg.display());
                }
            }
        },
        Command::Score { schema, gold, pred } => {
            let report = cmd::score(&gold, &pred, &schema)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Ensemble {
            schema,
            tie_rule,
            train_majority,
            output,
            members,
        } => {
            let rule: TieRule = tie_rule.parse()?;
            let m = cmd::ensemble(&members, &schema, rule, train_majority.as_deref(), &output)?;
            println!(
                "{}: {} predictions fused from {} members",
                output.display(),
                m.predictions,
                m.members.len()
            );
        }
        Command::Predict {
            checkpoint,
            input,
            output,
            backend,
        } => {
            let n = cmd::predict(&checkpoint, &input, &backend.into(), &output)?;
            println!("{}: {n} predictions", output.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors itself.
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cmd::exit_code(&e) as u8)
        }
    }
}
