//! Adapter for a pretrained-encoder fine-tuner living in another process.
//!
//! The harness owns folds, subsampling, scoring and bookkeeping; the
//! external program only trains and predicts. Invocations:
//!
//! ```text
//! <program> train --model-name NAME --train train.jsonl --schema schema.json \
//!           --config config.json --out MODEL_DIR [--init CHECKPOINT_DIR]
//! <program> predict --model MODEL_DIR --input texts.jsonl
//! ```
//!
//! `train.jsonl` holds `{"id","text","label"}` objects, `texts.jsonl` holds
//! `{"text"}` objects, and `predict` prints one label per line on stdout.
//! `--init` points at a checkpoint from another task: the program loads the
//! encoder weights and builds a fresh classification head for the schema
//! it is given. Everything in `MODEL_DIR` becomes the checkpoint payload.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{Backend, CheckpointManifest, InitCheckpoint, Model, TrainConfig};
use crate::corpus::LabeledExample;
use crate::error::{Error, Result};
use crate::schema::TaskSchema;

pub const BACKEND_ID: &str = "external";
pub const DEFAULT_MODEL_NAME: &str = "distilbert-base-uncased";

const MODEL_SUBDIR: &str = "model";

static SCRATCH_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    program: PathBuf,
    model_name: String,
}

impl ExternalBackend {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalBackend {
            program: program.into(),
            model_name: DEFAULT_MODEL_NAME.to_string(),
        }
    }

    pub fn with_model_name(mut self, name: impl Into<String>) -> Self {
        self.model_name = name.into();
        self
    }

    fn run(&self, args: &[&std::ffi::OsStr]) -> Result<Vec<u8>> {
        let out = Command::new(&self.program)
            .args(args)
            .output()
            .map_err(|e| Error::Backend(format!("cannot run {}: {e}", self.program.display())))?;
        if !out.status.success() {
            return Err(Error::Backend(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(out.stdout)
    }
}

/// Unique scratch directory under the system temp dir, removed on drop.
struct Scratch(PathBuf);

impl Scratch {
    fn new() -> Result<Self> {
        let n = SCRATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = std::env::temp_dir().join(format!("learncurve-{}-{n}", std::process::id()));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Scratch(dir))
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, &row)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn copy_dir(from: &Path, to: &Path) -> Result<()> {
    fs::create_dir_all(to).map_err(|e| Error::io(to, e))?;
    for entry in fs::read_dir(from).map_err(|e| Error::io(from, e))? {
        let entry = entry.map_err(|e| Error::io(from, e))?;
        let src = entry.path();
        let dst = to.join(entry.file_name());
        if src.is_dir() {
            copy_dir(&src, &dst)?;
        } else {
            fs::copy(&src, &dst).map_err(|e| Error::io(&src, e))?;
        }
    }
    Ok(())
}

struct ExternalModel {
    backend: ExternalBackend,
    dir: PathBuf,
    // Keeps freshly trained weights alive until saved or dropped.
    _scratch: Option<Scratch>,
}

impl Model for ExternalModel {
    fn predict(&self, texts: &[&str]) -> Result<Vec<String>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let scratch = Scratch::new()?;
        let input = scratch.0.join("texts.jsonl");
        write_jsonl(
            &input,
            texts.iter().map(|t| serde_json::json!({ "text": t })),
        )?;
        let stdout = self.backend.run(&[
            "predict".as_ref(),
            "--model".as_ref(),
            self.dir.as_os_str(),
            "--input".as_ref(),
            input.as_os_str(),
        ])?;
        let stdout = String::from_utf8(stdout)
            .map_err(|_| Error::Backend("predictions are not UTF-8".into()))?;
        Ok(stdout.lines().map(|l| l.trim_end().to_string()).collect())
    }

    fn save_payload(&self, dir: &Path) -> Result<Vec<String>> {
        copy_dir(&self.dir, &dir.join(MODEL_SUBDIR))?;
        Ok(vec![MODEL_SUBDIR.to_string()])
    }
}

impl Backend for ExternalBackend {
    fn id(&self) -> &str {
        BACKEND_ID
    }

    fn model_name(&self) -> Option<&str> {
        Some(&self.model_name)
    }

    fn train(
        &self,
        examples: &[LabeledExample],
        schema: &TaskSchema,
        config: &TrainConfig,
        init: Option<InitCheckpoint<'_>>,
    ) -> Result<Box<dyn Model>> {
        let scratch = Scratch::new()?;
        let train_path = scratch.0.join("train.jsonl");
        let schema_path = scratch.0.join("schema.json");
        let config_path = scratch.0.join("config.json");
        let out = scratch.0.join(MODEL_SUBDIR);
        write_jsonl(&train_path, examples)?;
        fs::write(&schema_path, serde_json::to_vec(schema)?)
            .map_err(|e| Error::io(&schema_path, e))?;
        fs::write(&config_path, serde_json::to_vec(config)?)
            .map_err(|e| Error::io(&config_path, e))?;

        let init_dir = init.map(|i| i.dir.join(MODEL_SUBDIR));
        let mut args: Vec<&std::ffi::OsStr> = vec![
            "train".as_ref(),
            "--model-name".as_ref(),
            self.model_name.as_ref(),
            "--train".as_ref(),
            train_path.as_os_str(),
            "--schema".as_ref(),
            schema_path.as_os_str(),
            "--config".as_ref(),
            config_path.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ];
        if let Some(dir) = &init_dir {
            args.push("--init".as_ref());
            args.push(dir.as_os_str());
        }
        self.run(&args)?;
        if !out.is_dir() {
            return Err(Error::Backend(format!(
                "{} produced no model directory",
                self.program.display()
            )));
        }
        Ok(Box::new(ExternalModel {
            backend: self.clone(),
            dir: out,
            _scratch: Some(scratch),
        }))
    }

    fn load_model(&self, dir: &Path, manifest: &CheckpointManifest) -> Result<Box<dyn Model>> {
        if let Some(name) = &manifest.model_name {
            if name != &self.model_name {
                return Err(Error::Backend(format!(
                    "checkpoint was fine-tuned from {name:?}, backend is configured for {:?}",
                    self.model_name
                )));
            }
        }
        let model_dir = dir.join(MODEL_SUBDIR);
        if !model_dir.is_dir() {
            return Err(Error::MissingArtifact(model_dir));
        }
        Ok(Box::new(ExternalModel {
            backend: self.clone(),
            dir: model_dir,
            _scratch: None,
        }))
    }
}
