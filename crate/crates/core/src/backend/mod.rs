//! Classifier backends: the train / predict / save / load contract the
//! harness drives, plus checkpoint manifests.
//!
//! A checkpoint is a directory holding `manifest.json` and backend-private
//! payload files. Warm starts name a checkpoint through [`CheckpointRef`];
//! the backend keeps whatever is task-independent and starts a fresh label
//! head for the new schema.

pub mod external;
pub mod reference;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledExample;
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::schema::TaskSchema;

pub use external::ExternalBackend;
pub use reference::NaiveBayesBackend;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Fine-tuning hyperparameters. Defaults are 3 epochs, batch 64, 500
/// warm-up steps, weight decay 0.01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: u32,
    pub warmup_steps: u32,
    pub weight_decay: f64,
    pub seed: u64,
    #[serde(default)]
    pub init_checkpoint: Option<CheckpointRef>,
    pub backend_id: String,
    /// Backend-specific settings (learning rate, max sequence length, ...)
    /// pinned here so they enter the fingerprint.
    #[serde(default)]
    pub options: BTreeMap<String, String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            batch_size: 64,
            warmup_steps: 500,
            weight_decay: 0.01,
            seed: 0,
            init_checkpoint: None,
            backend_id: reference::BACKEND_ID.to_string(),
            options: BTreeMap::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be a non-negative number, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new("train-config/v1");
        fp.json(self);
        fp.hex()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointRef {
    pub path: String,
    pub schema_of_origin: TaskSchema,
    pub backend_id: String,
    pub config_fingerprint: String,
}

impl CheckpointRef {
    /// Builds a reference from an existing checkpoint directory.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let manifest = CheckpointManifest::read(dir)?;
        Ok(CheckpointRef {
            path: dir.display().to_string(),
            schema_of_origin: manifest.schema,
            backend_id: manifest.backend_id,
            config_fingerprint: manifest.config_fingerprint,
        })
    }

    pub fn dir(&self) -> &Path {
        Path::new(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub backend_id: String,
    pub schema: TaskSchema,
    pub config: TrainConfig,
    pub config_fingerprint: String,
    pub training_fingerprint: String,
    pub training_examples: usize,
    #[serde(default)]
    pub model_name: Option<String>,
    pub payload: Vec<String>,
    pub created_unix_ms: u64,
}

impl CheckpointManifest {
    pub fn from_json(raw: &str) -> Result<Self> {
        let manifest: CheckpointManifest = serde_json::from_str(raw)?;
        manifest.schema.validate()?;
        manifest.config.validate()?;
        if manifest.config.fingerprint() != manifest.config_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: manifest.config_fingerprint.clone(),
                found: manifest.config.fingerprint(),
            });
        }
        if let Some(bad) = manifest
            .payload
            .iter()
            .find(|p| p.is_empty() || p.contains(['/', '\\']) || p.starts_with('.'))
        {
            return Err(Error::Backend(format!("bad payload file name {bad:?}")));
        }
        Ok(manifest)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(Error::MissingArtifact(path));
        }
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&raw)
    }
}

/// A checkpoint handed to a backend for warm starting.
pub struct InitCheckpoint<'a> {
    pub dir: &'a Path,
    pub manifest: &'a CheckpointManifest,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    /// Hub/model name recorded in checkpoint manifests, if any.
    fn model_name(&self) -> Option<&str> {
        None
    }

    fn train(
        &self,
        examples: &[LabeledExample],
        schema: &TaskSchema,
        config: &TrainConfig,
        init: Option<InitCheckpoint<'_>>,
    ) -> Result<Box<dyn Model>>;

    fn load_model(&self, dir: &Path, manifest: &CheckpointManifest) -> Result<Box<dyn Model>>;
}

pub trait Model: Send + Sync {
    fn predict(&self, texts: &[&str]) -> Result<Vec<String>>;

    /// Writes payload files into `dir`, returning their names.
    fn save_payload(&self, dir: &Path) -> Result<Vec<String>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: TrainConfig,
    pub training_fingerprint: String,
    pub training_examples: usize,
}

/// A trained model bound to its schema. Immutable once built.
pub struct ModelHandle {
    model: Box<dyn Model>,
    backend_id: String,
    model_name: Option<String>,
    schema: TaskSchema,
    provenance: Provenance,
}

impl std::fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelHandle")
            .field("backend_id", &self.backend_id)
            .field("schema", &self.schema.task_id)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl ModelHandle {
    pub fn schema(&self) -> &TaskSchema {
        &self.schema
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }
}

pub fn training_fingerprint(examples: &[LabeledExample]) -> String {
    let mut fp = Fingerprinter::new("training-set/v1");
    for ex in examples {
        fp.str(&ex.id).str(&ex.text).str(&ex.label);
    }
    fp.hex()
}

/// Trains a model, warm-starting from `config.init_checkpoint` when set.
pub fn train(
    backend: &dyn Backend,
    examples: &[LabeledExample],
    schema: &TaskSchema,
    config: &TrainConfig,
) -> Result<ModelHandle> {
    config.validate()?;
    if config.backend_id != backend.id() {
        return Err(Error::BackendMismatch {
            expected: backend.id().to_string(),
            found: config.backend_id.clone(),
        });
    }
    if examples.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if let Some(bad) = examples.iter().find(|e| !schema.contains(&e.label)) {
        return Err(Error::UnknownLabel {
            source_name: "<training set>".into(),
            line: 0,
            label: bad.label.clone(),
            schema: schema.task_id.clone(),
        });
    }

    let init_manifest = match &config.init_checkpoint {
        Some(ckpt) => Some(open_checkpoint(backend, ckpt)?),
        None => None,
    };
    let init = config
        .init_checkpoint
        .as_ref()
        .zip(init_manifest.as_ref())
        .map(|(ckpt, manifest)| InitCheckpoint {
            dir: ckpt.dir(),
            manifest,
        });

    let model = backend.train(examples, schema, config, init)?;
    Ok(ModelHandle {
        model,
        backend_id: backend.id().to_string(),
        model_name: backend.model_name().map(str::to_string),
        schema: schema.clone(),
        provenance: Provenance {
            config: config.clone(),
            training_fingerprint: training_fingerprint(examples),
            training_examples: examples.len(),
        },
    })
}

/// Predicts one label per text; every label is checked against the schema.
pub fn predict<S: AsRef<str>>(handle: &ModelHandle, texts: &[S]) -> Result<Vec<String>> {
    let refs: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
    let labels = handle.model.predict(&refs)?;
    if labels.len() != texts.len() {
        return Err(Error::Backend(format!(
            "backend returned {} predictions for {} texts",
            labels.len(),
            texts.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|l| !handle.schema.contains(l)) {
        return Err(Error::Backend(format!(
            "backend produced label {bad:?} outside schema {}",
            handle.schema.task_id
        )));
    }
    Ok(labels)
}

/// Writes `handle` into checkpoint directory `dir`.
pub fn save(handle: &ModelHandle, dir: &Path) -> Result<CheckpointRef> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let payload = handle.model.save_payload(dir)?;
    let config_fingerprint = handle.provenance.config.fingerprint();
    let manifest = CheckpointManifest {
        backend_id: handle.backend_id.clone(),
        schema: handle.schema.clone(),
        config: handle.provenance.config.clone(),
        config_fingerprint: config_fingerprint.clone(),
        training_fingerprint: handle.provenance.training_fingerprint.clone(),
        training_examples: handle.provenance.training_examples,
        model_name: handle.model_name.clone(),
        payload,
        created_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut raw = serde_json::to_string_pretty(&manifest)?;
    raw.push('\n');
    fs::write(&path, raw).map_err(|e| Error::io(&path, e))?;
    Ok(CheckpointRef {
        path: dir.display().to_string(),
        schema_of_origin: handle.schema.clone(),
        backend_id: handle.backend_id.clone(),
        config_fingerprint,
    })
}

fn open_checkpoint(backend: &dyn Backend, ckpt: &CheckpointRef) -> Result<CheckpointManifest> {
    if ckpt.backend_id != backend.id() {
        return Err(Error::BackendMismatch {
            expected: backend.id().to_string(),
            found: ckpt.backend_id.clone(),
        });
    }
    let manifest = CheckpointManifest::read(ckpt.dir())?;
    if manifest.backend_id != backend.id() {
        return Err(Error::BackendMismatch {
            expected: backend.id().to_string(),
            found: manifest.backend_id,
        });
    }
    if manifest.config_fingerprint != ckpt.config_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: ckpt.config_fingerprint.clone(),
            found: manifest.config_fingerprint,
        });
    }
    for file in &manifest.payload {
        let p = ckpt.dir().join(file);
        if !p.exists() {
            return Err(Error::MissingArtifact(p));
        }
    }
    Ok(manifest)
}

/// Restores a model saved with [`save`].
pub fn load(backend: &dyn Backend, ckpt: &CheckpointRef) -> Result<ModelHandle> {
    let manifest = open_checkpoint(backend, ckpt)?;
    let model = backend.load_model(ckpt.dir(), &manifest)?;
    Ok(ModelHandle {
        model,
        backend_id: manifest.backend_id,
        model_name: manifest.model_name,
        schema: manifest.schema,
        provenance: Provenance {
            config: manifest.config,
            training_fingerprint: manifest.training_fingerprint,
            training_examples: manifest.training_examples,
        },
    })
}

/// Environment variable naming the program behind the `external` backend.
pub const EXTERNAL_PROGRAM_ENV: &str = "LEARNCURVE_EXTERNAL_BACKEND";

/// Looks up a backend by id. `external` needs a program path.
pub fn by_id(id: &str, external_program: Option<PathBuf>) -> Result<Arc<dyn Backend>> {
    match id {
        reference::BACKEND_ID => Ok(Arc::new(NaiveBayesBackend)),
        external::BACKEND_ID => {
            let program = external_program
                .or_else(|| std::env::var_os(EXTERNAL_PROGRAM_ENV).map(PathBuf::from))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "backend {id:?} needs a program; set {EXTERNAL_PROGRAM_ENV}"
                    ))
                })?;
            Ok(Arc::new(ExternalBackend::new(program)))
        }
        _ => Err(Error::InvalidArgument(format!("unknown backend {id:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.warmup_steps), (3, 64, 500));
        assert_eq!(c.weight_decay, 0.01);
        assert_eq!(c.backend_id, "reference-nb");
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let c = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = TrainConfig {
            weight_decay: -0.1,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        c.weight_decay = f64::NAN;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_fields() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), TrainConfig::default().fingerprint());
    }

    #[test]
    fn unknown_backend() {
        assert!(by_id("gpt", None).is_err());
        assert!(by_id("reference-nb", None).is_ok());
    }
}
