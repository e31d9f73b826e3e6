//! Task schemas: the ordered label set of a classification task, its optional
//! positive class, and the metric the task is ranked by.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TASK5_ID: &str = "smm4h-task5";
pub const TASK6_ID: &str = "smm4h-task6";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    BinaryF1,
    MicroF1,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::BinaryF1 => "binary_f1",
            MetricKind::MicroF1 => "micro_f1",
        }
    }
}

/// Label set and ranking metric of one task.
///
/// `aliases` maps on-disk label spellings onto canonical labels; the
/// canonical labels themselves always resolve to themselves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSchema {
    pub task_id: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub positive_label: Option<String>,
    pub primary_metric: MetricKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, String>,
}

impl TaskSchema {
    pub fn new(
        task_id: impl Into<String>,
        labels: &[&str],
        positive_label: Option<&str>,
        primary_metric: MetricKind,
    ) -> Result<Self> {
        let schema = TaskSchema {
            task_id: task_id.into(),
            labels: labels.iter().map(|l| l.to_string()).collect(),
            positive_label: positive_label.map(str::to_string),
            primary_metric,
            aliases: BTreeMap::new(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_aliases<I, K, V>(mut self, aliases: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        self.aliases
            .extend(aliases.into_iter().map(|(k, v)| (k.into(), v.into())));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.task_id.is_empty() {
            return Err(Error::Schema("task_id is empty".into()));
        }
        if self.labels.len() < 2 {
            return Err(Error::Schema(format!(
                "{}: need at least 2 labels, got {}",
                self.task_id,
                self.labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &self.labels {
            if label.is_empty() || label.contains(['\t', '\n', '\r']) {
                return Err(Error::Schema(format!(
                    "{}: label {label:?} is empty or contains tab/newline",
                    self.task_id
                )));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::Schema(format!(
                    "{}: duplicate label {label:?}",
                    self.task_id
                )));
            }
        }
        if let Some(pos) = &self.positive_label {
            if !seen.contains(pos.as_str()) {
                return Err(Error::Schema(format!(
                    "{}: positive label {pos:?} is not a schema label",
                    self.task_id
                )));
            }
        }
        if self.primary_metric == MetricKind::BinaryF1 && self.positive_label.is_none() {
            return Err(Error::Schema(format!(
                "{}: binary_f1 requires a positive label",
                self.task_id
            )));
        }
        for (alias, target) in &self.aliases {
            if !seen.contains(target.as_str()) {
                return Err(Error::Schema(format!(
                    "{}: alias {alias:?} points at unknown label {target:?}",
                    self.task_id
                )));
            }
        }
        Ok(())
    }

    /// Index of a canonical label in schema order.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// Resolves an on-disk label to its canonical spelling.
    pub fn canonical<'a>(&'a self, raw: &str) -> Option<&'a str> {
        if let Some(i) = self.index_of(raw) {
            return Some(&self.labels[i]);
        }
        self.aliases
            .get(raw)
            .and_then(|target| self.index_of(target))
            .map(|i| self.labels[i].as_str())
    }

    /// Label set equality, ignoring aliases.
    pub fn same_task(&self, other: &TaskSchema) -> bool {
        self.task_id == other.task_id
            && self.labels == other.labels
            && self.positive_label == other.positive_label
            && self.primary_metric == other.primary_metric
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let schema: TaskSchema = serde_json::from_str(raw)?;
        schema.validate()?;
        Ok(schema)
    }
}

/// Binary task: self-reported potential cases versus everything else.
pub fn task5() -> TaskSchema {
    TaskSchema::new(
        TASK5_ID,
        &["Other", "potential"],
        Some("potential"),
        MetricKind::BinaryF1,
    )
    .and_then(|s| {
        s.with_aliases([
            ("0", "Other"),
            ("1", "potential"),
            ("other", "Other"),
            ("potential case", "potential"),
        ])
    })
    .expect("built-in schema is valid")
}

/// Three-way task: self report, non-personal report, literature/news mention.
pub fn task6() -> TaskSchema {
    TaskSchema::new(
        TASK6_ID,
        &["self", "nonpersonal", "lit-news"],
        None,
        MetricKind::MicroF1,
    )
    .and_then(|s| {
        s.with_aliases([
            ("Self_reports", "self"),
            ("Nonpersonal_reports", "nonpersonal"),
            ("Lit-News_mentions", "lit-news"),
            ("self report", "self"),
            ("nonpersonal report", "nonpersonal"),
            ("lit-news mention", "lit-news"),
        ])
    })
    .expect("built-in schema is valid")
}

pub fn builtin(id: &str) -> Option<TaskSchema> {
    match id {
        TASK5_ID => Some(task5()),
        TASK6_ID => Some(task6()),
        _ => None,
    }
}

/// Resolves a schema argument: a built-in id, or a path to a schema JSON file.
pub fn resolve(id_or_path: &str) -> Result<TaskSchema> {
    if let Some(schema) = builtin(id_or_path) {
        return Ok(schema);
    }
    let path = Path::new(id_or_path);
    if path.is_file() {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return TaskSchema::from_json(&raw);
    }
    Err(Error::InvalidArgument(format!(
        "unknown schema {id_or_path:?}; expected {TASK5_ID}, {TASK6_ID}, or a schema JSON file"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        let t5 = task5();
        assert_eq!(t5.primary_metric, MetricKind::BinaryF1);
        assert_eq!(t5.positive_label.as_deref(), Some("potential"));
        let t6 = task6();
        assert_eq!(t6.labels.len(), 3);
        assert_eq!(t6.primary_metric, MetricKind::MicroF1);
    }

    #[test]
    fn rejects_bad_schemas() {
        assert!(TaskSchema::new("x", &["a"], None, MetricKind::MicroF1).is_err());
        assert!(TaskSchema::new("x", &["a", "a"], None, MetricKind::MicroF1).is_err());
        assert!(TaskSchema::new("x", &["a", "b"], Some("c"), MetricKind::MicroF1).is_err());
        assert!(TaskSchema::new("x", &["a", "b"], None, MetricKind::BinaryF1).is_err());
        assert!(TaskSchema::new("x", &["a", "b\tc"], None, MetricKind::MicroF1).is_err());
        let bad_alias = TaskSchema::new("x", &["a", "b"], None, MetricKind::MicroF1)
            .unwrap()
            .with_aliases([("z", "q")]);
        assert!(bad_alias.is_err());
    }

    #[test]
    fn aliases_resolve_to_canonical() {
        let t6 = task6();
        assert_eq!(t6.canonical("Self_reports"), Some("self"));
        assert_eq!(t6.canonical("self"), Some("self"));
        assert_eq!(t6.canonical("maybe"), None);
    }

    #[test]
    fn json_round_trip() {
        let t5 = task5();
        let raw = serde_json::to_string(&t5).unwrap();
        assert_eq!(TaskSchema::from_json(&raw).unwrap(), t5);
        assert!(TaskSchema::from_json(
            r#"{"task_id":"x","labels":["a"],"primary_metric":"micro_f1"}"#
        )
        .is_err());
    }

    #[test]
    fn resolve_unknown_id() {
        assert!(matches!(
            resolve("smm4h-task7"),
            Err(Error::InvalidArgument(_))
        ));
    }
}
