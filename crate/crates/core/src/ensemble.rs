//! Hard-label majority voting across fold models.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::TaskSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Earliest tied label in schema order.
    #[default]
    SchemaOrder,
    /// The recorded training-majority label if it is tied, else schema order.
    TrainMajority,
}

impl FromStr for TieRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schema_order" | "schema-order" => Ok(TieRule::SchemaOrder),
            "train_majority" | "train-majority" => Ok(TieRule::TrainMajority),
            _ => Err(Error::InvalidArgument(format!("unknown tie rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VoteSet {
    pub members: Vec<Vec<String>>,
    pub schema: TaskSchema,
    pub tie_rule: TieRule,
    pub train_majority: Option<String>,
}

impl VoteSet {
    pub fn new(members: Vec<Vec<String>>, schema: TaskSchema, tie_rule: TieRule) -> Self {
        VoteSet {
            members,
            schema,
            tie_rule,
            train_majority: None,
        }
    }

    pub fn with_train_majority(mut self, label: impl Into<String>) -> Self {
        self.train_majority = Some(label.into());
        self
    }

    fn validate(&self) -> Result<Vec<Vec<usize>>> {
        let first = self
            .members
            .first()
            .ok_or_else(|| Error::InvalidArgument("vote set has no members".into()))?;
        let len = first.len();
        if let Some(m) = self.members.iter().find(|m| m.len() != len) {
            return Err(Error::LengthMismatch {
                left: len,
                right: m.len(),
            });
        }
        if let Some(tm) = &self.train_majority {
            if !self.schema.contains(tm) {
                return Err(Error::InvalidArgument(format!(
                    "training majority {tm:?} is not a schema label"
                )));
            }
        }
        self.members
            .iter()
            .enumerate()
            .map(|(mi, m)| {
                m.iter()
                    .enumerate()
                    .map(|(pos, label)| {
                        self.schema
                            .index_of(label)
                            .ok_or_else(|| Error::UnknownLabel {
                                source_name: format!("member {mi}"),
                                line: pos + 1,
                                label: label.clone(),
                                schema: self.schema.task_id.clone(),
                            })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Per position, the label with the most votes; ties per `tie_rule`.
pub fn majority_vote(votes: &VoteSet) -> Result<Vec<String>> {
    let indexed = votes.validate()?;
    let n_labels = votes.schema.labels.len();
    let preferred = match votes.tie_rule {
        TieRule::SchemaOrder => None,
        TieRule::TrainMajority => votes
            .train_majority
            .as_deref()
            .and_then(|l| votes.schema.index_of(l)),
    };

    let len = indexed[0].len();
    let mut counts = vec![0usize; n_labels];
    let mut out = Vec::with_capacity(len);
    for pos in 0..len {
        counts.iter_mut().for_each(|c| *c = 0);
        for member in &indexed {
            counts[member[pos]] += 1;
        }
        let top = *counts.iter().max().expect("schema has labels");
        let winner = match preferred {
            Some(p) if counts[p] == top => p,
            _ => counts.iter().position(|&c| c == top).expect("max exists"),
        };
        out.push(votes.schema.labels[winner].clone());
    }
    Ok(out)
}

/// Sidecar describing a fused prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub task_id: String,
    pub tie_rule: TieRule,
    pub train_majority: Option<String>,
    pub members: Vec<MemberInfo>,
    pub predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub path: String,
    pub fingerprint: String,
}
