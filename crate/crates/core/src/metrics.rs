//! Confusion matrices, positive-class F1 and micro-F1.
//!
//! Scores are carried as exact fractions `2TP / (2TP + FP + FN)` alongside
//! their `f64` value. Any zero denominator scores 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{MetricKind, TaskSchema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    schema: TaskSchema,
    /// Row-major `[gold][pred]` in schema label order.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn schema(&self) -> &TaskSchema {
        &self.schema
    }

    fn n(&self) -> usize {
        self.schema.labels.len()
    }

    pub fn get(&self, gold: &str, pred: &str) -> u64 {
        match (self.schema.index_of(gold), self.schema.index_of(pred)) {
            (Some(g), Some(p)) => self.counts[g * self.n() + p],
            _ => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n()).map(|i| self.counts[i * self.n() + i]).sum()
    }

    /// (TP, FP, FN) for one class.
    pub fn class_counts(&self, label: &str) -> Option<(u64, u64, u64)> {
        let c = self.schema.index_of(label)?;
        let n = self.n();
        let tp = self.counts[c * n + c];
        let predicted: u64 = (0..n).map(|g| self.counts[g * n + c]).sum();
        let gold: u64 = (0..n).map(|p| self.counts[c * n + p]).sum();
        Some((tp, predicted - tp, gold - tp))
    }

    /// Non-zero cells as `(gold, pred, count)` in schema order.
    pub fn cells(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        let n = self.n();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| {
                (
                    self.schema.labels[i / n].as_str(),
                    self.schema.labels[i % n].as_str(),
                    c,
                )
            })
    }
}

pub fn confusion<G, P>(gold: &[G], pred: &[P], schema: &TaskSchema) -> Result<ConfusionMatrix>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: pred.len(),
        });
    }
    let n = schema.labels.len();
    let mut counts = vec![0u64; n * n];
    let index = |label: &str, line: usize| {
        schema.index_of(label).ok_or_else(|| Error::UnknownLabel {
            source_name: "<scores>".into(),
            line,
            label: label.to_string(),
            schema: schema.task_id.clone(),
        })
    };
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        let g = index(g.as_ref(), i + 1)?;
        let p = index(p.as_ref(), i + 1)?;
        counts[g * n + p] += 1;
    }
    Ok(ConfusionMatrix {
        schema: schema.clone(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub metric: MetricKind,
    pub value: f64,
    /// Number of scored pairs.
    pub support: u64,
    pub numerator: u64,
    pub denominator: u64,
}

impl Score {
    fn from_fraction(metric: MetricKind, numerator: u64, denominator: u64, support: u64) -> Self {
        let value = if denominator == 0 {
            0.0
        } else {
            numerator as f64 / denominator as f64
        };
        Score {
            metric,
            value,
            support,
            numerator,
            denominator,
        }
    }

    /// Four decimal places, ties to even, computed on the exact fraction.
    pub fn rounded(&self) -> String {
        round_fraction_half_even(self.numerator, self.denominator, 4)
    }
}

/// Decimal rendering of `num/den` with `places` digits, ties to even.
pub fn round_fraction_half_even(num: u64, den: u64, places: u32) -> String {
    if den == 0 {
        return format!("{:.*}", places as usize, 0.0);
    }
    let scale = 10u128.pow(places);
    let scaled = num as u128 * scale;
    let (den, mut q) = (den as u128, scaled / den as u128);
    let r = scaled % den;
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        q += 1;
    }
    let int = q / scale;
    let frac = q % scale;
    if places == 0 {
        int.to_string()
    } else {
        format!("{int}.{frac:0width$}", width = places as usize)
    }
}

/// F1 of the `positive` class.
pub fn binary_f1(cm: &ConfusionMatrix, positive: &str) -> Result<Score> {
    let (tp, fp, fnn) = cm.class_counts(positive).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "positive label {positive:?} not in schema {}",
            cm.schema.task_id
        ))
    })?;
    // P = 0 or R = 0 both imply TP = 0, so the fraction form covers every
    // zero-denominator case.
    Ok(Score::from_fraction(
        MetricKind::BinaryF1,
        2 * tp,
        2 * tp + fp + fnn,
        cm.total(),
    ))
}

/// Micro-averaged F1 over all classes, pooled TP/FP/FN.
pub fn micro_f1(cm: &ConfusionMatrix) -> Result<Score> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("micro-F1 of an empty matrix".into()));
    }
    let tp = cm.correct();
    // Every misclassification is one pooled FP and one pooled FN.
    let wrong = total - tp;
    Ok(Score::from_fraction(
        MetricKind::MicroF1,
        2 * tp,
        2 * tp + 2 * wrong,
        total,
    ))
}

/// Primary metric of the matrix's schema.
pub fn primary(cm: &ConfusionMatrix) -> Result<Score> {
    match cm.schema.primary_metric {
        MetricKind::BinaryF1 => binary_f1(
            cm,
            cm.schema
                .positive_label
                .as_deref()
                .expect("validated schema has a positive label"),
        ),
        MetricKind::MicroF1 => micro_f1(cm),
    }
}

/// Every metric applicable to the schema, primary first.
pub fn all_scores(cm: &ConfusionMatrix) -> Result<Vec<Score>> {
    let mut scores = Vec::new();
    if let Some(pos) = &cm.schema.positive_label {
        scores.push(binary_f1(cm, pos)?);
    }
    if cm.total() > 0 {
        scores.push(micro_f1(cm)?);
    }
    scores.sort_by_key(|s| s.metric != cm.schema.primary_metric);
    Ok(scores)
}

/// True iff every prediction is the training majority label (vacuously for none).
pub fn is_majority_degenerate<P: AsRef<str>>(pred: &[P], train_majority: &str) -> bool {
    pred.iter().all(|p| p.as_ref() == train_majority)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{task5, TaskSchema};

    fn abc() -> TaskSchema {
        TaskSchema::new("abc", &["A", "B", "C"], Some("A"), MetricKind::MicroF1).unwrap()
    }

    #[test]
    fn confusion_counts_by_hand() {
        let cm = confusion(&["A", "A", "B"], &["A", "B", "B"], &abc()).unwrap();
        assert_eq!(cm.get("A", "A"), 1);
        assert_eq!(cm.get("A", "B"), 1);
        assert_eq!(cm.get("B", "B"), 1);
        assert_eq!(cm.total(), 3);
        assert_eq!(cm.cells().count(), 3);
    }

    #[test]
    fn confusion_identity_is_diagonal() {
        let labels = ["A", "C", "B", "C"];
        let cm = confusion(&labels, &labels, &abc()).unwrap();
        assert_eq!(cm.correct(), cm.total());
    }

    #[test]
    fn confusion_empty_and_errors() {
        let empty: [&str; 0] = [];
        let cm = confusion(&empty, &empty, &abc()).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(micro_f1(&cm).is_err());
        assert!(matches!(
            confusion(&["A"], &["A", "B"], &abc()),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion(&["A"], &["Z"], &abc()),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn binary_f1_two_thirds() {
        // TP=2, FP=1, FN=1
        let gold = ["A", "A", "A", "B", "B"];
        let pred = ["A", "A", "B", "A", "B"];
        let s = binary_f1(&confusion(&gold, &pred, &abc()).unwrap(), "A").unwrap();
        assert_eq!((s.numerator, s.denominator), (4, 6));
        assert_eq!(s.value, 4.0 / 6.0);
        assert_eq!(s.rounded(), "0.6667");
    }

    #[test]
    fn binary_f1_all_majority_is_zero() {
        let s = task5();
        let gold = ["potential", "Other", "Other"];
        let pred = ["Other"; 3];
        let score = binary_f1(&confusion(&gold, &pred, &s).unwrap(), "potential").unwrap();
        assert_eq!(score.value, 0.0);
        // No positives at all, no positive predictions.
        let score = binary_f1(&confusion(&pred, &pred, &s).unwrap(), "potential").unwrap();
        assert_eq!(score.value, 0.0);
        assert!(binary_f1(&confusion(&pred, &pred, &s).unwrap(), "nope").is_err());
    }

    #[test]
    fn binary_f1_perfect() {
        let gold = ["potential", "Other"];
        let s = binary_f1(&confusion(&gold, &gold, &task5()).unwrap(), "potential").unwrap();
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn micro_f1_small() {
        let cm = confusion(&["A", "A", "B"], &["A", "B", "B"], &abc()).unwrap();
        assert_eq!(micro_f1(&cm).unwrap().value, 2.0 / 3.0);
        let cm = confusion(&["A", "B"], &["A", "B"], &abc()).unwrap();
        assert_eq!(micro_f1(&cm).unwrap().value, 1.0);
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_fraction_half_even(1, 8, 2), "0.12");
        assert_eq!(round_fraction_half_even(3, 8, 2), "0.38");
        assert_eq!(round_fraction_half_even(1, 3, 4), "0.3333");
        assert_eq!(round_fraction_half_even(2, 3, 4), "0.6667");
        assert_eq!(round_fraction_half_even(5, 5, 4), "1.0000");
        assert_eq!(round_fraction_half_even(0, 0, 4), "0.0000");
        assert_eq!(round_fraction_half_even(1, 20000, 4), "0.0000");
        assert_eq!(round_fraction_half_even(3, 20000, 4), "0.0002");
    }

    #[test]
    fn primary_first() {
        let s = task5();
        let cm = confusion(&["Other"], &["Other"], &s).unwrap();
        let scores = all_scores(&cm).unwrap();
        assert_eq!(scores[0].metric, MetricKind::BinaryF1);
        assert_eq!(scores.len(), 2);
    }

    #[test]
    fn degenerate_detection() {
        assert!(is_majority_degenerate(&["Other", "Other"], "Other"));
        assert!(!is_majority_degenerate(&["Other", "potential"], "Other"));
        assert!(is_majority_degenerate::<&str>(&[], "Other"));
    }
}
