//! Prediction files: headerless `tweet_id<TAB>label` TSV, one row per tweet.
//! This is also the submission format read by the scorer.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::schema::TaskSchema;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Predictions {
    pub rows: Vec<(String, String)>,
}

impl Predictions {
    pub fn new(rows: Vec<(String, String)>) -> Self {
        Predictions { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|(id, _)| id.as_str())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|(_, l)| l.as_str())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, label) in &self.rows {
            out.push_str(id);
            out.push('\t');
            out.push_str(label);
            out.push('\n');
        }
        out
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new("predictions/v1");
        fp.str(&self.to_tsv());
        fp.hex()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Label per id.
    pub fn by_id(&self) -> HashMap<&str, &str> {
        self.rows
            .iter()
            .map(|(id, l)| (id.as_str(), l.as_str()))
            .collect()
    }
}

/// Parses a prediction file. Labels are resolved through the schema's
/// aliases when a schema is given; ids must be non-empty and unique.
pub fn parse(raw: &[u8], schema: Option<&TaskSchema>, source: &str) -> Result<Predictions> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let line = raw[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        Error::parse(source, line, "invalid UTF-8")
    })?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected 2 tab-separated columns, found {}", cols.len()),
            ));
        }
        let (id, raw_label) = (cols[0], cols[1]);
        if id.is_empty() {
            return Err(Error::parse(source, lineno, "empty tweet id"));
        }
        if !seen.insert(id) {
            return Err(Error::parse(
                source,
                lineno,
                format!("duplicate tweet id {id:?}"),
            ));
        }
        let label = match schema {
            Some(s) => s
                .canonical(raw_label)
                .ok_or_else(|| Error::UnknownLabel {
                    source_name: source.to_string(),
                    line: lineno,
                    label: raw_label.to_string(),
                    schema: s.task_id.clone(),
                })?
                .to_string(),
            None if raw_label.is_empty() => {
                return Err(Error::parse(source, lineno, "empty label"));
            }
            None => raw_label.to_string(),
        };
        rows.push((id.to_string(), label));
    }
    Ok(Predictions { rows })
}

pub fn read(path: &Path, schema: Option<&TaskSchema>) -> Result<Predictions> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse(&raw, schema, &path.display().to_string())
}

/// Pairs gold and predicted labels by tweet id, in gold order.
pub fn align(gold: &Predictions, pred: &Predictions) -> Result<(Vec<String>, Vec<String>)> {
    let pred_by_id = pred.by_id();
    let gold_ids: HashSet<&str> = gold.ids().collect();
    let mut missing = Vec::new();
    let mut g = Vec::with_capacity(gold.len());
    let mut p = Vec::with_capacity(gold.len());
    for (id, label) in &gold.rows {
        match pred_by_id.get(id.as_str()) {
            Some(pl) => {
                g.push(label.clone());
                p.push(pl.to_string());
            }
            None => missing.push(id.clone()),
        }
    }
    let extra: Vec<String> = pred
        .ids()
        .filter(|id| !gold_ids.contains(id))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::IdMismatch {
            missing_in_pred: missing,
            extra_in_pred: extra,
        });
    }
    Ok((g, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::task6;

    #[test]
    fn round_trip_bytes() {
        let raw = b"11\tself\n12\tlit-news\n";
        let p = parse(raw, Some(&task6()), "p").unwrap();
        assert_eq!(p.to_tsv().as_bytes(), raw);
    }

    #[test]
    fn rejects_malformed() {
        let s = task6();
        assert!(matches!(
            parse(b"1\tself\textra\n", Some(&s), "p"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse(b"1\tself\n1\tself\n", Some(&s), "p"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse(b"1\twho\n", Some(&s), "p"),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(parse(b"\tself\n", Some(&s), "p").is_err());
        assert!(parse(b"1\t\n", None, "p").is_err());
    }

    #[test]
    fn align_joins_on_id() {
        let s = task6();
        let gold = parse(b"1\tself\n2\tlit-news\n", Some(&s), "g").unwrap();
        let pred = parse(b"2\tself\n1\tself\n", Some(&s), "p").unwrap();
        let (g, p) = align(&gold, &pred).unwrap();
        assert_eq!(g, ["self", "lit-news"]);
        assert_eq!(p, ["self", "self"]);

        let pred = parse(b"1\tself\n3\tself\n", Some(&s), "p").unwrap();
        match align(&gold, &pred) {
            Err(Error::IdMismatch {
                missing_in_pred,
                extra_in_pred,
            }) => {
                assert_eq!(missing_in_pred, ["2"]);
                assert_eq!(extra_in_pred, ["3"]);
            }
            other => panic!("{other:?}"),
        }
    }
}
