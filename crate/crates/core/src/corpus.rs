//! Labeled tweet corpora: TSV ingest, pool merging with exact-text
//! deduplication, class counts, and JSON-lines persistence.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::schema::TaskSchema;

/// Header row recognised (and skipped) when it is the first line of a TSV.
pub const TSV_HEADER: [&str; 3] = ["id", "text", "label"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub label: String,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        LabeledExample {
            id: id.into(),
            text: text.into(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub schema: TaskSchema,
    pub examples: Vec<LabeledExample>,
    pub provenance: Vec<String>,
}

/// Outcome of [`merge_and_dedup`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merged {
    pub corpus: Corpus,
    /// Examples dropped because an earlier example had byte-identical text.
    pub removed: usize,
    /// Subset of `removed` whose label disagreed with the kept example.
    pub label_conflicts: usize,
}

impl Corpus {
    pub fn empty(schema: TaskSchema) -> Self {
        Corpus {
            schema,
            examples: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Order-sensitive digest of every (id, text, label) triple plus the task id.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new("corpus/v1");
        fp.str(&self.schema.task_id);
        for ex in &self.examples {
            fp.str(&ex.id).str(&ex.text).str(&ex.label);
        }
        fp.hex()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, ex) in self.examples.iter().enumerate() {
            validate_example(ex, &self.schema, "<corpus>", i + 1)?;
        }
        Ok(())
    }
}

fn validate_example(
    ex: &LabeledExample,
    schema: &TaskSchema,
    source: &str,
    line: usize,
) -> Result<()> {
    if ex.id.is_empty() {
        return Err(Error::parse(source, line, "empty id"));
    }
    if !schema.contains(&ex.label) {
        return Err(Error::UnknownLabel {
            source_name: source.to_string(),
            line,
            label: ex.label.clone(),
            schema: schema.task_id.clone(),
        });
    }
    Ok(())
}

/// Parses a three-column `id<TAB>text<TAB>label` file.
///
/// A first line of exactly `id`, `text`, `label` is treated as a header.
/// Labels are mapped through the schema's aliases to their canonical form.
pub fn parse_tsv(raw: &[u8], schema: &TaskSchema, source: &str) -> Result<Corpus> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let line = raw[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        Error::parse(source, line, "invalid UTF-8")
    })?;

    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if lineno == 1 && cols == TSV_HEADER {
            continue;
        }
        if cols.len() != 3 {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let label = schema
            .canonical(cols[2])
            .ok_or_else(|| Error::UnknownLabel {
                source_name: source.to_string(),
                line: lineno,
                label: cols[2].to_string(),
                schema: schema.task_id.clone(),
            })?;
        let ex = LabeledExample::new(cols[0], cols[1], label);
        validate_example(&ex, schema, source, lineno)?;
        examples.push(ex);
    }

    Ok(Corpus {
        schema: schema.clone(),
        examples,
        provenance: vec![source.to_string()],
    })
}

pub fn read_tsv(path: &Path, schema: &TaskSchema) -> Result<Corpus> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_tsv(&raw, schema, &path.display().to_string())
}

/// Concatenates `parts` in order and keeps the first example of every
/// distinct text. Comparison is on the exact text bytes.
pub fn merge_and_dedup(parts: &[Corpus]) -> Result<Merged> {
    let Some(first) = parts.first() else {
        return Err(Error::InvalidArgument("no corpora to merge".into()));
    };
    let schema = first.schema.clone();
    for part in &parts[1..] {
        if !part.schema.same_task(&schema) {
            return Err(Error::SchemaMismatch {
                expected: schema.task_id.clone(),
                found: part.schema.task_id.clone(),
            });
        }
    }

    let mut seen: HashMap<&str, &LabeledExample> = HashMap::new();
    let mut examples = Vec::new();
    let mut removed = 0;
    let mut label_conflicts = 0;
    for ex in parts.iter().flat_map(|p| &p.examples) {
        match seen.get(ex.text.as_str()) {
            Some(kept) => {
                removed += 1;
                if kept.label != ex.label {
                    label_conflicts += 1;
                    log::warn!(
                        "duplicate text with conflicting labels: kept {} ({}), dropped {} ({})",
                        kept.id,
                        kept.label,
                        ex.id,
                        ex.label
                    );
                }
            }
            None => {
                seen.insert(&ex.text, ex);
                examples.push(ex.clone());
            }
        }
    }

    Ok(Merged {
        corpus: Corpus {
            schema,
            examples,
            provenance: parts.iter().flat_map(|p| p.provenance.clone()).collect(),
        },
        removed,
        label_conflicts,
    })
}

/// Per-label counts; every schema label is present, possibly with 0.
pub fn class_counts(corpus: &Corpus) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = corpus
        .schema
        .labels
        .iter()
        .map(|l| (l.clone(), 0))
        .collect();
    for ex in &corpus.examples {
        *counts.entry(ex.label.clone()).or_insert(0) += 1;
    }
    counts
}

/// Most frequent label; ties go to the earlier schema label.
pub fn majority_label(schema: &TaskSchema, examples: &[LabeledExample]) -> Option<String> {
    if examples.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; schema.labels.len()];
    for ex in examples {
        if let Some(i) = schema.index_of(&ex.label) {
            counts[i] += 1;
        }
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Some(schema.labels[best].clone())
}

/// Sidecar written next to a persisted corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema: TaskSchema,
    pub sources: Vec<String>,
    pub removed_duplicates: usize,
    pub label_conflicts: usize,
    pub examples: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub fingerprint: String,
}

pub fn manifest_path(corpus_path: &Path) -> PathBuf {
    let mut name = corpus_path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes the corpus as JSON lines plus its `.manifest.json` sidecar.
pub fn save_jsonl(merged: &Merged, path: &Path) -> Result<CorpusManifest> {
    let corpus = &merged.corpus;
    let mut buf = Vec::new();
    for ex in &corpus.examples {
        serde_json::to_writer(&mut buf, ex)?;
        buf.push(b'\n');
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))?;

    let manifest = CorpusManifest {
        schema: corpus.schema.clone(),
        sources: corpus.provenance.clone(),
        removed_duplicates: merged.removed,
        label_conflicts: merged.label_conflicts,
        examples: corpus.len(),
        class_counts: class_counts(corpus),
        fingerprint: corpus.fingerprint(),
    };
    let mpath = manifest_path(path);
    let mut file = fs::File::create(&mpath).map_err(|e| Error::io(&mpath, e))?;
    serde_json::to_writer_pretty(&mut file, &manifest)?;
    file.write_all(b"\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Parses JSON-lines examples against a schema.
pub fn parse_jsonl(raw: &[u8], schema: &TaskSchema, source: &str) -> Result<Vec<LabeledExample>> {
    let text = std::str::from_utf8(raw).map_err(|_| Error::parse(source, 0, "invalid UTF-8"))?;
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let ex: LabeledExample =
            serde_json::from_str(line).map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        validate_example(&ex, schema, source, i + 1)?;
        examples.push(ex);
    }
    Ok(examples)
}

/// Loads a corpus persisted by [`save_jsonl`], checking it against the manifest.
pub fn load_jsonl(path: &Path) -> Result<(Corpus, CorpusManifest)> {
    let mpath = manifest_path(path);
    let mraw = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CorpusManifest = serde_json::from_str(&mraw)?;
    manifest.schema.validate()?;

    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let examples = parse_jsonl(&raw, &manifest.schema, &path.display().to_string())?;
    let corpus = Corpus {
        schema: manifest.schema.clone(),
        examples,
        provenance: manifest.sources.clone(),
    };
    if corpus.fingerprint() != manifest.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: manifest.fingerprint.clone(),
            found: corpus.fingerprint(),
        });
    }
    Ok((corpus, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{task5, task6};
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus {
            schema: task5(),
            examples: texts
                .iter()
                .enumerate()
                .map(|(i, t)| LabeledExample::new(format!("t{i}"), *t, "Other"))
                .collect(),
            provenance: vec!["mem".into()],
        }
    }

    #[test]
    fn parses_three_lines() {
        let raw = b"1\tso sore throat\tpotential\n2\tstay home\tOther\n3\tlol\tOther\n";
        let c = parse_tsv(raw, &task5(), "t.tsv").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.examples[0].label, "potential");
        assert_eq!(c.examples[2].id, "3");
    }

    #[test]
    fn header_is_skipped_only_when_exact() {
        let raw = b"id\ttext\tlabel\n1\ta\tOther\n";
        assert_eq!(parse_tsv(raw, &task5(), "t").unwrap().len(), 1);
        let raw = b"ID\ttext\tlabel\n1\ta\tOther\n";
        assert!(matches!(
            parse_tsv(raw, &task5(), "t"),
            Err(Error::UnknownLabel { line: 1, .. })
        ));
    }

    #[test]
    fn unknown_label_names_label_and_line() {
        let raw = b"1\ta\tOther\n2\tb\tmaybe\n";
        match parse_tsv(raw, &task5(), "t") {
            Err(Error::UnknownLabel { line, label, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(label, "maybe");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_names_line() {
        let raw = b"1\ta\tOther\n2\tb\tc\tOther\n";
        assert!(matches!(
            parse_tsv(raw, &task5(), "t"),
            Err(Error::Parse { line: 2, .. })
        ));
        let raw = b"1\ta\tOther\n\n";
        assert!(matches!(
            parse_tsv(raw, &task5(), "t"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_utf8_and_empty_id() {
        let raw = b"1\ta\tOther\n2\t\xff\tOther\n";
        assert!(matches!(
            parse_tsv(raw, &task5(), "t"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_tsv(b"\ta\tOther\n", &task5(), "t").is_err());
    }

    #[test]
    fn crlf_and_aliases() {
        let raw = b"1\ta\tSelf_reports\r\n2\tb\tLit-News_mentions\r\n";
        let c = parse_tsv(raw, &task6(), "t").unwrap();
        assert_eq!(c.examples[0].label, "self");
        assert_eq!(c.examples[1].label, "lit-news");
    }

    #[test]
    fn merge_disjoint() {
        let m =
            merge_and_dedup(&[corpus(&["a", "b", "c", "d"]), corpus(&["e", "f", "g"])]).unwrap();
        assert_eq!(m.corpus.len(), 7);
        assert_eq!(m.removed, 0);
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let mut c = corpus(&["a", "b", "c", "a", "e"]);
        c.examples[3].label = "potential".into();
        let m = merge_and_dedup(&[c]).unwrap();
        assert_eq!(m.corpus.len(), 4);
        assert_eq!(m.removed, 1);
        assert_eq!(m.label_conflicts, 1);
        assert_eq!(m.corpus.examples[0].id, "t0");
        let ids: Vec<_> = m.corpus.examples.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["t0", "t1", "t2", "t4"]);
    }

    #[test]
    fn merge_rejects_schema_mismatch() {
        let mut other = corpus(&["x"]);
        other.schema = task6();
        other.examples.clear();
        assert!(matches!(
            merge_and_dedup(&[corpus(&["a"]), other]),
            Err(Error::SchemaMismatch { .. })
        ));
        assert!(merge_and_dedup(&[]).is_err());
    }

    #[test]
    fn class_counts_cover_all_labels() {
        let counts = class_counts(&Corpus::empty(task6()));
        assert_eq!(counts.len(), 3);
        assert!(counts.values().all(|&c| c == 0));
    }

    #[test]
    fn majority_ties_follow_schema_order() {
        let s = task5();
        let ex = vec![
            LabeledExample::new("1", "a", "potential"),
            LabeledExample::new("2", "b", "Other"),
        ];
        assert_eq!(majority_label(&s, &ex).as_deref(), Some("Other"));
        assert_eq!(majority_label(&s, &[]), None);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let m = merge_and_dedup(&[corpus(&["a", "b", "a"])]).unwrap();
        let manifest = save_jsonl(&m, &path).unwrap();
        assert_eq!(manifest.removed_duplicates, 1);
        let (loaded, lm) = load_jsonl(&path).unwrap();
        assert_eq!(loaded, m.corpus);
        assert_eq!(lm, manifest);

        fs::write(&path, "{\"id\":\"z\",\"text\":\"q\",\"label\":\"Other\"}\n").unwrap();
        assert!(matches!(
            load_jsonl(&path),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    fn arb_parts() -> impl Strategy<Value = Vec<Vec<(u8, bool)>>> {
        prop::collection::vec(prop::collection::vec((0u8..12, any::<bool>()), 0..20), 1..5)
    }

    fn build(parts: &[Vec<(u8, bool)>]) -> Vec<Corpus> {
        let mut next = 0;
        parts
            .iter()
            .map(|p| Corpus {
                schema: task5(),
                examples: p
                    .iter()
                    .map(|&(t, pos)| {
                        next += 1;
                        LabeledExample::new(
                            format!("id{next}"),
                            format!("text {t}"),
                            if pos { "potential" } else { "Other" },
                        )
                    })
                    .collect(),
                provenance: vec![],
            })
            .collect()
    }

    proptest! {
        #[test]
        fn dedup_properties(parts in arb_parts()) {
            let parts = build(&parts);
            let merged = merge_and_dedup(&parts).unwrap();
            let total: usize = parts.iter().map(Corpus::len).sum();
            prop_assert_eq!(merged.corpus.len(), total - merged.removed);

            // Idempotent.
            let again = merge_and_dedup(std::slice::from_ref(&merged.corpus)).unwrap();
            prop_assert_eq!(&again.corpus, &merged.corpus);
            prop_assert_eq!(again.removed, 0);

            // Survivors keep their relative source order.
            let all: Vec<&LabeledExample> = parts.iter().flat_map(|p| &p.examples).collect();
            let positions: Vec<usize> = merged.corpus.examples.iter()
                .map(|e| all.iter().position(|a| a.id == e.id).unwrap())
                .collect();
            prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));

            // Texts unique, counts add up.
            let mut texts: Vec<_> = merged.corpus.examples.iter().map(|e| &e.text).collect();
            texts.sort();
            texts.dedup();
            prop_assert_eq!(texts.len(), merged.corpus.len());
            prop_assert_eq!(class_counts(&merged.corpus).values().sum::<usize>(), merged.corpus.len());
        }
    }
}
