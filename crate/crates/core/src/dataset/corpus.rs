use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestReport;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub doc_id: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess from a file extension (`.csv`, `.jsonl`, `.json`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "ndjson" | "json" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }
}

/// A validated labeled corpus: unique ids and at least two label classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<CorpusDocument>,
}

impl Corpus {
    pub fn new(documents: Vec<CorpusDocument>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::Invalid(format!("duplicate doc_id {:?}", d.doc_id)));
            }
        }
        let corpus = Corpus { documents };
        let labels = corpus.label_counts();
        if labels.len() < 2 {
            let only = labels.into_keys().next().unwrap_or_default();
            return Err(Error::DegenerateCorpus(only.to_string()));
        }
        Ok(corpus)
    }

    pub fn documents(&self) -> &[CorpusDocument] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Per-label document counts, ordered lexicographically by label.
    pub fn label_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.documents {
            *counts.entry(d.label.as_str()).or_insert(0) += 1;
        }
        counts
    }

    pub fn get(&self, doc_id: &str) -> Option<&CorpusDocument> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }
}

pub fn parse_corpus(path: &Path, format: CorpusFormat) -> Result<(Corpus, IngestReport)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_str(&text, format)
}

pub fn parse_corpus_str(input: &str, format: CorpusFormat) -> Result<(Corpus, IngestReport)> {
    let rows = match format {
        CorpusFormat::Csv => csv_rows(input)?,
        CorpusFormat::Jsonl => jsonl_rows(input),
    };

    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut documents = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let row_no = i + 1;
        report.rows_read += 1;
        match row.and_then(|d| validate(d, &seen)) {
            Ok(doc) => {
                seen.insert(doc.doc_id.clone());
                documents.push(doc);
            }
            Err(reason) => report.reject(row_no, reason),
        }
    }
    Ok((Corpus::new(documents)?, report))
}

type RawRow = std::result::Result<(Option<String>, Option<String>, Option<String>), String>;

fn validate(
    (doc_id, label, text): (Option<String>, Option<String>, Option<String>),
    seen: &HashSet<String>,
) -> std::result::Result<CorpusDocument, String> {
    let doc_id = doc_id.filter(|s| !s.is_empty()).ok_or("missing doc_id")?;
    let label = label.filter(|s| !s.is_empty()).ok_or("missing label")?;
    let text = text.ok_or("missing text")?;
    if seen.contains(&doc_id) {
        return Err(format!("duplicate doc_id {doc_id:?}"));
    }
    Ok(CorpusDocument { doc_id, text, label })
}

fn csv_rows(input: &str) -> Result<Vec<RawRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Invalid(format!("corpus CSV header lacks column {name:?}")))
    };
    let (id_col, label_col, text_col) = (col("doc_id")?, col("label")?, col("text")?);

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let row = match rec {
            Ok(r) => {
                let field = |c: usize| r.get(c).map(str::to_owned);
                Ok((field(id_col), field(label_col), field(text_col)))
            }
            Err(e) => Err(format!("malformed csv row: {e}")),
        };
        rows.push(row);
    }
    Ok(rows)
}

fn jsonl_rows(input: &str) -> Vec<RawRow> {
    input
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let v: serde_json::Value = serde_json::from_str(line).map_err(|e| format!("malformed json: {e}"))?;
            let obj = v.as_object().ok_or("line is not a json object")?;
            let field = |k: &str| obj.get(k).and_then(|x| x.as_str()).map(str::to_owned);
            Ok((field("doc_id"), field("label"), field("text")))
        })
        .collect()
}
