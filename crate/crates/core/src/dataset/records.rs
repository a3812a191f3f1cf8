use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestReport;
use crate::{Error, Result};

pub const ACCURACY_HEADER: [&str; 8] = [
    "lm_type",
    "task_id",
    "subsample_index",
    "m",
    "n",
    "correct_base",
    "correct_extra",
    "correct_test",
];

/// Correct-prediction counts for the three paired conditions on one split.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub lm_type: String,
    pub task_id: String,
    pub subsample_index: u32,
    pub m: u32,
    pub n: u32,
    pub correct_base: u32,
    pub correct_extra: u32,
    pub correct_test: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub lm_type: String,
    pub task_id: String,
    pub subsample_index: u32,
    pub m: u32,
    pub n: u32,
}

impl AccuracyRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            lm_type: self.lm_type.clone(),
            task_id: self.task_id.clone(),
            subsample_index: self.subsample_index,
            m: self.m,
            n: self.n,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.lm_type.is_empty() {
            return Err("missing lm_type".into());
        }
        if self.task_id.is_empty() {
            return Err("missing task_id".into());
        }
        if self.n == 0 {
            return Err("n must be positive".into());
        }
        if self.correct_base > self.n || self.correct_extra > self.n || self.correct_test > self.n {
            return Err("count exceeds n".into());
        }
        Ok(())
    }

    pub fn acc_base(&self) -> f64 {
        self.correct_base as f64 / self.n as f64
    }

    pub fn acc_extra(&self) -> f64 {
        self.correct_extra as f64 / self.n as f64
    }

    pub fn acc_test(&self) -> f64 {
        self.correct_test as f64 / self.n as f64
    }
}

pub fn parse_accuracy_records(path: &Path) -> Result<(Vec<AccuracyRecord>, IngestReport)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_accuracy_records_str(&text)
}

pub fn parse_accuracy_records_str(input: &str) -> Result<(Vec<AccuracyRecord>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input.as_bytes());
    let header = rdr.headers()?;
    if header.iter().ne(ACCURACY_HEADER.iter().copied()) {
        return Err(Error::Invalid(format!(
            "accuracy CSV header must be `{}`",
            ACCURACY_HEADER.join(",")
        )));
    }

    let mut report = IngestReport::default();
    let mut keys = HashSet::new();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        report.rows_read += 1;
        let parsed = rec
            .map_err(|e| format!("malformed csv row: {e}"))
            .and_then(|r| parse_row(&r))
            .and_then(|r| r.validate().map(|_| r));
        match parsed {
            Ok(r) => {
                if keys.insert(r.key()) {
                    records.push(r);
                } else {
                    report.reject(row, "duplicate key");
                }
            }
            Err(reason) => report.reject(row, reason),
        }
    }
    Ok((records, report))
}

fn parse_row(r: &csv::StringRecord) -> std::result::Result<AccuracyRecord, String> {
    if r.len() != ACCURACY_HEADER.len() {
        return Err(format!("expected {} fields, found {}", ACCURACY_HEADER.len(), r.len()));
    }
    let int = |i: usize| -> std::result::Result<u32, String> {
        r[i].parse::<u32>()
            .map_err(|_| format!("invalid integer in {}: {:?}", ACCURACY_HEADER[i], &r[i]))
    };
    Ok(AccuracyRecord {
        lm_type: r[0].to_owned(),
        task_id: r[1].to_owned(),
        subsample_index: int(2)?,
        m: int(3)?,
        n: int(4)?,
        correct_base: int(5)?,
        correct_extra: int(6)?,
        correct_test: int(7)?,
    })
}

/// Serialize to the exact accuracy CSV layout (LF line endings).
pub fn records_to_csv(records: &[AccuracyRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(ACCURACY_HEADER)?;
    for r in records {
        w.write_record([
            r.lm_type.as_str(),
            r.task_id.as_str(),
            &r.subsample_index.to_string(),
            &r.m.to_string(),
            &r.n.to_string(),
            &r.correct_base.to_string(),
            &r.correct_extra.to_string(),
            &r.correct_test.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Invalid(format!("csv buffer: {e}")))
}

pub fn write_accuracy_records(records: &[AccuracyRecord], path: &Path) -> Result<()> {
    if let Some(bad) = records.iter().find(|r| r.validate().is_err()) {
        return Err(Error::Invalid(format!("refusing to write invalid record {bad:?}")));
    }
    let bytes = records_to_csv(records)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
