//! Corpus and accuracy-record file formats.

mod corpus;
mod records;

pub use corpus::{parse_corpus, parse_corpus_str, Corpus, CorpusDocument, CorpusFormat};
pub use records::{
    parse_accuracy_records, parse_accuracy_records_str, records_to_csv, write_accuracy_records, AccuracyRecord,
    RecordKey, ACCURACY_HEADER,
};

use serde::{Deserialize, Serialize};

/// One rejected input row. `row` is 1-based and counts data rows only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub rejection_reasons: Vec<Rejection>,
}

impl IngestReport {
    pub fn accepted(&self) -> usize {
        self.rows_read - self.rows_rejected
    }

    pub(crate) fn reject(&mut self, row: usize, reason: impl Into<String>) {
        self.rows_rejected += 1;
        self.rejection_reasons.push(Rejection {
            row,
            reason: reason.into(),
        });
    }
}
