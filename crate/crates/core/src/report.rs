//! Table of mean paired accuracy differences per (m, n, lm_type).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::AccuracyRecord;
use crate::{Error, Result};

pub const MEANS_HEADER: &str = "m,n,lm_type,mean_boost_pp,mean_bias_pp,record_count";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeansRow {
    pub m: u32,
    pub n: u32,
    pub lm_type: String,
    /// mean(acc_extra − acc_base) in percentage points, 2 decimals.
    pub mean_boost_pp: String,
    /// mean(acc_test − acc_extra) in percentage points, 2 decimals.
    pub mean_bias_pp: String,
    pub record_count: usize,
}

/// `100 · num / den` rounded half-to-even to two decimals.
///
/// Exact: the rounding is done on integers, so no binary fraction can tip a
/// half-way case.
pub fn format_pp(num: i128, den: i128) -> String {
    assert!(den > 0, "denominator must be positive");
    let scaled = 10_000 * num.abs();
    let (mut q, r) = (scaled / den, scaled % den);
    if 2 * r > den || (2 * r == den && q % 2 == 1) {
        q += 1;
    }
    let sign = if num < 0 && q > 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", q / 100, q % 100)
}

/// Cells are ordered by m, n, then lm_type.
pub fn report_means(records: &[AccuracyRecord]) -> Result<Vec<MeansRow>> {
    let mut cells: BTreeMap<(u32, u32, &str), (i128, i128, usize)> = BTreeMap::new();
    for r in records {
        r.validate().map_err(Error::Invalid)?;
        let e = cells.entry((r.m, r.n, &r.lm_type)).or_default();
        e.0 += r.correct_extra as i128 - r.correct_base as i128;
        e.1 += r.correct_test as i128 - r.correct_extra as i128;
        e.2 += 1;
    }
    Ok(cells
        .into_iter()
        .filter(|(_, (_, _, count))| *count > 0)
        .map(|((m, n, lm), (boost, bias, count))| {
            let den = count as i128 * n as i128;
            MeansRow {
                m,
                n,
                lm_type: lm.to_owned(),
                mean_boost_pp: format_pp(boost, den),
                mean_bias_pp: format_pp(bias, den),
                record_count: count,
            }
        })
        .collect())
}

pub fn means_to_csv(rows: &[MeansRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(MEANS_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.n.to_string(),
            r.lm_type.clone(),
            r.mean_boost_pp.clone(),
            r.mean_bias_pp.clone(),
            r.record_count.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Invalid(format!("csv buffer: {e}")))
}

pub fn write_means(rows: &[MeansRow], path: &Path) -> Result<()> {
    std::fs::write(path, means_to_csv(rows)?).map_err(|e| Error::io(path, e))
}
