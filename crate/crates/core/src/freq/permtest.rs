use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{bh_adjust, signflip_test};
use crate::dataset::AccuracyRecord;
use crate::model::Framing;
use crate::rng;
use crate::{Error, Result};

pub const TEST_REPORT_HEADER: &str = "m,n,lm_type,task_id,statistic,p_raw,p_adjusted,n_permutations,exhaustive";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReportRow {
    pub m: u32,
    pub n: u32,
    pub lm_type: String,
    pub task_id: String,
    pub statistic: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub n_permutations: usize,
    pub exhaustive: bool,
}

/// Sign-flip test of treatment − control accuracy for every
/// (m, n, lm_type, task), BH-adjusted within each (m, n, lm_type) family.
///
/// Differences within a task are ordered by subsample index.
pub fn permtest_report(
    records: &[AccuracyRecord],
    framing: Framing,
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<TestReportRow>> {
    let mut groups: BTreeMap<(u32, u32, &str), BTreeMap<&str, Vec<(u32, f64)>>> = BTreeMap::new();
    for r in records {
        r.validate().map_err(Error::Invalid)?;
        let d = (framing.treatment(r) as f64 - framing.control(r) as f64) / r.n as f64;
        groups
            .entry((r.m, r.n, r.lm_type.as_str()))
            .or_default()
            .entry(r.task_id.as_str())
            .or_default()
            .push((r.subsample_index, d));
    }
    let mut rows = Vec::new();
    for ((m, n, lm), tasks) in groups {
        let mut family = Vec::with_capacity(tasks.len());
        for (task, mut diffs) in tasks {
            diffs.sort_by_key(|&(k, _)| k);
            let d: Vec<f64> = diffs.into_iter().map(|(_, d)| d).collect();
            let test_seed = rng::sub_seed(seed, &format!("permtest/{lm}/{task}"), &[m as u64, n as u64]);
            let res = signflip_test(&d, n_permutations, test_seed)?;
            family.push((task, res));
        }
        let p: Vec<f64> = family.iter().map(|(_, r)| r.p_raw).collect();
        let adj = bh_adjust(&p)?;
        for ((task, res), p_adjusted) in family.into_iter().zip(adj) {
            rows.push(TestReportRow {
                m,
                n,
                lm_type: lm.to_owned(),
                task_id: task.to_owned(),
                statistic: res.statistic,
                p_raw: res.p_raw,
                p_adjusted,
                n_permutations: res.n_permutations,
                exhaustive: res.exhaustive,
            });
        }
    }
    Ok(rows)
}

pub fn write_test_report(rows: &[TestReportRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(TEST_REPORT_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.n.to_string(),
            r.lm_type.clone(),
            r.task_id.clone(),
            r.statistic.to_string(),
            r.p_raw.to_string(),
            r.p_adjusted.to_string(),
            r.n_permutations.to_string(),
            r.exhaustive.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv buffer: {e}")))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
