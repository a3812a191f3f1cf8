use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::AccuracyRecord;
use crate::rng;
use crate::{Error, Result};

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = crate::math::mean(x);
    let my = crate::math::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Invalid("spearman needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in correlation input".into()));
    }
    pearson(&ranks(x), &ranks(y)).ok_or_else(|| Error::Domain("zero rank variance; correlation undefined".into()))
}

/// Subsample-level paired values of one task for two LM types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPairs {
    pub task_id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Evaluation-bias differences (acc_test − acc_extra) of `lm_x` and `lm_y`,
/// paired by (task, subsample, m, n). Tasks appear in first-seen order.
pub fn bias_pairs_by_task(records: &[AccuracyRecord], lm_x: &str, lm_y: &str) -> Vec<TaskPairs> {
    let bias = |r: &AccuracyRecord| (r.correct_test as f64 - r.correct_extra as f64) / r.n as f64;
    let by_key: HashMap<(&str, u32, u32, u32), &AccuracyRecord> = records
        .iter()
        .filter(|r| r.lm_type == lm_y)
        .map(|r| ((r.task_id.as_str(), r.subsample_index, r.m, r.n), r))
        .collect();
    let mut out: Vec<TaskPairs> = Vec::new();
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for r in records.iter().filter(|r| r.lm_type == lm_x) {
        let Some(other) = by_key.get(&(r.task_id.as_str(), r.subsample_index, r.m, r.n)) else {
            continue;
        };
        let i = *pos.entry(&r.task_id).or_insert_with(|| {
            out.push(TaskPairs {
                task_id: r.task_id.clone(),
                x: Vec::new(),
                y: Vec::new(),
            });
            out.len() - 1
        });
        out[i].x.push(bias(r));
        out[i].y.push(bias(other));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationNulls {
    pub tasks: Vec<String>,
    /// Observed per-task correlations, aligned with `tasks`.
    pub observed: Vec<f64>,
    /// `nulls[d][t]`: correlation of task t under permutation draw d.
    pub nulls: Vec<Vec<f64>>,
    pub skipped: Vec<String>,
}

/// Per-task Spearman correlations, plus `n_draws` null distributions built
/// by shuffling the y side within each task.
pub fn permuted_correlation_nulls(pairs_by_task: &[TaskPairs], n_draws: usize, seed: u64) -> CorrelationNulls {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for p in pairs_by_task {
        match spearman(&p.x, &p.y) {
            Ok(r) => kept.push((p, r)),
            Err(e) => {
                log::warn!("skipping task {}: {e}", p.task_id);
                skipped.push(p.task_id.clone());
            }
        }
    }
    let nulls = (0..n_draws)
        .map(|d| {
            let mut rng = rng::stream(seed, "correlation-null", &[d as u64]);
            kept.iter()
                .map(|(p, _)| {
                    let mut y = p.y.clone();
                    y.shuffle(&mut rng);
                    spearman(&p.x, &y).unwrap_or(f64::NAN)
                })
                .collect()
        })
        .collect();
    CorrelationNulls {
        tasks: kept.iter().map(|(p, _)| p.task_id.clone()).collect(),
        observed: kept.iter().map(|&(_, r)| r).collect(),
        nulls,
        skipped,
    }
}
