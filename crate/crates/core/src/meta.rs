//! De-replication study: refit the model on slices holding a single
//! subsample per task and look at how much the conclusions move.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AccuracyRecord;
use crate::model::{
    sample_posterior, Framing, HierarchicalModel, ModelDesign, ParamLayout, PriorScales, SamplerConfig, CI_LEVEL,
};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub slice_count: usize,
    pub seed: u64,
    pub fit_config: SamplerConfig,
    pub threshold: f64,
}

impl SliceSpec {
    pub const PER_TASK_TRIPLES: usize = 1;

    pub fn new(seed: u64) -> Self {
        SliceSpec {
            slice_count: 500,
            seed,
            fit_config: SamplerConfig {
                chains: 2,
                draws: 500,
                tune: 300,
                ..SamplerConfig::default()
            },
            threshold: 0.04,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slice_count == 0 {
            return Err(Error::Config("slice_count must be >= 1".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::Config("threshold must be non-negative".into()));
        }
        self.fit_config.validate()
    }
}

/// One de-replicated view of the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub index: usize,
    /// Chosen subsample index per task, in task order.
    pub choice: Vec<(String, u32)>,
    /// Every record at the chosen subsample of each task (one per LM type).
    pub records: Vec<AccuracyRecord>,
}

/// Draw `spec.slice_count` slices, choosing one subsample index per task
/// uniformly among those present. Each slice uses its own stream.
///
/// Every name in `expected_tasks` must have at least one record.
pub fn dereplicate_slices(
    records: &[AccuracyRecord],
    spec: &SliceSpec,
    expected_tasks: &[String],
) -> Result<Vec<Slice>> {
    spec.validate()?;
    let mut tasks: Vec<&str> = Vec::new();
    let mut by_task: HashMap<&str, Vec<&AccuracyRecord>> = HashMap::new();
    for r in records {
        by_task
            .entry(&r.task_id)
            .or_insert_with(|| {
                tasks.push(&r.task_id);
                Vec::new()
            })
            .push(r);
    }
    if let Some(t) = expected_tasks.iter().find(|t| !by_task.contains_key(t.as_str())) {
        return Err(Error::MissingTask(t.clone()));
    }
    if tasks.is_empty() {
        return Err(Error::Invalid("no records to slice".into()));
    }
    let options: Vec<Vec<u32>> = tasks
        .iter()
        .map(|t| {
            let mut ks: Vec<u32> = by_task[t].iter().map(|r| r.subsample_index).collect();
            ks.sort_unstable();
            ks.dedup();
            ks
        })
        .collect();

    Ok((0..spec.slice_count)
        .map(|s| {
            let mut rng = rng::stream(spec.seed, "meta/slice", &[s as u64]);
            let mut choice = Vec::with_capacity(tasks.len());
            let mut chosen = Vec::new();
            for (t, ks) in tasks.iter().zip(&options) {
                let k = ks[rng.random_range(0..ks.len())];
                choice.push((t.to_string(), k));
                chosen.extend(by_task[t].iter().filter(|r| r.subsample_index == k).map(|&r| r.clone()));
            }
            Slice {
                index: s,
                choice,
                records: chosen,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResult {
    pub threshold: f64,
    /// Posterior mean of β for each successful slice.
    pub posterior_means_beta: Vec<f64>,
    /// Slice index behind each entry of `posterior_means_beta`.
    pub slice_ids: Vec<usize>,
    pub prob_outside: f64,
    pub ci_excludes_zero_count: usize,
    pub failed: Vec<usize>,
    pub ecdf: Vec<(f64, f64)>,
}

/// Fraction of `means` with |mean| > threshold.
pub fn prob_outside(means: &[f64], threshold: f64) -> f64 {
    if means.is_empty() {
        return f64::NAN;
    }
    means.iter().filter(|m| m.abs() > threshold).count() as f64 / means.len() as f64
}

/// Empirical CDF as (sorted value, cumulative fraction) points.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

pub fn odds_ratio(beta: f64) -> f64 {
    beta.exp()
}

fn fit_slice(slice: &Slice, spec: &SliceSpec) -> Result<(f64, bool)> {
    // With one subsample per task the subsample effect is confounded with
    // the task effect, so it is left out.
    let design = ModelDesign::from_records(&slice.records, Framing::Bias, false)?;
    let model = HierarchicalModel::new(design, PriorScales::default());
    let config = SamplerConfig {
        seed: rng::sub_seed(spec.seed, "meta/fit", &[slice.index as u64]),
        ..spec.fit_config.clone()
    };
    let draws = sample_posterior(&model, &config)?;
    let mean = draws.posterior_mean(ParamLayout::BETA);
    let (lo, hi) = draws.interval(ParamLayout::BETA, CI_LEVEL);
    Ok((mean, lo > 0.0 || hi < 0.0))
}

/// Fit the evaluation-bias model to every slice.
///
/// Failed fits are logged and listed in `failed`; the summary covers the
/// rest. Fails only if no slice could be fitted.
pub fn meta_fit(slices: &[Slice], spec: &SliceSpec) -> Result<MetaResult> {
    if slices.is_empty() {
        return Err(Error::Invalid("no slices to fit".into()));
    }
    let fits: Vec<Result<(f64, bool)>> = slices.par_iter().map(|s| fit_slice(s, spec)).collect();
    let mut result = MetaResult {
        threshold: spec.threshold,
        posterior_means_beta: Vec::new(),
        slice_ids: Vec::new(),
        prob_outside: f64::NAN,
        ci_excludes_zero_count: 0,
        failed: Vec::new(),
        ecdf: Vec::new(),
    };
    for (slice, fit) in slices.iter().zip(fits) {
        match fit {
            Ok((mean, excludes)) => {
                result.posterior_means_beta.push(mean);
                result.slice_ids.push(slice.index);
                result.ci_excludes_zero_count += excludes as usize;
            }
            Err(e) => {
                log::warn!("slice {} fit failed: {e}", slice.index);
                result.failed.push(slice.index);
            }
        }
    }
    if result.posterior_means_beta.is_empty() {
        return Err(Error::Sampler(format!("all {} slice fits failed", slices.len())));
    }
    result.prob_outside = prob_outside(&result.posterior_means_beta, spec.threshold);
    result.ecdf = ecdf(&result.posterior_means_beta);
    Ok(result)
}

/// Meta report as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReport {
    pub slice_count: usize,
    pub threshold: f64,
    pub prob_outside: f64,
    pub ci_excludes_zero_count: usize,
    pub means_file: String,
    pub failed_slices: Vec<usize>,
}

impl MetaReport {
    pub fn new(result: &MetaResult, slice_count: usize, means_file: impl Into<String>) -> Self {
        MetaReport {
            slice_count,
            threshold: result.threshold,
            prob_outside: result.prob_outside,
            ci_excludes_zero_count: result.ci_excludes_zero_count,
            means_file: means_file.into(),
            failed_slices: result.failed.clone(),
        }
    }
}

/// One-column CSV of per-slice posterior means.
pub fn write_means_csv(result: &MetaResult, path: &Path) -> Result<()> {
    let mut out = String::from("posterior_mean_beta\n");
    for m in &result.posterior_means_beta {
        out.push_str(&format!("{m}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
