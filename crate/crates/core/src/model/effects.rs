//! Average accuracy differences computed from predictive counts.
//!
//! Each summary keeps its per-sample integer numerators Σ(Ŷ₁ − Ŷ₀) and the
//! number of pairs behind them, so pooling conditional summaries reproduces
//! the marginal one exactly.

use serde::{Deserialize, Serialize};

use super::{ModelDesign, PredictiveSamples};
use crate::math::{equal_tailed_interval, mean};
use crate::{Error, Result};

pub const CI_LEVEL: f64 = 0.89;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Marginal,
    Conditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectSummary {
    pub kind: EffectKind,
    pub lm: Option<String>,
    pub task: Option<String>,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    /// Σ(Ŷ₁ − Ŷ₀) per predictive sample.
    pub totals: Vec<i64>,
    pub pairs: usize,
    pub n: u32,
}

impl EffectSummary {
    fn from_totals(
        kind: EffectKind,
        lm: Option<String>,
        task: Option<String>,
        totals: Vec<i64>,
        pairs: usize,
        n: u32,
    ) -> Self {
        let denom = pairs as f64 * n as f64;
        let samples: Vec<f64> = totals.iter().map(|&t| t as f64 / denom).collect();
        let (ci_low, ci_high) = equal_tailed_interval(&samples, CI_LEVEL);
        EffectSummary {
            kind,
            lm,
            task,
            mean: mean(&samples),
            ci_low,
            ci_high,
            level: CI_LEVEL,
            samples,
            totals,
            pairs,
            n,
        }
    }
}

fn totals_over(pred: &PredictiveSamples, pairs: &[(usize, usize)]) -> Vec<i64> {
    (0..pred.count)
        .map(|s| {
            let y = pred.sample(s);
            pairs.iter().map(|&(c, t)| y[t] as i64 - y[c] as i64).sum()
        })
        .collect()
}

fn common_n(design: &ModelDesign) -> Result<u32> {
    design
        .common_n()
        .ok_or_else(|| Error::Design("effects need a single test size n across rows".into()))
}

fn check_shape(pred: &PredictiveSamples, design: &ModelDesign) -> Result<()> {
    if pred.rows != design.rows.len() {
        return Err(Error::Pairing(format!(
            "predictive samples have {} rows, design has {}",
            pred.rows,
            design.rows.len()
        )));
    }
    Ok(())
}

/// Average treatment minus control accuracy over every (lm, task, subsample).
pub fn marginal_effect(pred: &PredictiveSamples, design: &ModelDesign) -> Result<EffectSummary> {
    check_shape(pred, design)?;
    let pairs = design.pairs()?;
    if pairs.is_empty() {
        return Err(Error::Pairing("design has no paired rows".into()));
    }
    let n = common_n(design)?;
    Ok(EffectSummary::from_totals(
        EffectKind::Marginal,
        None,
        None,
        totals_over(pred, &pairs),
        pairs.len(),
        n,
    ))
}

/// Effect for one (lm, task), averaging only across its subsamples.
pub fn conditional_effect(
    pred: &PredictiveSamples,
    design: &ModelDesign,
    lm: usize,
    task: usize,
) -> Result<EffectSummary> {
    check_shape(pred, design)?;
    let pairs: Vec<(usize, usize)> = design
        .pairs()?
        .into_iter()
        .filter(|&(c, _)| design.rows[c].lm == lm && design.rows[c].task == task)
        .collect();
    if pairs.is_empty() {
        return Err(Error::Index(format!("no observations for lm {lm}, task {task}")));
    }
    let n = common_n(design)?;
    Ok(EffectSummary::from_totals(
        EffectKind::Conditional,
        design.lm_labels.get(lm).cloned(),
        design.task_labels.get(task).cloned(),
        totals_over(pred, &pairs),
        pairs.len(),
        n,
    ))
}

/// Subsample-count-weighted mean of several summaries, as a marginal effect.
pub fn pool_effects(parts: &[EffectSummary]) -> Result<EffectSummary> {
    let first = parts.first().ok_or_else(|| Error::Invalid("nothing to pool".into()))?;
    if parts
        .iter()
        .any(|p| p.n != first.n || p.totals.len() != first.totals.len())
    {
        return Err(Error::Pairing("summaries differ in n or sample count".into()));
    }
    let totals = (0..first.totals.len())
        .map(|s| parts.iter().map(|p| p.totals[s]).sum())
        .collect();
    let pairs = parts.iter().map(|p| p.pairs).sum();
    Ok(EffectSummary::from_totals(
        EffectKind::Marginal,
        None,
        None,
        totals,
        pairs,
        first.n,
    ))
}
