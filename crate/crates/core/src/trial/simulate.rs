use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::AccuracyRecord;
use crate::math::{binomial_inverse_cdf, sigmoid};
use crate::model::Framing;
use crate::rng;
use crate::{Error, Result};

/// Ground-truth parameters for the binomial-logit generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeTruth {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub sigma_w: f64,
    pub lm_count: usize,
    pub task_count: usize,
    pub subsample_count: usize,
    pub n: u32,
    /// Carried into the emitted records; does not affect the draws.
    pub m: u32,
    /// Which accuracy columns receive the (control, treatment) counts.
    pub framing: Framing,
    pub seed: u64,
}

impl Default for GenerativeTruth {
    fn default() -> Self {
        GenerativeTruth {
            mu: 0.0,
            alpha: 0.0,
            beta: 0.0,
            sigma_u: 0.3,
            sigma_v: 0.3,
            sigma_w: 0.1,
            lm_count: 2,
            task_count: 25,
            subsample_count: 20,
            n: 200,
            m: 100,
            framing: Framing::Bias,
            seed: 0,
        }
    }
}

impl GenerativeTruth {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.alpha, self.beta, self.sigma_u, self.sigma_v, self.sigma_w]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Invalid("non-finite generative parameter".into()));
        }
        if self.sigma_u < 0.0 || self.sigma_v < 0.0 || self.sigma_w < 0.0 {
            return Err(Error::Invalid("standard deviations must be non-negative".into()));
        }
        if self.lm_count == 0 || self.task_count == 0 || self.subsample_count == 0 || self.n == 0 {
            return Err(Error::Invalid("lm, task, subsample counts and n must be >= 1".into()));
        }
        if self.lm_count > 2 {
            return Err(Error::Invalid("at most two lm types are supported".into()));
        }
        Ok(())
    }

    pub fn lm_name(i: usize) -> String {
        format!("lm{i}")
    }

    pub fn task_name(&self, j: usize) -> String {
        let width = self.task_count.saturating_sub(1).to_string().len().max(2);
        format!("task{j:0width$}")
    }
}

/// Realized random effects and per-record rates of one simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<AccuracyRecord>,
    /// `(control λ, treatment λ)` aligned with `records`.
    pub rates: Vec<(f64, f64)>,
    pub task_effects: Vec<f64>,
    /// Indexed `[task * subsample_count + subsample]`.
    pub subsample_effects: Vec<f64>,
    /// Indexed `[task * 2 + condition]`.
    pub interaction_effects: Vec<f64>,
}

/// Simulate paired accuracy records from the generative model.
///
/// Standardized effects are drawn first from one stream and then scaled, and
/// each count uses its own uniform, so runs that differ only in a scale
/// parameter share their randomness.
pub fn simulate(truth: &GenerativeTruth) -> Result<Simulation> {
    truth.validate()?;
    let (jn, kn) = (truth.task_count, truth.subsample_count);
    let mut eff = rng::stream(truth.seed, "sim/effects", &[]);
    let mut normals = |count: usize, scale: f64| -> Vec<f64> {
        (0..count)
            .map(|_| scale * eff.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let task_effects = normals(jn, truth.sigma_u);
    let subsample_effects = normals(jn * kn, truth.sigma_v);
    let interaction_effects = normals(jn * 2, truth.sigma_w);

    let mut records = Vec::with_capacity(truth.lm_count * jn * kn);
    let mut rates = Vec::with_capacity(records.capacity());
    for i in 0..truth.lm_count {
        for j in 0..jn {
            for k in 0..kn {
                let shared = truth.mu + truth.alpha * i as f64 + task_effects[j] + subsample_effects[j * kn + k];
                let lam0 = sigmoid(shared + interaction_effects[2 * j]);
                let lam1 = sigmoid(shared + interaction_effects[2 * j + 1] + truth.beta);
                let draw = |l: u64, lam: f64| {
                    let u: f64 = rng::stream(truth.seed, "sim/y", &[i as u64, j as u64, k as u64, l]).random();
                    binomial_inverse_cdf(truth.n, lam, u)
                };
                let (y0, y1) = (draw(0, lam0), draw(1, lam1));
                let (base, extra, test) = match truth.framing {
                    // unused column duplicates the control count
                    Framing::Boost => (y0, y1, y0),
                    Framing::Bias => (y0, y0, y1),
                };
                records.push(AccuracyRecord {
                    lm_type: GenerativeTruth::lm_name(i),
                    task_id: truth.task_name(j),
                    subsample_index: k as u32,
                    m: truth.m,
                    n: truth.n,
                    correct_base: base,
                    correct_extra: extra,
                    correct_test: test,
                });
                rates.push((lam0, lam1));
            }
        }
    }
    Ok(Simulation {
        records,
        rates,
        task_effects,
        subsample_effects,
        interaction_effects,
    })
}

pub fn simulate_records(truth: &GenerativeTruth) -> Result<Vec<AccuracyRecord>> {
    simulate(truth).map(|s| s.records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_truth() -> GenerativeTruth {
        GenerativeTruth {
            sigma_u: 0.0,
            sigma_v: 0.0,
            sigma_w: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn symmetric_truth_centers_at_half() {
        let truth = GenerativeTruth {
            lm_count: 1,
            task_count: 100,
            subsample_count: 100,
            n: 100,
            ..zero_truth()
        };
        let sim = simulate(&truth).unwrap();
        assert_eq!(sim.records.len(), 10_000);
        assert!(sim.rates.iter().all(|&(a, b)| a == 0.5 && b == 0.5));
        let mean = sim.records.iter().map(|r| r.acc_extra()).sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn treatment_rate_for_unit_beta() {
        let truth = GenerativeTruth {
            beta: 1.0,
            ..zero_truth()
        };
        let sim = simulate(&truth).unwrap();
        let (c, t) = sim.rates[0];
        assert_eq!(c, 0.5);
        assert!((t - 0.7311).abs() < 5e-5);
    }

    #[test]
    fn no_intervention_terms_means_equal_rates() {
        let truth = GenerativeTruth {
            sigma_w: 0.0,
            beta: 0.0,
            seed: 11,
            ..Default::default()
        };
        let sim = simulate(&truth).unwrap();
        assert!(sim.rates.iter().all(|&(a, b)| a == b));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let t = GenerativeTruth::default();
        assert_eq!(simulate_records(&t).unwrap(), simulate_records(&t).unwrap());
        let t2 = GenerativeTruth { seed: 1, ..t.clone() };
        assert_ne!(simulate_records(&t).unwrap(), simulate_records(&t2).unwrap());
    }

    #[test]
    fn framing_selects_columns() {
        let t = GenerativeTruth {
            lm_count: 1,
            task_count: 2,
            subsample_count: 2,
            framing: Framing::Boost,
            ..Default::default()
        };
        for r in simulate_records(&t).unwrap() {
            assert_eq!(r.correct_base, r.correct_test);
        }
    }

    #[test]
    fn rejects_negative_sigma() {
        let t = GenerativeTruth {
            sigma_v: -1.0,
            ..Default::default()
        };
        assert!(simulate(&t).is_err());
    }
}
