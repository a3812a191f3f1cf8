use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use super::{HierarchicalModel, ParamLayout, PosteriorDraws};
use crate::math::sigmoid;
use crate::rng;
use crate::{Error, Result};

/// Simulated counts, `count × rows`, row order as in the design.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub count: usize,
    pub rows: usize,
    pub n: Vec<u32>,
    pub counts: Vec<u32>,
    /// Index of the posterior draw behind each sample (empty for prior draws).
    pub draw_index: Vec<usize>,
}

impl PredictiveSamples {
    pub fn sample(&self, s: usize) -> &[u32] {
        &self.counts[s * self.rows..(s + 1) * self.rows]
    }

    /// Y/n for every sample and row.
    pub fn rates(&self) -> Vec<f64> {
        self.counts
            .chunks(self.rows.max(1))
            .flat_map(|c| c.iter().zip(&self.n).map(|(&y, &n)| y as f64 / n as f64))
            .collect()
    }
}

fn simulate_rows(model: &HierarchicalModel, theta: &[f64], rng: &mut rng::StreamRng) -> Vec<u32> {
    (0..model.design.rows.len())
        .map(|r| {
            let n = model.design.rows[r].n;
            let p = sigmoid(model.linear_predictor(theta, r));
            Binomial::new(n as u64, p).map_or(0, |b| b.sample(rng) as u32)
        })
        .collect()
}

/// Draw `count` replicated datasets from the posterior predictive.
///
/// Draws are thinned evenly over the chain-major sequence. When `count`
/// exceeds the number of draws they are instead picked uniformly with
/// replacement.
pub fn posterior_predictive(
    model: &HierarchicalModel,
    draws: &PosteriorDraws,
    count: usize,
    seed: u64,
) -> Result<PredictiveSamples> {
    let total = draws.total_draws();
    if total == 0 {
        return Err(Error::Invalid("posterior has no draws".into()));
    }
    if draws.dim() != model.layout.dim {
        return Err(Error::Design(format!(
            "draws have {} parameters, model expects {}",
            draws.dim(),
            model.layout.dim
        )));
    }
    let draw_index: Vec<usize> = if count <= total {
        (0..count).map(|s| s * total / count).collect()
    } else {
        let mut pick = rng::stream(seed, "ppc/select", &[]);
        (0..count).map(|_| pick.random_range(0..total)).collect()
    };
    let counts: Vec<Vec<u32>> = draw_index
        .par_iter()
        .enumerate()
        .map(|(s, &d)| {
            let mut rng = rng::stream(seed, "ppc", &[s as u64]);
            simulate_rows(model, draws.draw(d), &mut rng)
        })
        .collect();
    Ok(PredictiveSamples {
        count,
        rows: model.design.rows.len(),
        n: model.design.rows.iter().map(|r| r.n).collect(),
        counts: counts.concat(),
        draw_index,
    })
}

/// Draw parameters from the prior, then counts from the likelihood.
pub fn prior_predictive(model: &HierarchicalModel, count: usize, seed: u64) -> PredictiveSamples {
    let layout = &model.layout;
    let p = &model.priors;
    let counts: Vec<Vec<u32>> = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(seed, "prior-predictive", &[s as u64]);
            let mut z = || -> f64 { rng.sample(StandardNormal) };
            let mut theta = vec![0.0; layout.dim];
            theta[ParamLayout::MU] = p.mu * z();
            theta[ParamLayout::ALPHA] = p.alpha * z();
            theta[ParamLayout::BETA] = p.beta * z();
            theta[ParamLayout::LOG_SIGMA_U] = (p.sigma_u * z()).abs().ln();
            if let Some(i) = layout.log_sigma_v {
                theta[i] = (p.sigma_v * z()).abs().ln();
            }
            theta[layout.log_sigma_w] = (p.sigma_w * z()).abs().ln();
            for t in &mut theta[layout.u.start..layout.w.end] {
                *t = z();
            }
            let mut rng = rng::stream(seed, "prior-predictive/y", &[s as u64]);
            simulate_rows(model, &theta, &mut rng)
        })
        .collect();
    PredictiveSamples {
        count,
        rows: model.design.rows.len(),
        n: model.design.rows.iter().map(|r| r.n).collect(),
        counts: counts.concat(),
        draw_index: Vec::new(),
    }
}
