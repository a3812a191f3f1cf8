//! Hierarchical binomial-logit model of paired accuracy counts.

mod density;
mod design;
pub mod diagnostics;
mod effects;
mod io;
mod params;
mod predictive;
pub mod sampler;

pub use density::HierarchicalModel;
pub use design::{Framing, ModelDesign, Observation, SubsampleCell};
pub use effects::{conditional_effect, marginal_effect, pool_effects, EffectKind, EffectSummary, CI_LEVEL};
pub use io::{
    read_diagnostics, read_draws_csv, write_diagnostics, write_draws_csv, write_effect_samples, DiagnosticsReport,
    EffectReport,
};
pub use params::{ParamLayout, PriorScales};
pub use predictive::{posterior_predictive, prior_predictive, PredictiveSamples};
pub use sampler::{run_chains, ChainTrace, LogDensity, SamplerConfig};

use crate::math::{equal_tailed_interval, mean};
use crate::{Error, Result};

/// Post-warmup draws from all chains plus per-parameter diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub param_names: Vec<String>,
    /// Row-major `chains × draws × dim`.
    pub samples: Vec<f64>,
    /// One flag per draw, chain-major.
    pub divergent: Vec<bool>,
    pub step_sizes: Vec<f64>,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
}

impl PosteriorDraws {
    /// Assemble draws from raw chain traces and compute diagnostics.
    pub fn from_traces(param_names: Vec<String>, traces: Vec<ChainTrace>) -> Result<Self> {
        let dim = param_names.len();
        let chains = traces.len();
        let draws_per_chain = traces.first().map_or(0, |t| t.divergent.len());
        if traces
            .iter()
            .any(|t| t.divergent.len() != draws_per_chain || t.positions.len() != draws_per_chain * dim)
        {
            return Err(Error::Sampler("chains returned ragged output".into()));
        }
        let mut samples = Vec::with_capacity(chains * draws_per_chain * dim);
        let mut divergent = Vec::with_capacity(chains * draws_per_chain);
        let mut step_sizes = Vec::with_capacity(chains);
        for t in traces {
            samples.extend(t.positions);
            divergent.extend(t.divergent);
            step_sizes.push(t.step_size);
        }
        Self::from_parts(param_names, chains, draws_per_chain, samples, divergent, step_sizes)
    }

    /// Build from stored samples; R̂ and ESS are recomputed.
    pub fn from_parts(
        param_names: Vec<String>,
        chains: usize,
        draws_per_chain: usize,
        samples: Vec<f64>,
        divergent: Vec<bool>,
        step_sizes: Vec<f64>,
    ) -> Result<Self> {
        let dim = param_names.len();
        if samples.len() != chains * draws_per_chain * dim || divergent.len() != chains * draws_per_chain {
            return Err(Error::Invalid(
                "draw array sizes disagree with chains × draws × dim".into(),
            ));
        }
        let mut out = PosteriorDraws {
            chains,
            draws_per_chain,
            param_names,
            samples,
            divergent,
            step_sizes,
            rhat: Vec::new(),
            ess: Vec::new(),
        };
        let traces: Vec<Vec<Vec<f64>>> = (0..dim).map(|p| out.traces(p)).collect();
        out.rhat = traces.iter().map(|t| diagnostics::split_rhat(t)).collect();
        out.ess = traces.iter().map(|t| diagnostics::ess(t)).collect();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.param_names.len()
    }

    pub fn total_draws(&self) -> usize {
        self.chains * self.draws_per_chain
    }

    /// Parameter vector of draw `s` in chain-major order.
    pub fn draw(&self, s: usize) -> &[f64] {
        let d = self.dim();
        &self.samples[s * d..(s + 1) * d]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    /// Per-chain traces of one parameter.
    pub fn traces(&self, param: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..self.chains)
            .map(|c| {
                (0..self.draws_per_chain)
                    .map(|s| self.samples[(c * self.draws_per_chain + s) * d + param])
                    .collect()
            })
            .collect()
    }

    /// All draws of one parameter, chain-major.
    pub fn column(&self, param: usize) -> Vec<f64> {
        self.samples.iter().skip(param).step_by(self.dim()).copied().collect()
    }

    pub fn divergences(&self) -> usize {
        self.divergent.iter().filter(|&&d| d).count()
    }

    pub fn posterior_mean(&self, param: usize) -> f64 {
        mean(&self.column(param))
    }

    /// Equal-tailed interval of one parameter at `level`.
    pub fn interval(&self, param: usize, level: f64) -> (f64, f64) {
        equal_tailed_interval(&self.column(param), level)
    }
}

/// Run the sampler on `model` and collect diagnostics.
///
/// Fails if every post-warmup draw is divergent.
pub fn sample_posterior(model: &HierarchicalModel, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let traces = run_chains(model, config)?;
    let warmup_div: usize = traces.iter().map(|t| t.warmup_divergences).sum();
    let draws = PosteriorDraws::from_traces(model.layout.names(), traces)?;
    let div = draws.divergences();
    if div > 0 || warmup_div > 0 {
        log::warn!("{div} divergent post-warmup draws ({warmup_div} during warmup)");
    }
    if div == draws.total_draws() {
        return Err(Error::Sampler(format!("all {div} draws were divergent")));
    }
    Ok(draws)
}
