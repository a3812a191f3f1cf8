//! Log posterior of the binomial-logit model in the unconstrained,
//! non-centered parameterization, with its analytic gradient.
//!
//! logit λ = μ + α·z + σ_U·u_j + σ_V·v_jk + σ_W·w_jl + β·x

use super::params::{ParamLayout, PriorScales};
use super::sampler::LogDensity;
use super::ModelDesign;
use crate::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
fn normal_lpdf(x: f64, scale: f64) -> f64 {
    let s = x / scale;
    -0.5 * s * s - scale.ln() - HALF_LN_2PI
}

/// Half-normal log density of σ = e^t plus the log-Jacobian t.
#[inline]
fn log_halfnormal_lpdf(t: f64, scale: f64) -> f64 {
    let s = t.exp() / scale;
    std::f64::consts::LN_2 - HALF_LN_2PI - scale.ln() - 0.5 * s * s + t
}

/// d/dt of [`log_halfnormal_lpdf`].
#[inline]
fn log_halfnormal_grad(t: f64, scale: f64) -> f64 {
    let s = t.exp() / scale;
    1.0 - s * s
}

#[derive(Debug, Clone)]
pub struct HierarchicalModel {
    pub design: ModelDesign,
    pub layout: ParamLayout,
    pub priors: PriorScales,
}

impl HierarchicalModel {
    pub fn new(design: ModelDesign, priors: PriorScales) -> Self {
        let layout = ParamLayout::for_design(&design);
        HierarchicalModel { design, layout, priors }
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.layout.dim {
            return Err(Error::Domain(format!(
                "parameter vector has length {}, model expects {}",
                theta.len(),
                self.layout.dim
            )));
        }
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite parameter at index {i}")));
        }
        Ok(())
    }

    pub fn log_prior(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.prior_impl(theta, None))
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.likelihood_impl(theta, None))
    }

    pub fn log_posterior(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.prior_impl(theta, None) + self.likelihood_impl(theta, None))
    }

    pub fn grad_log_posterior(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let mut g = vec![0.0; theta.len()];
        self.prior_impl(theta, Some(&mut g));
        self.likelihood_impl(theta, Some(&mut g));
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite gradient".into()));
        }
        Ok(g)
    }

    /// logit λ for one design row.
    #[inline]
    pub fn linear_predictor(&self, theta: &[f64], row: usize) -> f64 {
        let l = &self.layout;
        let r = &self.design.rows[row];
        let mut eta = theta[ParamLayout::MU]
            + theta[ParamLayout::ALPHA] * r.lm as f64
            + theta[ParamLayout::BETA] * r.condition as f64
            + l.sigma_u(theta) * theta[l.u.start + r.task]
            + l.sigma_w(theta) * theta[l.w_index(r.task, r.condition)];
        if l.log_sigma_v.is_some() {
            eta += l.sigma_v(theta) * theta[l.v.start + r.subsample];
        }
        eta
    }

    fn prior_impl(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        let p = &self.priors;
        let mut lp = normal_lpdf(theta[ParamLayout::MU], p.mu)
            + normal_lpdf(theta[ParamLayout::ALPHA], p.alpha)
            + normal_lpdf(theta[ParamLayout::BETA], p.beta);
        let mut sigmas = vec![(ParamLayout::LOG_SIGMA_U, p.sigma_u)];
        if let Some(i) = l.log_sigma_v {
            sigmas.push((i, p.sigma_v));
        }
        sigmas.push((l.log_sigma_w, p.sigma_w));
        for &(i, s) in &sigmas {
            lp += log_halfnormal_lpdf(theta[i], s);
        }
        let std_block = l.u.start..l.w.end;
        lp += theta[std_block.clone()]
            .iter()
            .map(|&z| -0.5 * z * z - HALF_LN_2PI)
            .sum::<f64>();

        if let Some(g) = grad {
            g[ParamLayout::MU] -= theta[ParamLayout::MU] / (p.mu * p.mu);
            g[ParamLayout::ALPHA] -= theta[ParamLayout::ALPHA] / (p.alpha * p.alpha);
            g[ParamLayout::BETA] -= theta[ParamLayout::BETA] / (p.beta * p.beta);
            for &(i, s) in &sigmas {
                g[i] += log_halfnormal_grad(theta[i], s);
            }
            for i in std_block {
                g[i] -= theta[i];
            }
        }
        lp
    }

    fn likelihood_impl(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        let (su, sv, sw) = (l.sigma_u(theta), l.sigma_v(theta), l.sigma_w(theta));
        let has_v = l.log_sigma_v.is_some();
        let (mu, alpha, beta) = (
            theta[ParamLayout::MU],
            theta[ParamLayout::ALPHA],
            theta[ParamLayout::BETA],
        );
        let mut ll = self.design.ln_choose_total();
        let (mut g_mu, mut g_alpha, mut g_beta) = (0.0, 0.0, 0.0);
        let (mut g_lsu, mut g_lsv, mut g_lsw) = (0.0, 0.0, 0.0);

        for r in &self.design.rows {
            let iu = l.u.start + r.task;
            let iw = l.w_index(r.task, r.condition);
            let z = r.lm as f64;
            let x = r.condition as f64;
            let mut eta = mu + alpha * z + beta * x + su * theta[iu] + sw * theta[iw];
            let iv = l.v.start + r.subsample;
            if has_v {
                eta += sv * theta[iv];
            }
            let (y, n) = (r.y as f64, r.n as f64);
            // y·ln λ + (n − y)·ln(1 − λ) = y·η − n·softplus(η)
            let e = (-eta.abs()).exp();
            ll += y * eta - n * (eta.max(0.0) + e.ln_1p());

            if let Some(g) = grad.as_deref_mut() {
                let lambda = if eta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                let resid = y - n * lambda;
                g_mu += resid;
                g_alpha += resid * z;
                g_beta += resid * x;
                g[iu] += resid * su;
                g_lsu += resid * su * theta[iu];
                g[iw] += resid * sw;
                g_lsw += resid * sw * theta[iw];
                if has_v {
                    g[iv] += resid * sv;
                    g_lsv += resid * sv * theta[iv];
                }
            }
        }

        if let Some(g) = grad {
            g[ParamLayout::MU] += g_mu;
            g[ParamLayout::ALPHA] += g_alpha;
            g[ParamLayout::BETA] += g_beta;
            g[ParamLayout::LOG_SIGMA_U] += g_lsu;
            if let Some(i) = l.log_sigma_v {
                g[i] += g_lsv;
            }
            g[l.log_sigma_w] += g_lsw;
        }
        ll
    }
}

impl LogDensity for HierarchicalModel {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let lp = self.prior_impl(theta, Some(grad)) + self.likelihood_impl(theta, Some(grad));
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }
}
