use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ModelDesign;

/// Prior standard deviations. Half-normal scales for the σ's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorScales {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub sigma_w: f64,
}

impl Default for PriorScales {
    fn default() -> Self {
        PriorScales {
            mu: 1.0,
            alpha: 5.0,
            beta: 1.0,
            sigma_u: 1.0,
            sigma_v: 1.0,
            sigma_w: 3.5355,
        }
    }
}

/// Positions of each parameter block inside the flat unconstrained vector.
///
/// Order: μ, α, β, log σ_U, [log σ_V], log σ_W, u_std (J), [v_std (cells)],
/// w_std (J × 2, condition fastest). The bracketed blocks exist only when
/// the design keeps the subsample effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub n_tasks: usize,
    pub n_cells: usize,
    pub log_sigma_v: Option<usize>,
    pub log_sigma_w: usize,
    pub u: Range<usize>,
    pub v: Range<usize>,
    pub w: Range<usize>,
    pub dim: usize,
}

impl ParamLayout {
    pub const MU: usize = 0;
    pub const ALPHA: usize = 1;
    pub const BETA: usize = 2;
    pub const LOG_SIGMA_U: usize = 3;

    pub fn new(n_tasks: usize, n_cells: usize, subsample_effect: bool) -> Self {
        let (log_sigma_v, log_sigma_w) = if subsample_effect { (Some(4), 5) } else { (None, 4) };
        let u = log_sigma_w + 1..log_sigma_w + 1 + n_tasks;
        let v_len = if subsample_effect { n_cells } else { 0 };
        let v = u.end..u.end + v_len;
        let w = v.end..v.end + 2 * n_tasks;
        ParamLayout {
            n_tasks,
            n_cells: v_len,
            log_sigma_v,
            log_sigma_w,
            dim: w.end,
            u,
            v,
            w,
        }
    }

    pub fn for_design(design: &ModelDesign) -> Self {
        Self::new(design.n_tasks(), design.n_cells(), design.subsample_effect)
    }

    #[inline]
    pub fn w_index(&self, task: usize, condition: usize) -> usize {
        self.w.start + 2 * task + condition
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = vec![
            "mu".to_owned(),
            "alpha".to_owned(),
            "beta".to_owned(),
            "log_sigma_u".to_owned(),
        ];
        if self.log_sigma_v.is_some() {
            names.push("log_sigma_v".to_owned());
        }
        names.push("log_sigma_w".to_owned());
        names.extend((0..self.n_tasks).map(|j| format!("u_std[{j}]")));
        names.extend((0..self.n_cells).map(|c| format!("v_std[{c}]")));
        for j in 0..self.n_tasks {
            for l in 0..2 {
                names.push(format!("w_std[{j}][{l}]"));
            }
        }
        names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| n == name)
    }

    pub fn sigma_u(&self, theta: &[f64]) -> f64 {
        theta[Self::LOG_SIGMA_U].exp()
    }

    /// σ_V, or 0 when the subsample effect is absent.
    pub fn sigma_v(&self, theta: &[f64]) -> f64 {
        self.log_sigma_v.map_or(0.0, |i| theta[i].exp())
    }

    pub fn sigma_w(&self, theta: &[f64]) -> f64 {
        theta[self.log_sigma_w].exp()
    }

    /// Indices of parameters with zero-mean normal priors (everything but the
    /// log σ's).
    pub fn normal_indices(&self) -> impl Iterator<Item = usize> + '_ {
        [Self::MU, Self::ALPHA, Self::BETA]
            .into_iter()
            .chain(self.u.clone())
            .chain(self.v.clone())
            .chain(self.w.clone())
    }
}
