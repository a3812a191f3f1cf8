use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// Enumerate all sign assignments when 2^k is at most this.
pub const EXHAUSTIVE_LIMIT: usize = 4096;
const BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Mean of the observed differences.
    pub statistic: f64,
    pub p_raw: f64,
    pub p_adjusted: Option<f64>,
    pub n_permutations: usize,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignFlipMode {
    /// Exhaustive when 2^k ≤ [`EXHAUSTIVE_LIMIT`], Monte Carlo otherwise.
    Auto,
    MonteCarlo,
}

/// One-sided paired sign-flip test of H₀: E[d] = 0 against E[d] > 0.
pub fn signflip_test(diffs: &[f64], n_permutations: usize, seed: u64) -> Result<TestResult> {
    signflip_test_with(diffs, n_permutations, seed, SignFlipMode::Auto)
}

pub fn signflip_test_with(diffs: &[f64], n_permutations: usize, seed: u64, mode: SignFlipMode) -> Result<TestResult> {
    if diffs.is_empty() {
        return Err(Error::Invalid("sign-flip test needs at least one difference".into()));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("differences must be finite".into()));
    }
    let k = diffs.len();
    let observed: f64 = diffs.iter().sum();
    // Sums within this tolerance of the observed one count as ties.
    let tol = 1e-12 * diffs.iter().map(|d| d.abs()).sum::<f64>();
    let at_least = |s: f64| s >= observed - tol;
    let statistic = observed / k as f64;

    let exhaustive = mode == SignFlipMode::Auto && k < usize::BITS as usize && (1usize << k) <= EXHAUSTIVE_LIMIT;
    if exhaustive {
        let total = 1usize << k;
        let hits = (0..total)
            .filter(|mask| {
                let s: f64 = diffs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
                    .sum();
                at_least(s)
            })
            .count();
        return Ok(TestResult {
            statistic,
            p_raw: hits as f64 / total as f64,
            p_adjusted: None,
            n_permutations: total,
            exhaustive: true,
        });
    }

    if n_permutations < 100 {
        return Err(Error::Config(format!(
            "Monte Carlo sign-flip test needs at least 100 permutations, got {n_permutations}"
        )));
    }
    let blocks = n_permutations.div_ceil(BLOCK);
    let hits: usize = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, "signflip", &[b as u64]);
            let len = BLOCK.min(n_permutations - b * BLOCK);
            (0..len)
                .filter(|_| {
                    let s: f64 = diffs.iter().map(|d| if rng.random::<bool>() { -d } else { *d }).sum();
                    at_least(s)
                })
                .count()
        })
        .sum();
    Ok(TestResult {
        statistic,
        p_raw: (1 + hits) as f64 / (n_permutations + 1) as f64,
        p_adjusted: None,
        n_permutations,
        exhaustive: false,
    })
}
