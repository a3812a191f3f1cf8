//! Numeric helpers shared across modules.

use std::sync::OnceLock;

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)`; finite for any finite x.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

const LN_FACT_CACHE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_CACHE);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..LN_FACT_CACHE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(k!)`. Exact table up to 4095, Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < LN_FACT_CACHE {
        return ln_fact_table()[k as usize];
    }
    let x = k as f64 + 1.0;
    // ln Γ(x) Stirling with three correction terms; error < 1e-15 for x > 4096
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Smallest k with `P(Binomial(n, p) <= k) >= u`.
///
/// Inverse-CDF sampling keeps draws monotone in `p` for a fixed uniform,
/// so simulations that share uniforms are coupled across parameter values.
pub fn binomial_inverse_cdf(n: u32, p: f64, u: f64) -> u32 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let logs: Vec<f64> = (0..=n as u64)
        .map(|k| ln_choose(n as u64, k) + k as f64 * lp + (n as u64 - k) as f64 * lq)
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= target {
            return k as u32;
        }
    }
    n
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Equal-tailed interval whose ends are order statistics of `samples`.
///
/// With S samples and tail mass a = (1 - level)/2, returns the
/// `floor(a·S)`-th and `(ceil((1-a)·S) - 1)`-th smallest values (0-based).
pub fn equal_tailed_interval(samples: &[f64], level: f64) -> (f64, f64) {
    assert!(!samples.is_empty(), "empty sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s = sorted.len();
    let tail = (1.0 - level) / 2.0;
    // The nudge keeps products like 0.055 * 4000 from landing a hair off an
    // integer and shifting the index by one.
    let lo = ((tail * s as f64 + 1e-9).floor() as usize).min(s - 1);
    let hi = (((1.0 - tail) * s as f64 - 1e-9).ceil() as usize).clamp(1, s) - 1;
    (sorted[lo], sorted[hi.max(lo)])
}

/// Kolmogorov–Smirnov distance between a sample and Uniform[0, 1].
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            let above = (i as f64 + 1.0) / n - x;
            let below = x - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
