//! No-U-turn Hamiltonian sampler with multinomial trajectory sampling.
//!
//! Warmup follows the usual windowed scheme: an initial fast interval that
//! only tunes the step size, a sequence of doubling slow windows that
//! re-estimate a diagonal inverse mass matrix (each followed by a step-size
//! search and a dual-averaging restart), and a terminal fast interval.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::math::log_add_exp;
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

/// A differentiable log density on R^d.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Return `log p(x)` and write its gradient into `grad`. Return a
    /// non-finite value for points outside the support.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub draws: usize,
    pub tune: usize,
    pub target_accept: f64,
    pub seed: u64,
    pub max_depth: usize,
    /// Energy error above which a trajectory is flagged divergent.
    pub max_energy_error: f64,
    /// Initial points are uniform on [-jitter, jitter] per coordinate.
    pub init_jitter: f64,
    pub init_attempts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            draws: 1000,
            tune: 500,
            target_accept: 0.8,
            seed: 0,
            max_depth: 10,
            max_energy_error: 1000.0,
            init_jitter: 0.5,
            init_attempts: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 {
            return Err(Error::Config("chains and draws must be >= 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("target_accept must lie in (0, 1)".into()));
        }
        if self.max_depth == 0 || self.max_depth > 30 {
            return Err(Error::Config("max_depth must lie in 1..=30".into()));
        }
        Ok(())
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    /// Row-major `draws × dim`.
    pub positions: Vec<f64>,
    pub divergent: Vec<bool>,
    pub tree_depth: Vec<u8>,
    pub accept_stat: Vec<f64>,
    pub n_leapfrog: Vec<u32>,
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
    pub warmup_divergences: usize,
}

/// Run `config.chains` independent chains in parallel.
///
/// Chain c draws from its own stream keyed by `(seed, c)`, so output does
/// not depend on thread scheduling.
pub fn run_chains<T: LogDensity>(target: &T, config: &SamplerConfig) -> Result<Vec<ChainTrace>> {
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(config.seed, "nuts/chain", &[c as u64]);
            Chain::new(target, config).run(&mut rng)
        })
        .collect()
}

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    logp: f64,
}

struct Subtree {
    left: Point,
    right: Point,
    proposal: Point,
    rho: Vec<f64>,
    log_weight: f64,
}

#[derive(Default)]
struct TransitionStats {
    sum_accept: f64,
    n_leapfrog: u32,
    divergent: bool,
    depth: u8,
}

struct Chain<'a, T> {
    target: &'a T,
    config: &'a SamplerConfig,
    inv_mass: Vec<f64>,
}

impl<'a, T: LogDensity> Chain<'a, T> {
    fn new(target: &'a T, config: &'a SamplerConfig) -> Self {
        Chain {
            target,
            config,
            inv_mass: vec![1.0; target.dim()],
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn energy(&self, pt: &Point) -> f64 {
        if pt.logp.is_finite() {
            -pt.logp + self.kinetic(&pt.p)
        } else {
            f64::INFINITY
        }
    }

    /// `p^♯ · rho` where `p^♯ = M⁻¹ p`.
    fn sharp_dot(&self, p: &[f64], rho: &[f64]) -> f64 {
        p.iter().zip(rho).zip(&self.inv_mass).map(|((p, r), m)| p * m * r).sum()
    }

    fn no_uturn(&self, minus: &[f64], plus: &[f64], rho: &[f64]) -> bool {
        self.sharp_dot(minus, rho) > 0.0 && self.sharp_dot(plus, rho) > 0.0
    }

    fn resample_momentum(&self, rng: &mut StreamRng, p: &mut [f64]) {
        for (pi, m) in p.iter_mut().zip(&self.inv_mass) {
            let z: f64 = rng.sample(StandardNormal);
            *pi = z / m.sqrt();
        }
    }

    fn leapfrog(&self, pt: &mut Point, eps: f64) {
        for (p, g) in pt.p.iter_mut().zip(&pt.g) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in pt.q.iter_mut().zip(&pt.p).zip(&self.inv_mass) {
            *q += eps * m * p;
        }
        pt.logp = self.target.logp_grad(&pt.q, &mut pt.g);
        if pt.logp.is_finite() {
            for (p, g) in pt.p.iter_mut().zip(&pt.g) {
                *p += 0.5 * eps * g;
            }
        }
    }

    fn initial_point(&self, rng: &mut StreamRng) -> Result<Point> {
        let d = self.target.dim();
        let jitter = self.config.init_jitter;
        for _ in 0..self.config.init_attempts.max(1) {
            let q: Vec<f64> = (0..d)
                .map(|_| {
                    if jitter > 0.0 {
                        rng.random_range(-jitter..jitter)
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut g = vec![0.0; d];
            let logp = self.target.logp_grad(&q, &mut g);
            if logp.is_finite() {
                return Ok(Point {
                    q,
                    p: vec![0.0; d],
                    g,
                    logp,
                });
            }
        }
        Err(Error::Init(format!(
            "non-finite log density at {} jittered starting points",
            self.config.init_attempts.max(1)
        )))
    }

    /// Double or halve `eps` until one leapfrog step's acceptance crosses 0.8.
    fn find_reasonable_step(&self, from: &Point, mut eps: f64, rng: &mut StreamRng) -> Result<f64> {
        let threshold = 0.8f64.ln();
        let mut direction = 0i8;
        loop {
            let mut pt = from.clone();
            self.resample_momentum(rng, &mut pt.p);
            let h0 = self.energy(&pt);
            self.leapfrog(&mut pt, eps);
            let h = self.energy(&pt);
            let delta = if h.is_nan() { f64::NEG_INFINITY } else { h0 - h };
            let up = delta > threshold;
            if direction == 0 {
                direction = if up { 1 } else { -1 };
            } else if (direction == 1) != up {
                return Ok(eps);
            }
            eps = if direction == 1 { eps * 2.0 } else { eps * 0.5 };
            if eps > 1e7 {
                return Err(Error::Sampler(
                    "step size diverged upward; posterior may be improper".into(),
                ));
            }
            if eps < 1e-300 {
                return Err(Error::Sampler("step size collapsed to zero".into()));
            }
        }
    }

    fn leaf(&self, start: &Point, eps: f64, h0: f64, stats: &mut TransitionStats) -> Option<Subtree> {
        let mut pt = start.clone();
        self.leapfrog(&mut pt, eps);
        stats.n_leapfrog += 1;
        let err = self.energy(&pt) - h0;
        if !err.is_finite() || err > self.config.max_energy_error {
            stats.divergent = true;
            return None;
        }
        stats.sum_accept += (-err).exp().min(1.0);
        Some(Subtree {
            left: pt.clone(),
            right: pt.clone(),
            rho: pt.p.clone(),
            log_weight: -err,
            proposal: pt,
        })
    }

    /// Join two adjacent subtrees; `newer` lies on the `forward` side.
    ///
    /// `biased` selects progressive sampling that favours the newer half
    /// (used only at the top level). Returns the merged tree and whether it
    /// is still free of U-turns, including the checks across the seam.
    fn merge(
        &self,
        older: Subtree,
        newer: Subtree,
        forward: bool,
        biased: bool,
        rng: &mut StreamRng,
    ) -> (Subtree, bool) {
        let log_weight = log_add_exp(older.log_weight, newer.log_weight);
        let take_new = if biased {
            newer.log_weight > older.log_weight || rng.random::<f64>() < (newer.log_weight - older.log_weight).exp()
        } else {
            rng.random::<f64>() < (newer.log_weight - log_weight).exp()
        };
        let (l, r) = if forward { (older, newer) } else { (newer, older) };
        let rho: Vec<f64> = l.rho.iter().zip(&r.rho).map(|(a, b)| a + b).collect();

        let across_left: Vec<f64> = l.rho.iter().zip(&r.left.p).map(|(a, b)| a + b).collect();
        let across_right: Vec<f64> = r.rho.iter().zip(&l.right.p).map(|(a, b)| a + b).collect();
        let ok = self.no_uturn(&l.left.p, &r.right.p, &rho)
            && self.no_uturn(&l.left.p, &r.left.p, &across_left)
            && self.no_uturn(&l.right.p, &r.right.p, &across_right);

        let proposal = match (forward, take_new) {
            (true, true) | (false, false) => r.proposal,
            _ => l.proposal,
        };
        (
            Subtree {
                left: l.left,
                right: r.right,
                proposal,
                rho,
                log_weight,
            },
            ok,
        )
    }

    fn build(
        &self,
        start: &Point,
        forward: bool,
        depth: usize,
        eps: f64,
        h0: f64,
        rng: &mut StreamRng,
        stats: &mut TransitionStats,
    ) -> Option<Subtree> {
        let step = if forward { eps } else { -eps };
        if depth == 0 {
            return self.leaf(start, step, h0, stats);
        }
        let first = self.build(start, forward, depth - 1, eps, h0, rng, stats)?;
        let edge = if forward { &first.right } else { &first.left };
        let second = self.build(edge, forward, depth - 1, eps, h0, rng, stats)?;
        let (merged, ok) = self.merge(first, second, forward, false, rng);
        ok.then_some(merged)
    }

    fn transition(&self, current: &Point, eps: f64, rng: &mut StreamRng) -> (Point, TransitionStats) {
        let mut init = current.clone();
        self.resample_momentum(rng, &mut init.p);
        let h0 = self.energy(&init);
        let mut traj = Subtree {
            left: init.clone(),
            right: init.clone(),
            rho: init.p.clone(),
            log_weight: 0.0,
            proposal: init,
        };
        let mut stats = TransitionStats::default();
        while (stats.depth as usize) < self.config.max_depth {
            let forward = rng.random::<bool>();
            let edge = if forward { &traj.right } else { &traj.left };
            let Some(sub) = self.build(edge, forward, stats.depth as usize, eps, h0, rng, &mut stats) else {
                break;
            };
            let (merged, ok) = self.merge(traj, sub, forward, true, rng);
            traj = merged;
            stats.depth += 1;
            if !ok {
                break;
            }
        }
        (traj.proposal, stats)
    }

    fn run(mut self, rng: &mut StreamRng) -> Result<ChainTrace> {
        let cfg = self.config;
        let d = self.target.dim();
        let mut current = self.initial_point(rng)?;
        let mut eps = self.find_reasonable_step(&current, 1.0, rng)?;
        let mut da = DualAveraging::new(cfg.target_accept, eps);
        let mut windows = MassWindows::new(cfg.tune, d);

        let mut trace = ChainTrace {
            positions: Vec::with_capacity(cfg.draws * d),
            divergent: Vec::with_capacity(cfg.draws),
            tree_depth: Vec::with_capacity(cfg.draws),
            accept_stat: Vec::with_capacity(cfg.draws),
            n_leapfrog: Vec::with_capacity(cfg.draws),
            step_size: eps,
            inv_mass: Vec::new(),
            warmup_divergences: 0,
        };

        for it in 0..cfg.tune + cfg.draws {
            let (next, stats) = self.transition(&current, eps, rng);
            current = next;
            let accept = if stats.n_leapfrog > 0 {
                stats.sum_accept / stats.n_leapfrog as f64
            } else {
                0.0
            };
            if it < cfg.tune {
                trace.warmup_divergences += stats.divergent as usize;
                eps = da.update(accept);
                if let Some(var) = windows.learn(&current.q) {
                    self.inv_mass = var;
                    current.logp = self.target.logp_grad(&current.q, &mut current.g);
                    eps = self.find_reasonable_step(&current, eps, rng)?;
                    da.restart(eps);
                }
                if it + 1 == cfg.tune {
                    eps = da.final_step();
                }
            } else {
                trace.positions.extend_from_slice(&current.q);
                trace.divergent.push(stats.divergent);
                trace.tree_depth.push(stats.depth);
                trace.accept_stat.push(accept);
                trace.n_leapfrog.push(stats.n_leapfrog);
            }
        }
        trace.step_size = eps;
        trace.inv_mass = self.inv_mass;
        Ok(trace)
    }
}

/// Nesterov dual averaging of log step size toward a target acceptance rate.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(target: f64, eps: f64) -> Self {
        let mut da = DualAveraging {
            target,
            mu: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
            counter: 0.0,
        };
        da.restart(eps);
        da
    }

    pub fn restart(&mut self, eps: f64) {
        self.mu = (10.0 * eps).ln();
        self.s_bar = 0.0;
        self.x_bar = 0.0;
        self.counter = 0.0;
    }

    /// Feed one acceptance statistic; returns the next step size.
    pub fn update(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let w = self.counter.powf(-Self::KAPPA);
        self.x_bar = w * x + (1.0 - w) * self.x_bar;
        x.exp()
    }

    pub fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Slow-window schedule and variance estimation for the diagonal metric.
#[derive(Debug, Clone)]
struct MassWindows {
    enabled: bool,
    tune: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window_end: usize,
    counter: usize,
    welford: Welford,
}

impl MassWindows {
    fn new(tune: usize, dim: usize) -> Self {
        let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
        let enabled = tune >= 20;
        if enabled && init + term + base > tune {
            init = (0.15 * tune as f64) as usize;
            term = (0.1 * tune as f64) as usize;
            base = tune - init - term;
        }
        MassWindows {
            enabled,
            tune,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window_end: init + base - 1,
            counter: 0,
            welford: Welford::new(dim),
        }
    }

    fn last_window_end(&self) -> usize {
        self.tune - self.term_buffer - 1
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer && self.counter < self.tune - self.term_buffer && self.counter != self.tune
    }

    fn end_window(&self) -> bool {
        self.counter == self.next_window_end && self.counter != self.tune
    }

    fn compute_next_window(&mut self) {
        if self.next_window_end == self.last_window_end() {
            return;
        }
        self.window_size *= 2;
        self.next_window_end = self.counter + self.window_size;
        if self.next_window_end != self.last_window_end()
            && self.next_window_end + 2 * self.window_size >= self.tune - self.term_buffer
        {
            self.next_window_end = self.last_window_end();
        }
    }

    /// Record a warmup position; returns a new inverse mass diagonal at the
    /// end of each slow window.
    fn learn(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if !self.enabled {
            return None;
        }
        if self.in_window() {
            self.welford.add(q);
        }
        let out = if self.end_window() && self.welford.n >= 2 {
            self.compute_next_window();
            let n = self.welford.n as f64;
            let var = self
                .welford
                .variance()
                .into_iter()
                .map(|v| (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0)))
                .collect();
            self.welford = Welford::new(q.len());
            Some(var)
        } else {
            None
        };
        self.counter += 1;
        out
    }
}

#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &xi) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = xi - *m;
            *m += delta / n;
            *s += delta * (xi - *m);
        }
    }

    fn variance(&self) -> Vec<f64> {
        let d = (self.n - 1) as f64;
        self.m2.iter().map(|s| s / d).collect()
    }
}
