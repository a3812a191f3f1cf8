//! Repeated, seeded `extra` / `train` / `test` subsampling.
//!
//! Each repeat draws `extra` (n docs) and `test` (n docs) uniformly without
//! replacement from the whole corpus, then a class-stratified `train` set of
//! m docs from what remains. Repeats are independent: a document may land in
//! different splits of different repeats.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Corpus;
use crate::rng;
use crate::{Error, Result};

/// Default repeat count for the standard test-set sizes.
///
/// `override_repeats` wins when given; otherwise n must be one of 50, 100,
/// 200, 500.
pub fn repeat_schedule(n: usize, override_repeats: Option<usize>) -> Result<usize> {
    if let Some(r) = override_repeats {
        return if r >= 1 {
            Ok(r)
        } else {
            Err(Error::InvalidPlan("repeats must be >= 1".into()))
        };
    }
    match n {
        50 | 100 => Ok(100),
        200 => Ok(50),
        500 => Ok(20),
        other => Err(Error::UnsupportedN(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Labeled training-set size.
    pub m: usize,
    /// Size of both the `extra` and the `test` sets.
    pub n: usize,
    pub repeats: usize,
    pub master_seed: u64,
}

impl ExperimentPlan {
    pub fn new(m: usize, n: usize, repeats: usize, master_seed: u64) -> Result<Self> {
        let plan = ExperimentPlan {
            m,
            n,
            repeats,
            master_seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan with the default repeat count for `n`.
    pub fn with_default_repeats(m: usize, n: usize, master_seed: u64) -> Result<Self> {
        Self::new(m, n, repeat_schedule(n, None)?, master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidPlan("repeats must be >= 1".into()));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidPlan("m and n must be positive".into()));
        }
        Ok(())
    }

    pub fn required_docs(&self) -> usize {
        2 * self.n + self.m
    }

    pub fn check_feasible(&self, corpus: &Corpus) -> Result<()> {
        self.validate()?;
        if corpus.len() < self.required_docs() {
            return Err(Error::Infeasible {
                needed: self.required_docs(),
                available: corpus.len(),
            });
        }
        let classes = corpus.label_counts().len();
        if self.m < classes {
            return Err(Error::Stratification { m: self.m, classes });
        }
        Ok(())
    }
}

/// One repeat's disjoint id sets. Doubles as the on-disk split manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTriple {
    pub task_id: String,
    pub m: usize,
    pub n: usize,
    pub repeat_index: usize,
    pub extra_ids: Vec<String>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl SplitTriple {
    /// Check sizes, pairwise disjointness, and train class coverage.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        if self.extra_ids.len() != self.n || self.test_ids.len() != self.n {
            return Err(Error::Invalid("extra/test size differs from n".into()));
        }
        if self.train_ids.len() != self.m {
            return Err(Error::Invalid("train size differs from m".into()));
        }
        let mut seen = HashSet::new();
        for id in self.extra_ids.iter().chain(&self.train_ids).chain(&self.test_ids) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Invalid(format!("doc {id:?} appears in two splits")));
            }
        }
        let train_labels: HashSet<&str> = self
            .train_ids
            .iter()
            .map(|id| {
                corpus
                    .get(id)
                    .map(|d| d.label.as_str())
                    .ok_or_else(|| Error::Invalid(format!("unknown doc {id:?}")))
            })
            .collect::<Result<_>>()?;
        if train_labels.len() != corpus.label_counts().len() {
            return Err(Error::Invalid("train does not cover every class".into()));
        }
        Ok(())
    }

    /// Stable content hash, used to prove the three conditions share a split.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("split serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn manifest_path(dir: &Path, repeat_index: usize) -> PathBuf {
        dir.join(format!("split_{repeat_index:04}.json"))
    }

    pub fn write_manifest(&self, dir: &Path) -> Result<PathBuf> {
        let path = Self::manifest_path(dir, self.repeat_index);
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read_manifest(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Largest-remainder allocation of `m` train seats across classes.
///
/// `class_counts` must be keyed by label in lexicographic order (a
/// `BTreeMap` guarantees it). Every class gets at least one seat. Seats left
/// after flooring go to the largest fractional remainders, ties broken by
/// label order. Requires `m >= class_counts.len()`.
pub fn stratified_allocation(class_counts: &BTreeMap<&str, usize>, m: usize) -> Vec<usize> {
    let total = class_counts.values().sum::<usize>() as i128;
    let counts: Vec<i128> = class_counts.values().map(|&c| c as i128).collect();
    let mut seats: Vec<usize> = counts
        .iter()
        .map(|&c| ((m as i128 * c / total) as usize).max(1))
        .collect();
    // quota minus seats, scaled by the corpus size so it stays exact
    let slack = |i: usize, seats: &[usize]| m as i128 * counts[i] - seats[i] as i128 * total;

    // Bumping empty classes to one seat can overshoot; take seats back from
    // the most over-served classes.
    while seats.iter().sum::<usize>() > m {
        let i = (0..seats.len())
            .filter(|&i| seats[i] > 1)
            .min_by(|&a, &b| slack(a, &seats).cmp(&slack(b, &seats)).then(a.cmp(&b)))
            .expect("m >= class count");
        seats[i] -= 1;
    }

    let residual = m - seats.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..seats.len()).collect();
    order.sort_by(|&a, &b| slack(b, &seats).cmp(&slack(a, &seats)).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(residual) {
        seats[i] += 1;
    }
    seats
}

/// Draw `plan.repeats` split triples for one task.
///
/// Output depends only on corpus order, `task_id`, and the plan.
pub fn draw_splits(corpus: &Corpus, task_id: &str, plan: &ExperimentPlan) -> Result<Vec<SplitTriple>> {
    plan.check_feasible(corpus)?;
    (0..plan.repeats)
        .map(|r| draw_split(corpus, task_id, plan, r))
        .collect()
}

/// Draw the split for a single repeat; independent of every other repeat.
pub fn draw_split(corpus: &Corpus, task_id: &str, plan: &ExperimentPlan, repeat_index: usize) -> Result<SplitTriple> {
    let docs = corpus.documents();
    let mut rng = rng::stream(plan.master_seed, &format!("split/{task_id}"), &[repeat_index as u64]);

    let mut taken = vec![false; docs.len()];
    let extra = sample_from(&mut rng, &mut taken, plan.n);
    let test = sample_from(&mut rng, &mut taken, plan.n);

    let class_counts = corpus.label_counts();
    let mut pools: BTreeMap<&str, Vec<usize>> = class_counts.keys().map(|&l| (l, Vec::new())).collect();
    for (i, d) in docs.iter().enumerate() {
        if !taken[i] {
            pools.get_mut(d.label.as_str()).expect("label known").push(i);
        }
    }
    let mut seats = stratified_allocation(&class_counts, plan.m);
    rebalance_for_capacity(&mut seats, &pools, &class_counts, plan.m, repeat_index)?;

    let mut train = Vec::with_capacity(plan.m);
    for ((_, pool), &k) in pools.iter().zip(&seats) {
        let picks = index::sample(&mut rng, pool.len(), k);
        train.extend(picks.iter().map(|p| pool[p]));
    }
    train.sort_unstable();

    let ids = |idx: &[usize]| idx.iter().map(|&i| docs[i].doc_id.clone()).collect::<Vec<_>>();
    Ok(SplitTriple {
        task_id: task_id.to_owned(),
        m: plan.m,
        n: plan.n,
        repeat_index,
        extra_ids: ids(&extra),
        train_ids: ids(&train),
        test_ids: ids(&test),
    })
}

fn sample_from<R: Rng>(rng: &mut R, taken: &mut [bool], k: usize) -> Vec<usize> {
    let free: Vec<usize> = (0..taken.len()).filter(|&i| !taken[i]).collect();
    let mut picked: Vec<usize> = index::sample(rng, free.len(), k).iter().map(|p| free[p]).collect();
    picked.sort_unstable();
    for &i in &picked {
        taken[i] = true;
    }
    picked
}

/// Shift seats away from classes whose remaining pool is too small.
fn rebalance_for_capacity(
    seats: &mut [usize],
    pools: &BTreeMap<&str, Vec<usize>>,
    class_counts: &BTreeMap<&str, usize>,
    m: usize,
    repeat_index: usize,
) -> Result<()> {
    let caps: Vec<usize> = pools.values().map(Vec::len).collect();
    if let Some((label, _)) = pools.iter().find(|(_, p)| p.is_empty()) {
        return Err(Error::InvalidPlan(format!(
            "class {label:?} exhausted by extra/test draws in repeat {repeat_index}"
        )));
    }
    let mut shortfall = 0;
    for (s, &cap) in seats.iter_mut().zip(&caps) {
        if *s > cap {
            shortfall += *s - cap;
            *s = cap;
        }
    }
    if shortfall == 0 {
        return Ok(());
    }
    let total = class_counts.values().sum::<usize>() as i128;
    let counts: Vec<i128> = class_counts.values().map(|&c| c as i128).collect();
    while shortfall > 0 {
        let slack = |i: usize| m as i128 * counts[i] - seats[i] as i128 * total;
        let i = (0..seats.len())
            .filter(|&i| seats[i] < caps[i])
            .max_by(|&a, &b| slack(a).cmp(&slack(b)).then(b.cmp(&a)))
            .ok_or(Error::Infeasible {
                needed: m,
                available: m - shortfall,
            })?;
        seats[i] += 1;
        shortfall -= 1;
    }
    Ok(())
}
