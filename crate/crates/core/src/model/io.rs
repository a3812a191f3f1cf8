use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EffectKind, EffectSummary, PosteriorDraws, SamplerConfig};
use crate::{Error, Result};

/// Sidecar of a draws file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rhat: BTreeMap<String, Option<f64>>,
    pub ess: BTreeMap<String, Option<f64>>,
    pub divergences: usize,
    pub seed: u64,
    pub config: SamplerConfig,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub step_sizes: Vec<f64>,
    /// (chain, draw) of every divergent draw.
    pub divergent_draws: Vec<(usize, usize)>,
}

impl DiagnosticsReport {
    pub fn new(draws: &PosteriorDraws, config: &SamplerConfig) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        let map = |v: &[f64]| {
            draws
                .param_names
                .iter()
                .cloned()
                .zip(v.iter().map(|&x| finite(x)))
                .collect()
        };
        DiagnosticsReport {
            rhat: map(&draws.rhat),
            ess: map(&draws.ess),
            divergences: draws.divergences(),
            seed: config.seed,
            config: config.clone(),
            chains: draws.chains,
            draws_per_chain: draws.draws_per_chain,
            step_sizes: draws.step_sizes.clone(),
            divergent_draws: draws
                .divergent
                .iter()
                .enumerate()
                .filter(|(_, &d)| d)
                .map(|(i, _)| (i / draws.draws_per_chain, i % draws.draws_per_chain))
                .collect(),
        }
    }
}

/// Effect summary as written to disk; the samples live in a separate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub kind: EffectKind,
    pub lm: Option<String>,
    pub task: Option<String>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub samples_file: String,
}

impl EffectReport {
    pub fn new(summary: &EffectSummary, samples_file: impl Into<String>) -> Self {
        EffectReport {
            kind: summary.kind,
            lm: summary.lm.clone(),
            task: summary.task.clone(),
            mean: summary.mean,
            ci_low: summary.ci_low,
            ci_high: summary.ci_high,
            level: summary.level,
            samples_file: samples_file.into(),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Long-format draws: `chain,draw,param,value`.
pub fn write_draws_csv(draws: &PosteriorDraws, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "chain,draw,param,value").map_err(io)?;
    for c in 0..draws.chains {
        for s in 0..draws.draws_per_chain {
            let theta = draws.draw(c * draws.draws_per_chain + s);
            for (name, v) in draws.param_names.iter().zip(theta) {
                writeln!(w, "{c},{s},{name},{v}").map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// Read a draws file written by [`write_draws_csv`]; divergence flags and
/// step sizes come from its sidecar.
pub fn read_draws_csv(path: &Path, diag: &DiagnosticsReport) -> Result<PosteriorDraws> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let header = lines.next().transpose().map_err(|e| Error::io(path, e))?;
    if header.as_deref() != Some("chain,draw,param,value") {
        return Err(Error::Invalid(format!("{}: unexpected draws header", path.display())));
    }
    let mut names: Vec<String> = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let bad = || Error::Invalid(format!("{}: malformed line {}", path.display(), i + 2));
        let mut it = line.splitn(4, ',');
        let (c, s, p, v) = (it.next(), it.next(), it.next(), it.next());
        let (Some(c), Some(s), Some(p), Some(v)) = (c, s, p, v) else {
            return Err(bad());
        };
        let (c, s): (usize, usize) = (c.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?);
        if c == 0 && s == 0 {
            names.push(p.to_owned());
        } else if names.get(samples.len() % names.len().max(1)).map(String::as_str) != Some(p) {
            return Err(bad());
        }
        samples.push(v.parse::<f64>().map_err(|_| bad())?);
    }
    let mut divergent = vec![false; diag.chains * diag.draws_per_chain];
    for &(c, s) in &diag.divergent_draws {
        if let Some(d) = divergent.get_mut(c * diag.draws_per_chain + s) {
            *d = true;
        }
    }
    PosteriorDraws::from_parts(
        names,
        diag.chains,
        diag.draws_per_chain,
        samples,
        divergent,
        diag.step_sizes.clone(),
    )
}

pub fn write_diagnostics(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_diagnostics(path: &Path) -> Result<DiagnosticsReport> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

/// One-column CSV of effect samples.
pub fn write_effect_samples(summary: &EffectSummary, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "effect").map_err(io)?;
    for x in &summary.samples {
        writeln!(w, "{x}").map_err(io)?;
    }
    w.flush().map_err(io)
}
