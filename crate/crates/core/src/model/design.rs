use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::AccuracyRecord;
use crate::math::ln_choose;
use crate::{Error, Result};

/// Which pair of accuracy columns plays (control, treatment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framing {
    /// Pretraining boost: base is control, extra is treatment.
    Boost,
    /// Evaluation bias: extra is control, test is treatment.
    Bias,
}

impl Framing {
    pub fn control(self, r: &AccuracyRecord) -> u32 {
        match self {
            Framing::Boost => r.correct_base,
            Framing::Bias => r.correct_extra,
        }
    }

    pub fn treatment(self, r: &AccuracyRecord) -> u32 {
        match self {
            Framing::Boost => r.correct_extra,
            Framing::Bias => r.correct_test,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Framing::Boost => "boost",
            Framing::Bias => "bias",
        }
    }
}

impl std::str::FromStr for Framing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boost" => Ok(Framing::Boost),
            "bias" => Ok(Framing::Bias),
            other => Err(Error::Config(format!("unknown framing {other:?}"))),
        }
    }
}

/// One binomial observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub n: u32,
    pub y: u32,
    /// LM index; doubles as the 0/1 covariate z.
    pub lm: usize,
    pub task: usize,
    /// Dense index of the (task, subsample) cell.
    pub subsample: usize,
    /// 0 = control, 1 = treatment.
    pub condition: usize,
}

/// A (task, subsample) cell of the design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleCell {
    pub task: usize,
    pub subsample_index: u32,
}

/// Observation table plus the labels behind its dense indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDesign {
    pub rows: Vec<Observation>,
    pub lm_labels: Vec<String>,
    pub task_labels: Vec<String>,
    pub cells: Vec<SubsampleCell>,
    /// Whether the nested (task, subsample) random effect is in the model.
    pub subsample_effect: bool,
    #[serde(skip)]
    ln_choose_total: f64,
}

impl ModelDesign {
    /// Build a validated design.
    pub fn new(
        rows: Vec<Observation>,
        lm_labels: Vec<String>,
        task_labels: Vec<String>,
        cells: Vec<SubsampleCell>,
        subsample_effect: bool,
    ) -> Result<Self> {
        let mut d = ModelDesign {
            rows,
            lm_labels,
            task_labels,
            cells,
            subsample_effect,
            ln_choose_total: 0.0,
        };
        d.validate()?;
        d.ln_choose_total = d.rows.iter().map(|r| ln_choose(r.n as u64, r.y as u64)).sum();
        Ok(d)
    }

    /// A design with no observations; the posterior equals the prior.
    pub fn empty() -> Self {
        ModelDesign {
            rows: Vec::new(),
            lm_labels: Vec::new(),
            task_labels: Vec::new(),
            cells: Vec::new(),
            subsample_effect: true,
            ln_choose_total: 0.0,
        }
    }

    /// Two rows (control, treatment) per record.
    ///
    /// LM types and tasks are indexed in first-seen order, so the first LM
    /// type gets z = 0. More than two LM types is an error.
    pub fn from_records(records: &[AccuracyRecord], framing: Framing, subsample_effect: bool) -> Result<Self> {
        let mut lm_index: HashMap<&str, usize> = HashMap::new();
        let mut task_index: HashMap<&str, usize> = HashMap::new();
        let mut cell_index: HashMap<(usize, u32), usize> = HashMap::new();
        let (mut lms, mut tasks, mut cells) = (Vec::new(), Vec::new(), Vec::new());
        let mut rows = Vec::with_capacity(records.len() * 2);
        for r in records {
            r.validate().map_err(Error::Design)?;
            let next = lm_index.len();
            let lm = *lm_index.entry(&r.lm_type).or_insert_with(|| {
                lms.push(r.lm_type.clone());
                next
            });
            if lm > 1 {
                return Err(Error::Design(format!(
                    "more than two lm types ({:?}); the model has a single 0/1 lm covariate",
                    lms
                )));
            }
            let next = task_index.len();
            let task = *task_index.entry(&r.task_id).or_insert_with(|| {
                tasks.push(r.task_id.clone());
                next
            });
            let next = cell_index.len();
            let subsample = *cell_index.entry((task, r.subsample_index)).or_insert_with(|| {
                cells.push(SubsampleCell {
                    task,
                    subsample_index: r.subsample_index,
                });
                next
            });
            for (condition, y) in [(0, framing.control(r)), (1, framing.treatment(r))] {
                rows.push(Observation {
                    n: r.n,
                    y,
                    lm,
                    task,
                    subsample,
                    condition,
                });
            }
        }
        Self::new(rows, lms, tasks, cells, subsample_effect)
    }

    pub fn n_tasks(&self) -> usize {
        self.task_labels.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_lms(&self) -> usize {
        self.lm_labels.len()
    }

    pub(crate) fn ln_choose_total(&self) -> f64 {
        self.ln_choose_total
    }

    /// Recompute cached constants; needed after deserializing.
    pub fn rehydrate(mut self) -> Result<Self> {
        self.validate()?;
        self.ln_choose_total = self.rows.iter().map(|r| ln_choose(r.n as u64, r.y as u64)).sum();
        Ok(self)
    }

    /// The common n across rows, if there is one.
    pub fn common_n(&self) -> Option<u32> {
        let first = self.rows.first()?.n;
        self.rows.iter().all(|r| r.n == first).then_some(first)
    }

    /// `(control row, treatment row)` index pairs, one per (lm, cell).
    pub fn pairs(&self) -> Result<Vec<(usize, usize)>> {
        let mut slots: HashMap<(usize, usize), [Option<usize>; 2]> = HashMap::new();
        let mut order = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            let e = slots.entry((r.lm, r.subsample)).or_insert_with(|| {
                order.push((r.lm, r.subsample));
                [None, None]
            });
            if e[r.condition].replace(i).is_some() {
                return Err(Error::Pairing(format!(
                    "duplicate condition {} for lm {} cell {}",
                    r.condition, r.lm, r.subsample
                )));
            }
        }
        order
            .into_iter()
            .map(|key| match slots[&key] {
                [Some(c), Some(t)] => Ok((c, t)),
                _ => Err(Error::Pairing(format!(
                    "lm {} cell {} lacks a control or treatment row",
                    key.0, key.1
                ))),
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.y > r.n {
                return Err(Error::Design(format!("row {i}: y = {} exceeds n = {}", r.y, r.n)));
            }
            if r.condition > 1 || r.lm > 1 {
                return Err(Error::Design(format!("row {i}: condition and lm must be 0 or 1")));
            }
            if r.lm >= self.lm_labels.len() {
                return Err(Error::Design(format!("row {i}: lm index out of range")));
            }
            if r.task >= self.task_labels.len() {
                return Err(Error::Design(format!("row {i}: task index out of range")));
            }
            let Some(cell) = self.cells.get(r.subsample) else {
                return Err(Error::Design(format!("row {i}: subsample index out of range")));
            };
            if cell.task != r.task {
                return Err(Error::Design(format!(
                    "row {i}: subsample cell belongs to another task"
                )));
            }
        }
        self.pairs()?;
        Ok(())
    }
}
