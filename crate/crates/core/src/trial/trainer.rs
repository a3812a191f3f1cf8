//! File-based trainer protocol.
//!
//! For each (repeat, condition) the harness writes JSONL inputs into a private
//! trial directory, runs the expanded command template through `sh -c`, and
//! scores the trainer's predictions against labels it never handed over.
//! Scored outcomes are cached next to the inputs, keyed by the split
//! fingerprint, so an interrupted sweep resumes where it stopped.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AccuracyRecord, Corpus, CorpusDocument};
use crate::rng;
use crate::splits::{draw_splits, ExperimentPlan, SplitTriple};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// No task-adaptive pretraining.
    Base,
    /// Pretrain on the independent `extra` texts.
    Extra,
    /// Pretrain on the `test` texts.
    Test,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Base, Condition::Extra, Condition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Base => "base",
            Condition::Extra => "extra",
            Condition::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerContract {
    /// Shell command; `{mode}`, `{pretrain_file}`, `{train_file}`,
    /// `{test_file}`, `{result_file}`, `{epochs}`, `{seed}` are substituted.
    pub command_template: String,
    pub epochs: u32,
    pub zero_shot: bool,
    pub timeout_seconds: f64,
    pub max_parallel: usize,
    /// Opaque trainer configuration, forwarded as `PE_CONFIG`.
    #[serde(default)]
    pub config: Option<String>,
}

impl TrainerContract {
    pub fn new(command_template: impl Into<String>) -> Self {
        TrainerContract {
            command_template: command_template.into(),
            epochs: 1,
            zero_shot: false,
            timeout_seconds: 3600.0,
            max_parallel: 1,
            config: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.command_template.trim().is_empty() {
            return Err(Error::Config("empty trainer command".into()));
        }
        if !(self.timeout_seconds > 0.0) {
            return Err(Error::Config("timeout must be positive".into()));
        }
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cached, scored result of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub task_id: String,
    pub repeat_index: usize,
    pub condition: Condition,
    pub split_fingerprint: String,
    pub correct: u32,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailureLog {
    pub repeat_index: usize,
    pub condition: Condition,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// One record per repeat whose three trials all succeeded, in repeat order.
    pub records: Vec<AccuracyRecord>,
    pub failures: Vec<TrialFailureLog>,
}

const OUTCOME_FILE: &str = "outcome.json";

#[derive(Serialize)]
struct TextLine<'a> {
    doc_id: &'a str,
    text: &'a str,
}

#[derive(Serialize)]
struct LabeledLine<'a> {
    doc_id: &'a str,
    text: &'a str,
    label: &'a str,
}

#[derive(Deserialize)]
struct Prediction {
    doc_id: String,
    predicted_label: String,
}

fn lookup<'a>(corpus: &'a HashMap<&str, &CorpusDocument>, id: &str) -> Result<&'a CorpusDocument> {
    corpus
        .get(id)
        .copied()
        .ok_or_else(|| Error::Invalid(format!("split references unknown doc {id:?}")))
}

fn write_jsonl<T: Serialize>(path: &Path, lines: impl Iterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    for line in lines {
        serde_json::to_writer(&mut buf, &line)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn trial_dir(work_dir: &Path, split: &SplitTriple, condition: Condition) -> PathBuf {
    work_dir
        .join(&split.task_id)
        .join(format!("repeat_{:04}", split.repeat_index))
        .join(condition.as_str())
}

/// Seed shared by the three conditions of one repeat.
fn trial_seed(master: u64, split: &SplitTriple) -> u64 {
    rng::sub_seed(
        master,
        &format!("trial/{}", split.task_id),
        &[split.repeat_index as u64],
    )
}

/// Run (or resume) one trial and return its correct-prediction count.
pub fn run_trial(
    corpus: &Corpus,
    split: &SplitTriple,
    contract: &TrainerContract,
    condition: Condition,
    work_dir: &Path,
    master_seed: u64,
) -> Result<TrialOutcome> {
    contract.validate()?;
    let dir = trial_dir(work_dir, split, condition);
    let fingerprint = split.fingerprint();
    let outcome_path = dir.join(OUTCOME_FILE);
    if let Ok(bytes) = fs::read(&outcome_path) {
        if let Ok(cached) = serde_json::from_slice::<TrialOutcome>(&bytes) {
            if cached.split_fingerprint == fingerprint && cached.condition == condition {
                return Ok(cached);
            }
        }
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let by_id: HashMap<&str, &CorpusDocument> = corpus.documents().iter().map(|d| (d.doc_id.as_str(), d)).collect();

    let pretrain_ids = match condition {
        Condition::Base => None,
        Condition::Extra => Some(&split.extra_ids),
        Condition::Test => Some(&split.test_ids),
    };
    let pretrain_file = match pretrain_ids {
        Some(ids) => {
            let p = dir.join("pretrain.jsonl");
            let docs = ids.iter().map(|id| lookup(&by_id, id)).collect::<Result<Vec<_>>>()?;
            write_jsonl(
                &p,
                docs.iter().map(|d| TextLine {
                    doc_id: &d.doc_id,
                    text: &d.text,
                }),
            )?;
            Some(p)
        }
        None => None,
    };
    let train_file = if contract.zero_shot {
        None
    } else {
        let p = dir.join("train.jsonl");
        let docs = split
            .train_ids
            .iter()
            .map(|id| lookup(&by_id, id))
            .collect::<Result<Vec<_>>>()?;
        write_jsonl(
            &p,
            docs.iter().map(|d| LabeledLine {
                doc_id: &d.doc_id,
                text: &d.text,
                label: &d.label,
            }),
        )?;
        Some(p)
    };
    let test_docs = split
        .test_ids
        .iter()
        .map(|id| lookup(&by_id, id))
        .collect::<Result<Vec<_>>>()?;
    let test_file = dir.join("test.jsonl");
    write_jsonl(
        &test_file,
        test_docs.iter().map(|d| TextLine {
            doc_id: &d.doc_id,
            text: &d.text,
        }),
    )?;
    let result_file = dir.join("result.jsonl");
    let _ = fs::remove_file(&result_file);

    let seed = trial_seed(master_seed, split);
    let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    let vars: [(&str, String); 7] = [
        ("mode", condition.as_str().to_owned()),
        ("pretrain_file", path_str(&pretrain_file)),
        ("train_file", path_str(&train_file)),
        ("test_file", test_file.display().to_string()),
        ("result_file", result_file.display().to_string()),
        ("epochs", contract.epochs.to_string()),
        ("seed", seed.to_string()),
    ];
    let mut command = contract.command_template.clone();
    for (k, v) in &vars {
        command = command.replace(&format!("{{{k}}}"), v);
    }

    let trial_name = format!("{}/{}/{}", split.task_id, split.repeat_index, condition.as_str());
    let mut cmd = Command::new("sh");
    cmd.arg("-c").arg(&command).current_dir(&dir);
    for (k, v) in &vars {
        let name = format!("PE_{}", k.to_ascii_uppercase());
        if v.is_empty() {
            cmd.env_remove(&name);
        } else {
            cmd.env(&name, v);
        }
    }
    cmd.env("PE_ZERO_SHOT", if contract.zero_shot { "1" } else { "0" });
    match &contract.config {
        Some(c) => cmd.env("PE_CONFIG", c),
        None => cmd.env_remove("PE_CONFIG"),
    };
    let stdout_path = dir.join("stdout.log");
    let stderr_path = dir.join("stderr.log");
    let stdout = fs::File::create(&stdout_path).map_err(|e| Error::io(&stdout_path, e))?;
    let stderr = fs::File::create(&stderr_path).map_err(|e| Error::io(&stderr_path, e))?;
    cmd.stdin(Stdio::null()).stdout(stdout).stderr(stderr);

    let mut child = cmd.spawn().map_err(|e| Error::io(&dir, e))?;
    let deadline = Instant::now() + Duration::from_secs_f64(contract.timeout_seconds);
    let status = loop {
        match child.try_wait().map_err(|e| Error::io(&dir, e))? {
            Some(s) => break s,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::TrialFailure {
                    trial: trial_name,
                    reason: format!("timed out after {}s", contract.timeout_seconds),
                    stderr: read_tail(&stderr_path),
                });
            }
            None => std::thread::sleep(Duration::from_millis(10)),
        }
    };
    if !status.success() {
        return Err(Error::TrialFailure {
            trial: trial_name,
            reason: format!("trainer exited with {status}"),
            stderr: read_tail(&stderr_path),
        });
    }

    let labels: BTreeSet<&str> = corpus.label_counts().into_keys().collect();
    let correct = score_predictions(&result_file, &test_docs, &labels)?;
    let outcome = TrialOutcome {
        task_id: split.task_id.clone(),
        repeat_index: split.repeat_index,
        condition,
        split_fingerprint: fingerprint,
        correct,
        n: test_docs.len() as u32,
    };
    let mut f = fs::File::create(&outcome_path).map_err(|e| Error::io(&outcome_path, e))?;
    serde_json::to_writer(&mut f, &outcome)?;
    f.write_all(b"\n").map_err(|e| Error::io(&outcome_path, e))?;
    Ok(outcome)
}

fn read_tail(path: &Path) -> String {
    let s = fs::read_to_string(path).unwrap_or_default();
    let start = s.len().saturating_sub(4000);
    let start = (start..=s.len()).find(|&i| s.is_char_boundary(i)).unwrap_or(s.len());
    s[start..].to_owned()
}

fn score_predictions(result_file: &Path, test_docs: &[&CorpusDocument], labels: &BTreeSet<&str>) -> Result<u32> {
    let text = fs::read_to_string(result_file)
        .map_err(|e| Error::Protocol(format!("cannot read result file {}: {e}", result_file.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != test_docs.len() {
        return Err(Error::Protocol(format!(
            "result file has {} predictions, expected {}",
            lines.len(),
            test_docs.len()
        )));
    }
    let truth: HashMap<&str, &str> = test_docs
        .iter()
        .map(|d| (d.doc_id.as_str(), d.label.as_str()))
        .collect();
    let mut seen = BTreeSet::new();
    let mut correct = 0u32;
    for (i, line) in lines.iter().enumerate() {
        let p: Prediction =
            serde_json::from_str(line).map_err(|e| Error::Protocol(format!("result line {}: {e}", i + 1)))?;
        let Some(&gold) = truth.get(p.doc_id.as_str()) else {
            return Err(Error::Protocol(format!("prediction for unknown doc {:?}", p.doc_id)));
        };
        if !labels.contains(p.predicted_label.as_str()) {
            return Err(Error::Protocol(format!("unknown label {:?}", p.predicted_label)));
        }
        if !seen.insert(p.doc_id.clone()) {
            return Err(Error::Protocol(format!("duplicate prediction for {:?}", p.doc_id)));
        }
        if p.predicted_label == gold {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Run all three conditions for every split and assemble paired records.
///
/// Trials run on a pool of `contract.max_parallel` threads. A repeat with any
/// failed trial yields no record; its failures are returned instead.
pub fn run_splits(
    corpus: &Corpus,
    splits: &[SplitTriple],
    lm_type: &str,
    contract: &TrainerContract,
    work_dir: &Path,
    master_seed: u64,
) -> Result<ExperimentOutcome> {
    contract.validate()?;
    let jobs: Vec<(usize, Condition)> = (0..splits.len())
        .flat_map(|s| Condition::ALL.into_iter().map(move |c| (s, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(contract.max_parallel)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<TrialOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, c)| run_trial(corpus, &splits[s], contract, c, work_dir, master_seed))
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (split, chunk) in splits.iter().zip(results.chunks(3)) {
        let mut counts = [0u32; 3];
        let mut ok = true;
        for (slot, (res, cond)) in chunk.iter().zip(Condition::ALL).enumerate() {
            match res {
                Ok(o) => {
                    debug_assert_eq!(o.split_fingerprint, split.fingerprint());
                    counts[slot] = o.correct;
                }
                Err(e) => {
                    ok = false;
                    log::warn!("{e}");
                    failures.push(TrialFailureLog {
                        repeat_index: split.repeat_index,
                        condition: cond,
                        kind: e.kind().to_owned(),
                        message: e.to_string(),
                    });
                }
            }
        }
        if ok {
            records.push(AccuracyRecord {
                lm_type: lm_type.to_owned(),
                task_id: split.task_id.clone(),
                subsample_index: split.repeat_index as u32,
                m: split.m as u32,
                n: split.n as u32,
                correct_base: counts[0],
                correct_extra: counts[1],
                correct_test: counts[2],
            });
        }
    }
    if records.is_empty() && !splits.is_empty() {
        return Err(Error::ExperimentFailed(jobs.len()));
    }
    Ok(ExperimentOutcome { records, failures })
}

/// Draw the plan's splits and run every trial.
pub fn run_experiment(
    corpus: &Corpus,
    task_id: &str,
    lm_type: &str,
    plan: &ExperimentPlan,
    contract: &TrainerContract,
    work_dir: &Path,
) -> Result<ExperimentOutcome> {
    let splits = draw_splits(corpus, task_id, plan)?;
    run_splits(corpus, &splits, lm_type, contract, work_dir, plan.master_seed)
}
