use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fseval_core::dataset::{parse_accuracy_records, parse_corpus, AccuracyRecord, CorpusFormat, IngestReport};
use fseval_core::freq::{bias_pairs_by_task, permtest_report, permuted_correlation_nulls, write_test_report};
use fseval_core::meta::{dereplicate_slices, meta_fit, write_means_csv, MetaReport, SliceSpec};
use fseval_core::model::{
    conditional_effect, marginal_effect, posterior_predictive, read_diagnostics, read_draws_csv, sample_posterior,
    write_diagnostics, write_draws_csv, write_effect_samples, DiagnosticsReport, EffectReport, HierarchicalModel,
    ModelDesign, ParamLayout, PriorScales, SamplerConfig, CI_LEVEL,
};
use fseval_core::report::{report_means, write_means};
use fseval_core::splits::{draw_splits, repeat_schedule, ExperimentPlan, SplitTriple};
use fseval_core::trial::{run_splits, simulate_records, GenerativeTruth, TrainerContract};
use fseval_core::{write_accuracy_records, Framing};

use crate::args::*;
use crate::manifest::Outputs;

/// Written by `plan`, read back by `run`.
#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    task_id: String,
    corpus: PathBuf,
    format: CorpusFormat,
    plan: ExperimentPlan,
    ingest: IngestReport,
}

fn log_ingest(path: &Path, report: &IngestReport) {
    for r in &report.rejection_reasons {
        log::warn!("{}: row {} rejected: {}", path.display(), r.row, r.reason);
    }
}

fn load_records(path: &Path, out: &mut Outputs) -> Result<Vec<AccuracyRecord>> {
    let (records, report) = parse_accuracy_records(path)?;
    log_ingest(path, &report);
    out.input(path);
    Ok(records)
}

fn apply_filter(records: Vec<AccuracyRecord>, f: &RecordFilter) -> Vec<AccuracyRecord> {
    records
        .into_iter()
        .filter(|r| f.m.is_none_or(|m| r.m == m))
        .filter(|r| f.n.is_none_or(|n| r.n == n))
        .filter(|r| f.lm_types.is_empty() || f.lm_types.contains(&r.lm_type))
        .collect()
}

/// The model is fitted to one (m, n) setting at a time.
fn require_single_setting(records: &[AccuracyRecord]) -> Result<()> {
    let Some(first) = records.first() else {
        bail!(fseval_core::Error::Invalid("no records left after filtering".into()));
    };
    if records.iter().any(|r| (r.m, r.n) != (first.m, first.n)) {
        bail!(fseval_core::Error::Invalid(
            "records span several (m, n) settings; select one with --m and --n".into()
        ));
    }
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn plan(a: &PlanArgs, out: &mut Outputs) -> Result<()> {
    let format = match a.format {
        Some(CorpusFormatArg::Csv) => CorpusFormat::Csv,
        Some(CorpusFormatArg::Jsonl) => CorpusFormat::Jsonl,
        None => CorpusFormat::from_path(&a.corpus)
            .with_context(|| format!("cannot infer the format of {}; pass --format", a.corpus.display()))?,
    };
    let (corpus, ingest) = parse_corpus(&a.corpus, format)?;
    log_ingest(&a.corpus, &ingest);
    out.input(&a.corpus);
    let task_id = match &a.task_id {
        Some(t) => t.clone(),
        None => a
            .corpus
            .file_stem()
            .and_then(|s| s.to_str())
            .context("corpus path has no file stem; pass --task-id")?
            .to_owned(),
    };
    let repeats = repeat_schedule(a.n, a.repeats)?;
    let plan = ExperimentPlan::new(a.m, a.n, repeats, a.seed)?;
    out.seed("master_seed", a.seed);
    for split in draw_splits(&corpus, &task_id, &plan)? {
        let path = split.write_manifest(&out.dir)?;
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        out.artifact(&name);
    }
    let corpus_path = std::fs::canonicalize(&a.corpus).unwrap_or_else(|_| a.corpus.clone());
    out.write_json(
        "plan.json",
        &PlanFile {
            task_id,
            corpus: corpus_path,
            format,
            plan,
            ingest,
        },
    )
}

pub fn run(a: &RunArgs, jobs: Option<usize>, out: &mut Outputs) -> Result<()> {
    let plan_path = a.plan_dir.join("plan.json");
    let text = std::fs::read_to_string(&plan_path).with_context(|| format!("reading {}", plan_path.display()))?;
    let pf: PlanFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", plan_path.display()))?;
    out.input(&plan_path);
    let (corpus, ingest) = parse_corpus(&pf.corpus, pf.format)?;
    log_ingest(&pf.corpus, &ingest);
    out.input(&pf.corpus);

    let mut splits = Vec::with_capacity(pf.plan.repeats);
    for r in 0..pf.plan.repeats {
        let path = SplitTriple::manifest_path(&a.plan_dir, r);
        let split = SplitTriple::read_manifest(&path)?;
        split.validate(&corpus)?;
        out.input(&path);
        splits.push(split);
    }
    let contract = TrainerContract {
        command_template: a.trainer_cmd.clone(),
        epochs: a.epochs,
        zero_shot: a.zero_shot,
        timeout_seconds: a.timeout,
        max_parallel: jobs.unwrap_or(1),
        config: a.trainer_config.clone(),
    };
    out.seed("master_seed", pf.plan.master_seed);
    let work = out.dir.join("trials");
    let outcome = run_splits(&corpus, &splits, &a.lm_type, &contract, &work, pf.plan.master_seed)?;
    if !outcome.failures.is_empty() {
        log::warn!("{} trials failed; see failures.json", outcome.failures.len());
    }
    write_accuracy_records(&outcome.records, &out.artifact("records.csv"))?;
    out.write_json("failures.json", &outcome.failures)
}

pub fn simulate(a: &SimulateArgs, out: &mut Outputs) -> Result<()> {
    let truth = GenerativeTruth {
        mu: a.mu,
        alpha: a.alpha,
        beta: a.beta,
        sigma_u: a.sigma_u,
        sigma_v: a.sigma_v,
        sigma_w: a.sigma_w,
        lm_count: a.lm_types,
        task_count: a.tasks,
        subsample_count: a.subsamples,
        n: a.n,
        m: a.m,
        framing: a.framing.into(),
        seed: a.seed,
    };
    out.seed("seed", a.seed);
    let records = simulate_records(&truth)?;
    write_accuracy_records(&records, &out.artifact("records.csv"))?;
    out.write_json("truth.json", &truth)
}

#[derive(Serialize)]
struct ParamSummary {
    name: String,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
    rhat: Option<f64>,
    ess: Option<f64>,
}

#[derive(Serialize)]
struct FitSummary {
    framing: Framing,
    lm_labels: Vec<String>,
    task_labels: Vec<String>,
    divergences: usize,
    level: f64,
    params: Vec<ParamSummary>,
}

pub fn fit(a: &FitArgs, out: &mut Outputs) -> Result<()> {
    let records = apply_filter(load_records(&a.records, out)?, &a.filter);
    require_single_setting(&records)?;
    let framing: Framing = a.framing.into();
    let design = ModelDesign::from_records(&records, framing, !a.no_subsample_effect)?;
    let model = HierarchicalModel::new(design, PriorScales::default());
    let config = SamplerConfig {
        chains: a.chains,
        draws: a.draws,
        tune: a.tune,
        target_accept: a.target_accept,
        seed: a.seed,
        ..SamplerConfig::default()
    };
    out.seed("sampler", a.seed);
    let draws = sample_posterior(&model, &config)?;

    out.write_json("design.json", &model.design)?;
    write_draws_csv(&draws, &out.artifact("draws.csv"))?;
    write_diagnostics(
        &DiagnosticsReport::new(&draws, &config),
        &out.artifact("diagnostics.json"),
    )?;
    let finite = |x: f64| x.is_finite().then_some(x);
    let scalars = ParamLayout::LOG_SIGMA_U..model.layout.u.start;
    let params = (0..ParamLayout::LOG_SIGMA_U)
        .chain(scalars)
        .map(|p| {
            let (ci_low, ci_high) = draws.interval(p, CI_LEVEL);
            ParamSummary {
                name: draws.param_names[p].clone(),
                mean: draws.posterior_mean(p),
                ci_low,
                ci_high,
                rhat: finite(draws.rhat[p]),
                ess: finite(draws.ess[p]),
            }
        })
        .collect();
    out.write_json(
        "summary.json",
        &FitSummary {
            framing,
            lm_labels: model.design.lm_labels.clone(),
            task_labels: model.design.task_labels.clone(),
            divergences: draws.divergences(),
            level: CI_LEVEL,
            params,
        },
    )
}

pub fn effects(a: &EffectsArgs, out: &mut Outputs) -> Result<()> {
    let design_path = a.draws_dir.join("design.json");
    let diag_path = a.draws_dir.join("diagnostics.json");
    let draws_path = a.draws_dir.join("draws.csv");
    let text = std::fs::read_to_string(&design_path).with_context(|| format!("reading {}", design_path.display()))?;
    let design: ModelDesign = serde_json::from_str::<ModelDesign>(&text)?.rehydrate()?;
    let diag = read_diagnostics(&diag_path)?;
    let draws = read_draws_csv(&draws_path, &diag)?;
    for p in [&design_path, &diag_path, &draws_path] {
        out.input(p);
    }
    let model = HierarchicalModel::new(design, PriorScales::default());
    let seed = a.seed.unwrap_or(diag.seed);
    out.seed("predictive", seed);
    let pred = posterior_predictive(&model, &draws, a.count, seed)?;

    match a.kind {
        EffectKindArg::Marginal => {
            let summary = marginal_effect(&pred, &model.design)?;
            let name = "effect_marginal.csv";
            write_effect_samples(&summary, &out.artifact(name))?;
            out.write_json("effect.json", &EffectReport::new(&summary, name))
        }
        EffectKindArg::Conditional => {
            let mut reports = Vec::new();
            for lm in 0..model.design.n_lms() {
                for task in 0..model.design.n_tasks() {
                    let summary = match conditional_effect(&pred, &model.design, lm, task) {
                        Ok(s) => s,
                        Err(fseval_core::Error::Index(_)) => continue,
                        Err(e) => return Err(e.into()),
                    };
                    let name = format!("effect_conditional_{lm}_{task}.csv");
                    write_effect_samples(&summary, &out.artifact(&name))?;
                    reports.push(EffectReport::new(&summary, name));
                }
            }
            out.write_json("effects.json", &reports)
        }
    }
}

pub fn permtest(a: &PermtestArgs, out: &mut Outputs) -> Result<()> {
    let records = load_records(&a.records, out)?;
    out.seed("seed", a.seed);
    let rows = permtest_report(&records, a.framing.into(), a.permutations, a.seed)?;
    write_test_report(&rows, &out.artifact("tests.csv"))?;
    Ok(())
}

pub fn meta(a: &MetaArgs, out: &mut Outputs) -> Result<()> {
    let records = apply_filter(load_records(&a.records, out)?, &a.filter);
    require_single_setting(&records)?;
    let spec = SliceSpec {
        slice_count: a.slices,
        seed: a.seed,
        fit_config: SamplerConfig {
            chains: a.chains,
            draws: a.draws,
            tune: a.tune,
            ..SamplerConfig::default()
        },
        threshold: a.threshold,
    };
    out.seed("seed", a.seed);
    let slices = dereplicate_slices(&records, &spec, &a.require_tasks)?;
    let result = meta_fit(&slices, &spec)?;

    write_csv(
        &out.artifact("slices.csv"),
        &["slice", "task_id", "subsample_index"],
        slices.iter().flat_map(|s| {
            s.choice
                .iter()
                .map(|(t, k)| vec![s.index.to_string(), t.clone(), k.to_string()])
        }),
    )?;
    write_means_csv(&result, &out.artifact("means.csv"))?;
    write_csv(
        &out.artifact("ecdf.csv"),
        &["posterior_mean_beta", "cdf"],
        result.ecdf.iter().map(|(x, p)| vec![x.to_string(), p.to_string()]),
    )?;
    out.write_json("meta.json", &MetaReport::new(&result, spec.slice_count, "means.csv"))
}

#[derive(Serialize)]
struct CorrelationSummary {
    lm_x: String,
    lm_y: String,
    tasks: usize,
    skipped: Vec<String>,
    null_draws: usize,
    mean_observed: f64,
    mean_null: f64,
    /// Two-sample KS distance between observed and pooled null correlations.
    ks_observed_vs_null: f64,
}

pub fn correlate(a: &CorrelateArgs, out: &mut Outputs) -> Result<()> {
    let records = load_records(&a.records, out)?;
    let mut lms: Vec<&str> = Vec::new();
    for r in &records {
        if !lms.contains(&r.lm_type.as_str()) {
            lms.push(&r.lm_type);
        }
    }
    let lm_x = a.lm_x.clone().or_else(|| lms.first().map(|s| s.to_string()));
    let lm_y = a.lm_y.clone().or_else(|| lms.get(1).map(|s| s.to_string()));
    let (Some(lm_x), Some(lm_y)) = (lm_x, lm_y) else {
        bail!(fseval_core::Error::Invalid(
            "correlate needs records from two LM types".into()
        ));
    };
    out.seed("seed", a.seed);
    let pairs = bias_pairs_by_task(&records, &lm_x, &lm_y);
    let nulls = permuted_correlation_nulls(&pairs, a.draws_null, a.seed);

    write_csv(
        &out.artifact("observed.csv"),
        &["task_id", "spearman"],
        nulls
            .tasks
            .iter()
            .zip(&nulls.observed)
            .map(|(t, r)| vec![t.clone(), r.to_string()]),
    )?;
    write_csv(
        &out.artifact("nulls.csv"),
        &["draw", "task_id", "spearman"],
        nulls.nulls.iter().enumerate().flat_map(|(d, row)| {
            nulls
                .tasks
                .iter()
                .zip(row)
                .map(move |(t, r)| vec![d.to_string(), t.clone(), r.to_string()])
        }),
    )?;
    let pooled: Vec<f64> = nulls
        .nulls
        .iter()
        .flatten()
        .copied()
        .filter(|x| x.is_finite())
        .collect();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            f64::NAN
        } else {
            fseval_core::math::mean(xs)
        }
    };
    let summary = CorrelationSummary {
        lm_x,
        lm_y,
        tasks: nulls.tasks.len(),
        skipped: nulls.skipped.clone(),
        null_draws: a.draws_null,
        mean_observed: mean(&nulls.observed),
        mean_null: mean(&pooled),
        ks_observed_vs_null: if nulls.observed.is_empty() || pooled.is_empty() {
            f64::NAN
        } else {
            fseval_core::math::ks_two_sample(&nulls.observed, &pooled)
        },
    };
    out.write_json("correlation.json", &summary)
}

pub fn report(a: &ReportArgs, out: &mut Outputs) -> Result<()> {
    let records = load_records(&a.records, out)?;
    let rows = report_means(&records)?;
    write_means(&rows, &out.artifact("means.csv"))?;
    Ok(())
}
