//! Evaluation harness for few-shot text-classification benchmarks.
//!
//! Covers repeated subsampling of corpora into extra/train/test splits,
//! paired trainer runs under three pretraining conditions, a hierarchical
//! binomial-logit model fitted by NUTS, sign-flip permutation tests with
//! BH adjustment, and a de-replication meta-analysis.

pub mod dataset;
mod error;
pub mod freq;
pub mod math;
pub mod meta;
pub mod model;
pub mod report;
pub mod rng;
pub mod splits;
pub mod trial;

pub use dataset::{
    parse_accuracy_records, parse_corpus, write_accuracy_records, AccuracyRecord, Corpus, CorpusDocument, CorpusFormat,
    IngestReport,
};
pub use error::{Error, Result};
pub use freq::{bh_adjust, signflip_test, spearman, TestResult};
pub use meta::{dereplicate_slices, meta_fit, odds_ratio, MetaResult, SliceSpec};
pub use model::{
    conditional_effect, marginal_effect, posterior_predictive, prior_predictive, sample_posterior, EffectSummary,
    Framing, HierarchicalModel, ModelDesign, PosteriorDraws, PriorScales, SamplerConfig,
};
pub use report::{report_means, MeansRow};
pub use splits::{draw_splits, repeat_schedule, ExperimentPlan, SplitTriple};
pub use trial::{run_experiment, run_trial, simulate_records, GenerativeTruth, TrainerContract};
