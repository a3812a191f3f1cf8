//! Fixtures shared by the benches.

use fseval_core::{simulate_records, Framing, GenerativeTruth, HierarchicalModel, ModelDesign, PriorScales};

/// Model over simulated records: two LM types, `tasks` × `subsamples` cells.
pub fn simulated_model(tasks: usize, subsamples: usize, subsample_effect: bool) -> HierarchicalModel {
    let truth = GenerativeTruth {
        mu: 0.5,
        alpha: 0.2,
        beta: 0.1,
        sigma_u: 0.3,
        sigma_v: 0.3,
        sigma_w: 0.1,
        lm_count: 2,
        task_count: tasks,
        subsample_count: subsamples,
        n: 200,
        m: 100,
        framing: Framing::Bias,
        seed: 1,
    };
    let records = simulate_records(&truth).expect("valid truth");
    let design = ModelDesign::from_records(&records, Framing::Bias, subsample_effect).expect("valid records");
    HierarchicalModel::new(design, PriorScales::default())
}

/// Deterministic pseudo-random values in (-1, 1).
pub fn wobble(len: usize, phase: f64) -> Vec<f64> {
    (0..len).map(|i| ((i as f64 + phase) * 12.9898).sin()).collect()
}
