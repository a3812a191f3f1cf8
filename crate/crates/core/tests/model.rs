use fseval_core::math::equal_tailed_interval;
use fseval_core::model::{
    conditional_effect, marginal_effect, pool_effects, posterior_predictive, prior_predictive, read_diagnostics,
    read_draws_csv, sample_posterior, write_diagnostics, write_draws_csv, DiagnosticsReport, Framing,
    HierarchicalModel, ModelDesign, Observation, ParamLayout, PosteriorDraws, PredictiveSamples, PriorScales,
    SamplerConfig, SubsampleCell,
};
use fseval_core::rng;
use fseval_core::trial::{simulate, GenerativeTruth};
use fseval_core::Error;
use rand::Rng;
use rand_distr::StandardNormal;

fn truth(beta: f64, tasks: usize, subsamples: usize, n: u32, seed: u64) -> GenerativeTruth {
    GenerativeTruth {
        mu: 0.5,
        alpha: 0.3,
        beta,
        sigma_u: 0.4,
        sigma_v: 0.2,
        sigma_w: 0.1,
        lm_count: 2,
        task_count: tasks,
        subsample_count: subsamples,
        n,
        m: 100,
        framing: Framing::Bias,
        seed,
    }
}

fn model_for(t: &GenerativeTruth, subsample_effect: bool) -> HierarchicalModel {
    let recs = simulate(t).unwrap().records;
    let design = ModelDesign::from_records(&recs, t.framing, subsample_effect).unwrap();
    HierarchicalModel::new(design, PriorScales::default())
}

fn random_theta(layout: &ParamLayout, seed: u64, spread: f64) -> Vec<f64> {
    let mut r = rng::stream(seed, "test/theta", &[]);
    let mut theta: Vec<f64> = (0..layout.dim)
        .map(|_| spread * r.sample::<f64, _>(StandardNormal))
        .collect();
    // keep the σ's in a plausible range
    theta[ParamLayout::LOG_SIGMA_U] = r.random_range(-2.0..1.0);
    if let Some(i) = layout.log_sigma_v {
        theta[i] = r.random_range(-2.0..1.0);
    }
    theta[layout.log_sigma_w] = r.random_range(-2.0..1.0);
    theta
}

/// ln C(n, k) by summing logs.
fn ln_choose_slow(n: u32, k: u32) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

fn ln_normal(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn ln_half_normal(x: f64, sd: f64) -> f64 {
    2f64.ln() + ln_normal(x, sd)
}

/// Centered-form log posterior: σ's on the natural scale and U, V, W as
/// draws from their normal priors.
fn centered_log_posterior(model: &HierarchicalModel, theta: &[f64]) -> f64 {
    let l = &model.layout;
    let p = &model.priors;
    let (su, sv, sw) = (
        theta[3].exp(),
        l.log_sigma_v.map(|i| theta[i].exp()),
        theta[l.log_sigma_w].exp(),
    );
    let u: Vec<f64> = theta[l.u.clone()].iter().map(|x| su * x).collect();
    let v: Vec<f64> = theta[l.v.clone()].iter().map(|x| sv.unwrap_or(0.0) * x).collect();
    let w: Vec<f64> = theta[l.w.clone()].iter().map(|x| sw * x).collect();
    let mut lp = ln_normal(theta[0], p.mu) + ln_normal(theta[1], p.alpha) + ln_normal(theta[2], p.beta);
    lp += ln_half_normal(su, p.sigma_u) + ln_half_normal(sw, p.sigma_w);
    lp += u.iter().map(|&x| ln_normal(x, su)).sum::<f64>();
    lp += w.iter().map(|&x| ln_normal(x, sw)).sum::<f64>();
    if let Some(sv) = sv {
        lp += ln_half_normal(sv, p.sigma_v);
        lp += v.iter().map(|&x| ln_normal(x, sv)).sum::<f64>();
    }
    for r in &model.design.rows {
        let mut eta =
            theta[0] + theta[1] * r.lm as f64 + theta[2] * r.condition as f64 + u[r.task] + w[2 * r.task + r.condition];
        if sv.is_some() {
            eta += v[r.subsample];
        }
        let lam = 1.0 / (1.0 + (-eta).exp());
        lp += ln_choose_slow(r.n, r.y) + r.y as f64 * lam.ln() + (r.n - r.y) as f64 * (1.0 - lam).ln();
    }
    lp
}

#[test]
fn log_prior_at_zero_matches_closed_form() {
    let m = model_for(&truth(0.0, 3, 2, 20, 1), true);
    let zeros = vec![0.0; m.layout.dim];
    let p = PriorScales::default();
    let mut expected = ln_normal(0.0, p.mu) + ln_normal(0.0, p.alpha) + ln_normal(0.0, p.beta);
    // σ = e^0 = 1 and the log-Jacobian term is 0
    expected += ln_half_normal(1.0, p.sigma_u) + ln_half_normal(1.0, p.sigma_v) + ln_half_normal(1.0, p.sigma_w);
    expected += (m.layout.dim - 6) as f64 * ln_normal(0.0, 1.0);
    let got = m.log_prior(&zeros).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn log_prior_beta_quadratic_and_symmetry() {
    let m = model_for(&truth(0.0, 3, 2, 20, 1), true);
    let mut theta = vec![0.0; m.layout.dim];
    let base = m.log_prior(&theta).unwrap();
    theta[ParamLayout::BETA] = 1.0;
    assert_eq!(m.log_prior(&theta).unwrap() - base, -0.5);

    let theta = random_theta(&m.layout, 3, 1.0);
    let mut flipped = theta.clone();
    for i in m.layout.normal_indices() {
        flipped[i] = -flipped[i];
    }
    assert_eq!(m.log_prior(&theta).unwrap(), m.log_prior(&flipped).unwrap());
}

#[test]
fn non_finite_parameters_are_domain_errors() {
    let m = model_for(&truth(0.0, 2, 2, 20, 1), true);
    let mut theta = vec![0.0; m.layout.dim];
    theta[4] = f64::NAN;
    assert!(matches!(m.log_prior(&theta), Err(Error::Domain(_))));
    assert!(matches!(m.grad_log_posterior(&theta), Err(Error::Domain(_))));
    assert!(matches!(m.log_likelihood(&[0.0; 3]), Err(Error::Domain(_))));
}

fn two_row_design(n: u32, y: u32) -> ModelDesign {
    let rows = (0..2)
        .map(|condition| Observation {
            n,
            y,
            lm: 0,
            task: 0,
            subsample: 0,
            condition,
        })
        .collect();
    ModelDesign::new(
        rows,
        vec!["lm".into()],
        vec!["t".into()],
        vec![SubsampleCell {
            task: 0,
            subsample_index: 0,
        }],
        true,
    )
    .unwrap()
}

#[test]
fn ten_choose_five_at_half() {
    let m = HierarchicalModel::new(two_row_design(10, 5), PriorScales::default());
    let ll = m.log_likelihood(&vec![0.0; m.layout.dim]).unwrap();
    let one_row = 252f64.ln() + 10.0 * 0.5f64.ln();
    assert!((one_row - (252f64.ln() - 6.931_471_805_599_453)).abs() < 1e-12);
    assert!((ll - 2.0 * one_row).abs() < 1e-12, "{ll}");
}

#[test]
fn likelihood_stable_at_extreme_logits() {
    let m = HierarchicalModel::new(two_row_design(50, 50), PriorScales::default());
    let mut theta = vec![0.0; m.layout.dim];
    for mu in [30.0, 700.0, -700.0] {
        theta[ParamLayout::MU] = mu;
        let ll = m.log_likelihood(&theta).unwrap();
        assert!(ll.is_finite(), "mu={mu}");
        assert!(m.grad_log_posterior(&theta).unwrap().iter().all(|g| g.is_finite()));
    }
    theta[ParamLayout::MU] = 30.0;
    assert!(m.log_likelihood(&theta).unwrap() > -1e-10);
}

#[test]
fn duplicated_rows_double_the_likelihood() {
    let recs = simulate(&truth(0.2, 3, 2, 40, 5)).unwrap().records;
    let mut doubled = recs.clone();
    doubled.extend(recs.iter().map(|r| {
        let mut r = r.clone();
        r.subsample_index += 1000;
        r
    }));
    let single = HierarchicalModel::new(
        ModelDesign::from_records(&recs, Framing::Bias, true).unwrap(),
        PriorScales::default(),
    );
    let double = HierarchicalModel::new(
        ModelDesign::from_records(&doubled, Framing::Bias, true).unwrap(),
        PriorScales::default(),
    );
    let theta = random_theta(&single.layout, 9, 1.0);
    // copy each cell's v_std onto its duplicate
    let mut theta2 = vec![0.0; double.layout.dim];
    let c = single.layout.n_cells;
    theta2[..single.layout.v.start].copy_from_slice(&theta[..single.layout.v.start]);
    for k in 0..c {
        theta2[double.layout.v.start + k] = theta[single.layout.v.start + k];
        theta2[double.layout.v.start + c + k] = theta[single.layout.v.start + k];
    }
    theta2[double.layout.w.clone()].copy_from_slice(&theta[single.layout.w.clone()]);
    let a = single.log_likelihood(&theta).unwrap();
    let b = double.log_likelihood(&theta2).unwrap();
    assert!((b - 2.0 * a).abs() <= 1e-10 * a.abs(), "{b} vs 2*{a}");
}

#[test]
fn prior_mode_gradient_is_zero_for_fixed_effects() {
    let m = HierarchicalModel::new(ModelDesign::empty(), PriorScales::default());
    let g = m.grad_log_posterior(&vec![0.0; m.layout.dim]).unwrap();
    assert_eq!(&g[..3], &[0.0, 0.0, 0.0]);
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let h = 1e-5;
    for case in 0..100u64 {
        let m = model_for(
            &truth(0.3, 3 + (case % 3) as usize, 2 + (case % 2) as usize, 30, case),
            case % 4 != 0,
        );
        let theta = random_theta(&m.layout, 1000 + case, 1.0);
        let g = m.grad_log_posterior(&theta).unwrap();
        for i in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (m.log_posterior(&up).unwrap() - m.log_posterior(&dn).unwrap()) / (2.0 * h);
            let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
            assert!(rel < 1e-4, "case {case} param {i}: fd {fd} vs {}", g[i]);
        }
    }
}

#[test]
fn v_gradient_touches_only_its_cell() {
    let m = model_for(&truth(0.0, 3, 3, 30, 2), true);
    let mut theta = random_theta(&m.layout, 4, 1.0);
    let target = 4;
    let g0 = m.grad_log_posterior(&theta).unwrap();
    // changing a row outside the cell leaves that v_std's gradient alone
    let other = m.design.rows.iter().position(|r| r.subsample != target).unwrap();
    let mut design = m.design.clone();
    design.rows[other].y = design.rows[other].n - design.rows[other].y;
    let m2 = HierarchicalModel::new(design.rehydrate().unwrap(), m.priors);
    let g1 = m2.grad_log_posterior(&theta).unwrap();
    let iv = m.layout.v.start + target;
    assert_eq!(g0[iv], g1[iv]);
    // and with data only outside the cell, its gradient is the prior term
    theta[iv] = 0.7;
    let rows: Vec<_> = m
        .design
        .rows
        .iter()
        .filter(|r| r.subsample != target)
        .copied()
        .collect();
    let design = ModelDesign::new(
        rows,
        m.design.lm_labels.clone(),
        m.design.task_labels.clone(),
        m.design.cells.clone(),
        true,
    )
    .unwrap();
    let m3 = HierarchicalModel::new(design, m.priors);
    assert_eq!(m3.grad_log_posterior(&theta).unwrap()[iv], -0.7);
}

#[test]
fn non_centered_equals_centered_plus_jacobian() {
    for case in 0..20u64 {
        let m = model_for(&truth(0.2, 3, 2, 20, case), case % 2 == 0);
        let l = &m.layout;
        let theta = random_theta(l, 50 + case, 1.0);
        let (lsu, lsw) = (theta[ParamLayout::LOG_SIGMA_U], theta[l.log_sigma_w]);
        let mut jac = lsu + lsw + l.u.len() as f64 * lsu + l.w.len() as f64 * lsw;
        if let Some(i) = l.log_sigma_v {
            jac += theta[i] + l.v.len() as f64 * theta[i];
        }
        let expected = centered_log_posterior(&m, &theta) + jac;
        let got = m.log_posterior(&theta).unwrap();
        assert!(
            (got - expected).abs() <= 1e-10 * got.abs().max(1.0),
            "case {case}: {got} vs {expected}"
        );
    }
}

#[test]
fn mu_w_shift_leaves_likelihood_unchanged() {
    let m = model_for(&truth(0.2, 4, 3, 50, 8), true);
    let l = &m.layout;
    let theta = random_theta(l, 77, 1.0);
    let c = 0.37;
    let mut shifted = theta.clone();
    shifted[ParamLayout::MU] += c;
    let sw = l.sigma_w(&theta);
    for i in l.w.clone() {
        shifted[i] -= c / sw;
    }
    let a = m.log_likelihood(&theta).unwrap();
    let b = m.log_likelihood(&shifted).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
}

#[test]
fn empty_design_recovers_the_prior() {
    let m = HierarchicalModel::new(ModelDesign::empty(), PriorScales::default());
    let cfg = SamplerConfig {
        seed: 21,
        ..Default::default()
    };
    let draws = sample_posterior(&m, &cfg).unwrap();
    assert_eq!(draws.total_draws(), 4000);
    let mu = draws.column(ParamLayout::MU);
    let mean = mu.iter().sum::<f64>() / mu.len() as f64;
    let var = mu.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (mu.len() - 1) as f64;
    let ess = draws.ess[ParamLayout::MU];
    assert!(mean.abs() < 3.0 / ess.sqrt(), "mean {mean}, ess {ess}");
    assert!((var - 1.0).abs() < 0.1, "var {var}");
    let alpha = draws.column(ParamLayout::ALPHA);
    let var_a = alpha.iter().map(|x| x * x).sum::<f64>() / alpha.len() as f64;
    assert!((var_a / 25.0 - 1.0).abs() < 0.15, "alpha var {var_a}");
    assert_eq!(draws.divergences(), 0);
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let m = model_for(&truth(0.1, 3, 3, 50, 4), true);
    let cfg = SamplerConfig {
        chains: 2,
        draws: 200,
        tune: 200,
        seed: 5,
        ..Default::default()
    };
    let a = sample_posterior(&m, &cfg).unwrap();
    let b = sample_posterior(&m, &cfg).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.step_sizes, b.step_sizes);
    let c = sample_posterior(&m, &SamplerConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.samples, c.samples);
}

#[test]
fn draws_file_roundtrip() {
    let m = model_for(&truth(0.1, 3, 2, 50, 7), true);
    let cfg = SamplerConfig {
        chains: 2,
        draws: 50,
        tune: 50,
        seed: 8,
        ..Default::default()
    };
    let draws = sample_posterior(&m, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (dpath, cpath) = (dir.path().join("draws.csv"), dir.path().join("diagnostics.json"));
    write_draws_csv(&draws, &dpath).unwrap();
    write_diagnostics(&DiagnosticsReport::new(&draws, &cfg), &cpath).unwrap();
    let back = read_draws_csv(&dpath, &read_diagnostics(&cpath).unwrap()).unwrap();
    assert_eq!(back.param_names, draws.param_names);
    assert_eq!(back.samples, draws.samples);
    assert_eq!(back.divergent, draws.divergent);
}

#[test]
fn well_conditioned_fit_converges() {
    let t = GenerativeTruth {
        lm_count: 1,
        ..truth(0.3, 5, 4, 200, 12)
    };
    let m = model_for(&t, true);
    let draws = sample_posterior(
        &m,
        &SamplerConfig {
            seed: 3,
            ..Default::default()
        },
    )
    .unwrap();
    for (name, rhat) in draws.param_names.iter().zip(&draws.rhat) {
        assert!(*rhat < 1.01, "{name}: rhat {rhat}");
    }
    assert_eq!(draws.rhat.len(), m.layout.dim);
    let (lo, hi) = draws.interval(ParamLayout::BETA, 0.89);
    assert!(lo <= hi);
}

#[test]
fn prior_predictive_support_and_symmetry() {
    let m = model_for(&truth(0.0, 5, 4, 200, 3), true);
    let pred = prior_predictive(&m, 2000, 8);
    let rates = pred.rates();
    assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!((mean - 0.5).abs() < 0.02, "mean rate {mean}");
    let low = rates.iter().filter(|&&r| r < 0.3).count() as f64;
    let high = rates.iter().filter(|&&r| r > 0.7).count() as f64;
    assert!((low - high).abs() / rates.len() as f64 <= 0.03);
}

#[test]
fn wide_sigma_priors_give_a_basin() {
    let m = model_for(&truth(0.0, 5, 4, 200, 3), true);
    let wide = HierarchicalModel::new(
        m.design.clone(),
        PriorScales {
            sigma_u: 100.0,
            sigma_v: 100.0,
            sigma_w: 100.0,
            ..PriorScales::default()
        },
    );
    let rates = prior_predictive(&wide, 1000, 9).rates();
    let tails = rates.iter().filter(|&&r| !(0.1..=0.9).contains(&r)).count() as f64 / rates.len() as f64;
    let middle = rates.iter().filter(|&&r| (0.4..=0.6).contains(&r)).count() as f64 / rates.len() as f64;
    assert!(tails > 0.8, "tails {tails}");
    assert!(middle < 0.05, "middle {middle}");
    let default_tails = prior_predictive(&m, 1000, 9)
        .rates()
        .iter()
        .filter(|&&r| !(0.1..=0.9).contains(&r))
        .count() as f64
        / rates.len() as f64;
    assert!(default_tails < tails);
}

fn point_mass(m: &HierarchicalModel, theta: Vec<f64>) -> PosteriorDraws {
    PosteriorDraws::from_parts(m.layout.names(), 1, 1, theta, vec![false], vec![1.0]).unwrap()
}

#[test]
fn degenerate_posterior_predicts_half() {
    let m = model_for(&truth(0.0, 3, 2, 100, 3), true);
    let mut theta = vec![0.0; m.layout.dim];
    theta[ParamLayout::LOG_SIGMA_U] = -30.0;
    theta[m.layout.log_sigma_v.unwrap()] = -30.0;
    theta[m.layout.log_sigma_w] = -30.0;
    let pred = posterior_predictive(&m, &point_mass(&m, theta), 4000, 1).unwrap();
    let rates = pred.rates();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    // binomial MC error of the pooled mean
    let se = (0.25 / (100.0 * rates.len() as f64)).sqrt();
    assert!((mean - 0.5).abs() < 4.0 * se, "{mean}");
    assert!(pred.counts.iter().zip(pred.n.iter().cycle()).all(|(y, n)| y <= n));
}

#[test]
fn predictive_is_deterministic_and_in_support() {
    let m = model_for(&truth(0.2, 3, 3, 60, 4), true);
    let draws = sample_posterior(
        &m,
        &SamplerConfig {
            chains: 2,
            draws: 100,
            tune: 100,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let a = posterior_predictive(&m, &draws, 150, 3).unwrap();
    let b = posterior_predictive(&m, &draws, 150, 3).unwrap();
    assert_eq!(a.counts, b.counts);
    // more samples than draws falls back to resampling
    let c = posterior_predictive(&m, &draws, 500, 3).unwrap();
    assert_eq!(c.draw_index.len(), 500);
    for s in 0..c.count {
        assert!(c.sample(s).iter().zip(&c.n).all(|(y, n)| y <= n));
    }
    let eff = marginal_effect(&c, &m.design).unwrap();
    assert!(eff.samples.iter().all(|e| (-1.0..=1.0).contains(e)));
}

#[test]
fn predictive_intervals_cover_at_nominal_rate() {
    let (mut covered, mut total) = (0usize, 0usize);
    for ds in 0..100u64 {
        let m = model_for(&truth(0.0, 3, 2, 80, ds), true);
        let theta = random_theta(&m.layout, 500 + ds, 0.8);
        let draws = point_mass(&m, theta);
        let observed = posterior_predictive(&m, &draws, 1, 10_000 + ds).unwrap();
        let pred = posterior_predictive(&m, &draws, 2000, ds).unwrap();
        for row in 0..pred.rows {
            let col: Vec<f64> = (0..pred.count).map(|s| pred.sample(s)[row] as f64).collect();
            let (lo, hi) = equal_tailed_interval(&col, 0.89);
            let y = observed.sample(0)[row] as f64;
            covered += usize::from(lo <= y && y <= hi);
            total += 1;
        }
    }
    let rate = covered as f64 / total as f64;
    // discrete counts make closed intervals slightly conservative
    assert!((0.87..=0.96).contains(&rate), "coverage {rate} over {total} rows");
}

/// Predictive draws at a fixed parameter vector, one per sample.
fn fixed_predictive(m: &HierarchicalModel, theta: Vec<f64>, count: usize, seed: u64) -> PredictiveSamples {
    posterior_predictive(m, &point_mass(m, theta), count, seed).unwrap()
}

#[test]
fn identical_arms_give_exact_zero_effects() {
    let m = model_for(&truth(0.0, 3, 2, 50, 1), true);
    let mut pred = fixed_predictive(&m, vec![0.0; m.layout.dim], 300, 2);
    let pairs = m.design.pairs().unwrap();
    for s in 0..pred.count {
        for &(c, t) in &pairs {
            pred.counts[s * pred.rows + t] = pred.counts[s * pred.rows + c];
        }
    }
    let eff = marginal_effect(&pred, &m.design).unwrap();
    assert!(eff.samples.iter().all(|&e| e == 0.0));
    assert_eq!((eff.mean, eff.ci_low, eff.ci_high), (0.0, 0.0, 0.0));
}

#[test]
fn null_truth_effect_is_within_mc_error() {
    let m = model_for(&truth(0.0, 5, 4, 200, 6), true);
    let mut theta = random_theta(&m.layout, 8, 1.0);
    theta[ParamLayout::BETA] = 0.0;
    theta[m.layout.log_sigma_w] = -40.0;
    let eff = marginal_effect(&fixed_predictive(&m, theta, 4000, 3), &m.design).unwrap();
    let sd = (eff.samples.iter().map(|e| (e - eff.mean).powi(2)).sum::<f64>() / 3999.0).sqrt();
    assert!(eff.mean.abs() < 2.0 * sd / 4000f64.sqrt(), "mean {} sd {sd}", eff.mean);
    assert_eq!(eff.level, 0.89);
    assert!(eff.samples.contains(&eff.ci_low) && eff.samples.contains(&eff.ci_high));
}

#[test]
fn conditional_effects_pool_to_marginal_exactly() {
    let t = truth(0.3, 4, 3, 100, 2);
    let mut recs = simulate(&t).unwrap().records;
    // ragged: drop a few subsamples
    recs.retain(|r| !(r.task_id == t.task_name(1) && r.subsample_index == 0));
    let design = ModelDesign::from_records(&recs, Framing::Bias, true).unwrap();
    let m = HierarchicalModel::new(design, PriorScales::default());
    let pred = fixed_predictive(&m, random_theta(&m.layout, 3, 1.0), 500, 4);
    let marginal = marginal_effect(&pred, &m.design).unwrap();
    let parts: Vec<_> = (0..m.design.n_lms())
        .flat_map(|i| (0..m.design.n_tasks()).map(move |j| (i, j)))
        .map(|(i, j)| conditional_effect(&pred, &m.design, i, j).unwrap())
        .collect();
    let pooled = pool_effects(&parts).unwrap();
    assert_eq!(pooled.samples, marginal.samples);
    assert_eq!(pooled.mean, marginal.mean);
    assert_eq!(pooled.pairs, recs.len());
}

#[test]
fn single_subsample_conditional_is_that_difference() {
    let m = model_for(
        &GenerativeTruth {
            lm_count: 1,
            ..truth(0.1, 3, 1, 40, 5)
        },
        true,
    );
    let pred = fixed_predictive(&m, random_theta(&m.layout, 1, 1.0), 200, 6);
    let eff = conditional_effect(&pred, &m.design, 0, 2).unwrap();
    let (c, t) = m.design.pairs().unwrap()[2];
    for s in 0..pred.count {
        let y = pred.sample(s);
        assert_eq!(eff.samples[s], (y[t] as f64 - y[c] as f64) / 40.0);
    }
}

#[test]
fn injected_task_bias_shows_in_conditional_effect() {
    let m = model_for(&truth(0.0, 5, 20, 200, 7), true);
    let l = &m.layout;
    let mut theta = vec![0.0; l.dim];
    theta[ParamLayout::LOG_SIGMA_U] = -1.0;
    theta[l.log_sigma_v.unwrap()] = -2.0;
    theta[l.log_sigma_w] = 0.0;
    theta[l.w_index(3, 1)] = 0.25;
    theta[l.w_index(3, 0)] = -0.25;
    let pred = fixed_predictive(&m, theta, 2000, 8);
    let hit = conditional_effect(&pred, &m.design, 0, 3).unwrap();
    assert!(hit.ci_low > 0.0, "{hit:?}");
    let miss = conditional_effect(&pred, &m.design, 0, 2).unwrap();
    assert!(miss.ci_low < 0.0 && miss.ci_high > 0.0);
}

#[test]
fn zero_effects_split_tasks_by_sign() {
    let t = GenerativeTruth {
        lm_count: 1,
        ..truth(0.0, 25, 20, 200, 9)
    };
    let m = model_for(&t, true);
    let mut theta = random_theta(&m.layout, 10, 1.0);
    theta[ParamLayout::BETA] = 0.0;
    theta[m.layout.log_sigma_w] = -40.0;
    let pred = fixed_predictive(&m, theta, 1000, 11);
    let positive = (0..25)
        .filter(|&j| conditional_effect(&pred, &m.design, 0, j).unwrap().mean > 0.0)
        .count();
    assert!((6..=19).contains(&positive), "{positive} of 25 positive");
}

#[test]
fn effect_errors() {
    let m = model_for(&truth(0.0, 2, 2, 50, 1), true);
    let pred = fixed_predictive(&m, vec![0.0; m.layout.dim], 10, 1);
    assert!(matches!(
        conditional_effect(&pred, &m.design, 0, 9),
        Err(Error::Index(_))
    ));
    let other = model_for(&truth(0.0, 3, 2, 50, 1), true);
    assert!(matches!(marginal_effect(&pred, &other.design), Err(Error::Pairing(_))));
}
