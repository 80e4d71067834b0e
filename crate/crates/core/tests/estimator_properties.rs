use std::collections::BTreeMap;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use vmt_rebound::design::{build_design, interaction_name, DesignContext, DesignMatrix, ModelId, ModelSpec, LOG_PF, LOG_PI, LOG_PT};
use vmt_rebound::estimator::{cluster_robust_cov, fit_model, wls_fit, Correction, FitOptions};
use vmt_rebound::model::{HouseholdRecord, IncomeGroupTable};
use vmt_rebound::synthetic::{generate_population, DemandTruth, GroupShift, SyntheticConfig};

fn population(n: usize, seed: u64) -> Vec<HouseholdRecord> {
    let config = SyntheticConfig { n, seed, ..SyntheticConfig::default() };
    generate_population(&config, &IncomeGroupTable::default()).unwrap()
}

fn design(records: &[HouseholdRecord], spec: &ModelSpec) -> DesignMatrix {
    let groups = IncomeGroupTable::default();
    let ctx = DesignContext { groups: &groups, controls: &[] };
    build_design(records, spec, &ctx).unwrap().0
}

fn cr0() -> FitOptions {
    FitOptions { correction: Correction::CR0, ..FitOptions::default() }
}

#[test]
fn separate_price_recovery_within_three_se() {
    let records = population(50_000, 1);
    let spec = ModelSpec::new(ModelId::M3).without_controls();
    let fit = fit_model(&design(&records, &spec), &spec, FitOptions::default()).unwrap();
    for (name, truth) in [(LOG_PF, -0.10), (LOG_PT, -0.40)] {
        let e = fit.coef(name).unwrap();
        assert!((e.value - truth).abs() < 3.0 * e.se, "{name}: {} +- {}", e.value, e.se);
    }
}

#[test]
fn weight_scaling_changes_nothing() {
    let records = population(3_000, 2);
    let spec = ModelSpec::new(ModelId::M3).without_controls();
    let d = design(&records, &spec);
    let mut scaled = d.clone();
    scaled.w *= 37.5;
    let a = fit_model(&d, &spec, cr0()).unwrap();
    let b = fit_model(&scaled, &spec, cr0()).unwrap();
    for i in 0..a.beta.len() {
        assert_relative_eq!(a.beta[i], b.beta[i], max_relative = 1e-10);
        for j in 0..a.beta.len() {
            assert_relative_eq!(a.vcov[i][j], b.vcov[i][j], max_relative = 1e-10);
        }
    }
    assert_relative_eq!(a.pseudo_r2, b.pseudo_r2, max_relative = 1e-10);
}

#[test]
fn row_order_does_not_matter() {
    let mut records = population(3_000, 3);
    let spec = ModelSpec::new(ModelId::M4).interacted().without_controls();
    let a = fit_model(&design(&records, &spec), &spec, FitOptions::default()).unwrap();
    records.reverse();
    records.swap(10, 2_000);
    let b = fit_model(&design(&records, &spec), &spec, FitOptions::default()).unwrap();
    assert_eq!(a.names, b.names);
    for i in 0..a.beta.len() {
        assert_relative_eq!(a.beta[i], b.beta[i], max_relative = 1e-10);
        assert_relative_eq!(a.se[i], b.se[i], max_relative = 1e-10);
    }
    assert_relative_eq!(a.pseudo_r2, b.pseudo_r2, max_relative = 1e-12);
}

#[test]
fn weighted_residuals_are_orthogonal_to_columns() {
    let records = population(3_000, 4);
    let spec = ModelSpec::new(ModelId::M3).interacted();
    let d = design(&records, &spec);
    let sol = wls_fit(&d.x, &d.y, &d.w).unwrap();
    let scale: f64 = d.y.iter().zip(d.w.iter()).map(|(y, w)| w * y.abs()).sum();
    for j in 0..d.k() {
        let s: f64 = (0..d.n()).map(|i| d.w[i] * sol.residuals[i] * d.x[(i, j)]).sum();
        assert!(s.abs() <= 1e-8 * scale, "column {}: {s}", d.column_names[j]);
    }
}

#[test]
fn nested_models_fit_no_worse() {
    for seed in 0..5 {
        let records = population(2_000, 10 + seed);
        let r2 = |m| {
            let spec = ModelSpec::new(m).without_controls();
            fit_model(&design(&records, &spec), &spec, FitOptions::default()).unwrap().pseudo_r2
        };
        let (m1, m2, m3) = (r2(ModelId::M1), r2(ModelId::M2), r2(ModelId::M3));
        assert!(m3 >= m1 - 1e-12 && m3 >= m2 - 1e-12, "{m1} {m2} {m3}");
    }
}

#[test]
fn rescaling_combined_price_moves_only_the_intercept() {
    let records = population(3_000, 5);
    let spec = ModelSpec::new(ModelId::M4).without_controls();
    let d = design(&records, &spec);
    let col = d.column(LOG_PI).unwrap();
    let c: f64 = 3.7;
    let mut shifted = d.clone();
    for i in 0..d.n() {
        shifted.x[(i, col)] += c.ln();
    }
    let a = fit_model(&d, &spec, FitOptions::default()).unwrap();
    let b = fit_model(&shifted, &spec, FitOptions::default()).unwrap();
    let slope = a.beta[col];
    assert_relative_eq!(slope, b.beta[col], max_relative = 1e-10);
    assert_relative_eq!(b.beta[0], a.beta[0] - slope * c.ln(), max_relative = 1e-10);
    // fitted values at the original prices are unchanged
    for i in (0..d.n()).step_by(97) {
        let fa = a.beta[0] + slope * d.x[(i, col)];
        let fb = b.beta[0] + b.beta[col] * shifted.x[(i, col)];
        assert_relative_eq!(fa, fb, max_relative = 1e-10);
    }
}

#[test]
fn clustered_errors_match_classical_under_independence() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (n, g, reps) = (2_000, 200, 200);
    let mut ratio_sum = 0.0;
    for _ in 0..reps {
        let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
        let y = DVector::from_fn(n, |i, _| 1.0 - 0.5 * x[(i, 1)] + Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let w = DVector::from_element(n, 1.0);
        let clusters: Vec<String> = (0..n).map(|_| rng.random_range(0..g).to_string()).collect();
        let sol = wls_fit(&x, &y, &w).unwrap();
        let v = cluster_robust_cov(&x, &sol.residuals, &w, &clusters, Correction::CR1, false).unwrap();
        let sigma2 = sol.residuals.norm_squared() / (n - 2) as f64;
        let classical = (sigma2 * sol.xtwx_inv[(1, 1)]).sqrt();
        ratio_sum += v[(1, 1)].sqrt() / classical;
    }
    let mean_ratio = ratio_sum / reps as f64;
    assert!((mean_ratio - 1.0).abs() < 0.15, "mean SE ratio {mean_ratio}");
}

#[test]
fn per_group_combined_elasticities_recovered() {
    let mut shifts = BTreeMap::new();
    for (g, d) in [(2u8, 0.05), (3, 0.10), (4, 0.15), (5, 0.20)] {
        shifts.insert(g, GroupShift { eps_vmt: d, intercept: 0.1 * f64::from(g), ..GroupShift::default() });
    }
    let truth = DemandTruth::ReducedForm { intercept: 9.0, eps_f: 0.0, eps_t: 0.0, eps_vmt: -0.55, group_shifts: shifts };
    let config = SyntheticConfig { n: 50_000, truth, seed: 6, ..SyntheticConfig::default() };
    let records = generate_population(&config, &IncomeGroupTable::default()).unwrap();
    let spec = ModelSpec::new(ModelId::M4).interacted().with_blocks(&[vmt_rebound::design::ControlBlock::Socioeconomic]);
    let fit = fit_model(&design(&records, &spec), &spec, FitOptions::default()).unwrap();
    let set = &fit.elasticities;
    assert!(set.interacted && set.eps_vmt.is_none());
    for (g, expected) in [(1u8, -0.55), (2, -0.50), (3, -0.45), (4, -0.40), (5, -0.35)] {
        let e = set.per_group[&g].eps_vmt.unwrap();
        assert!((e.value - expected).abs() < 3.0 * e.se, "group {g}: {} +- {}", e.value, e.se);
        if g > 1 {
            let base = fit.coef(LOG_PI).unwrap().value;
            let inter = fit.coef(&interaction_name(LOG_PI, g)).unwrap().value;
            assert_relative_eq!(e.value, base + inter, max_relative = 1e-12);
        }
    }
}
