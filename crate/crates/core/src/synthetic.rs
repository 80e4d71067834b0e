//! Synthetic household populations with known demand parameters.
//!
//! Prices are drawn jointly lognormal with a configurable correlation of the
//! log prices. Each household is given one vehicle and a work/non-work trip
//! pair sized so that the ordinary cost pipeline recovers exactly the drawn
//! per-mile fuel and time prices. Annual VMT then follows either a
//! reduced-form log-linear demand or the structural closed form, shifted by
//! an additive cluster effect and idiosyncratic noise.
//!
//! [`monte_carlo_recovery`] repeats generation and estimation across
//! independent seeds and summarises bias, dispersion and confidence-interval
//! coverage.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{
    build_design, ControlBlock, ControlSpec, DesignContext, DesignError, ModelId, ModelSpec, LOG_PF,
    LOG_PI, LOG_PT,
};
use crate::estimator::{fit_model, EstimatorError, FitOptions, FitResult};
use crate::model::{
    structural_vmt, ControlValue, HouseholdRecord, IncomeGroupTable, ModelError, StructuralParams, TripPurpose,
    TripRecord, TtcScenario, VehicleRecord,
};

/// Two-sided 95% normal critical value.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("replication {rep}: {source}")]
    Estimation { rep: u64, source: EstimatorError },
}

/// Slope shifts for one income group relative to the base group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupShift {
    pub intercept: f64,
    pub eps_f: f64,
    pub eps_t: f64,
    pub eps_vmt: f64,
}

/// Data-generating demand model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandTruth {
    /// `log VMT = intercept + eps_f log p_f + eps_t log p_t + eps_vmt log pi`,
    /// plus per-group shifts for groups other than the base.
    ReducedForm {
        intercept: f64,
        #[serde(default)]
        eps_f: f64,
        #[serde(default)]
        eps_t: f64,
        #[serde(default)]
        eps_vmt: f64,
        #[serde(default)]
        group_shifts: BTreeMap<u8, GroupShift>,
    },
    /// VMT from the utility-maximizing closed form.
    Structural(StructuralParams),
}

impl DemandTruth {
    /// Separate-price truth with no income heterogeneity.
    pub fn separate(intercept: f64, eps_f: f64, eps_t: f64) -> Self {
        DemandTruth::ReducedForm { intercept, eps_f, eps_t, eps_vmt: 0.0, group_shifts: BTreeMap::new() }
    }

    /// Combined-price truth with no income heterogeneity.
    pub fn combined(intercept: f64, eps_vmt: f64) -> Self {
        DemandTruth::ReducedForm { intercept, eps_f: 0.0, eps_t: 0.0, eps_vmt, group_shifts: BTreeMap::new() }
    }

    /// True value of a named price coefficient, where the truth implies one.
    pub fn coefficient(&self, column: &str) -> Option<f64> {
        match self {
            DemandTruth::Structural(p) => (column == LOG_PI).then(|| p.elasticity()),
            DemandTruth::ReducedForm { eps_f, eps_t, eps_vmt, group_shifts, .. } => {
                let base = [(LOG_PF, *eps_f), (LOG_PT, *eps_t), (LOG_PI, *eps_vmt)];
                if let Some(&(_, v)) = base.iter().find(|(name, _)| *name == column) {
                    return Some(v);
                }
                let (price, group) = column.split_once(":group")?;
                let group: u8 = group.parse().ok()?;
                let shift = group_shifts.get(&group).copied().unwrap_or_default();
                match price {
                    LOG_PF => Some(shift.eps_f),
                    LOG_PT => Some(shift.eps_t),
                    LOG_PI => Some(shift.eps_vmt),
                    _ => None,
                }
            }
        }
    }
}

/// A numeric control drawn from a normal distribution that enters log VMT
/// linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticControl {
    pub name: String,
    pub block: ControlBlock,
    pub mean: f64,
    pub sd: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub truth: DemandTruth,
    pub price_log_correlation: f64,
    pub log_fuel_price_mean: f64,
    pub log_fuel_price_sd: f64,
    pub log_time_price_mean: f64,
    pub log_time_price_sd: f64,
    pub n_clusters: usize,
    pub cluster_effect_sd: f64,
    pub noise_sd: f64,
    /// Probability of each income group, in the order of the group table.
    pub income_group_probabilities: Vec<f64>,
    /// Log-SD of the sample weights; zero gives unit weights.
    pub weight_log_sd: f64,
    pub gas_price: f64,
    /// Share of driving hours spent on work trips.
    pub work_hour_share: f64,
    /// Annual miles covered by the trip log used to derive time cost.
    pub trip_miles: f64,
    /// Scenario under which the drawn time price is reproduced.
    pub ttc_scenario: TtcScenario,
    pub controls: Vec<SyntheticControl>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let (sd_f, sd_t) = (0.3, 0.6);
        Self {
            n: 50_000,
            truth: DemandTruth::separate(8.6, -0.10, -0.40),
            price_log_correlation: 0.37,
            // log means chosen so that E[p_f] = 0.10 and E[p_t] = 0.40 USD/mile
            log_fuel_price_mean: 0.10f64.ln() - sd_f * sd_f / 2.0,
            log_fuel_price_sd: sd_f,
            log_time_price_mean: 0.40f64.ln() - sd_t * sd_t / 2.0,
            log_time_price_sd: sd_t,
            n_clusters: 50,
            cluster_effect_sd: 0.2,
            noise_sd: 0.8,
            income_group_probabilities: vec![0.2; 5],
            weight_log_sd: 0.5,
            gas_price: 2.39,
            work_hour_share: 0.3,
            trip_miles: 1_000.0,
            ttc_scenario: TtcScenario::BASE,
            controls: Vec::new(),
            seed: 20_170_419,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self, groups: &IncomeGroupTable) -> Result<(), SyntheticError> {
        let bad = |m: String| Err(SyntheticError::InvalidConfig(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.price_log_correlation.abs() < 1.0) {
            return bad(format!("price correlation must lie in (-1, 1), got {}", self.price_log_correlation));
        }
        for (name, sd) in [
            ("log_fuel_price_sd", self.log_fuel_price_sd),
            ("log_time_price_sd", self.log_time_price_sd),
            ("cluster_effect_sd", self.cluster_effect_sd),
            ("noise_sd", self.noise_sd),
            ("weight_log_sd", self.weight_log_sd),
        ] {
            if !(sd >= 0.0) || !sd.is_finite() {
                return bad(format!("{name} must be non-negative, got {sd}"));
            }
        }
        if self.n_clusters == 0 {
            return bad("n_clusters must be positive".into());
        }
        let probs = &self.income_group_probabilities;
        if probs.len() != groups.len() {
            return bad(format!("{} income-group probabilities for {} groups", probs.len(), groups.len()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("income-group probabilities must be non-negative and sum to 1".into());
        }
        if !(self.gas_price > 0.0) || !(self.trip_miles > 0.0) {
            return bad("gas_price and trip_miles must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.work_hour_share) {
            return bad(format!("work_hour_share must lie in [0, 1], got {}", self.work_hour_share));
        }
        if self.hourly_wage_share() <= 0.0 {
            return bad("time-cost scenario values no driving hours".into());
        }
        for c in &self.controls {
            if !(c.sd >= 0.0) {
                return bad(format!("control {} has negative sd", c.name));
            }
        }
        if let DemandTruth::Structural(p) = &self.truth {
            if !(p.alpha < 0.0) || !(p.xi > 0.0) {
                return bad("structural truth needs alpha < 0 and xi > 0".into());
            }
        }
        Ok(())
    }

    /// Control specs for writing or fitting a generated population.
    pub fn control_specs(&self) -> Vec<ControlSpec> {
        self.controls.iter().map(|c| ControlSpec::numeric(&c.name, c.block)).collect()
    }

    fn hourly_wage_share(&self) -> f64 {
        let s = self.ttc_scenario;
        s.work_fraction * self.work_hour_share + s.nonwork_fraction * (1.0 - self.work_hour_share)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Independent random stream for one replication of a seeded study.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Draw a population from `config.seed`.
pub fn generate_population(
    config: &SyntheticConfig,
    groups: &IncomeGroupTable,
) -> Result<Vec<HouseholdRecord>, SyntheticError> {
    config.validate(groups)?;
    generate_with(config, groups, &mut replication_rng(config.seed, 0))
}

fn generate_with(
    config: &SyntheticConfig,
    groups: &IncomeGroupTable,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<HouseholdRecord>, SyntheticError> {
    let group_draw = WeightedIndex::new(&config.income_group_probabilities)
        .map_err(|e| SyntheticError::InvalidConfig(e.to_string()))?;
    let cluster_effects: Vec<f64> = (0..config.n_clusters).map(|_| config.cluster_effect_sd * normal(rng)).collect();
    let rho = config.price_log_correlation;
    let rho_c = (1.0 - rho * rho).sqrt();
    let wage_share = config.hourly_wage_share();
    let width = config.n.to_string().len();

    let mut out = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let id = format!("syn{i:0width$}");
        let cluster = rng.random_range(0..config.n_clusters);
        let group = &groups.groups()[group_draw.sample(rng)];
        let (z1, z2) = (normal(rng), normal(rng));
        let p_f = (config.log_fuel_price_mean + config.log_fuel_price_sd * z1).exp();
        let p_t = (config.log_time_price_mean + config.log_time_price_sd * (rho * z1 + rho_c * z2)).exp();
        let pi = p_f + p_t;
        let wage = group.wage();

        let mut controls = BTreeMap::new();
        let mut control_term = 0.0;
        for c in &config.controls {
            let v = c.mean + c.sd * normal(rng);
            control_term += c.coefficient * v;
            controls.insert(c.name.clone(), ControlValue::Numeric(v));
        }
        let log_vmt_mean = match &config.truth {
            DemandTruth::ReducedForm { intercept, eps_f, eps_t, eps_vmt, group_shifts } => {
                let s = group_shifts.get(&group.index).copied().unwrap_or_default();
                intercept
                    + s.intercept
                    + (eps_f + s.eps_f) * p_f.ln()
                    + (eps_t + s.eps_t) * p_t.ln()
                    + (eps_vmt + s.eps_vmt) * pi.ln()
            }
            DemandTruth::Structural(p) => structural_vmt(p.alpha, p.xi, p.t_y, wage, pi)?.ln(),
        };
        let noise = config.noise_sd * normal(rng);
        let annual_vmt = (log_vmt_mean + control_term + cluster_effects[cluster] + noise).exp();
        let sample_weight = (config.weight_log_sd * normal(rng)).exp();

        // trip log sized so that wage_share * wage * hours / miles == p_t
        let miles = config.trip_miles;
        let hours = p_t * miles / (wage_share * wage);
        let work_hours = config.work_hour_share * hours;
        let trip = |purpose, h: f64| TripRecord { household_id: id.clone(), purpose, duration: h, distance: miles * h / hours };
        let trips = vec![trip(TripPurpose::Work, work_hours), trip(TripPurpose::Nonwork, hours - work_hours)];

        out.push(HouseholdRecord {
            annual_vmt,
            annual_drive_time: annual_vmt * hours / miles,
            gas_price: config.gas_price,
            income_group: group.index,
            sample_weight,
            cluster_id: format!("syn:{cluster:03}"),
            controls,
            vehicles: vec![VehicleRecord {
                household_id: id.clone(),
                annual_vmt,
                mpg: config.gas_price / p_f,
                model_year: 2012,
            }],
            trips,
            id,
        });
    }
    Ok(out)
}

/// Recovery statistics for one coefficient across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecovery {
    pub name: String,
    pub truth: Option<f64>,
    pub mean: f64,
    pub bias: Option<f64>,
    pub sd: f64,
    pub mean_se: f64,
    /// Share of replications whose 95% interval covers the truth.
    pub coverage: Option<f64>,
}

/// Fuel-price elasticity from the fuel-only model against the separate-price
/// model on the same populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedVariableComparison {
    pub mean_eps_f_fuel_only: f64,
    pub mean_eps_f_separate: f64,
    /// Share of replications with `|eps_f(fuel only)| > |eps_f(separate)|`.
    pub share_fuel_only_larger: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub reps: usize,
    pub n: usize,
    pub model: ModelId,
    pub seed: u64,
    pub coefficients: Vec<CoefficientRecovery>,
    pub omitted_variable: OmittedVariableComparison,
}

impl McReport {
    pub fn coefficient(&self, name: &str) -> Option<&CoefficientRecovery> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

struct Replication {
    estimates: Vec<(f64, f64)>,
    eps_f_fuel_only: f64,
    eps_f_separate: f64,
}

fn fit(records: &[HouseholdRecord], spec: &ModelSpec, ctx: &DesignContext<'_>, rep: u64) -> Result<FitResult, SyntheticError> {
    let (design, _) = build_design(records, spec, ctx)?;
    fit_model(&design, spec, FitOptions::default()).map_err(|source| SyntheticError::Estimation { rep, source })
}

/// Price coefficients of a spec: the price columns and their interactions.
fn price_coefficients(fit: &FitResult) -> Vec<String> {
    fit.names
        .iter()
        .filter(|n| [LOG_PF, LOG_PT, LOG_PI].iter().any(|p| n.as_str() == *p || n.starts_with(&format!("{p}:"))))
        .cloned()
        .collect()
}

/// Repeat generation and estimation `reps` times with per-replication random
/// streams derived from `config.seed`.
pub fn monte_carlo_recovery(
    config: &SyntheticConfig,
    groups: &IncomeGroupTable,
    reps: usize,
    spec: &ModelSpec,
) -> Result<McReport, SyntheticError> {
    config.validate(groups)?;
    if reps < 2 {
        return Err(SyntheticError::InvalidConfig(format!("need at least 2 replications, got {reps}")));
    }
    let controls = config.control_specs();
    let ctx = DesignContext { groups, controls: &controls };
    let fuel_only = ModelSpec { model: ModelId::M1, interact_income: false, ..spec.clone() };
    let separate = ModelSpec { model: ModelId::M3, interact_income: false, ..spec.clone() };

    // names fixed by a probe fit so every replication reports the same columns
    let probe = fit(&generate_with(config, groups, &mut replication_rng(config.seed, 0))?, spec, &ctx, 0)?;
    let names = price_coefficients(&probe);

    let results: Vec<Replication> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let records = generate_with(config, groups, &mut replication_rng(config.seed, rep))?;
            let main = fit(&records, spec, &ctx, rep)?;
            let m1 = fit(&records, &fuel_only, &ctx, rep)?;
            let m3 = fit(&records, &separate, &ctx, rep)?;
            let estimates = names
                .iter()
                .map(|n| {
                    let i = main.index(n).expect("probe and replication share columns");
                    (main.beta[i], main.se[i])
                })
                .collect();
            let eps_f = |f: &FitResult| f.coef(LOG_PF).expect("fuel price column").value;
            Ok(Replication { estimates, eps_f_fuel_only: eps_f(&m1), eps_f_separate: eps_f(&m3) })
        })
        .collect::<Result<_, SyntheticError>>()?;

    let r = reps as f64;
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<(f64, f64)> = results.iter().map(|rep| rep.estimates[j]).collect();
            let mean = values.iter().map(|v| v.0).sum::<f64>() / r;
            let sd = (values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
            let mean_se = values.iter().map(|v| v.1).sum::<f64>() / r;
            let truth = config.truth.coefficient(name);
            let coverage = truth.map(|t| values.iter().filter(|(b, se)| (b - t).abs() <= Z_95 * se).count() as f64 / r);
            CoefficientRecovery { name: name.clone(), truth, mean, bias: truth.map(|t| mean - t), sd, mean_se, coverage }
        })
        .collect();

    let omitted_variable = OmittedVariableComparison {
        mean_eps_f_fuel_only: results.iter().map(|x| x.eps_f_fuel_only).sum::<f64>() / r,
        mean_eps_f_separate: results.iter().map(|x| x.eps_f_separate).sum::<f64>() / r,
        share_fuel_only_larger: results.iter().filter(|x| x.eps_f_fuel_only.abs() > x.eps_f_separate.abs()).count()
            as f64
            / r,
    };
    Ok(McReport { reps, n: config.n, model: spec.model, seed: config.seed, coefficients, omitted_variable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::interaction_name;
    use crate::estimator::wls_fit;

    fn small(n: usize) -> SyntheticConfig {
        SyntheticConfig { n, ..SyntheticConfig::default() }
    }

    fn log_prices(records: &[HouseholdRecord], groups: &IncomeGroupTable) -> Vec<(f64, f64)> {
        records
            .iter()
            .map(|r| {
                let c = r.costs(groups, TtcScenario::BASE).unwrap();
                (c.p_f.ln(), c.p_t.ln())
            })
            .collect()
    }

    #[test]
    fn pipeline_recovers_drawn_prices() {
        let groups = IncomeGroupTable::default();
        let cfg = SyntheticConfig { noise_sd: 0.0, cluster_effect_sd: 0.0, ..small(200) };
        let pop = generate_population(&cfg, &groups).unwrap();
        if let DemandTruth::ReducedForm { intercept, eps_f, eps_t, .. } = cfg.truth {
            for (r, (lf, lt)) in pop.iter().zip(log_prices(&pop, &groups)) {
                let expected = intercept + eps_f * lf + eps_t * lt;
                assert!((r.annual_vmt.ln() - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let groups = IncomeGroupTable::default();
        let cfg = SyntheticConfig { noise_sd: 0.0, cluster_effect_sd: 0.0, ..small(500) };
        let pop = generate_population(&cfg, &groups).unwrap();
        let ctx = DesignContext { groups: &groups, controls: &[] };
        let spec = ModelSpec::new(ModelId::M3).without_controls();
        let (d, _) = build_design(&pop, &spec, &ctx).unwrap();
        let sol = wls_fit(&d.x, &d.y, &d.w).unwrap();
        assert!((sol.beta[0] - 8.6).abs() < 1e-10);
        assert!((sol.beta[1] + 0.10).abs() < 1e-10);
        assert!((sol.beta[2] + 0.40).abs() < 1e-10);
    }

    #[test]
    fn price_correlation_matches_config() {
        let groups = IncomeGroupTable::default();
        let pop = generate_population(&small(50_000), &groups).unwrap();
        let lp = log_prices(&pop, &groups);
        let n = lp.len() as f64;
        let (ma, mb) = lp.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in &lp {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        let r = sab / (saa * sbb).sqrt();
        assert!((r - 0.37).abs() < 0.02, "sample correlation {r}");
    }

    #[test]
    fn same_seed_same_population() {
        let groups = IncomeGroupTable::default();
        let a = generate_population(&small(300), &groups).unwrap();
        let b = generate_population(&small(300), &groups).unwrap();
        assert_eq!(a, b);
        let c = generate_population(&SyntheticConfig { seed: 7, ..small(300) }, &groups).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs() {
        let groups = IncomeGroupTable::default();
        for cfg in [
            small(0),
            SyntheticConfig { price_log_correlation: 1.0, ..small(10) },
            SyntheticConfig { noise_sd: -1.0, ..small(10) },
            SyntheticConfig { income_group_probabilities: vec![0.5, 0.5], ..small(10) },
            SyntheticConfig { income_group_probabilities: vec![0.3; 5], ..small(10) },
        ] {
            assert!(matches!(generate_population(&cfg, &groups), Err(SyntheticError::InvalidConfig(_))));
        }
    }

    #[test]
    fn structural_population_recovers_elasticity() {
        let groups = IncomeGroupTable::default();
        let cfg = SyntheticConfig {
            truth: DemandTruth::Structural(StructuralParams { alpha: -1.0, xi: 50.0, t_y: 0.0 }),
            noise_sd: 0.0,
            cluster_effect_sd: 0.0,
            ..small(2_000)
        };
        let pop = generate_population(&cfg, &groups).unwrap();
        let ctx = DesignContext { groups: &groups, controls: &[] };
        let spec = ModelSpec::new(ModelId::M4).without_controls();
        let (d, _) = build_design(&pop, &spec, &ctx).unwrap();
        let fit = fit_model(&d, &spec, FitOptions::default()).unwrap();
        assert!((fit.coef(LOG_PI).unwrap().value + 0.5).abs() < 1e-9);
    }

    #[test]
    fn truth_lookup_by_column() {
        let mut shifts = BTreeMap::new();
        shifts.insert(5, GroupShift { eps_f: 0.044, ..GroupShift::default() });
        let t = DemandTruth::ReducedForm { intercept: 8.0, eps_f: -0.153, eps_t: -0.29, eps_vmt: 0.0, group_shifts: shifts };
        assert_eq!(t.coefficient(LOG_PF), Some(-0.153));
        assert_eq!(t.coefficient(&interaction_name(LOG_PF, 5)), Some(0.044));
        assert_eq!(t.coefficient(&interaction_name(LOG_PT, 3)), Some(0.0));
        assert_eq!(t.coefficient("hhsize"), None);
    }

    #[test]
    fn tiny_noisy_study_still_reports() {
        let groups = IncomeGroupTable::default();
        let cfg = SyntheticConfig { noise_sd: 50.0, ..small(400) };
        let spec = ModelSpec::new(ModelId::M3).without_controls();
        let report = monte_carlo_recovery(&cfg, &groups, 2, &spec).unwrap();
        assert_eq!(report.reps, 2);
        assert!(report.coefficient(LOG_PF).unwrap().sd > 0.1);
        assert!(monte_carlo_recovery(&cfg, &groups, 1, &spec).is_err());
    }

    #[test]
    fn study_is_deterministic() {
        let groups = IncomeGroupTable::default();
        let spec = ModelSpec::new(ModelId::M3).without_controls();
        let a = monte_carlo_recovery(&small(2_000), &groups, 4, &spec).unwrap();
        let b = monte_carlo_recovery(&small(2_000), &groups, 4, &spec).unwrap();
        assert_eq!(a, b);
    }
}
