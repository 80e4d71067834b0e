//! Induced travel and energy rebound under connected-and-automated vehicle
//! cost scenarios.
//!
//! A scenario raises fuel economy by a fraction `x` and cuts the per-mile
//! travel time cost by a fraction `y`. With constant elasticities the
//! induced travel is
//!
//! ```text
//! separate prices:  delta = (1/(1+x))^eps_f * (1-y)^eps_t - 1
//! combined price:   delta = (pi_cav/pi_bau)^eps_vmt - 1,
//!                   pi_cav = p_f/(1+x) + p_t (1-y)
//! ```
//!
//! and per-household energy use scales by `(1+delta)/(1+x)`. Backfire is any
//! scenario where that ratio exceeds one, i.e. `delta > x`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::ElasticitySet;
use crate::model::{HouseholdRecord, IncomeGroupTable, ModelError, TtcScenario};
use crate::table::fmt_f64;

/// Target accuracy of the frontier solver on `|delta - break_even|`.
pub const FRONTIER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("backfire already at y = 0 for x = {x} (delta = {delta})")]
    NoFrontier { x: f64, delta: f64 },
    #[error("no break-even time-cost reduction below 100% for x = {x}")]
    FrontierUnreachable { x: f64 },
    #[error("induced travel is not increasing in the time-cost reduction at x = {x}")]
    NonMonotone { x: f64 },
    #[error("elasticity set lacks {0}")]
    MissingElasticity(&'static str),
    #[error("missing cost shares for {0}")]
    MissingShares(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Fuel-economy improvement `x` and time-cost reduction `y`, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub x: f64,
    pub y: f64,
}

impl Scenario {
    pub fn new(x: f64, y: f64) -> Result<Self, ForecastError> {
        if !(x > -1.0) || !x.is_finite() {
            return Err(ForecastError::Domain(format!("fuel-economy change must exceed -100%, got {x}")));
        }
        if !(0.0..1.0).contains(&y) {
            return Err(ForecastError::Domain(format!("time-cost reduction must lie in [0, 1), got {y}")));
        }
        Ok(Self { x, y })
    }
}

/// How a fuel-economy improvement `x` maps to per-mile fuel use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelConvention {
    /// MPG rises by `x`: per-mile fuel scales by `1/(1+x)`.
    #[default]
    Mpg,
    /// Per-mile fuel falls by `x`: it scales by `1-x`.
    EnergyIntensity,
}

impl FuelConvention {
    /// Ratio of CAV to BAU fuel use (and fuel cost) per mile.
    pub fn fuel_ratio(self, x: f64) -> f64 {
        match self {
            FuelConvention::Mpg => 1.0 / (1.0 + x),
            FuelConvention::EnergyIntensity => 1.0 - x,
        }
    }

    /// Induced travel at which total energy use is unchanged.
    pub fn break_even(self, x: f64) -> f64 {
        1.0 / self.fuel_ratio(x) - 1.0
    }

    fn check(self, x: f64) -> Result<(), ForecastError> {
        match self {
            FuelConvention::EnergyIntensity if x >= 1.0 => {
                Err(ForecastError::Domain(format!("energy-intensity reduction must be below 100%, got {x}")))
            }
            _ => Ok(()),
        }
    }
}

/// Baseline per-mile fuel and time cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostShares {
    pub p_f: f64,
    pub p_t: f64,
}

impl CostShares {
    pub fn new(p_f: f64, p_t: f64) -> Result<Self, ForecastError> {
        if !(p_f > 0.0) || !(p_t > 0.0) {
            return Err(ForecastError::Domain(format!("cost shares must be positive, got ({p_f}, {p_t})")));
        }
        Ok(Self { p_f, p_t })
    }
}

/// Separate-price induced travel with the MPG convention.
pub fn induced_travel_m3(eps_f: f64, eps_t: f64, scenario: Scenario) -> Result<f64, ForecastError> {
    induced_travel_m3_with(eps_f, eps_t, scenario, FuelConvention::Mpg)
}

pub fn induced_travel_m3_with(
    eps_f: f64,
    eps_t: f64,
    scenario: Scenario,
    convention: FuelConvention,
) -> Result<f64, ForecastError> {
    let Scenario { x, y } = Scenario::new(scenario.x, scenario.y)?;
    convention.check(x)?;
    if !eps_f.is_finite() || !eps_t.is_finite() {
        return Err(ForecastError::Domain("elasticities must be finite".into()));
    }
    Ok(convention.fuel_ratio(x).powf(eps_f) * (1.0 - y).powf(eps_t) - 1.0)
}

/// Combined-price induced travel with the MPG convention.
pub fn induced_travel_m4(eps_vmt: f64, shares: CostShares, scenario: Scenario) -> Result<f64, ForecastError> {
    induced_travel_m4_with(eps_vmt, shares, scenario, FuelConvention::Mpg)
}

pub fn induced_travel_m4_with(
    eps_vmt: f64,
    shares: CostShares,
    scenario: Scenario,
    convention: FuelConvention,
) -> Result<f64, ForecastError> {
    let Scenario { x, y } = Scenario::new(scenario.x, scenario.y)?;
    convention.check(x)?;
    let shares = CostShares::new(shares.p_f, shares.p_t)?;
    let bau = shares.p_f + shares.p_t;
    let cav = shares.p_f * convention.fuel_ratio(x) + shares.p_t * (1.0 - y);
    if !(cav > 0.0) {
        return Err(ForecastError::Domain(format!("CAV combined price is not positive ({cav})")));
    }
    Ok((cav / bau).powf(eps_vmt) - 1.0)
}

/// Energy use relative to business as usual, MPG convention.
pub fn energy_ratio(delta: f64, x: f64) -> f64 {
    (1.0 + delta) / (1.0 + x)
}

/// Net energy increase despite the efficiency gain, MPG convention.
pub fn backfire(delta: f64, x: f64) -> bool {
    delta > x
}

/// Which demand model drives a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "lowercase")]
pub enum ForecastPath {
    M3 { eps_f: f64, eps_t: f64 },
    M4 { eps_vmt: f64, shares: CostShares },
}

impl ForecastPath {
    pub fn delta(&self, scenario: Scenario, convention: FuelConvention) -> Result<f64, ForecastError> {
        match *self {
            ForecastPath::M3 { eps_f, eps_t } => induced_travel_m3_with(eps_f, eps_t, scenario, convention),
            ForecastPath::M4 { eps_vmt, shares } => induced_travel_m4_with(eps_vmt, shares, scenario, convention),
        }
    }

    fn check_signs(&self) -> Result<(), ForecastError> {
        let ok = match *self {
            ForecastPath::M3 { eps_t, .. } => eps_t < 0.0,
            ForecastPath::M4 { eps_vmt, .. } => eps_vmt < 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ForecastError::Domain("frontier requires a negative time or combined elasticity".into()))
        }
    }
}

/// Time-cost reduction `y*` at which energy use is unchanged for a given
/// fuel-economy improvement `x`, found by bisection on `[0, 1)`.
pub fn frontier(path: &ForecastPath, x: f64, convention: FuelConvention) -> Result<f64, ForecastError> {
    path.check_signs()?;
    if !(x > 0.0) {
        return Err(ForecastError::Domain(format!("frontier requires x > 0, got {x}")));
    }
    convention.check(x)?;
    let target = convention.break_even(x);
    let f = |y: f64| -> Result<f64, ForecastError> { Ok(path.delta(Scenario { x, y }, convention)? - target) };

    let f_lo = f(0.0)?;
    if f_lo > 0.0 {
        return Err(ForecastError::NoFrontier { x, delta: f_lo + target });
    }
    if f_lo.abs() < FRONTIER_TOLERANCE {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0 - f64::EPSILON;
    let f_hi = f(hi)?;
    if f_hi < f_lo {
        return Err(ForecastError::NonMonotone { x });
    }
    if f_hi < 0.0 {
        return Err(ForecastError::FrontierUnreachable { x });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.abs() < FRONTIER_TOLERANCE || hi - lo < f64::EPSILON {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Evenly spaced values from `min` to `max` inclusive.
pub fn grid_values(min: f64, max: f64, step: f64) -> Result<Vec<f64>, ForecastError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(ForecastError::InvalidGrid(format!("step must be positive, got {step}")));
    }
    if !(max >= min) {
        return Err(ForecastError::InvalidGrid(format!("range [{min}, {max}] is empty")));
    }
    let span = (max - min) / step;
    let count = (span + 1e-9).floor() as usize + 1;
    let mut v: Vec<f64> = (0..count).map(|i| min + i as f64 * step).collect();
    // land exactly on the endpoint when the step divides the range
    if (span - span.round()).abs() < 1e-9 {
        *v.last_mut().expect("non-empty") = max;
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridRange {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
}

impl Default for GridRange {
    fn default() -> Self {
        Self { x_min: 0.05, x_max: 0.20, y_min: 0.0, y_max: 0.60, step: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub x: f64,
    /// `None` when there is backfire even without a time-cost reduction, or
    /// no reduction below 100% reaches break-even.
    pub y_star: Option<f64>,
}

/// Induced travel and energy ratios over an (x, y) grid.
///
/// `delta[i][j]` is at `(x_values[i], y_values[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
    pub energy_ratio: Vec<Vec<f64>>,
    pub backfire: Vec<Vec<bool>>,
    pub frontier: Vec<FrontierPoint>,
    pub convention: FuelConvention,
}

impl ScenarioGrid {
    pub fn max_delta(&self) -> Option<f64> {
        self.delta.iter().flatten().copied().reduce(f64::max)
    }

    pub fn min_delta(&self) -> Option<f64> {
        self.delta.iter().flatten().copied().reduce(f64::min)
    }

    /// Columns: x, y, delta, energy_ratio, backfire.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,delta,energy_ratio,backfire")?;
        for (i, &x) in self.x_values.iter().enumerate() {
            for (j, &y) in self.y_values.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_f64(x),
                    fmt_f64(y),
                    fmt_f64(self.delta[i][j]),
                    fmt_f64(self.energy_ratio[i][j]),
                    u8::from(self.backfire[i][j])
                )?;
            }
        }
        Ok(())
    }

    /// Columns: x, y_star (empty when there is no frontier point).
    pub fn write_frontier_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y_star")?;
        for p in &self.frontier {
            match p.y_star {
                Some(y) => writeln!(out, "{},{}", fmt_f64(p.x), fmt_f64(y))?,
                None => writeln!(out, "{},", fmt_f64(p.x))?,
            }
        }
        Ok(())
    }
}

/// Fill the scenario grid and its frontier.
pub fn sweep_grid(path: &ForecastPath, range: GridRange, convention: FuelConvention) -> Result<ScenarioGrid, ForecastError> {
    let x_values = grid_values(range.x_min, range.x_max, range.step)?;
    let y_values = grid_values(range.y_min, range.y_max, range.step)?;
    let mut delta = Vec::with_capacity(x_values.len());
    let mut energy = Vec::with_capacity(x_values.len());
    let mut flags = Vec::with_capacity(x_values.len());
    for &x in &x_values {
        let mut d_row = Vec::with_capacity(y_values.len());
        let mut e_row = Vec::with_capacity(y_values.len());
        let mut b_row = Vec::with_capacity(y_values.len());
        for &y in &y_values {
            let d = path.delta(Scenario::new(x, y)?, convention)?;
            d_row.push(d);
            e_row.push((1.0 + d) * convention.fuel_ratio(x));
            b_row.push(d > convention.break_even(x));
        }
        delta.push(d_row);
        energy.push(e_row);
        flags.push(b_row);
    }
    let mut points = Vec::with_capacity(x_values.len());
    for &x in &x_values {
        let y_star = if x > 0.0 && path.check_signs().is_ok() {
            match frontier(path, x, convention) {
                Ok(y) => Some(y),
                Err(ForecastError::NoFrontier { .. } | ForecastError::FrontierUnreachable { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        points.push(FrontierPoint { x, y_star });
    }
    Ok(ScenarioGrid { x_values, y_values, delta, energy_ratio: energy, backfire: flags, frontier: points, convention })
}

/// Fleet energy consumption after a scenario, in gallons of gasoline
/// equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgeReport {
    pub baseline_gge: f64,
    pub new_consumption: f64,
    pub change: f64,
    pub change_fraction: f64,
    pub change_usd: f64,
}

pub fn aggregate_gge(baseline_gge: f64, delta: f64, x: f64, price_per_gge: f64) -> Result<GgeReport, ForecastError> {
    if !(baseline_gge > 0.0) {
        return Err(ForecastError::Domain(format!("baseline consumption must be positive, got {baseline_gge}")));
    }
    if !(x > -1.0) {
        return Err(ForecastError::Domain(format!("fuel-economy change must exceed -100%, got {x}")));
    }
    let new_consumption = baseline_gge * energy_ratio(delta, x);
    let change = new_consumption - baseline_gge;
    Ok(GgeReport {
        baseline_gge,
        new_consumption,
        change,
        change_fraction: change / baseline_gge,
        change_usd: change * price_per_gge,
    })
}

/// Baseline cost shares, overall and by income group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostShareTable {
    pub overall: Option<CostShares>,
    #[serde(default)]
    pub groups: BTreeMap<u8, CostShares>,
}

impl CostShareTable {
    pub fn for_group(&self, group: Option<u8>) -> Result<CostShares, ForecastError> {
        match group {
            None => self.overall.ok_or_else(|| ForecastError::MissingShares("the overall sample".into())),
            Some(g) => self.groups.get(&g).copied().ok_or_else(|| ForecastError::MissingShares(format!("group {g}"))),
        }
    }
}

/// Sample-weighted mean per-mile fuel and time cost, overall and by group.
pub fn weighted_cost_shares(
    records: &[HouseholdRecord],
    groups: &IncomeGroupTable,
    scenario: TtcScenario,
) -> Result<CostShareTable, ModelError> {
    let mut acc: BTreeMap<u8, (f64, f64, f64)> = BTreeMap::new();
    let mut total = (0.0, 0.0, 0.0);
    for r in records {
        let c = r.costs(groups, scenario)?;
        let w = r.sample_weight;
        let slot = acc.entry(r.income_group).or_insert((0.0, 0.0, 0.0));
        for s in [slot, &mut total] {
            s.0 += w * c.p_f;
            s.1 += w * c.p_t;
            s.2 += w;
        }
    }
    let mk = |(pf, pt, w): (f64, f64, f64)| (w > 0.0).then(|| CostShares { p_f: pf / w, p_t: pt / w });
    Ok(CostShareTable {
        overall: mk(total),
        groups: acc.into_iter().filter_map(|(g, s)| mk(s).map(|c| (g, c))).collect(),
    })
}

/// Forecast path for the overall sample or one income group from fitted
/// elasticities.
pub fn path_from_elasticities(
    set: &ElasticitySet,
    group: Option<u8>,
    use_combined: bool,
    shares: Option<&CostShareTable>,
) -> Result<ForecastPath, ForecastError> {
    let (eps_f, eps_t, eps_vmt) = match group {
        None => (set.eps_f, set.eps_t, set.eps_vmt),
        Some(g) => {
            let e = set.per_group.get(&g).ok_or_else(|| ForecastError::MissingShares(format!("elasticities for group {g}")))?;
            (e.eps_f, e.eps_t, e.eps_vmt)
        }
    };
    if use_combined {
        let eps_vmt = eps_vmt.ok_or(ForecastError::MissingElasticity("eps_vmt"))?.value;
        let shares = shares.ok_or_else(|| ForecastError::MissingShares("the combined-price path".into()))?.for_group(group)?;
        Ok(ForecastPath::M4 { eps_vmt, shares })
    } else {
        Ok(ForecastPath::M3 {
            eps_f: eps_f.ok_or(ForecastError::MissingElasticity("eps_f"))?.value,
            eps_t: eps_t.ok_or(ForecastError::MissingElasticity("eps_t"))?.value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const OVERALL: (f64, f64) = (-0.0989, -0.4007);
    const GROUP1: (f64, f64) = (-0.153, -0.290);
    const GROUP5: (f64, f64) = (-0.109, -0.474);

    fn s(x: f64, y: f64) -> Scenario {
        Scenario::new(x, y).unwrap()
    }

    #[test]
    fn no_change_no_induced_travel() {
        assert_eq!(induced_travel_m3(OVERALL.0, OVERALL.1, s(0.0, 0.0)).unwrap(), 0.0);
        let shares = CostShares::new(0.1, 0.4).unwrap();
        assert_eq!(induced_travel_m4(-0.392, shares, s(0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn extreme_scenarios() {
        let d = induced_travel_m3(OVERALL.0, OVERALL.1, s(0.2, 0.6)).unwrap();
        assert_relative_eq!(d, 1.2f64.powf(0.0989) * 0.4f64.powf(-0.4007) - 1.0, max_relative = 1e-14);
        assert!((d - 0.470).abs() < 0.005);
        let d5 = induced_travel_m3(GROUP5.0, GROUP5.1, s(0.2, 0.6)).unwrap();
        assert!((d5 - 0.575).abs() < 0.005);
    }

    #[test]
    fn y_of_one_is_a_domain_error() {
        assert!(induced_travel_m3(-0.1, -0.4, Scenario { x: 0.1, y: 1.0 }).is_err());
        assert!(Scenario::new(0.1, 1.0).is_err());
        assert!(Scenario::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn combined_price_path() {
        let shares = CostShares::new(0.10, 0.40).unwrap();
        let d = induced_travel_m4(-0.392, shares, s(0.2, 0.6)).unwrap();
        let ratio: f64 = (0.10 / 1.2 + 0.40 * 0.4) / 0.50;
        assert_relative_eq!(ratio, 0.486_666_666_666_666_7, max_relative = 1e-12);
        assert_relative_eq!(d, ratio.powf(-0.392) - 1.0, max_relative = 1e-14);
        assert!((d - 0.3262).abs() < 5e-4);
        // equal-proportion change: independent of shares
        let x = 0.25;
        let y = 1.0 - 1.0 / 1.25;
        let a = induced_travel_m4(-0.392, shares, s(x, y)).unwrap();
        let b = induced_travel_m4(-0.392, CostShares::new(0.3, 0.05).unwrap(), s(x, y)).unwrap();
        assert_relative_eq!(a, 0.8f64.powf(-0.392) - 1.0, max_relative = 1e-12);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn energy_and_backfire() {
        assert_eq!(energy_ratio(0.2, 0.2), 1.0);
        assert!(!backfire(0.2, 0.2));
        let d = induced_travel_m3(OVERALL.0, OVERALL.1, s(0.2, 0.6)).unwrap();
        assert!((energy_ratio(d, 0.2) - 1.225).abs() < 1e-3);
        assert!(backfire(d, 0.2));
        let d0 = induced_travel_m3(OVERALL.0, OVERALL.1, s(0.2, 0.0)).unwrap();
        assert!((d0 - 0.0182).abs() < 1e-4);
        assert!((energy_ratio(d0, 0.2) - 0.849).abs() < 1e-3);
        assert!(!backfire(d0, 0.2));
    }

    /// Closed-form break-even for the separate-price path under the MPG
    /// convention: (1-y*)^eps_t = (1+x)^(1+eps_f).
    fn frontier_oracle(eps_f: f64, eps_t: f64, x: f64) -> f64 {
        1.0 - (1.0 + x).powf((1.0 + eps_f) / eps_t)
    }

    #[test]
    fn frontier_matches_closed_form() {
        for (ef, et, expected) in [(OVERALL.0, OVERALL.1, 0.336), (GROUP1.0, GROUP1.1, 0.413), (GROUP5.0, GROUP5.1, 0.290)] {
            let path = ForecastPath::M3 { eps_f: ef, eps_t: et };
            let y = frontier(&path, 0.2, FuelConvention::Mpg).unwrap();
            assert_relative_eq!(y, frontier_oracle(ef, et, 0.2), epsilon = 1e-8);
            assert!((y - expected).abs() < 1e-3, "{y} vs {expected}");
            let d = path.delta(s(0.2, y), FuelConvention::Mpg).unwrap();
            assert!((d - 0.2).abs() < FRONTIER_TOLERANCE);
        }
    }

    #[test]
    fn frontier_shrinks_to_zero() {
        let path = ForecastPath::M3 { eps_f: OVERALL.0, eps_t: OVERALL.1 };
        let y = frontier(&path, 1e-6, FuelConvention::Mpg).unwrap();
        assert!(y < 1e-5);
    }

    #[test]
    fn frontier_errors() {
        // demand so elastic to fuel price that backfire happens at y = 0
        let path = ForecastPath::M3 { eps_f: -1.5, eps_t: -0.4 };
        assert!(matches!(frontier(&path, 0.2, FuelConvention::Mpg), Err(ForecastError::NoFrontier { .. })));
        let path = ForecastPath::M3 { eps_f: -0.1, eps_t: 0.2 };
        assert!(matches!(frontier(&path, 0.2, FuelConvention::Mpg), Err(ForecastError::Domain(_))));
        // combined path saturates: fuel share too large for time cuts to reach break-even
        let path = ForecastPath::M4 { eps_vmt: -0.3, shares: CostShares::new(0.9, 0.1).unwrap() };
        assert!(matches!(frontier(&path, 0.2, FuelConvention::Mpg), Err(ForecastError::FrontierUnreachable { .. })));
    }

    #[test]
    fn energy_intensity_convention() {
        let c = FuelConvention::EnergyIntensity;
        assert_relative_eq!(c.fuel_ratio(0.2), 0.8);
        assert_relative_eq!(c.break_even(0.2), 0.25, max_relative = 1e-14);
        let path = ForecastPath::M3 { eps_f: OVERALL.0, eps_t: OVERALL.1 };
        let y = frontier(&path, 0.2, c).unwrap();
        // (0.8)^eps_f (1-y)^eps_t = 1.25
        let oracle = 1.0 - (1.25 / 0.8f64.powf(OVERALL.0)).powf(1.0 / OVERALL.1);
        assert_relative_eq!(y, oracle, epsilon = 1e-8);
    }

    #[test]
    fn default_grid_shape() {
        let path = ForecastPath::M3 { eps_f: OVERALL.0, eps_t: OVERALL.1 };
        let g = sweep_grid(&path, GridRange::default(), FuelConvention::Mpg).unwrap();
        assert_eq!(g.x_values.len(), 4);
        assert_eq!(g.y_values.len(), 13);
        assert_eq!(*g.x_values.last().unwrap(), 0.2);
        assert_eq!(*g.y_values.last().unwrap(), 0.6);
        assert!((g.max_delta().unwrap() - 0.470).abs() < 0.005);
        for row in &g.delta {
            assert!(row.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn zero_elasticities() {
        let path = ForecastPath::M3 { eps_f: 0.0, eps_t: 0.0 };
        let g = sweep_grid(&path, GridRange::default(), FuelConvention::Mpg).unwrap();
        for (i, &x) in g.x_values.iter().enumerate() {
            for j in 0..g.y_values.len() {
                assert_eq!(g.delta[i][j], 0.0);
                assert_relative_eq!(g.energy_ratio[i][j], 1.0 / (1.0 + x), max_relative = 1e-15);
            }
        }
        assert!(g.frontier.iter().all(|p| p.y_star.is_none()));
    }

    #[test]
    fn grid_values_edge_cases() {
        assert_eq!(grid_values(0.0, 0.0, 0.05).unwrap(), vec![0.0]);
        assert_eq!(grid_values(0.0, 0.12, 0.05).unwrap().len(), 3);
        assert!(grid_values(0.0, 1.0, 0.0).is_err());
        assert!(grid_values(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn gge_arithmetic() {
        let r = aggregate_gge(88.85e9, 0.0, 0.0, 2.5).unwrap();
        assert_eq!(r.change, 0.0);
        let x = 0.15;
        let delta = 1.172 * (1.0 + x) - 1.0;
        let r = aggregate_gge(88.85e9, delta, x, 2.5).unwrap();
        assert_relative_eq!(r.change, 0.172 * 88.85e9, max_relative = 1e-12);
        assert!(((r.change - 15.26e9) / 15.26e9).abs() < 0.005);
        assert_relative_eq!(15.26e9 * 2.5, 38.15e9, max_relative = 1e-12);
        assert!(aggregate_gge(0.0, 0.1, 0.1, 2.5).is_err());
    }

    #[test]
    fn csv_output() {
        let path = ForecastPath::M3 { eps_f: OVERALL.0, eps_t: OVERALL.1 };
        let g = sweep_grid(&path, GridRange::default(), FuelConvention::Mpg).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 13);
        let mut buf = Vec::new();
        g.write_frontier_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_x_and_y(ef in -1.0f64..-0.01, et in -1.0f64..-0.01,
                                   x in 0.0f64..0.5, y in 0.0f64..0.9, dx in 0.001f64..0.1, dy in 0.001f64..0.09) {
                let d = induced_travel_m3(ef, et, s(x, y)).unwrap();
                prop_assert!(induced_travel_m3(ef, et, s(x + dx, y)).unwrap() > d);
                prop_assert!(induced_travel_m3(ef, et, s(x, y + dy)).unwrap() > d);
            }

            #[test]
            fn frontier_separates_backfire(ef in -0.5f64..-0.01, et in -1.0f64..-0.05, x in 0.01f64..0.3) {
                let path = ForecastPath::M3 { eps_f: ef, eps_t: et };
                let y = frontier(&path, x, FuelConvention::Mpg).unwrap();
                let d = path.delta(s(x, y), FuelConvention::Mpg).unwrap();
                prop_assert!((d - x).abs() < FRONTIER_TOLERANCE);
                if y > 1e-6 {
                    prop_assert!(!backfire(path.delta(s(x, y * 0.99), FuelConvention::Mpg).unwrap(), x));
                }
                if y < 0.99 {
                    prop_assert!(backfire(path.delta(s(x, y + 0.5 * (1.0 - y) * 0.02), FuelConvention::Mpg).unwrap(), x));
                }
            }
        }
    }
}
