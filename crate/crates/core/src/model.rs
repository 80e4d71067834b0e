//! Household-level domain types and the closed-form cost and demand formulas.
//!
//! Everything here is a pure function of its arguments. The per-mile prices
//! computed here feed the regression design (`crate::design`) and the
//! synthetic generator (`crate::synthetic`).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Working hours per year used to turn annual income into an hourly wage.
pub const WORK_HOURS_PER_YEAR: f64 = 2080.0;

/// Oldest model year covered by the EPA fuel economy data.
pub const MIN_MODEL_YEAR: i32 = 1984;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("household has no driven vehicles (total VMT is zero)")]
    EmptyFleet,
    #[error("vehicle with {vmt} annual miles has invalid fuel economy {mpg}")]
    InvalidMpg { vmt: f64, mpg: f64 },
    #[error("gas price must be positive, got {0}")]
    NonPositiveGasPrice(f64),
    #[error("no recorded travel (total trip distance or duration is zero)")]
    NoTravel,
    #[error("wage must be positive, got {0}")]
    NonPositiveWage(f64),
    #[error("fuel price per mile must be positive, got {0}")]
    NonPositiveFuelPrice(f64),
    #[error("time price per mile must be non-negative and finite, got {0}")]
    InvalidTimePrice(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid income group table: {0}")]
    InvalidIncomeGroups(String),
    #[error("unknown income group {0}")]
    UnknownIncomeGroup(u8),
}

/// One of the five household income groups.
///
/// `bracket_high` is `None` for the open-ended top group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeGroup {
    pub index: u8,
    pub bracket_low: f64,
    pub bracket_high: Option<f64>,
    pub average_income: f64,
}

impl IncomeGroup {
    pub fn contains(&self, income: f64) -> bool {
        income >= self.bracket_low && self.bracket_high.map_or(true, |hi| income < hi)
    }

    /// Equivalent hourly wage: average income over 2,080 working hours.
    pub fn wage(&self) -> f64 {
        impute_wage(self)
    }
}

/// Ordered set of income groups partitioning `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<IncomeGroup>", into = "Vec<IncomeGroup>")]
pub struct IncomeGroupTable {
    groups: Vec<IncomeGroup>,
}

impl IncomeGroupTable {
    pub fn new(groups: Vec<IncomeGroup>) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidIncomeGroups(msg));
        if groups.is_empty() {
            return bad("no groups".into());
        }
        if groups[0].bracket_low != 0.0 {
            return bad(format!("first bracket starts at {}, not 0", groups[0].bracket_low));
        }
        for (pos, g) in groups.iter().enumerate() {
            if usize::from(g.index) != pos + 1 {
                return bad(format!("group at position {} has index {}", pos + 1, g.index));
            }
            if !g.average_income.is_finite() || g.average_income <= 0.0 {
                return bad(format!("group {} has non-positive average income", g.index));
            }
            if !g.contains(g.average_income) {
                return bad(format!(
                    "group {} average income {} lies outside its bracket",
                    g.index, g.average_income
                ));
            }
            let last = pos + 1 == groups.len();
            match (g.bracket_high, last) {
                (None, true) => {}
                (None, false) => return bad(format!("group {} is open-ended but not last", g.index)),
                (Some(_), true) => return bad("last group must be open-ended".into()),
                (Some(hi), false) => {
                    if hi <= g.bracket_low {
                        return bad(format!("group {} has an empty bracket", g.index));
                    }
                    if groups[pos + 1].bracket_low != hi {
                        return bad(format!("gap or overlap after group {}", g.index));
                    }
                }
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[IncomeGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, index: u8) -> Result<&IncomeGroup, ModelError> {
        index
            .checked_sub(1)
            .and_then(|i| self.groups.get(usize::from(i)))
            .ok_or(ModelError::UnknownIncomeGroup(index))
    }

    /// Group whose bracket contains `income`.
    pub fn group_for_income(&self, income: f64) -> Option<&IncomeGroup> {
        self.groups.iter().find(|g| g.contains(income))
    }
}

impl Default for IncomeGroupTable {
    /// Five groups with 2016 Consumer Expenditure Survey average incomes.
    fn default() -> Self {
        let spec = [
            (0.0, Some(25_000.0), 19_447.0),
            (25_000.0, Some(50_000.0), 40_976.0),
            (50_000.0, Some(75_000.0), 64_563.0),
            (75_000.0, Some(125_000.0), 106_173.0),
            (125_000.0, None, 180_674.0),
        ];
        let groups = spec
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi, avg))| IncomeGroup {
                index: i as u8 + 1,
                bracket_low: lo,
                bracket_high: hi,
                average_income: avg,
            })
            .collect();
        Self::new(groups).expect("default income groups are valid")
    }
}

impl TryFrom<Vec<IncomeGroup>> for IncomeGroupTable {
    type Error = ModelError;
    fn try_from(groups: Vec<IncomeGroup>) -> Result<Self, Self::Error> {
        Self::new(groups)
    }
}

impl From<IncomeGroupTable> for Vec<IncomeGroup> {
    fn from(t: IncomeGroupTable) -> Self {
        t.groups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub household_id: String,
    pub annual_vmt: f64,
    pub mpg: f64,
    pub model_year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripPurpose {
    Work,
    Nonwork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub household_id: String,
    pub purpose: TripPurpose,
    /// Hours.
    pub duration: f64,
    /// Miles.
    pub distance: f64,
}

/// A household control variable as read from the survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlValue {
    Numeric(f64),
    Category(String),
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdRecord {
    pub id: String,
    /// Miles per year.
    pub annual_vmt: f64,
    /// Hours per year.
    pub annual_drive_time: f64,
    /// USD per gallon.
    pub gas_price: f64,
    pub income_group: u8,
    pub sample_weight: f64,
    pub cluster_id: String,
    pub controls: BTreeMap<String, ControlValue>,
    pub vehicles: Vec<VehicleRecord>,
    pub trips: Vec<TripRecord>,
}

impl HouseholdRecord {
    /// Per-mile prices for this household under a time-cost scenario.
    pub fn costs(
        &self,
        groups: &IncomeGroupTable,
        scenario: TtcScenario,
    ) -> Result<CostBundle, ModelError> {
        let p_f = fuel_price_per_mile(&self.vehicles, self.gas_price)?;
        let wage = groups.get(self.income_group)?.wage();
        let p_t = time_cost_per_mile(&self.trips, wage, scenario)?;
        combined_price(p_f, p_t)
    }

    /// VMT-weighted harmonic mean fuel economy across driven vehicles.
    pub fn weighted_mpg(&self) -> Result<f64, ModelError> {
        let (miles, gallons) = fleet_totals(&self.vehicles)?;
        Ok(miles / gallons)
    }
}

/// Marginal per-mile prices: fuel, time, and their sum.
///
/// Construct through [`combined_price`]; `pi` is always `p_f + p_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBundle {
    pub p_f: f64,
    pub p_t: f64,
    pub pi: f64,
}

/// Fractions of the hourly wage assigned to work and non-work travel time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcScenario {
    pub work_fraction: f64,
    pub nonwork_fraction: f64,
}

impl TtcScenario {
    /// Work trips at the full wage, non-work trips at half.
    pub const BASE: Self = Self { work_fraction: 1.0, nonwork_fraction: 0.5 };
    /// Full wage for all trips.
    pub const FULL_WAGE: Self = Self { work_fraction: 1.0, nonwork_fraction: 1.0 };
    /// Half wage for all trips.
    pub const HALF_WAGE: Self = Self { work_fraction: 0.5, nonwork_fraction: 0.5 };

    pub fn new(work_fraction: f64, nonwork_fraction: f64) -> Result<Self, ModelError> {
        let ok = |f: f64| (0.0..=1.0).contains(&f);
        if !ok(work_fraction) || !ok(nonwork_fraction) {
            return Err(ModelError::Domain(format!(
                "scenario fractions must lie in [0, 1], got ({work_fraction}, {nonwork_fraction})"
            )));
        }
        Ok(Self { work_fraction, nonwork_fraction })
    }

    /// Parse `base`, `s1` or `s2`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "base" => Some(Self::BASE),
            "s1" | "scenario1" => Some(Self::FULL_WAGE),
            "s2" | "scenario2" => Some(Self::HALF_WAGE),
            _ => None,
        }
    }
}

impl Default for TtcScenario {
    fn default() -> Self {
        Self::BASE
    }
}

impl fmt::Display for TtcScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "work {:.0}% / non-work {:.0}% of wage", self.work_fraction * 100.0, self.nonwork_fraction * 100.0)
    }
}

fn fleet_totals(vehicles: &[VehicleRecord]) -> Result<(f64, f64), ModelError> {
    let mut miles = 0.0;
    let mut gallons = 0.0;
    for v in vehicles.iter().filter(|v| v.annual_vmt > 0.0) {
        if !(v.mpg > 0.0) || !v.mpg.is_finite() {
            return Err(ModelError::InvalidMpg { vmt: v.annual_vmt, mpg: v.mpg });
        }
        miles += v.annual_vmt;
        gallons += v.annual_vmt / v.mpg;
    }
    if miles <= 0.0 {
        return Err(ModelError::EmptyFleet);
    }
    Ok((miles, gallons))
}

/// Fuel cost per mile: gas price times gallons per mile across the fleet,
/// with each vehicle weighted by its share of household VMT.
pub fn fuel_price_per_mile(vehicles: &[VehicleRecord], gas_price: f64) -> Result<f64, ModelError> {
    if !(gas_price > 0.0) || !gas_price.is_finite() {
        return Err(ModelError::NonPositiveGasPrice(gas_price));
    }
    let (miles, gallons) = fleet_totals(vehicles)?;
    Ok(gas_price * gallons / miles)
}

/// Equivalent hourly wage of an income group.
pub fn impute_wage(group: &IncomeGroup) -> f64 {
    group.average_income / WORK_HOURS_PER_YEAR
}

/// Sums of (work hours, non-work hours, miles) over a trip log.
fn trip_totals(trips: &[TripRecord]) -> (f64, f64, f64) {
    trips.iter().fold((0.0, 0.0, 0.0), |(w, nw, d), t| match t.purpose {
        TripPurpose::Work => (w + t.duration, nw, d + t.distance),
        TripPurpose::Nonwork => (w, nw + t.duration, d + t.distance),
    })
}

fn wage_share(work_hours: f64, nonwork_hours: f64, scenario: TtcScenario) -> f64 {
    let total = work_hours + nonwork_hours;
    scenario.work_fraction * (work_hours / total) + scenario.nonwork_fraction * (nonwork_hours / total)
}

/// Travel time cost per mile: the purpose-weighted value of an hour of
/// travel times hours per mile.
pub fn time_cost_per_mile(
    trips: &[TripRecord],
    wage: f64,
    scenario: TtcScenario,
) -> Result<f64, ModelError> {
    if !(wage > 0.0) || !wage.is_finite() {
        return Err(ModelError::NonPositiveWage(wage));
    }
    let (work, nonwork, miles) = trip_totals(trips);
    let hours = work + nonwork;
    if !(hours > 0.0) || !(miles > 0.0) {
        return Err(ModelError::NoTravel);
    }
    Ok(wage_share(work, nonwork, scenario) * wage * hours / miles)
}

/// Travel time cost per hour of driving.
pub fn time_cost_per_hour(
    trips: &[TripRecord],
    wage: f64,
    scenario: TtcScenario,
) -> Result<f64, ModelError> {
    if !(wage > 0.0) || !wage.is_finite() {
        return Err(ModelError::NonPositiveWage(wage));
    }
    let (work, nonwork, _) = trip_totals(trips);
    if !(work + nonwork > 0.0) {
        return Err(ModelError::NoTravel);
    }
    Ok(wage_share(work, nonwork, scenario) * wage)
}

pub fn combined_price(p_f: f64, p_t: f64) -> Result<CostBundle, ModelError> {
    if !(p_f > 0.0) || !p_f.is_finite() {
        return Err(ModelError::NonPositiveFuelPrice(p_f));
    }
    if !(p_t >= 0.0) || !p_t.is_finite() {
        return Err(ModelError::InvalidTimePrice(p_t));
    }
    Ok(CostBundle { p_f, p_t, pi: p_f + p_t })
}

/// Parameters of the constant-elasticity household demand model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    /// Utility curvature, strictly negative.
    pub alpha: f64,
    /// Vehicle quality, strictly positive.
    pub xi: f64,
    /// Hours of time input per unit of the numeraire good.
    #[serde(default)]
    pub t_y: f64,
}

impl StructuralParams {
    /// Price elasticity implied by the utility curvature, `-1 / (1 - alpha)`.
    pub fn elasticity(&self) -> f64 {
        -1.0 / (1.0 - self.alpha)
    }
}

/// Utility-maximizing annual VMT for a household facing combined price `pi`.
///
/// ```
/// use vmt_rebound::model::structural_vmt;
/// let base = structural_vmt(-1.0, 1.0, 0.0, 20.0, 1.0).unwrap();
/// let dear = structural_vmt(-1.0, 1.0, 0.0, 20.0, 4.0).unwrap();
/// assert!((dear / base - 0.5).abs() < 1e-12);
/// ```
pub fn structural_vmt(alpha: f64, xi: f64, t_y: f64, wage: f64, pi: f64) -> Result<f64, ModelError> {
    if !(alpha < 0.0) || !alpha.is_finite() {
        return Err(ModelError::Domain(format!("alpha must be negative, got {alpha}")));
    }
    if !(xi > 0.0) {
        return Err(ModelError::Domain(format!("vehicle quality must be positive, got {xi}")));
    }
    if !(pi > 0.0) {
        return Err(ModelError::Domain(format!("combined price must be positive, got {pi}")));
    }
    let time_term = 1.0 + t_y * wage;
    if !(time_term > 0.0) {
        return Err(ModelError::Domain(format!("1 + t_y * wage must be positive, got {time_term}")));
    }
    let inv = 1.0 / (1.0 - alpha);
    let log_vmt = inv * (-alpha).ln() + alpha * inv * xi.ln() + inv * time_term.ln() - inv * pi.ln();
    Ok(log_vmt.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn veh(vmt: f64, mpg: f64) -> VehicleRecord {
        VehicleRecord { household_id: "h".into(), annual_vmt: vmt, mpg, model_year: 2015 }
    }

    fn trip(purpose: TripPurpose, duration: f64, distance: f64) -> TripRecord {
        TripRecord { household_id: "h".into(), purpose, duration, distance }
    }

    fn mixed_trips() -> Vec<TripRecord> {
        // work share 0.3 of 100 hours, 3000 miles
        vec![
            trip(TripPurpose::Work, 30.0, 1000.0),
            trip(TripPurpose::Nonwork, 70.0, 2000.0),
        ]
    }

    #[test]
    fn fuel_price_single_vehicle() {
        let p = fuel_price_per_mile(&[veh(12_000.0, 24.0)], 2.40).unwrap();
        assert_relative_eq!(p, 0.10, max_relative = 1e-14);
    }

    #[test]
    fn fuel_price_two_vehicles() {
        let p = fuel_price_per_mile(&[veh(10_000.0, 20.0), veh(5_000.0, 30.0)], 3.0).unwrap();
        let expected = 3.0 * (10_000.0 / 20.0 + 5_000.0 / 30.0) / 15_000.0;
        assert_relative_eq!(p, expected, max_relative = 1e-14);
        assert_relative_eq!(p, 0.133_333_333_333, max_relative = 1e-10);
    }

    #[test]
    fn fuel_price_national_average() {
        let p = fuel_price_per_mile(&[veh(16_254.0, 23.69)], 2.392).unwrap();
        assert!((p - 0.10097).abs() < 5e-6);
    }

    #[test]
    fn fuel_price_ignores_undriven_vehicles() {
        let p = fuel_price_per_mile(&[veh(12_000.0, 24.0), veh(0.0, 0.0)], 2.40).unwrap();
        assert_relative_eq!(p, 0.10, max_relative = 1e-14);
    }

    #[test]
    fn fuel_price_errors() {
        assert_eq!(fuel_price_per_mile(&[], 2.0), Err(ModelError::EmptyFleet));
        assert_eq!(fuel_price_per_mile(&[veh(0.0, 20.0)], 2.0), Err(ModelError::EmptyFleet));
        assert!(matches!(
            fuel_price_per_mile(&[veh(100.0, 0.0)], 2.0),
            Err(ModelError::InvalidMpg { .. })
        ));
        assert!(matches!(
            fuel_price_per_mile(&[veh(100.0, 20.0)], 0.0),
            Err(ModelError::NonPositiveGasPrice(_))
        ));
    }

    #[test]
    fn wages_from_group_incomes() {
        let t = IncomeGroupTable::default();
        assert_relative_eq!(t.get(5).unwrap().wage(), 180_674.0 / 2080.0);
        assert!((t.get(5).unwrap().wage() - 86.8625).abs() < 1e-4);
        assert!((t.get(1).unwrap().wage() - 9.3495).abs() < 1e-4);
        let unit = IncomeGroup { index: 1, bracket_low: 0.0, bracket_high: None, average_income: 2080.0 };
        assert_eq!(impute_wage(&unit), 1.0);
    }

    #[test]
    fn time_cost_all_work() {
        let trips = vec![trip(TripPurpose::Work, 60.0, 1500.0), trip(TripPurpose::Work, 40.0, 500.0)];
        let p = time_cost_per_mile(&trips, 20.0, TtcScenario::BASE).unwrap();
        assert_relative_eq!(p, 1.0, max_relative = 1e-14);
        assert_relative_eq!(time_cost_per_hour(&trips, 20.0, TtcScenario::BASE).unwrap(), 20.0);
    }

    #[test]
    fn time_cost_mixed_purposes() {
        let trips = mixed_trips();
        let base = time_cost_per_mile(&trips, 20.0, TtcScenario::BASE).unwrap();
        assert_relative_eq!(base, (0.3 * 20.0 + 0.5 * 0.7 * 20.0) * 100.0 / 3000.0, max_relative = 1e-14);
        assert!((base - 0.43333).abs() < 1e-5);
        let half = time_cost_per_mile(&trips, 20.0, TtcScenario::HALF_WAGE).unwrap();
        assert!((half - 0.33333).abs() < 1e-5);
        let hourly = time_cost_per_hour(&trips, 20.0, TtcScenario::BASE).unwrap();
        assert_relative_eq!(hourly, 13.0, max_relative = 1e-14);
    }

    #[test]
    fn time_cost_requires_travel() {
        assert_eq!(time_cost_per_mile(&[], 20.0, TtcScenario::BASE), Err(ModelError::NoTravel));
        let no_distance = vec![trip(TripPurpose::Work, 1.0, 0.0)];
        assert_eq!(time_cost_per_mile(&no_distance, 20.0, TtcScenario::BASE), Err(ModelError::NoTravel));
        let no_time = vec![trip(TripPurpose::Work, 0.0, 10.0)];
        assert_eq!(time_cost_per_mile(&no_time, 20.0, TtcScenario::BASE), Err(ModelError::NoTravel));
        assert_eq!(time_cost_per_hour(&no_time, 20.0, TtcScenario::BASE), Err(ModelError::NoTravel));
    }

    #[test]
    fn combined_price_is_additive() {
        assert_eq!(combined_price(0.10, 0.40).unwrap().pi, 0.10 + 0.40);
        assert_eq!(combined_price(0.13, 0.0).unwrap().pi, 0.13);
        assert_relative_eq!(combined_price(0.101, 0.433).unwrap().pi, 0.534, max_relative = 1e-14);
        assert!(matches!(combined_price(0.0, 0.4), Err(ModelError::NonPositiveFuelPrice(_))));
        assert!(matches!(combined_price(0.1, -0.1), Err(ModelError::InvalidTimePrice(_))));
    }

    #[test]
    fn structural_vmt_examples() {
        assert_relative_eq!(structural_vmt(-1.0, 1.0, 0.0, 30.0, 1.0).unwrap(), 1.0, max_relative = 1e-15);
        let one = structural_vmt(-1.0, 1.0, 0.0, 30.0, 1.0).unwrap();
        let four = structural_vmt(-1.0, 1.0, 0.0, 30.0, 4.0).unwrap();
        assert_relative_eq!(four / one, 0.5, max_relative = 1e-14);
        let q2 = structural_vmt(-1.0, 2.0, 0.0, 30.0, 1.0).unwrap();
        assert_relative_eq!(q2 / one, 2f64.powf(-0.5), max_relative = 1e-14);
        assert!(structural_vmt(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(structural_vmt(-1.0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert_eq!(StructuralParams { alpha: -1.0, xi: 1.0, t_y: 0.0 }.elasticity(), -0.5);
    }

    #[test]
    fn default_groups_partition_income() {
        let t = IncomeGroupTable::default();
        assert_eq!(t.len(), 5);
        assert_eq!(t.group_for_income(0.0).unwrap().index, 1);
        assert_eq!(t.group_for_income(24_999.0).unwrap().index, 1);
        assert_eq!(t.group_for_income(25_000.0).unwrap().index, 2);
        assert_eq!(t.group_for_income(1e9).unwrap().index, 5);
        assert!(t.get(6).is_err());
        assert!(t.get(0).is_err());
    }

    #[test]
    fn invalid_group_tables_rejected() {
        let mut g: Vec<IncomeGroup> = IncomeGroupTable::default().into();
        g[2].bracket_low = 51_000.0;
        assert!(IncomeGroupTable::new(g).is_err());
        let mut g: Vec<IncomeGroup> = IncomeGroupTable::default().into();
        g[0].average_income = 30_000.0;
        assert!(IncomeGroupTable::new(g).is_err());
        let mut g: Vec<IncomeGroup> = IncomeGroupTable::default().into();
        g[4].bracket_high = Some(1e6);
        assert!(IncomeGroupTable::new(g).is_err());
    }

    #[test]
    fn scenario_names() {
        assert_eq!(TtcScenario::from_name("base"), Some(TtcScenario::BASE));
        assert_eq!(TtcScenario::from_name("S1"), Some(TtcScenario::FULL_WAGE));
        assert_eq!(TtcScenario::from_name("s2"), Some(TtcScenario::HALF_WAGE));
        assert_eq!(TtcScenario::from_name("s3"), None);
        assert!(TtcScenario::new(1.2, 0.5).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn fleet() -> impl Strategy<Value = Vec<VehicleRecord>> {
            prop::collection::vec((1.0f64..50_000.0, 5.0f64..120.0), 1..6)
                .prop_map(|v| v.into_iter().map(|(vmt, mpg)| veh(vmt, mpg)).collect())
        }

        fn trip_log() -> impl Strategy<Value = Vec<TripRecord>> {
            prop::collection::vec((any::<bool>(), 0.01f64..5.0, 0.1f64..200.0), 1..12).prop_map(|v| {
                v.into_iter()
                    .map(|(w, h, d)| {
                        trip(if w { TripPurpose::Work } else { TripPurpose::Nonwork }, h, d)
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn fuel_price_within_fleet_bounds(vehicles in fleet(), gas in 1.0f64..6.0) {
                let p = fuel_price_per_mile(&vehicles, gas).unwrap();
                let max_mpg = vehicles.iter().map(|v| v.mpg).fold(f64::MIN, f64::max);
                let min_mpg = vehicles.iter().map(|v| v.mpg).fold(f64::MAX, f64::min);
                prop_assert!(p >= gas / max_mpg * (1.0 - 1e-12));
                prop_assert!(p <= gas / min_mpg * (1.0 + 1e-12));
            }

            #[test]
            fn per_mile_and_per_hour_agree(trips in trip_log(), wage in 1.0f64..100.0,
                                           fw in 0.0f64..=1.0, fnw in 0.0f64..=1.0) {
                let s = TtcScenario::new(fw, fnw).unwrap();
                let per_mile = time_cost_per_mile(&trips, wage, s).unwrap();
                let per_hour = time_cost_per_hour(&trips, wage, s).unwrap();
                let hours: f64 = trips.iter().map(|t| t.duration).sum();
                let miles: f64 = trips.iter().map(|t| t.distance).sum();
                let lhs = per_mile * miles;
                let rhs = per_hour * hours;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
            }

            #[test]
            fn scenario_ordering(trips in trip_log(), wage in 1.0f64..100.0) {
                let s1 = time_cost_per_mile(&trips, wage, TtcScenario::FULL_WAGE).unwrap();
                let base = time_cost_per_mile(&trips, wage, TtcScenario::BASE).unwrap();
                let s2 = time_cost_per_mile(&trips, wage, TtcScenario::HALF_WAGE).unwrap();
                let has_nonwork = trips.iter().any(|t| t.purpose == TripPurpose::Nonwork && t.duration > 0.0);
                prop_assert!(base >= s2);
                if has_nonwork {
                    prop_assert!(s1 > base);
                } else {
                    prop_assert!((s1 - base).abs() <= 1e-12 * s1);
                }
            }

            #[test]
            fn structural_log_linear_in_price(alpha in -10.0f64..-0.01, xi in 0.1f64..10.0,
                                              p1 in 0.01f64..5.0, p2 in 0.01f64..5.0) {
                prop_assume!((p1.ln() - p2.ln()).abs() > 0.1);
                let v1 = structural_vmt(alpha, xi, 0.0, 20.0, p1).unwrap();
                let v2 = structural_vmt(alpha, xi, 0.0, 20.0, p2).unwrap();
                let slope = (v1.ln() - v2.ln()) / (p1.ln() - p2.ln());
                let expected = -1.0 / (1.0 - alpha);
                prop_assert!((slope - expected).abs() <= 1e-12);
            }

            #[test]
            fn bundle_sum_exact(pf in 1e-4f64..10.0, pt in 0.0f64..10.0) {
                let b = combined_price(pf, pt).unwrap();
                prop_assert_eq!(b.pi.to_bits(), (pf + pt).to_bits());
            }
        }
    }
}
