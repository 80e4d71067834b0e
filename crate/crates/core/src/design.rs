//! Regression design for the four VMT demand models.
//!
//! The response is always `log(VMT)`. Models differ only in which log-price
//! columns enter:
//!
//! | model | price columns          |
//! |-------|------------------------|
//! | M1    | `log_pf`               |
//! | M2    | `log_pt`               |
//! | M3    | `log_pf`, `log_pt`     |
//! | M4    | `log_pi`               |
//!
//! With income interactions each price column is followed by its products
//! with the group indicators for groups 2 and up, so the uninteracted
//! coefficient is the group-1 elasticity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ControlValue, HouseholdRecord, IncomeGroupTable, ModelError, TtcScenario};
use crate::table::fmt_f64;

pub const INTERCEPT: &str = "intercept";
pub const LOG_PF: &str = "log_pf";
pub const LOG_PT: &str = "log_pt";
pub const LOG_PI: &str = "log_pi";

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("household {id}: {column} is not positive ({value})")]
    NonPositivePrice { id: String, column: &'static str, value: f64 },
    #[error("household {id}: cost construction failed: {source}")]
    Cost { id: String, source: ModelError },
    #[error("household {id}: non-positive VMT {value}")]
    NonPositiveVmt { id: String, value: f64 },
    #[error("household {id}: control {control} has unknown level {level:?}")]
    UnknownCategoryLevel { id: String, control: String, level: String },
    #[error("household {id}: control {control} is missing")]
    MissingControl { id: String, control: String },
    #[error("household {id}: control {control} expects a {expected} value")]
    ControlKindMismatch { id: String, control: String, expected: &'static str },
    #[error("design has no usable rows")]
    EmptyDesign,
    #[error("unknown model {0:?} (expected m1, m2, m3 or m4)")]
    UnknownModel(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4];

    /// Log-price regressors in column order.
    pub fn price_columns(self) -> &'static [&'static str] {
        match self {
            ModelId::M1 => &[LOG_PF],
            ModelId::M2 => &[LOG_PT],
            ModelId::M3 => &[LOG_PF, LOG_PT],
            ModelId::M4 => &[LOG_PI],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelId::M1 => "Model 1",
            ModelId::M2 => "Model 2",
            ModelId::M3 => "Model 3",
            ModelId::M4 => "Model 4",
        }
    }
}

impl FromStr for ModelId {
    type Err = DesignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "1" => Ok(ModelId::M1),
            "m2" | "2" => Ok(ModelId::M2),
            "m3" | "3" => Ok(ModelId::M3),
            "m4" | "4" => Ok(ModelId::M4),
            _ => Err(DesignError::UnknownModel(s.to_string())),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelId::M1 => "m1",
            ModelId::M2 => "m2",
            ModelId::M3 => "m3",
            ModelId::M4 => "m4",
        };
        f.write_str(s)
    }
}

/// Groups of household controls that can be switched on or off together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlBlock {
    /// Household size, adults, drivers, race, life cycle.
    Members,
    /// Income group indicators, home ownership, vehicle count.
    Socioeconomic,
    /// Densities, urban/rural, MSA characteristics, census division.
    Location,
    /// Survey month and day of week.
    Timing,
}

impl ControlBlock {
    pub const ALL: [ControlBlock; 4] =
        [ControlBlock::Members, ControlBlock::Socioeconomic, ControlBlock::Location, ControlBlock::Timing];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlBlock::Members => "members",
            ControlBlock::Socioeconomic => "socioeconomic",
            ControlBlock::Location => "location",
            ControlBlock::Timing => "timing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControlKind {
    /// Entered in levels.
    Numeric,
    /// One-hot with the first level as reference. An empty level list means
    /// levels are discovered from the data in sorted order.
    Categorical {
        #[serde(default)]
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub name: String,
    pub block: ControlBlock,
    #[serde(flatten)]
    pub kind: ControlKind,
}

impl ControlSpec {
    pub fn numeric(name: &str, block: ControlBlock) -> Self {
        Self { name: name.into(), block, kind: ControlKind::Numeric }
    }

    pub fn categorical(name: &str, block: ControlBlock, levels: &[&str]) -> Self {
        Self {
            name: name.into(),
            block,
            kind: ControlKind::Categorical { levels: levels.iter().map(|s| s.to_string()).collect() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelId,
    #[serde(default)]
    pub interact_income: bool,
    #[serde(default = "all_blocks")]
    pub control_blocks: BTreeSet<ControlBlock>,
    #[serde(default)]
    pub ttc_scenario: TtcScenario,
}

fn all_blocks() -> BTreeSet<ControlBlock> {
    ControlBlock::ALL.into_iter().collect()
}

impl ModelSpec {
    /// All control blocks, no interactions, base time-cost scenario.
    pub fn new(model: ModelId) -> Self {
        Self { model, interact_income: false, control_blocks: all_blocks(), ttc_scenario: TtcScenario::BASE }
    }

    pub fn interacted(mut self) -> Self {
        self.interact_income = true;
        self
    }

    pub fn without_controls(mut self) -> Self {
        self.control_blocks.clear();
        self
    }

    pub fn with_blocks(mut self, blocks: &[ControlBlock]) -> Self {
        self.control_blocks = blocks.iter().copied().collect();
        self
    }

    pub fn with_scenario(mut self, scenario: TtcScenario) -> Self {
        self.ttc_scenario = scenario;
        self
    }
}

/// Column name of the interaction between a price column and group `g`.
pub fn interaction_name(price: &str, group: u8) -> String {
    format!("{price}:group{group}")
}

pub fn group_indicator_name(group: u8) -> String {
    format!("income_group={group}")
}

/// Inputs shared by every row of a design.
#[derive(Debug, Clone)]
pub struct DesignContext<'a> {
    pub groups: &'a IncomeGroupTable,
    pub controls: &'a [ControlSpec],
}

/// Resolved encoding of the enabled control blocks: fixed column order and
/// concrete category levels.
#[derive(Debug, Clone)]
pub struct ControlEncoder {
    specs: Vec<(ControlSpec, Vec<String>)>,
    income_groups: Option<Vec<u8>>,
    names: Vec<String>,
}

impl ControlEncoder {
    /// Categorical controls without configured levels take the sorted set of
    /// values seen in `records`.
    pub fn new(
        controls: &[ControlSpec],
        blocks: &BTreeSet<ControlBlock>,
        groups: &IncomeGroupTable,
        records: &[HouseholdRecord],
    ) -> Self {
        let mut specs = Vec::new();
        let mut names = Vec::new();
        let income_groups = blocks.contains(&ControlBlock::Socioeconomic).then(|| {
            let gs: Vec<u8> = groups.groups().iter().skip(1).map(|g| g.index).collect();
            names.extend(gs.iter().map(|&g| group_indicator_name(g)));
            gs
        });
        for spec in controls.iter().filter(|c| blocks.contains(&c.block)) {
            let levels = match &spec.kind {
                ControlKind::Numeric => {
                    names.push(spec.name.clone());
                    Vec::new()
                }
                ControlKind::Categorical { levels } => {
                    let levels = if levels.is_empty() {
                        let seen: BTreeSet<&str> = records
                            .iter()
                            .filter_map(|r| match r.controls.get(&spec.name) {
                                Some(ControlValue::Category(s)) => Some(s.as_str()),
                                _ => None,
                            })
                            .collect();
                        seen.into_iter().map(String::from).collect()
                    } else {
                        levels.clone()
                    };
                    names.extend(levels.iter().skip(1).map(|l| format!("{}={}", spec.name, l)));
                    levels
                }
            };
            specs.push((spec.clone(), levels));
        }
        Self { specs, income_groups, names }
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    /// Encode one household's controls in [`Self::column_names`] order.
    pub fn encode(&self, record: &HouseholdRecord) -> Result<Vec<f64>, DesignError> {
        let mut out = Vec::with_capacity(self.names.len());
        if let Some(gs) = &self.income_groups {
            out.extend(gs.iter().map(|&g| f64::from(u8::from(record.income_group == g))));
        }
        for (spec, levels) in &self.specs {
            let value = record.controls.get(&spec.name).unwrap_or(&ControlValue::Missing);
            let missing = || DesignError::MissingControl { id: record.id.clone(), control: spec.name.clone() };
            match (&spec.kind, value) {
                (_, ControlValue::Missing) => return Err(missing()),
                (ControlKind::Numeric, ControlValue::Numeric(v)) if v.is_finite() => out.push(*v),
                (ControlKind::Numeric, ControlValue::Numeric(_)) => return Err(missing()),
                (ControlKind::Numeric, ControlValue::Category(s)) => match s.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => out.push(v),
                    _ => {
                        return Err(DesignError::ControlKindMismatch {
                            id: record.id.clone(),
                            control: spec.name.clone(),
                            expected: "numeric",
                        })
                    }
                },
                (ControlKind::Categorical { .. }, v) => {
                    let level = match v {
                        ControlValue::Category(s) => s.clone(),
                        ControlValue::Numeric(x) => format!("{x}"),
                        ControlValue::Missing => unreachable!(),
                    };
                    let pos = levels.iter().position(|l| *l == level).ok_or_else(|| {
                        DesignError::UnknownCategoryLevel {
                            id: record.id.clone(),
                            control: spec.name.clone(),
                            level: level.clone(),
                        }
                    })?;
                    out.extend((1..levels.len()).map(|k| if k == pos { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(out)
    }
}

/// Encode a single household's enabled control blocks. Returns column names
/// alongside values.
pub fn encode_controls(
    record: &HouseholdRecord,
    controls: &[ControlSpec],
    blocks: &BTreeSet<ControlBlock>,
    groups: &IncomeGroupTable,
) -> Result<Vec<(String, f64)>, DesignError> {
    let enc = ControlEncoder::new(controls, blocks, groups, std::slice::from_ref(record));
    let values = enc.encode(record)?;
    Ok(enc.names.into_iter().zip(values).collect())
}

/// Response, regressors, weights and cluster labels for one specification.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub w: DVector<f64>,
    pub clusters: Vec<String>,
    pub column_names: Vec<String>,
    pub ids: Vec<String>,
    pub income_groups: Vec<u8>,
    /// Every group index in the income-group table, lowest first.
    pub group_levels: Vec<u8>,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Dump as CSV: id, cluster, weight, y, then one column per regressor.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "id,cluster,weight,log_vmt")?;
        for c in &self.column_names {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.n() {
            write!(out, "{},{},{},{}", self.ids[i], self.clusters[i], fmt_f64(self.w[i]), fmt_f64(self.y[i]))?;
            for j in 0..self.k() {
                write!(out, ",{}", fmt_f64(self.x[(i, j)]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DesignReport {
    /// Households left out because a control was missing or unrecognised.
    pub excluded: Vec<(String, String)>,
    /// Control columns dropped for having no variation.
    pub constant_columns: Vec<String>,
}

fn price_names(spec: &ModelSpec, groups: &IncomeGroupTable) -> Vec<String> {
    let mut names = Vec::new();
    for &p in spec.model.price_columns() {
        names.push(p.to_string());
        if spec.interact_income {
            names.extend(groups.groups().iter().skip(1).map(|g| interaction_name(p, g.index)));
        }
    }
    names
}

/// Build the regression design for `spec`.
///
/// Rows with a missing or unrecognised control are excluded and listed in
/// the report; price problems are hard errors naming the household.
pub fn build_design(
    records: &[HouseholdRecord],
    spec: &ModelSpec,
    ctx: &DesignContext<'_>,
) -> Result<(DesignMatrix, DesignReport), DesignError> {
    let encoder = ControlEncoder::new(ctx.controls, &spec.control_blocks, ctx.groups, records);
    let prices = price_names(spec, ctx.groups);
    let n_price = prices.len();
    let n_ctrl = encoder.column_names().len();
    let k = 1 + n_price + n_ctrl;

    let mut report = DesignReport::default();
    let mut rows: Vec<f64> = Vec::with_capacity(records.len() * k);
    let mut y = Vec::with_capacity(records.len());
    let mut w = Vec::with_capacity(records.len());
    let mut clusters = Vec::with_capacity(records.len());
    let mut ids = Vec::with_capacity(records.len());
    let mut income_groups = Vec::with_capacity(records.len());

    let other_groups: Vec<u8> = ctx.groups.groups().iter().skip(1).map(|g| g.index).collect();

    for r in records {
        let ctrl = match encoder.encode(r) {
            Ok(v) => v,
            Err(e @ (DesignError::MissingControl { .. }
            | DesignError::UnknownCategoryLevel { .. }
            | DesignError::ControlKindMismatch { .. })) => {
                report.excluded.push((r.id.clone(), e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        if !(r.annual_vmt > 0.0) || !r.annual_vmt.is_finite() {
            return Err(DesignError::NonPositiveVmt { id: r.id.clone(), value: r.annual_vmt });
        }
        let cost = r
            .costs(ctx.groups, spec.ttc_scenario)
            .map_err(|source| DesignError::Cost { id: r.id.clone(), source })?;

        rows.push(1.0);
        for &p in spec.model.price_columns() {
            let value = match p {
                LOG_PF => cost.p_f,
                LOG_PT => cost.p_t,
                _ => cost.pi,
            };
            if !(value > 0.0) {
                return Err(DesignError::NonPositivePrice { id: r.id.clone(), column: p, value });
            }
            let logged = value.ln();
            rows.push(logged);
            if spec.interact_income {
                rows.extend(other_groups.iter().map(|&g| if r.income_group == g { logged } else { 0.0 }));
            }
        }
        rows.extend(ctrl);
        y.push(r.annual_vmt.ln());
        w.push(r.sample_weight);
        clusters.push(r.cluster_id.clone());
        ids.push(r.id.clone());
        income_groups.push(r.income_group);
    }

    let n = y.len();
    if n == 0 {
        return Err(DesignError::EmptyDesign);
    }
    let mut names = Vec::with_capacity(k);
    names.push(INTERCEPT.to_string());
    names.extend(prices);
    names.extend(encoder.column_names().iter().cloned());

    // Controls without variation are collinear with the intercept.
    let mut keep: Vec<usize> = (0..1 + n_price).collect();
    for j in 1 + n_price..k {
        let first = rows[j];
        if (1..n).all(|i| rows[i * k + j] == first) {
            report.constant_columns.push(names[j].clone());
        } else {
            keep.push(j);
        }
    }
    let x = DMatrix::from_fn(n, keep.len(), |i, c| rows[i * k + keep[c]]);
    let column_names = keep.iter().map(|&j| names[j].clone()).collect();

    Ok((
        DesignMatrix {
            y: DVector::from_vec(y),
            x,
            w: DVector::from_vec(w),
            clusters,
            column_names,
            ids,
            income_groups,
            group_levels: ctx.groups.groups().iter().map(|g| g.index).collect(),
        },
        report,
    ))
}

/// Sorted distinct cluster labels and the number of rows in each.
pub fn cluster_sizes(clusters: &[String]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for c in clusters {
        *m.entry(c.as_str()).or_insert(0) += 1;
    }
    m
}
