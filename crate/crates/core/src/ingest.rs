//! Survey ingestion: household, vehicle and trip tables plus an EPA fuel
//! economy table, joined and filtered into [`HouseholdRecord`]s.
//!
//! Column names come from a [`SchemaConfig`]; its `Default` follows the 2017
//! NHTS public-use files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{ControlBlock, ControlKind, ControlSpec};
use crate::model::{
    ControlValue, HouseholdRecord, IncomeGroupTable, TripPurpose, TripRecord, VehicleRecord, MIN_MODEL_YEAR,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("{table} table is missing column {column:?}")]
    MissingColumn { table: &'static str, column: String },
    #[error("{table} table: {malformed} of {total} rows malformed, above the {limit} threshold")]
    TooManyMalformed { table: &'static str, malformed: usize, total: usize, limit: f64 },
    #[error("unknown income bracket code {0:?}")]
    UnknownBracketCode(String),
    #[error("income bracket {code:?} does not fall inside a single income group")]
    BracketStraddlesGroups { code: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A row that could not be parsed; collected rather than fatal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub table: &'static str,
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdColumns {
    pub id: String,
    pub income_bracket: String,
    pub weight: String,
    pub gas_price: String,
    /// USD per unit of the recorded gas price (0.01 for cents per gallon).
    #[serde(default = "unit_scale")]
    pub gas_price_scale: f64,
    pub msa: String,
    pub state: String,
    /// MSA values meaning "not in an MSA or suppressed".
    pub msa_missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleColumns {
    pub household_id: String,
    pub annual_vmt: String,
    pub make: String,
    pub model: String,
    pub model_year: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationUnit {
    Minutes,
    Hours,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub keep: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripColumns {
    pub household_id: String,
    pub purpose: String,
    /// Purpose codes classified as work-related; everything else is non-work.
    pub work_purposes: Vec<String>,
    pub duration: String,
    pub duration_unit: DurationUnit,
    pub distance: String,
    /// Optional restriction to, e.g., trips driven in a household vehicle.
    #[serde(default)]
    pub filter: Option<RowFilter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpaColumns {
    pub make: String,
    pub model: String,
    pub year: String,
    /// Precomputed combined MPG; when absent, city and highway are blended.
    #[serde(default)]
    pub combined: Option<String>,
    pub city: String,
    pub highway: String,
}

/// How a household control is read from the household table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlColumn {
    pub column: String,
    #[serde(flatten)]
    pub spec: ControlSpec,
    /// Raw values treated as missing.
    #[serde(default)]
    pub missing: Vec<String>,
    #[serde(default)]
    pub transform: Option<ControlTransform>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlTransform {
    /// `YYYYMM` to month number `1`..`12`.
    MonthOfYyyymm,
}

/// One survey income bracket; `high` is `None` for the open top bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketCode {
    pub code: String,
    pub low: f64,
    pub high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub households: HouseholdColumns,
    pub vehicles: VehicleColumns,
    pub trips: TripColumns,
    pub epa: EpaColumns,
    pub controls: Vec<ControlColumn>,
    pub income_brackets: Vec<BracketCode>,
    pub unreported_income: Vec<String>,
    /// Parsing aborts when a table has more than this fraction of bad rows.
    pub max_malformed_fraction: f64,
}

fn unit_scale() -> f64 {
    1.0
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for SchemaConfig {
    fn default() -> Self {
        use ControlBlock::*;
        let nhts_missing = strings(&["-1", "-7", "-8", "-9", ""]);
        let num = |column: &str, block| ControlColumn {
            column: column.into(),
            spec: ControlSpec::numeric(&column.to_ascii_lowercase(), block),
            missing: nhts_missing.clone(),
            transform: None,
        };
        let cat = |column: &str, block, levels: &[&str]| ControlColumn {
            column: column.into(),
            spec: ControlSpec::categorical(&column.to_ascii_lowercase(), block, levels),
            missing: nhts_missing.clone(),
            transform: None,
        };
        let cat_n = |column: &str, block, n: usize| {
            let levels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
            let levels: Vec<&str> = levels.iter().map(String::as_str).collect();
            cat(column, block, &levels)
        };

        let mut month = cat_n("TDAYDATE", Timing, 12);
        month.spec.name = "survey_month".into();
        month.transform = Some(ControlTransform::MonthOfYyyymm);

        let brackets = [
            (0.0, Some(10_000.0)),
            (10_000.0, Some(15_000.0)),
            (15_000.0, Some(25_000.0)),
            (25_000.0, Some(35_000.0)),
            (35_000.0, Some(50_000.0)),
            (50_000.0, Some(75_000.0)),
            (75_000.0, Some(100_000.0)),
            (100_000.0, Some(125_000.0)),
            (125_000.0, Some(150_000.0)),
            (150_000.0, Some(200_000.0)),
            (200_000.0, None),
        ];

        Self {
            households: HouseholdColumns {
                id: "HOUSEID".into(),
                income_bracket: "HHFAMINC".into(),
                weight: "WTHHFIN".into(),
                gas_price: "GASPRICE".into(),
                gas_price_scale: 0.01,
                msa: "HH_CBSA".into(),
                state: "HHSTATE".into(),
                msa_missing: strings(&["XXXXX", "-1", "-9", ""]),
            },
            vehicles: VehicleColumns {
                household_id: "HOUSEID".into(),
                annual_vmt: "BESTMILE".into(),
                make: "MAKE".into(),
                model: "MODEL".into(),
                model_year: "VEHYEAR".into(),
            },
            trips: TripColumns {
                household_id: "HOUSEID".into(),
                purpose: "WHYTRP1S".into(),
                work_purposes: strings(&["10"]),
                duration: "TRVLCMIN".into(),
                duration_unit: DurationUnit::Minutes,
                distance: "TRPMILES".into(),
                filter: Some(RowFilter { column: "DRVR_FLG".into(), keep: strings(&["1", "01"]) }),
            },
            epa: EpaColumns {
                make: "make".into(),
                model: "model".into(),
                year: "year".into(),
                combined: None,
                city: "city08".into(),
                highway: "highway08".into(),
            },
            controls: vec![
                num("HHSIZE", Members),
                num("NUMADLT", Members),
                num("DRVRCNT", Members),
                cat("HH_RACE", Members, &["1", "2", "3", "4", "5", "6", "97"]),
                cat_n("LIF_CYC", Members, 10),
                cat("HOMEOWN", Socioeconomic, &["1", "2", "97"]),
                num("HHVEHCNT", Socioeconomic),
                num("HBPPOPDN", Location),
                num("HBHUDN", Location),
                cat_n("URBRUR", Location, 2),
                cat_n("MSACAT", Location, 4),
                cat_n("MSASIZE", Location, 6),
                cat_n("CENSUS_D", Location, 9),
                cat_n("RAIL", Location, 2),
                month,
                cat_n("TRAVDAY", Timing, 7),
            ],
            income_brackets: brackets
                .iter()
                .enumerate()
                .map(|(i, &(low, high))| BracketCode { code: (i + 1).to_string(), low, high })
                .collect(),
            unreported_income: strings(&["-7", "-8", "-9"]),
            max_malformed_fraction: 0.01,
        }
    }
}

impl SchemaConfig {
    /// Control specs in configured column order.
    pub fn control_specs(&self) -> Vec<ControlSpec> {
        self.controls.iter().map(|c| c.spec.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawHousehold {
    pub id: String,
    pub income_code: String,
    pub weight: f64,
    pub gas_price: f64,
    pub cluster_id: String,
    pub controls: BTreeMap<String, ControlValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawVehicle {
    pub household_id: String,
    pub annual_vmt: f64,
    pub make: String,
    pub model: String,
    pub model_year: i32,
    /// Filled by [`join_epa_mpg`].
    pub mpg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpaEntry {
    pub make: String,
    pub model: String,
    pub year: i32,
    pub combined_mpg: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RawTables {
    pub households: Vec<RawHousehold>,
    pub vehicles: Vec<RawVehicle>,
    pub trips: Vec<TripRecord>,
    pub epa: Vec<EpaEntry>,
    pub errors: Vec<RowError>,
    /// Vehicle and trip rows whose household id is not in the household table.
    pub orphan_vehicles: usize,
    pub orphan_trips: usize,
    pub duplicate_households: usize,
}

#[derive(Debug, Clone)]
pub struct TablePaths {
    pub households: PathBuf,
    pub vehicles: PathBuf,
    pub trips: PathBuf,
    pub epa: PathBuf,
}

/// Combined fuel economy from city and highway ratings (45% city, 55% highway).
pub fn combined_mpg(city: f64, highway: f64) -> f64 {
    0.45 * city + 0.55 * highway
}

struct Columns<'a> {
    table: &'static str,
    headers: &'a csv::StringRecord,
}

impl Columns<'_> {
    fn find(&self, name: &str) -> Result<usize, IngestError> {
        self.headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn { table: self.table, column: name.to_string() })
    }
}

fn field<'r>(row: &'r csv::StringRecord, i: usize) -> &'r str {
    row.get(i).unwrap_or("").trim()
}

fn parse_num(row: &csv::StringRecord, i: usize, what: &str) -> Result<f64, String> {
    let raw = field(row, i);
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("{what}: {raw:?} is not a number"))
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
        _ => IngestError::Io(e),
    })
}

/// Read a table, collecting row-level failures; aborts on missing columns or
/// when too many rows are malformed.
fn read_table<R: Read, C, T>(
    input: R,
    table: &'static str,
    max_bad: f64,
    errors: &mut Vec<RowError>,
    setup: impl FnOnce(&Columns<'_>) -> Result<C, IngestError>,
    parse_row: impl Fn(&C, &csv::StringRecord) -> Result<Option<T>, String>,
) -> Result<Vec<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let idx = setup(&Columns { table, headers: &headers })?;
    let mut out = Vec::new();
    let mut total = 0usize;
    let mut bad = 0usize;
    for row in rdr.records() {
        total += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                bad += 1;
                let line = e.position().map_or(0, |p| p.line());
                errors.push(RowError { table, line, message: e.to_string() });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&idx, &row) {
            Ok(Some(v)) => out.push(v),
            Ok(None) => {}
            Err(message) => {
                bad += 1;
                errors.push(RowError { table, line, message });
            }
        }
    }
    if total > 0 && bad as f64 > max_bad * total as f64 {
        return Err(IngestError::TooManyMalformed { table, malformed: bad, total, limit: max_bad });
    }
    if bad > 0 {
        warn!("{table}: skipped {bad} malformed rows of {total}");
    }
    Ok(out)
}

fn normalize_key(s: &str) -> String {
    s.trim().to_ascii_uppercase()
}

fn month_of_yyyymm(raw: &str) -> Option<String> {
    let v: u32 = raw.parse().ok()?;
    let m = v % 100;
    (1..=12).contains(&m).then(|| m.to_string())
}

/// Typed tables from four CSV sources.
pub fn parse_readers<H: Read, V: Read, T: Read, E: Read>(
    households: H,
    vehicles: V,
    trips: T,
    epa: E,
    schema: &SchemaConfig,
) -> Result<RawTables, IngestError> {
    let mut errors = Vec::new();
    let max_bad = schema.max_malformed_fraction;

    let hc = &schema.households;
    let hh = read_table(
        households,
        "households",
        max_bad,
        &mut errors,
        |cols| {
            let mut hidx = [0usize; 6];
            for (slot, name) in hidx.iter_mut().zip([&hc.id, &hc.income_bracket, &hc.weight, &hc.gas_price, &hc.msa, &hc.state]) {
                *slot = cols.find(name)?;
            }
            let ctl_idx: Vec<usize> = schema.controls.iter().map(|c| cols.find(&c.column)).collect::<Result<_, _>>()?;
            Ok((hidx, ctl_idx))
        },
        |(hidx, ctl_idx), row| {
            let id = field(row, hidx[0]).to_string();
            if id.is_empty() {
                return Err("empty household id".into());
            }
            let weight = parse_num(row, hidx[2], &hc.weight)?;
            let gas_price = parse_num(row, hidx[3], &hc.gas_price)? * hc.gas_price_scale;
            let msa = field(row, hidx[4]);
            let cluster_id = if hc.msa_missing.iter().any(|m| m == msa) {
                format!("state:{}", field(row, hidx[5]))
            } else {
                format!("msa:{msa}")
            };
            let mut controls = BTreeMap::new();
            for (c, &i) in schema.controls.iter().zip(ctl_idx) {
                let raw = field(row, i);
                let value = if c.missing.iter().any(|m| m == raw) {
                    ControlValue::Missing
                } else {
                    let raw = match c.transform {
                        Some(ControlTransform::MonthOfYyyymm) => match month_of_yyyymm(raw) {
                            Some(m) => m,
                            None => return Err(format!("{}: {raw:?} is not YYYYMM", c.column)),
                        },
                        None => raw.to_string(),
                    };
                    match c.spec.kind {
                        ControlKind::Numeric => match raw.parse::<f64>() {
                            Ok(v) if v.is_finite() => ControlValue::Numeric(v),
                            _ => return Err(format!("{}: {raw:?} is not a number", c.column)),
                        },
                        ControlKind::Categorical { .. } => ControlValue::Category(raw),
                    }
                };
                controls.insert(c.spec.name.clone(), value);
            }
            Ok(Some(RawHousehold {
                id,
                income_code: field(row, hidx[1]).to_string(),
                weight,
                gas_price,
                cluster_id,
                controls,
            }))
        },
    )?;

    let vc = &schema.vehicles;
    let veh = read_table(
        vehicles,
        "vehicles",
        max_bad,
        &mut errors,
        |cols| {
            let mut vidx = [0usize; 5];
            for (slot, name) in vidx.iter_mut().zip([&vc.household_id, &vc.annual_vmt, &vc.make, &vc.model, &vc.model_year]) {
                *slot = cols.find(name)?;
            }
            Ok(vidx)
        },
        |vidx, row| {
            let annual_vmt = parse_num(row, vidx[1], &vc.annual_vmt)?;
            if annual_vmt < 0.0 {
                return Err(format!("{}: negative annual VMT {annual_vmt}", vc.annual_vmt));
            }
            let year_raw = field(row, vidx[4]);
            let model_year = year_raw.parse::<i32>().map_err(|_| format!("{}: {year_raw:?} is not a year", vc.model_year))?;
            Ok(Some(RawVehicle {
                household_id: field(row, vidx[0]).to_string(),
                annual_vmt,
                make: field(row, vidx[2]).to_string(),
                model: field(row, vidx[3]).to_string(),
                model_year,
                mpg: None,
            }))
        },
    )?;

    let tc = &schema.trips;
    let scale = match tc.duration_unit {
        DurationUnit::Minutes => 1.0 / 60.0,
        DurationUnit::Hours => 1.0,
    };
    let trp = read_table(
        trips,
        "trips",
        max_bad,
        &mut errors,
        |cols| {
            let mut tidx = [0usize; 4];
            for (slot, name) in tidx.iter_mut().zip([&tc.household_id, &tc.purpose, &tc.duration, &tc.distance]) {
                *slot = cols.find(name)?;
            }
            let filter_idx = match &tc.filter {
                Some(f) => Some(cols.find(&f.column)?),
                None => None,
            };
            Ok((tidx, filter_idx))
        },
        |(tidx, filter_idx), row| {
            if let (Some(i), Some(f)) = (*filter_idx, &tc.filter) {
                if !f.keep.iter().any(|k| k == field(row, i)) {
                    return Ok(None);
                }
            }
            let duration = parse_num(row, tidx[2], &tc.duration)?;
            let distance = parse_num(row, tidx[3], &tc.distance)?;
            if duration < 0.0 || distance < 0.0 {
                return Err(format!("negative trip duration or distance ({duration}, {distance})"));
            }
            let purpose = if tc.work_purposes.iter().any(|p| p == field(row, tidx[1])) {
                TripPurpose::Work
            } else {
                TripPurpose::Nonwork
            };
            Ok(Some(TripRecord {
                household_id: field(row, tidx[0]).to_string(),
                purpose,
                duration: duration * scale,
                distance,
            }))
        },
    )?;

    let ec = &schema.epa;
    let epa_rows = read_table(
        epa,
        "epa",
        max_bad,
        &mut errors,
        |cols| {
            let mut eidx = [0usize; 5];
            eidx[0] = cols.find(&ec.make)?;
            eidx[1] = cols.find(&ec.model)?;
            eidx[2] = cols.find(&ec.year)?;
            match &ec.combined {
                Some(c) => eidx[3] = cols.find(c)?,
                None => {
                    eidx[3] = cols.find(&ec.city)?;
                    eidx[4] = cols.find(&ec.highway)?;
                }
            }
            Ok(eidx)
        },
        |eidx, row| {
            let year_raw = field(row, eidx[2]);
            let year = year_raw.parse::<i32>().map_err(|_| format!("{}: {year_raw:?} is not a year", ec.year))?;
            let combined = match &ec.combined {
                Some(c) => parse_num(row, eidx[3], c)?,
                None => combined_mpg(parse_num(row, eidx[3], &ec.city)?, parse_num(row, eidx[4], &ec.highway)?),
            };
            if !(combined > 0.0) {
                return Err(format!("non-positive combined MPG {combined}"));
            }
            Ok(Some(EpaEntry {
                make: normalize_key(field(row, eidx[0])),
                model: normalize_key(field(row, eidx[1])),
                year,
                combined_mpg: combined,
            }))
        },
    )?;

    let mut seen = BTreeSet::new();
    let mut households = Vec::with_capacity(hh.len());
    let mut duplicate_households = 0;
    for h in hh {
        if seen.insert(h.id.clone()) {
            households.push(h);
        } else {
            duplicate_households += 1;
            errors.push(RowError { table: "households", line: 0, message: format!("duplicate household id {}", h.id) });
        }
    }
    let (vehicles, orphan_v): (Vec<_>, Vec<_>) = veh.into_iter().partition(|v| seen.contains(&v.household_id));
    let (trips, orphan_t): (Vec<_>, Vec<_>) = trp.into_iter().partition(|t| seen.contains(&t.household_id));
    if !orphan_v.is_empty() || !orphan_t.is_empty() {
        warn!("{} vehicle rows and {} trip rows reference unknown households", orphan_v.len(), orphan_t.len());
    }

    Ok(RawTables {
        households,
        vehicles,
        trips,
        epa: epa_rows,
        errors,
        orphan_vehicles: orphan_v.len(),
        orphan_trips: orphan_t.len(),
        duplicate_households,
    })
}

/// Parse the four input files named in `paths`.
pub fn parse_tables(paths: &TablePaths, schema: &SchemaConfig) -> Result<RawTables, IngestError> {
    let h = open(&paths.households)?;
    let v = open(&paths.vehicles)?;
    let t = open(&paths.trips)?;
    let e = open(&paths.epa)?;
    parse_readers(h, v, t, e, schema)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct JoinReport {
    pub matched: usize,
    pub unmatched: usize,
    /// (make, model, year) keys with more than one EPA row; their combined
    /// values are averaged.
    pub duplicate_keys: usize,
}

/// Attach combined MPG to each vehicle by (make, model, model year).
/// Unmatched vehicles keep `mpg = None`.
pub fn join_epa_mpg(vehicles: &mut [RawVehicle], epa: &[EpaEntry]) -> JoinReport {
    let mut table: HashMap<(String, String, i32), (f64, usize)> = HashMap::new();
    for e in epa {
        let slot = table.entry((e.make.clone(), e.model.clone(), e.year)).or_insert((0.0, 0));
        slot.0 += e.combined_mpg;
        slot.1 += 1;
    }
    let mut report = JoinReport { duplicate_keys: table.values().filter(|(_, n)| *n > 1).count(), ..Default::default() };
    for v in vehicles.iter_mut() {
        let key = (normalize_key(&v.make), normalize_key(&v.model), v.model_year);
        v.mpg = table.get(&key).map(|(sum, n)| sum / *n as f64);
        if v.mpg.is_some() {
            report.matched += 1;
        } else {
            report.unmatched += 1;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncomeAssignment {
    Group(u8),
    Unreported,
}

/// Map a survey income bracket code onto an income group by bracket bounds.
pub fn assign_income_group(
    code: &str,
    schema: &SchemaConfig,
    groups: &IncomeGroupTable,
) -> Result<IncomeAssignment, IngestError> {
    let code = code.trim();
    if schema.unreported_income.iter().any(|c| c == code) {
        return Ok(IncomeAssignment::Unreported);
    }
    let bracket = schema
        .income_brackets
        .iter()
        .find(|b| b.code == code)
        .ok_or_else(|| IngestError::UnknownBracketCode(code.to_string()))?;
    let group = groups
        .group_for_income(bracket.low)
        .filter(|g| match (bracket.high, g.bracket_high) {
            (_, None) => true,
            (Some(bh), Some(gh)) => bh <= gh,
            (None, Some(_)) => false,
        })
        .ok_or_else(|| IngestError::BracketStraddlesGroups { code: code.to_string() })?;
    Ok(IncomeAssignment::Group(group.index))
}

/// Drop counts per filter rule, applied in this order; each household is
/// counted under the first rule it fails.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub unreported_income: usize,
    pub unknown_income_code: usize,
    pub no_vehicles: usize,
    pub zero_vmt: usize,
    pub pre_1984_vehicle: usize,
    pub unknown_make_model: usize,
    pub no_trip_time: usize,
    pub invalid_weight_or_price: usize,
    pub retained: usize,
}

impl FilterReport {
    pub fn dropped(&self) -> usize {
        self.unreported_income
            + self.unknown_income_code
            + self.no_vehicles
            + self.zero_vmt
            + self.pre_1984_vehicle
            + self.unknown_make_model
            + self.no_trip_time
            + self.invalid_weight_or_price
    }
}

/// Apply the analysis-sample filters and assemble household records.
///
/// Vehicles must already carry EPA fuel economy (see [`join_epa_mpg`]).
/// Output is sorted by household id.
pub fn apply_filters(
    raw: &RawTables,
    schema: &SchemaConfig,
    groups: &IncomeGroupTable,
) -> (Vec<HouseholdRecord>, FilterReport) {
    let mut vehicles: HashMap<&str, Vec<&RawVehicle>> = HashMap::new();
    for v in &raw.vehicles {
        vehicles.entry(v.household_id.as_str()).or_default().push(v);
    }
    let mut trips: HashMap<&str, Vec<&TripRecord>> = HashMap::new();
    for t in &raw.trips {
        trips.entry(t.household_id.as_str()).or_default().push(t);
    }

    let mut order: Vec<&RawHousehold> = raw.households.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let mut report = FilterReport { input: order.len(), ..Default::default() };
    let mut out = Vec::new();
    for h in order {
        let group = match assign_income_group(&h.income_code, schema, groups) {
            Ok(IncomeAssignment::Group(g)) => g,
            Ok(IncomeAssignment::Unreported) => {
                report.unreported_income += 1;
                continue;
            }
            Err(_) => {
                report.unknown_income_code += 1;
                continue;
            }
        };
        let hv = vehicles.get(h.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if hv.is_empty() {
            report.no_vehicles += 1;
            continue;
        }
        let vmt: f64 = hv.iter().map(|v| v.annual_vmt).sum();
        if !(vmt > 0.0) {
            report.zero_vmt += 1;
            continue;
        }
        let driven: Vec<&&RawVehicle> = hv.iter().filter(|v| v.annual_vmt > 0.0).collect();
        if driven.iter().any(|v| v.model_year < MIN_MODEL_YEAR) {
            report.pre_1984_vehicle += 1;
            continue;
        }
        if driven.iter().any(|v| v.mpg.is_none()) {
            report.unknown_make_model += 1;
            continue;
        }
        let ht: Vec<TripRecord> = trips.get(h.id.as_str()).map(|ts| ts.iter().map(|t| (*t).clone()).collect()).unwrap_or_default();
        let hours: f64 = ht.iter().map(|t| t.duration).sum();
        let miles: f64 = ht.iter().map(|t| t.distance).sum();
        if !(hours > 0.0) || !(miles > 0.0) {
            report.no_trip_time += 1;
            continue;
        }
        if !(h.weight > 0.0) || !(h.gas_price > 0.0) {
            report.invalid_weight_or_price += 1;
            continue;
        }
        out.push(HouseholdRecord {
            id: h.id.clone(),
            annual_vmt: vmt,
            annual_drive_time: vmt * hours / miles,
            gas_price: h.gas_price,
            income_group: group,
            sample_weight: h.weight,
            cluster_id: h.cluster_id.clone(),
            controls: h.controls.clone(),
            vehicles: hv
                .iter()
                .map(|v| VehicleRecord {
                    household_id: v.household_id.clone(),
                    annual_vmt: v.annual_vmt,
                    mpg: v.mpg.unwrap_or(0.0),
                    model_year: v.model_year,
                })
                .collect(),
            trips: ht,
        });
    }
    report.retained = out.len();
    info!("retained {} of {} households", report.retained, report.input);
    (out, report)
}

/// Summary of a full ingest run.
#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub filter: FilterReport,
    pub join: JoinReport,
    pub malformed_rows: Vec<RowError>,
    pub orphan_vehicles: usize,
    pub orphan_trips: usize,
    pub duplicate_households: usize,
}

/// Parse, join and filter in one call.
pub fn ingest(
    paths: &TablePaths,
    schema: &SchemaConfig,
    groups: &IncomeGroupTable,
) -> Result<(Vec<HouseholdRecord>, IngestSummary), IngestError> {
    let mut raw = parse_tables(paths, schema)?;
    let join = join_epa_mpg(&mut raw.vehicles, &raw.epa);
    let (records, filter) = apply_filters(&raw, schema, groups);
    Ok((
        records,
        IngestSummary {
            filter,
            join,
            malformed_rows: raw.errors,
            orphan_vehicles: raw.orphan_vehicles,
            orphan_trips: raw.orphan_trips,
            duplicate_households: raw.duplicate_households,
        },
    ))
}
