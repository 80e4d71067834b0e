//! Canonical household table.
//!
//! One row per household. Vehicles and trips are stored as their sufficient
//! statistics for the cost formulas: total VMT with the VMT-weighted harmonic
//! mean MPG, and per-purpose trip hours and miles. Control columns carry
//! their block and kind in the header as `c:<block>:<num|cat>:<name>`, so
//! the file is self-describing.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::design::{ControlBlock, ControlKind, ControlSpec};
use crate::model::{ControlValue, HouseholdRecord, TripPurpose, TripRecord, VehicleRecord};

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub const HOUSEHOLD_COLUMNS: [&str; 13] = [
    "id",
    "annual_vmt",
    "annual_drive_time",
    "gas_price",
    "income_group",
    "sample_weight",
    "cluster_id",
    "household_mpg",
    "oldest_model_year",
    "work_hours",
    "work_miles",
    "nonwork_hours",
    "nonwork_miles",
];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("household table is missing column {0:?}")]
    MissingColumn(String),
    #[error("bad control column header {0:?}")]
    BadControlHeader(String),
    #[error("line {line}: {message}")]
    BadValue { line: u64, message: String },
    #[error("household {0}: {1}")]
    Summary(String, String),
}

fn control_header(spec: &ControlSpec) -> String {
    let kind = match spec.kind {
        ControlKind::Numeric => "num",
        ControlKind::Categorical { .. } => "cat",
    };
    format!("c:{}:{}:{}", spec.block.as_str(), kind, spec.name)
}

fn parse_control_header(h: &str) -> Result<ControlSpec, TableError> {
    let bad = || TableError::BadControlHeader(h.to_string());
    let mut parts = h.splitn(4, ':');
    let (Some("c"), Some(block), Some(kind), Some(name)) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(bad());
    };
    let block = ControlBlock::parse(block).ok_or_else(bad)?;
    let kind = match kind {
        "num" => ControlKind::Numeric,
        "cat" => ControlKind::Categorical { levels: Vec::new() },
        _ => return Err(bad()),
    };
    Ok(ControlSpec { name: name.to_string(), block, kind })
}

struct Summary {
    mpg: f64,
    oldest_year: i32,
    work: (f64, f64),
    nonwork: (f64, f64),
}

fn summarize(r: &HouseholdRecord) -> Result<Summary, TableError> {
    let mpg = r.weighted_mpg().map_err(|e| TableError::Summary(r.id.clone(), e.to_string()))?;
    let oldest_year = r.vehicles.iter().filter(|v| v.annual_vmt > 0.0).map(|v| v.model_year).min().unwrap_or(0);
    let mut work = (0.0, 0.0);
    let mut nonwork = (0.0, 0.0);
    for t in &r.trips {
        let acc = match t.purpose {
            TripPurpose::Work => &mut work,
            TripPurpose::Nonwork => &mut nonwork,
        };
        acc.0 += t.duration;
        acc.1 += t.distance;
    }
    Ok(Summary { mpg, oldest_year, work, nonwork })
}

/// Write households in canonical form. `controls` fixes which control
/// columns appear and in what order.
pub fn write_households<W: Write>(
    out: W,
    records: &[HouseholdRecord],
    controls: &[ControlSpec],
) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = HOUSEHOLD_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(controls.iter().map(control_header));
    wtr.write_record(&header)?;
    for r in records {
        let s = summarize(r)?;
        let mut row = vec![
            r.id.clone(),
            fmt_f64(r.annual_vmt),
            fmt_f64(r.annual_drive_time),
            fmt_f64(r.gas_price),
            r.income_group.to_string(),
            fmt_f64(r.sample_weight),
            r.cluster_id.clone(),
            fmt_f64(s.mpg),
            s.oldest_year.to_string(),
            fmt_f64(s.work.0),
            fmt_f64(s.work.1),
            fmt_f64(s.nonwork.0),
            fmt_f64(s.nonwork.1),
        ];
        for c in controls {
            row.push(match r.controls.get(&c.name) {
                Some(ControlValue::Numeric(v)) => fmt_f64(*v),
                Some(ControlValue::Category(s)) => s.clone(),
                Some(ControlValue::Missing) | None => String::new(),
            });
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Households read back from a canonical table together with the control
/// specs recovered from its header.
#[derive(Debug, Clone)]
pub struct HouseholdTable {
    pub records: Vec<HouseholdRecord>,
    pub controls: Vec<ControlSpec>,
}

pub fn read_households<R: Read>(input: R) -> Result<HouseholdTable, TableError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| TableError::MissingColumn(name.to_string()))
    };
    let cols: Vec<usize> = HOUSEHOLD_COLUMNS.iter().map(|c| idx(c)).collect::<Result<_, _>>()?;
    let mut controls = Vec::new();
    let mut control_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if h.starts_with("c:") {
            controls.push(parse_control_header(h)?);
            control_cols.push(i);
        }
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| row.get(cols[k]).unwrap_or("").trim();
        let num = |k: usize| {
            field(k).parse::<f64>().map_err(|_| TableError::BadValue {
                line,
                message: format!("{} = {:?} is not a number", HOUSEHOLD_COLUMNS[k], field(k)),
            })
        };
        let id = field(0).to_string();
        let annual_vmt = num(1)?;
        let income_group = field(4).parse::<u8>().map_err(|_| TableError::BadValue {
            line,
            message: format!("income_group = {:?}", field(4)),
        })?;
        let mpg = num(7)?;
        let oldest = field(8).parse::<i32>().map_err(|_| TableError::BadValue {
            line,
            message: format!("oldest_model_year = {:?}", field(8)),
        })?;
        let mut ctl = BTreeMap::new();
        for (spec, &ci) in controls.iter().zip(&control_cols) {
            let raw = row.get(ci).unwrap_or("").trim();
            let value = if raw.is_empty() {
                ControlValue::Missing
            } else {
                match spec.kind {
                    ControlKind::Numeric => raw.parse::<f64>().map(ControlValue::Numeric).map_err(|_| {
                        TableError::BadValue { line, message: format!("{} = {raw:?} is not a number", spec.name) }
                    })?,
                    ControlKind::Categorical { .. } => ControlValue::Category(raw.to_string()),
                }
            };
            ctl.insert(spec.name.clone(), value);
        }
        let trip = |purpose, hours: f64, miles: f64| TripRecord { household_id: id.clone(), purpose, duration: hours, distance: miles };
        records.push(HouseholdRecord {
            annual_vmt,
            annual_drive_time: num(2)?,
            gas_price: num(3)?,
            income_group,
            sample_weight: num(5)?,
            cluster_id: field(6).to_string(),
            controls: ctl,
            vehicles: vec![VehicleRecord { household_id: id.clone(), annual_vmt, mpg, model_year: oldest }],
            trips: vec![trip(TripPurpose::Work, num(9)?, num(10)?), trip(TripPurpose::Nonwork, num(11)?, num(12)?)],
            id,
        });
    }
    Ok(HouseholdTable { records, controls })
}
