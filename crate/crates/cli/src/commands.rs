use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use vmt_rebound::design::{build_design, ControlBlock, DesignContext, ModelId, ModelSpec};
use vmt_rebound::estimator::{fit_model, Correction, ElasticitySet, FitOptions, FitResult};
use vmt_rebound::forecast::{
    aggregate_gge, frontier, path_from_elasticities, sweep_grid, weighted_cost_shares, CostShareTable, CostShares,
    ForecastPath, FuelConvention, GgeReport, GridRange, Scenario, ScenarioGrid,
};
use vmt_rebound::ingest::{ingest, SchemaConfig, TablePaths};
use vmt_rebound::model::HouseholdRecord;
use vmt_rebound::report::{grid_table, group_table, model_table};
use vmt_rebound::synthetic::{generate_population, monte_carlo_recovery};
use vmt_rebound::table::{read_households, write_households, HouseholdTable};

use crate::config::{DataRoot, DataSource, PathChoice, RunConfig};
use crate::error::CliError;
use crate::output::{create_dir, write_bytes, write_json, RunRecord, UNITS_NOTE};

/// Household table file name inside a data directory.
pub const HOUSEHOLDS_FILE: &str = "households.csv";

pub struct Context {
    pub cfg: RunConfig,
    pub config_path: Option<PathBuf>,
    pub data_root: DataRoot,
}

impl Context {
    fn record(&self) -> RunRecord {
        RunRecord { config: self.config_path.clone(), ..RunRecord::default() }
    }

    fn seed(&self) -> Option<u64> {
        self.cfg.seed
    }
}

fn manifest_beside(file: &Path) -> PathBuf {
    let stem = file.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    file.with_file_name(format!("{stem}.manifest.json"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------- ingest

pub struct IngestArgs {
    pub households: Option<PathBuf>,
    pub vehicles: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub epa: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub out: PathBuf,
}

fn load_schema(path: &Path) -> Result<SchemaConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn input_path(ctx: &Context, flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    let p = flag
        .or_else(|| configured.clone())
        .ok_or_else(|| CliError::Config(format!("no {name} table given (flag --{name} or [inputs] {name})")))?;
    Ok(ctx.data_root.resolve(&p))
}

fn ingest_records(ctx: &Context, args: IngestArgs, record: &mut RunRecord) -> Result<HouseholdTable, CliError> {
    let inputs = &ctx.cfg.inputs;
    let paths = TablePaths {
        households: input_path(ctx, args.households, &inputs.households, "households")?,
        vehicles: input_path(ctx, args.vehicles, &inputs.vehicles, "vehicles")?,
        trips: input_path(ctx, args.trips, &inputs.trips, "trips")?,
        epa: input_path(ctx, args.epa, &inputs.epa, "epa")?,
    };
    let schema = match &args.schema {
        Some(p) => {
            record.input(p);
            load_schema(p)?
        }
        None => ctx.cfg.schema.clone(),
    };
    let (records, summary) = ingest(&paths, &schema, &ctx.cfg.income_groups)?;
    for p in [&paths.households, &paths.vehicles, &paths.trips, &paths.epa] {
        record.input(p);
    }
    let f = &summary.filter;
    info!("ingest: {} households read, {} retained, {} dropped", f.input, f.retained, f.dropped());
    if !summary.malformed_rows.is_empty() {
        warn!("ingest: skipped {} malformed rows", summary.malformed_rows.len());
    }
    create_dir(&args.out)?;
    let report = args.out.join("ingest_report.json");
    write_json(&report, &summary)?;
    record.output(report);
    Ok(HouseholdTable { records, controls: schema.control_specs() })
}

fn write_table(dir: &Path, table: &HouseholdTable, record: &mut RunRecord) -> Result<PathBuf, CliError> {
    let path = dir.join(HOUSEHOLDS_FILE);
    let mut buf = Vec::new();
    write_households(&mut buf, &table.records, &table.controls)?;
    write_bytes(&path, &buf)?;
    record.output(&path);
    Ok(path)
}

pub fn run_ingest(ctx: &Context, args: IngestArgs) -> Result<(), CliError> {
    let mut record = ctx.record();
    let out = args.out.clone();
    let table = ingest_records(ctx, args, &mut record)?;
    let path = write_table(&out, &table, &mut record)?;
    println!("wrote {} households to {}", table.records.len(), path.display());
    record.write_manifest(&out.join("manifest.json"), "ingest", ctx.seed())
}

// ---------------------------------------------------------------- estimate

/// Fitted model with the baseline cost shares needed by the combined-price
/// forecast.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub tool_version: String,
    pub fit: FitResult,
    pub cost_shares: CostShareTable,
    pub excluded_households: usize,
    pub dropped_constant_columns: Vec<String>,
    pub notes: Vec<String>,
}

pub struct EstimateArgs {
    pub data: PathBuf,
    pub model: Option<ModelId>,
    pub interact_income: bool,
    pub ttc_scenario: Option<String>,
    pub controls: Option<String>,
    pub correction: Option<Correction>,
    pub design_csv: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn parse_controls(s: &str) -> Result<BTreeSet<ControlBlock>, CliError> {
    match s {
        "all" => Ok(ControlBlock::ALL.into_iter().collect()),
        "none" | "" => Ok(BTreeSet::new()),
        list => list
            .split(',')
            .map(|b| {
                ControlBlock::parse(b.trim()).ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown control block {b:?} (expected members, socioeconomic, location, timing, all or none)"
                    ))
                })
            })
            .collect(),
    }
}

fn read_table(path: &Path) -> Result<HouseholdTable, CliError> {
    let file = if path.is_dir() { path.join(HOUSEHOLDS_FILE) } else { path.to_path_buf() };
    let f = File::open(&file).map_err(|e| CliError::io(&file, e))?;
    Ok(read_households(BufReader::new(f))?)
}

fn estimate(
    ctx: &Context,
    table: &HouseholdTable,
    spec: &ModelSpec,
    options: FitOptions,
    design_csv: Option<&Path>,
) -> Result<EstimateOutput, CliError> {
    let dctx = DesignContext { groups: &ctx.cfg.income_groups, controls: &table.controls };
    let (design, report) = build_design(&table.records, spec, &dctx)?;
    if let Some(p) = design_csv {
        let mut buf = Vec::new();
        design.write_csv(&mut buf).map_err(|e| CliError::io(p, e))?;
        write_bytes(p, &buf)?;
    }
    let fit = fit_model(&design, spec, options)?;
    let excluded: BTreeSet<&str> = report.excluded.iter().map(|(id, _)| id.as_str()).collect();
    let used: Vec<HouseholdRecord> = table.records.iter().filter(|r| !excluded.contains(r.id.as_str())).cloned().collect();
    let cost_shares = weighted_cost_shares(&used, &ctx.cfg.income_groups, spec.ttc_scenario)?;
    info!("{}: n = {}, clusters = {}, pseudo R2 = {:.4}", spec.model, fit.n, fit.n_clusters, fit.pseudo_r2);
    Ok(EstimateOutput {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        fit,
        cost_shares,
        excluded_households: report.excluded.len(),
        dropped_constant_columns: report.constant_columns,
        notes: vec!["p-values use the normal approximation".into(), UNITS_NOTE.into()],
    })
}

pub fn run_estimate(ctx: &Context, args: EstimateArgs) -> Result<(), CliError> {
    let mut record = ctx.record();
    let data = ctx.data_root.resolve(&args.data);
    let table = read_table(&data)?;
    record.input(if data.is_dir() { data.join(HOUSEHOLDS_FILE) } else { data.clone() });

    let mut est = ctx.cfg.estimate.clone();
    if let Some(m) = args.model {
        est.model = m;
    }
    est.interact_income |= args.interact_income;
    if let Some(s) = args.ttc_scenario {
        est.ttc_scenario = crate::config::ScenarioSetting::Named(s);
    }
    if let Some(c) = args.controls.as_deref() {
        est.control_blocks = parse_controls(c)?;
    }
    if let Some(c) = args.correction {
        est.correction = c;
    }
    let spec = est.spec()?;
    let out = estimate(ctx, &table, &spec, est.options(), args.design_csv.as_deref())?;
    if let Some(p) = &args.design_csv {
        record.output(p);
    }
    write_json(&args.out, &out)?;
    record.output(&args.out);
    print!("{}", model_table(std::slice::from_ref(&out.fit)));
    record.write_manifest(&manifest_beside(&args.out), "estimate", ctx.seed())
}

// ---------------------------------------------------------------- forecast

pub struct ForecastArgs {
    pub elasticities: Option<PathBuf>,
    pub path: Option<PathChoice>,
    pub shares: Option<PathBuf>,
    pub group: Option<u8>,
    pub grid: GridRange,
    pub fuel_convention: Option<FuelConvention>,
}

/// Elasticities from an estimate file or a bare elasticity set.
fn load_elasticities(path: &Path) -> Result<(ElasticitySet, Option<CostShareTable>), CliError> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("fit").is_some() {
        let out: EstimateOutput =
            serde_json::from_value(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok((out.fit.elasticities, Some(out.cost_shares)))
    } else {
        let set = serde_json::from_value(value).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok((set, None))
    }
}

fn load_shares(path: &Path) -> Result<CostShareTable, CliError> {
    let value: serde_json::Value = read_json(path)?;
    let bad = |e: serde_json::Error| CliError::Data(format!("{}: {e}", path.display()));
    if value.get("p_f").is_some() {
        let s: CostShares = serde_json::from_value(value).map_err(bad)?;
        Ok(CostShareTable { overall: Some(s), groups: Default::default() })
    } else {
        serde_json::from_value(value).map_err(bad)
    }
}

fn resolve_path(ctx: &Context, args: &ForecastArgs, record: &mut RunRecord) -> Result<(ForecastPath, FuelConvention), CliError> {
    let fc = &ctx.cfg.forecast;
    let group = args.group.or(fc.group);
    let convention = args.fuel_convention.unwrap_or(fc.fuel_convention);
    let shares_file = match &args.shares {
        Some(p) => {
            record.input(p);
            Some(load_shares(p)?)
        }
        None => None,
    };
    let path = match &args.elasticities {
        Some(p) => {
            record.input(p);
            let (set, est_shares) = load_elasticities(p)?;
            let choice = args.path.unwrap_or(if set.model == ModelId::M4 { PathChoice::M4 } else { PathChoice::M3 });
            let shares = shares_file.or(est_shares);
            path_from_elasticities(&set, group, choice == PathChoice::M4, shares.as_ref())?
        }
        None => match args.path.unwrap_or(fc.path) {
            PathChoice::M3 => ForecastPath::M3 {
                eps_f: fc.eps_f.ok_or_else(|| CliError::Config("no elasticities: pass --elasticities or set forecast.eps_f".into()))?,
                eps_t: fc.eps_t.ok_or_else(|| CliError::Config("no elasticities: pass --elasticities or set forecast.eps_t".into()))?,
            },
            PathChoice::M4 => {
                let eps_vmt = fc
                    .eps_vmt
                    .ok_or_else(|| CliError::Config("no elasticities: pass --elasticities or set forecast.eps_vmt".into()))?;
                let shares = match shares_file {
                    Some(t) => t.for_group(group)?,
                    None => match (fc.p_f, fc.p_t) {
                        (Some(p_f), Some(p_t)) => CostShares::new(p_f, p_t)?,
                        _ => return Err(CliError::Config("combined-price path needs --shares or forecast.p_f and forecast.p_t".into())),
                    },
                };
                ForecastPath::M4 { eps_vmt, shares }
            }
        },
    };
    Ok((path, convention))
}

#[derive(Debug, Serialize)]
struct GgeOutput {
    scenario: Scenario,
    delta: f64,
    fuel_convention: FuelConvention,
    report: GgeReport,
}

fn gge_for(ctx: &Context, path: &ForecastPath, convention: FuelConvention) -> Result<GgeOutput, CliError> {
    let g = &ctx.cfg.gge;
    let scenario = Scenario::new(g.x, g.y)?;
    let delta = path.delta(scenario, convention)?;
    // express the fuel-use change as an equivalent MPG gain
    let report = aggregate_gge(g.baseline_gge, delta, convention.break_even(g.x), g.price_per_gge)?;
    Ok(GgeOutput { scenario, delta, fuel_convention: convention, report })
}

/// Grid, frontier and fleet total for one forecast path, written into `dir`.
fn forecast_into(
    ctx: &Context,
    path: &ForecastPath,
    convention: FuelConvention,
    range: GridRange,
    dir: &Path,
    record: &mut RunRecord,
) -> Result<ScenarioGrid, CliError> {
    let grid = sweep_grid(path, range, convention)?;
    create_dir(dir)?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).map_err(|e| CliError::io(dir, e))?;
    let mut fr = Vec::new();
    grid.write_frontier_csv(&mut fr).map_err(|e| CliError::io(dir, e))?;
    let files = [(dir.join("grid.csv"), csv), (dir.join("frontier.csv"), fr)];
    for (p, bytes) in &files {
        write_bytes(p, bytes)?;
        record.output(p);
    }
    write_json(&dir.join("grid.json"), &grid)?;
    record.output(dir.join("grid.json"));
    write_json(&dir.join("path.json"), path)?;
    record.output(dir.join("path.json"));
    let gge = gge_for(ctx, path, convention)?;
    write_json(&dir.join("gge.json"), &gge)?;
    record.output(dir.join("gge.json"));
    Ok(grid)
}

pub fn run_forecast(ctx: &Context, args: ForecastArgs, out: PathBuf) -> Result<(), CliError> {
    let mut record = ctx.record();
    let (path, convention) = resolve_path(ctx, &args, &mut record)?;
    let grid = forecast_into(ctx, &path, convention, args.grid, &out, &mut record)?;
    print!("{}", grid_table(&grid));
    record.write_manifest(&out.join("manifest.json"), "forecast", ctx.seed())
}

#[derive(Debug, Serialize)]
struct FrontierOutput {
    path: ForecastPath,
    fuel_convention: FuelConvention,
    x: f64,
    y_star: f64,
}

pub fn run_frontier(ctx: &Context, args: ForecastArgs, x: f64, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut record = ctx.record();
    let (path, convention) = resolve_path(ctx, &args, &mut record)?;
    let y_star = frontier(&path, x, convention)?;
    println!("x,y_star\n{x},{y_star}");
    if let Some(out) = out {
        write_json(&out, &FrontierOutput { path, fuel_convention: convention, x, y_star })?;
        record.output(&out);
        record.write_manifest(&manifest_beside(&out), "frontier", ctx.seed())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- synthetic

pub fn run_simulate(ctx: &Context, n: Option<usize>, out: PathBuf) -> Result<(), CliError> {
    let mut record = ctx.record();
    let mut cfg = ctx.cfg.synthetic.clone();
    if let Some(n) = n {
        cfg.n = n;
    }
    let records = generate_population(&cfg, &ctx.cfg.income_groups)?;
    let table = HouseholdTable { records, controls: cfg.control_specs() };
    create_dir(&out)?;
    let path = write_table(&out, &table, &mut record)?;
    write_json(&out.join("synthetic_config.json"), &cfg)?;
    record.output(out.join("synthetic_config.json"));
    println!("wrote {} synthetic households to {}", table.records.len(), path.display());
    record.write_manifest(&out.join("manifest.json"), "simulate", Some(cfg.seed))
}

pub fn run_mc(ctx: &Context, reps: Option<usize>, model: Option<ModelId>, n: Option<usize>, out: PathBuf) -> Result<(), CliError> {
    let mut record = ctx.record();
    let mut cfg = ctx.cfg.synthetic.clone();
    if let Some(n) = n {
        cfg.n = n;
    }
    let reps = reps.unwrap_or(ctx.cfg.monte_carlo.reps);
    let mut spec = ctx.cfg.estimate.spec()?;
    spec.model = model.unwrap_or(ctx.cfg.monte_carlo.model);
    let report = monte_carlo_recovery(&cfg, &ctx.cfg.income_groups, reps, &spec)?;
    for c in &report.coefficients {
        println!(
            "{:<16} mean {:>9.5}  sd {:>8.5}  bias {:>9}  coverage {}",
            c.name,
            c.mean,
            c.sd,
            c.bias.map_or("-".into(), |b| format!("{b:.5}")),
            c.coverage.map_or("-".into(), |v| format!("{v:.3}"))
        );
    }
    let ovb = &report.omitted_variable;
    println!(
        "fuel-only vs separate fuel elasticity: {:.5} vs {:.5} ({:.1}% of reps larger in magnitude)",
        ovb.mean_eps_f_fuel_only,
        ovb.mean_eps_f_separate,
        100.0 * ovb.share_fuel_only_larger
    );
    write_json(&out, &report)?;
    record.output(&out);
    record.write_manifest(&manifest_beside(&out), "mc-recovery", Some(cfg.seed))
}

// ---------------------------------------------------------------- report

fn render_report(estimates: &[EstimateOutput], grids: &[(String, ScenarioGrid)]) -> String {
    let fits: Vec<FitResult> = estimates.iter().filter(|e| !e.fit.spec.interact_income).map(|e| e.fit.clone()).collect();
    let sets: Vec<ElasticitySet> =
        estimates.iter().filter(|e| e.fit.spec.interact_income).map(|e| e.fit.elasticities.clone()).collect();
    let mut out = String::new();
    out.push_str("VMT demand models\n\n");
    out.push_str(&model_table(&fits));
    out.push_str("\nElasticities by income group\n\n");
    out.push_str(&group_table(&sets));
    out.push_str("\nInduced travel scenarios\n\n");
    if grids.is_empty() {
        out.push_str(&grid_table(&ScenarioGrid {
            x_values: vec![],
            y_values: vec![],
            delta: vec![],
            energy_ratio: vec![],
            backfire: vec![],
            frontier: vec![],
            convention: FuelConvention::Mpg,
        }));
    }
    for (label, grid) in grids {
        out.push_str(&format!("{label}\n"));
        out.push_str(&grid_table(grid));
        out.push('\n');
    }
    out
}

pub fn run_report(ctx: &Context, estimates: Vec<PathBuf>, forecasts: Vec<PathBuf>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut record = ctx.record();
    let mut ests = Vec::new();
    for p in &estimates {
        ests.push(read_json::<EstimateOutput>(p)?);
        record.input(p);
    }
    let mut grids = Vec::new();
    for d in &forecasts {
        let p = d.join("grid.json");
        grids.push((d.display().to_string(), read_json::<ScenarioGrid>(&p)?));
        record.input(p);
    }
    let text = render_report(&ests, &grids);
    match out {
        Some(path) => {
            write_bytes(&path, text.as_bytes())?;
            record.output(&path);
            record.write_manifest(&manifest_beside(&path), "report", ctx.seed())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- run

pub fn run_pipeline(ctx: &Context, out: PathBuf) -> Result<(), CliError> {
    let mut record = ctx.record();
    create_dir(&out)?;
    let table = match ctx.cfg.run.source {
        DataSource::Synthetic => {
            let cfg = &ctx.cfg.synthetic;
            let records = generate_population(cfg, &ctx.cfg.income_groups)?;
            HouseholdTable { records, controls: cfg.control_specs() }
        }
        DataSource::Survey => {
            let args = IngestArgs { households: None, vehicles: None, trips: None, epa: None, schema: None, out: out.clone() };
            ingest_records(ctx, args, &mut record)?
        }
    };
    write_table(&out, &table, &mut record)?;

    let base = ctx.cfg.estimate.spec()?;
    let options = ctx.cfg.estimate.options();
    let mut specs: Vec<(String, ModelSpec)> =
        ctx.cfg.run.models.iter().map(|&m| (m.to_string(), ModelSpec { model: m, interact_income: false, ..base.clone() })).collect();
    if ctx.cfg.run.by_income {
        for m in [ModelId::M3, ModelId::M4] {
            specs.push((format!("{m}_by_income"), ModelSpec { model: m, interact_income: true, ..base.clone() }));
        }
    }
    let mut estimates = Vec::new();
    for (name, spec) in &specs {
        let est = estimate(ctx, &table, spec, options, None)?;
        let p = out.join("estimates").join(format!("{name}.json"));
        write_json(&p, &est)?;
        record.output(p);
        estimates.push(est);
    }

    let fc = &ctx.cfg.forecast;
    let mut grids = Vec::new();
    for est in &estimates {
        let set = &est.fit.elasticities;
        let combined = match set.model {
            ModelId::M3 => false,
            ModelId::M4 => true,
            _ => continue,
        };
        let targets: Vec<Option<u8>> =
            if set.interacted { set.per_group.keys().map(|&g| Some(g)).collect() } else { vec![None] };
        for group in targets {
            let path = path_from_elasticities(set, group, combined, Some(&est.cost_shares))?;
            let label = match group {
                Some(g) => format!("{}_group{g}", set.model),
                None => set.model.to_string(),
            };
            let grid = forecast_into(ctx, &path, fc.fuel_convention, fc.grid, &out.join("forecast").join(&label), &mut record)?;
            grids.push((label, grid));
        }
    }
    let text = render_report(&estimates, &grids);
    write_bytes(&out.join("report.txt"), text.as_bytes())?;
    record.output(out.join("report.txt"));
    print!("{text}");
    let seed = match ctx.cfg.run.source {
        DataSource::Synthetic => Some(ctx.cfg.synthetic.seed),
        DataSource::Survey => ctx.seed(),
    };
    record.write_manifest(&out.join("manifest.json"), "run", seed)
}
