//! Run configuration read from TOML.
//!
//! Every section is optional and falls back to the defaults documented in
//! `config/reference.toml`. Unknown keys are rejected so that typos surface
//! as configuration errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vmt_rebound::design::{ControlBlock, ModelId, ModelSpec};
use vmt_rebound::estimator::{Correction, FitOptions};
use vmt_rebound::forecast::{FuelConvention, GridRange};
use vmt_rebound::ingest::SchemaConfig;
use vmt_rebound::model::{IncomeGroupTable, TtcScenario};
use vmt_rebound::synthetic::SyntheticConfig;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the root for relative input paths.
pub const DATA_ROOT_ENV: &str = "VMT_REBOUND_DATA";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub data_root: Option<PathBuf>,
    pub inputs: InputPaths,
    pub schema: SchemaConfig,
    pub income_groups: IncomeGroupTable,
    pub estimate: EstimateConfig,
    pub forecast: ForecastConfig,
    pub gge: GgeConfig,
    pub synthetic: SyntheticConfig,
    pub monte_carlo: MonteCarloConfig,
    pub run: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: None,
            data_root: None,
            inputs: InputPaths::default(),
            schema: SchemaConfig::default(),
            income_groups: IncomeGroupTable::default(),
            estimate: EstimateConfig::default(),
            forecast: ForecastConfig::default(),
            gge: GgeConfig::default(),
            synthetic: SyntheticConfig::default(),
            monte_carlo: MonteCarloConfig::default(),
            run: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub households: Option<PathBuf>,
    pub vehicles: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub epa: Option<PathBuf>,
}

/// A named time-cost scenario or explicit wage fractions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSetting {
    Named(String),
    Custom(TtcScenario),
}

impl Default for ScenarioSetting {
    fn default() -> Self {
        ScenarioSetting::Named("base".into())
    }
}

impl ScenarioSetting {
    pub fn resolve(&self) -> Result<TtcScenario, CliError> {
        match self {
            ScenarioSetting::Named(name) => TtcScenario::from_name(name)
                .ok_or_else(|| CliError::Config(format!("unknown time-cost scenario {name:?} (expected base, s1 or s2)"))),
            ScenarioSetting::Custom(s) => {
                TtcScenario::new(s.work_fraction, s.nonwork_fraction).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub model: ModelId,
    pub interact_income: bool,
    pub ttc_scenario: ScenarioSetting,
    pub control_blocks: BTreeSet<ControlBlock>,
    pub correction: Correction,
    pub allow_single_cluster: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            model: ModelId::M3,
            interact_income: false,
            ttc_scenario: ScenarioSetting::default(),
            control_blocks: ControlBlock::ALL.into_iter().collect(),
            correction: Correction::CR1,
            allow_single_cluster: false,
        }
    }
}

impl EstimateConfig {
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        Ok(ModelSpec {
            model: self.model,
            interact_income: self.interact_income,
            control_blocks: self.control_blocks.clone(),
            ttc_scenario: self.ttc_scenario.resolve()?,
        })
    }

    pub fn options(&self) -> FitOptions {
        FitOptions { correction: self.correction, allow_single_cluster: self.allow_single_cluster }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PathChoice {
    #[default]
    M3,
    M4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub path: PathChoice,
    /// Income group to forecast; overall sample when absent.
    pub group: Option<u8>,
    /// Elasticities used when no estimate file is given.
    pub eps_f: Option<f64>,
    pub eps_t: Option<f64>,
    pub eps_vmt: Option<f64>,
    /// Baseline per-mile fuel and time cost for the combined-price path when
    /// no estimate file supplies them.
    pub p_f: Option<f64>,
    pub p_t: Option<f64>,
    pub grid: GridRange,
    pub fuel_convention: FuelConvention,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            path: PathChoice::M3,
            group: None,
            eps_f: None,
            eps_t: None,
            eps_vmt: None,
            p_f: None,
            p_t: None,
            grid: GridRange::default(),
            fuel_convention: FuelConvention::Mpg,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GgeConfig {
    /// Annual light-duty fuel use, gallons of gasoline equivalent.
    pub baseline_gge: f64,
    /// USD per gallon of gasoline equivalent.
    pub price_per_gge: f64,
    /// Scenario at which the fleet total is evaluated.
    pub x: f64,
    pub y: f64,
}

impl Default for GgeConfig {
    fn default() -> Self {
        Self { baseline_gge: 88.85e9, price_per_gge: 2.5, x: 0.15, y: 0.3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub reps: usize,
    pub model: ModelId,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self { reps: 200, model: ModelId::M3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Survey,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: DataSource,
    pub models: Vec<ModelId>,
    /// Also fit the income-interacted separate and combined price models.
    pub by_income: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { source: DataSource::Synthetic, models: ModelId::ALL.to_vec(), by_income: true }
    }
}

impl RunConfig {
    /// Read and validate a config file; `None` gives all defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Apply the command-line seed override to every seeded stage.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed.or(self.seed) {
            self.seed = Some(s);
            self.synthetic.seed = s;
        }
        self
    }
}

/// Resolve relative input paths against a data root.
#[derive(Debug, Clone)]
pub struct DataRoot(pub Option<PathBuf>);

impl DataRoot {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.0 {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}
