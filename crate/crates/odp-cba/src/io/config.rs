//! Run configuration: a single JSON document with the country model, benefit
//! parameters, cost plan, mode switches, scenario suite, sensitivity ranges
//! and Monte Carlo settings. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::appraisal::DiscountSpec;
use crate::benefits::{
    default_drivers, AecMode, BenefitOptions, BenefitParams, DriverMap, HourlySeries, RoetasHourly, RoetasMode,
};
use crate::costs::UnitCosts;
use crate::model::{CountryAssumptions, CountryId, ModelDocument, TimeAxis, ValidatedModel};
use crate::monte_carlo::McConfig;
use crate::scenario::{
    default_impact_matrix, default_scenarios, default_tornado_ranges, ImpactMatrix, ParamRange, ScenarioSpec,
    UncertainParam,
};

const SHIPPED: &str = include_str!("../../config/default.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key at line {line}, column {column}: {message}")]
    UnknownKey {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Benefit and cost tables come from the fixture pack.
    #[default]
    Fixture,
    /// Benefits and costs are computed from the formulas and projections.
    Formula,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionInput {
    #[default]
    Generated,
    Fixture,
}

fn yes() -> bool {
    true
}

fn default_opex_base() -> Decimal {
    Decimal::new(374, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// `None` calibrates unit costs against the itemized incremental CAPEX.
    #[serde(default)]
    pub unit_costs: Option<UnitCosts>,
    #[serde(default = "default_opex_base")]
    pub opex_base_total: Decimal,
    /// `None` fits the decay to the fixture OPEX column end points.
    #[serde(default)]
    pub opex_decay: Option<f64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            unit_costs: None,
            opex_base_total: default_opex_base(),
            opex_decay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaConfig {
    #[serde(default)]
    pub params: BenefitParams,
    /// Per-country field overrides applied on top of `params`.
    #[serde(default)]
    pub country_params: BTreeMap<CountryId, Map<String, Value>>,
    #[serde(default = "default_drivers")]
    pub drivers: DriverMap,
    #[serde(default = "yes")]
    pub ledger: bool,
    #[serde(default)]
    pub aec_mode: AecMode,
    #[serde(default)]
    pub roetas_mode: RoetasMode,
    #[serde(default)]
    pub roetas_hourly: BTreeMap<CountryId, RoetasHourly>,
    #[serde(default)]
    pub mef_hourly: BTreeMap<CountryId, HourlySeries>,
    #[serde(default)]
    pub projections: ProjectionInput,
    #[serde(default)]
    pub costs: CostConfig,
}

impl Default for FormulaConfig {
    fn default() -> Self {
        FormulaConfig {
            params: BenefitParams::default(),
            country_params: BTreeMap::new(),
            drivers: default_drivers(),
            ledger: true,
            aec_mode: AecMode::default(),
            roetas_mode: RoetasMode::default(),
            roetas_hourly: BTreeMap::new(),
            mef_hourly: BTreeMap::new(),
            projections: ProjectionInput::default(),
            costs: CostConfig::default(),
        }
    }
}

impl FormulaConfig {
    /// Parameters for `country`: the shared set with its overrides applied.
    pub fn params_for(&self, country: &CountryId) -> Result<BenefitParams, ConfigError> {
        let Some(over) = self.country_params.get(country) else {
            return Ok(self.params.clone());
        };
        let mut v = serde_json::to_value(&self.params).map_err(|e| ConfigError::SchemaViolation(e.to_string()))?;
        if let Value::Object(obj) = &mut v {
            for (k, x) in over {
                obj.insert(k.clone(), x.clone());
            }
        }
        serde_json::from_value(v).map_err(|e| ConfigError::SchemaViolation(format!("country_params.{country}: {e}")))
    }

    pub fn params_map(&self, model: &ValidatedModel) -> Result<BTreeMap<CountryId, BenefitParams>, ConfigError> {
        model
            .country_ids()
            .into_iter()
            .map(|c| Ok((c.clone(), self.params_for(&c)?)))
            .collect()
    }

    pub fn options(&self) -> BenefitOptions {
        BenefitOptions {
            ledger: self.ledger,
            aec_mode: self.aec_mode,
            roetas_mode: self.roetas_mode,
            roetas_hourly: self.roetas_hourly.clone(),
            mef_hourly: self.mef_hourly.clone(),
        }
    }
}

fn default_sweep() -> Vec<Decimal> {
    (3..=7).map(|p| Decimal::new(p, 2)).collect()
}

fn default_country_trials() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountryMcConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_country_trials")]
    pub n_trials: u64,
}

impl Default for CountryMcConfig {
    fn default() -> Self {
        CountryMcConfig {
            enabled: true,
            n_trials: default_country_trials(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub axis: TimeAxis,
    #[serde(default)]
    pub discount: DiscountSpec,
    pub countries: Vec<CountryAssumptions>,
    #[serde(default)]
    pub formula: FormulaConfig,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default = "default_impact_matrix")]
    pub impact_matrix: ImpactMatrix,
    #[serde(default = "default_tornado_ranges")]
    pub tornado_ranges: BTreeMap<UncertainParam, ParamRange>,
    #[serde(default = "default_sweep")]
    pub discount_sweep: Vec<Decimal>,
    #[serde(default)]
    pub monte_carlo: McConfig,
    #[serde(default)]
    pub country_monte_carlo: CountryMcConfig,
}

impl RunConfig {
    /// The configuration shipped with the crate.
    pub fn shipped() -> Result<Self, ConfigError> {
        parse_config(SHIPPED)
    }

    pub fn model(&self) -> Result<ValidatedModel, ConfigError> {
        ModelDocument {
            axis: self.axis,
            countries: self.countries.clone(),
        }
        .validate()
        .map_err(|e| ConfigError::SchemaViolation(e.to_string()))
    }

    /// Checks every cross-field constraint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let schema = |m: String| ConfigError::SchemaViolation(m);
        let model = self.model()?;
        self.discount.check().map_err(|e| schema(format!("discount: {e}")))?;
        if self.discount.base_year >= self.axis.first_year {
            return Err(schema(format!(
                "discount.base_year {} must precede axis.first_year {}",
                self.discount.base_year, self.axis.first_year
            )));
        }
        if self.monte_carlo.n_trials == 0 {
            return Err(schema("monte_carlo.n_trials must be at least 1".into()));
        }
        self.monte_carlo
            .validate(&self.impact_matrix)
            .map_err(|e| schema(format!("monte_carlo: {e}")))?;
        if self.country_monte_carlo.n_trials == 0 {
            return Err(schema("country_monte_carlo.n_trials must be at least 1".into()));
        }
        for (p, r) in &self.tornado_ranges {
            if !(r.low < r.high) {
                return Err(schema(format!(
                    "tornado_ranges.{p}: low {} must be below high {}",
                    r.low, r.high
                )));
            }
        }
        for row in self.impact_matrix.rows.values() {
            if !row.rate_slope.is_finite() || row.slopes.values().any(|v| !v.is_finite()) {
                return Err(schema("impact_matrix entries must be finite".into()));
            }
        }
        let mut names = Vec::new();
        for s in &self.scenarios {
            s.validate().map_err(|e| schema(e.to_string()))?;
            if names.contains(&&s.name) {
                return Err(schema(format!("scenario `{}` defined twice", s.name)));
            }
            names.push(&s.name);
        }
        for c in self.formula.country_params.keys() {
            model
                .country(c)
                .map_err(|e| schema(format!("formula.country_params: {e}")))?;
        }
        for (c, p) in self.formula.params_map(&model)? {
            p.validate()
                .map_err(|e| schema(format!("formula params for {c}: {e}")))?;
        }
        Ok(())
    }
}

fn classify(e: serde_json::Error) -> ConfigError {
    let (line, column) = (e.line(), e.column());
    let message = e.to_string();
    match e.classify() {
        serde_json::error::Category::Data if message.starts_with("unknown field") => {
            ConfigError::UnknownKey { line, column, message }
        }
        serde_json::error::Category::Data => ConfigError::SchemaViolation(message),
        _ => ConfigError::ParseError { line, column, message },
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(classify)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}
