//! Deterministic what-if scenarios and one-way (tornado) sensitivity.

use std::collections::BTreeMap;
use std::fmt;

use rust_decimal::prelude::FromPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appraisal::{
    appraise, multipliers_from_f64, AppraisalError, AppraisalResult, Appraiser, CashflowTable, Column, DiscountSpec,
    N_COLUMNS,
};
use crate::benefits::Stream;
use crate::costs::CostSchedule;
use crate::model::{MoneyM, YearSeries, MONEY_DP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario `{scenario}`: multiplier {value} must be positive")]
    NonPositiveMultiplier { scenario: String, value: f64 },
    #[error("range for {param} needs low < high, got [{low}, {high}]")]
    BadRange { param: UncertainParam, low: f64, high: f64 },
    #[error("discount rate {0} cannot be represented")]
    BadRate(f64),
    #[error(transparent)]
    Appraisal(#[from] AppraisalError),
}

/// A base cash-flow table and the discounting applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct AppraisalInputs {
    pub cashflows: CashflowTable,
    pub discount: DiscountSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default = "one")]
    pub benefit_multiplier: f64,
    #[serde(default = "one")]
    pub cost_multiplier: f64,
    #[serde(default)]
    pub stream_multipliers: BTreeMap<Stream, f64>,
    #[serde(default)]
    pub discount_override: Option<f64>,
}

impl ScenarioSpec {
    pub fn identity(name: impl Into<String>) -> Self {
        ScenarioSpec {
            name: name.into(),
            benefit_multiplier: 1.0,
            cost_multiplier: 1.0,
            stream_multipliers: BTreeMap::new(),
            discount_override: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let all = [self.benefit_multiplier, self.cost_multiplier]
            .into_iter()
            .chain(self.stream_multipliers.values().copied());
        for v in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::NonPositiveMultiplier {
                    scenario: self.name.clone(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

fn dec(v: f64) -> Decimal {
    Decimal::from_f64(v).unwrap_or(Decimal::ZERO)
}

fn scale_series(s: &YearSeries<MoneyM>, k: Decimal) -> YearSeries<MoneyM> {
    s.map(|v| MoneyM((v.value() * k).round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven)))
}

/// Applies the scenario multipliers cell by cell and returns the perturbed inputs.
pub fn perturb(base: &AppraisalInputs, s: &ScenarioSpec) -> Result<AppraisalInputs, ScenarioError> {
    s.validate()?;
    let mut benefits = base.cashflows.benefits.clone();
    let axis = *benefits.axis();
    let countries = benefits.countries().to_vec();
    for stream in Stream::ALL {
        let k = dec(s.benefit_multiplier * s.stream_multipliers.get(&stream).copied().unwrap_or(1.0));
        if k == Decimal::ONE {
            continue;
        }
        for c in &countries {
            for y in axis.years() {
                let v = benefits.get(stream, c, y).unwrap_or(MoneyM::ZERO);
                let scaled =
                    MoneyM((v.value() * k).round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven));
                benefits
                    .set(stream, c, y, scaled)
                    .map_err(|e| ScenarioError::Appraisal(AppraisalError::Stream(e.into())))?;
            }
        }
    }
    let kc = dec(s.cost_multiplier);
    let costs = if kc == Decimal::ONE {
        base.cashflows.costs.clone()
    } else {
        let c = &base.cashflows.costs;
        CostSchedule {
            capex: scale_series(&c.capex, kc),
            opex: scale_series(&c.opex, kc),
            one_time: MoneyM(
                (c.one_time.value() * kc).round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven),
            ),
        }
    };
    let discount = match s.discount_override {
        Some(r) => base
            .discount
            .with_rate(Decimal::from_f64(r).ok_or(ScenarioError::BadRate(r))?),
        None => base.discount,
    };
    Ok(AppraisalInputs {
        cashflows: CashflowTable::new(benefits, costs, base.cashflows.basis)?,
        discount,
    })
}

/// Full re-appraisal under the scenario.
pub fn apply_scenario(base: &AppraisalInputs, s: &ScenarioSpec) -> Result<AppraisalResult, ScenarioError> {
    let p = perturb(base, s)?;
    Ok(appraise(&p.cashflows, &p.discount)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertainParam {
    AiAccuracy,
    AdoptionRate,
    Capex,
    Opex,
    ElectricityPrice,
    DataAvailability,
    DiscountRate,
}

impl UncertainParam {
    pub const ALL: [UncertainParam; 7] = [
        UncertainParam::AiAccuracy,
        UncertainParam::AdoptionRate,
        UncertainParam::Capex,
        UncertainParam::Opex,
        UncertainParam::ElectricityPrice,
        UncertainParam::DataAvailability,
        UncertainParam::DiscountRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UncertainParam::AiAccuracy => "ai_accuracy",
            UncertainParam::AdoptionRate => "adoption_rate",
            UncertainParam::Capex => "capex",
            UncertainParam::Opex => "opex",
            UncertainParam::ElectricityPrice => "electricity_price",
            UncertainParam::DataAvailability => "data_availability",
            UncertainParam::DiscountRate => "discount_rate",
        }
    }

    /// Base setting: 1.0 for index-style parameters, the base rate for the discount rate.
    pub fn base_value(self, d: &DiscountSpec) -> f64 {
        match self {
            UncertainParam::DiscountRate => d.rate_f64(),
            _ => 1.0,
        }
    }
}

impl fmt::Display for UncertainParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Slopes of one uncertain parameter: column multiplier change and
/// discount-rate change per unit deviation from the base setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactRow {
    #[serde(default)]
    pub slopes: BTreeMap<ImpactTarget, f64>,
    #[serde(default)]
    pub rate_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ImpactTarget {
    #[serde(rename = "ROD")]
    Rod,
    #[serde(rename = "ROETAS")]
    Roetas,
    #[serde(rename = "CSDR_PLR")]
    CsdrPlr,
    #[serde(rename = "AEC")]
    Aec,
    #[serde(rename = "FES")]
    Fes,
    #[serde(rename = "GSMS")]
    Gsms,
    #[serde(rename = "CO2")]
    Co2,
    #[serde(rename = "RAP")]
    Rap,
    #[serde(rename = "capex")]
    Capex,
    #[serde(rename = "opex")]
    Opex,
    #[serde(rename = "one_time")]
    OneTime,
}

impl ImpactTarget {
    pub fn column(self) -> Column {
        match self {
            ImpactTarget::Rod => Column::Stream(Stream::Rod),
            ImpactTarget::Roetas => Column::Stream(Stream::Roetas),
            ImpactTarget::CsdrPlr => Column::Stream(Stream::CsdrPlr),
            ImpactTarget::Aec => Column::Stream(Stream::Aec),
            ImpactTarget::Fes => Column::Stream(Stream::Fes),
            ImpactTarget::Gsms => Column::Stream(Stream::Gsms),
            ImpactTarget::Co2 => Column::Stream(Stream::Co2),
            ImpactTarget::Rap => Column::Stream(Stream::Rap),
            ImpactTarget::Capex => Column::Capex,
            ImpactTarget::Opex => Column::Opex,
            ImpactTarget::OneTime => Column::OneTime,
        }
    }
}

/// Linear mapping from parameter deviations to column multipliers
/// `max(0, 1 + Σ slope·x)` and an effective discount rate `base + Σ rate_slope·x`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImpactMatrix {
    pub rows: BTreeMap<UncertainParam, ImpactRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub multipliers: [f64; N_COLUMNS],
    /// `None` keeps the base rate.
    pub rate: Option<Decimal>,
}

impl ImpactMatrix {
    pub fn contains(&self, p: UncertainParam) -> bool {
        self.rows.contains_key(&p)
    }

    /// Effect of deviations `x_p = value_p − base_p`, accumulated in fixed parameter order.
    pub fn effect(
        &self,
        deviations: &[(UncertainParam, f64)],
        d: &DiscountSpec,
    ) -> Result<Perturbation, ScenarioError> {
        let mut m = [1.0; N_COLUMNS];
        let mut shift = 0.0;
        for (p, x) in deviations {
            if let Some(row) = self.rows.get(p) {
                for (t, slope) in &row.slopes {
                    m[t.column().index()] += slope * x;
                }
                shift += row.rate_slope * x;
            }
        }
        for v in &mut m {
            *v = v.max(0.0);
        }
        let rate = if shift == 0.0 {
            None
        } else {
            Some(d.rate + Decimal::from_f64(shift).ok_or(ScenarioError::BadRate(shift))?)
        };
        Ok(Perturbation { multipliers: m, rate })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRange {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TornadoEntry {
    pub parameter: UncertainParam,
    pub low: f64,
    pub high: f64,
    pub npv_low: MoneyM,
    pub npv_high: MoneyM,
    pub bcr_low: Option<f64>,
    pub bcr_high: Option<f64>,
    pub range: MoneyM,
}

/// One-way sensitivity: each parameter at its low and high setting with all
/// others at base, sorted by descending NPV range (ties by parameter name).
pub fn tornado(
    base: &Appraiser,
    matrix: &ImpactMatrix,
    ranges: &BTreeMap<UncertainParam, ParamRange>,
) -> Result<Vec<TornadoEntry>, ScenarioError> {
    let d = *base.discount();
    let mut out = Vec::with_capacity(ranges.len());
    for (&p, r) in ranges {
        if !(r.low < r.high) {
            return Err(ScenarioError::BadRange {
                param: p,
                low: r.low,
                high: r.high,
            });
        }
        let at = |v: f64| -> Result<_, ScenarioError> {
            let eff = matrix.effect(&[(p, v - p.base_value(&d))], &d)?;
            Ok(base.evaluate(&multipliers_from_f64(&eff.multipliers), eff.rate)?)
        };
        let (lo, hi) = (at(r.low)?, at(r.high)?);
        out.push(TornadoEntry {
            parameter: p,
            low: r.low,
            high: r.high,
            npv_low: lo.npv,
            npv_high: hi.npv,
            bcr_low: lo.bcr(),
            bcr_high: hi.bcr(),
            range: (hi.npv - lo.npv).abs(),
        });
    }
    out.sort_by(|a, b| {
        b.range
            .cmp(&a.range)
            .then_with(|| a.parameter.name().cmp(b.parameter.name()))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rate: Decimal,
    pub npv: MoneyM,
    pub bcr: Option<f64>,
}

/// Full re-discounting of the base flows at each rate.
pub fn discount_sweep(base: &Appraiser, rates: &[Decimal]) -> Result<Vec<SweepPoint>, ScenarioError> {
    rates
        .iter()
        .map(|&r| {
            let v = base.evaluate(&crate::appraisal::UNIT_MULTIPLIERS, Some(r))?;
            Ok(SweepPoint {
                rate: r,
                npv: v.npv,
                bcr: v.bcr(),
            })
        })
        .collect()
}

fn row(slopes: &[(ImpactTarget, f64)], rate_slope: f64) -> ImpactRow {
    ImpactRow {
        slopes: slopes.iter().copied().collect(),
        rate_slope,
    }
}

/// Shipped calibration of parameter effects on columns.
///
/// AI accuracy scales every benefit stream one-for-one. Adoption acts fully on
/// fleet-driven streams (FES, CSDR-PLR, GSMS) and partly on CO₂, RAP and
/// ROETAS. Electricity price moves market-valued streams, data availability
/// half-scales forecast-dependent streams. The discount-rate row passes 8% of
/// a rate change through to the effective rate.
pub fn default_impact_matrix() -> ImpactMatrix {
    use ImpactTarget::*;
    let all_streams: Vec<(ImpactTarget, f64)> = [Rod, Roetas, CsdrPlr, Aec, Fes, Gsms, Co2, Rap]
        .iter()
        .map(|&t| (t, 1.0))
        .collect();
    let mut rows = BTreeMap::new();
    rows.insert(UncertainParam::AiAccuracy, row(&all_streams, 0.0));
    rows.insert(
        UncertainParam::AdoptionRate,
        row(
            &[
                (Fes, 1.0),
                (CsdrPlr, 1.0),
                (Gsms, 1.0),
                (Co2, 0.6),
                (Rap, 0.6),
                (Roetas, 0.4),
            ],
            0.0,
        ),
    );
    rows.insert(UncertainParam::Capex, row(&[(Capex, 1.0), (OneTime, 1.0)], 0.0));
    rows.insert(UncertainParam::Opex, row(&[(Opex, 1.0)], 0.0));
    rows.insert(
        UncertainParam::ElectricityPrice,
        row(&[(Roetas, 1.0), (Aec, 1.0), (CsdrPlr, 0.5)], 0.0),
    );
    rows.insert(
        UncertainParam::DataAvailability,
        row(&[(Roetas, 0.5), (Aec, 0.5), (Gsms, 0.5), (CsdrPlr, 0.5)], 0.0),
    );
    rows.insert(UncertainParam::DiscountRate, row(&[], 0.08));
    ImpactMatrix { rows }
}

/// ±10% on index parameters, ±15% on adoption, 3%–7% on the discount rate.
pub fn default_tornado_ranges() -> BTreeMap<UncertainParam, ParamRange> {
    let r = |low, high| ParamRange { low, high };
    BTreeMap::from([
        (UncertainParam::AiAccuracy, r(0.9, 1.1)),
        (UncertainParam::AdoptionRate, r(0.85, 1.15)),
        (UncertainParam::Capex, r(0.9, 1.1)),
        (UncertainParam::Opex, r(0.9, 1.1)),
        (UncertainParam::ElectricityPrice, r(0.9, 1.1)),
        (UncertainParam::DataAvailability, r(0.9, 1.1)),
        (UncertainParam::DiscountRate, r(0.03, 0.07)),
    ])
}

/// Identity, ±10% benefits, ±10% costs, and 3% / 5% discount rates.
pub fn default_scenarios() -> Vec<ScenarioSpec> {
    let mk = |name: &str, b: f64, c: f64, d: Option<f64>| ScenarioSpec {
        discount_override: d,
        benefit_multiplier: b,
        cost_multiplier: c,
        ..ScenarioSpec::identity(name)
    };
    vec![
        mk("base", 1.0, 1.0, None),
        mk("benefits_up", 1.1, 1.0, None),
        mk("benefits_down", 0.9, 1.0, None),
        mk("costs_up", 1.0, 1.1, None),
        mk("costs_down", 1.0, 0.9, None),
        mk("discount_3pct", 1.0, 1.0, Some(0.03)),
        mk("discount_5pct", 1.0, 1.0, Some(0.05)),
    ]
}
