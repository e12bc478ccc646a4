//! CAPEX and OPEX schedules and their allocation across countries.

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appraisal::DiscountSpec;
use crate::model::{split_exact, CountryId, ModelError, MoneyM, TimeAxis, YearSeries, MONEY_DP};
use crate::projections::ProjectionSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("items sum to {items} but the stated subtotal is {subtotal}")]
    SubtotalMismatch { items: Decimal, subtotal: Decimal },
    #[error("unit cost {0} is negative or not finite")]
    BadUnitCost(&'static str),
    #[error("OPEX shares sum to {0}, expected 1")]
    SharesNotUnit(f64),
    #[error("annual decay {0} outside [0, 0.2]")]
    DecayOutOfRange(f64),
    #[error("cost amount is negative: {0}")]
    Negative(String),
    #[error("calibration target {0} cannot be met: no new units in the window")]
    NoNewUnits(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapexLine {
    pub name: String,
    pub pv_meur: Decimal,
    #[serde(default)]
    pub ai_related: bool,
}

/// € per newly managed unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCosts {
    pub ev_eur: f64,
    pub et_eur: f64,
    pub res_eur_per_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapexPlan {
    /// One-time core platform items, booked in the first axis year.
    pub core_items: Vec<CapexLine>,
    pub core_subtotal: Decimal,
    pub unit_costs: UnitCosts,
}

impl CapexPlan {
    /// Rescales item values proportionally so they add up to `stated_subtotal`
    /// exactly. Returns the plan and the applied scale factor.
    pub fn from_itemization(items: Vec<CapexLine>, stated_subtotal: Decimal, unit_costs: UnitCosts) -> (Self, Decimal) {
        let raw: Decimal = items.iter().map(|i| i.pv_meur).sum();
        let factor = if raw.is_zero() {
            Decimal::ONE
        } else {
            stated_subtotal / raw
        };
        let weights: Vec<Decimal> = items.iter().map(|i| i.pv_meur).collect();
        let parts = split_exact(stated_subtotal, &weights);
        let core_items = items
            .into_iter()
            .zip(parts)
            .map(|(line, pv)| CapexLine { pv_meur: pv, ..line })
            .collect();
        (
            CapexPlan {
                core_items,
                core_subtotal: stated_subtotal,
                unit_costs,
            },
            factor,
        )
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let items: Decimal = self.core_items.iter().map(|i| i.pv_meur).sum();
        if (items - self.core_subtotal).abs() > Decimal::new(5, 2) {
            return Err(CostError::SubtotalMismatch {
                items,
                subtotal: self.core_subtotal,
            });
        }
        if let Some(line) = self
            .core_items
            .iter()
            .find(|l| l.pv_meur.is_sign_negative() && !l.pv_meur.is_zero())
        {
            return Err(CostError::Negative(line.name.clone()));
        }
        for (name, v) in [
            ("ev_eur", self.unit_costs.ev_eur),
            ("et_eur", self.unit_costs.et_eur),
            ("res_eur_per_mw", self.unit_costs.res_eur_per_mw),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CostError::BadUnitCost(name));
            }
        }
        Ok(())
    }

    pub fn one_time(&self) -> MoneyM {
        MoneyM(self.core_subtotal)
    }

    /// Fraction of the one-time core cost tagged as AI-specific.
    pub fn ai_share(&self) -> f64 {
        if self.core_subtotal.is_zero() {
            return 0.0;
        }
        let ai: Decimal = self.core_items.iter().filter(|l| l.ai_related).map(|l| l.pv_meur).sum();
        (ai / self.core_subtotal).to_f64().unwrap_or(0.0)
    }
}

/// Newly managed units per year summed over countries:
/// (EVs, ETs, RES MW). The first year counts the whole initial stock;
/// declining stocks add nothing.
pub fn new_units(proj: &ProjectionSet) -> [YearSeries; 3] {
    let axis = *proj.axis();
    let increments = |get: &dyn Fn(&crate::projections::CountryProjection) -> &YearSeries, scale: f64| {
        YearSeries::from_fn(axis, |year| {
            proj.iter()
                .map(|(_, p)| {
                    let s = get(p);
                    let now = s.get(year).copied().unwrap_or(0.0);
                    let prev = if year == axis.first_year {
                        0.0
                    } else {
                        s.get(year - 1).copied().unwrap_or(0.0)
                    };
                    (now - prev).max(0.0) * scale
                })
                .sum()
        })
    };
    [
        increments(&|p| &p.ev_stock, 1000.0),
        increments(&|p| &p.et_stock, 1000.0),
        increments(&|p| &p.res_capacity, 1000.0),
    ]
}

/// Incremental hardware CAPEX per year, M€. Excludes the one-time core cost.
pub fn capex_schedule(plan: &CapexPlan, proj: &ProjectionSet) -> Result<YearSeries<MoneyM>, CostError> {
    let [ev, et, res] = new_units(proj);
    let u = plan.unit_costs;
    let axis = *proj.axis();
    let values = axis
        .years()
        .map(|y| {
            let eur = ev.get(y).copied().unwrap_or(0.0) * u.ev_eur
                + et.get(y).copied().unwrap_or(0.0) * u.et_eur
                + res.get(y).copied().unwrap_or(0.0) * u.res_eur_per_mw;
            MoneyM::from_f64(eur / 1e6)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(YearSeries::money(axis, values)?)
}

/// Unit costs that make the discounted incremental spend on each asset class
/// equal its target (M€). Each class is fitted independently, so the fit is exact.
pub fn calibrate_unit_costs(
    proj: &ProjectionSet,
    targets_meur: [f64; 3],
    d: &DiscountSpec,
) -> Result<UnitCosts, CostError> {
    let units = new_units(proj);
    let names = ["ev", "et", "res"];
    let mut out = [0.0; 3];
    for i in 0..3 {
        let pv_units: f64 = units[i]
            .iter()
            .map(|(y, n)| n / (1.0 + d.rate_f64()).powi(y - d.base_year))
            .sum();
        if pv_units <= 0.0 {
            return Err(CostError::NoNewUnits(names[i]));
        }
        out[i] = targets_meur[i] * 1e6 / pv_units;
    }
    Ok(UnitCosts {
        ev_eur: out[0],
        et_eur: out[1],
        res_eur_per_mw: out[2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpexCategory {
    pub name: String,
    pub share: f64,
    #[serde(default)]
    pub ai_related: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpexPlan {
    pub categories: Vec<OpexCategory>,
    pub base_year_total: Decimal,
    pub annual_decay: f64,
}

impl OpexPlan {
    /// Turns category amounts into shares of their sum.
    pub fn shares_from_amounts(amounts: &[(String, f64, bool)]) -> Vec<OpexCategory> {
        let sum: f64 = amounts.iter().map(|(_, v, _)| v).sum();
        amounts
            .iter()
            .map(|(name, v, ai)| OpexCategory {
                name: name.clone(),
                share: if sum > 0.0 { v / sum } else { 0.0 },
                ai_related: *ai,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let sum: f64 = self.categories.iter().map(|c| c.share).sum();
        if (sum - 1.0).abs() > 1e-9 || self.categories.iter().any(|c| !(c.share >= 0.0)) {
            return Err(CostError::SharesNotUnit(sum));
        }
        if !(0.0..=0.2).contains(&self.annual_decay) {
            return Err(CostError::DecayOutOfRange(self.annual_decay));
        }
        if self.base_year_total.is_sign_negative() && !self.base_year_total.is_zero() {
            return Err(CostError::Negative("base_year_total".into()));
        }
        Ok(())
    }

    pub fn ai_share(&self) -> f64 {
        self.categories.iter().filter(|c| c.ai_related).map(|c| c.share).sum()
    }

    /// Splits an annual amount across categories; parts add back exactly.
    pub fn breakdown(&self, annual: MoneyM) -> Vec<(String, MoneyM)> {
        let w: Vec<Decimal> = self
            .categories
            .iter()
            .map(|c| Decimal::from_f64(c.share).unwrap_or(Decimal::ZERO))
            .collect();
        self.categories
            .iter()
            .zip(split_exact(annual.value(), &w))
            .map(|(c, v)| (c.name.clone(), MoneyM(v)))
            .collect()
    }
}

/// Decay rate that takes `first` to `last` over `steps` years of geometric decline.
pub fn fit_decay(first: f64, last: f64, steps: i32) -> f64 {
    1.0 - (last / first).powf(1.0 / f64::from(steps))
}

/// `base_year_total · (1 − decay)^(year − first_year)`, quantized per year.
pub fn opex_schedule(plan: &OpexPlan, axis: &TimeAxis) -> Result<YearSeries<MoneyM>, CostError> {
    plan.validate()?;
    let keep =
        Decimal::ONE - Decimal::from_f64(plan.annual_decay).ok_or(CostError::DecayOutOfRange(plan.annual_decay))?;
    let mut level = plan.base_year_total;
    let mut values = Vec::with_capacity(axis.len());
    for _ in axis.years() {
        values.push(MoneyM(
            level.round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven),
        ));
        level *= keep;
    }
    Ok(YearSeries::money(*axis, values)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSchedule {
    pub capex: YearSeries<MoneyM>,
    pub opex: YearSeries<MoneyM>,
    /// Booked in the first axis year.
    pub one_time: MoneyM,
}

impl CostSchedule {
    pub fn new(capex: YearSeries<MoneyM>, opex: YearSeries<MoneyM>, one_time: MoneyM) -> Result<Self, CostError> {
        if capex.axis() != opex.axis() {
            return Err(CostError::Model(ModelError::SeriesLength {
                expected: capex.values().len(),
                got: opex.values().len(),
            }));
        }
        for (label, v) in capex
            .iter()
            .map(|(y, v)| (format!("capex {y}"), *v))
            .chain(opex.iter().map(|(y, v)| (format!("opex {y}"), *v)))
            .chain(std::iter::once(("one_time".to_string(), one_time)))
        {
            if v < MoneyM::ZERO {
                return Err(CostError::Negative(label));
            }
        }
        Ok(CostSchedule { capex, opex, one_time })
    }

    pub fn axis(&self) -> &TimeAxis {
        self.capex.axis()
    }

    pub fn one_time_series(&self) -> YearSeries<MoneyM> {
        let first = self.axis().first_year;
        YearSeries::from_fn(*self.axis(), |y| if y == first { self.one_time } else { MoneyM::ZERO })
    }

    pub fn annual_totals(&self) -> YearSeries<MoneyM> {
        let one = self.one_time_series();
        YearSeries::from_fn(*self.axis(), |y| {
            let g = |s: &YearSeries<MoneyM>| s.get(y).copied().unwrap_or(MoneyM::ZERO);
            g(&self.capex) + g(&self.opex) + g(&one)
        })
    }

    pub fn total(&self) -> MoneyM {
        self.capex.total() + self.opex.total() + self.one_time
    }
}

/// Splits every cost line by country share. Countries reassemble to the input exactly.
pub fn allocate_costs_by_country(
    sched: &CostSchedule,
    shares: &[(CountryId, Decimal)],
) -> Result<Vec<(CountryId, CostSchedule)>, CostError> {
    let w: Vec<Decimal> = shares.iter().map(|(_, s)| *s).collect();
    let n = shares.len();
    let split_series = |s: &YearSeries<MoneyM>| -> Vec<Vec<MoneyM>> {
        let mut per_country = vec![Vec::with_capacity(s.values().len()); n];
        for v in s.values() {
            for (i, part) in split_exact(v.value(), &w).into_iter().enumerate() {
                per_country[i].push(MoneyM(part));
            }
        }
        per_country
    };
    let capex = split_series(&sched.capex);
    let opex = split_series(&sched.opex);
    let one_time = split_exact(sched.one_time.value(), &w);
    let axis = *sched.axis();
    shares
        .iter()
        .enumerate()
        .map(|(i, (c, _))| {
            Ok((
                c.clone(),
                CostSchedule {
                    capex: YearSeries::money(axis, capex[i].clone())?,
                    opex: YearSeries::money(axis, opex[i].clone())?,
                    one_time: MoneyM(one_time[i]),
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    fn plan(decay: f64) -> OpexPlan {
        OpexPlan {
            categories: vec![
                OpexCategory {
                    name: "a".into(),
                    share: 0.25,
                    ai_related: true,
                },
                OpexCategory {
                    name: "b".into(),
                    share: 0.75,
                    ai_related: false,
                },
            ],
            base_year_total: dec!(37.4),
            annual_decay: decay,
        }
    }

    #[test]
    fn zero_decay_is_constant() {
        let s = opex_schedule(&plan(0.0), &TimeAxis::default()).unwrap();
        assert!(s.values().iter().all(|v| v.value() == dec!(37.4)));
    }

    #[test]
    fn decay_out_of_range() {
        assert!(matches!(
            opex_schedule(&plan(0.3), &TimeAxis::default()),
            Err(CostError::DecayOutOfRange(_))
        ));
    }

    #[test]
    fn fitted_decay_hits_endpoint() {
        let d = fit_decay(37.4, 26.3, 9);
        assert!((37.4 * (1.0 - d).powi(9) - 26.3).abs() < 1e-9);
        assert!((d - 0.0383).abs() < 1e-3);
    }

    #[test]
    fn breakdown_sums_exactly() {
        let p = plan(0.0);
        let parts = p.breakdown(MoneyM(dec!(33.333333333)));
        let sum: MoneyM = parts.iter().map(|(_, v)| *v).sum();
        assert_eq!(sum.value(), dec!(33.333333333));
    }

    #[test]
    fn itemization_rescaled_to_subtotal() {
        let items = vec![
            CapexLine {
                name: "x".into(),
                pv_meur: dec!(60),
                ai_related: true,
            },
            CapexLine {
                name: "y".into(),
                pv_meur: dec!(40),
                ai_related: false,
            },
        ];
        let u = UnitCosts {
            ev_eur: 0.0,
            et_eur: 0.0,
            res_eur_per_mw: 0.0,
        };
        let (p, f) = CapexPlan::from_itemization(items, dec!(50), u);
        assert_eq!(f, dec!(0.5));
        assert_eq!(p.core_items[0].pv_meur, dec!(30));
        p.validate().unwrap();
        assert!((p.ai_share() - 0.6).abs() < 1e-12);
    }
}
