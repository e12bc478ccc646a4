//! Discounting, NPV, BCR and payback.
//!
//! Cash flows are organized in eleven columns (eight benefit streams, CAPEX,
//! OPEX, one-time cost). [`Appraiser`] caches per-column present values so
//! perturbed re-appraisals only rescale columns.

use std::collections::BTreeMap;

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benefits::{
    benefits_table, BenefitOptions, BenefitParams, BenefitRun, DriverMap, Stream, StreamError, StreamTable,
};
use crate::costs::CostSchedule;
use crate::model::{CountryId, MoneyM, TimeAxis, ValidatedModel, YearSeries, MONEY_DP};
use crate::projections::ProjectionSet;

pub const N_COLUMNS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Column {
    Stream(Stream),
    Capex,
    Opex,
    OneTime,
}

impl Column {
    pub const ALL: [Column; N_COLUMNS] = [
        Column::Stream(Stream::Rod),
        Column::Stream(Stream::Roetas),
        Column::Stream(Stream::CsdrPlr),
        Column::Stream(Stream::Aec),
        Column::Stream(Stream::Fes),
        Column::Stream(Stream::Gsms),
        Column::Stream(Stream::Co2),
        Column::Stream(Stream::Rap),
        Column::Capex,
        Column::Opex,
        Column::OneTime,
    ];

    pub fn index(self) -> usize {
        match self {
            Column::Stream(s) => s.index(),
            Column::Capex => 8,
            Column::Opex => 9,
            Column::OneTime => 10,
        }
    }

    pub fn is_benefit(self) -> bool {
        matches!(self, Column::Stream(_))
    }

    pub fn label(self) -> &'static str {
        match self {
            Column::Stream(s) => s.code(),
            Column::Capex => "capex",
            Column::Opex => "opex",
            Column::OneTime => "one_time",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AppraisalError {
    #[error("discount rate {0} outside (-0.5, 0.5)")]
    RateOutOfRange(Decimal),
    #[error("cash-flow years must follow base year {0}")]
    BaseYearNotBefore(i32),
    #[error("benefit and cost tables cover different axes")]
    AxisMismatch,
    #[error("no cash flows for country `{0}`")]
    UnknownCountry(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// End-of-year discounting to `base_year`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountSpec {
    #[serde(default = "default_rate")]
    pub rate: Decimal,
    #[serde(default = "default_base_year")]
    pub base_year: i32,
}

fn default_rate() -> Decimal {
    Decimal::new(4, 2)
}

fn default_base_year() -> i32 {
    2025
}

impl Default for DiscountSpec {
    fn default() -> Self {
        DiscountSpec {
            rate: default_rate(),
            base_year: default_base_year(),
        }
    }
}

impl DiscountSpec {
    pub fn new(rate: Decimal, base_year: i32) -> Result<Self, AppraisalError> {
        let d = DiscountSpec { rate, base_year };
        d.check()?;
        Ok(d)
    }

    pub fn check(&self) -> Result<(), AppraisalError> {
        check_rate(self.rate)
    }

    pub fn rate_f64(&self) -> f64 {
        self.rate.to_f64().unwrap_or(f64::NAN)
    }

    pub fn with_rate(&self, rate: Decimal) -> Self {
        DiscountSpec { rate, ..*self }
    }
}

fn check_rate(rate: Decimal) -> Result<(), AppraisalError> {
    let half = Decimal::new(5, 1);
    if rate > -half && rate < half {
        Ok(())
    } else {
        Err(AppraisalError::RateOutOfRange(rate))
    }
}

/// How the amounts in a cash-flow table are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CashflowBasis {
    /// Undiscounted annual amounts.
    Nominal,
    /// Amounts already discounted to the base year at `rate`.
    Discounted { rate: Decimal },
}

fn quantize(d: Decimal) -> Decimal {
    d.round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven)
}

/// Per-year factors that bring amounts on `basis` to present value at `d`.
fn year_factors(axis: &TimeAxis, d: &DiscountSpec, basis: CashflowBasis) -> Result<Vec<Decimal>, AppraisalError> {
    check_rate(d.rate)?;
    if axis.first_year <= d.base_year {
        return Err(AppraisalError::BaseYearNotBefore(d.base_year));
    }
    let target = Decimal::ONE + d.rate;
    let source = match basis {
        CashflowBasis::Nominal => Decimal::ONE,
        CashflowBasis::Discounted { rate } => {
            check_rate(rate)?;
            Decimal::ONE + rate
        }
    };
    Ok(axis
        .years()
        .map(|y| {
            if source == target {
                return Decimal::ONE;
            }
            let k = (y - d.base_year) as i64;
            let mut num = Decimal::ONE;
            let mut den = Decimal::ONE;
            for _ in 0..k {
                num *= source;
                den *= target;
            }
            num / den
        })
        .collect())
}

/// Present value of a money series. Amounts on a [`CashflowBasis::Discounted`]
/// basis at the same rate are summed as they are.
pub fn discount_series(
    s: &YearSeries<MoneyM>,
    d: &DiscountSpec,
    basis: CashflowBasis,
) -> Result<MoneyM, AppraisalError> {
    let f = year_factors(s.axis(), d, basis)?;
    Ok(MoneyM(quantize(
        s.values().iter().zip(&f).map(|(v, f)| v.value() * f).sum(),
    )))
}

/// Benefits and costs of one entity (aggregate or a single country).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CashflowTable {
    pub benefits: StreamTable,
    pub costs: CostSchedule,
    pub basis: CashflowBasis,
}

impl CashflowTable {
    pub fn new(benefits: StreamTable, costs: CostSchedule, basis: CashflowBasis) -> Result<Self, AppraisalError> {
        if benefits.axis() != costs.axis() {
            return Err(AppraisalError::AxisMismatch);
        }
        Ok(CashflowTable { benefits, costs, basis })
    }

    pub fn axis(&self) -> &TimeAxis {
        self.benefits.axis()
    }

    pub fn column(&self, c: Column) -> YearSeries<MoneyM> {
        match c {
            Column::Stream(s) => self.benefits.stream_series(s),
            Column::Capex => self.costs.capex.clone(),
            Column::Opex => self.costs.opex.clone(),
            Column::OneTime => self.costs.one_time_series(),
        }
    }

    pub fn columns(&self) -> [YearSeries<MoneyM>; N_COLUMNS] {
        Column::ALL.map(|c| self.column(c))
    }

    /// `benefits − capex − opex − one_time` per year, on the table's basis.
    pub fn net(&self) -> YearSeries<MoneyM> {
        let b = self.benefits.annual_totals();
        let c = self.costs.annual_totals();
        YearSeries::from_fn(*self.axis(), |y| {
            b.get(y).copied().unwrap_or(MoneyM::ZERO) - c.get(y).copied().unwrap_or(MoneyM::ZERO)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualRow {
    pub year: i32,
    pub benefits: MoneyM,
    pub costs: MoneyM,
    pub net: MoneyM,
    pub discounted_net: MoneyM,
    pub cumulative: MoneyM,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppraisalResult {
    pub pv_benefits: MoneyM,
    pub pv_costs: MoneyM,
    pub npv: MoneyM,
    /// `None` when `pv_costs` is zero.
    pub bcr: Option<f64>,
    pub payback_eoy: Option<i32>,
    pub payback_interp: Option<f64>,
    /// Indexed by [`Column::index`].
    pub column_pvs: [MoneyM; N_COLUMNS],
    pub annual: Vec<AnnualRow>,
}

/// Outcome of a column-scaled re-appraisal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Valuation {
    pub pv_benefits: MoneyM,
    pub pv_costs: MoneyM,
    pub npv: MoneyM,
}

impl Valuation {
    pub fn bcr(&self) -> Option<f64> {
        bcr(self.pv_benefits, self.pv_costs)
    }
}

fn bcr(b: MoneyM, c: MoneyM) -> Option<f64> {
    if c.is_zero() {
        None
    } else {
        (b.value() / c.value()).to_f64()
    }
}

/// Cached column present values for repeated re-appraisal.
#[derive(Debug, Clone)]
pub struct Appraiser {
    axis: TimeAxis,
    basis: CashflowBasis,
    discount: DiscountSpec,
    columns: Vec<Vec<Decimal>>,
    base_pvs: [Decimal; N_COLUMNS],
}

impl Appraiser {
    pub fn new(cf: &CashflowTable, d: &DiscountSpec) -> Result<Self, AppraisalError> {
        let columns: Vec<Vec<Decimal>> = cf
            .columns()
            .iter()
            .map(|s| s.values().iter().map(|v| v.value()).collect())
            .collect();
        let mut a = Appraiser {
            axis: *cf.axis(),
            basis: cf.basis,
            discount: *d,
            columns,
            base_pvs: [Decimal::ZERO; N_COLUMNS],
        };
        a.base_pvs = a.compute_pvs(d.rate)?;
        Ok(a)
    }

    pub fn discount(&self) -> &DiscountSpec {
        &self.discount
    }

    pub fn base_pvs(&self) -> &[Decimal; N_COLUMNS] {
        &self.base_pvs
    }

    /// Present value of each column at `rate`, quantized to [`MONEY_DP`].
    pub fn column_pvs(&self, rate: Decimal) -> Result<[Decimal; N_COLUMNS], AppraisalError> {
        if rate == self.discount.rate {
            return Ok(self.base_pvs);
        }
        self.compute_pvs(rate)
    }

    fn compute_pvs(&self, rate: Decimal) -> Result<[Decimal; N_COLUMNS], AppraisalError> {
        let f = year_factors(&self.axis, &self.discount.with_rate(rate), self.basis)?;
        let mut out = [Decimal::ZERO; N_COLUMNS];
        for (o, col) in out.iter_mut().zip(&self.columns) {
            *o = quantize(col.iter().zip(&f).map(|(v, f)| v * f).sum());
        }
        Ok(out)
    }

    /// Present values with each column scaled by `multipliers`, optionally at another rate.
    pub fn evaluate(
        &self,
        multipliers: &[Decimal; N_COLUMNS],
        rate: Option<Decimal>,
    ) -> Result<Valuation, AppraisalError> {
        let pvs = match rate {
            Some(r) => self.column_pvs(r)?,
            None => self.base_pvs,
        };
        let mut b = Decimal::ZERO;
        let mut c = Decimal::ZERO;
        for (i, col) in Column::ALL.iter().enumerate() {
            let v = quantize(pvs[i] * multipliers[i]);
            if col.is_benefit() {
                b += v;
            } else {
                c += v;
            }
        }
        Ok(Valuation {
            pv_benefits: MoneyM(b),
            pv_costs: MoneyM(c),
            npv: MoneyM(b - c),
        })
    }
}

pub const UNIT_MULTIPLIERS: [Decimal; N_COLUMNS] = [Decimal::ONE; N_COLUMNS];

/// Converts `f64` multipliers for [`Appraiser::evaluate`].
pub fn multipliers_from_f64(m: &[f64; N_COLUMNS]) -> [Decimal; N_COLUMNS] {
    m.map(|v| Decimal::from_f64(v).unwrap_or(Decimal::ZERO))
}

/// NPV, BCR and both payback conventions.
pub fn appraise(cf: &CashflowTable, d: &DiscountSpec) -> Result<AppraisalResult, AppraisalError> {
    let appraiser = Appraiser::new(cf, d)?;
    let v = appraiser.evaluate(&UNIT_MULTIPLIERS, None)?;
    let f = year_factors(cf.axis(), d, cf.basis)?;
    let benefits = cf.benefits.annual_totals();
    let costs = cf.costs.annual_totals();

    let mut annual = Vec::with_capacity(cf.axis().len());
    let mut cumulative = MoneyM::ZERO;
    let mut payback_eoy = None;
    let mut payback_interp = None;
    for (i, year) in cf.axis().years().enumerate() {
        let b = benefits.values()[i];
        let c = costs.values()[i];
        let net = b - c;
        let discounted = MoneyM(quantize(net.value() * f[i]));
        let before = cumulative;
        cumulative += discounted;
        if payback_eoy.is_none() && cumulative >= MoneyM::ZERO {
            payback_eoy = Some(year);
            let frac = if discounted.is_zero() || before >= MoneyM::ZERO {
                0.0
            } else {
                (-before.value() / discounted.value()).to_f64().unwrap_or(1.0)
            };
            payback_interp = Some(f64::from(year - 1) + frac);
        }
        annual.push(AnnualRow {
            year,
            benefits: b,
            costs: c,
            net,
            discounted_net: discounted,
            cumulative,
        });
    }

    let column_pvs = appraiser.base_pvs().map(MoneyM);
    Ok(AppraisalResult {
        pv_benefits: v.pv_benefits,
        pv_costs: v.pv_costs,
        npv: v.npv,
        bcr: v.bcr(),
        payback_eoy,
        payback_interp,
        column_pvs,
        annual,
    })
}

/// Everything produced by a formula-mode deterministic pass, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterministicRun {
    pub benefits: BenefitRun,
    pub cashflows: CashflowTable,
    pub result: AppraisalResult,
}

/// Baseline and KPI deltas, monetization, aggregation, discounting, NPV/BCR.
pub fn run_deterministic(
    model: &ValidatedModel,
    proj: &ProjectionSet,
    params: &BTreeMap<CountryId, BenefitParams>,
    drivers: &DriverMap,
    opts: &BenefitOptions,
    costs: &CostSchedule,
    d: &DiscountSpec,
) -> Result<DeterministicRun, AppraisalError> {
    let benefits = benefits_table(model, proj, params, drivers, opts)?;
    let cashflows = CashflowTable::new(benefits.table.clone(), costs.clone(), CashflowBasis::Nominal)?;
    let result = appraise(&cashflows, d)?;
    Ok(DeterministicRun {
        benefits,
        cashflows,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    fn axis2() -> TimeAxis {
        TimeAxis::new(2025, 2026, 2027).unwrap()
    }

    #[test]
    fn one_period_identity() {
        let axis = TimeAxis::new(2025, 2026, 2026).unwrap();
        let s = YearSeries::money(axis, vec![MoneyM(dec!(104))]).unwrap();
        let pv = discount_series(&s, &DiscountSpec::default(), CashflowBasis::Nominal).unwrap();
        assert_eq!(pv.value(), dec!(100));
    }

    #[test]
    fn two_flows() {
        let s = YearSeries::money(axis2(), vec![MoneyM(dec!(104)), MoneyM(dec!(108.16))]).unwrap();
        let pv = discount_series(&s, &DiscountSpec::default(), CashflowBasis::Nominal).unwrap();
        assert_eq!(pv.value(), dec!(200));
    }

    #[test]
    fn zero_rate_and_prediscounted_are_plain_sums() {
        let s = YearSeries::money(axis2(), vec![MoneyM(dec!(1.5)), MoneyM(dec!(2.25))]).unwrap();
        let zero = DiscountSpec::new(Decimal::ZERO, 2025).unwrap();
        assert_eq!(
            discount_series(&s, &zero, CashflowBasis::Nominal).unwrap().value(),
            dec!(3.75)
        );
        let basis = CashflowBasis::Discounted { rate: dec!(0.04) };
        assert_eq!(
            discount_series(&s, &DiscountSpec::default(), basis).unwrap().value(),
            dec!(3.75)
        );
    }

    #[test]
    fn rate_out_of_range() {
        assert!(matches!(
            DiscountSpec::new(dec!(0.5), 2025),
            Err(AppraisalError::RateOutOfRange(_))
        ));
    }
}
