//! Core domain types: countries, the appraisal time axis, money, per-country
//! assumptions and their validation.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Decimal places kept by [`MoneyM`] when converting from floating point (1e-9 M€ = 0.001 €).
pub const MONEY_DP: u32 = 9;

/// Short country code such as `"AT"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountryId(pub String);

impl CountryId {
    pub fn new(code: impl Into<String>) -> Self {
        CountryId(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CountryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Country {
    pub id: CountryId,
    pub name: String,
}

/// Appraisal window. Cash flows fall in `first_year..=last_year` and are
/// discounted to `base_year` with the end-of-year convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeAxis {
    pub base_year: i32,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for TimeAxis {
    fn default() -> Self {
        TimeAxis {
            base_year: 2025,
            first_year: 2026,
            last_year: 2035,
        }
    }
}

impl TimeAxis {
    pub fn new(base_year: i32, first_year: i32, last_year: i32) -> Result<Self, ModelError> {
        let axis = TimeAxis {
            base_year,
            first_year,
            last_year,
        };
        axis.check()?;
        Ok(axis)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.base_year < self.first_year && self.first_year <= self.last_year {
            Ok(())
        } else {
            Err(ModelError::InvalidAxis(*self))
        }
    }

    pub fn len(&self) -> usize {
        (self.last_year - self.first_year + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.last_year < self.first_year
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + Clone {
        self.first_year..=self.last_year
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first_year..=self.last_year).contains(&year)
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        self.contains(year).then(|| (year - self.first_year) as usize)
    }

    pub fn year_at(&self, idx: usize) -> i32 {
        self.first_year + idx as i32
    }
}

/// Millions of constant-2025 euros, held as an exact decimal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MoneyM(pub Decimal);

impl MoneyM {
    pub const ZERO: MoneyM = MoneyM(Decimal::ZERO);

    pub fn new(value: Decimal) -> Self {
        MoneyM(value)
    }

    /// Quantizes a floating-point amount to [`MONEY_DP`] places. Non-finite input is rejected.
    pub fn from_f64(value: f64) -> Result<Self, ModelError> {
        Decimal::from_f64(value)
            .map(|d| MoneyM(d.round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven)))
            .ok_or(ModelError::NonFiniteMoney(value))
    }

    pub fn value(self) -> Decimal {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn quantized(self) -> Self {
        MoneyM(
            self.0
                .round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven),
        )
    }

    pub fn abs(self) -> Self {
        MoneyM(self.0.abs())
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    /// Rounded to `dp` decimal places, half away from zero, for presentation.
    pub fn round_display(self, dp: u32) -> Decimal {
        self.0
            .round_dp_with_strategy(dp, RoundingStrategy::MidpointAwayFromZero)
    }
}

impl fmt::Display for MoneyM {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl Add for MoneyM {
    type Output = MoneyM;
    fn add(self, rhs: MoneyM) -> MoneyM {
        MoneyM(self.0 + rhs.0)
    }
}

impl AddAssign for MoneyM {
    fn add_assign(&mut self, rhs: MoneyM) {
        self.0 += rhs.0;
    }
}

impl Sub for MoneyM {
    type Output = MoneyM;
    fn sub(self, rhs: MoneyM) -> MoneyM {
        MoneyM(self.0 - rhs.0)
    }
}

impl SubAssign for MoneyM {
    fn sub_assign(&mut self, rhs: MoneyM) {
        self.0 -= rhs.0;
    }
}

impl Neg for MoneyM {
    type Output = MoneyM;
    fn neg(self) -> MoneyM {
        MoneyM(-self.0)
    }
}

impl Mul<Decimal> for MoneyM {
    type Output = MoneyM;
    fn mul(self, rhs: Decimal) -> MoneyM {
        MoneyM(self.0 * rhs)
    }
}

impl Sum for MoneyM {
    fn sum<I: Iterator<Item = MoneyM>>(iter: I) -> MoneyM {
        iter.fold(MoneyM::ZERO, |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a MoneyM> for MoneyM {
    fn sum<I: Iterator<Item = &'a MoneyM>>(iter: I) -> MoneyM {
        iter.fold(MoneyM::ZERO, |acc, x| acc + *x)
    }
}

/// One value per axis year. The unit is carried by context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSeries<T = f64> {
    axis: TimeAxis,
    values: Vec<T>,
}

impl<T: Clone> YearSeries<T> {
    pub fn filled(axis: TimeAxis, value: T) -> Self {
        YearSeries {
            axis,
            values: vec![value; axis.len()],
        }
    }
}

impl<T> YearSeries<T> {
    pub fn from_fn(axis: TimeAxis, mut f: impl FnMut(i32) -> T) -> Self {
        YearSeries {
            axis,
            values: axis.years().map(&mut f).collect(),
        }
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, year: i32) -> Option<&T> {
        self.axis.index_of(year).map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &T)> {
        self.axis.years().zip(self.values.iter())
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> YearSeries<U> {
        YearSeries {
            axis: self.axis,
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl YearSeries<f64> {
    pub fn new(axis: TimeAxis, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != axis.len() {
            return Err(ModelError::SeriesLength {
                expected: axis.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteValue(*v));
        }
        Ok(YearSeries { axis, values })
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }
}

impl YearSeries<MoneyM> {
    pub fn money(axis: TimeAxis, values: Vec<MoneyM>) -> Result<Self, ModelError> {
        if values.len() != axis.len() {
            return Err(ModelError::SeriesLength {
                expected: axis.len(),
                got: values.len(),
            });
        }
        Ok(YearSeries { axis, values })
    }

    pub fn zeros(axis: TimeAxis) -> Self {
        YearSeries::filled(axis, MoneyM::ZERO)
    }

    pub fn total(&self) -> MoneyM {
        self.values.iter().sum()
    }
}

/// Per-country baseline stocks, growth rates, prices and carbon valuations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountryAssumptions {
    pub country: Country,
    /// Thousands of EVs in `first_year`.
    pub ev_stock_0: f64,
    pub ev_cagr: f64,
    /// Thousands of electric trucks in `first_year`.
    pub et_stock_0: f64,
    pub et_cagr: f64,
    /// GW installed solar and wind in `first_year`.
    pub res_capacity_0: f64,
    /// MW added per year.
    pub res_addition: f64,
    /// €/kWh.
    pub retail_price_ev: f64,
    /// gCO₂/kWh.
    pub grid_co2_intensity_0: f64,
    /// Value of lost load, €/kWh. Carried for reporting; no valuation formula consumes it.
    pub voll: f64,
    /// €/tCO₂ at `first_year`.
    pub scc_start: f64,
    /// €/tCO₂ at `last_year`.
    pub scc_end: f64,
    pub cost_share: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("country set is empty")]
    EmptyCountrySet,
    #[error("duplicate or empty country id `{0}`")]
    BadCountryId(String),
    #[error("{country}: {field} is negative ({value})")]
    NegativeStock {
        country: String,
        field: &'static str,
        value: f64,
    },
    #[error("{country}: {field} = {value} outside (-1, 1)")]
    CagrOutOfRange {
        country: String,
        field: &'static str,
        value: f64,
    },
    #[error("{country}: {field} is not finite")]
    NonFinite { country: String, field: &'static str },
    #[error("{country}: {field} is negative ({value})")]
    NegativeValue {
        country: String,
        field: &'static str,
        value: f64,
    },
    #[error("{country}: scc_start {start} exceeds scc_end {end}")]
    SccDecreasing { country: String, start: f64, end: f64 },
    #[error("cost shares sum to {sum}, expected 1")]
    CostSharesNotUnit { sum: f64 },
    #[error("invalid time axis {0:?}")]
    InvalidAxis(TimeAxis),
}

/// All violations found by [`validate_assumptions`].
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} validation error(s): {}", .0.len(), join_errors(.0))]
pub struct ValidationErrors(pub Vec<ValidationError>);

fn join_errors(errs: &[ValidationError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("year {year} outside axis {first}..={last}")]
    YearOutOfAxis { year: i32, first: i32, last: i32 },
    #[error("invalid time axis {0:?}")]
    InvalidAxis(TimeAxis),
    #[error("series has {got} values, axis needs {expected}")]
    SeriesLength { expected: usize, got: usize },
    #[error("non-finite value {0}")]
    NonFiniteValue(f64),
    #[error("non-finite money amount {0}")]
    NonFiniteMoney(f64),
    #[error("unknown country `{0}`")]
    UnknownCountry(String),
}

/// Assumptions that passed [`validate_assumptions`]. Immutable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedModel {
    axis: TimeAxis,
    countries: Vec<CountryAssumptions>,
}

impl ValidatedModel {
    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn countries(&self) -> &[CountryAssumptions] {
        &self.countries
    }

    pub fn country_ids(&self) -> Vec<CountryId> {
        self.countries.iter().map(|c| c.country.id.clone()).collect()
    }

    pub fn country(&self, id: &CountryId) -> Result<&CountryAssumptions, ModelError> {
        self.countries
            .iter()
            .find(|c| &c.country.id == id)
            .ok_or_else(|| ModelError::UnknownCountry(id.0.clone()))
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            axis: self.axis,
            countries: self.countries.clone(),
        }
    }
}

/// External form of a model, as stored in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default)]
    pub axis: TimeAxis,
    pub countries: Vec<CountryAssumptions>,
}

impl ModelDocument {
    pub fn validate(self) -> Result<ValidatedModel, ValidationErrors> {
        validate_assumptions(self.countries, self.axis)
    }
}

/// Checks every invariant and returns either the model or every violation found.
pub fn validate_assumptions(doc: Vec<CountryAssumptions>, axis: TimeAxis) -> Result<ValidatedModel, ValidationErrors> {
    let mut errs = Vec::new();
    if axis.check().is_err() {
        errs.push(ValidationError::InvalidAxis(axis));
    }
    if doc.is_empty() {
        errs.push(ValidationError::EmptyCountrySet);
    }
    let mut seen = std::collections::BTreeSet::new();
    for a in &doc {
        let id = a.country.id.as_str();
        if id.is_empty() || !seen.insert(id.to_string()) {
            errs.push(ValidationError::BadCountryId(id.to_string()));
        }
        let fields: [(&'static str, f64); 12] = [
            ("ev_stock_0", a.ev_stock_0),
            ("ev_cagr", a.ev_cagr),
            ("et_stock_0", a.et_stock_0),
            ("et_cagr", a.et_cagr),
            ("res_capacity_0", a.res_capacity_0),
            ("res_addition", a.res_addition),
            ("retail_price_ev", a.retail_price_ev),
            ("grid_co2_intensity_0", a.grid_co2_intensity_0),
            ("voll", a.voll),
            ("scc_start", a.scc_start),
            ("scc_end", a.scc_end),
            ("cost_share", a.cost_share),
        ];
        let mut finite = true;
        for (field, v) in fields {
            if !v.is_finite() {
                finite = false;
                errs.push(ValidationError::NonFinite {
                    country: id.to_string(),
                    field,
                });
            }
        }
        if !finite {
            continue;
        }
        for (field, v) in [
            ("ev_stock_0", a.ev_stock_0),
            ("et_stock_0", a.et_stock_0),
            ("res_capacity_0", a.res_capacity_0),
        ] {
            if v < 0.0 {
                errs.push(ValidationError::NegativeStock {
                    country: id.to_string(),
                    field,
                    value: v,
                });
            }
        }
        for (field, v) in [("ev_cagr", a.ev_cagr), ("et_cagr", a.et_cagr)] {
            if !(v > -1.0 && v < 1.0) {
                errs.push(ValidationError::CagrOutOfRange {
                    country: id.to_string(),
                    field,
                    value: v,
                });
            }
        }
        for (field, v) in [
            ("retail_price_ev", a.retail_price_ev),
            ("grid_co2_intensity_0", a.grid_co2_intensity_0),
            ("voll", a.voll),
            ("scc_start", a.scc_start),
            ("cost_share", a.cost_share),
        ] {
            if v < 0.0 {
                errs.push(ValidationError::NegativeValue {
                    country: id.to_string(),
                    field,
                    value: v,
                });
            }
        }
        if a.scc_start > a.scc_end {
            errs.push(ValidationError::SccDecreasing {
                country: id.to_string(),
                start: a.scc_start,
                end: a.scc_end,
            });
        }
    }
    if !doc.is_empty() {
        let sum: f64 = doc.iter().map(|a| a.cost_share).sum();
        if sum.is_finite() && (sum - 1.0).abs() > 1e-9 {
            errs.push(ValidationError::CostSharesNotUnit { sum });
        }
    }
    if errs.is_empty() {
        Ok(ValidatedModel { axis, countries: doc })
    } else {
        Err(ValidationErrors(errs))
    }
}

/// Splits `total` by `weights` (normalized by their sum). Every part except the
/// last is quantized to [`MONEY_DP`] places; the last takes the remainder so the
/// parts always add back to `total` exactly.
pub fn split_exact(total: Decimal, weights: &[Decimal]) -> Vec<Decimal> {
    let sum: Decimal = weights.iter().copied().sum();
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n);
    let mut assigned = Decimal::ZERO;
    for w in &weights[..n - 1] {
        let part = if sum.is_zero() {
            Decimal::ZERO
        } else {
            (total * *w / sum).round_dp_with_strategy(MONEY_DP, RoundingStrategy::MidpointNearestEven)
        };
        assigned += part;
        out.push(part);
    }
    out.push(total - assigned);
    out
}

/// Social cost of carbon in `year`, linear between the axis endpoints.
pub fn interpolate_scc(a: &CountryAssumptions, axis: &TimeAxis, year: i32) -> Result<f64, ModelError> {
    if !axis.contains(year) {
        return Err(ModelError::YearOutOfAxis {
            year,
            first: axis.first_year,
            last: axis.last_year,
        });
    }
    if year == axis.last_year {
        return Ok(a.scc_end);
    }
    if axis.last_year == axis.first_year {
        return Ok(a.scc_start);
    }
    let frac = f64::from(year - axis.first_year) / f64::from(axis.last_year - axis.first_year);
    Ok(a.scc_start + (a.scc_end - a.scc_start) * frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn at() -> CountryAssumptions {
        CountryAssumptions {
            country: Country {
                id: CountryId::new("AT"),
                name: "Austria".into(),
            },
            ev_stock_0: 343.8,
            ev_cagr: 0.16,
            et_stock_0: 4.4,
            et_cagr: 0.13,
            res_capacity_0: 10.5,
            res_addition: 664.0,
            retail_price_ev: 0.22,
            grid_co2_intensity_0: 120.0,
            voll: 10.0,
            scc_start: 85.0,
            scc_end: 120.0,
            cost_share: 1.0,
        }
    }

    #[test]
    fn scc_endpoints_and_midpoint() {
        let axis = TimeAxis::default();
        let a = at();
        assert_eq!(interpolate_scc(&a, &axis, 2026).unwrap(), 85.0);
        assert_eq!(interpolate_scc(&a, &axis, 2035).unwrap(), 120.0);
        let oracle = 85.0 + 35.0 * 4.0 / 9.0;
        assert!((interpolate_scc(&a, &axis, 2030).unwrap() - oracle).abs() < 1e-12);
        assert!(matches!(
            interpolate_scc(&a, &axis, 2036),
            Err(ModelError::YearOutOfAxis { .. })
        ));
    }

    #[test]
    fn collects_every_violation() {
        let mut a = at();
        a.ev_cagr = -1.5;
        a.et_stock_0 = -1.0;
        a.cost_share = 0.5;
        let errs = validate_assumptions(vec![a], TimeAxis::default()).unwrap_err().0;
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn empty_set_rejected() {
        let errs = validate_assumptions(vec![], TimeAxis::default()).unwrap_err().0;
        assert_eq!(errs, vec![ValidationError::EmptyCountrySet]);
    }

    #[test]
    fn money_quantizes_to_nine_places() {
        let m = MoneyM::from_f64(24.2 * 1.15 * 0.13).unwrap();
        assert_eq!(m.value(), Decimal::new(36179, 4));
        assert!(MoneyM::from_f64(f64::NAN).is_err());
    }
}
