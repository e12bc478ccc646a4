//! Sub-annual profiles: a representative day (24 values) or a full year (8760).

use serde::{Deserialize, Serialize};

use super::StreamError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HourlyUnit {
    Mw,
    Mwh,
    EurPerMwh,
    Eur,
    TCo2PerMwh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Daily24,
    Annual8760,
}

impl Resolution {
    /// Factor turning a sum over the profile into an annual sum.
    pub fn annualization(self) -> f64 {
        match self {
            Resolution::Daily24 => 365.0,
            Resolution::Annual8760 => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHourly", into = "RawHourly")]
pub struct HourlySeries {
    unit: HourlyUnit,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHourly {
    unit: HourlyUnit,
    values: Vec<f64>,
}

impl TryFrom<RawHourly> for HourlySeries {
    type Error = StreamError;
    fn try_from(raw: RawHourly) -> Result<Self, Self::Error> {
        HourlySeries::new(raw.unit, raw.values)
    }
}

impl From<HourlySeries> for RawHourly {
    fn from(h: HourlySeries) -> Self {
        RawHourly {
            unit: h.unit,
            values: h.values,
        }
    }
}

impl HourlySeries {
    pub fn new(unit: HourlyUnit, values: Vec<f64>) -> Result<Self, StreamError> {
        if values.len() != 24 && values.len() != 8760 {
            return Err(StreamError::BadResolution(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StreamError::NonFinite);
        }
        Ok(HourlySeries { unit, values })
    }

    pub fn flat(unit: HourlyUnit, resolution: Resolution, value: f64) -> Result<Self, StreamError> {
        let n = match resolution {
            Resolution::Daily24 => 24,
            Resolution::Annual8760 => 8760,
        };
        HourlySeries::new(unit, vec![value; n])
    }

    pub fn resolution(&self) -> Resolution {
        if self.values.len() == 24 {
            Resolution::Daily24
        } else {
            Resolution::Annual8760
        }
    }

    pub fn unit(&self) -> HourlyUnit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        neumaier_sum(self.values.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }
}

/// Compensated summation; exact for a constant profile of modest length.
pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn same_resolution(series: &[&HourlySeries]) -> Result<Resolution, StreamError> {
    let first = series[0].resolution();
    if series.iter().any(|s| s.resolution() != first) {
        return Err(StreamError::MixedResolution);
    }
    Ok(first)
}

/// Emissions avoided by moving load between hours, tCO₂ per profile period.
/// Hours are one hour long, so MW and MWh coincide per step.
pub fn diurnal_emission_delta(
    baseline: &HourlySeries,
    shifted: &HourlySeries,
    mef: &HourlySeries,
) -> Result<f64, StreamError> {
    same_resolution(&[baseline, shifted, mef])?;
    let (b, s) = (baseline.sum(), shifted.sum());
    if (b - s).abs() > 1e-6 {
        return Err(StreamError::EnergyNotConserved {
            baseline: b,
            shifted: s,
        });
    }
    Ok(neumaier_sum(
        baseline
            .values
            .iter()
            .zip(&shifted.values)
            .zip(&mef.values)
            .map(|((b, s), m)| (b - s) * m),
    ))
}

/// One ancillary-service product, hourly revenue and cost in € with and without ODP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaryProduct {
    pub name: String,
    pub revenue_odp: HourlySeries,
    pub cost_odp: HourlySeries,
    pub revenue_base: HourlySeries,
    pub cost_base: HourlySeries,
}

/// Hourly inputs for the trading-and-ancillary stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoetasHourly {
    /// MWh shifted per hour.
    pub q_flex_odp: HourlySeries,
    /// €/MWh realized spread.
    pub spread_odp: HourlySeries,
    pub q_flex_base: HourlySeries,
    pub spread_base: HourlySeries,
    #[serde(default)]
    pub ancillary: Vec<AncillaryProduct>,
}

impl RoetasHourly {
    pub(crate) fn resolution(&self) -> Result<Resolution, StreamError> {
        let mut all = vec![&self.q_flex_odp, &self.spread_odp, &self.q_flex_base, &self.spread_base];
        for a in &self.ancillary {
            all.extend([&a.revenue_odp, &a.cost_odp, &a.revenue_base, &a.cost_base]);
        }
        same_resolution(&all)
    }

    /// Annual flexible energy shifted with ODP, MWh.
    pub fn annual_flex_mwh(&self) -> Result<f64, StreamError> {
        Ok(self.q_flex_odp.sum() * self.resolution()?.annualization())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(unit: HourlyUnit, f: impl Fn(usize) -> f64) -> HourlySeries {
        HourlySeries::new(unit, (0..24).map(f).collect()).unwrap()
    }

    #[test]
    fn shifting_to_cleaner_hour() {
        let base = day(HourlyUnit::Mw, |h| if h == 18 { 10.0 } else { 0.0 });
        let shifted = day(HourlyUnit::Mw, |h| if h == 3 { 10.0 } else { 0.0 });
        let mef = day(HourlyUnit::TCo2PerMwh, |h| match h {
            18 => 0.28,
            3 => 0.10,
            _ => 0.2,
        });
        let d = diurnal_emission_delta(&base, &shifted, &mef).unwrap();
        assert!((d - 1.8).abs() < 1e-12);
    }

    #[test]
    fn flat_mef_gives_zero() {
        let base = day(HourlyUnit::Mw, |h| h as f64);
        let shifted = day(HourlyUnit::Mw, |h| (23 - h) as f64);
        let mef = HourlySeries::flat(HourlyUnit::TCo2PerMwh, Resolution::Daily24, 0.19).unwrap();
        assert!(diurnal_emission_delta(&base, &shifted, &mef).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unbalanced_shift_rejected() {
        let base = day(HourlyUnit::Mw, |_| 1.0);
        let shifted = day(HourlyUnit::Mw, |_| 2.0);
        let mef = day(HourlyUnit::TCo2PerMwh, |_| 0.1);
        assert!(matches!(
            diurnal_emission_delta(&base, &shifted, &mef),
            Err(StreamError::EnergyNotConserved { .. })
        ));
    }

    #[test]
    fn mixed_resolution_rejected() {
        let base = day(HourlyUnit::Mw, |_| 1.0);
        let long = HourlySeries::flat(HourlyUnit::Mw, Resolution::Annual8760, 1.0).unwrap();
        let mef = day(HourlyUnit::TCo2PerMwh, |_| 0.1);
        assert_eq!(
            diurnal_emission_delta(&base, &long, &mef),
            Err(StreamError::MixedResolution)
        );
    }

    #[test]
    fn bad_length_rejected() {
        assert!(HourlySeries::new(HourlyUnit::Mw, vec![0.0; 25]).is_err());
    }
}
