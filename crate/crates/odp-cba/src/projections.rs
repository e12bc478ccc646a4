//! EV/ET stock and RES capacity trajectories, plus the growth indices used to
//! carry base-year benefit values forward in time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CountryId, TimeAxis, ValidatedModel, YearSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error("growth rate {0} outside (-1, 1)")]
    CagrOutOfRange(f64),
    #[error("negative starting value {0}")]
    NegativeStart(f64),
    #[error("{country}: first-year base of {kind:?} driver is zero")]
    ZeroBaseStock { country: String, kind: DriverKind },
    #[error("no projections for country `{0}`")]
    UnknownCountry(String),
    #[error("invalid composite weights ({fleet}, {res})")]
    BadWeights { fleet: f64, res: f64 },
    #[error("fixture override for {country} covers a different axis")]
    AxisMismatch { country: String },
}

/// `stock_0 · (1 + cagr)^(year − first_year)`, in the units of `stock_0`.
pub fn project_stock(stock_0: f64, cagr: f64, axis: &TimeAxis) -> Result<YearSeries, ProjectionError> {
    if !(cagr > -1.0 && cagr < 1.0) {
        return Err(ProjectionError::CagrOutOfRange(cagr));
    }
    if stock_0 < 0.0 || !stock_0.is_finite() {
        return Err(ProjectionError::NegativeStart(stock_0));
    }
    let g = 1.0 + cagr;
    Ok(YearSeries::from_fn(*axis, |y| stock_0 * g.powi(y - axis.first_year)))
}

/// `capacity_0 + addition/1000 · (year − first_year)`; capacity in GW, addition in MW/yr.
pub fn project_res(capacity_0: f64, addition_mw: f64, axis: &TimeAxis) -> Result<YearSeries, ProjectionError> {
    if capacity_0 < 0.0 || !capacity_0.is_finite() {
        return Err(ProjectionError::NegativeStart(capacity_0));
    }
    let step = addition_mw / 1000.0;
    Ok(YearSeries::from_fn(*axis, |y| {
        (capacity_0 + step * f64::from(y - axis.first_year)).max(0.0)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSource {
    Generated,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryProjection {
    /// Thousands of vehicles.
    pub ev_stock: YearSeries,
    /// Thousands of vehicles.
    pub et_stock: YearSeries,
    /// GW.
    pub res_capacity: YearSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSet {
    axis: TimeAxis,
    source: ProjectionSource,
    by_country: BTreeMap<CountryId, CountryProjection>,
}

impl ProjectionSet {
    /// Projects every country of the model from its growth assumptions.
    pub fn generate(model: &ValidatedModel) -> Result<Self, ProjectionError> {
        let axis = *model.axis();
        let mut by_country = BTreeMap::new();
        for a in model.countries() {
            by_country.insert(
                a.country.id.clone(),
                CountryProjection {
                    ev_stock: project_stock(a.ev_stock_0, a.ev_cagr, &axis)?,
                    et_stock: project_stock(a.et_stock_0, a.et_cagr, &axis)?,
                    res_capacity: project_res(a.res_capacity_0, a.res_addition, &axis)?,
                },
            );
        }
        Ok(ProjectionSet {
            axis,
            source: ProjectionSource::Generated,
            by_country,
        })
    }

    /// Builds a set from explicit series, e.g. fixture tables.
    pub fn from_series(
        axis: TimeAxis,
        by_country: BTreeMap<CountryId, CountryProjection>,
    ) -> Result<Self, ProjectionError> {
        for (c, p) in &by_country {
            if *p.ev_stock.axis() != axis || *p.et_stock.axis() != axis || *p.res_capacity.axis() != axis {
                return Err(ProjectionError::AxisMismatch { country: c.0.clone() });
            }
        }
        Ok(ProjectionSet {
            axis,
            source: ProjectionSource::Fixture,
            by_country,
        })
    }

    /// Replaces the series of every country present in `fixture`, cell for cell.
    pub fn with_override(mut self, fixture: &ProjectionSet) -> Result<Self, ProjectionError> {
        for (c, p) in &fixture.by_country {
            if fixture.axis != self.axis {
                return Err(ProjectionError::AxisMismatch { country: c.0.clone() });
            }
            self.by_country.insert(c.clone(), p.clone());
        }
        self.source = ProjectionSource::Fixture;
        Ok(self)
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn source(&self) -> ProjectionSource {
        self.source
    }

    pub fn countries(&self) -> impl Iterator<Item = &CountryId> {
        self.by_country.keys()
    }

    pub fn country(&self, id: &CountryId) -> Result<&CountryProjection, ProjectionError> {
        self.by_country
            .get(id)
            .ok_or_else(|| ProjectionError::UnknownCountry(id.0.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CountryId, &CountryProjection)> {
        self.by_country.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DriverKind {
    FleetIndex,
    ResIndex,
    /// Weighted geometric mean of the fleet and RES indices.
    Composite {
        fleet_weight: f64,
        res_weight: f64,
    },
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriverIndex {
    pub kind: DriverKind,
    pub series: YearSeries,
}

impl DriverIndex {
    pub fn at(&self, year: i32) -> f64 {
        self.series.get(year).copied().unwrap_or(1.0)
    }
}

fn normalized(series: &YearSeries, country: &CountryId, kind: DriverKind) -> Result<YearSeries, ProjectionError> {
    let base = series.first();
    if base <= 0.0 {
        return Err(ProjectionError::ZeroBaseStock {
            country: country.0.clone(),
            kind,
        });
    }
    Ok(series.map(|v| v / base))
}

/// Growth index for one country, exactly 1.0 at `first_year`.
pub fn build_driver(
    kind: DriverKind,
    proj: &ProjectionSet,
    country: &CountryId,
) -> Result<DriverIndex, ProjectionError> {
    let p = proj.country(country)?;
    let fleet = || {
        let total = YearSeries::from_fn(proj.axis, |y| {
            p.ev_stock.get(y).copied().unwrap_or(0.0) + p.et_stock.get(y).copied().unwrap_or(0.0)
        });
        normalized(&total, country, kind)
    };
    let res = || normalized(&p.res_capacity, country, kind);
    let series = match kind {
        DriverKind::Flat => YearSeries::filled(proj.axis, 1.0),
        DriverKind::FleetIndex => fleet()?,
        DriverKind::ResIndex => res()?,
        DriverKind::Composite {
            fleet_weight,
            res_weight,
        } => {
            let total = fleet_weight + res_weight;
            if fleet_weight < 0.0 || res_weight < 0.0 || !(total > 0.0) || !total.is_finite() {
                return Err(ProjectionError::BadWeights {
                    fleet: fleet_weight,
                    res: res_weight,
                });
            }
            let (wf, wr) = (fleet_weight / total, res_weight / total);
            if wr == 0.0 {
                fleet()?
            } else if wf == 0.0 {
                res()?
            } else {
                let (f, r) = (fleet()?, res()?);
                YearSeries::from_fn(proj.axis, |y| {
                    let (a, b) = (f.get(y).copied().unwrap_or(1.0), r.get(y).copied().unwrap_or(1.0));
                    if y == proj.axis.first_year {
                        1.0
                    } else {
                        a.powf(wf) * b.powf(wr)
                    }
                })
            }
        }
    };
    Ok(DriverIndex { kind, series })
}
