//! The eight monetized benefit streams, per country and year.
//!
//! Formula mode evaluates each stream at the first axis year and carries it
//! forward with a growth index. Fixture mode takes an aggregate annual table
//! and splits it across countries.

pub mod hourly;
pub mod ledger;
pub mod params;
pub mod streams;

use std::collections::BTreeMap;
use std::fmt;

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{interpolate_scc, split_exact, CountryId, ModelError, MoneyM, TimeAxis, ValidatedModel, YearSeries};
use crate::projections::{build_driver, DriverIndex, DriverKind, ProjectionError, ProjectionSet};

pub use hourly::{diurnal_emission_delta, AncillaryProduct, HourlySeries, HourlyUnit, Resolution, RoetasHourly};
pub use ledger::{allocate_flexibility, Channel, FlexLedger, LedgerError};
pub use params::{BenefitParams, ParamError, PhysicalState, PollutantFactor};
pub use streams::{AecMode, MefInput, RoetasMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stream {
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
}

impl Stream {
    pub const ALL: [Stream; 8] = [
        Stream::Rod,
        Stream::Roetas,
        Stream::CsdrPlr,
        Stream::Aec,
        Stream::Fes,
        Stream::Gsms,
        Stream::Co2,
        Stream::Rap,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Stream::Rod => "ROD",
            Stream::Roetas => "ROETAS",
            Stream::CsdrPlr => "CSDR_PLR",
            Stream::Aec => "AEC",
            Stream::Fes => "FES",
            Stream::Gsms => "GSMS",
            Stream::Co2 => "CO2",
            Stream::Rap => "RAP",
        }
    }

    pub fn from_code(code: &str) -> Option<Stream> {
        Stream::ALL.into_iter().find(|s| s.code() == code)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Default growth index for formula mode.
    pub fn default_driver(self) -> DriverKind {
        match self {
            Stream::Aec => DriverKind::ResIndex,
            Stream::Roetas => DriverKind::Composite {
                fleet_weight: 0.5,
                res_weight: 0.5,
            },
            _ => DriverKind::FleetIndex,
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("mode input missing: {0}")]
    ModeInputMissing(&'static str),
    #[error("hourly inputs disagree in resolution")]
    MixedResolution,
    #[error("hourly series must have 24 or 8760 values, got {0}")]
    BadResolution(usize),
    #[error("hourly series contains a non-finite value")]
    NonFinite,
    #[error("shift is not energy-conserving: baseline {baseline} MWh vs shifted {shifted} MWh")]
    EnergyNotConserved { baseline: f64, shifted: f64 },
    #[error("no damage cost for pollutant {pollutant} in {country}")]
    MissingPollutantFactor { pollutant: String, country: String },
    #[error("no benefit parameters for {0}")]
    MissingParams(String),
    #[error("{country}: {source}")]
    Params { country: String, source: ParamError },
    #[error("{stream} in {country} {year} is not finite")]
    NonFiniteCell { stream: Stream, country: String, year: i32 },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// A measured indicator with and without the platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiDelta {
    pub kpi: String,
    pub baseline: f64,
    pub odp: f64,
    pub unit: String,
}

impl KpiDelta {
    pub fn new(kpi: impl Into<String>, baseline: f64, odp: f64, unit: impl Into<String>) -> Self {
        KpiDelta {
            kpi: kpi.into(),
            baseline,
            odp,
            unit: unit.into(),
        }
    }

    pub fn delta(&self) -> f64 {
        self.odp - self.baseline
    }
}

/// Monetized benefits per stream × country × year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamTable {
    axis: TimeAxis,
    countries: Vec<CountryId>,
    cells: Vec<MoneyM>,
}

impl StreamTable {
    pub fn zeros(axis: TimeAxis, countries: Vec<CountryId>) -> Self {
        let n = Stream::ALL.len() * countries.len() * axis.len();
        StreamTable {
            axis,
            countries,
            cells: vec![MoneyM::ZERO; n],
        }
    }

    fn idx(&self, s: Stream, c: usize, y: usize) -> usize {
        (s.index() * self.countries.len() + c) * self.axis.len() + y
    }

    fn country_idx(&self, c: &CountryId) -> Option<usize> {
        self.countries.iter().position(|x| x == c)
    }

    pub fn axis(&self) -> &TimeAxis {
        &self.axis
    }

    pub fn countries(&self) -> &[CountryId] {
        &self.countries
    }

    pub fn get(&self, s: Stream, country: &CountryId, year: i32) -> Option<MoneyM> {
        let c = self.country_idx(country)?;
        let y = self.axis.index_of(year)?;
        Some(self.cells[self.idx(s, c, y)])
    }

    pub fn set(&mut self, s: Stream, country: &CountryId, year: i32, v: MoneyM) -> Result<(), ModelError> {
        let c = self
            .country_idx(country)
            .ok_or_else(|| ModelError::UnknownCountry(country.0.clone()))?;
        let y = self.axis.index_of(year).ok_or(ModelError::YearOutOfAxis {
            year,
            first: self.axis.first_year,
            last: self.axis.last_year,
        })?;
        let i = self.idx(s, c, y);
        self.cells[i] = v;
        Ok(())
    }

    /// Annual values of one stream summed over countries.
    pub fn stream_series(&self, s: Stream) -> YearSeries<MoneyM> {
        YearSeries::from_fn(self.axis, |year| {
            let y = (year - self.axis.first_year) as usize;
            (0..self.countries.len()).map(|c| self.cells[self.idx(s, c, y)]).sum()
        })
    }

    pub fn country_stream_series(&self, s: Stream, country: &CountryId) -> Option<YearSeries<MoneyM>> {
        let c = self.country_idx(country)?;
        Some(YearSeries::from_fn(self.axis, |year| {
            self.cells[self.idx(s, c, (year - self.axis.first_year) as usize)]
        }))
    }

    /// Total over every stream and country, per year.
    pub fn annual_totals(&self) -> YearSeries<MoneyM> {
        YearSeries::from_fn(self.axis, |year| {
            Stream::ALL
                .iter()
                .map(|s| self.stream_series(*s).get(year).copied().unwrap_or(MoneyM::ZERO))
                .sum()
        })
    }

    pub fn stream_total(&self, s: Stream) -> MoneyM {
        self.stream_series(s).total()
    }

    pub fn country_total(&self, country: &CountryId) -> Option<MoneyM> {
        let c = self.country_idx(country)?;
        Some(
            Stream::ALL
                .iter()
                .flat_map(|s| (0..self.axis.len()).map(move |y| (*s, y)))
                .map(|(s, y)| self.cells[self.idx(s, c, y)])
                .sum(),
        )
    }

    pub fn total(&self) -> MoneyM {
        self.cells.iter().sum()
    }

    /// Restriction to a single country.
    pub fn for_country(&self, country: &CountryId) -> Option<StreamTable> {
        let c = self.country_idx(country)?;
        let mut out = StreamTable::zeros(self.axis, vec![country.clone()]);
        for s in Stream::ALL {
            for y in 0..self.axis.len() {
                let i = out.idx(s, 0, y);
                out.cells[i] = self.cells[self.idx(s, c, y)];
            }
        }
        Some(out)
    }

    /// Splits aggregate annual stream values across countries by `weights`
    /// with no rounding leakage: countries sum back to the aggregate exactly.
    pub fn split_aggregate(
        axis: TimeAxis,
        aggregate: &BTreeMap<Stream, YearSeries<MoneyM>>,
        weights: &[(CountryId, Decimal)],
    ) -> Result<StreamTable, ModelError> {
        let countries: Vec<CountryId> = weights.iter().map(|(c, _)| c.clone()).collect();
        let w: Vec<Decimal> = weights.iter().map(|(_, w)| *w).collect();
        let mut out = StreamTable::zeros(axis, countries.clone());
        for (s, series) in aggregate {
            if *series.axis() != axis {
                return Err(ModelError::SeriesLength {
                    expected: axis.len(),
                    got: series.values().len(),
                });
            }
            for (year, v) in series.iter() {
                for (c, part) in countries.iter().zip(split_exact(v.value(), &w)) {
                    out.set(*s, c, year, MoneyM(part))?;
                }
            }
        }
        Ok(out)
    }
}

/// Stream → growth index kind.
pub type DriverMap = BTreeMap<Stream, DriverKind>;

pub fn default_drivers() -> DriverMap {
    Stream::ALL.into_iter().map(|s| (s, s.default_driver())).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenefitOptions {
    pub ledger: bool,
    pub aec_mode: AecMode,
    pub roetas_mode: RoetasMode,
    pub roetas_hourly: BTreeMap<CountryId, RoetasHourly>,
    pub mef_hourly: BTreeMap<CountryId, HourlySeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiRecord {
    pub country: CountryId,
    pub stream: Stream,
    pub delta: KpiDelta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenefitRun {
    pub table: StreamTable,
    /// Base-year indicator deltas, in evaluation order.
    pub kpis: Vec<KpiRecord>,
    pub ledgers: BTreeMap<CountryId, FlexLedger>,
}

struct BaseYear {
    values: [f64; 8],
    kpis: Vec<(Stream, KpiDelta)>,
    ledger: Option<FlexLedger>,
}

fn to_dec(v: f64) -> Decimal {
    Decimal::from_f64(v.max(0.0)).unwrap_or(Decimal::ZERO)
}

fn base_year_values(
    p: &BenefitParams,
    s: &PhysicalState,
    country: &CountryId,
    scc: f64,
    mef: MefInput<'_>,
    opts: &BenefitOptions,
) -> Result<BaseYear, StreamError> {
    let hourly = opts.roetas_hourly.get(country);
    let aec_kpi = p
        .aec_delta_mwh
        .map(|d| KpiDelta::new("res_generation_gain", 0.0, d, "MWh"));

    let rod = streams::rod_annual(p);
    let mut roetas = streams::roetas_annual(p, s, opts.roetas_mode, hourly)?;
    let mut csdr = streams::csdr_plr_annual(p, s);
    let mut aec = streams::aec_annual(p, s, opts.aec_mode, aec_kpi.as_ref(), p.p_wholesale)?;
    let fes = streams::fes_annual(p, s.n_ev, s.n_et);
    let (mut gsms_energy, gsms_deferral) = streams::gsms_components(p, s.n_ev, s.n_et, s.c_res_mw);
    let co2 = streams::co2_annual(p, s, scc, mef);
    let rap = streams::rap_annual(p, s, country)?;

    // Physical quantities with and without the platform, for the audit trail.
    let q = |p: &BenefitParams| -> Result<[f64; 8], StreamError> {
        let roetas_q = match opts.roetas_mode {
            RoetasMode::Proxy => streams::roetas_proxy_volume(p, s),
            RoetasMode::Hourly => 0.0,
        };
        let aec_kpi = p
            .aec_delta_mwh
            .map(|d| KpiDelta::new("res_generation_gain", 0.0, d, "MWh"));
        let aec_q = streams::aec_volume(p, s, opts.aec_mode, aec_kpi.as_ref())?;
        let (shift, peak) = streams::csdr_volumes(p, s);
        Ok([
            streams::rod_annual(p),
            roetas_q,
            shift + peak,
            aec_q,
            streams::fes_annual(p, s.n_ev, s.n_et) * 1e6,
            streams::gsms_volume(p, s),
            streams::co2_tonnes(p, s, mef),
            streams::rap_masses(p, s).iter().map(|(_, kg)| kg).sum(),
        ])
    };
    let (mut with, mut without) = (q(p)?, q(&p.without_odp_effects())?);
    if let (RoetasMode::Hourly, Some(h)) = (opts.roetas_mode, hourly) {
        let scale = h.resolution()?.annualization();
        without[Stream::Roetas.index()] = h.q_flex_base.sum() * scale;
        with[Stream::Roetas.index()] = h.q_flex_odp.sum() * scale;
    }
    const KPI: [(&str, &str); 8] = [
        ("avoided_downtime_cost", "MEUR"),
        ("arbitrage_energy", "MWh"),
        ("shifted_energy", "MWh"),
        ("avoided_curtailment", "MWh"),
        ("fleet_operating_savings", "EUR"),
        ("stabilized_fleet_energy", "MWh"),
        ("avoided_co2", "tCO2"),
        ("avoided_pollutants", "kg"),
    ];
    let kpis = Stream::ALL
        .iter()
        .zip(KPI)
        .enumerate()
        .map(|(i, (s, (name, unit)))| (*s, KpiDelta::new(name, without[i], with[i], unit)))
        .collect();

    let ledger = if opts.ledger {
        let budget = p.flex_budget_mwh.unwrap_or(s.e_ev(p) + s.e_et(p));
        let demands = [
            with[Stream::Gsms.index()],
            with[Stream::Aec.index()],
            with[Stream::Roetas.index()] - without[Stream::Roetas.index()],
            with[Stream::CsdrPlr.index()],
        ];
        let l = allocate_flexibility(to_dec(budget), demands.map(to_dec))?;
        let cover = |c: Channel| l.coverage(c).to_f64().unwrap_or(1.0);
        gsms_energy *= cover(Channel::ReliabilityCongestion);
        aec *= cover(Channel::ResAbsorption);
        roetas *= cover(Channel::MarketArbitrage);
        csdr *= cover(Channel::ResidualDr);
        Some(l)
    } else {
        None
    };

    Ok(BaseYear {
        values: [rod, roetas, csdr, aec, fes, gsms_energy + gsms_deferral, co2, rap],
        kpis,
        ledger,
    })
}

/// Formula-mode benefit table: base-year value of each stream times its growth index.
/// The CO₂ stream additionally follows the SCC trajectory relative to the first year.
pub fn benefits_table(
    model: &ValidatedModel,
    proj: &ProjectionSet,
    params: &BTreeMap<CountryId, BenefitParams>,
    drivers: &DriverMap,
    opts: &BenefitOptions,
) -> Result<BenefitRun, StreamError> {
    let axis = *model.axis();
    let first = axis.first_year;
    let mut table = StreamTable::zeros(axis, model.country_ids());
    let mut kpis = Vec::new();
    let mut ledgers = BTreeMap::new();

    for a in model.countries() {
        let id = &a.country.id;
        let p = params.get(id).ok_or_else(|| StreamError::MissingParams(id.0.clone()))?;
        p.validate().map_err(|source| StreamError::Params {
            country: id.0.clone(),
            source,
        })?;
        let cp = proj.country(id)?;
        let at_first = |s: &YearSeries| s.get(first).copied().unwrap_or(0.0);
        let state = PhysicalState::from_projection(
            p,
            at_first(&cp.ev_stock),
            at_first(&cp.et_stock),
            at_first(&cp.res_capacity),
        );
        let scc0 = interpolate_scc(a, &axis, first)?;
        let mef = match opts.mef_hourly.get(id) {
            Some(h) => MefInput::Hourly(h),
            None => MefInput::Scalar(p.mef_co2.unwrap_or(a.grid_co2_intensity_0 / 1000.0)),
        };
        let base = base_year_values(p, &state, id, scc0, mef, opts)?;
        kpis.extend(base.kpis.into_iter().map(|(stream, delta)| KpiRecord {
            country: id.clone(),
            stream,
            delta,
        }));
        if let Some(l) = base.ledger {
            ledgers.insert(id.clone(), l);
        }

        let mut indices: BTreeMap<DriverKindKey, DriverIndex> = BTreeMap::new();
        for s in Stream::ALL {
            let kind = drivers.get(&s).copied().unwrap_or_else(|| s.default_driver());
            let key = DriverKindKey::from(kind);
            if !indices.contains_key(&key) {
                indices.insert(key.clone(), build_driver(kind, proj, id)?);
            }
            let driver = &indices[&key];
            for year in axis.years() {
                let mut v = base.values[s.index()] * driver.at(year);
                if s == Stream::Co2 && scc0 > 0.0 {
                    v *= interpolate_scc(a, &axis, year)? / scc0;
                }
                let m = MoneyM::from_f64(v).map_err(|_| StreamError::NonFiniteCell {
                    stream: s,
                    country: id.0.clone(),
                    year,
                })?;
                table.set(s, id, year, m)?;
            }
        }
    }
    Ok(BenefitRun { table, kpis, ledgers })
}

/// Orderable key for caching driver indices per kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct DriverKindKey(String);

impl From<DriverKind> for DriverKindKey {
    fn from(k: DriverKind) -> Self {
        DriverKindKey(format!("{k:?}"))
    }
}
