//! Valuation parameters for the eight benefit streams.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CountryId;

/// Per-pollutant factors for the air-pollutant stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollutantFactor {
    pub name: String,
    /// kg per MWh of displaced generation.
    pub ef_kg_per_mwh: f64,
    /// €/kg applied to countries without an explicit entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_damage: Option<f64>,
    /// €/kg by country.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub damage_eur_per_kg: BTreeMap<CountryId, f64>,
}

impl PollutantFactor {
    pub fn damage_for(&self, country: &CountryId) -> Option<f64> {
        self.damage_eur_per_kg.get(country).copied().or(self.default_damage)
    }
}

fn placeholder_pollutants() -> Vec<PollutantFactor> {
    let mk = |name: &str, ef: f64, damage: f64| PollutantFactor {
        name: name.to_string(),
        ef_kg_per_mwh: ef,
        default_damage: Some(damage),
        damage_eur_per_kg: BTreeMap::new(),
    };
    vec![mk("NOx", 0.5, 12.0), mk("SOx", 0.3, 10.0), mk("PM2.5", 0.02, 40.0)]
}

/// All valuation symbols in one record. Energies are MWh, prices €/MWh,
/// capacities MW, vehicle counts are individual vehicles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenefitParams {
    /// M€/yr.
    pub c_od_base: f64,
    pub delta_eff: f64,
    pub r_odp: f64,
    pub p_avg: f64,
    pub f_arb: f64,
    /// Full-load hours of RES capacity, h/yr.
    pub flh_res: f64,
    pub c_dr: f64,
    pub r_res: f64,
    pub r_ev: f64,
    pub r_et: f64,
    pub r_peak: f64,
    pub r_pl: f64,
    pub res_curt: f64,
    pub c_curt: f64,
    pub r_fes: f64,
    /// Dimensionless efficiency factors of the fleet-savings stream.
    pub eta_ev: f64,
    pub eta_et: f64,
    /// €/vehicle·yr.
    pub s_ev: f64,
    pub s_et: f64,
    pub r_gsms: f64,
    pub c_fuel: f64,
    pub r_gsstab: f64,
    pub p_market: f64,
    /// MWh/vehicle·yr.
    pub e_ev_yr: f64,
    pub e_et_yr: f64,
    /// Converts the GSMS deferral product (M€/yr · MW · h) into M€/yr.
    pub unit_bridge: f64,
    pub r_co2: f64,
    /// tCO₂/MWh. `None` uses the country grid intensity.
    pub mef_co2: Option<f64>,
    /// MWh/vehicle·yr in the CO₂ stream. `None` falls back to `e_ev_yr`.
    pub eta_ev_co2: Option<f64>,
    pub eta_et_co2: Option<f64>,
    /// kg/km attributable to ODP scheduling.
    pub alpha_ev: f64,
    pub alpha_et: f64,
    /// km/yr per vehicle.
    pub d_ev: f64,
    pub d_et: f64,
    pub r_dec: f64,
    pub pollutants: Vec<PollutantFactor>,
    /// MW aggregate charging capacity. `None` derives average load from the fleet.
    pub p_ev: Option<f64>,
    pub p_et: Option<f64>,
    pub h_yr: f64,
    pub eta_cycle: f64,
    pub loss_factor: f64,
    /// €/MWh for the KPI-delta curtailment mode.
    pub p_wholesale: Option<f64>,
    /// Additional RES generation (MWh/yr) for the KPI-delta curtailment mode.
    pub aec_delta_mwh: Option<f64>,
    /// Annual flexible-energy budget for the ledger. `None` uses fleet charging energy.
    pub flex_budget_mwh: Option<f64>,
}

impl Default for BenefitParams {
    fn default() -> Self {
        BenefitParams {
            c_od_base: 24.2,
            delta_eff: 0.15,
            r_odp: 0.13,
            p_avg: 25.0,
            f_arb: 0.05,
            flh_res: 1200.0,
            c_dr: 10.0,
            r_res: 0.01,
            r_ev: 0.10,
            r_et: 0.10,
            r_peak: 0.15,
            r_pl: 10.0,
            res_curt: 0.01,
            c_curt: 50.0,
            r_fes: 0.01,
            eta_ev: 1.0,
            eta_et: 1.0,
            s_ev: 800.0,
            s_et: 1920.0,
            r_gsms: 0.05,
            c_fuel: 500.0,
            r_gsstab: 0.01,
            p_market: 30.0,
            e_ev_yr: 1.5,
            e_et_yr: 30.0,
            unit_bridge: 0.0,
            r_co2: 0.12,
            mef_co2: None,
            eta_ev_co2: None,
            eta_et_co2: None,
            alpha_ev: 0.00005,
            alpha_et: 0.0003,
            d_ev: 12_000.0,
            d_et: 60_000.0,
            r_dec: 0.05,
            pollutants: placeholder_pollutants(),
            p_ev: None,
            p_et: None,
            h_yr: 8760.0,
            eta_cycle: 0.9,
            loss_factor: 0.05,
            p_wholesale: None,
            aec_delta_mwh: None,
            flex_budget_mwh: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{0} must lie in [0, 1], got {1}")]
    FractionOutOfRange(&'static str, f64),
    #[error("{0} must be non-negative and finite, got {1}")]
    Negative(&'static str, f64),
    #[error("h_yr must be positive, got {0}")]
    HoursPerYear(f64),
}

impl BenefitParams {
    /// Same parameters with every ODP-attributable effect switched off.
    ///
    /// Besides the reduction fractions this zeroes `unit_bridge` (attribution
    /// of the GSMS deferral term), `alpha_ev` (the ODP-attributable EV
    /// emission factor) and any supplied curtailment KPI delta.
    pub fn without_odp_effects(&self) -> Self {
        BenefitParams {
            r_odp: 0.0,
            f_arb: 0.0,
            r_res: 0.0,
            r_ev: 0.0,
            r_et: 0.0,
            r_peak: 0.0,
            res_curt: 0.0,
            r_fes: 0.0,
            r_gsms: 0.0,
            r_gsstab: 0.0,
            r_co2: 0.0,
            r_dec: 0.0,
            unit_bridge: 0.0,
            alpha_ev: 0.0,
            aec_delta_mwh: self.aec_delta_mwh.map(|_| 0.0),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fractions = [
            ("delta_eff", self.delta_eff),
            ("r_odp", self.r_odp),
            ("f_arb", self.f_arb),
            ("r_res", self.r_res),
            ("r_ev", self.r_ev),
            ("r_et", self.r_et),
            ("r_peak", self.r_peak),
            ("res_curt", self.res_curt),
            ("r_fes", self.r_fes),
            ("r_gsms", self.r_gsms),
            ("r_gsstab", self.r_gsstab),
            ("r_co2", self.r_co2),
            ("r_dec", self.r_dec),
            ("eta_cycle", self.eta_cycle),
            ("loss_factor", self.loss_factor),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(ParamError::FractionOutOfRange(name, v));
            }
        }
        let non_negative = [
            ("c_od_base", Some(self.c_od_base)),
            ("p_avg", Some(self.p_avg)),
            ("flh_res", Some(self.flh_res)),
            ("c_dr", Some(self.c_dr)),
            ("r_pl", Some(self.r_pl)),
            ("c_curt", Some(self.c_curt)),
            ("eta_ev", Some(self.eta_ev)),
            ("eta_et", Some(self.eta_et)),
            ("s_ev", Some(self.s_ev)),
            ("s_et", Some(self.s_et)),
            ("c_fuel", Some(self.c_fuel)),
            ("p_market", Some(self.p_market)),
            ("e_ev_yr", Some(self.e_ev_yr)),
            ("e_et_yr", Some(self.e_et_yr)),
            ("unit_bridge", Some(self.unit_bridge)),
            ("mef_co2", self.mef_co2),
            ("eta_ev_co2", self.eta_ev_co2),
            ("eta_et_co2", self.eta_et_co2),
            ("alpha_ev", Some(self.alpha_ev)),
            ("alpha_et", Some(self.alpha_et)),
            ("d_ev", Some(self.d_ev)),
            ("d_et", Some(self.d_et)),
            ("p_ev", self.p_ev),
            ("p_et", self.p_et),
            ("p_wholesale", self.p_wholesale),
            ("aec_delta_mwh", self.aec_delta_mwh),
            ("flex_budget_mwh", self.flex_budget_mwh),
        ];
        for (name, v) in non_negative {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ParamError::Negative(name, v));
                }
            }
        }
        for p in &self.pollutants {
            let damages = p
                .default_damage
                .into_iter()
                .chain(p.damage_eur_per_kg.values().copied());
            for v in std::iter::once(p.ef_kg_per_mwh).chain(damages) {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ParamError::Negative("pollutant factor", v));
                }
            }
        }
        if !(self.h_yr > 0.0 && self.h_yr.is_finite()) {
            return Err(ParamError::HoursPerYear(self.h_yr));
        }
        Ok(())
    }
}

/// Physical state of one country in one year, in the units the formulas use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalState {
    /// Vehicles.
    pub n_ev: f64,
    pub n_et: f64,
    /// MW.
    pub c_res_mw: f64,
    /// MW aggregate charging capacity.
    pub p_ev_mw: f64,
    pub p_et_mw: f64,
}

impl PhysicalState {
    /// Builds the state from stocks in thousands and capacity in GW. Charging
    /// capacity defaults to average load, `n · e_yr / h_yr`.
    pub fn from_projection(p: &BenefitParams, ev_thousands: f64, et_thousands: f64, res_gw: f64) -> Self {
        let n_ev = ev_thousands * 1000.0;
        let n_et = et_thousands * 1000.0;
        PhysicalState {
            n_ev,
            n_et,
            c_res_mw: res_gw * 1000.0,
            p_ev_mw: p.p_ev.unwrap_or(n_ev * p.e_ev_yr / p.h_yr),
            p_et_mw: p.p_et.unwrap_or(n_et * p.e_et_yr / p.h_yr),
        }
    }

    /// Baseline RES output, MWh/yr.
    pub fn e_res(&self, p: &BenefitParams) -> f64 {
        self.c_res_mw * p.flh_res
    }

    pub fn e_ev(&self, p: &BenefitParams) -> f64 {
        self.p_ev_mw * p.h_yr
    }

    pub fn e_et(&self, p: &BenefitParams) -> f64 {
        self.p_et_mw * p.h_yr
    }

    /// Fleet charging energy from per-vehicle consumption, MWh/yr.
    pub fn fleet_energy(&self, p: &BenefitParams) -> f64 {
        self.n_ev * p.e_ev_yr + self.n_et * p.e_et_yr
    }
}
