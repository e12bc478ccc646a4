//! Base-year valuation formulas. Every function returns M€/yr in full `f64` precision.

use serde::{Deserialize, Serialize};

use super::hourly::{neumaier_sum, HourlySeries, RoetasHourly};
use super::params::{BenefitParams, PhysicalState};
use super::{KpiDelta, StreamError};
use crate::model::CountryId;

const EUR_PER_MEUR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoetasMode {
    #[default]
    Proxy,
    Hourly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AecMode {
    #[default]
    Parametric,
    KpiDelta,
}

/// Marginal CO₂ factor, either one annual value or an hourly profile (tCO₂/MWh).
#[derive(Debug, Clone, Copy)]
pub enum MefInput<'a> {
    Scalar(f64),
    Hourly(&'a HourlySeries),
}

pub fn rod_annual(p: &BenefitParams) -> f64 {
    p.c_od_base * (1.0 + p.delta_eff) * p.r_odp
}

/// Arbitrage proxy volume `f_arb · (E_RES + E_EV+ET)`, MWh/yr.
pub fn roetas_proxy_volume(p: &BenefitParams, s: &PhysicalState) -> f64 {
    p.f_arb * (s.e_res(p) + s.e_ev(p) + s.e_et(p))
}

pub fn roetas_annual(
    p: &BenefitParams,
    s: &PhysicalState,
    mode: RoetasMode,
    hourly: Option<&RoetasHourly>,
) -> Result<f64, StreamError> {
    match mode {
        RoetasMode::Proxy => Ok(roetas_proxy_volume(p, s) * p.p_avg / EUR_PER_MEUR),
        RoetasMode::Hourly => {
            let h = hourly.ok_or(StreamError::ModeInputMissing("hourly trading series"))?;
            let scale = h.resolution()?.annualization();
            let arb = |q: &HourlySeries, spread: &HourlySeries| {
                neumaier_sum(q.values().iter().zip(spread.values()).map(|(q, d)| q * d * p.eta_cycle))
            };
            let mut eur = arb(&h.q_flex_odp, &h.spread_odp) - arb(&h.q_flex_base, &h.spread_base);
            for a in &h.ancillary {
                eur += (a.revenue_odp.sum() - a.cost_odp.sum()) - (a.revenue_base.sum() - a.cost_base.sum());
            }
            Ok(eur * scale / EUR_PER_MEUR)
        }
    }
}

/// Shifted volumes of the demand-response stream, MWh/yr: (shiftable, peak).
pub fn csdr_volumes(p: &BenefitParams, s: &PhysicalState) -> (f64, f64) {
    let shiftable = s.c_res_mw * p.r_res * p.flh_res + s.p_ev_mw * p.r_ev * p.h_yr + s.p_et_mw * p.r_et * p.h_yr;
    let peak = p.r_peak * (s.e_res(p) + s.e_ev(p) + s.e_et(p));
    (shiftable, peak)
}

pub fn csdr_plr_annual(p: &BenefitParams, s: &PhysicalState) -> f64 {
    let (shiftable, peak) = csdr_volumes(p, s);
    (p.c_dr * shiftable + p.r_pl * peak) / EUR_PER_MEUR
}

/// Avoided curtailment, MWh/yr.
pub fn aec_volume(
    p: &BenefitParams,
    s: &PhysicalState,
    mode: AecMode,
    delta: Option<&KpiDelta>,
) -> Result<f64, StreamError> {
    match mode {
        AecMode::Parametric => Ok(p.res_curt * s.e_res(p)),
        AecMode::KpiDelta => delta
            .map(KpiDelta::delta)
            .ok_or(StreamError::ModeInputMissing("RES generation delta")),
    }
}

pub fn aec_annual(
    p: &BenefitParams,
    s: &PhysicalState,
    mode: AecMode,
    delta: Option<&KpiDelta>,
    wholesale: Option<f64>,
) -> Result<f64, StreamError> {
    let mwh = aec_volume(p, s, mode, delta)?;
    match mode {
        AecMode::Parametric => Ok(mwh * p.c_curt / EUR_PER_MEUR),
        AecMode::KpiDelta => {
            let price = wholesale.ok_or(StreamError::ModeInputMissing("wholesale price"))?;
            Ok(mwh * price * (1.0 - p.loss_factor) / EUR_PER_MEUR)
        }
    }
}

pub fn fes_annual(p: &BenefitParams, n_ev: f64, n_et: f64) -> f64 {
    p.r_fes * (n_ev * p.eta_ev * p.s_ev + n_et * p.eta_et * p.s_et) / EUR_PER_MEUR
}

/// Grid-stability terms in M€/yr: (fleet-energy terms, RES deferral term).
pub fn gsms_components(p: &BenefitParams, n_ev: f64, n_et: f64, c_res_mw: f64) -> (f64, f64) {
    let fleet = n_ev * p.e_ev_yr + n_et * p.e_et_yr;
    let energy = (p.r_gsms * fleet * p.c_fuel + p.r_gsstab * fleet * p.p_market) / EUR_PER_MEUR;
    let deferral = p.c_od_base * c_res_mw * p.flh_res * p.unit_bridge;
    (energy, deferral)
}

pub fn gsms_annual(p: &BenefitParams, n_ev: f64, n_et: f64, c_res_mw: f64) -> f64 {
    let (energy, deferral) = gsms_components(p, n_ev, n_et, c_res_mw);
    energy + deferral
}

/// Fleet energy stabilized through the grid-stability terms, MWh/yr.
pub fn gsms_volume(p: &BenefitParams, s: &PhysicalState) -> f64 {
    (p.r_gsms + p.r_gsstab) * s.fleet_energy(p)
}

/// Energy base of the CO₂ stream, MWh/yr.
pub fn co2_energy(p: &BenefitParams, s: &PhysicalState) -> f64 {
    let eta_ev = p.eta_ev_co2.unwrap_or(p.e_ev_yr);
    let eta_et = p.eta_et_co2.unwrap_or(p.e_et_yr);
    s.c_res_mw * p.flh_res + s.n_ev * eta_ev + s.n_et * eta_et
}

/// Avoided emissions, tCO₂/yr.
pub fn co2_tonnes(p: &BenefitParams, s: &PhysicalState, mef: MefInput<'_>) -> f64 {
    let factor = match mef {
        MefInput::Scalar(m) => m,
        MefInput::Hourly(h) => h.mean(),
    };
    p.r_co2 * co2_energy(p, s) * factor
}

pub fn co2_annual(p: &BenefitParams, s: &PhysicalState, scc: f64, mef: MefInput<'_>) -> f64 {
    co2_tonnes(p, s, mef) * scc / EUR_PER_MEUR
}

/// Avoided pollutant mass per pollutant, kg/yr.
pub fn rap_masses(p: &BenefitParams, s: &PhysicalState) -> Vec<(String, f64)> {
    p.pollutants
        .iter()
        .map(|pol| {
            let kg = p.alpha_ev * p.d_ev * s.n_ev
                + p.alpha_et * p.d_et * s.n_et * p.r_odp
                + pol.ef_kg_per_mwh * s.c_res_mw * p.flh_res * p.r_dec * p.r_odp;
            (pol.name.clone(), kg)
        })
        .collect()
}

pub fn rap_annual(p: &BenefitParams, s: &PhysicalState, country: &CountryId) -> Result<f64, StreamError> {
    let mut eur = 0.0;
    for (pol, (_, kg)) in p.pollutants.iter().zip(rap_masses(p, s)) {
        let damage = pol
            .damage_for(country)
            .ok_or_else(|| StreamError::MissingPollutantFactor {
                pollutant: pol.name.clone(),
                country: country.0.clone(),
            })?;
        eur += kg * damage;
    }
    Ok(eur / EUR_PER_MEUR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benefits::hourly::{HourlyUnit, Resolution};
    use crate::benefits::params::PollutantFactor;
    use std::collections::BTreeMap;

    fn state(n_ev: f64, n_et: f64, c_res_mw: f64) -> PhysicalState {
        PhysicalState {
            n_ev,
            n_et,
            c_res_mw,
            p_ev_mw: 0.0,
            p_et_mw: 0.0,
        }
    }

    #[test]
    fn rod_cases() {
        let mut p = BenefitParams::default();
        p.delta_eff = 0.0;
        assert_eq!(rod_annual(&p), 24.2 * 0.13);
        p.r_odp = 0.0;
        assert_eq!(rod_annual(&p), 0.0);
    }

    #[test]
    fn roetas_proxy_ten_twh() {
        let p = BenefitParams::default();
        let s = state(0.0, 0.0, 1e7 / p.flh_res);
        let v = roetas_annual(&p, &s, RoetasMode::Proxy, None).unwrap();
        assert!((v - 0.05 * 1e7 * 25.0 / 1e6).abs() < 1e-9);
    }

    #[test]
    fn roetas_hourly_identity_is_zero() {
        let p = BenefitParams::default();
        let q = HourlySeries::new(HourlyUnit::Mwh, (0..24).map(|h| h as f64).collect()).unwrap();
        let d = HourlySeries::flat(HourlyUnit::EurPerMwh, Resolution::Daily24, 40.0).unwrap();
        let h = RoetasHourly {
            q_flex_odp: q.clone(),
            spread_odp: d.clone(),
            q_flex_base: q,
            spread_base: d,
            ancillary: vec![],
        };
        assert_eq!(
            roetas_annual(&p, &state(1.0, 1.0, 1.0), RoetasMode::Hourly, Some(&h)).unwrap(),
            0.0
        );
        assert!(roetas_annual(&p, &state(1.0, 1.0, 1.0), RoetasMode::Hourly, None).is_err());
    }

    #[test]
    fn csdr_peak_term_only() {
        let mut p = BenefitParams::default();
        p.c_dr = 0.0;
        p.r_pl = 10.0;
        p.r_peak = 0.15;
        let s = state(0.0, 0.0, 1e6 / p.flh_res);
        assert!((csdr_plr_annual(&p, &s) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn aec_modes() {
        let p = BenefitParams::default();
        let s = state(0.0, 0.0, 20_000.0);
        assert!((aec_annual(&p, &s, AecMode::Parametric, None, None).unwrap() - 12.0).abs() < 1e-9);
        assert!(matches!(
            aec_annual(&p, &s, AecMode::KpiDelta, None, Some(40.0)),
            Err(StreamError::ModeInputMissing(_))
        ));
        let zero = KpiDelta::new("res_generation", 100.0, 100.0, "MWh");
        assert_eq!(
            aec_annual(&p, &s, AecMode::KpiDelta, Some(&zero), Some(40.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn gsms_first_term() {
        let mut p = BenefitParams::default();
        p.e_ev_yr = 3.0;
        p.r_gsstab = 0.0;
        p.unit_bridge = 0.0;
        assert!((gsms_annual(&p, 100_000.0, 0.0, 5000.0) - 7.5).abs() < 1e-9);
    }

    #[test]
    fn co2_scalar() {
        let p = BenefitParams::default();
        let s = state(0.0, 0.0, 1e7 / p.flh_res);
        assert!((co2_annual(&p, &s, 85.0, MefInput::Scalar(0.19)) - 19.38).abs() < 1e-9);
    }

    #[test]
    fn rap_vehicle_term() {
        let mut p = BenefitParams::default();
        p.alpha_ev = 0.01;
        p.d_ev = 10_000.0;
        p.pollutants = vec![PollutantFactor {
            name: "NOx".into(),
            ef_kg_per_mwh: 0.0,
            default_damage: Some(1.0),
            damage_eur_per_kg: BTreeMap::new(),
        }];
        let s = state(100_000.0, 0.0, 0.0);
        assert!((rap_annual(&p, &s, &CountryId::new("AT")).unwrap() - 10.0).abs() < 1e-9);
        p.pollutants[0].default_damage = None;
        assert!(matches!(
            rap_annual(&p, &s, &CountryId::new("AT")),
            Err(StreamError::MissingPollutantFactor { .. })
        ));
        p.pollutants.clear();
        assert_eq!(rap_annual(&p, &s, &CountryId::new("AT")).unwrap(), 0.0);
    }
}
