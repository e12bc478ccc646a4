//! Orchestration: configuration and fixtures in, [`ReportBundle`] out.

use std::collections::BTreeMap;

use rust_decimal::prelude::{FromPrimitive, ToPrimitive};
use rust_decimal::Decimal;
use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, ProjectionInput, RunConfig, RunMode};
use super::fixtures::{
    check_fixtures, reconcile_benefits, CapexGroup, CountryPv, FixtureCheck, FixtureError, FixturePack, Reconciliation,
    STREAM_TOLERANCE,
};
use crate::appraisal::{
    appraise, AppraisalError, AppraisalResult, Appraiser, CashflowBasis, CashflowTable, Column, DiscountSpec,
    UNIT_MULTIPLIERS,
};
use crate::benefits::{benefits_table, BenefitRun, Channel, Stream, StreamError, StreamTable};
use crate::costs::{
    allocate_costs_by_country, calibrate_unit_costs, capex_schedule, fit_decay, opex_schedule, CapexLine, CapexPlan,
    CostError, CostSchedule, OpexCategory, OpexPlan, UnitCosts,
};
use crate::model::{CountryId, ModelError, MoneyM, ValidatedModel};
use crate::monte_carlo::{run_trials, McConfig, McError, McOutput, McSummary};
use crate::projections::{ProjectionError, ProjectionSet};
use crate::scenario::{
    apply_scenario, discount_sweep, tornado, AppraisalInputs, ScenarioError, SweepPoint, TornadoEntry, UncertainParam,
};

/// Rate at which the fixture benefit and cost tables are already discounted.
pub const FIXTURE_BASIS_RATE: Decimal = Decimal::from_parts(4, 0, 0, false, 2);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Appraisal(#[from] AppraisalError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

/// Which optional stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub scenarios: bool,
    pub tornado: bool,
    pub monte_carlo: bool,
    pub country_monte_carlo: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        scenarios: true,
        tornado: true,
        monte_carlo: true,
        country_monte_carlo: true,
    };
    pub const NONE: Stages = Stages {
        scenarios: false,
        tornado: false,
        monte_carlo: false,
        country_monte_carlo: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub schedule: CostSchedule,
    pub core_items: Vec<CapexLine>,
    /// Stated core subtotal over the sum of the listed core items.
    pub core_scale_factor: Decimal,
    pub core_ai_share: f64,
    pub opex_categories: Vec<OpexCategory>,
    pub opex_ai_share: f64,
    pub opex_decay: f64,
    pub opex_breakdown_first_year: Vec<(String, MoneyM)>,
    pub unit_costs: Option<UnitCosts>,
}

/// Inputs shared by every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub mode: RunMode,
    pub model: ValidatedModel,
    pub discount: DiscountSpec,
    pub projections: ProjectionSet,
    pub cashflows: CashflowTable,
    pub country_cashflows: Vec<(CountryId, CashflowTable)>,
    pub benefit_run: Option<BenefitRun>,
    pub reconciliation: Option<Reconciliation>,
    pub costs: CostReport,
    pub fixture_check: Option<FixtureCheck>,
}

fn dec(v: f64) -> Result<Decimal, PipelineError> {
    Decimal::from_f64(v).ok_or_else(|| PipelineError::Inconsistent(format!("{v} is not representable")))
}

fn cost_plans(cfg: &RunConfig, pack: &FixturePack) -> Result<(CapexPlan, Decimal, OpexPlan), PipelineError> {
    let core: Vec<CapexLine> = pack
        .core_items()
        .map(|i| CapexLine {
            name: i.item.clone(),
            pv_meur: i.pv_meur,
            ai_related: i.ai_related,
        })
        .collect();
    let zero_units = UnitCosts {
        ev_eur: 0.0,
        et_eur: 0.0,
        res_eur_per_mw: 0.0,
    };
    let (capex_plan, factor) = CapexPlan::from_itemization(core, pack.reference("capex_core_subtotal")?, zero_units);
    capex_plan.validate()?;

    let amounts: Vec<(String, f64, bool)> = pack
        .opex_categories
        .iter()
        .map(|o| {
            (
                o.category.clone(),
                o.annual_avg_pv.to_f64().unwrap_or(0.0),
                o.ai_related,
            )
        })
        .collect();
    let opex_col = pack.opex.values();
    let decay = match cfg.formula.costs.opex_decay {
        Some(d) => d,
        None => fit_decay(
            opex_col[0].to_f64(),
            opex_col[opex_col.len() - 1].to_f64(),
            (opex_col.len() - 1) as i32,
        ),
    };
    let opex_plan = OpexPlan {
        categories: OpexPlan::shares_from_amounts(&amounts),
        base_year_total: cfg.formula.costs.opex_base_total,
        annual_decay: decay,
    };
    opex_plan.validate()?;
    Ok((capex_plan, factor, opex_plan))
}

fn weights_from_reference(
    model: &ValidatedModel,
    pack: &FixturePack,
    costs: bool,
) -> Result<Vec<(CountryId, Decimal)>, PipelineError> {
    model
        .country_ids()
        .into_iter()
        .map(|c| {
            let r: &CountryPv = pack
                .country_reference(&c)
                .ok_or_else(|| PipelineError::Inconsistent(format!("no reference country row for {c}")))?;
            let w = if costs {
                r.costs_pv.value()
            } else {
                r.benefits_pv.value()
            };
            Ok((c, w))
        })
        .collect()
}

fn country_tables(
    benefits: &StreamTable,
    costs: &CostSchedule,
    cost_weights: &[(CountryId, Decimal)],
    basis: CashflowBasis,
) -> Result<Vec<(CountryId, CashflowTable)>, PipelineError> {
    allocate_costs_by_country(costs, cost_weights)?
        .into_iter()
        .map(|(c, sched)| {
            let b = benefits
                .for_country(&c)
                .ok_or_else(|| PipelineError::Inconsistent(format!("no benefits for {c}")))?;
            Ok((c, CashflowTable::new(b, sched, basis)?))
        })
        .collect()
}

/// Builds cash flows for the configured mode.
pub fn prepare(cfg: &RunConfig, pack: &FixturePack) -> Result<Prepared, PipelineError> {
    let model = cfg.model()?;
    let discount = cfg.discount;
    let (mut capex_plan, core_factor, opex_plan) = cost_plans(cfg, pack)?;
    let fixture_check = Some(check_fixtures(pack, Some(&model))?);

    match cfg.mode {
        RunMode::Fixture => {
            if *model.axis() != pack.axis {
                return Err(PipelineError::Inconsistent(format!(
                    "fixture tables cover {}–{}, configuration axis is {}–{}",
                    pack.axis.first_year,
                    pack.axis.last_year,
                    model.axis().first_year,
                    model.axis().last_year
                )));
            }
            let recon = reconcile_benefits(pack);
            let bw = weights_from_reference(&model, pack, false)?;
            let cw = weights_from_reference(&model, pack, true)?;
            let benefits = StreamTable::split_aggregate(pack.axis, &recon.columns, &bw)?;
            let schedule = CostSchedule::new(pack.capex.clone(), pack.opex.clone(), capex_plan.one_time())?;
            let basis = CashflowBasis::Discounted {
                rate: FIXTURE_BASIS_RATE,
            };
            let country_cashflows = country_tables(&benefits, &schedule, &cw, basis)?;
            let cashflows = CashflowTable::new(benefits, schedule.clone(), basis)?;
            Ok(Prepared {
                mode: cfg.mode,
                discount,
                projections: pack.projections()?,
                cashflows,
                country_cashflows,
                benefit_run: None,
                reconciliation: Some(recon),
                costs: cost_report(schedule, &capex_plan, core_factor, &opex_plan, None),
                fixture_check,
                model,
            })
        }
        RunMode::Formula => {
            let generated = ProjectionSet::generate(&model)?;
            let projections = match cfg.formula.projections {
                ProjectionInput::Generated => generated,
                ProjectionInput::Fixture => generated.with_override(&pack.projections()?)?,
            };
            let unit_costs = match cfg.formula.costs.unit_costs {
                Some(u) => u,
                None => {
                    let inc: Vec<f64> = pack
                        .capex_items
                        .iter()
                        .filter(|i| i.group == CapexGroup::Incremental)
                        .map(|i| i.pv_meur.to_f64().unwrap_or(0.0))
                        .collect();
                    if inc.len() != 3 {
                        return Err(PipelineError::Inconsistent(format!(
                            "expected 3 incremental CAPEX items (EV, ET, RES), found {}",
                            inc.len()
                        )));
                    }
                    calibrate_unit_costs(&projections, [inc[0], inc[1], inc[2]], &discount)?
                }
            };
            capex_plan.unit_costs = unit_costs;
            capex_plan.validate()?;
            let schedule = CostSchedule::new(
                capex_schedule(&capex_plan, &projections)?,
                opex_schedule(&opex_plan, model.axis())?,
                capex_plan.one_time(),
            )?;
            let params = cfg.formula.params_map(&model)?;
            let run = benefits_table(
                &model,
                &projections,
                &params,
                &cfg.formula.drivers,
                &cfg.formula.options(),
            )?;
            let cw: Vec<(CountryId, Decimal)> = model
                .countries()
                .iter()
                .map(|a| Ok((a.country.id.clone(), dec(a.cost_share)?)))
                .collect::<Result<_, PipelineError>>()?;
            let basis = CashflowBasis::Nominal;
            let country_cashflows = country_tables(&run.table, &schedule, &cw, basis)?;
            let cashflows = CashflowTable::new(run.table.clone(), schedule.clone(), basis)?;
            Ok(Prepared {
                mode: cfg.mode,
                discount,
                projections,
                cashflows,
                country_cashflows,
                benefit_run: Some(run),
                reconciliation: None,
                costs: cost_report(schedule, &capex_plan, core_factor, &opex_plan, Some(unit_costs)),
                fixture_check,
                model,
            })
        }
    }
}

fn cost_report(
    schedule: CostSchedule,
    capex: &CapexPlan,
    core_scale_factor: Decimal,
    opex: &OpexPlan,
    unit_costs: Option<UnitCosts>,
) -> CostReport {
    let first = schedule.opex.values().first().copied().unwrap_or(MoneyM::ZERO);
    CostReport {
        core_items: capex.core_items.clone(),
        core_scale_factor,
        core_ai_share: capex.ai_share(),
        opex_categories: opex.categories.clone(),
        opex_ai_share: opex.ai_share(),
        opex_decay: opex.annual_decay,
        opex_breakdown_first_year: opex.breakdown(first),
        unit_costs,
        schedule,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub name: String,
    pub npv: MoneyM,
    pub bcr: Option<f64>,
    pub reference_npv: Option<MoneyM>,
    pub reference_bcr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryReport {
    pub country: CountryId,
    pub result: AppraisalResult,
    pub monte_carlo: Option<McSummary>,
    pub reference: Option<CountryPv>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Annotation {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamPv {
    pub stream: Stream,
    pub pv: MoneyM,
    pub reference: Option<MoneyM>,
}

/// Everything a report renders. Each number comes from a module output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub mode: RunMode,
    pub discount: DiscountSpec,
    pub headline: AppraisalResult,
    pub streams: Vec<StreamPv>,
    pub stream_table: StreamTable,
    pub countries: Vec<CountryReport>,
    pub projections: ProjectionSet,
    pub costs: CostReport,
    pub scenarios: Vec<ScenarioRow>,
    pub tornado: Vec<TornadoEntry>,
    pub discount_sweep: Vec<SweepPoint>,
    pub monte_carlo: Option<McOutput>,
    pub fixture_check: Option<FixtureCheck>,
    pub reconciliation: Option<Reconciliation>,
    pub benefit_run: Option<BenefitRun>,
    pub annotations: Vec<Annotation>,
}

/// Seed of the per-country run for the country at `index`.
pub fn country_seed(master_seed: u64, index: usize) -> u64 {
    master_seed.wrapping_add(1 + index as u64)
}

/// Runs the deterministic appraisal and the selected stages.
pub fn run(cfg: &RunConfig, pack: &FixturePack, stages: Stages) -> Result<ReportBundle, PipelineError> {
    let prep = prepare(cfg, pack)?;
    let d = prep.discount;
    let headline = appraise(&prep.cashflows, &d)?;
    let appraiser = Appraiser::new(&prep.cashflows, &d)?;

    let streams = Stream::ALL
        .iter()
        .map(|s| StreamPv {
            stream: *s,
            pv: headline.column_pvs[Column::Stream(*s).index()],
            reference: pack.stream_pv.get(s).copied(),
        })
        .collect();

    let mut countries = Vec::with_capacity(prep.country_cashflows.len());
    for (i, (c, cf)) in prep.country_cashflows.iter().enumerate() {
        let result = appraise(cf, &d)?;
        let monte_carlo = if stages.country_monte_carlo && cfg.country_monte_carlo.enabled {
            let mc = McConfig {
                n_trials: cfg.country_monte_carlo.n_trials,
                master_seed: country_seed(cfg.monte_carlo.master_seed, i),
                dump_trials: false,
                ..cfg.monte_carlo.clone()
            };
            Some(run_trials(&Appraiser::new(cf, &d)?, &cfg.impact_matrix, &mc)?.summary)
        } else {
            None
        };
        countries.push(CountryReport {
            country: c.clone(),
            result,
            monte_carlo,
            reference: pack.country_reference(c).cloned(),
        });
    }

    let mut scenarios = Vec::new();
    if stages.scenarios {
        let inputs = AppraisalInputs {
            cashflows: prep.cashflows.clone(),
            discount: d,
        };
        for s in &cfg.scenarios {
            let r = apply_scenario(&inputs, s)?;
            let reference = pack.scenario_reference.iter().find(|x| x.scenario == s.name);
            scenarios.push(ScenarioRow {
                name: s.name.clone(),
                npv: r.npv,
                bcr: r.bcr,
                reference_npv: reference.map(|x| x.npv),
                reference_bcr: reference.map(|x| x.bcr),
            });
        }
    }

    let (tornado_rows, sweep) = if stages.tornado {
        (
            tornado(&appraiser, &cfg.impact_matrix, &cfg.tornado_ranges)?,
            discount_sweep(&appraiser, &cfg.discount_sweep)?,
        )
    } else {
        (Vec::new(), Vec::new())
    };

    let monte_carlo = if stages.monte_carlo {
        Some(run_trials(&appraiser, &cfg.impact_matrix, &cfg.monte_carlo)?)
    } else {
        None
    };

    let mut bundle = ReportBundle {
        mode: prep.mode,
        discount: d,
        headline,
        streams,
        stream_table: prep.cashflows.benefits.clone(),
        countries,
        projections: prep.projections,
        costs: prep.costs,
        scenarios,
        tornado: tornado_rows,
        discount_sweep: sweep,
        monte_carlo,
        fixture_check: prep.fixture_check,
        reconciliation: prep.reconciliation,
        benefit_run: prep.benefit_run,
        annotations: Vec::new(),
    };
    bundle.annotations = annotations(&bundle, pack, &appraiser)?;
    Ok(bundle)
}

fn m(v: MoneyM) -> String {
    format!("{:.1}", v.round_display(1))
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

fn note(out: &mut Vec<Annotation>, id: &str, message: String) {
    out.push(Annotation {
        id: id.to_string(),
        message,
    });
}

/// Discrepancy notes: reference values that the computed results do not reproduce
/// as labelled, and corrections applied to the fixture tables.
fn annotations(b: &ReportBundle, pack: &FixturePack, appraiser: &Appraiser) -> Result<Vec<Annotation>, PipelineError> {
    let mut out = Vec::new();
    let fixture = b.mode == RunMode::Fixture;
    let scale = |col_benefit: bool, k: f64| -> Result<MoneyM, PipelineError> {
        let mut mult = UNIT_MULTIPLIERS;
        for c in Column::ALL {
            if c.is_benefit() == col_benefit {
                mult[c.index()] = dec(k)?;
            }
        }
        Ok(appraiser.evaluate(&mult, None)?.npv)
    };
    let reference_row = |name: &str| pack.scenario_reference.iter().find(|x| x.scenario == name);

    if fixture {
        let b_pct = pack.reference_f64("benefits_scenario_label_pct")?;
        let c_pct = pack.reference_f64("costs_scenario_label_pct")?;
        if let (Some(down), Some(up)) = (reference_row("benefits_down"), reference_row("benefits_up")) {
            note(
                &mut out,
                "scenario_benefit_labels",
                format!(
                    "Reference benefit rows are labelled ±{b_pct}% but match ±10%: computed NPV {} / {} at −10% / +10% vs reference {} / {}; a literal −{b_pct}% gives {}.",
                    m(scale(true, 0.9)?),
                    m(scale(true, 1.1)?),
                    m(down.npv),
                    m(up.npv),
                    m(scale(true, 1.0 - b_pct / 100.0)?),
                ),
            );
        }
        if let (Some(up), Some(down)) = (reference_row("costs_up"), reference_row("costs_down")) {
            note(
                &mut out,
                "scenario_cost_labels",
                format!(
                    "Reference cost rows are labelled ±{c_pct}% but match ±10%: computed NPV {} / {} at +10% / −10% vs reference {} / {}; a literal +{c_pct}% gives {}.",
                    m(scale(false, 1.1)?),
                    m(scale(false, 0.9)?),
                    m(up.npv),
                    m(down.npv),
                    m(scale(false, 1.0 + c_pct / 100.0)?),
                ),
            );
        }
        let mut parts = Vec::new();
        for (name, rate) in [
            ("discount_3pct", Decimal::new(3, 2)),
            ("discount_5pct", Decimal::new(5, 2)),
        ] {
            if let Some(r) = reference_row(name) {
                let v = appraiser.evaluate(&UNIT_MULTIPLIERS, Some(rate))?;
                parts.push(format!(
                    "{} re-discounted NPV {} vs reference {}",
                    name,
                    m(v.npv),
                    m(r.npv)
                ));
            }
        }
        if !parts.is_empty() {
            note(
                &mut out,
                "scenario_discount_rows",
                format!(
                    "Reference discount-rate rows are not reproduced by re-discounting the annual flows: {}.",
                    parts.join("; ")
                ),
            );
        }

        let gsms_share = (pack.stream_pv[&Stream::Gsms].value()
            / pack.stream_pv.values().copied().sum::<MoneyM>().value())
        .to_f64()
        .unwrap_or(0.0);
        let rel: Vec<String> = pack
            .category_shares
            .iter()
            .map(|c| format!("{} {}", c.country, pct(c.reliability)))
            .collect();
        note(
            &mut out,
            "country_category_shares",
            format!(
                "Country reliability shares ({}) conflict with the grid-stability stream's {} of aggregate benefits; category splits are reported only and excluded from acceptance.",
                rel.join(", "),
                pct(gsms_share)
            ),
        );

        let claim = pack.reference("payback_year_claim")?;
        note(
            &mut out,
            "payback_claim",
            format!(
                "Reference payback year {claim}: end-of-year cumulative net turns non-negative in {}, interpolated crossing at {}.",
                b.headline.payback_eoy.map(|y| y.to_string()).unwrap_or_else(|| "never".into()),
                b.headline.payback_interp.map(|y| format!("{y:.2}")).unwrap_or_else(|| "n/a".into()),
            ),
        );

        let total: Decimal = pack.country_pv.iter().map(|r| r.costs_pv.value()).sum();
        let shares: Vec<String> = pack
            .country_pv
            .iter()
            .map(|r| {
                format!(
                    "{} {}",
                    r.country,
                    pct((r.costs_pv.value() / total).to_f64().unwrap_or(0.0))
                )
            })
            .collect();
        note(
            &mut out,
            "country_cost_shares",
            format!("Reference country cost PVs imply shares {} rather than the nominal 45% / 35% / 20%; fixture runs split costs by the reference PVs.", shares.join(", ")),
        );

        if let Some(r) = &b.reconciliation {
            let f: Vec<String> = r
                .factors
                .iter()
                .map(|(s, k)| format!("{} {:.4}", s, k.round_dp(4)))
                .collect();
            note(
                &mut out,
                "benefit_reconciliation",
                format!("Annual benefit columns were scaled onto the reference stream PVs (factors {}); the final year absorbs rounding.", f.join(", ")),
            );
        }
    }

    if let Some(check) = &b.fixture_check {
        for a in &check.anomalies {
            match a {
                super::fixtures::Anomaly::ColumnDip {
                    stream,
                    year,
                    value,
                    neighbour_mean,
                } => note(
                    &mut out,
                    &format!("fixture_dip_{}_{}", stream.code(), year),
                    format!(
                        "Annual {} benefit for {} ({}) breaks the rising trend; replaced by the neighbour mean {} before reconciliation.",
                        stream,
                        year,
                        m(*value),
                        m(*neighbour_mean)
                    ),
                ),
                super::fixtures::Anomaly::RowTotal {
                    year,
                    printed,
                    component_sum,
                } => note(
                    &mut out,
                    &format!("fixture_row_total_{year}"),
                    format!(
                        "Printed benefit total for {year} is {} but its components sum to {}; components are used.",
                        m(*printed),
                        m(*component_sum)
                    ),
                ),
            }
        }
        for s in &check.sums {
            if !s.gap().is_zero() {
                note(
                    &mut out,
                    &format!("sum_{}", s.name),
                    format!(
                        "{}: computed {} vs stated {} (gap {}).",
                        s.name,
                        s.computed.round_display(2),
                        s.stated.round_display(2),
                        s.gap().round_display(2)
                    ),
                );
            }
        }
        let off: Vec<&super::fixtures::ProjectionDrift> =
            check.projection_drift.iter().filter(|p| !p.within_tolerance).collect();
        if !off.is_empty() {
            let worst = off
                .iter()
                .max_by(|a, b| a.rel_deviation.abs().total_cmp(&b.rel_deviation.abs()))
                .expect("non-empty");
            note(
                &mut out,
                "projection_drift",
                format!(
                    "{} of {} generated projection cells differ from the fixture stocks by more than 1.5%; largest: {} {} {} generated {:.3} vs fixture {:.3} ({}).",
                    off.len(),
                    check.projection_drift.len(),
                    worst.series,
                    worst.country,
                    worst.year,
                    worst.generated,
                    worst.fixture,
                    pct(worst.rel_deviation)
                ),
            );
        }
        let res: Vec<String> = check
            .projection_drift
            .iter()
            .filter(|p| p.series == "res" && p.year == pack.axis.last_year && (p.generated - p.fixture).abs() > 0.1)
            .map(|p| {
                format!(
                    "{} {:.2} GW generated vs {:.2} GW fixture",
                    p.country, p.generated, p.fixture
                )
            })
            .collect();
        if !res.is_empty() {
            note(
                &mut out,
                "res_capacity_gap",
                format!(
                    "Fixture RES increments disagree with the stated annual additions: {}.",
                    res.join("; ")
                ),
            );
        }
    }

    if fixture {
        note(
            &mut out,
            "capex_core_items",
            format!(
                "Listed core CAPEX items were rescaled by {:.4} to match the stated one-time subtotal of {}.",
                b.costs.core_scale_factor.round_dp(4),
                m(MoneyM(pack.reference("capex_core_subtotal")?))
            ),
        );
        note(
            &mut out,
            "opex_categories",
            format!(
                "OPEX category amounts sum to {} against a stated annual average of {}; they are used as shares only.",
                m(MoneyM(pack.opex_categories.iter().map(|o| o.annual_avg_pv).sum())),
                m(MoneyM(pack.reference("opex_annual_avg")?))
            ),
        );
    }

    if let Some(t) = b.tornado.iter().find(|t| t.parameter == UncertainParam::DiscountRate) {
        if let (Some(lo), Some(hi)) = (b.discount_sweep.first(), b.discount_sweep.last()) {
            note(
                &mut out,
                "tornado_discount_rate",
                format!(
                    "The discount-rate tornado bar uses the calibrated pass-through (range {}); fully re-discounting between {} and {} moves NPV from {} to {}.",
                    m(t.range),
                    lo.rate,
                    hi.rate,
                    m(lo.npv),
                    m(hi.npv)
                ),
            );
        }
    }

    if !fixture {
        let gaps: Vec<String> = b
            .streams
            .iter()
            .filter_map(|s| {
                let r = s.reference?;
                let dev = (s.pv.to_f64() - r.to_f64()) / r.to_f64();
                (dev.abs() > STREAM_TOLERANCE)
                    .then(|| format!("{} {} vs {} ({:+.0}%)", s.stream.code(), m(s.pv), m(r), dev * 100.0))
            })
            .collect();
        if !gaps.is_empty() {
            note(
                &mut out,
                "formula_stream_gap",
                format!(
                    "Formula-mode stream PVs differ from the reference stream PVs by more than 5%: {}.",
                    gaps.join("; ")
                ),
            );
        }
        if let Some(run) = &b.benefit_run {
            let starved: Vec<String> = run
                .ledgers
                .iter()
                .flat_map(|(c, l)| {
                    Channel::ORDER
                        .iter()
                        .filter(|ch| l.coverage(**ch) < Decimal::ONE)
                        .map(move |ch| {
                            format!(
                                "{c} {ch:?} {:.0}%",
                                (l.coverage(*ch) * Decimal::ONE_HUNDRED).round_dp(0)
                            )
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            if !starved.is_empty() {
                note(
                    &mut out,
                    "formula_ledger_coverage",
                    format!(
                        "The flexibility budget does not cover every channel; funded share of demand: {}.",
                        starved.join(", ")
                    ),
                );
            }
        }
    }

    if fixture {
        if let Some(mc) = &b.monte_carlo {
            let s = &mc.summary;
            note(
                &mut out,
                "monte_carlo_calibration",
                format!(
                    "Distribution widths are a calibration, not published values: mean {} vs reference {}, p5 {} vs {}, p95 {} vs {}.",
                    m(s.npv.mean),
                    m(MoneyM(pack.reference("mc_mean_npv")?)),
                    m(s.npv.p5),
                    m(MoneyM(pack.reference("mc_p5_npv")?)),
                    m(s.npv.p95),
                    m(MoneyM(pack.reference("mc_p95_npv")?)),
                ),
            );
        }
    }
    Ok(out)
}

/// Annotation ids keyed for quick lookup.
pub fn annotation_index(b: &ReportBundle) -> BTreeMap<&str, &str> {
    b.annotations
        .iter()
        .map(|a| (a.id.as_str(), a.message.as_str()))
        .collect()
}
