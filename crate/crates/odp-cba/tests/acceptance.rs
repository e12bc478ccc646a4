//! One test per acceptance criterion. Each prints a PASS or FAIL line with
//! the measured values before asserting.

use std::collections::BTreeMap;
use std::time::Instant;

use odp_cba::appraisal::{appraise, Appraiser};
use odp_cba::benefits::ledger::allocate_flexibility;
use odp_cba::benefits::streams::{aec_annual, rod_annual, AecMode};
use odp_cba::benefits::{benefits_table, BenefitParams, PhysicalState, Stream};
use odp_cba::io::config::{RunConfig, RunMode};
use odp_cba::io::fixtures::{check_fixtures, Anomaly, FixturePack, STREAM_TOLERANCE};
use odp_cba::io::pipeline::{annotation_index, prepare, run, Stages};
use odp_cba::model::{interpolate_scc, CountryId, MoneyM};
use odp_cba::monte_carlo::{run_trials, Binding, Distribution, McConfig};
use odp_cba::projections::ProjectionSet;
use odp_cba::scenario::UncertainParam;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

fn verdict(n: u8, title: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("criterion {n} PASS: {title}");
    } else {
        println!("criterion {n} FAIL: {title}");
        for f in failures {
            println!("  - {f}");
        }
    }
    assert!(failures.is_empty(), "criterion {n} failed: {failures:?}");
}

fn check(failures: &mut Vec<String>, ok: bool, msg: impl Into<String>) {
    if !ok {
        failures.push(msg.into());
    }
}

fn setup() -> (RunConfig, FixturePack) {
    (RunConfig::shipped().unwrap(), FixturePack::shipped().unwrap())
}

fn m(x: f64) -> MoneyM {
    MoneyM::from_f64(x).unwrap()
}

fn rounded(v: MoneyM) -> Decimal {
    v.round_display(1)
}

#[test]
fn criterion_01_headline_appraisal() {
    let (cfg, pack) = setup();
    let start = Instant::now();
    let b = run(&cfg, &pack, Stages::NONE).unwrap();
    let elapsed = start.elapsed();
    let h = &b.headline;
    let mut f = Vec::new();
    check(
        &mut f,
        rounded(h.pv_benefits) == dec!(1233.9),
        format!("PV benefits {}", h.pv_benefits),
    );
    check(
        &mut f,
        rounded(h.pv_costs) == dec!(877.2),
        format!("PV costs {}", h.pv_costs),
    );
    check(
        &mut f,
        h.npv == h.pv_benefits - h.pv_costs,
        "NPV is not the exact difference",
    );
    check(&mut f, rounded(h.npv) == dec!(356.7), format!("NPV {}", h.npv));
    let bcr = h.bcr.unwrap_or(f64::NAN);
    check(&mut f, (bcr - 1.41).abs() <= 0.005, format!("BCR {bcr}"));
    check(&mut f, elapsed.as_secs_f64() < 1.0, format!("runtime {elapsed:?}"));
    println!("  npv {} bcr {bcr:.4} in {elapsed:?}", h.npv);
    verdict(1, "headline appraisal", &f);
}

#[test]
fn criterion_02_stream_fidelity() {
    let (cfg, pack) = setup();
    let check_out = check_fixtures(&pack, Some(&cfg.model().unwrap())).unwrap();
    let mut f = Vec::new();
    let expected: BTreeMap<Stream, f64> = [
        (Stream::Rod, 70.63),
        (Stream::Roetas, 148.20),
        (Stream::CsdrPlr, 170.80),
        (Stream::Fes, 75.61),
        (Stream::Aec, 292.99),
        (Stream::Gsms, 347.99),
        (Stream::Co2, 89.07),
        (Stream::Rap, 38.64),
    ]
    .into_iter()
    .collect();
    check(&mut f, check_out.stream_fidelity.len() == 8, "eight streams checked");
    for s in &check_out.stream_fidelity {
        let reference = expected[&s.stream];
        check(
            &mut f,
            (s.reference.to_f64() - reference).abs() < 1e-9,
            format!("{} reference {}", s.stream.code(), s.reference),
        );
        let dev = (s.repaired_sum.to_f64() - reference) / reference;
        println!(
            "  {:8} raw {:7.2} ({:+.2}%) repaired {:7.2} ({:+.2}%)",
            s.stream.code(),
            s.raw_sum.to_f64(),
            100.0 * s.raw_deviation,
            s.repaired_sum.to_f64(),
            100.0 * dev
        );
        check(
            &mut f,
            dev.abs() <= STREAM_TOLERANCE,
            format!("{} column sum off by {:.2}%", s.stream.code(), 100.0 * dev),
        );
    }
    check(
        &mut f,
        check_out.streams_ok(),
        "fixture check reports stream discrepancy",
    );
    let dips: Vec<_> = check_out
        .anomalies
        .iter()
        .filter_map(|a| match a {
            Anomaly::ColumnDip { stream, year, .. } => Some((*stream, *year)),
            _ => None,
        })
        .collect();
    let rows: Vec<_> = check_out
        .anomalies
        .iter()
        .filter_map(|a| match a {
            Anomaly::RowTotal { year, .. } => Some(*year),
            _ => None,
        })
        .collect();
    check(
        &mut f,
        check_out.anomalies.len() == 2,
        format!("{} anomalies flagged", check_out.anomalies.len()),
    );
    check(
        &mut f,
        dips == vec![(Stream::Co2, 2030)],
        format!("column dips {dips:?}"),
    );
    check(&mut f, rows == vec![2034], format!("row totals {rows:?}"));
    verdict(2, "stream fidelity and anomaly detection", &f);
}

#[test]
fn criterion_03_country_aggregation() {
    let (cfg, pack) = setup();
    let b = run(&cfg, &pack, Stages::NONE).unwrap();
    let mut f = Vec::new();
    let sum_b: MoneyM = b.countries.iter().map(|c| c.result.pv_benefits).sum();
    let sum_c: MoneyM = b.countries.iter().map(|c| c.result.pv_costs).sum();
    check(
        &mut f,
        sum_b == b.headline.pv_benefits,
        format!("benefits {sum_b} vs {}", b.headline.pv_benefits),
    );
    check(
        &mut f,
        sum_c == b.headline.pv_costs,
        format!("costs {sum_c} vs {}", b.headline.pv_costs),
    );
    let expected = [
        ("AT", dec!(550.8), dec!(390.4), 45.0),
        ("HU", dec!(434.7), dec!(310.8), 35.0),
        ("SI", dec!(248.4), dec!(176.0), 20.0),
    ];
    for (id, pb, pc, share) in expected {
        let Some(c) = b.countries.iter().find(|c| c.country == CountryId::new(id)) else {
            f.push(format!("{id} missing"));
            continue;
        };
        let bcr = c.result.bcr.unwrap_or(f64::NAN);
        let cost_share = 100.0 * c.result.pv_costs.to_f64() / b.headline.pv_costs.to_f64();
        println!(
            "  {id} benefits {} costs {} bcr {bcr:.4} cost share {cost_share:.1}%",
            rounded(c.result.pv_benefits),
            rounded(c.result.pv_costs)
        );
        check(
            &mut f,
            rounded(c.result.pv_benefits) == pb,
            format!("{id} benefits {}", c.result.pv_benefits),
        );
        check(
            &mut f,
            rounded(c.result.pv_costs) == pc,
            format!("{id} costs {}", c.result.pv_costs),
        );
        check(&mut f, (1.395..=1.415).contains(&bcr), format!("{id} BCR {bcr}"));
        check(
            &mut f,
            (cost_share - share).abs() <= 2.0,
            format!("{id} cost share {cost_share:.2}%"),
        );
    }
    verdict(3, "country aggregation", &f);
}

#[test]
fn criterion_04_projections() {
    let (cfg, pack) = setup();
    let model = cfg.model().unwrap();
    let generated = ProjectionSet::generate(&model).unwrap();
    let mut f = Vec::new();
    let ev = |c: &str| {
        *generated
            .country(&CountryId::new(c))
            .unwrap()
            .ev_stock
            .get(2035)
            .unwrap()
    };
    let (at, hu) = (ev("AT"), ev("HU"));
    println!("  AT EV 2035 {at:.2}, HU EV 2035 {hu:.2}");
    check(&mut f, (at - 1307.5).abs() <= 1.0, format!("AT EV 2035 {at:.2}"));
    check(&mut f, (hu - 443.3).abs() <= 1.0, format!("HU EV 2035 {hu:.2}"));
    let drift = check_fixtures(&pack, Some(&model)).unwrap().projection_drift;
    let outside: Vec<_> = drift.iter().filter(|d| !d.within_tolerance).collect();
    println!(
        "  {} of {} generated cells outside ±1.5% of the fixture stocks",
        outside.len(),
        drift.len()
    );
    check(&mut f, !drift.is_empty(), "no projection cells compared");
    for d in outside.iter().take(5) {
        f.push(format!("{d:?}"));
    }
    if outside.len() > 5 {
        f.push(format!("... and {} more cells", outside.len() - 5));
    }
    verdict(4, "projections", &f);
}

#[test]
fn criterion_05_payback() {
    let (cfg, pack) = setup();
    let b = run(&cfg, &pack, Stages::NONE).unwrap();
    let mut f = Vec::new();
    let h = &b.headline;
    println!(
        "  payback_eoy {:?} payback_interp {:?}",
        h.payback_eoy, h.payback_interp
    );
    check(
        &mut f,
        h.payback_eoy == Some(2032),
        format!("payback_eoy {:?}", h.payback_eoy),
    );
    let interp = h.payback_interp.unwrap_or(f64::NAN);
    check(
        &mut f,
        (2031.0..=2032.0).contains(&interp),
        format!("payback_interp {interp}"),
    );
    let notes = annotation_index(&b);
    match notes.get("payback_claim") {
        Some(msg) => check(
            &mut f,
            msg.contains("2031") && msg.contains("2032") && msg.contains("interpolated"),
            format!("annotation lacks both conventions: {msg}"),
        ),
        None => f.push("payback annotation missing".into()),
    }
    verdict(5, "payback", &f);
}

#[test]
fn criterion_06_formula_units() {
    let (cfg, _) = setup();
    let mut f = Vec::new();

    let p = BenefitParams {
        c_od_base: 24.2,
        delta_eff: 0.15,
        r_odp: 0.13,
        ..BenefitParams::default()
    };
    let rod = rod_annual(&p);
    check(&mut f, m(rod).value() == dec!(3.6179), format!("ROD {rod}"));

    let model = cfg.model().unwrap();
    let at = model.country(&CountryId::new("AT")).unwrap();
    let scc = interpolate_scc(at, model.axis(), 2030).unwrap();
    check(&mut f, (scc - 100.556).abs() <= 0.001, format!("SCC(2030) {scc}"));

    let p = BenefitParams {
        res_curt: 0.01,
        flh_res: 1200.0,
        c_curt: 50.0,
        ..BenefitParams::default()
    };
    let s = PhysicalState::from_projection(&p, 0.0, 0.0, 20.0);
    let aec = aec_annual(&p, &s, AecMode::Parametric, None, None).unwrap();
    check(&mut f, m(aec).value() == dec!(12), format!("AEC {aec}"));

    let proj = ProjectionSet::generate(&model).unwrap();
    let params: BTreeMap<_, _> = cfg
        .formula
        .params_map(&model)
        .unwrap()
        .into_iter()
        .map(|(c, p)| (c, p.without_odp_effects()))
        .collect();
    let zero = benefits_table(&model, &proj, &params, &cfg.formula.drivers, &cfg.formula.options()).unwrap();
    for s in Stream::ALL {
        let t = zero.table.stream_total(s);
        check(&mut f, t.is_zero(), format!("{} under zero effects: {t}", s.code()));
    }
    println!("  ROD {rod:.6} SCC(2030) {scc:.4} AEC {aec:.6}");
    verdict(6, "formula unit values", &f);
}

#[test]
fn criterion_07_tornado() {
    let (cfg, pack) = setup();
    let b = run(
        &cfg,
        &pack,
        Stages {
            tornado: true,
            ..Stages::NONE
        },
    )
    .unwrap();
    let mut f = Vec::new();
    let targets = [
        (UncertainParam::AiAccuracy, 246.0),
        (UncertainParam::AdoptionRate, 222.0),
        (UncertainParam::Capex, 112.0),
        (UncertainParam::Opex, 63.0),
        (UncertainParam::DiscountRate, 13.0),
    ];
    let position = |p: UncertainParam| b.tornado.iter().position(|t| t.parameter == p);
    let mut last = None;
    for (p, want) in targets {
        let Some(i) = position(p) else {
            f.push(format!("{p} missing"));
            continue;
        };
        let range = b.tornado[i].range.to_f64();
        println!("  {p:18} range {range:7.2} (reference {want})");
        check(
            &mut f,
            (range - want).abs() <= 0.2 * want,
            format!("{p} range {range:.2}"),
        );
        if let Some(prev) = last {
            check(&mut f, i > prev, format!("{p} out of order"));
        }
        last = Some(i);
    }
    let sweep: Vec<f64> = b.discount_sweep.iter().map(|s| s.npv.to_f64()).collect();
    check(&mut f, sweep.len() >= 2, "discount sweep too short");
    check(
        &mut f,
        sweep.windows(2).all(|w| w[1] < w[0]),
        format!("discount sweep not decreasing: {sweep:?}"),
    );
    let rates: Vec<Decimal> = b.discount_sweep.iter().map(|s| s.rate).collect();
    check(
        &mut f,
        rates.first() == Some(&dec!(0.03)) && rates.last() == Some(&dec!(0.07)),
        format!("sweep rates {rates:?}"),
    );
    verdict(7, "tornado", &f);
}

#[test]
fn criterion_08_monte_carlo() {
    let (cfg, pack) = setup();
    let prep = prepare(&cfg, &pack).unwrap();
    let appraiser = Appraiser::new(&prep.cashflows, &prep.discount).unwrap();
    let deterministic = appraise(&prep.cashflows, &prep.discount).unwrap();
    let mut f = Vec::new();

    let degenerate = McConfig {
        n_trials: 500,
        bindings: cfg
            .monte_carlo
            .bindings
            .iter()
            .map(|b| {
                Binding::new(
                    b.param,
                    Distribution::Degenerate {
                        value: b.param.base_value(&prep.discount),
                    },
                )
            })
            .collect(),
        ..cfg.monte_carlo.clone()
    };
    let s = run_trials(&appraiser, &cfg.impact_matrix, &degenerate).unwrap().summary;
    check(
        &mut f,
        s.npv.mean == deterministic.npv,
        format!("degenerate mean {} vs {}", s.npv.mean, deterministic.npv),
    );
    check(&mut f, s.npv.sd == 0.0, format!("degenerate sd {}", s.npv.sd));

    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let small = McConfig {
        n_trials: 4000,
        ..cfg.monte_carlo.clone()
    };
    let one = pool(1).install(|| run_trials(&appraiser, &cfg.impact_matrix, &small).unwrap());
    let four = pool(4).install(|| run_trials(&appraiser, &cfg.impact_matrix, &small).unwrap());
    check(&mut f, one == four, "summary differs between 1 and 4 threads");

    let start = Instant::now();
    let full = pool(1)
        .install(|| run_trials(&appraiser, &cfg.impact_matrix, &cfg.monte_carlo).unwrap())
        .summary;
    let elapsed = start.elapsed();
    let (mean, p5, p95) = (full.npv.mean.to_f64(), full.npv.p5.to_f64(), full.npv.p95.to_f64());
    println!(
        "  {} trials single-threaded in {elapsed:?}: mean {mean:.2} p5 {p5:.2} p95 {p95:.2} P(NPV>0) {}",
        full.n_trials, full.prob_npv_pos
    );
    check(&mut f, full.n_trials == 50_000, format!("{} trials", full.n_trials));
    check(
        &mut f,
        ((mean - 357.3) / 357.3).abs() <= 0.02,
        format!("mean {mean:.2}"),
    );
    check(&mut f, ((p5 - 169.62) / 169.62).abs() <= 0.15, format!("p5 {p5:.2}"));
    check(&mut f, ((p95 - 556.88) / 556.88).abs() <= 0.15, format!("p95 {p95:.2}"));
    check(
        &mut f,
        full.prob_npv_pos == 1.0,
        format!("P(NPV>0) {}", full.prob_npv_pos),
    );
    check(&mut f, elapsed.as_secs_f64() < 10.0, format!("runtime {elapsed:?}"));

    let b = run(
        &cfg,
        &pack,
        Stages {
            country_monte_carlo: true,
            ..Stages::NONE
        },
    )
    .unwrap();
    for c in &b.countries {
        match &c.monte_carlo {
            Some(s) => {
                println!("  {} {} trials P(NPV>0) {}", c.country, s.n_trials, s.prob_npv_pos);
                check(
                    &mut f,
                    s.n_trials == 10_000,
                    format!("{} ran {} trials", c.country, s.n_trials),
                );
                check(
                    &mut f,
                    s.prob_npv_pos >= 0.985,
                    format!("{} P(NPV>0) {}", c.country, s.prob_npv_pos),
                );
            }
            None => f.push(format!("{} has no Monte Carlo summary", c.country)),
        }
    }
    verdict(8, "Monte Carlo properties and calibration", &f);
}

#[test]
fn criterion_09_honest_annotations() {
    let (cfg, pack) = setup();
    assert_eq!(cfg.mode, RunMode::Fixture);
    let b = run(
        &cfg,
        &pack,
        Stages {
            scenarios: true,
            tornado: true,
            ..Stages::NONE
        },
    )
    .unwrap();
    let notes = annotation_index(&b);
    let mut f = Vec::new();
    for id in [
        "scenario_benefit_labels",
        "scenario_cost_labels",
        "scenario_discount_rows",
        "country_category_shares",
    ] {
        match notes.get(id) {
            Some(msg) if !msg.trim().is_empty() => println!("  {id}: {msg}"),
            _ => f.push(format!("annotation {id} missing or empty")),
        }
    }
    check(&mut f, !b.annotations.is_empty(), "no annotations in fixture mode");
    verdict(9, "non-reproducible items annotated", &f);
}

#[test]
fn criterion_10_ledger_properties() {
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let amount = || (0u64..2_000_000_000).prop_map(|v| Decimal::new(v as i64, 6));
    let strategy = (amount(), amount(), prop::array::uniform4(amount()), 0usize..4);
    let outcome = runner.run(&strategy, |(budget, extra, demands, upstream)| {
        let l = allocate_flexibility(budget, demands).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let total: Decimal = l.allocations.iter().sum();
        prop_assert_eq!(total + l.residual, budget);
        prop_assert!(l.residual >= Decimal::ZERO);
        for (i, (a, d)) in l.allocations.iter().zip(demands).enumerate() {
            prop_assert!(*a >= Decimal::ZERO && *a <= d);
            if *a < d {
                prop_assert!(l.allocations[i + 1..].iter().all(|x| x.is_zero()));
                prop_assert!(l.residual.is_zero());
            }
        }
        let more = allocate_flexibility(budget + extra, demands).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for (a, b) in l.allocations.iter().zip(more.allocations) {
            prop_assert!(b >= *a);
        }
        let mut raised = demands;
        raised[upstream] += extra;
        let r = allocate_flexibility(budget, raised).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for j in upstream + 1..4 {
            prop_assert!(r.allocations[j] <= l.allocations[j]);
        }
        Ok(())
    });
    let mut f = Vec::new();
    if let Err(e) = outcome {
        f.push(e.to_string());
    }
    println!("  10000 randomized budget/demand cases checked");
    verdict(10, "ledger conservation and order monotonicity", &f);
}
