use odp_cba::appraisal::{discount_series, Appraiser, CashflowBasis, DiscountSpec, N_COLUMNS};
use odp_cba::benefits::allocate_flexibility;
use odp_cba::io::config::RunConfig;
use odp_cba::io::fixtures::FixturePack;
use odp_cba::io::pipeline::prepare;
use odp_cba::model::{interpolate_scc, CountryAssumptions, ModelDocument, MoneyM, TimeAxis, YearSeries};
use odp_cba::projections::project_stock;
use odp_cba::scenario::{apply_scenario, AppraisalInputs, ScenarioSpec};
use proptest::prelude::*;
use rust_decimal::Decimal;

fn amount() -> impl Strategy<Value = Decimal> {
    (0i64..1_000_000_000).prop_map(|v| Decimal::new(v, 6))
}

fn money_series(axis: TimeAxis) -> impl Strategy<Value = YearSeries<MoneyM>> {
    prop::collection::vec(0i64..5_000_000, axis.len()).prop_map(move |v| {
        YearSeries::money(axis, v.into_iter().map(|x| MoneyM(Decimal::new(x, 4))).collect()).unwrap()
    })
}

fn rate() -> impl Strategy<Value = Decimal> {
    (0i64..120).prop_map(|bp| Decimal::new(bp, 3))
}

fn austria() -> CountryAssumptions {
    let mut a = RunConfig::shipped().unwrap().countries.remove(0);
    a.cost_share = 1.0;
    a
}

fn country() -> impl Strategy<Value = CountryAssumptions> {
    (
        1.0f64..2000.0,
        -0.2f64..0.4,
        0.0f64..50.0,
        0.0f64..30.0,
        0.0f64..3000.0,
        0.0f64..200.0,
        0.0f64..100.0,
    )
        .prop_map(|(ev, cagr, et, res, add, scc0, dscc)| CountryAssumptions {
            ev_stock_0: ev,
            ev_cagr: cagr,
            et_stock_0: et,
            res_capacity_0: res,
            res_addition: add,
            scc_start: scc0,
            scc_end: scc0 + dscc,
            ..austria()
        })
}

fn base_inputs() -> AppraisalInputs {
    let prep = prepare(&RunConfig::shipped().unwrap(), &FixturePack::shipped().unwrap()).unwrap();
    AppraisalInputs {
        cashflows: prep.cashflows,
        discount: prep.discount,
    }
}

proptest! {
    #[test]
    fn ledger_conserves_and_fills_in_order(budget in amount(), demands in prop::array::uniform4(amount())) {
        let l = allocate_flexibility(budget, demands).unwrap();
        let used: Decimal = l.allocations.iter().sum();
        prop_assert_eq!(used + l.residual, budget);
        let short = l.allocations.iter().zip(demands).position(|(a, d)| *a < d);
        if let Some(i) = short {
            prop_assert!(l.allocations[i + 1..].iter().all(|a| a.is_zero()));
        }
    }

    #[test]
    fn ledger_more_budget_never_takes_away(budget in amount(), extra in amount(), demands in prop::array::uniform4(amount())) {
        let a = allocate_flexibility(budget, demands).unwrap();
        let b = allocate_flexibility(budget + extra, demands).unwrap();
        for (x, y) in a.allocations.iter().zip(b.allocations) {
            prop_assert!(y >= *x);
        }
    }

    #[test]
    fn raising_upstream_demand_never_feeds_downstream(
        budget in amount(),
        extra in amount(),
        demands in prop::array::uniform4(amount()),
        i in 0usize..4,
    ) {
        let base = allocate_flexibility(budget, demands).unwrap();
        let mut raised = demands;
        raised[i] += extra;
        let r = allocate_flexibility(budget, raised).unwrap();
        for j in i + 1..4 {
            prop_assert!(r.allocations[j] <= base.allocations[j]);
        }
    }

    #[test]
    fn scc_is_monotone(c in country()) {
        let axis = TimeAxis::default();
        let values: Vec<f64> = axis.years().map(|y| interpolate_scc(&c, &axis, y).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        prop_assert_eq!(values[0], c.scc_start);
        prop_assert_eq!(values[values.len() - 1], c.scc_end);
    }

    #[test]
    fn positive_growth_never_shrinks(stock in 0.1f64..5000.0, cagr in 0.0f64..0.5) {
        let s = project_stock(stock, cagr, &TimeAxis::default()).unwrap();
        prop_assert!(s.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn discounting_is_linear(
        x in money_series(TimeAxis::default()),
        y in money_series(TimeAxis::default()),
        r in rate(),
    ) {
        let axis = TimeAxis::default();
        let d = DiscountSpec::new(r, 2025).unwrap();
        let sum = YearSeries::money(axis, x.values().iter().zip(y.values()).map(|(a, b)| *a + *b).collect()).unwrap();
        let lhs = discount_series(&sum, &d, CashflowBasis::Nominal).unwrap().value();
        let rhs = discount_series(&x, &d, CashflowBasis::Nominal).unwrap().value()
            + discount_series(&y, &d, CashflowBasis::Nominal).unwrap().value();
        prop_assert!((lhs - rhs).abs() <= Decimal::new(2, 9));
    }

    #[test]
    fn model_round_trips_through_json(c in country()) {
        let m = ModelDocument { axis: TimeAxis::default(), countries: vec![c] }.validate().unwrap();
        let text = serde_json::to_string(&m.to_document()).unwrap();
        let back: ModelDocument = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.validate().unwrap(), m);
    }

    #[test]
    fn validation_is_idempotent(c in country()) {
        let doc = ModelDocument { axis: TimeAxis::default(), countries: vec![c] };
        let once = doc.validate().unwrap();
        let twice = once.to_document().validate().unwrap();
        prop_assert_eq!(once, twice);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bcr_is_scale_invariant(k in 0.1f64..10.0) {
        let inputs = base_inputs();
        let a = Appraiser::new(&inputs.cashflows, &inputs.discount).unwrap();
        let kd = Decimal::try_from(k).unwrap();
        let base = a.evaluate(&[Decimal::ONE; N_COLUMNS], None).unwrap();
        let scaled = a.evaluate(&[kd; N_COLUMNS], None).unwrap();
        prop_assert!((scaled.bcr().unwrap() - base.bcr().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn scenario_then_inverse_restores_npv(kb in 0.5f64..2.0, kc in 0.5f64..2.0) {
        let inputs = base_inputs();
        let fwd = ScenarioSpec { benefit_multiplier: kb, cost_multiplier: kc, ..ScenarioSpec::identity("fwd") };
        let back = ScenarioSpec { benefit_multiplier: 1.0 / kb, cost_multiplier: 1.0 / kc, ..ScenarioSpec::identity("back") };
        let moved = odp_cba::scenario::perturb(&inputs, &fwd).unwrap();
        let restored = apply_scenario(&moved, &back).unwrap();
        let base = apply_scenario(&inputs, &ScenarioSpec::identity("base")).unwrap();
        prop_assert!((restored.npv.to_f64() - base.npv.to_f64()).abs() < 1e-6);
    }
}
