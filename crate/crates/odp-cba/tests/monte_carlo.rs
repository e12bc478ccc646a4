use odp_cba::appraisal::Appraiser;
use odp_cba::io::config::RunConfig;
use odp_cba::io::fixtures::FixturePack;
use odp_cba::io::pipeline::prepare;
use odp_cba::model::MoneyM;
use odp_cba::monte_carlo::{run_trials, summarize, Binding, Distribution, McConfig, McError};
use odp_cba::scenario::{ImpactMatrix, UncertainParam};
use rust_decimal::Decimal;

fn setup() -> (RunConfig, Appraiser) {
    let cfg = RunConfig::shipped().unwrap();
    let prep = prepare(&cfg, &FixturePack::shipped().unwrap()).unwrap();
    let a = Appraiser::new(&prep.cashflows, &prep.discount).unwrap();
    (cfg, a)
}

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn identical_seed_is_bit_identical_across_pools() {
    let (cfg, a) = setup();
    let mc = McConfig {
        n_trials: 3000,
        master_seed: 7,
        dump_trials: true,
        ..cfg.monte_carlo.clone()
    };
    let one = pool(1).install(|| run_trials(&a, &cfg.impact_matrix, &mc).unwrap());
    let three = pool(3).install(|| run_trials(&a, &cfg.impact_matrix, &mc).unwrap());
    let eight = pool(8).install(|| run_trials(&a, &cfg.impact_matrix, &mc).unwrap());
    assert_eq!(one, three);
    assert_eq!(one, eight);
    assert_eq!(one.summary.npv.sd.to_bits(), eight.summary.npv.sd.to_bits());
}

#[test]
fn different_seeds_differ() {
    let (cfg, a) = setup();
    let mk = |seed| McConfig {
        n_trials: 500,
        master_seed: seed,
        ..cfg.monte_carlo.clone()
    };
    let x = run_trials(&a, &cfg.impact_matrix, &mk(1)).unwrap().summary;
    let y = run_trials(&a, &cfg.impact_matrix, &mk(2)).unwrap().summary;
    assert_ne!(x, y);
}

#[test]
fn mean_converges_to_deterministic_npv() {
    let (cfg, a) = setup();
    let base = a.evaluate(&[Decimal::ONE; 11], None).unwrap().npv.to_f64();
    let mk = |n| McConfig {
        n_trials: n,
        ..cfg.monte_carlo.clone()
    };
    let small = run_trials(&a, &cfg.impact_matrix, &mk(1_000)).unwrap().summary;
    let large = run_trials(&a, &cfg.impact_matrix, &mk(100_000)).unwrap().summary;
    let se_small = small.npv.sd / 1_000f64.sqrt();
    let se_large = large.npv.sd / 100_000f64.sqrt();
    assert!((small.npv.mean.to_f64() - base).abs() < 4.0 * se_small);
    assert!((large.npv.mean.to_f64() - base).abs() < 4.0 * se_large);
    assert!((small.npv.sd - large.npv.sd).abs() / large.npv.sd < 0.1);
}

#[test]
fn shifting_a_positive_driver_raises_every_trial() {
    let (cfg, a) = setup();
    let shifted = |mean: f64| McConfig {
        n_trials: 2000,
        dump_trials: true,
        bindings: cfg
            .monte_carlo
            .bindings
            .iter()
            .map(|b| match b.param {
                UncertainParam::AiAccuracy => Binding {
                    dist: Distribution::Normal { mean, sd: 0.095 },
                    ..b.clone()
                },
                _ => b.clone(),
            })
            .collect(),
        ..cfg.monte_carlo.clone()
    };
    let lo = run_trials(&a, &cfg.impact_matrix, &shifted(1.0))
        .unwrap()
        .trials
        .unwrap();
    let hi = run_trials(&a, &cfg.impact_matrix, &shifted(1.05))
        .unwrap()
        .trials
        .unwrap();
    assert!(lo.iter().zip(&hi).all(|(l, h)| h.npv > l.npv));
}

#[test]
fn degenerate_run_has_no_spread() {
    let (cfg, a) = setup();
    let mc = McConfig {
        n_trials: 100,
        bindings: vec![Binding::new(
            UncertainParam::Capex,
            Distribution::Degenerate { value: 1.0 },
        )],
        ..cfg.monte_carlo.clone()
    };
    let s = run_trials(&a, &cfg.impact_matrix, &mc).unwrap().summary;
    assert_eq!(s.npv.mean, a.evaluate(&[Decimal::ONE; 11], None).unwrap().npv);
    assert_eq!(s.npv.sd, 0.0);
    assert_eq!(s.npv.p5, s.npv.p95);
    assert_eq!(s.histogram.counts.iter().sum::<u64>(), 100);
}

#[test]
fn rejects_bad_configs() {
    let (cfg, a) = setup();
    let zero = McConfig {
        n_trials: 0,
        ..cfg.monte_carlo.clone()
    };
    assert_eq!(
        run_trials(&a, &cfg.impact_matrix, &zero).unwrap_err(),
        McError::ZeroTrials
    );

    let unbound = McConfig {
        n_trials: 10,
        ..cfg.monte_carlo.clone()
    };
    let empty = ImpactMatrix::default();
    assert!(matches!(
        run_trials(&a, &empty, &unbound),
        Err(McError::UnboundParam(_))
    ));

    let twice = McConfig {
        n_trials: 10,
        bindings: vec![
            Binding::new(UncertainParam::Capex, Distribution::Degenerate { value: 1.0 }),
            Binding::new(UncertainParam::Capex, Distribution::Degenerate { value: 1.0 }),
        ],
        ..cfg.monte_carlo.clone()
    };
    assert_eq!(
        run_trials(&a, &cfg.impact_matrix, &twice).unwrap_err(),
        McError::DuplicateBinding(UncertainParam::Capex)
    );

    let bad = McConfig {
        n_trials: 10,
        bindings: vec![Binding::new(
            UncertainParam::Capex,
            Distribution::Triangular {
                min: 1.0,
                mode: 0.5,
                max: 2.0,
            },
        )],
        ..cfg.monte_carlo.clone()
    };
    assert!(matches!(
        run_trials(&a, &cfg.impact_matrix, &bad),
        Err(McError::InvalidDistribution { .. })
    ));
}

#[test]
fn summary_percentiles_use_nearest_rank() {
    let trials: Vec<(MoneyM, Option<f64>)> = (1..=20).map(|i| (MoneyM(Decimal::from(i)), Some(1.0))).collect();
    let s = summarize(&trials, 4).unwrap();
    assert_eq!(s.npv.p5, MoneyM(Decimal::from(1)));
    assert_eq!(s.npv.p50, MoneyM(Decimal::from(10)));
    assert_eq!(s.npv.p95, MoneyM(Decimal::from(19)));
    assert_eq!(s.histogram.counts, vec![5, 5, 5, 5]);
    assert_eq!(summarize(&[], 4).unwrap_err(), McError::EmptyTrialSet);
}
