use countimpute_core::missingness::ResponseKind;
use countimpute_core::rng::substream;
use countimpute_core::simulation::{
    aggregate, dispersion_index, generate_population, generate_underdispersed, run_replicate, run_scenario,
    scenario_population, Dispersion, Method, ScenarioConfig,
};

fn config(dispersion: Dispersion) -> ScenarioConfig {
    ScenarioConfig { dispersion, population_size: 200_000, ..ScenarioConfig::default() }
}

fn x_of(config: &ScenarioConfig) -> Vec<u64> {
    let pop = generate_population(config, &mut substream(1, &[])).unwrap();
    (0..pop.data.len()).map(|i| pop.data.hidden_x(i).unwrap()).collect()
}

#[test]
fn equidispersed_population() {
    let x = x_of(&config(Dispersion::Equi));
    let n = x.len() as f64;
    let mean = x.iter().sum::<u64>() as f64 / n;
    assert!((mean - 2.0).abs() < 3.0 * (2.0 / n).sqrt());
    assert!((dispersion_index(&x) - 1.0).abs() < 0.02);
}

#[test]
fn overdispersed_population() {
    let x = x_of(&config(Dispersion::Over));
    assert!((dispersion_index(&x) - 2.0).abs() < 0.05);
}

#[test]
fn zero_inflated_population() {
    let x = x_of(&config(Dispersion::ZeroInflated));
    let p0 = x.iter().filter(|&&v| v == 0).count() as f64 / x.len() as f64;
    let expected = 0.1 + 0.9 * (-2.0f64).exp();
    assert!((p0 - expected).abs() < 4.0 * (expected * (1.0 - expected) / x.len() as f64).sqrt() + 1e-3);
}

#[test]
fn underdispersed_million() {
    let x = generate_underdispersed(2.0, 0.5, &mut substream(2, &[]), 1_000_000).unwrap();
    let d = dispersion_index(&x);
    assert!((0.49..=0.51).contains(&d), "{d}");
    let mean = x.iter().sum::<u64>() as f64 / x.len() as f64;
    assert!((mean / 2.0 - 1.0).abs() < 0.02);
}

#[test]
fn underdispersed_extreme_target_collapses_to_mean() {
    let x = generate_underdispersed(2.0, 1e-6, &mut substream(3, &[]), 5000).unwrap();
    assert!(dispersion_index(&x) <= 0.01 + 1e-6);
    let off = x.iter().filter(|&&v| v != 2).count();
    assert!(off < 60, "{off} values differ from round(lambda)");
}

#[test]
fn replicate_samples_without_replacement() {
    let cfg = ScenarioConfig { population_size: 5000, sample_size: 2000, replicates: 2, methods: vec![Method::Listwise], ..ScenarioConfig::default() };
    let pop = scenario_population(&cfg).unwrap();
    // Rows are identified by (y, x); y is continuous so collisions are impossible.
    let mut rng = substream(cfg.seed, &[1, 0]);
    let rows = rand::seq::index::sample(&mut rng, pop.data.len(), cfg.sample_size).into_vec();
    let mut sorted = rows.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), cfg.sample_size);
    assert!(rows.iter().all(|&r| r < pop.data.len()));
    let outcome = run_replicate(&cfg, &pop, 0).unwrap();
    assert!(outcome.results[0].is_some());
}

#[test]
fn metrics_are_sane_and_reproducible() {
    let cfg = ScenarioConfig {
        population_size: 20_000,
        sample_size: 500,
        replicates: 20,
        ..ScenarioConfig::default()
    };
    let a = run_scenario(&cfg).unwrap();
    assert_eq!(a, run_scenario(&cfg).unwrap());
    for m in &a.methods {
        assert_eq!(m.failures + m.converged, 20);
        if let Some(x) = m.metrics {
            assert!((0.0..=1.0).contains(&x.coverage));
            assert!(x.ail > 0.0);
        }
    }
}

#[test]
fn tiny_missing_fraction_matches_full_data() {
    let base = ScenarioConfig {
        population_size: 20_000,
        sample_size: 2000,
        replicates: 5,
        missing_fraction: 1.0 / 2000.0,
        methods: vec![Method::Listwise, Method::Poisson, Method::NegBin, Method::ComPoisson],
        ..ScenarioConfig::default()
    };
    let pop = scenario_population(&base).unwrap();
    for r in 0..base.replicates {
        let out = run_replicate(&base, &pop, r).unwrap();
        let lw = out.results[0].unwrap();
        for res in out.results.iter().skip(1) {
            let res = res.unwrap();
            assert!((res.q_bar - lw.q_bar).abs() < 0.01 * lw.t.sqrt().max(1e-3) + 2e-3);
            assert!((res.ci.length() / lw.ci.length() - 1.0).abs() < 0.05);
        }
    }
}

#[test]
fn listwise_interval_grows_with_missingness() {
    let mut last = 0.0;
    for &f in &[0.05, 0.10, 0.20, 0.30] {
        let cfg = ScenarioConfig {
            population_size: 20_000,
            sample_size: 2000,
            replicates: 30,
            missing_fraction: f,
            methods: vec![Method::Listwise],
            ..ScenarioConfig::default()
        };
        let s = run_scenario(&cfg).unwrap();
        let ail = s.methods[0].metrics.unwrap().ail;
        assert!(ail >= last * 0.99, "{f}: {ail} < {last}");
        last = ail;
    }
}

#[test]
fn every_response_kind_runs() {
    for kind in [ResponseKind::Binary, ResponseKind::Continuous, ResponseKind::Discrete] {
        for mechanism in [countimpute_core::missingness::Mechanism::Mcar, countimpute_core::missingness::Mechanism::Mar] {
            let cfg = ScenarioConfig {
                response_kind: kind,
                mechanism,
                population_size: 10_000,
                sample_size: 500,
                replicates: 2,
                methods: vec![Method::Listwise, Method::Poisson],
                ..ScenarioConfig::default()
            };
            let pop = scenario_population(&cfg).unwrap();
            let outs: Vec<_> = (0..2).map(|r| run_replicate(&cfg, &pop, r).unwrap()).collect();
            let s = aggregate(&cfg, pop.beta, &outs);
            assert!(s.methods.iter().all(|m| m.converged == 2), "{kind:?} {mechanism:?}: {s:?}");
        }
    }
}
