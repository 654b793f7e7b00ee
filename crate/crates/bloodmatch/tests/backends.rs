//! The sparse and dense LP backends must agree on every model the pipeline
//! builds.

use bloodmatch::core::sim::{estimate_normalization, fixed_realization, NormalizationProtocol};
use bloodmatch::core::solver::{DenseSimplex, ProportionalityScope, SolveOptions};
use bloodmatch::core::synth::{generate_city, tiny_instance, GeneratorConfig, Population, TinyInstanceConfig};
use bloodmatch::core::rng::Seeds;
use bloodmatch::core::{LatLon, Regime, Scenario, Solver};
use bloodmatch::sparse::{AutoBackend, SparseSimplex};

fn options() -> SolveOptions {
    SolveOptions {
        scope: ProportionalityScope::PositiveNormalization,
        ..SolveOptions::default()
    }
}

fn city(seed: u64, donors: usize, recipients: usize, horizon: usize) -> Scenario {
    let mut cfg = GeneratorConfig::new(
        donors,
        recipients,
        Population::UniformDisc {
            center: LatLon::new(-23.55, -46.63),
            radius_km: 10.0,
        },
    );
    cfg.horizon = horizon;
    cfg.rate_limit = 3;
    cfg.seed = seed;
    let s = generate_city(&cfg).unwrap();
    let root = Seeds::new(seed);
    let r = fixed_realization(&s, &root);
    let m = estimate_normalization(&s, 50, NormalizationProtocol::FixedRealization, Regime::FixedTime, &r, &root).unwrap();
    s.with_normalization(m)
}

fn assert_agree(s: &Scenario, gamma: f64, with_milp: bool) {
    let dense = Solver::new(DenseSimplex::default()).with_options(options());
    let sparse = Solver::new(SparseSimplex).with_options(options());
    let r = fixed_realization(s, &Seeds::new(1));
    let mut pairs = vec![
        (dense.fixedtime_lp(s, gamma).unwrap(), sparse.fixedtime_lp(s, gamma).unwrap()),
        (dense.nadapopt_lp(s, gamma).unwrap(), sparse.nadapopt_lp(s, gamma).unwrap()),
        (dense.ratelimit_lp(s, gamma).unwrap(), sparse.ratelimit_lp(s, gamma).unwrap()),
    ];
    if with_milp {
        pairs.push((dense.offline_opt(s, &r, gamma).unwrap(), sparse.offline_opt(s, &r, gamma).unwrap()));
        pairs.push((dense.ratelimit_opt(s, &r, gamma).unwrap(), sparse.ratelimit_opt(s, &r, gamma).unwrap()));
    }
    for (d, sp) in pairs {
        let tol = 1e-6 * d.objective.abs().max(1.0);
        assert!(
            (d.objective - sp.objective).abs() <= tol,
            "{} at γ={gamma}: dense {} vs sparse {}",
            d.kind.as_str(),
            d.objective,
            sp.objective
        );
    }
}

#[test]
fn backends_agree_on_small_cities() {
    for seed in 0..6 {
        let s = city(seed, 8, 4, 6);
        for gamma in [0.0, 0.3, 0.7, 1.0] {
            assert_agree(&s, gamma, false);
        }
    }
}

#[test]
fn backends_agree_on_tiny_instances() {
    for seed in 0..60 {
        let s = tiny_instance(&TinyInstanceConfig::default(), seed);
        for gamma in [0.0, 0.5, 1.0] {
            assert_agree(&s, gamma, true);
        }
    }
}

#[test]
fn auto_backend_handles_a_metro_sized_lp() {
    let s = city(3, 80, 12, 30);
    let auto = Solver::new(AutoBackend::default()).with_options(options());
    let sparse = Solver::new(SparseSimplex).with_options(options());
    let a = auto.nadapopt_lp(&s, 0.5).unwrap();
    let b = sparse.nadapopt_lp(&s, 0.5).unwrap();
    assert_eq!(a.objective, b.objective);
    let zero = auto.fixedtime_lp(&s, 0.0).unwrap();
    assert!(zero.objective + 1e-9 >= a.objective);
}
