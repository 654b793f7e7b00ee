use bloodmatch_core::graph::{DemandRealization, LatLon, RecipientKind, Scenario, StepValues};
use bloodmatch_core::oracle::brute_force_opt;
use bloodmatch_core::sim::draw_realization;
use bloodmatch_core::solver::{
    solve_fixedtime_lp, solve_nadapopt_lp, solve_offline_opt, solve_ratelimit_lp, solve_ratelimit_opt,
    ProportionalityEncoding, ProportionalityScope, SolveOptions, Solver,
};
use bloodmatch_core::synth::{tiny_instance, TinyInstanceConfig};
use bloodmatch_core::rng::{Domain, Seeds};
use bloodmatch_core::{EdgeIdx, Error, RecipientIdx, Regime};
use proptest::prelude::*;

const TOL: f64 = 1e-6;

/// One donor, one step, recipients A (w = 0.9) and B (w = 1.0).
fn pair(m: Option<Vec<f64>>) -> Scenario {
    let mut b = Scenario::builder(1, 1);
    let u = b.add_donor("u", LatLon::default(), 1);
    let a = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
    let c = b.add_recipient("B", LatLon::default(), RecipientKind::Static);
    b.add_edge(u, a, StepValues::Constant(0.9));
    b.add_edge(u, c, StepValues::Constant(1.0));
    if let Some(m) = m {
        b.set_normalization(m);
    }
    b.build()
}

/// One donor, one always-available recipient, `T = 2`, `K = 2`, weights
/// (ε, 1).
fn wait_instance(eps: f64) -> Scenario {
    let mut b = Scenario::builder(2, 2);
    let u = b.add_donor("u", LatLon::default(), 1);
    let v = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
    b.add_edge(u, v, StepValues::PerStep(vec![eps, 1.0]));
    b.build()
}

#[test]
fn offline_opt_on_the_pair() {
    let s = pair(Some(vec![0.45, 0.5]));
    let r = DemandRealization::all_available(&s);
    let z0 = solve_offline_opt(&s, &r, 0.0).unwrap();
    assert!((z0.objective - 1.0).abs() < TOL);
    assert!((z0.x(EdgeIdx(1), 1) - 1.0).abs() < TOL);
    assert!(z0.x(EdgeIdx(0), 1).abs() < TOL);
    // Any single match leaves the other recipient at zero.
    let z1 = solve_offline_opt(&s, &r, 1.0).unwrap();
    assert!(z1.objective.abs() < TOL);
}

#[test]
fn empty_edge_sets_give_zero() {
    let mut b = Scenario::builder(3, 2);
    b.add_donor("u", LatLon::default(), 1);
    b.add_recipient("A", LatLon::default(), RecipientKind::Static);
    let s = b.build();
    let r = DemandRealization::all_available(&s);
    assert_eq!(solve_offline_opt(&s, &r, 0.0).unwrap().objective, 0.0);
    assert_eq!(solve_fixedtime_lp(&s, 0.0).unwrap().objective, 0.0);
    assert_eq!(solve_nadapopt_lp(&s, 0.0).unwrap().objective, 0.0);
    assert_eq!(solve_ratelimit_opt(&s, &r, 0.0).unwrap().objective, 0.0);
    assert_eq!(solve_ratelimit_lp(&s, 0.0).unwrap().objective, 0.0);
}

#[test]
fn fixedtime_lp_caps_by_availability() {
    let mut b = Scenario::builder(1, 1);
    let u = b.add_donor("u", LatLon::default(), 1);
    let v = b.add_recipient("A", LatLon::default(), RecipientKind::Dynamic);
    b.set_availability(v, StepValues::Constant(0.5));
    b.add_edge(u, v, StepValues::Constant(1.0));
    let s = b.build();
    let z = solve_fixedtime_lp(&s, 0.0).unwrap();
    assert!((z.objective - 0.5).abs() < TOL);
}

#[test]
fn nadapopt_balances_the_pair() {
    let s = pair(Some(vec![0.45, 0.5]));
    let z = solve_nadapopt_lp(&s, 1.0).unwrap();
    assert!((z.x(EdgeIdx(0), 1) - 0.5).abs() < TOL);
    assert!((z.x(EdgeIdx(1), 1) - 0.5).abs() < TOL);
    assert!((z.objective - 0.95).abs() < TOL);
    let s_vals: Vec<f64> = z.s.iter().map(|v| v.unwrap()).collect();
    assert!((s_vals[0] - 1.0).abs() < TOL && (s_vals[1] - 1.0).abs() < TOL);

    let z0 = solve_nadapopt_lp(&s, 0.0).unwrap();
    assert!((z0.objective - 1.0).abs() < TOL);
    assert!((z0.x(EdgeIdx(1), 1) - 1.0).abs() < TOL);
}

#[test]
fn nadapopt_without_schedule_is_zero() {
    let mut b = Scenario::builder(2, 1);
    let u = b.add_donor("u", LatLon::default(), 1);
    let v = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
    b.add_edge(u, v, StepValues::Constant(0.7));
    b.set_schedule(u, vec![false, false]);
    let s = b.build();
    let z = solve_nadapopt_lp(&s, 0.0).unwrap();
    assert_eq!(z.objective, 0.0);
    assert!(z.nonzero().next().is_none());
}

#[test]
fn rate_limited_opt_waits() {
    let s = wait_instance(0.01);
    let r = DemandRealization::all_available(&s);
    let z = solve_ratelimit_opt(&s, &r, 0.0).unwrap();
    assert!((z.objective - 1.0).abs() < TOL);
    assert!((z.x(EdgeIdx(0), 2) - 1.0).abs() < TOL);
    assert!((z.a(bloodmatch_core::DonorIdx(0), 2).unwrap() - 1.0).abs() < TOL);
    let lp = solve_ratelimit_lp(&s, 0.0).unwrap();
    assert!((lp.objective - 1.0).abs() < TOL);
}

#[test]
fn rate_limit_of_one_decomposes_per_step() {
    for seed in 0..40 {
        let cfg = TinyInstanceConfig {
            max_rate_limit: 1,
            ..TinyInstanceConfig::default()
        };
        let s = tiny_instance(&cfg, seed);
        let r = draw_realization(&s, &mut Seeds::new(seed).stream(Domain::Realization, 0));
        let z = solve_ratelimit_opt(&s, &r, 0.0).unwrap();
        let mut want = 0.0;
        for u in s.donor_ids() {
            for t in s.steps() {
                want += s
                    .donor_edges(u)
                    .iter()
                    .filter(|&&e| r.is_available(s.edge(e).recipient, t))
                    .map(|&e| s.weight(e, t))
                    .fold(0.0, f64::max);
            }
        }
        assert!((z.objective - want).abs() < TOL, "seed {seed}");
    }
}

#[test]
fn single_step_rate_limit_is_inactive() {
    let mut checked = 0;
    for seed in 0..200 {
        let cfg = TinyInstanceConfig {
            max_steps: 1,
            ..TinyInstanceConfig::default()
        };
        let s = tiny_instance(&cfg, seed);
        // A donor first notified after step 1 is never scheduled when T = 1.
        if s.donor_ids().any(|u| s.donor(u).first_notify != 1) {
            continue;
        }
        checked += 1;
        let r = draw_realization(&s, &mut Seeds::new(seed).stream(Domain::Realization, 0));
        for gamma in [0.0, 0.5] {
            let a = solve_offline_opt(&s, &r, gamma).unwrap();
            let b = solve_ratelimit_opt(&s, &r, gamma).unwrap();
            assert!((a.objective - b.objective).abs() < TOL, "seed {seed}");
        }
    }
    assert!(checked >= 10);
}

#[test]
fn one_notification_budget_when_k_covers_horizon() {
    let mut b = Scenario::builder(3, 3);
    let u = b.add_donor("u", LatLon::default(), 1);
    let a = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
    let c = b.add_recipient("B", LatLon::default(), RecipientKind::Static);
    b.add_edge(u, a, StepValues::PerStep(vec![0.2, 0.6, 0.4]));
    b.add_edge(u, c, StepValues::PerStep(vec![0.5, 0.3, 0.7]));
    let s = b.build();
    let z = solve_ratelimit_lp(&s, 0.0).unwrap();
    assert!((z.objective - 0.7).abs() < TOL);
}

#[test]
fn deterministic_availability_makes_lp_tight() {
    for seed in 0..30 {
        let s = tiny_instance(&TinyInstanceConfig::default(), seed);
        // Certain availability: every dynamic p in {0, 1}.
        let mut b = Scenario::builder(s.horizon(), s.rate_limit());
        for u in s.donor_ids() {
            let d = s.donor(u);
            b.add_donor(d.name.clone(), d.location, d.first_notify);
        }
        for v in s.recipient_ids() {
            let rc = s.recipient(v);
            let v2 = b.add_recipient(rc.name.clone(), rc.location, rc.kind);
            if rc.kind == RecipientKind::Dynamic {
                let p = s.recipient_availability(v).iter().map(|&p| if p >= 0.5 { 1.0 } else { 0.0 }).collect();
                b.set_availability(v2, StepValues::PerStep(p));
            }
        }
        for e in s.edge_ids() {
            let edge = s.edge(e);
            b.add_edge(edge.donor, edge.recipient, StepValues::PerStep(s.edge_weights(e).to_vec()));
        }
        let det = b.build();
        let r = DemandRealization::from_fn(&det, |v, t| det.availability(v, t) == 1.0);
        let lp = solve_fixedtime_lp(&det, 0.0).unwrap();
        let milp = solve_offline_opt(&det, &r, 0.0).unwrap();
        assert!((lp.objective - milp.objective).abs() < TOL, "seed {seed}");
    }
}

#[test]
fn zero_normalization_is_rejected_or_excluded() {
    let s = pair(Some(vec![0.0, 0.5]));
    let r = DemandRealization::all_available(&s);
    assert!(matches!(
        solve_offline_opt(&s, &r, 0.5),
        Err(Error::NonPositiveNormalization { .. })
    ));
    // gamma = 0 never looks at m.
    assert!(solve_offline_opt(&s, &r, 0.0).is_ok());
    let lenient = Solver::default().with_options(SolveOptions {
        scope: ProportionalityScope::PositiveNormalization,
        ..SolveOptions::default()
    });
    let z = lenient.nadapopt_lp(&s, 0.5).unwrap();
    assert_eq!(z.excluded, vec![RecipientIdx(0)]);
    assert!(matches!(
        solve_nadapopt_lp(&pair(None), 0.5),
        Err(Error::MissingNormalization)
    ));
    assert!(solve_fixedtime_lp(&s, 1.5).is_err());
}

fn pairwise() -> Solver {
    Solver::default().with_options(SolveOptions {
        encoding: ProportionalityEncoding::Pairwise,
        ..SolveOptions::default()
    })
}

fn assert_proportional(s_vals: &[Option<f64>], gamma: f64) {
    let vals: Vec<f64> = s_vals.iter().flatten().copied().collect();
    for &a in &vals {
        for &b in &vals {
            assert!(gamma * a <= b + 1e-6, "{gamma}·{a} > {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn milp_matches_brute_force(seed in any::<u64>(), gi in 0usize..4) {
        let gamma = [0.0, 0.25, 0.5, 1.0][gi];
        let s = tiny_instance(&TinyInstanceConfig::default(), seed);
        let r = draw_realization(&s, &mut Seeds::new(seed).stream(Domain::Realization, 0));
        let fixed = solve_offline_opt(&s, &r, gamma).unwrap();
        let (bf, _) = brute_force_opt(&s, &r, gamma, Regime::FixedTime).unwrap();
        prop_assert!((fixed.objective - bf).abs() < TOL, "fixed: {} vs {bf}", fixed.objective);
        let rate = solve_ratelimit_opt(&s, &r, gamma).unwrap();
        let (bf, _) = brute_force_opt(&s, &r, gamma, Regime::RateLimited).unwrap();
        prop_assert!((rate.objective - bf).abs() < TOL, "rate: {} vs {bf}", rate.objective);
        for sol in [&fixed, &rate] {
            prop_assert!(sol.x_values().iter().all(|&x| x == 0.0 || x == 1.0));
            if gamma > 0.0 {
                assert_proportional(&sol.s, gamma);
            }
        }
    }

    #[test]
    fn encodings_agree(seed in any::<u64>(), gi in 0usize..4) {
        let gamma = [0.0, 0.25, 0.5, 1.0][gi];
        let s = tiny_instance(&TinyInstanceConfig::default(), seed);
        let r = draw_realization(&s, &mut Seeds::new(seed).stream(Domain::Realization, 0));
        let mm = Solver::default();
        let pw = pairwise();
        let pairs = [
            (mm.fixedtime_lp(&s, gamma).unwrap().objective, pw.fixedtime_lp(&s, gamma).unwrap().objective),
            (mm.nadapopt_lp(&s, gamma).unwrap().objective, pw.nadapopt_lp(&s, gamma).unwrap().objective),
            (mm.ratelimit_lp(&s, gamma).unwrap().objective, pw.ratelimit_lp(&s, gamma).unwrap().objective),
            (mm.offline_opt(&s, &r, gamma).unwrap().objective, pw.offline_opt(&s, &r, gamma).unwrap().objective),
        ];
        for (a, b) in pairs {
            prop_assert!((a - b).abs() < TOL, "{a} vs {b}");
        }
    }

    #[test]
    fn milp_is_monotone_in_gamma(seed in any::<u64>()) {
        let s = tiny_instance(&TinyInstanceConfig::default(), seed);
        let r = draw_realization(&s, &mut Seeds::new(seed).stream(Domain::Realization, 0));
        let mut prev = f64::INFINITY;
        for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let z = solve_offline_opt(&s, &r, gamma).unwrap().objective;
            prop_assert!(z <= prev + TOL);
            prev = z;
        }
    }

    #[test]
    fn lp_solutions_respect_their_rows(seed in any::<u64>(), gi in 0usize..3) {
        let gamma = [0.0, 0.5, 1.0][gi];
        let s = tiny_instance(&TinyInstanceConfig::default(), seed);
        let lp = solve_fixedtime_lp(&s, gamma).unwrap();
        let opt = solve_nadapopt_lp(&s, gamma).unwrap();
        let rate = solve_ratelimit_lp(&s, gamma).unwrap();
        for u in s.donor_ids() {
            for t in s.steps() {
                let sum = |sol: &bloodmatch_core::LpSolution| -> f64 {
                    s.donor_edges(u).iter().map(|&e| sol.x(e, t)).sum()
                };
                prop_assert!(sum(&lp) <= 1.0 + 1e-7);
                prop_assert!(sum(&opt) <= 1.0 + 1e-7);
                for &e in s.donor_edges(u) {
                    let p = s.availability(s.edge(e).recipient, t);
                    prop_assert!(lp.x(e, t) <= p + 1e-7);
                    prop_assert!(rate.x(e, t) <= p + 1e-7);
                    if !s.scheduled(u, t) {
                        prop_assert!(lp.x(e, t) == 0.0 && opt.x(e, t) == 0.0);
                    }
                }
                let a = rate.a(u, t).unwrap();
                prop_assert!((-1e-7..=1.0 + 1e-7).contains(&a));
                prop_assert!(sum(&rate) <= a + 1e-7);
            }
        }
        if gamma > 0.0 {
            assert_proportional(&lp.s, gamma);
            assert_proportional(&opt.s, gamma);
            assert_proportional(&rate.s, gamma);
        }
    }
}

#[test]
fn city_sized_lps_stay_feasible() {
    use bloodmatch_core::synth::{GeneratorConfig, Population};
    for seed in 0..8 {
        let mut cfg = GeneratorConfig::new(
            40,
            15,
            Population::UniformDisc {
                center: LatLon { lat: 12.97, lon: 77.59 },
                radius_km: 12.0,
            },
        );
        cfg.seed = seed;
        let s = bloodmatch_core::synth::generate_city(&cfg).unwrap().with_normalization(vec![1.0; 15]);
        for gamma in [0.5, 1.0] {
            for sol in [solve_nadapopt_lp(&s, gamma).unwrap(), solve_fixedtime_lp(&s, gamma).unwrap()] {
                for u in s.donor_ids() {
                    for t in s.steps() {
                        let mass: f64 = s.donor_edges(u).iter().map(|&e| sol.x(e, t)).sum();
                        assert!(mass <= 1.0 + 1e-7, "seed {seed}: {mass}");
                    }
                }
                assert_proportional(&sol.s, gamma);
            }
        }
    }
}
