//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Run with `cargo test -p bloodmatch --test acceptance`; add
//! `--release` for the timings that the runtime limits refer to.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bloodmatch::config::{bundled, METRO_CITIES};
use bloodmatch::core::graph::donor_max_degree;
use bloodmatch::core::metrics::{gamma_of, spearman};
use bloodmatch::core::oracle::brute_force_opt;
use bloodmatch::core::policy::{estimate_beta, nadaplp_rate_plan, BetaOptions, PrepareOptions};
use bloodmatch::core::rng::{Domain, Seeds};
use bloodmatch::core::sim::{
    draw_realization, monte_carlo_evaluate, resampled_realization, run_policy, trial_seeds, NormalizationProtocol,
    RealizationMode,
};
use bloodmatch::core::synth::{generate_city, tiny_instance, GeneratorConfig, Population, TinyInstanceConfig};
use bloodmatch::core::{
    DemandRealization, LatLon, PolicySpec, PreparedPolicy, RecipientKind, Regime, Scenario, Solver, StepValues,
};
use bloodmatch::pipeline::{default_gammas, pipeline_solver, sweep, Experiment, RunConfig};
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tiny(seed: u64) -> Scenario {
    tiny_instance(&TinyInstanceConfig::default(), seed)
}

fn realization(s: &Scenario, seed: u64, i: u64) -> DemandRealization {
    draw_realization(s, &mut Seeds::new(seed).child(Domain::Trial, i).stream(Domain::Realization, 0))
}

fn solve(solver: &Solver, s: &Scenario, r: &DemandRealization, gamma: f64, mode: Regime) -> f64 {
    match mode {
        Regime::FixedTime => solver.offline_opt(s, r, gamma),
        Regime::RateLimited => solver.ratelimit_opt(s, r, gamma),
    }
    .expect("offline optimum")
    .objective
}

const MODES: [Regime; 2] = [Regime::FixedTime, Regime::RateLimited];

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let gammas = [0.0, 0.25, 0.5, 1.0];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for mode in MODES {
        for gamma in gammas {
            let diffs: Vec<f64> = (0..200u64)
                .into_par_iter()
                .map(|seed| {
                    let s = tiny(seed);
                    let r = realization(&s, seed, 0);
                    let (brute, _) = brute_force_opt(&s, &r, gamma, mode).expect("within the enumeration bound");
                    (solve(&Solver::default(), &s, &r, gamma, mode) - brute).abs()
                })
                .collect();
            count += diffs.len();
            worst = diffs.into_iter().fold(worst, f64::max);
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-6 && elapsed < Duration::from_secs(120),
        format!("{count} instance/mode/γ cases, max |MILP − brute force| = {worst:.2e}, {elapsed:.1?}"),
    )
}

fn max_is_opt_zero() -> Outcome {
    let max = PreparedPolicy::myopic(PolicySpec::max()).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let s = tiny(1000 + seed);
        let r = realization(&s, seed, 1);
        let out = run_policy(&s, &max, &r, &trial_seeds(&Seeds::new(seed), 0)).unwrap();
        worst = worst.max((out.total_weight() - solve(&Solver::default(), &s, &r, 0.0, Regime::FixedTime)).abs());
    }
    check(worst <= 1e-9, format!("100 instances, max |Max − OPT(0)| = {worst:.2e}"))
}

fn lp_upper_bound() -> Outcome {
    let mut worst_margin = f64::INFINITY;
    let mut failures = 0;
    for mode in MODES {
        for gamma in [0.0, 0.5, 1.0] {
            let results: Vec<(f64, f64, f64)> = (0..50u64)
                .into_par_iter()
                .map(|seed| {
                    let s = tiny(2000 + seed);
                    let solver = Solver::default();
                    let z_lp = match mode {
                        Regime::FixedTime => solver.fixedtime_lp(&s, gamma),
                        Regime::RateLimited => solver.ratelimit_lp(&s, gamma),
                    }
                    .unwrap()
                    .objective;
                    let n = 200;
                    let values: Vec<f64> =
                        (0..n).map(|i| solve(&solver, &s, &realization(&s, seed, i), gamma, mode)).collect();
                    let mean = values.iter().sum::<f64>() / n as f64;
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                    (z_lp, mean, (var / n as f64).sqrt())
                })
                .collect();
            for (z, mean, se) in results {
                let margin = z - (mean - 3.0 * se);
                worst_margin = worst_margin.min(margin);
                failures += (margin < -1e-9) as usize;
            }
        }
    }
    check(
        failures == 0,
        format!("300 instance/mode/γ cases, {failures} violations, smallest Z_LP − (mean − 3 s.e.) = {worst_margin:.3e}"),
    )
}

/// Three donors sharing two dynamic recipients and one static one.
fn three_donor_instance() -> Scenario {
    let mut b = Scenario::builder(3, 2);
    let donors: Vec<_> = (0..3).map(|i| b.add_donor(format!("d{i}"), LatLon::default(), 1 + i % 2)).collect();
    let a = b.add_recipient("A", LatLon::default(), RecipientKind::Dynamic);
    let c = b.add_recipient("B", LatLon::default(), RecipientKind::Dynamic);
    let d = b.add_recipient("C", LatLon::default(), RecipientKind::Static);
    b.set_availability(a, StepValues::PerStep(vec![0.5, 0.25, 0.75]));
    b.set_availability(c, StepValues::Constant(0.6));
    for (i, &u) in donors.iter().enumerate() {
        b.add_edge(u, a, StepValues::Constant(0.3 + 0.1 * i as f64));
        b.add_edge(u, c, StepValues::PerStep(vec![0.5, 0.2, 0.4]));
        if i != 1 {
            b.add_edge(u, d, StepValues::Constant(0.1));
        }
    }
    b.set_normalization(vec![0.3, 0.3, 0.1]);
    b.build()
}

fn nadaplp_match_probability() -> Outcome {
    let s = three_donor_instance();
    let solver = Solver::default();
    let p = PreparedPolicy::prepare(&s, &PolicySpec::nadaplp(None, 0.5), &solver, &PrepareOptions::default()).unwrap();
    let alpha = p.alpha().unwrap();
    let d = donor_max_degree(&s) as f64;
    let sol = p.solution().unwrap().clone();
    let trials = 100_000u64;
    let root = Seeds::new(4);
    let h = s.horizon();
    let counts = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial = trial_seeds(&root, i);
            let r = resampled_realization(&s, &trial);
            let out = run_policy(&s, &p, &r, &trial).unwrap();
            let mut c = vec![0u32; s.edge_count() * h];
            for (t, e) in out.matches() {
                c[e.0 * h + t - 1] += 1;
            }
            c
        })
        .reduce(
            || vec![0u32; s.edge_count() * h],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for e in s.edge_ids() {
        for t in s.steps() {
            let q = alpha * sol.x(e, t);
            let f = counts[e.0 * h + t - 1] as f64 / trials as f64;
            let se = (q * (1.0 - q) / trials as f64).sqrt();
            let z = if se > 0.0 { (f - q).abs() / se } else if f == q { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
            cells += 1;
        }
    }
    check(
        (alpha - 1.0 / d).abs() < 1e-12 && worst <= 3.0,
        format!("α = 1/{d}, {cells} (e,t) cells over {trials} trials, largest deviation {worst:.2} s.e."),
    )
}

fn small_city(seed: u64) -> Scenario {
    let mut cfg = GeneratorConfig::new(
        12,
        5,
        Population::UniformDisc {
            center: LatLon::new(41.0, 29.0),
            radius_km: 6.0,
        },
    );
    cfg.horizon = 10;
    cfg.rate_limit = 3;
    cfg.seed = seed;
    generate_city(&cfg).unwrap()
}

fn nadapopt_expected_proportionality() -> Outcome {
    let exp = Experiment::new(
        &small_city(5),
        RunConfig {
            seed: 5,
            trials: 10_000,
            normalization_trials: 10_000,
            protocol: NormalizationProtocol::Expectation,
            ..RunConfig::default()
        },
    )
    .unwrap();
    let solver = pipeline_solver();
    let mut lines = Vec::new();
    let mut ok = true;
    for gamma in [0.25, 0.5, 1.0] {
        let p = exp.prepare(&PolicySpec::nadapopt(gamma), &solver).unwrap();
        let agg = exp.aggregate(&exp.trials(&p).unwrap()).unwrap();
        let (report, se) = exp.fairness(&agg).unwrap();
        ok &= report.gamma_empirical >= gamma - 3.0 * se;
        lines.push(format!("γ={gamma}: EP {:.4} ± {:.4}", report.gamma_empirical, se));
    }
    check(ok, lines.join(", "))
}

fn adaptmatch_dominance() -> Outcome {
    let s = generate_city(&bundled("city_small").unwrap()).unwrap();
    let exp = Experiment::new(
        &s,
        RunConfig {
            seed: 6,
            trials: 10_000,
            protocol: NormalizationProtocol::Expectation,
            ..RunConfig::default()
        },
    )
    .unwrap();
    let solver = pipeline_solver();
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for gamma in default_gammas() {
        let base = exp.prepare(&PolicySpec::nadapopt(gamma), &solver).unwrap();
        let adapt = PreparedPolicy::adaptmatch_over(&base, None).unwrap();
        let b = exp.aggregate(&exp.trials(&base).unwrap()).unwrap();
        let a = exp.aggregate(&exp.trials(&adapt).unwrap()).unwrap();
        let gap = a.mean_total_weight - b.mean_total_weight;
        worst = worst.min(gap);
        ok &= gap >= 0.0;
    }
    check(
        ok,
        format!("11 γ values × 10000 trials, smallest AdaptMatch − NAdapOpt mean = {worst:.4}"),
    )
}

fn lemma_fixtures() -> Outcome {
    let mut b = Scenario::builder(1, 1);
    let u = b.add_donor("u", LatLon::default(), 1);
    let a = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
    let c = b.add_recipient("B", LatLon::default(), RecipientKind::Static);
    b.add_edge(u, a, StepValues::Constant(0.9));
    b.add_edge(u, c, StepValues::Constant(1.0));
    let pair = b.build();
    let m = [0.45, 0.5];
    let r = DemandRealization::all_available(&pair);

    let max = PreparedPolicy::myopic(PolicySpec::max()).unwrap();
    let agg = monte_carlo_evaluate(&pair, &max, 1000, RealizationMode::Fixed, &r, &Seeds::new(7)).unwrap();
    let gamma_max = gamma_of(&agg.mean_recipient_weight, &m).unwrap();

    let rand = PreparedPolicy::myopic(PolicySpec::rand()).unwrap();
    let agg = monte_carlo_evaluate(&pair, &rand, 10_000, RealizationMode::Fixed, &r, &Seeds::new(7)).unwrap();
    let gamma_rand = gamma_of(&agg.mean_recipient_weight, &m).unwrap();
    let se_rand = bloodmatch::core::metrics::empirical_ep_std_err(&agg, &m).unwrap();

    let (n, eps) = (5usize, 1e-6);
    let mut b = Scenario::builder(1, 1);
    let u = b.add_donor("u", LatLon::default(), 1);
    for j in 0..n {
        let v = b.add_recipient(format!("v{j}"), LatLon::default(), RecipientKind::Static);
        b.add_edge(u, v, StepValues::Constant(if j == 0 { 1.0 } else { eps }));
    }
    let cr = b.build();
    let r = DemandRealization::all_available(&cr);
    let agg = monte_carlo_evaluate(&cr, &rand, 10_000, RealizationMode::Fixed, &r, &Seeds::new(8)).unwrap();
    let want = 1.0 / n as f64 + eps * (n - 1) as f64 / n as f64;
    let cr_dev = (agg.mean_total_weight - want).abs() / agg.std_err_total;

    check(
        gamma_max == 0.0 && (1.0 - gamma_rand) <= 3.0 * se_rand && cr_dev <= 3.0,
        format!(
            "Gamma(Max) = {gamma_max}, Gamma(Rand) = {gamma_rand:.4} ± {se_rand:.4}, \
             Rand on N=5 CR instance {:.5} vs {want:.5} ({cr_dev:.2} s.e.)",
            agg.mean_total_weight
        ),
    )
}

fn rate_limited_validity() -> Outcome {
    let results: Vec<Result<(f64, f64), String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let s = tiny(3000 + seed);
            let sol = Solver::default().ratelimit_lp(&s, 0.5).map_err(|e| e.to_string())?;
            let alpha = 1.0 / (2.0 * donor_max_degree(&s).max(1) as f64);
            let beta = estimate_beta(&s, &sol, alpha, &BetaOptions::default(), &Seeds::new(seed))
                .map_err(|e| format!("seed {seed}: {e}"))?;
            for i in 0..20 {
                nadaplp_rate_plan(&s, &sol, alpha, &beta, &trial_seeds(&Seeds::new(seed), i))
                    .map_err(|e| format!("seed {seed}: {e}"))?;
            }
            let mut worst_z = f64::NEG_INFINITY;
            let mut min_beta = f64::INFINITY;
            for u in s.donor_ids() {
                for t in s.steps() {
                    let (b, se) = (beta.get(u, t), beta.std_err(u, t));
                    min_beta = min_beta.min(b);
                    if b < 0.5 {
                        worst_z = worst_z.max((0.5 - b) / se.max(1e-300));
                    }
                }
            }
            Ok((min_beta, worst_z))
        })
        .collect();
    let mut min_beta = f64::INFINITY;
    let mut worst_z = f64::NEG_INFINITY;
    for r in results {
        let (b, z) = r?;
        min_beta = min_beta.min(b);
        worst_z = worst_z.max(z);
    }
    check(
        worst_z <= 3.0,
        format!(
            "100 instances, plans valid, min β = {min_beta:.4}{}",
            if worst_z > f64::NEG_INFINITY { format!(", worst shortfall {worst_z:.2} s.e.") } else { String::new() }
        ),
    )
}

fn synthetic_cities() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut max_zero = false;
    let mut lines = Vec::new();
    for name in METRO_CITIES {
        let cfg = bundled(name).unwrap();
        assert_eq!((cfg.horizon, cfg.rate_limit), (30, 7));
        let s = generate_city(&cfg).unwrap();
        let exp = Experiment::new(
            &s,
            RunConfig {
                seed: cfg.seed,
                normalization_trials: 100,
                ..RunConfig::default()
            },
        )
        .unwrap();
        let rows = sweep(&exp, &default_gammas(), &pipeline_solver()).unwrap();
        let rand_frac = rows[1].weight_fraction_of_max.unwrap_or(f64::NAN);
        max_zero |= rows[0].gamma_empirical == 0.0;
        let g: Vec<f64> = rows[2..].iter().map(|r| r.gamma_param.unwrap()).collect();
        let emp: Vec<f64> = rows[2..].iter().map(|r| r.gamma_empirical).collect();
        let rho = spearman(&g, &emp).unwrap_or(f64::NAN);
        ok &= (0.5..=0.9).contains(&rand_frac) && rho > 0.8;
        lines.push(format!(
            "{name}: Rand/Max {rand_frac:.3}, Gamma(Max) {:.3}, ρ {rho:.3}",
            rows[0].gamma_empirical
        ));
    }
    let elapsed = start.elapsed();
    ok &= max_zero && elapsed < Duration::from_secs(600);
    lines.push(format!("{elapsed:.1?}"));
    check(ok, lines.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bloodmatch");
    let run = |args: &[&str]| {
        let out = Command::new(bin).current_dir(dir.path()).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    let commands: [&[&str]; 4] = [
        &["--seed", "3", "generate", "city_small", "-o", "OUT/city.json"],
        &["--seed", "3", "run", "city.json", "adaptmatch:0.5", "--trials", "20", "--out-dir", "OUT"],
        &["--seed", "3", "--mode", "rate", "run", "city.json", "nadaplp_rate:0.3", "--trials", "10", "--out-dir", "OUT/rate"],
        &["--seed", "3", "sweep", "city.json", "--gammas", "0,0.5,1", "--trials", "20", "--out-dir", "OUT/sweep"],
    ];
    run(&["--seed", "3", "generate", "city_small", "-o", "city.json"]);
    for out in ["a", "b"] {
        for cmd in commands {
            let args: Vec<String> = cmd.iter().map(|a| a.replace("OUT", out)).collect();
            run(&args.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }
    let files = [
        "city.json",
        "trials.csv",
        "aggregate.csv",
        "rate/trials.csv",
        "rate/aggregate.csv",
        "sweep/sweep.csv",
        "sweep/sweep.svg",
    ];
    let read = |root: &str, f: &str| std::fs::read(Path::new(dir.path()).join(root).join(f)).unwrap();
    let differing: Vec<&str> = files.iter().copied().filter(|f| read("a", f) != read("b", f)).collect();
    check(
        differing.is_empty(),
        format!("{} output files compared across two runs, differing: {differing:?}", files.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("Max equals OPT(0)", max_is_opt_zero),
        ("LP upper bound", lp_upper_bound),
        ("NAdapLP match probability", nadaplp_match_probability),
        ("NAdapOpt expected proportionality", nadapopt_expected_proportionality),
        ("AdaptMatch dominance", adaptmatch_dominance),
        ("Max/Rand fixtures", lemma_fixtures),
        ("rate-limited validity", rate_limited_validity),
        ("synthetic cities", synthetic_cities),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}: {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name} ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
