//! NAdapLP_Rate: β estimation and its pre-match distribution.
//!
//! `β_ut` is the probability that donor `u` is not blocked by the rate limit
//! at `t`, i.e. unmatched during `t-K+1 ..= t-1`. It depends on the policy,
//! which depends on β, so it is found by fixed-point simulation: start from
//! `β ≡ 1`, simulate the induced policy on fresh realizations, re-estimate,
//! repeat. While iterating, overfull distributions are scaled down rather
//! than rejected.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{DonorIdx, EdgeIdx, Scenario};
use crate::rng::{Domain, Seeds};
use crate::sim::{resampled_realization, run_policy, trial_seeds};
use crate::solver::{LpSolution, SolutionKind};

use super::{PolicySpec, PreMatchPlan, PreparedPolicy, PrematchDistribution};

#[derive(Clone, Debug, PartialEq)]
pub struct BetaOptions {
    /// Simulated trials per round.
    pub trials: usize,
    /// Fixed-point rounds after the `β ≡ 1` start.
    pub rounds: usize,
}

impl Default for BetaOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            rounds: 3,
        }
    }
}

/// `β_ut` with binomial standard errors from the final round.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaEstimate {
    horizon: usize,
    beta: Vec<f64>,
    std_err: Vec<f64>,
    pub trials: usize,
    pub rounds: usize,
}

impl BetaEstimate {
    /// `β ≡ 1`.
    pub fn ones(s: &Scenario) -> Self {
        let n = s.donor_count() * s.horizon();
        Self {
            horizon: s.horizon(),
            beta: vec![1.0; n],
            std_err: vec![0.0; n],
            trials: 0,
            rounds: 0,
        }
    }

    #[inline]
    pub fn get(&self, u: DonorIdx, t: usize) -> f64 {
        self.beta[u.0 * self.horizon + t - 1]
    }

    pub fn std_err(&self, u: DonorIdx, t: usize) -> f64 {
        self.std_err[u.0 * self.horizon + t - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.beta
    }

    pub fn min(&self) -> f64 {
        self.beta.iter().copied().fold(1.0, f64::min)
    }
}

fn rate_probability<'a>(
    s: &'a Scenario,
    sol: &'a LpSolution,
    alpha: f64,
    beta: &'a BetaEstimate,
) -> impl Fn(EdgeIdx, usize) -> f64 + 'a {
    move |e, t| {
        let edge = s.edge(e);
        let p = s.availability(edge.recipient, t);
        let b = beta.get(edge.donor, t);
        if p > 0.0 && b > 0.0 {
            alpha * sol.x(e, t) / (b * p)
        } else {
            0.0
        }
    }
}

/// Pre-match probabilities `α·x*_et / (β_ut·p_vt)`; a `(u, t)` with total
/// mass above `1 + PLAN_MASS_TOL` is an [`Error::InvalidPlan`].
pub fn nadaplp_rate_distribution(
    s: &Scenario,
    sol: &LpSolution,
    alpha: f64,
    beta: &BetaEstimate,
) -> Result<PrematchDistribution> {
    if sol.kind != SolutionKind::RateLimitLp {
        return Err(Error::InvalidParameter(alloc::format!(
            "NAdapLP_Rate needs a ratelimit_lp solution, got {}",
            sol.kind.as_str()
        )));
    }
    PrematchDistribution::from_probabilities(s, rate_probability(s, sol, alpha, beta))
}

/// One sampled NAdapLP_Rate plan for the trial rooted at `trial`.
pub fn nadaplp_rate_plan(
    s: &Scenario,
    sol: &LpSolution,
    alpha: f64,
    beta: &BetaEstimate,
    trial: &Seeds,
) -> Result<PreMatchPlan> {
    Ok(nadaplp_rate_distribution(s, sol, alpha, beta)?.sample_plan(s, trial))
}

/// Fixed-point simulation estimate of `β`. `β_u1 = 1`; simulated values
/// are floored at `1/trials` so the next round never divides by zero.
pub fn estimate_beta(
    s: &Scenario,
    sol: &LpSolution,
    alpha: f64,
    opts: &BetaOptions,
    seeds: &Seeds,
) -> Result<BetaEstimate> {
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("beta estimation needs at least one trial".into()));
    }
    if sol.kind != SolutionKind::RateLimitLp {
        return Err(Error::InvalidParameter(alloc::format!(
            "beta estimation needs a ratelimit_lp solution, got {}",
            sol.kind.as_str()
        )));
    }
    let h = s.horizon();
    let k = s.rate_limit();
    let n = opts.trials as f64;
    let mut beta = BetaEstimate::ones(s);
    if sol.nonzero().next().is_none() || alpha == 0.0 {
        return Ok(beta);
    }
    let spec = PolicySpec::nadaplp_rate(Some(alpha), sol.gamma);
    for round in 0..opts.rounds {
        let dist = PrematchDistribution::from_probabilities_clamped(s, rate_probability(s, sol, alpha, &beta));
        let policy = PreparedPolicy::with_distribution(spec.clone(), dist)?;
        let root = seeds.child(Domain::Beta, round as u64);
        let mut available = vec![0usize; s.donor_count() * h];
        let mut last: Vec<Option<usize>> = vec![None; s.donor_count()];
        for i in 0..opts.trials {
            let trial = trial_seeds(&root, i as u64);
            let r = resampled_realization(s, &trial);
            let outcome = run_policy(s, &policy, &r, &trial)?;
            last.iter_mut().for_each(|l| *l = None);
            for t in 1..=h {
                for (u, l) in last.iter().enumerate() {
                    if l.is_none_or(|prev| t - prev >= k) {
                        available[u * h + t - 1] += 1;
                    }
                }
                for &e in outcome.matched_at(t) {
                    last[s.edge(e).donor.0] = Some(t);
                }
            }
        }
        let mut next = BetaEstimate::ones(s);
        next.trials = opts.trials;
        next.rounds = round + 1;
        for u in 0..s.donor_count() {
            for t in 2..=h {
                let i = u * h + t - 1;
                let b = (available[i] as f64 / n).max(1.0 / n);
                next.beta[i] = b;
                next.std_err[i] = libm::sqrt(b * (1.0 - b) / n);
            }
        }
        beta = next;
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{LatLon, RecipientKind, StepValues};
    use crate::solver::Solver;

    /// `β_ut = 1 − α Σ_{t'=max(1,t-K+1)}^{t-1} Σ_e x*_et'`, exact when the
    /// policy matches each edge with unconditional probability `α·x*_et`.
    fn analytic_beta(s: &Scenario, sol: &LpSolution, alpha: f64) -> Vec<f64> {
        let h = s.horizon();
        let k = s.rate_limit();
        let mut out = vec![1.0; s.donor_count() * h];
        for u in s.donor_ids() {
            for t in 2..=h {
                let from = t.saturating_sub(k - 1).max(1);
                let used: f64 = (from..t)
                    .flat_map(|tp| s.donor_edges(u).iter().map(move |&e| (e, tp)))
                    .map(|(e, tp)| sol.x(e, tp))
                    .sum();
                out[u.0 * h + t - 1] = 1.0 - alpha * used;
            }
        }
        out
    }

    fn instance() -> Scenario {
        let mut b = Scenario::builder(6, 3);
        let u0 = b.add_donor("u0", LatLon::default(), 1);
        let u1 = b.add_donor("u1", LatLon::default(), 2);
        let a = b.add_recipient("A", LatLon::default(), RecipientKind::Dynamic);
        let c = b.add_recipient("B", LatLon::default(), RecipientKind::Static);
        b.set_availability(a, StepValues::PerStep(vec![0.9, 0.1, 0.9, 0.9, 0.1, 0.5]));
        b.add_edge(u0, a, StepValues::PerStep(vec![0.3, 0.8, 0.5, 0.2, 0.9, 0.4]));
        b.add_edge(u0, c, StepValues::Constant(0.35));
        b.add_edge(u1, a, StepValues::Constant(0.6));
        b.build()
    }

    #[test]
    fn simulation_converges_to_the_analytic_value() {
        let s = instance();
        let sol = Solver::default().ratelimit_lp(&s, 0.0).unwrap();
        let alpha = 0.25;
        let opts = BetaOptions { trials: 20_000, rounds: 3 };
        let est = estimate_beta(&s, &sol, alpha, &opts, &Seeds::new(11)).unwrap();
        let exact = analytic_beta(&s, &sol, alpha);
        for u in s.donor_ids() {
            assert_eq!(est.get(u, 1), 1.0);
            for t in 2..=s.horizon() {
                let want = exact[u.0 * s.horizon() + t - 1];
                let se = est.std_err(u, t).max(1e-3);
                assert!(
                    (est.get(u, t) - want).abs() < 4.0 * se,
                    "u={} t={t}: {} vs {want}",
                    u.0,
                    est.get(u, t)
                );
            }
        }
    }

    #[test]
    fn zero_alpha_or_zero_solution_gives_ones() {
        let s = instance();
        let sol = Solver::default().ratelimit_lp(&s, 0.0).unwrap();
        let est = estimate_beta(&s, &sol, 0.0, &BetaOptions::default(), &Seeds::new(1)).unwrap();
        assert!(est.values().iter().all(|&b| b == 1.0));
        let plan = nadaplp_rate_plan(&s, &sol, 0.0, &est, &Seeds::new(2)).unwrap();
        assert!(plan.is_empty());
    }
}
