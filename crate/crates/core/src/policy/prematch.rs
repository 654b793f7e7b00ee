//! Pre-match plans of the non-adaptive policies and their execution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::{available_edges, DemandRealization, DonorIdx, EdgeIdx, Entity, Regime, Scenario, Violation};
use crate::rng::{unit, Domain, Seeds};
use crate::solver::{LpSolution, SolutionKind, Solver};

/// Slack allowed on a pre-match distribution's total mass before it is
/// rejected as invalid.
pub const PLAN_MASS_TOL: f64 = 1e-6;

/// `M_ut`: at most one edge per donor and step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreMatchPlan {
    horizon: usize,
    assignment: Vec<Option<EdgeIdx>>,
}

impl PreMatchPlan {
    pub fn empty(s: &Scenario) -> Self {
        Self {
            horizon: s.horizon(),
            assignment: vec![None; s.donor_count() * s.horizon()],
        }
    }

    #[inline]
    pub fn get(&self, u: DonorIdx, t: usize) -> Option<EdgeIdx> {
        self.assignment[u.0 * self.horizon + t - 1]
    }

    pub fn set(&mut self, u: DonorIdx, t: usize, e: Option<EdgeIdx>) {
        self.assignment[u.0 * self.horizon + t - 1] = e;
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.assigned_count() == 0
    }

    /// Assigned edges must leave the donor they are filed under, and in
    /// fixed time only fall on scheduled steps.
    pub fn validate(&self, s: &Scenario, regime: Regime) -> Vec<Violation> {
        let mut out = Vec::new();
        for u in s.donor_ids() {
            for t in s.steps() {
                let Some(e) = self.get(u, t) else { continue };
                if e.0 >= s.edge_count() || s.edge(e).donor != u {
                    out.push(Violation::new(
                        Entity::Donor(u),
                        format!("donor {} is pre-matched at t={t} along a foreign edge", s.donor(u).name),
                    ));
                } else if regime == Regime::FixedTime && !s.scheduled(u, t) {
                    out.push(Violation::new(
                        Entity::Edge(e),
                        format!("{} pre-matched at unscheduled t={t}", s.edge_label(e)),
                    ));
                }
            }
        }
        out
    }
}

/// Per-(donor, step) categorical distribution over pre-matched edges; the
/// remaining mass means "no pre-match".
#[derive(Clone, Debug, PartialEq)]
pub struct PrematchDistribution {
    horizon: usize,
    entries: Vec<Vec<(EdgeIdx, f64)>>,
}

impl PrematchDistribution {
    pub fn empty(s: &Scenario) -> Self {
        Self {
            horizon: s.horizon(),
            entries: vec![Vec::new(); s.donor_count() * s.horizon()],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `(edge, probability)` pairs for donor `u` at `t`.
    pub fn at(&self, u: DonorIdx, t: usize) -> &[(EdgeIdx, f64)] {
        &self.entries[u.0 * self.horizon + t - 1]
    }

    pub fn probability(&self, u: DonorIdx, t: usize, e: EdgeIdx) -> f64 {
        self.at(u, t).iter().filter(|(f, _)| *f == e).map(|&(_, p)| p).sum()
    }

    pub fn mass(&self, u: DonorIdx, t: usize) -> f64 {
        self.at(u, t).iter().map(|&(_, p)| p).sum()
    }

    pub fn max_mass(&self) -> f64 {
        self.entries
            .iter()
            .map(|es| es.iter().map(|&(_, p)| p).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Builds from raw probabilities, rejecting any `(u, t)` whose mass
    /// exceeds `1 + PLAN_MASS_TOL`.
    pub fn from_probabilities(s: &Scenario, prob: impl FnMut(EdgeIdx, usize) -> f64) -> Result<Self> {
        Self::build(s, prob, true)
    }

    /// Builds from raw probabilities, scaling overfull `(u, t)` down to mass 1.
    pub fn from_probabilities_clamped(s: &Scenario, prob: impl FnMut(EdgeIdx, usize) -> f64) -> Self {
        match Self::build(s, prob, false) {
            Ok(d) => d.normalized(),
            Err(_) => unreachable!("non-strict build cannot fail"),
        }
    }

    fn build(s: &Scenario, mut prob: impl FnMut(EdgeIdx, usize) -> f64, strict: bool) -> Result<Self> {
        let mut d = Self::empty(s);
        for u in s.donor_ids() {
            for t in s.steps() {
                let slot = &mut d.entries[u.0 * s.horizon() + t - 1];
                for &e in s.donor_edges(u) {
                    let p = prob(e, t);
                    if p > 0.0 {
                        slot.push((e, p));
                    }
                }
                let mass: f64 = slot.iter().map(|&(_, p)| p).sum();
                if strict && mass > 1.0 + PLAN_MASS_TOL {
                    return Err(Error::InvalidPlan {
                        donor: s.donor(u).name.clone(),
                        step: t,
                        mass,
                    });
                }
            }
        }
        Ok(d)
    }

    /// Scales down every `(u, t)` whose mass exceeds 1.
    pub fn normalized(mut self) -> Self {
        for slot in &mut self.entries {
            let mass: f64 = slot.iter().map(|&(_, p)| p).sum();
            if mass > 1.0 {
                for (_, p) in slot.iter_mut() {
                    *p /= mass;
                }
            }
        }
        self
    }

    /// Draws `M_ut` with the given generator.
    pub fn draw<R: RngCore + ?Sized>(&self, u: DonorIdx, t: usize, rng: &mut R) -> Option<EdgeIdx> {
        let slot = self.at(u, t);
        if slot.is_empty() {
            return None;
        }
        let x = unit(rng);
        let mut acc = 0.0;
        for &(e, p) in slot {
            acc += p;
            if x < acc {
                return Some(e);
            }
        }
        None
    }

    /// Draws `M_ut` from the trial's plan stream for `(u, t)`.
    pub fn sample_at(&self, u: DonorIdx, t: usize, trial: &Seeds) -> Option<EdgeIdx> {
        if self.at(u, t).is_empty() {
            return None;
        }
        let mut rng = trial.stream(Domain::Plan, (u.0 * self.horizon + t - 1) as u64);
        self.draw(u, t, &mut rng)
    }

    /// Full plan for one trial; agrees with [`Self::sample_at`] entry by entry.
    pub fn sample_plan(&self, s: &Scenario, trial: &Seeds) -> PreMatchPlan {
        let mut plan = PreMatchPlan::empty(s);
        for u in s.donor_ids() {
            for t in s.steps() {
                plan.set(u, t, self.sample_at(u, t, trial));
            }
        }
        plan
    }
}

fn expect_kind(sol: &LpSolution, kind: SolutionKind) -> Result<()> {
    if sol.kind != kind {
        return Err(Error::InvalidParameter(format!(
            "expected a {} solution, got {}",
            kind.as_str(),
            sol.kind.as_str()
        )));
    }
    Ok(())
}

/// NAdapLP(α): edge `e` pre-matched with probability `α·x*_et / p_vt`
/// (0 where `p_vt = 0`).
pub fn nadaplp_distribution(s: &Scenario, sol: &LpSolution, alpha: f64) -> Result<PrematchDistribution> {
    expect_kind(sol, SolutionKind::FixedTimeLp)?;
    PrematchDistribution::from_probabilities(s, |e, t| {
        let p = s.availability(s.edge(e).recipient, t);
        if p > 0.0 {
            alpha * sol.x(e, t) / p
        } else {
            0.0
        }
    })
}

/// NAdapOpt: edge `e` pre-matched with probability `y*_et`.
pub fn nadapopt_distribution(s: &Scenario, sol: &LpSolution) -> Result<PrematchDistribution> {
    expect_kind(sol, SolutionKind::NAdapOptLp)?;
    Ok(PrematchDistribution::from_probabilities(s, |e, t| sol.x(e, t).clamp(0.0, 1.0))?.normalized())
}

/// Solves the relaxed offline problem at `gamma` and samples one NAdapLP plan.
pub fn nadaplp_plan(s: &Scenario, solver: &Solver, gamma: f64, alpha: f64, trial: &Seeds) -> Result<PreMatchPlan> {
    let sol = solver.fixedtime_lp(s, gamma)?;
    Ok(nadaplp_distribution(s, &sol, alpha)?.sample_plan(s, trial))
}

/// Solves the NAdapOpt LP at `gamma` and samples one plan.
pub fn nadapopt_plan(s: &Scenario, solver: &Solver, gamma: f64, trial: &Seeds) -> Result<PreMatchPlan> {
    let sol = solver.nadapopt_lp(s, gamma)?;
    Ok(nadapopt_distribution(s, &sol)?.sample_plan(s, trial))
}

/// `M_ut` if it exists and its recipient is available at `t`.
pub fn execute_prematch(
    s: &Scenario,
    plan: &PreMatchPlan,
    u: DonorIdx,
    t: usize,
    r: &DemandRealization,
) -> Option<EdgeIdx> {
    plan.get(u, t).filter(|&e| r.is_available(s.edge(e).recipient, t))
}

/// AdaptMatch: the pre-matched edge when its recipient is available,
/// otherwise Rand with probability `gamma` and Max with `1 − gamma`.
pub fn adaptmatch_decide<R: RngCore + ?Sized>(
    s: &Scenario,
    plan: &PreMatchPlan,
    u: DonorIdx,
    t: usize,
    r: &DemandRealization,
    gamma: f64,
    rng: &mut R,
) -> Result<Option<EdgeIdx>> {
    if let Some(e) = execute_prematch(s, plan, u, t, r) {
        return Ok(Some(e));
    }
    let edges = available_edges(s, u, t, r, true)?;
    Ok(super::randmax_choice(s, &edges, t, gamma, rng))
}
