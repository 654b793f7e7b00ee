//! Offline-optimal MILPs and their LP relaxations, plus the LP whose optimum
//! is the best γ-proportional non-adaptive policy.
//!
//! All five models share one variable layout: one variable per `(edge, step)`
//! that can be nonzero, a per-recipient linear expression for the
//! (expected) matched weight, and optional proportionality rows.
//!
//! Proportionality `γ·s_v ≤ s_v'` for all ordered pairs is encoded by
//! default through two auxiliaries: `s_min ≤ s_v ≤ s_max` and
//! `γ·s_max ≤ s_min` (2|V|+1 rows). Because every `s_v ≥ 0` this has the same
//! feasible set as the pairwise form, which is kept for cross-checking.

pub mod lp;
pub mod milp;
pub mod simplex;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use lp::{Constraint, LinearProgram, LpBackend, LpPoint, Sense, SolverError};
pub use milp::BranchAndBound;
pub use simplex::DenseSimplex;

use crate::error::{Error, Result};
use crate::graph::{DemandRealization, DonorIdx, EdgeIdx, RecipientIdx, Scenario};

/// Largest row or bound violation accepted from a backend.
const POINT_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionKind {
    FixedTimeMilp,
    FixedTimeLp,
    NAdapOptLp,
    RateLimitMilp,
    RateLimitLp,
}

impl SolutionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolutionKind::FixedTimeMilp => "fixedtime_milp",
            SolutionKind::FixedTimeLp => "fixedtime_lp",
            SolutionKind::NAdapOptLp => "nadapopt_lp",
            SolutionKind::RateLimitMilp => "ratelimit_milp",
            SolutionKind::RateLimitLp => "ratelimit_lp",
        }
    }

    pub fn is_integral(self) -> bool {
        matches!(self, SolutionKind::FixedTimeMilp | SolutionKind::RateLimitMilp)
    }

    pub fn is_rate_limited(self) -> bool {
        matches!(self, SolutionKind::RateLimitMilp | SolutionKind::RateLimitLp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProportionalityEncoding {
    /// `s_min`/`s_max` auxiliaries, 2|V|+1 rows.
    #[default]
    MinMax,
    /// One row per ordered recipient pair.
    Pairwise,
}

/// Which recipients the proportionality rows cover when `γ > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProportionalityScope {
    /// Every recipient; a non-positive `m_v` rejects the solve.
    #[default]
    AllRecipients,
    /// Only recipients with `m_v > 0`; the others are reported in
    /// [`LpSolution::excluded`].
    PositiveNormalization,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub encoding: ProportionalityEncoding,
    pub scope: ProportionalityScope,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub relative_gap: f64,
    pub max_nodes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            encoding: ProportionalityEncoding::MinMax,
            scope: ProportionalityScope::AllRecipients,
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            relative_gap: 1e-6,
            max_nodes: 200_000,
        }
    }
}

/// Optimal solution of one of the five models.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub kind: SolutionKind,
    pub gamma: f64,
    /// `Z` (or `Z_LP` for relaxations).
    pub objective: f64,
    horizon: usize,
    /// `x_et` (`y_et` for [`SolutionKind::NAdapOptLp`]), edge-major.
    x: Vec<f64>,
    /// Normalized matched weight `s_v`; `None` where `m_v` is unknown or 0.
    pub s: Vec<Option<f64>>,
    /// `a_ut`, donor-major, for the rate-limited kinds.
    a: Option<Vec<f64>>,
    /// Recipients left out of the proportionality rows.
    pub excluded: Vec<RecipientIdx>,
}

impl LpSolution {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn x(&self, e: EdgeIdx, t: usize) -> f64 {
        self.x[e.0 * self.horizon + t - 1]
    }

    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    pub fn a(&self, u: DonorIdx, t: usize) -> Option<f64> {
        self.a.as_ref().map(|a| a[u.0 * self.horizon + t - 1])
    }

    /// `(edge, step, value)` for every entry above `1e-12`.
    pub fn nonzero(&self) -> impl Iterator<Item = (EdgeIdx, usize, f64)> + '_ {
        let h = self.horizon;
        self.x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-12)
            .map(move |(i, &v)| (EdgeIdx(i / h), i % h + 1, v))
    }

    /// Zero solution of the given kind (used when there is nothing to solve).
    pub fn zero(s: &Scenario, kind: SolutionKind, gamma: f64) -> Self {
        let h = s.horizon();
        Self {
            kind,
            gamma,
            objective: 0.0,
            horizon: h,
            x: vec![0.0; s.edge_count() * h],
            s: s
                .normalization()
                .map(|m| m.iter().map(|&mv| (mv > 0.0).then_some(0.0)).collect())
                .unwrap_or_else(|| vec![None; s.recipient_count()]),
            a: kind.is_rate_limited().then(|| vec![1.0; s.donor_count() * h]),
            excluded: Vec::new(),
        }
    }
}

/// Builds and solves the models over an [`LpBackend`].
pub struct Solver {
    backend: Box<dyn LpBackend + Send + Sync>,
    options: SolveOptions,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new(DenseSimplex::default())
    }
}

impl core::fmt::Debug for Solver {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Solver")
            .field("backend", &self.backend.name())
            .field("options", &self.options)
            .finish()
    }
}

struct Var {
    edge: EdgeIdx,
    t: usize,
}

struct Model {
    lp: LinearProgram,
    vars: Vec<Var>,
    /// Per recipient: `(var, coefficient)` of its matched-weight expression.
    recipient_terms: Vec<Vec<(usize, f64)>>,
    excluded: Vec<RecipientIdx>,
}

impl Solver {
    pub fn new(backend: impl LpBackend + Send + Sync + 'static) -> Self {
        Self {
            backend: Box::new(backend),
            options: SolveOptions::default(),
        }
    }

    pub fn with_options(mut self, options: SolveOptions) -> Self {
        self.options = options;
        self
    }

    pub fn options(&self) -> &SolveOptions {
        &self.options
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Problem 1 for a known realization: the offline optimum `OPT(γ)`.
    pub fn offline_opt(&self, s: &Scenario, r: &DemandRealization, gamma: f64) -> Result<LpSolution> {
        check_inputs(s, Some(r), gamma)?;
        let model = self.model(s, gamma, |e, u, v, t| {
            let w = s.weight(e, t);
            (s.scheduled(u, t) && r.is_available(v, t) && w > 0.0).then_some((1.0, w, w))
        })?;
        let model = with_donor_step_rows(s, model);
        self.finish(s, model, SolutionKind::FixedTimeMilp, gamma)
    }

    /// Problem 1 relaxed: continuous `x` and `x_et ≤ p_vt·a_ut`.
    pub fn fixedtime_lp(&self, s: &Scenario, gamma: f64) -> Result<LpSolution> {
        check_inputs(s, None, gamma)?;
        let model = self.model(s, gamma, |e, u, v, t| {
            let w = s.weight(e, t);
            let p = s.availability(v, t);
            (s.scheduled(u, t) && p > 0.0 && w > 0.0).then_some((p, w, w))
        })?;
        let model = with_donor_step_rows(s, model);
        self.finish(s, model, SolutionKind::FixedTimeLp, gamma)
    }

    /// Problem 2: pre-match probabilities `y_et` of the best γ-proportional
    /// non-adaptive policy.
    pub fn nadapopt_lp(&self, s: &Scenario, gamma: f64) -> Result<LpSolution> {
        check_inputs(s, None, gamma)?;
        let model = self.model(s, gamma, |e, u, v, t| {
            let wp = s.weight(e, t) * s.availability(v, t);
            (s.scheduled(u, t) && wp > 0.0).then_some((1.0, wp, wp))
        })?;
        let model = with_donor_step_rows(s, model);
        self.finish(s, model, SolutionKind::NAdapOptLp, gamma)
    }

    /// Problem 3 for a known realization: donors choose when to be notified,
    /// at most once in any `K` consecutive steps.
    pub fn ratelimit_opt(&self, s: &Scenario, r: &DemandRealization, gamma: f64) -> Result<LpSolution> {
        check_inputs(s, Some(r), gamma)?;
        let model = self.model(s, gamma, |e, _, v, t| {
            let w = s.weight(e, t);
            (r.is_available(v, t) && w > 0.0).then_some((1.0, w, w))
        })?;
        let model = with_window_rows(s, model);
        self.finish(s, model, SolutionKind::RateLimitMilp, gamma)
    }

    /// Problem 3 relaxed: continuous `x`, `a` and `x_et ≤ p_vt`.
    pub fn ratelimit_lp(&self, s: &Scenario, gamma: f64) -> Result<LpSolution> {
        check_inputs(s, None, gamma)?;
        let model = self.model(s, gamma, |e, _, v, t| {
            let w = s.weight(e, t);
            let p = s.availability(v, t);
            (p > 0.0 && w > 0.0).then_some((p, w, w))
        })?;
        let model = with_window_rows(s, model);
        self.finish(s, model, SolutionKind::RateLimitLp, gamma)
    }

    /// Creates one variable per `(e, t)` for which `spec` returns
    /// `(upper bound, objective coefficient, matched-weight coefficient)`.
    fn model(
        &self,
        s: &Scenario,
        gamma: f64,
        mut spec: impl FnMut(EdgeIdx, DonorIdx, RecipientIdx, usize) -> Option<(f64, f64, f64)>,
    ) -> Result<Model> {
        let mut lp = LinearProgram::new();
        let mut vars = Vec::new();
        let mut recipient_terms = vec![Vec::new(); s.recipient_count()];
        for e in s.edge_ids() {
            let edge = s.edge(e);
            for t in s.steps() {
                if let Some((ub, c, wcoef)) = spec(e, edge.donor, edge.recipient, t) {
                    let j = lp.add_var(c, 0.0, ub.min(1.0));
                    vars.push(Var { edge: e, t });
                    recipient_terms[edge.recipient.0].push((j, wcoef));
                }
            }
        }
        let mut model = Model {
            lp,
            vars,
            recipient_terms,
            excluded: Vec::new(),
        };
        if gamma > 0.0 {
            self.add_proportionality(s, gamma, &mut model)?;
        }
        Ok(model)
    }

    fn add_proportionality(&self, s: &Scenario, gamma: f64, model: &mut Model) -> Result<()> {
        let m = s.normalization().ok_or(Error::MissingNormalization)?;
        let mut scope = Vec::new();
        for v in s.recipient_ids() {
            let mv = m[v.0];
            if mv > 0.0 && mv.is_finite() {
                scope.push(v);
            } else if self.options.scope == ProportionalityScope::PositiveNormalization {
                model.excluded.push(v);
            } else {
                return Err(Error::NonPositiveNormalization {
                    recipient: s.recipient(v).name.clone(),
                    value: mv,
                });
            }
        }
        if scope.len() < 2 {
            return Ok(());
        }
        let normalized = |v: RecipientIdx| -> Vec<(usize, f64)> {
            model.recipient_terms[v.0]
                .iter()
                .map(|&(j, c)| (j, c / m[v.0]))
                .collect()
        };
        match self.options.encoding {
            ProportionalityEncoding::MinMax => {
                let lp = &mut model.lp;
                let s_min = lp.add_var(0.0, 0.0, f64::INFINITY);
                let s_max = lp.add_var(0.0, 0.0, f64::INFINITY);
                let mut rows = Vec::with_capacity(2 * scope.len() + 1);
                for &v in &scope {
                    let mut lo = normalized(v);
                    let mut hi = lo.clone();
                    lo.push((s_min, -1.0));
                    hi.push((s_max, -1.0));
                    rows.push((lo, Sense::Ge));
                    rows.push((hi, Sense::Le));
                }
                for (terms, sense) in rows {
                    lp.add_constraint(terms, sense, 0.0);
                }
                lp.add_constraint(vec![(s_max, gamma), (s_min, -1.0)], Sense::Le, 0.0);
            }
            ProportionalityEncoding::Pairwise => {
                let exprs: Vec<_> = scope.iter().map(|&v| normalized(v)).collect();
                let lp = &mut model.lp;
                let svars: Vec<usize> = scope
                    .iter()
                    .map(|_| lp.add_var(0.0, 0.0, f64::INFINITY))
                    .collect();
                for (mut terms, &sv) in exprs.into_iter().zip(&svars) {
                    terms.push((sv, -1.0));
                    lp.add_constraint(terms, Sense::Eq, 0.0);
                }
                for (i, &a) in svars.iter().enumerate() {
                    for (k, &b) in svars.iter().enumerate() {
                        if i != k {
                            lp.add_constraint(vec![(a, gamma), (b, -1.0)], Sense::Le, 0.0);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(&self, s: &Scenario, model: Model, kind: SolutionKind, gamma: f64) -> Result<LpSolution> {
        let h = s.horizon();
        if model.vars.is_empty() {
            let mut zero = LpSolution::zero(s, kind, gamma);
            zero.excluded = model.excluded;
            return Ok(zero);
        }
        let point = if kind.is_integral() {
            let integer: Vec<usize> = (0..model.vars.len()).collect();
            BranchAndBound {
                integrality_tol: self.options.integrality_tol,
                relative_gap: self.options.relative_gap,
                max_nodes: self.options.max_nodes,
            }
            .solve(self.backend.as_ref(), &model.lp, &integer)?
        } else {
            self.backend.solve_lp(&model.lp)?
        };
        // Backends are trusted only as far as the rows they were given.
        let violation = model.lp.max_violation(&point.x);
        if violation > POINT_CHECK_TOL {
            return Err(SolverError::Backend(format!(
                "{} returned a point violating the model by {violation:.3e}",
                self.backend.name()
            ))
            .into());
        }

        let mut x = vec![0.0; s.edge_count() * h];
        let mut objective = 0.0;
        for (j, var) in model.vars.iter().enumerate() {
            let v = point.x[j];
            x[var.edge.0 * h + var.t - 1] = v;
            objective += model.lp.objective[j] * v;
        }

        let s_values = match s.normalization() {
            Some(m) => model
                .recipient_terms
                .iter()
                .zip(m)
                .map(|(terms, &mv)| {
                    (mv > 0.0).then(|| terms.iter().map(|&(j, c)| c * point.x[j]).sum::<f64>() / mv)
                })
                .collect(),
            None => vec![None; s.recipient_count()],
        };

        let a = kind.is_rate_limited().then(|| {
            let k = s.rate_limit();
            let mut a = vec![1.0; s.donor_count() * h];
            let mut per_step = vec![0.0; s.donor_count() * h];
            for (j, var) in model.vars.iter().enumerate() {
                per_step[s.edge(var.edge).donor.0 * h + var.t - 1] += point.x[j];
            }
            for u in 0..s.donor_count() {
                for t in 1..=h {
                    let from = t.saturating_sub(k - 1).max(1);
                    let used: f64 = (from..t).map(|tp| per_step[u * h + tp - 1]).sum();
                    a[u * h + t - 1] = (1.0 - used).clamp(0.0, 1.0);
                }
            }
            a
        });

        Ok(LpSolution {
            kind,
            gamma,
            objective,
            horizon: h,
            x,
            s: s_values,
            a,
            excluded: model.excluded,
        })
    }
}

fn check_inputs(s: &Scenario, r: Option<&DemandRealization>, gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} is outside [0, 1]")));
    }
    if let Some(r) = r {
        if r.horizon() != s.horizon() || r.as_slice().len() != s.recipient_count() * s.horizon() {
            return Err(Error::InvalidParameter("realization does not match the scenario".into()));
        }
    }
    s.ensure_valid()
}

/// `Σ_{e∈E_u:} x_et ≤ 1` for every donor-step with more than one variable.
fn with_donor_step_rows(s: &Scenario, mut model: Model) -> Model {
    let h = s.horizon();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); s.donor_count() * h];
    for (j, var) in model.vars.iter().enumerate() {
        groups[s.edge(var.edge).donor.0 * h + var.t - 1].push(j);
    }
    for g in groups.into_iter().filter(|g| g.len() > 1) {
        model
            .lp
            .add_constraint(g.into_iter().map(|j| (j, 1.0)).collect(), Sense::Le, 1.0);
    }
    model
}

/// Rate limit with `a_ut` substituted out: for every donor and every step `t`
/// carrying a variable, `Σ_{t'=max(1,t-K+1)}^{t} Σ_{e∈E_u:} x_et' ≤ 1`.
/// Windows ending at a step without variables are implied by the previous
/// window.
fn with_window_rows(s: &Scenario, mut model: Model) -> Model {
    let h = s.horizon();
    let k = s.rate_limit();
    let mut by_step: Vec<Vec<usize>> = vec![Vec::new(); s.donor_count() * h];
    for (j, var) in model.vars.iter().enumerate() {
        by_step[s.edge(var.edge).donor.0 * h + var.t - 1].push(j);
    }
    for u in 0..s.donor_count() {
        for t in 1..=h {
            if by_step[u * h + t - 1].is_empty() {
                continue;
            }
            let from = t.saturating_sub(k - 1).max(1);
            let terms: Vec<(usize, f64)> = (from..=t)
                .flat_map(|tp| by_step[u * h + tp - 1].iter().map(|&j| (j, 1.0)))
                .collect();
            if terms.len() > 1 {
                model.lp.add_constraint(terms, Sense::Le, 1.0);
            }
        }
    }
    model
}

/// Problem 1 with the default solver.
pub fn solve_offline_opt(s: &Scenario, r: &DemandRealization, gamma: f64) -> Result<LpSolution> {
    Solver::default().offline_opt(s, r, gamma)
}

/// Problem 1-LP with the default solver.
pub fn solve_fixedtime_lp(s: &Scenario, gamma: f64) -> Result<LpSolution> {
    Solver::default().fixedtime_lp(s, gamma)
}

/// Problem 2 with the default solver.
pub fn solve_nadapopt_lp(s: &Scenario, gamma: f64) -> Result<LpSolution> {
    Solver::default().nadapopt_lp(s, gamma)
}

/// Problem 3 with the default solver.
pub fn solve_ratelimit_opt(s: &Scenario, r: &DemandRealization, gamma: f64) -> Result<LpSolution> {
    Solver::default().ratelimit_opt(s, r, gamma)
}

/// Problem 3-LP with the default solver.
pub fn solve_ratelimit_lp(s: &Scenario, gamma: f64) -> Result<LpSolution> {
    Solver::default().ratelimit_lp(s, gamma)
}
