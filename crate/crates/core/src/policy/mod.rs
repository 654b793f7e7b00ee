//! Notification policies.
//!
//! Every policy is a per-(donor, step) decision: given that donor `u` is
//! available at `t`, return the edge to notify along (or none). Randomness
//! comes from per-(donor, step) streams of the trial's [`Seeds`], so a trial
//! is reproducible regardless of evaluation order, and two policies run with
//! the same trial seeds see the same pre-match draws.

mod beta;
mod myopic;
mod prematch;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use beta::{estimate_beta, nadaplp_rate_distribution, nadaplp_rate_plan, BetaEstimate, BetaOptions};
pub use myopic::{choose_max, choose_rand, max_decide, rand_decide, randmax_decide};
pub use prematch::{
    adaptmatch_decide, execute_prematch, nadaplp_distribution, nadaplp_plan, nadapopt_distribution,
    nadapopt_plan, PreMatchPlan, PrematchDistribution, PLAN_MASS_TOL,
};

use crate::error::{Error, Result};
use crate::graph::{donor_max_degree, DemandRealization, DonorIdx, EdgeIdx, Regime, Scenario};
use crate::rng::{unit, Domain, Seeds};
use crate::solver::{LpSolution, Solver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Rand,
    Max,
    RandMax,
    NAdapLp,
    NAdapOpt,
    AdaptMatch,
    NAdapLpRate,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Rand,
        PolicyKind::Max,
        PolicyKind::RandMax,
        PolicyKind::NAdapLp,
        PolicyKind::NAdapOpt,
        PolicyKind::AdaptMatch,
        PolicyKind::NAdapLpRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Rand => "rand",
            PolicyKind::Max => "max",
            PolicyKind::RandMax => "randmax",
            PolicyKind::NAdapLp => "nadaplp",
            PolicyKind::NAdapOpt => "nadapopt",
            PolicyKind::AdaptMatch => "adaptmatch",
            PolicyKind::NAdapLpRate => "nadaplp_rate",
        }
    }

    pub fn takes_gamma(self) -> bool {
        !matches!(self, PolicyKind::Rand | PolicyKind::Max)
    }

    pub fn takes_alpha(self) -> bool {
        matches!(self, PolicyKind::NAdapLp | PolicyKind::NAdapLpRate)
    }

    pub fn uses_plan(self) -> bool {
        matches!(
            self,
            PolicyKind::NAdapLp | PolicyKind::NAdapOpt | PolicyKind::AdaptMatch | PolicyKind::NAdapLpRate
        )
    }

    pub fn supports(self, regime: Regime) -> bool {
        match self {
            PolicyKind::Rand | PolicyKind::Max | PolicyKind::RandMax => true,
            PolicyKind::NAdapLp | PolicyKind::NAdapOpt | PolicyKind::AdaptMatch => regime == Regime::FixedTime,
            PolicyKind::NAdapLpRate => regime == Regime::RateLimited,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown policy kind '{s}'")))
    }
}

/// A policy and its parameters.
///
/// `gamma` is the proportionality parameter of the underlying LP for the
/// plan-based kinds and the Rand probability for RandMax. AdaptMatch uses
/// `gamma` for its NAdapOpt plan and `fallback_gamma` (default `gamma`) for
/// the Rand/Max fallback. `alpha = None` selects the always-valid scale:
/// `1/D` for NAdapLP and `1/(2D)` for NAdapLP_Rate.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub fallback_gamma: Option<f64>,
    pub mode: Regime,
}

impl PolicySpec {
    fn of(kind: PolicyKind, gamma: f64) -> Self {
        Self {
            kind,
            gamma,
            alpha: None,
            fallback_gamma: None,
            mode: Regime::FixedTime,
        }
    }

    pub fn rand() -> Self {
        Self::of(PolicyKind::Rand, 0.0)
    }

    pub fn max() -> Self {
        Self::of(PolicyKind::Max, 0.0)
    }

    pub fn randmax(gamma: f64) -> Self {
        Self::of(PolicyKind::RandMax, gamma)
    }

    pub fn nadaplp(alpha: Option<f64>, gamma: f64) -> Self {
        Self {
            alpha,
            ..Self::of(PolicyKind::NAdapLp, gamma)
        }
    }

    pub fn nadapopt(gamma: f64) -> Self {
        Self::of(PolicyKind::NAdapOpt, gamma)
    }

    pub fn adaptmatch(gamma: f64) -> Self {
        Self::of(PolicyKind::AdaptMatch, gamma)
    }

    pub fn nadaplp_rate(alpha: Option<f64>, gamma: f64) -> Self {
        Self {
            alpha,
            mode: Regime::RateLimited,
            ..Self::of(PolicyKind::NAdapLpRate, gamma)
        }
    }

    pub fn with_mode(mut self, mode: Regime) -> Self {
        self.mode = mode;
        self
    }

    /// The parameter reported alongside results; `None` for Rand and Max.
    pub fn gamma_param(&self) -> Option<f64> {
        self.kind.takes_gamma().then_some(self.gamma)
    }

    pub fn fallback(&self) -> f64 {
        self.fallback_gamma.unwrap_or(self.gamma)
    }

    /// `α` actually used on `s`.
    pub fn effective_alpha(&self, s: &Scenario) -> Option<f64> {
        if !self.kind.takes_alpha() {
            return None;
        }
        Some(self.alpha.unwrap_or_else(|| {
            let d = donor_max_degree(s);
            match (d, self.kind) {
                (0, _) => 0.0,
                (d, PolicyKind::NAdapLpRate) => 1.0 / (2.0 * d as f64),
                (d, _) => 1.0 / d as f64,
            }
        }))
    }

    pub fn validate(&self) -> Result<()> {
        let unit_interval = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{}: {name} = {v} is outside [0, 1]", self.kind)))
            }
        };
        unit_interval("gamma", self.gamma)?;
        if let Some(g) = self.fallback_gamma {
            if self.kind != PolicyKind::AdaptMatch {
                return Err(Error::InvalidParameter(format!("{} takes no fallback gamma", self.kind)));
            }
            unit_interval("fallback", g)?;
        }
        if let Some(a) = self.alpha {
            if !self.kind.takes_alpha() {
                return Err(Error::InvalidParameter(format!("{} takes no alpha", self.kind)));
            }
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("{}: alpha = {a} must be finite and ≥ 0", self.kind)));
            }
        }
        if !self.kind.supports(self.mode) {
            return Err(Error::Unsupported(format!(
                "policy {} is not defined in the {} regime",
                self.kind, self.mode
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if !self.kind.takes_gamma() {
            return Ok(());
        }
        if self.alpha.is_none() && self.fallback_gamma.is_none() {
            return write!(f, ":{}", self.gamma);
        }
        if let Some(a) = self.alpha {
            write!(f, ":alpha={a},gamma={}", self.gamma)?;
        } else {
            write!(f, ":gamma={}", self.gamma)?;
        }
        if let Some(g) = self.fallback_gamma {
            write!(f, ",fallback={g}")?;
        }
        Ok(())
    }
}

/// Parses `max`, `rand`, `randmax:0.3`, `adaptmatch:0.5`,
/// `adaptmatch:gamma=0.5,fallback=0.2`, `nadaplp:alpha=0.1,gamma=0.5`,
/// `nadaplp_rate:gamma=0.2`. Rate-limited kinds default to the rate regime,
/// the others to fixed time.
impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, args) = match text.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (text, None),
        };
        let kind: PolicyKind = kind.parse()?;
        let mut spec = Self::of(kind, 0.0);
        if kind == PolicyKind::NAdapLpRate {
            spec.mode = Regime::RateLimited;
        }
        let number = |key: &str, v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("{kind}: {key} '{v}' is not a number")))
        };
        if let Some(args) = args {
            if !kind.takes_gamma() {
                return Err(Error::InvalidParameter(format!("{kind} takes no parameters")));
            }
            if args.contains('=') {
                for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let (key, value) = part
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidParameter(format!("{kind}: expected key=value, got '{part}'")))?;
                    match key.trim() {
                        "gamma" => spec.gamma = number("gamma", value)?,
                        "alpha" => spec.alpha = Some(number("alpha", value)?),
                        "fallback" | "fallback_gamma" => spec.fallback_gamma = Some(number("fallback", value)?),
                        other => {
                            return Err(Error::InvalidParameter(format!("{kind}: unknown parameter '{other}'")))
                        }
                    }
                }
            } else {
                spec.gamma = number("gamma", args)?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Knobs for [`PreparedPolicy::prepare`].
#[derive(Clone, Debug)]
pub struct PrepareOptions {
    pub beta: BetaOptions,
    /// Root of the β-estimation streams.
    pub seeds: Seeds,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            beta: BetaOptions::default(),
            seeds: Seeds::new(0),
        }
    }
}

/// A policy with everything it needs precomputed: the LP solution and
/// pre-match distribution for plan-based kinds, β for NAdapLP_Rate.
#[derive(Clone, Debug)]
pub struct PreparedPolicy {
    spec: PolicySpec,
    alpha: Option<f64>,
    solution: Option<LpSolution>,
    plan: Option<PrematchDistribution>,
    beta: Option<BetaEstimate>,
}

impl PreparedPolicy {
    pub fn prepare(s: &Scenario, spec: &PolicySpec, solver: &Solver, opts: &PrepareOptions) -> Result<Self> {
        spec.validate()?;
        let alpha = spec.effective_alpha(s);
        let mut out = Self {
            spec: spec.clone(),
            alpha,
            solution: None,
            plan: None,
            beta: None,
        };
        match spec.kind {
            PolicyKind::Rand | PolicyKind::Max | PolicyKind::RandMax => {}
            PolicyKind::NAdapLp => {
                let sol = solver.fixedtime_lp(s, spec.gamma)?;
                out.plan = Some(nadaplp_distribution(s, &sol, alpha.unwrap_or(0.0))?);
                out.solution = Some(sol);
            }
            PolicyKind::NAdapOpt | PolicyKind::AdaptMatch => {
                let sol = solver.nadapopt_lp(s, spec.gamma)?;
                out.plan = Some(nadapopt_distribution(s, &sol)?);
                out.solution = Some(sol);
            }
            PolicyKind::NAdapLpRate => {
                let sol = solver.ratelimit_lp(s, spec.gamma)?;
                let a = alpha.unwrap_or(0.0);
                let beta = estimate_beta(s, &sol, a, &opts.beta, &opts.seeds)?;
                out.plan = Some(nadaplp_rate_distribution(s, &sol, a, &beta)?);
                out.solution = Some(sol);
                out.beta = Some(beta);
            }
        }
        Ok(out)
    }

    /// AdaptMatch over the plan of an already prepared NAdapOpt policy.
    pub fn adaptmatch_over(base: &PreparedPolicy, fallback_gamma: Option<f64>) -> Result<Self> {
        if base.spec.kind != PolicyKind::NAdapOpt {
            return Err(Error::InvalidParameter(format!(
                "AdaptMatch needs a NAdapOpt plan, got {}",
                base.spec.kind
            )));
        }
        let mut spec = PolicySpec::adaptmatch(base.spec.gamma);
        spec.fallback_gamma = fallback_gamma;
        spec.validate()?;
        Ok(Self {
            spec,
            ..base.clone()
        })
    }

    /// A plan-based policy with a caller-supplied distribution.
    pub fn with_distribution(spec: PolicySpec, plan: PrematchDistribution) -> Result<Self> {
        spec.validate()?;
        if !spec.kind.uses_plan() {
            return Err(Error::InvalidParameter(format!("{} does not use a pre-match plan", spec.kind)));
        }
        Ok(Self {
            spec,
            alpha: None,
            solution: None,
            plan: Some(plan),
            beta: None,
        })
    }

    /// A myopic policy (Rand, Max, RandMax); needs no preparation.
    pub fn myopic(spec: PolicySpec) -> Result<Self> {
        spec.validate()?;
        if spec.kind.uses_plan() {
            return Err(Error::InvalidParameter(format!("{} needs preparation", spec.kind)));
        }
        Ok(Self {
            spec,
            alpha: None,
            solution: None,
            plan: None,
            beta: None,
        })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn mode(&self) -> Regime {
        self.spec.mode
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn solution(&self) -> Option<&LpSolution> {
        self.solution.as_ref()
    }

    pub fn distribution(&self) -> Option<&PrematchDistribution> {
        self.plan.as_ref()
    }

    pub fn beta(&self) -> Option<&BetaEstimate> {
        self.beta.as_ref()
    }

    /// Label used in result tables.
    pub fn label(&self) -> String {
        self.spec.kind.as_str().to_string()
    }

    /// Decision for an available donor `u` at `t`. `edges` must be
    /// `E^t_u:` under `r`; `trial` is the trial's seed root.
    pub fn decide(
        &self,
        s: &Scenario,
        u: DonorIdx,
        t: usize,
        r: &DemandRealization,
        edges: &[EdgeIdx],
        trial: &Seeds,
    ) -> Option<EdgeIdx> {
        let idx = (u.0 * s.horizon() + t - 1) as u64;
        match self.spec.kind {
            PolicyKind::Rand => choose_rand(edges, &mut trial.stream(Domain::Decision, idx)),
            PolicyKind::Max => choose_max(s, edges, t, &mut trial.stream(Domain::Decision, idx)),
            PolicyKind::RandMax => {
                let mut rng = trial.stream(Domain::Decision, idx);
                randmax_choice(s, edges, t, self.spec.gamma, &mut rng)
            }
            PolicyKind::NAdapLp | PolicyKind::NAdapOpt | PolicyKind::NAdapLpRate => {
                let pre = self.plan.as_ref()?.sample_at(u, t, trial);
                pre.filter(|&e| r.is_available(s.edge(e).recipient, t))
            }
            PolicyKind::AdaptMatch => {
                let pre = self.plan.as_ref().and_then(|p| p.sample_at(u, t, trial));
                match pre.filter(|&e| r.is_available(s.edge(e).recipient, t)) {
                    Some(e) => Some(e),
                    None => {
                        let mut rng = trial.stream(Domain::Decision, idx);
                        randmax_choice(s, edges, t, self.spec.fallback(), &mut rng)
                    }
                }
            }
        }
    }
}

/// Rand with probability `gamma`, Max otherwise. The coin is always drawn
/// first so the stream layout does not depend on `gamma`.
pub(crate) fn randmax_choice<R: rand::RngCore + ?Sized>(
    s: &Scenario,
    edges: &[EdgeIdx],
    t: usize,
    gamma: f64,
    rng: &mut R,
) -> Option<EdgeIdx> {
    if unit(rng) < gamma {
        choose_rand(edges, rng)
    } else {
        choose_max(s, edges, t, rng)
    }
}

/// Per-(donor, step) choice probabilities of the myopic rules over `edges`:
/// `(Rand share, Max share)` per edge, i.e. `1/n` and `1/|ties|`.
pub(crate) fn myopic_probabilities(s: &Scenario, edges: &[EdgeIdx], t: usize) -> (Vec<f64>, Vec<f64>) {
    let n = edges.len();
    let rand = alloc::vec![1.0 / n as f64; n];
    let w_max = edges.iter().map(|&e| s.weight(e, t)).fold(f64::NEG_INFINITY, f64::max);
    let ties = edges.iter().filter(|&&e| s.weight(e, t) == w_max).count();
    let max = edges
        .iter()
        .map(|&e| if s.weight(e, t) == w_max { 1.0 / ties as f64 } else { 0.0 })
        .collect();
    (rand, max)
}
