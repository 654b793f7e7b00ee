//! Time-stepped policy execution and Monte Carlo evaluation.
//!
//! Seed layout under a root [`Seeds`]:
//!
//! * fixed realization: `root.stream(Realization, 0)`;
//! * trial `i`: `root.child(Trial, i)`, whose streams are
//!   `TrialRealization/0` (resampled realization), `Plan/(u·T + t − 1)` and
//!   `Decision/(u·T + t − 1)`.
//!
//! Every trial depends only on the root and its index, so trials can run in
//! any order or in parallel and aggregate to the same numbers as long as
//! they are folded in index order.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::{available_edges_into, DemandRealization, MatchingOutcome, Regime, RecipientKind, Scenario};
use crate::policy::{PolicySpec, PreparedPolicy};
use crate::rng::{unit, Domain, Seeds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RealizationMode {
    /// One realization shared by all trials.
    #[default]
    Fixed,
    /// A fresh realization per trial.
    Resampled,
}

/// How `m_v` is estimated from Rand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NormalizationProtocol {
    /// Mean of Rand's `Y_v` on the experiment's fixed realization.
    #[default]
    FixedRealization,
    /// Mean of Rand's `Y_v` over fresh realizations.
    Expectation,
}

impl NormalizationProtocol {
    pub fn realization_mode(self) -> RealizationMode {
        match self {
            NormalizationProtocol::FixedRealization => RealizationMode::Fixed,
            NormalizationProtocol::Expectation => RealizationMode::Resampled,
        }
    }
}

/// Independent Bernoulli(`p_vt`) per dynamic recipient and step; static
/// recipients are always available and consume no randomness.
pub fn draw_realization<R: RngCore + ?Sized>(s: &Scenario, rng: &mut R) -> DemandRealization {
    DemandRealization::from_fn(s, |v, t| {
        debug_assert!(s.recipient(v).kind == RecipientKind::Dynamic);
        unit(rng) < s.availability(v, t)
    })
}

/// The experiment's fixed realization under `root`.
pub fn fixed_realization(s: &Scenario, root: &Seeds) -> DemandRealization {
    draw_realization(s, &mut root.stream(Domain::Realization, 0))
}

/// Seed root of trial `index`.
pub fn trial_seeds(root: &Seeds, index: u64) -> Seeds {
    root.child(Domain::Trial, index)
}

/// The trial's own realization in resampled mode.
pub fn resampled_realization(s: &Scenario, trial: &Seeds) -> DemandRealization {
    draw_realization(s, &mut trial.stream(Domain::TrialRealization, 0))
}

/// Runs `policy` over `t = 1..=T` on realization `r`.
///
/// A donor is available on scheduled days in fixed time, and in the
/// rate-limited regime when unmatched for the previous `K − 1` steps.
pub fn run_policy(
    s: &Scenario,
    policy: &PreparedPolicy,
    r: &DemandRealization,
    trial: &Seeds,
) -> Result<MatchingOutcome> {
    if r.horizon() != s.horizon() || r.as_slice().len() != s.recipient_count() * s.horizon() {
        return Err(Error::InvalidParameter("realization does not match the scenario".into()));
    }
    let k = s.rate_limit();
    let mode = policy.mode();
    let mut outcome = MatchingOutcome::empty(s);
    let mut last: Vec<Option<usize>> = vec![None; s.donor_count()];
    let mut edges = Vec::new();
    for t in s.steps() {
        for u in s.donor_ids() {
            let available = match mode {
                Regime::FixedTime => s.scheduled(u, t),
                Regime::RateLimited => last[u.0].is_none_or(|prev| t - prev >= k),
            };
            if !available {
                continue;
            }
            available_edges_into(s, u, t, r, true, &mut edges)?;
            if let Some(e) = policy.decide(s, u, t, r, &edges, trial) {
                outcome.record(s, e, t);
                last[u.0] = Some(t);
            }
        }
    }
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    /// Master value of the trial's seed root.
    pub seed: u64,
    pub policy: PolicySpec,
    pub outcome: MatchingOutcome,
}

/// Trial `index` under `root`: realization per `mode`, then [`run_policy`].
pub fn run_trial(
    s: &Scenario,
    policy: &PreparedPolicy,
    mode: RealizationMode,
    fixed: &DemandRealization,
    root: &Seeds,
    index: u64,
) -> Result<TrialResult> {
    let trial = trial_seeds(root, index);
    let outcome = match mode {
        RealizationMode::Fixed => run_policy(s, policy, fixed, &trial)?,
        RealizationMode::Resampled => run_policy(s, policy, &resampled_realization(s, &trial), &trial)?,
    };
    Ok(TrialResult {
        trial: index,
        seed: trial.master(),
        policy: policy.spec().clone(),
        outcome,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResult {
    pub trial_count: usize,
    pub mean_total_weight: f64,
    /// Standard error of the mean total weight (0 for a single trial).
    pub std_err_total: f64,
    /// `Ȳ_v`.
    pub mean_recipient_weight: Vec<f64>,
    pub std_err_recipient: Vec<f64>,
}

/// Welford accumulator over trials; fold in trial order for reproducible
/// floating-point results.
#[derive(Clone, Debug)]
pub struct Aggregator {
    n: usize,
    mean_total: f64,
    m2_total: f64,
    mean_y: Vec<f64>,
    m2_y: Vec<f64>,
}

impl Aggregator {
    pub fn new(recipients: usize) -> Self {
        Self {
            n: 0,
            mean_total: 0.0,
            m2_total: 0.0,
            mean_y: vec![0.0; recipients],
            m2_y: vec![0.0; recipients],
        }
    }

    pub fn push(&mut self, outcome: &MatchingOutcome) {
        self.n += 1;
        let n = self.n as f64;
        let x = outcome.total_weight();
        let d = x - self.mean_total;
        self.mean_total += d / n;
        self.m2_total += d * (x - self.mean_total);
        for ((m, m2), &y) in self.mean_y.iter_mut().zip(&mut self.m2_y).zip(outcome.recipient_weight()) {
            let d = y - *m;
            *m += d / n;
            *m2 += d * (y - *m);
        }
    }

    pub fn finish(self) -> Result<AggregateResult> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("aggregate of zero trials".into()));
        }
        let n = self.n as f64;
        let se = |m2: f64| {
            if self.n < 2 {
                0.0
            } else {
                libm::sqrt((m2 / (n - 1.0)).max(0.0) / n)
            }
        };
        Ok(AggregateResult {
            trial_count: self.n,
            mean_total_weight: self.mean_total,
            std_err_total: se(self.m2_total),
            std_err_recipient: self.m2_y.iter().map(|&m2| se(m2)).collect(),
            mean_recipient_weight: self.mean_y,
        })
    }
}

/// Runs trials `0..trials` serially and aggregates them.
pub fn monte_carlo_evaluate(
    s: &Scenario,
    policy: &PreparedPolicy,
    trials: usize,
    mode: RealizationMode,
    fixed: &DemandRealization,
    root: &Seeds,
) -> Result<AggregateResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    let mut agg = Aggregator::new(s.recipient_count());
    for i in 0..trials {
        agg.push(&run_trial(s, policy, mode, fixed, root, i as u64)?.outcome);
    }
    agg.finish()
}

/// `m_v`: Rand's mean `Y_v` in `regime`. Uses the same trial seeds as
/// [`monte_carlo_evaluate`] under `root`, so evaluating Rand with the same
/// root, realization and trial count reproduces `m_v` exactly.
pub fn estimate_normalization(
    s: &Scenario,
    trials: usize,
    protocol: NormalizationProtocol,
    regime: Regime,
    fixed: &DemandRealization,
    root: &Seeds,
) -> Result<Vec<f64>> {
    let rand = PreparedPolicy::myopic(PolicySpec::rand().with_mode(regime))?;
    Ok(monte_carlo_evaluate(s, &rand, trials, protocol.realization_mode(), fixed, root)?.mean_recipient_weight)
}
