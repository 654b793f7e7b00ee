//! End-to-end experiments: normalization, plan solves, parallel Monte Carlo
//! trials and the fairness/weight sweep.
//!
//! Trials run on rayon but are folded in index order, so every number is
//! independent of the thread count.

use std::path::Path;

use bloodmatch_core::metrics::{empirical_ep_std_err, FairnessReport};
use bloodmatch_core::policy::{BetaOptions, PrepareOptions};
use bloodmatch_core::rng::Seeds;
use bloodmatch_core::sim::{
    estimate_normalization, fixed_realization, run_trial, AggregateResult, Aggregator, NormalizationProtocol,
    RealizationMode, TrialResult,
};
use bloodmatch_core::solver::{ProportionalityScope, SolveOptions};
use bloodmatch_core::{DemandRealization, PolicyKind, PolicySpec, PreparedPolicy, Regime, Scenario, Solver};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::write_scenario;
use crate::sparse::AutoBackend;
use crate::table::{write_aggregate, write_sweep, write_trials, AggregateRow, SweepRow, TrialRow};

/// The γ grid of a default sweep: 0, 0.1, …, 1.
pub fn default_gammas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Regime,
    pub trials: usize,
    /// Rand trials behind `m_v` when the scenario carries none.
    pub normalization_trials: usize,
    /// Also decides whether trials share one realization or draw their own.
    pub protocol: NormalizationProtocol,
    pub beta: BetaOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: Regime::FixedTime,
            trials: 50,
            normalization_trials: 100,
            protocol: NormalizationProtocol::FixedRealization,
            beta: BetaOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn realization_mode(&self) -> RealizationMode {
        self.protocol.realization_mode()
    }

    pub fn root(&self) -> Seeds {
        Seeds::new(self.seed)
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 || self.normalization_trials == 0 {
            return Err(Error::Input("trial counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solver used by the pipeline: size-switched backend, and recipients with
/// `m_v ≤ 0` left out of the proportionality rows.
pub fn pipeline_solver() -> Solver {
    Solver::new(AutoBackend::default()).with_options(SolveOptions {
        scope: ProportionalityScope::PositiveNormalization,
        ..SolveOptions::default()
    })
}

/// A scenario with `m_v` filled in, plus the experiment's fixed realization.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub scenario: Scenario,
    pub fixed: DemandRealization,
    pub config: RunConfig,
}

impl Experiment {
    /// Estimates `m_v` with Rand under the same root seed when the scenario
    /// has none.
    pub fn new(s: &Scenario, config: RunConfig) -> Result<Self> {
        config.check()?;
        s.ensure_valid()?;
        let root = config.root();
        let fixed = fixed_realization(s, &root);
        let scenario = match s.normalization() {
            Some(_) => s.clone(),
            None => {
                let m = estimate_normalization(
                    s,
                    config.normalization_trials,
                    config.protocol,
                    config.mode,
                    &fixed,
                    &root,
                )?;
                s.with_normalization(m)
            }
        };
        Ok(Self {
            scenario,
            fixed,
            config,
        })
    }

    pub fn normalization(&self) -> &[f64] {
        self.scenario.normalization().expect("set in Experiment::new")
    }

    pub fn prepare(&self, spec: &PolicySpec, solver: &Solver) -> Result<PreparedPolicy> {
        let opts = PrepareOptions {
            beta: self.config.beta.clone(),
            seeds: self.config.root(),
        };
        let policy = if spec.kind.uses_plan() {
            PreparedPolicy::prepare(&self.scenario, spec, solver, &opts)?
        } else {
            PreparedPolicy::myopic(spec.clone())?
        };
        Ok(policy)
    }

    /// Runs trials `0..trials` in parallel; results come back in index order.
    pub fn trials(&self, policy: &PreparedPolicy) -> Result<Vec<TrialResult>> {
        let root = self.config.root();
        (0..self.config.trials as u64)
            .into_par_iter()
            .map(|i| run_trial(&self.scenario, policy, self.config.realization_mode(), &self.fixed, &root, i))
            .collect::<bloodmatch_core::Result<Vec<_>>>()
            .map_err(Error::from)
    }

    pub fn aggregate(&self, trials: &[TrialResult]) -> Result<AggregateResult> {
        let mut agg = Aggregator::new(self.scenario.recipient_count());
        for t in trials {
            agg.push(&t.outcome);
        }
        Ok(agg.finish()?)
    }

    /// Gamma of the mean outcomes and its standard error, over the
    /// recipients with `m_v > 0`.
    pub fn fairness(&self, agg: &AggregateResult) -> Result<(FairnessReport, f64)> {
        let m = self.normalization();
        let report = FairnessReport::new(&agg.mean_recipient_weight, m, agg.mean_total_weight, None, None)?;
        let keep: Vec<usize> = (0..m.len()).filter(|&v| m[v] > 0.0 && m[v].is_finite()).collect();
        let kept = AggregateResult {
            trial_count: agg.trial_count,
            mean_total_weight: agg.mean_total_weight,
            std_err_total: agg.std_err_total,
            mean_recipient_weight: keep.iter().map(|&v| agg.mean_recipient_weight[v]).collect(),
            std_err_recipient: keep.iter().map(|&v| agg.std_err_recipient[v]).collect(),
        };
        let m_kept: Vec<f64> = keep.iter().map(|&v| m[v]).collect();
        let se = empirical_ep_std_err(&kept, &m_kept)?;
        Ok((report, se))
    }
}

fn recipient_ids(s: &Scenario) -> Vec<String> {
    s.recipients().iter().map(|r| r.name.clone()).collect()
}

/// Output of `run`: per-trial rows and the aggregate row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub recipients: Vec<String>,
    pub trials: Vec<TrialRow>,
    pub aggregate: AggregateRow,
}

/// Evaluates one policy. The policy's regime is the experiment's.
pub fn run(exp: &Experiment, spec: &PolicySpec, solver: &Solver) -> Result<RunOutput> {
    let spec = spec.clone().with_mode(exp.config.mode);
    spec.validate()?;
    let policy = exp.prepare(&spec, solver)?;
    let trials = exp.trials(&policy)?;
    let agg = exp.aggregate(&trials)?;
    let (report, gamma_se) = exp.fairness(&agg)?;
    let label = policy.label();
    let gamma = spec.gamma_param();
    Ok(RunOutput {
        recipients: recipient_ids(&exp.scenario),
        trials: trials
            .iter()
            .map(|t| TrialRow {
                trial: t.trial,
                policy: label.clone(),
                gamma,
                total_weight: t.outcome.total_weight(),
                recipient_weight: t.outcome.recipient_weight().to_vec(),
            })
            .collect(),
        aggregate: AggregateRow {
            policy: label,
            gamma_param: gamma,
            mode: exp.config.mode.to_string(),
            trials: agg.trial_count,
            mean_total_weight: agg.mean_total_weight,
            std_err_total: agg.std_err_total,
            gamma_empirical: report.gamma_empirical,
            gamma_std_err: gamma_se,
            mean_recipient_weight: agg.mean_recipient_weight,
            std_err_recipient: agg.std_err_recipient,
        },
    })
}

/// Writes `scenario.json`, `trials.csv` and `aggregate.csv` under `out`.
pub fn write_run(out: &Path, exp: &Experiment, output: &RunOutput) -> Result<()> {
    write_scenario(&out.join("scenario.json"), &exp.scenario)?;
    write_trials(&out.join("trials.csv"), &output.recipients, &output.trials)?;
    write_aggregate(&out.join("aggregate.csv"), &output.recipients, std::slice::from_ref(&output.aggregate))
}

/// Policy evaluated at each γ of a sweep: AdaptMatch over NAdapOpt(γ)'s plan
/// in fixed time, NAdapLP_Rate(γ) in the rate-limited regime (where
/// AdaptMatch is not defined).
pub fn sweep_kind(mode: Regime) -> PolicyKind {
    match mode {
        Regime::FixedTime => PolicyKind::AdaptMatch,
        Regime::RateLimited => PolicyKind::NAdapLpRate,
    }
}

fn lp_bound(exp: &Experiment, solver: &Solver, gamma: f64) -> Result<f64> {
    let sol = match exp.config.mode {
        Regime::FixedTime => solver.fixedtime_lp(&exp.scenario, gamma)?,
        Regime::RateLimited => solver.ratelimit_lp(&exp.scenario, gamma)?,
    };
    Ok(sol.objective)
}

struct Point {
    policy: String,
    gamma_param: Option<f64>,
    aggregate: AggregateResult,
    report: FairnessReport,
    lp_bound: f64,
}

fn sweep_point(exp: &Experiment, solver: &Solver, gamma: Option<f64>, kind: PolicyKind) -> Result<Point> {
    let mode = exp.config.mode;
    let policy = match (kind, gamma) {
        (PolicyKind::Max, _) => PreparedPolicy::myopic(PolicySpec::max().with_mode(mode))?,
        (PolicyKind::Rand, _) => PreparedPolicy::myopic(PolicySpec::rand().with_mode(mode))?,
        (PolicyKind::AdaptMatch, Some(g)) => {
            let base = exp.prepare(&PolicySpec::nadapopt(g), solver)?;
            PreparedPolicy::adaptmatch_over(&base, None)?
        }
        (PolicyKind::NAdapLpRate, Some(g)) => exp.prepare(&PolicySpec::nadaplp_rate(None, g), solver)?,
        _ => unreachable!("sweep points are Max, Rand or the γ policy"),
    };
    let trials = exp.trials(&policy)?;
    let aggregate = exp.aggregate(&trials)?;
    let (report, _) = exp.fairness(&aggregate)?;
    Ok(Point {
        policy: policy.label(),
        gamma_param: gamma,
        lp_bound: lp_bound(exp, solver, gamma.unwrap_or(0.0))?,
        aggregate,
        report,
    })
}

/// Max, Rand, then one row per γ. Weight fractions are relative to Max's
/// mean total weight; `lp_bound` is `Z_LP(γ)` (`Z_LP(0)` for Max and Rand).
pub fn sweep(exp: &Experiment, gammas: &[f64], solver: &Solver) -> Result<Vec<SweepRow>> {
    if let Some(g) = gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::Input(format!("gamma {g} is outside [0, 1]")));
    }
    let kind = sweep_kind(exp.config.mode);
    let jobs: Vec<(Option<f64>, PolicyKind)> = [(None, PolicyKind::Max), (None, PolicyKind::Rand)]
        .into_iter()
        .chain(gammas.iter().map(|&g| (Some(g), kind)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(g, k)| sweep_point(exp, solver, g, k))
        .collect::<Result<Vec<_>>>()?;
    let max_weight = points[0].aggregate.mean_total_weight;
    Ok(points
        .into_iter()
        .map(|p| SweepRow {
            policy: p.policy,
            gamma_param: p.gamma_param,
            total_weight: p.aggregate.mean_total_weight,
            weight_fraction_of_max: (max_weight > 0.0).then(|| p.aggregate.mean_total_weight / max_weight),
            gamma_empirical: p.report.gamma_empirical,
            min_normalized: p.report.min_normalized,
            max_normalized: p.report.max_normalized,
            lp_bound: Some(p.lp_bound),
        })
        .collect())
}

/// Writes `scenario.json`, `sweep.csv` and `sweep.svg` under `out`.
pub fn write_sweep_outputs(out: &Path, exp: &Experiment, rows: &[SweepRow], title: &str) -> Result<()> {
    write_scenario(&out.join("scenario.json"), &exp.scenario)?;
    write_sweep(&out.join("sweep.csv"), rows)?;
    crate::format::write_text(&out.join("sweep.svg"), &crate::plot::sweep_svg(rows, title))
}
