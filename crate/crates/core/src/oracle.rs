//! Exhaustive reference implementations for tiny instances.
//!
//! Bounds are hard errors: an oracle that silently truncates its search is
//! worse than none.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{DemandRealization, DonorIdx, EdgeIdx, MatchingOutcome, RecipientKind, Regime, Scenario};
use crate::policy::{myopic_probabilities, PolicyKind, PreparedPolicy};

/// Largest number of candidate choices of one donor at one step (no match
/// plus up to five edges).
pub const MAX_SLOT_CHOICES: usize = 6;
/// Largest number of complete assignments enumerated, `6^8`.
pub const MAX_ENUMERATION: u64 = 1_679_616;
/// Largest per-step DP state space of [`brute_force_policy_expectation`].
pub const MAX_DP_STATES: usize = 10_000;
/// Slack on `γ·max s ≤ min s`; equal to the LP feasibility tolerance so the
/// oracle and the MILP accept the same boundary cases.
pub const PROPORTIONALITY_TOL: f64 = 1e-7;

fn normalization_for(s: &Scenario, gamma: f64) -> Result<Option<&[f64]>> {
    if gamma <= 0.0 {
        return Ok(None);
    }
    let m = s.normalization().ok_or(Error::MissingNormalization)?;
    for v in s.recipient_ids() {
        if !(m[v.0] > 0.0) {
            return Err(Error::NonPositiveNormalization {
                recipient: s.recipient(v).name.clone(),
                value: m[v.0],
            });
        }
    }
    Ok(Some(m))
}

fn is_proportional(y: &[f64], m: &[f64], gamma: f64) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (yv, mv) in y.iter().zip(m) {
        let x = yv / mv;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    y.is_empty() || gamma * hi <= lo + PROPORTIONALITY_TOL
}

struct Slot {
    donor: DonorIdx,
    t: usize,
    edges: Vec<EdgeIdx>,
    best: f64,
}

struct Search<'a> {
    s: &'a Scenario,
    regime: Regime,
    gamma: f64,
    m: Option<&'a [f64]>,
    slots: Vec<Slot>,
    /// `remaining[i]`: largest weight slots `i..` can still add.
    remaining: Vec<f64>,
    y: Vec<f64>,
    last: Vec<Option<usize>>,
    choice: Vec<Option<EdgeIdx>>,
    total: f64,
    best: f64,
    best_choice: Vec<Option<EdgeIdx>>,
}

impl Search<'_> {
    fn run(&mut self, i: usize) {
        if self.total + self.remaining[i] <= self.best {
            return;
        }
        if i == self.slots.len() {
            if self.m.is_none_or(|m| is_proportional(&self.y, m, self.gamma)) {
                self.best = self.total;
                self.best_choice.clone_from(&self.choice);
            }
            return;
        }
        self.choice[i] = None;
        self.run(i + 1);

        let (u, t) = (self.slots[i].donor, self.slots[i].t);
        if self.regime == Regime::RateLimited {
            if let Some(prev) = self.last[u.0] {
                if t - prev < self.s.rate_limit() {
                    return;
                }
            }
        }
        let saved = self.last[u.0];
        for k in 0..self.slots[i].edges.len() {
            let e = self.slots[i].edges[k];
            let w = self.s.weight(e, t);
            let v = self.s.edge(e).recipient.0;
            self.y[v] += w;
            self.total += w;
            self.last[u.0] = Some(t);
            self.choice[i] = Some(e);
            self.run(i + 1);
            self.y[v] -= w;
            self.total -= w;
        }
        self.last[u.0] = saved;
        self.choice[i] = None;
    }
}

/// Best γ-proportional matching under realization `r`, by enumerating every
/// donor's choice at every step it can be notified. Returns the objective
/// and one optimal matching.
pub fn brute_force_opt(
    s: &Scenario,
    r: &DemandRealization,
    gamma: f64,
    regime: Regime,
) -> Result<(f64, MatchingOutcome)> {
    s.ensure_valid()?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} is outside [0, 1]")));
    }
    let m = normalization_for(s, gamma)?;
    let mut slots = Vec::new();
    let mut size: u64 = 1;
    for u in s.donor_ids() {
        for t in s.steps() {
            if regime == Regime::FixedTime && !s.scheduled(u, t) {
                continue;
            }
            let edges: Vec<EdgeIdx> = s
                .donor_edges(u)
                .iter()
                .copied()
                .filter(|&e| r.is_available(s.edge(e).recipient, t))
                .collect();
            if edges.is_empty() {
                continue;
            }
            if edges.len() + 1 > MAX_SLOT_CHOICES {
                return Err(Error::EnumerationBound(format!(
                    "donor {} has {} choices at t={t}, limit {MAX_SLOT_CHOICES}",
                    s.donor(u).name,
                    edges.len() + 1
                )));
            }
            size = size.saturating_mul(edges.len() as u64 + 1);
            if size > MAX_ENUMERATION {
                return Err(Error::EnumerationBound(format!(
                    "more than {MAX_ENUMERATION} assignments"
                )));
            }
            let best = edges.iter().map(|&e| s.weight(e, t)).fold(0.0, f64::max);
            slots.push(Slot { donor: u, t, edges, best });
        }
    }
    let mut remaining = vec![0.0; slots.len() + 1];
    for i in (0..slots.len()).rev() {
        remaining[i] = remaining[i + 1] + slots[i].best;
    }
    let n = slots.len();
    let mut search = Search {
        s,
        regime,
        gamma,
        m,
        slots,
        remaining,
        y: vec![0.0; s.recipient_count()],
        last: vec![None; s.donor_count()],
        choice: vec![None; n],
        total: 0.0,
        // Below any objective, so the empty matching (always feasible) is
        // recorded at the first leaf.
        best: -1.0,
        best_choice: vec![None; n],
    };
    search.run(0);

    let mut outcome = MatchingOutcome::empty(s);
    let mut picks: Vec<(usize, EdgeIdx)> = search
        .slots
        .iter()
        .zip(&search.best_choice)
        .filter_map(|(slot, c)| c.map(|e| (slot.t, e)))
        .collect();
    picks.sort_by_key(|&(t, e)| (t, e.0));
    for (t, e) in picks {
        outcome.record(s, e, t);
    }
    Ok((search.best.max(0.0), outcome))
}

/// Probability of each edge in `edges` being chosen by `policy` at `(u, t)`,
/// given that the donor is available and `edges` is `E^t_u:`.
fn choice_probabilities(
    s: &Scenario,
    policy: &PreparedPolicy,
    u: DonorIdx,
    t: usize,
    edges: &[EdgeIdx],
) -> Vec<f64> {
    let n = edges.len();
    if n == 0 {
        return Vec::new();
    }
    let spec = policy.spec();
    let (rand, max) = myopic_probabilities(s, edges, t);
    let mix = |g: f64| -> Vec<f64> { rand.iter().zip(&max).map(|(r, m)| g * r + (1.0 - g) * m).collect() };
    let pre = |e: EdgeIdx| policy.distribution().map_or(0.0, |d| d.probability(u, t, e));
    match spec.kind {
        PolicyKind::Rand => rand,
        PolicyKind::Max => max,
        PolicyKind::RandMax => mix(spec.gamma),
        PolicyKind::NAdapLp | PolicyKind::NAdapOpt | PolicyKind::NAdapLpRate => edges.iter().map(|&e| pre(e)).collect(),
        PolicyKind::AdaptMatch => {
            let direct: Vec<f64> = edges.iter().map(|&e| pre(e)).collect();
            let miss = (1.0 - direct.iter().sum::<f64>()).max(0.0);
            direct
                .iter()
                .zip(mix(spec.fallback()))
                .map(|(d, f)| d + miss * f)
                .collect()
        }
    }
}

/// Exact `E[Y_v]` of `policy`.
///
/// With `r = Some(..)` the expectation is over the policy's randomness on
/// that realization; with `None` also over realizations. Donors do not
/// interact, so each donor is handled by its own dynamic program over the
/// step of its last match, branching on the availability of its dynamic
/// neighbours at each step.
pub fn brute_force_policy_expectation(
    s: &Scenario,
    policy: &PreparedPolicy,
    r: Option<&DemandRealization>,
) -> Result<Vec<f64>> {
    s.ensure_valid()?;
    let h = s.horizon();
    let k = s.rate_limit();
    let regime = policy.mode();
    let mut y = vec![0.0; s.recipient_count()];

    for u in s.donor_ids() {
        let neigh: Vec<EdgeIdx> = s.donor_edges(u).to_vec();
        let dynamic: Vec<usize> = neigh
            .iter()
            .enumerate()
            .filter(|(_, &e)| s.recipient(s.edge(e).recipient).kind == RecipientKind::Dynamic)
            .map(|(i, _)| i)
            .collect();
        let branches = if r.is_some() { 1usize } else { 1usize << dynamic.len().min(usize::BITS as usize - 1) };
        if r.is_none() && (dynamic.len() >= 20 || (h + 1) * branches > MAX_DP_STATES) {
            return Err(Error::EnumerationBound(format!(
                "donor {} needs {} states per step, limit {MAX_DP_STATES}",
                s.donor(u).name,
                (h + 1).saturating_mul(branches)
            )));
        }

        // state[0]: never matched; state[t]: last matched at t.
        let mut state = vec![0.0; h + 1];
        state[0] = 1.0;
        for t in 1..=h {
            let mut next = state.clone();
            for last in 0..t {
                let q = state[last];
                if q == 0.0 {
                    continue;
                }
                let available = match regime {
                    Regime::FixedTime => s.scheduled(u, t),
                    Regime::RateLimited => last == 0 || t - last >= k,
                };
                if !available {
                    continue;
                }
                for mask in 0..branches {
                    let mut rho = 1.0;
                    let mut up = vec![true; neigh.len()];
                    match r {
                        Some(r) => {
                            for (i, &e) in neigh.iter().enumerate() {
                                up[i] = r.is_available(s.edge(e).recipient, t);
                            }
                        }
                        None => {
                            for (bit, &i) in dynamic.iter().enumerate() {
                                let p = s.availability(s.edge(neigh[i]).recipient, t);
                                let on = mask >> bit & 1 == 1;
                                up[i] = on;
                                rho *= if on { p } else { 1.0 - p };
                            }
                        }
                    }
                    if rho == 0.0 {
                        continue;
                    }
                    let edges: Vec<EdgeIdx> = neigh.iter().zip(&up).filter(|(_, &a)| a).map(|(&e, _)| e).collect();
                    let pi = choice_probabilities(s, policy, u, t, &edges);
                    for (&e, &p) in edges.iter().zip(&pi) {
                        let mass = q * rho * p;
                        if mass == 0.0 {
                            continue;
                        }
                        y[s.edge(e).recipient.0] += mass * s.weight(e, t);
                        next[last] -= mass;
                        next[t] += mass;
                    }
                }
            }
            state = next;
        }
    }
    Ok(y)
}

/// Any non-empty donor-disjoint edge set whose step-1 weights are
/// γ-proportional (every recipient treated as available), or `None`.
/// Uses the scenario's normalization, or `m_v = 1` when it has none.
pub fn find_proportional_allocation(s: &Scenario, gamma: f64) -> Result<Option<Vec<EdgeIdx>>> {
    s.ensure_valid()?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} is outside [0, 1]")));
    }
    let ones = vec![1.0; s.recipient_count()];
    let m: &[f64] = match s.normalization() {
        Some(m) => {
            if let Some(v) = s.recipient_ids().find(|v| !(m[v.0] > 0.0)) {
                return Err(Error::NonPositiveNormalization {
                    recipient: s.recipient(v).name.clone(),
                    value: m[v.0],
                });
            }
            m
        }
        None => &ones,
    };
    let mut size: u64 = 1;
    for u in s.donor_ids() {
        let choices = s.donor_edges(u).len() + 1;
        if choices > MAX_SLOT_CHOICES {
            return Err(Error::EnumerationBound(format!(
                "donor {} has {choices} choices, limit {MAX_SLOT_CHOICES}",
                s.donor(u).name
            )));
        }
        size = size.saturating_mul(choices as u64);
        if size > MAX_ENUMERATION {
            return Err(Error::EnumerationBound(format!("more than {MAX_ENUMERATION} allocations")));
        }
    }

    fn go(
        s: &Scenario,
        m: &[f64],
        gamma: f64,
        u: usize,
        y: &mut Vec<f64>,
        picked: &mut Vec<EdgeIdx>,
    ) -> Option<Vec<EdgeIdx>> {
        if u == s.donor_count() {
            return (!picked.is_empty() && is_proportional(y, m, gamma)).then(|| picked.clone());
        }
        if let Some(found) = go(s, m, gamma, u + 1, y, picked) {
            return Some(found);
        }
        for &e in s.donor_edges(DonorIdx(u)) {
            let v = s.edge(e).recipient.0;
            let w = s.weight(e, 1);
            y[v] += w;
            picked.push(e);
            let found = go(s, m, gamma, u + 1, y, picked);
            picked.pop();
            y[v] -= w;
            if found.is_some() {
                return found;
            }
        }
        None
    }

    let mut y = vec![0.0; s.recipient_count()];
    Ok(go(s, m, gamma, 0, &mut y, &mut Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{LatLon, StepValues};
    use crate::policy::PolicySpec;

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

    #[test]
    fn opt_on_the_pair() {
        let s = pair(Some(vec![0.45, 0.5]));
        let r = DemandRealization::all_available(&s);
        let (z, out) = brute_force_opt(&s, &r, 0.0, Regime::FixedTime).unwrap();
        assert_eq!(z, 1.0);
        assert_eq!(out.recipient_weight(), &[0.0, 1.0]);
        let (z, out) = brute_force_opt(&s, &r, 1.0, Regime::FixedTime).unwrap();
        assert_eq!(z, 0.0);
        assert_eq!(out.match_count(), 0);
    }

    #[test]
    fn opt_waits_under_rate_limit() {
        let mut b = Scenario::builder(2, 2);
        let u = b.add_donor("u", LatLon::default(), 1);
        let v = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
        b.add_edge(u, v, StepValues::PerStep(vec![0.01, 1.0]));
        let s = b.build();
        let r = DemandRealization::all_available(&s);
        let (z, out) = brute_force_opt(&s, &r, 0.0, Regime::RateLimited).unwrap();
        assert_eq!(z, 1.0);
        assert_eq!(out.matches().collect::<Vec<_>>(), vec![(2, EdgeIdx(0))]);
    }

    #[test]
    fn expectations_on_the_pair() {
        let s = pair(None);
        let r = DemandRealization::all_available(&s);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        let rand = PreparedPolicy::myopic(PolicySpec::rand()).unwrap();
        assert!(close(&brute_force_policy_expectation(&s, &rand, Some(&r)).unwrap(), &[0.45, 0.5]));
        let max = PreparedPolicy::myopic(PolicySpec::max()).unwrap();
        assert!(close(&brute_force_policy_expectation(&s, &max, Some(&r)).unwrap(), &[0.0, 1.0]));
        let rm = PreparedPolicy::myopic(PolicySpec::randmax(0.4)).unwrap();
        let want = [0.4 * 0.5 * 0.9, 0.6 * 1.0 + 0.4 * 0.5 * 1.0];
        assert!(close(&brute_force_policy_expectation(&s, &rm, Some(&r)).unwrap(), &want));
    }

    #[test]
    fn proportional_allocation_examples() {
        // Two unit items, two equal-m recipients: one donor each.
        let mut b = Scenario::builder(1, 1);
        let u0 = b.add_donor("u0", LatLon::default(), 1);
        let u1 = b.add_donor("u1", LatLon::default(), 1);
        let a = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
        let c = b.add_recipient("B", LatLon::default(), RecipientKind::Static);
        for u in [u0, u1] {
            for v in [a, c] {
                b.add_edge(u, v, StepValues::Constant(1.0));
            }
        }
        b.set_normalization(vec![1.0, 1.0]);
        let s = b.build();
        let alloc = find_proportional_allocation(&s, 1.0).unwrap().unwrap();
        assert_eq!(alloc.len(), 2);
        assert_ne!(s.edge(alloc[0]).recipient, s.edge(alloc[1]).recipient);
        assert_ne!(s.edge(alloc[0]).donor, s.edge(alloc[1]).donor);

        let single = pair(Some(vec![1.0, 1.0]));
        assert_eq!(find_proportional_allocation(&single, 1.0).unwrap(), None);

        let mut b = Scenario::builder(1, 1);
        let u = b.add_donor("u", LatLon::default(), 1);
        let v = b.add_recipient("A", LatLon::default(), RecipientKind::Static);
        b.add_edge(u, v, StepValues::Constant(0.3));
        let one = b.build();
        assert_eq!(find_proportional_allocation(&one, 1.0).unwrap(), Some(vec![EdgeIdx(0)]));
    }

    #[test]
    fn bounds_are_errors() {
        let mut b = Scenario::builder(1, 1);
        let u = b.add_donor("u", LatLon::default(), 1);
        for i in 0..6 {
            let v = b.add_recipient(format!("r{i}"), LatLon::default(), RecipientKind::Static);
            b.add_edge(u, v, StepValues::Constant(0.5));
        }
        let s = b.build();
        let r = DemandRealization::all_available(&s);
        assert!(matches!(
            brute_force_opt(&s, &r, 0.0, Regime::FixedTime),
            Err(Error::EnumerationBound(_))
        ));
        assert!(matches!(find_proportional_allocation(&s, 0.5), Err(Error::EnumerationBound(_))));
    }
}
