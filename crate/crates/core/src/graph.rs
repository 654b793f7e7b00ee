//! Scenario model: the weighted bipartite donation graph over a time horizon.
//!
//! Identifiers supplied by callers are opaque strings; everything inside the
//! crate is addressed by dense indices ([`DonorIdx`], [`RecipientIdx`],
//! [`EdgeIdx`]). Time steps are 1-based, `t ∈ 1..=horizon`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

macro_rules! index_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }
    };
}

index_type!(
    /// Dense donor index.
    DonorIdx
);
index_type!(
    /// Dense recipient index.
    RecipientIdx
);
index_type!(
    /// Dense edge index.
    EdgeIdx
);

/// Location in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecipientKind {
    /// Always available.
    Static,
    /// Available at step `t` with probability `p_vt`.
    Dynamic,
}

/// How donor availability is decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Regime {
    /// Donors may only be notified on their scheduled days.
    #[default]
    FixedTime,
    /// Donors may be notified whenever they were not notified in the previous
    /// `rate_limit - 1` steps.
    RateLimited,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::FixedTime => "fixed",
            Regime::RateLimited => "rate",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Donor {
    pub name: String,
    pub location: LatLon,
    /// First scheduled notification day (1-based).
    pub first_notify: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recipient {
    pub name: String,
    pub location: LatLon,
    pub kind: RecipientKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub donor: DonorIdx,
    pub recipient: RecipientIdx,
}

/// A per-step series given either as one constant or as one value per step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepValues {
    Constant(f64),
    PerStep(Vec<f64>),
}

/// What a [`Violation`] refers to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entity {
    Scenario,
    Donor(DonorIdx),
    Recipient(RecipientIdx),
    Edge(EdgeIdx),
}

/// One broken scenario or outcome invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub entity: Entity,
    pub message: String,
}

impl Violation {
    pub fn new(entity: Entity, message: impl Into<String>) -> Self {
        Self {
            entity,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Full matching instance. Immutable once built; build with
/// [`ScenarioBuilder`].
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    donors: Vec<Donor>,
    recipients: Vec<Recipient>,
    edges: Vec<Edge>,
    /// `edges.len() * horizon`, edge-major.
    weights: Vec<f64>,
    /// `recipients.len() * horizon`, recipient-major.
    availability: Vec<f64>,
    /// `donors.len() * horizon`, donor-major.
    schedule: Vec<bool>,
    horizon: usize,
    rate_limit: usize,
    normalization: Option<Vec<f64>>,
    donor_edges: Vec<Vec<EdgeIdx>>,
    recipient_edges: Vec<Vec<EdgeIdx>>,
    /// Structural problems found while building (bad lengths, dangling
    /// references); reported by [`Scenario::validate`].
    defects: Vec<Violation>,
}

impl Scenario {
    pub fn builder(horizon: usize, rate_limit: usize) -> ScenarioBuilder {
        ScenarioBuilder::new(horizon, rate_limit)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rate_limit(&self) -> usize {
        self.rate_limit
    }

    pub fn steps(&self) -> core::ops::RangeInclusive<usize> {
        1..=self.horizon
    }

    pub fn donors(&self) -> &[Donor] {
        &self.donors
    }

    pub fn recipients(&self) -> &[Recipient] {
        &self.recipients
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn donor_count(&self) -> usize {
        self.donors.len()
    }

    pub fn recipient_count(&self) -> usize {
        self.recipients.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeIdx) -> Edge {
        self.edges[e.0]
    }

    pub fn donor(&self, u: DonorIdx) -> &Donor {
        &self.donors[u.0]
    }

    pub fn recipient(&self, v: RecipientIdx) -> &Recipient {
        &self.recipients[v.0]
    }

    #[inline]
    fn slot(&self, t: usize) -> usize {
        debug_assert!(t >= 1 && t <= self.horizon, "step {t} out of range");
        t - 1
    }

    /// `w_et`.
    #[inline]
    pub fn weight(&self, e: EdgeIdx, t: usize) -> f64 {
        self.weights[e.0 * self.horizon + self.slot(t)]
    }

    pub fn edge_weights(&self, e: EdgeIdx) -> &[f64] {
        &self.weights[e.0 * self.horizon..(e.0 + 1) * self.horizon]
    }

    /// `p_vt`.
    #[inline]
    pub fn availability(&self, v: RecipientIdx, t: usize) -> f64 {
        self.availability[v.0 * self.horizon + self.slot(t)]
    }

    pub fn recipient_availability(&self, v: RecipientIdx) -> &[f64] {
        &self.availability[v.0 * self.horizon..(v.0 + 1) * self.horizon]
    }

    /// `a_ut` of the fixed-time regime.
    #[inline]
    pub fn scheduled(&self, u: DonorIdx, t: usize) -> bool {
        self.schedule[u.0 * self.horizon + self.slot(t)]
    }

    pub fn donor_schedule(&self, u: DonorIdx) -> &[bool] {
        &self.schedule[u.0 * self.horizon..(u.0 + 1) * self.horizon]
    }

    /// `E_u:`.
    pub fn donor_edges(&self, u: DonorIdx) -> &[EdgeIdx] {
        &self.donor_edges[u.0]
    }

    /// `E_:v`.
    pub fn recipient_edges(&self, v: RecipientIdx) -> &[EdgeIdx] {
        &self.recipient_edges[v.0]
    }

    /// `m_v`, if known.
    pub fn normalization(&self) -> Option<&[f64]> {
        self.normalization.as_deref()
    }

    /// Copy of the scenario with normalization scores replaced.
    pub fn with_normalization(&self, m: Vec<f64>) -> Scenario {
        let mut s = self.clone();
        s.normalization = Some(m);
        s
    }

    pub fn donor_ids(&self) -> impl Iterator<Item = DonorIdx> {
        (0..self.donors.len()).map(DonorIdx)
    }

    pub fn recipient_ids(&self) -> impl Iterator<Item = RecipientIdx> {
        (0..self.recipients.len()).map(RecipientIdx)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeIdx> {
        (0..self.edges.len()).map(EdgeIdx)
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::StepOutOfRange {
                step: t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    pub fn edge_label(&self, e: EdgeIdx) -> String {
        let edge = self.edges[e.0];
        let donor = self
            .donors
            .get(edge.donor.0)
            .map_or("?", |d| d.name.as_str());
        let recipient = self
            .recipients
            .get(edge.recipient.0)
            .map_or("?", |r| r.name.as_str());
        format!("edge {donor}->{recipient}")
    }

    /// Checks every scenario invariant; an empty list means the scenario is
    /// valid.
    pub fn validate(&self) -> Vec<Violation> {
        validate_scenario(self)
    }

    /// Errors with the violation list unless the scenario is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(v))
        }
    }
}

/// Collects every broken [`Scenario`] invariant.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = s.defects.clone();
    if s.horizon == 0 {
        out.push(Violation::new(Entity::Scenario, "horizon must be at least 1"));
    }
    if s.rate_limit == 0 {
        out.push(Violation::new(Entity::Scenario, "rate limit must be at least 1"));
    }

    let mut seen = alloc::collections::BTreeSet::new();
    for (i, edge) in s.edges.iter().enumerate() {
        let e = EdgeIdx(i);
        let mut dangling = false;
        if edge.donor.0 >= s.donors.len() {
            out.push(Violation::new(
                Entity::Edge(e),
                format!("edge #{i} references unknown donor index {}", edge.donor.0),
            ));
            dangling = true;
        }
        if edge.recipient.0 >= s.recipients.len() {
            out.push(Violation::new(
                Entity::Edge(e),
                format!(
                    "edge #{i} references unknown recipient index {}",
                    edge.recipient.0
                ),
            ));
            dangling = true;
        }
        if !dangling && !seen.insert((edge.donor, edge.recipient)) {
            out.push(Violation::new(
                Entity::Edge(e),
                format!("{} is a duplicate", s.edge_label(e)),
            ));
        }
        for (k, &w) in s.edge_weights(e).iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                out.push(Violation::new(
                    Entity::Edge(e),
                    format!("{} has weight {w} at t={} outside [0,1]", s.edge_label(e), k + 1),
                ));
            }
        }
    }

    for v in s.recipient_ids() {
        let r = &s.recipients[v.0];
        for (k, &p) in s.recipient_availability(v).iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::new(
                    Entity::Recipient(v),
                    format!(
                        "recipient {} has availability {p} at t={} outside [0,1]",
                        r.name,
                        k + 1
                    ),
                ));
            } else if r.kind == RecipientKind::Static && p != 1.0 {
                out.push(Violation::new(
                    Entity::Recipient(v),
                    format!(
                        "static recipient {} has availability {p} at t={}",
                        r.name,
                        k + 1
                    ),
                ));
            }
        }
    }

    for u in s.donor_ids() {
        let d = &s.donors[u.0];
        if d.first_notify == 0 {
            out.push(Violation::new(
                Entity::Donor(u),
                format!("donor {} has first-notify day 0 (days are 1-based)", d.name),
            ));
        }
        let days: Vec<usize> = s
            .donor_schedule(u)
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(k, _)| k + 1)
            .collect();
        if let Some(pair) = days.windows(2).find(|w| w[1] - w[0] != s.rate_limit) {
            out.push(Violation::new(
                Entity::Donor(u),
                format!(
                    "donor {} is scheduled on days {} and {}, not exactly {} apart",
                    d.name, pair[0], pair[1], s.rate_limit
                ),
            ));
        }
    }

    if let Some(m) = &s.normalization {
        if m.len() != s.recipients.len() {
            out.push(Violation::new(
                Entity::Scenario,
                format!(
                    "{} normalization scores for {} recipients",
                    m.len(),
                    s.recipients.len()
                ),
            ));
        } else {
            for (v, &mv) in m.iter().enumerate() {
                if !(mv >= 0.0 && mv.is_finite()) {
                    out.push(Violation::new(
                        Entity::Recipient(RecipientIdx(v)),
                        format!(
                            "recipient {} has normalization score {mv}",
                            s.recipients[v].name
                        ),
                    ));
                }
            }
        }
    }
    out
}

/// Incremental construction of a [`Scenario`]. `build` never fails; broken
/// invariants surface through [`Scenario::validate`].
#[derive(Clone, Debug)]
pub struct ScenarioBuilder {
    horizon: usize,
    rate_limit: usize,
    donors: Vec<Donor>,
    recipients: Vec<Recipient>,
    edges: Vec<(Edge, StepValues)>,
    availability: Vec<Option<StepValues>>,
    schedules: Vec<Option<Vec<bool>>>,
    normalization: Option<Vec<f64>>,
    defects: Vec<Violation>,
}

impl ScenarioBuilder {
    pub fn new(horizon: usize, rate_limit: usize) -> Self {
        Self {
            horizon,
            rate_limit,
            donors: Vec::new(),
            recipients: Vec::new(),
            edges: Vec::new(),
            availability: Vec::new(),
            schedules: Vec::new(),
            normalization: None,
            defects: Vec::new(),
        }
    }

    pub fn add_donor(
        &mut self,
        name: impl Into<String>,
        location: LatLon,
        first_notify: usize,
    ) -> DonorIdx {
        self.donors.push(Donor {
            name: name.into(),
            location,
            first_notify,
        });
        self.schedules.push(None);
        DonorIdx(self.donors.len() - 1)
    }

    pub fn add_recipient(
        &mut self,
        name: impl Into<String>,
        location: LatLon,
        kind: RecipientKind,
    ) -> RecipientIdx {
        self.recipients.push(Recipient {
            name: name.into(),
            location,
            kind,
        });
        self.availability.push(None);
        RecipientIdx(self.recipients.len() - 1)
    }

    pub fn add_edge(&mut self, donor: DonorIdx, recipient: RecipientIdx, weights: StepValues) -> EdgeIdx {
        self.edges.push((Edge { donor, recipient }, weights));
        EdgeIdx(self.edges.len() - 1)
    }

    /// `p_vt` for a recipient. Unset dynamic recipients are never available.
    pub fn set_availability(&mut self, v: RecipientIdx, p: StepValues) -> &mut Self {
        if let Some(slot) = self.availability.get_mut(v.0) {
            *slot = Some(p);
        } else {
            self.defects.push(Violation::new(
                Entity::Scenario,
                format!("availability given for unknown recipient index {}", v.0),
            ));
        }
        self
    }

    /// Overrides the schedule derived from the donor's first-notify day.
    pub fn set_schedule(&mut self, u: DonorIdx, schedule: Vec<bool>) -> &mut Self {
        if let Some(slot) = self.schedules.get_mut(u.0) {
            *slot = Some(schedule);
        } else {
            self.defects.push(Violation::new(
                Entity::Scenario,
                format!("schedule given for unknown donor index {}", u.0),
            ));
        }
        self
    }

    pub fn set_normalization(&mut self, m: Vec<f64>) -> &mut Self {
        self.normalization = Some(m);
        self
    }

    /// Records a problem detected by a loader (for example an unknown id).
    pub fn add_defect(&mut self, v: Violation) -> &mut Self {
        self.defects.push(v);
        self
    }

    pub fn donor_count(&self) -> usize {
        self.donors.len()
    }

    pub fn recipient_count(&self) -> usize {
        self.recipients.len()
    }

    fn expand(
        values: &StepValues,
        horizon: usize,
        what: impl FnOnce() -> (Entity, String),
        defects: &mut Vec<Violation>,
    ) -> Vec<f64> {
        match values {
            StepValues::Constant(c) => vec![*c; horizon],
            StepValues::PerStep(vs) if vs.len() == horizon => vs.clone(),
            StepValues::PerStep(vs) => {
                let (entity, label) = what();
                defects.push(Violation::new(
                    entity,
                    format!("{label} has {} per-step values, horizon is {horizon}", vs.len()),
                ));
                let mut out = vs.clone();
                out.resize(horizon, f64::NAN);
                out
            }
        }
    }

    pub fn build(self) -> Scenario {
        let horizon = self.horizon;
        let k = self.rate_limit.max(1);
        let mut defects = self.defects;

        let mut weights = Vec::with_capacity(self.edges.len() * horizon);
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, (edge, w)) in self.edges.iter().enumerate() {
            let row = Self::expand(
                w,
                horizon,
                || (Entity::Edge(EdgeIdx(i)), format!("edge #{i}")),
                &mut defects,
            );
            weights.extend(row);
            edges.push(*edge);
        }

        let mut availability = Vec::with_capacity(self.recipients.len() * horizon);
        for (v, (r, p)) in self.recipients.iter().zip(&self.availability).enumerate() {
            let row = match (p, r.kind) {
                (Some(p), _) => Self::expand(
                    p,
                    horizon,
                    || (Entity::Recipient(RecipientIdx(v)), format!("recipient {}", r.name)),
                    &mut defects,
                ),
                (None, RecipientKind::Static) => vec![1.0; horizon],
                (None, RecipientKind::Dynamic) => vec![0.0; horizon],
            };
            availability.extend(row);
        }

        let mut schedule = Vec::with_capacity(self.donors.len() * horizon);
        for (u, (d, explicit)) in self.donors.iter().zip(&self.schedules).enumerate() {
            match explicit {
                Some(a) => {
                    if a.len() != horizon {
                        defects.push(Violation::new(
                            Entity::Donor(DonorIdx(u)),
                            format!(
                                "donor {} has a schedule of length {}, horizon is {horizon}",
                                d.name,
                                a.len()
                            ),
                        ));
                    }
                    let mut a = a.clone();
                    a.resize(horizon, false);
                    schedule.extend(a);
                }
                None => schedule.extend(fixed_schedule(d.first_notify, k, horizon)),
            }
        }

        let mut donor_edges = vec![Vec::new(); self.donors.len()];
        let mut recipient_edges = vec![Vec::new(); self.recipients.len()];
        for (i, edge) in edges.iter().enumerate() {
            if edge.donor.0 < donor_edges.len() && edge.recipient.0 < recipient_edges.len() {
                donor_edges[edge.donor.0].push(EdgeIdx(i));
                recipient_edges[edge.recipient.0].push(EdgeIdx(i));
            }
        }

        Scenario {
            donors: self.donors,
            recipients: self.recipients,
            edges,
            weights,
            availability,
            schedule,
            horizon,
            rate_limit: self.rate_limit,
            normalization: self.normalization,
            donor_edges,
            recipient_edges,
            defects,
        }
    }
}

/// Days `first, first + k, first + 2k, ...` within `1..=horizon`.
pub fn fixed_schedule(first_notify: usize, k: usize, horizon: usize) -> Vec<bool> {
    let mut a = vec![false; horizon];
    if first_notify >= 1 {
        let mut t = first_notify;
        while t <= horizon {
            a[t - 1] = true;
            t += k.max(1);
        }
    }
    a
}

/// `D`, the largest number of edges incident to one donor (0 without edges).
pub fn donor_max_degree(s: &Scenario) -> usize {
    s.donor_edges.iter().map(Vec::len).max().unwrap_or(0)
}

/// One draw of recipient availability, `p̂_vt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandRealization {
    horizon: usize,
    available: Vec<bool>,
}

impl DemandRealization {
    /// Builds a realization from a recipient-major matrix; static recipients
    /// are forced to available.
    pub fn new(s: &Scenario, mut available: Vec<bool>) -> Result<Self> {
        let want = s.recipient_count() * s.horizon();
        if available.len() != want {
            return Err(Error::InvalidParameter(format!(
                "realization has {} entries, expected {want}",
                available.len()
            )));
        }
        for v in s.recipient_ids() {
            if s.recipient(v).kind == RecipientKind::Static {
                for k in 0..s.horizon() {
                    available[v.0 * s.horizon() + k] = true;
                }
            }
        }
        Ok(Self {
            horizon: s.horizon(),
            available,
        })
    }

    pub fn all_available(s: &Scenario) -> Self {
        Self {
            horizon: s.horizon(),
            available: vec![true; s.recipient_count() * s.horizon()],
        }
    }

    pub fn from_fn(s: &Scenario, mut f: impl FnMut(RecipientIdx, usize) -> bool) -> Self {
        let mut available = Vec::with_capacity(s.recipient_count() * s.horizon());
        for v in s.recipient_ids() {
            let is_static = s.recipient(v).kind == RecipientKind::Static;
            for t in s.steps() {
                available.push(is_static || f(v, t));
            }
        }
        Self {
            horizon: s.horizon(),
            available,
        }
    }

    #[inline]
    pub fn is_available(&self, v: RecipientIdx, t: usize) -> bool {
        self.available[v.0 * self.horizon + (t - 1)]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.available
    }
}

/// `E^t_u:`, the donor's edges whose recipient is available at `t`; empty
/// when the donor itself is unavailable.
pub fn available_edges(
    s: &Scenario,
    u: DonorIdx,
    t: usize,
    r: &DemandRealization,
    donor_available: bool,
) -> Result<Vec<EdgeIdx>> {
    let mut out = Vec::new();
    available_edges_into(s, u, t, r, donor_available, &mut out)?;
    Ok(out)
}

/// Buffer-reusing form of [`available_edges`].
pub fn available_edges_into(
    s: &Scenario,
    u: DonorIdx,
    t: usize,
    r: &DemandRealization,
    donor_available: bool,
    out: &mut Vec<EdgeIdx>,
) -> Result<()> {
    s.check_step(t)?;
    out.clear();
    if donor_available {
        out.extend(
            s.donor_edges(u)
                .iter()
                .copied()
                .filter(|&e| r.is_available(s.edge(e).recipient, t)),
        );
    }
    Ok(())
}

/// Edges matched at each step plus per-recipient matched weight.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingOutcome {
    matched: Vec<Vec<EdgeIdx>>,
    recipient_weight: Vec<f64>,
    total_weight: f64,
}

impl MatchingOutcome {
    pub fn empty(s: &Scenario) -> Self {
        Self {
            matched: vec![Vec::new(); s.horizon()],
            recipient_weight: vec![0.0; s.recipient_count()],
            total_weight: 0.0,
        }
    }

    /// Records `x_et = 1` and accumulates `Y_v`.
    pub fn record(&mut self, s: &Scenario, e: EdgeIdx, t: usize) {
        let w = s.weight(e, t);
        self.matched[t - 1].push(e);
        self.recipient_weight[s.edge(e).recipient.0] += w;
        self.total_weight += w;
    }

    pub fn matched_at(&self, t: usize) -> &[EdgeIdx] {
        &self.matched[t - 1]
    }

    /// All `(t, e)` pairs with `x_et = 1`, in step order.
    pub fn matches(&self) -> impl Iterator<Item = (usize, EdgeIdx)> + '_ {
        self.matched
            .iter()
            .enumerate()
            .flat_map(|(k, es)| es.iter().map(move |&e| (k + 1, e)))
    }

    pub fn match_count(&self) -> usize {
        self.matched.iter().map(Vec::len).sum()
    }

    /// `Y_v`.
    pub fn recipient_weight(&self) -> &[f64] {
        &self.recipient_weight
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Raw constructor for tests and loaders; no consistency is enforced.
    pub fn from_parts(matched: Vec<Vec<EdgeIdx>>, recipient_weight: Vec<f64>, total_weight: f64) -> Self {
        Self {
            matched,
            recipient_weight,
            total_weight,
        }
    }

    pub fn into_parts(self) -> (Vec<Vec<EdgeIdx>>, Vec<f64>, f64) {
        (self.matched, self.recipient_weight, self.total_weight)
    }
}

/// Checks a matching outcome against the scenario, the realization and the
/// donor-availability rule of `regime`.
pub fn validate_outcome(
    s: &Scenario,
    r: &DemandRealization,
    outcome: &MatchingOutcome,
    regime: Regime,
) -> Vec<Violation> {
    const TOL: f64 = 1e-9;
    let mut out = Vec::new();
    if outcome.matched.len() != s.horizon() {
        out.push(Violation::new(
            Entity::Scenario,
            format!(
                "outcome covers {} steps, horizon is {}",
                outcome.matched.len(),
                s.horizon()
            ),
        ));
        return out;
    }
    if outcome.recipient_weight.len() != s.recipient_count() {
        out.push(Violation::new(
            Entity::Scenario,
            format!(
                "outcome has {} recipient weights for {} recipients",
                outcome.recipient_weight.len(),
                s.recipient_count()
            ),
        ));
        return out;
    }

    let mut last_match: Vec<Option<usize>> = vec![None; s.donor_count()];
    let mut expected = vec![0.0; s.recipient_count()];
    for t in s.steps() {
        let mut used = alloc::collections::BTreeSet::new();
        for &e in &outcome.matched[t - 1] {
            if e.0 >= s.edge_count() {
                out.push(Violation::new(
                    Entity::Scenario,
                    format!("unknown edge index {} matched at t={t}", e.0),
                ));
                continue;
            }
            let edge = s.edge(e);
            if !used.insert(edge.donor) {
                out.push(Violation::new(
                    Entity::Donor(edge.donor),
                    format!(
                        "donor {} matched more than once at t={t}",
                        s.donor(edge.donor).name
                    ),
                ));
            }
            if !r.is_available(edge.recipient, t) {
                out.push(Violation::new(
                    Entity::Edge(e),
                    format!("{} matched at t={t} but the recipient is unavailable", s.edge_label(e)),
                ));
            }
            match regime {
                Regime::FixedTime => {
                    if !s.scheduled(edge.donor, t) {
                        out.push(Violation::new(
                            Entity::Edge(e),
                            format!(
                                "{} matched at t={t}, an unscheduled day for the donor",
                                s.edge_label(e)
                            ),
                        ));
                    }
                }
                Regime::RateLimited => {
                    if let Some(prev) = last_match[edge.donor.0] {
                        if prev != t && t - prev < s.rate_limit() {
                            out.push(Violation::new(
                                Entity::Edge(e),
                                format!(
                                    "{} matched at t={t}, only {} steps after t={prev}",
                                    s.edge_label(e),
                                    t - prev
                                ),
                            ));
                        }
                    }
                    last_match[edge.donor.0] = Some(t);
                }
            }
            expected[edge.recipient.0] += s.weight(e, t);
        }
    }

    let mut total = 0.0;
    for v in s.recipient_ids() {
        let got = outcome.recipient_weight[v.0];
        total += got;
        if (got - expected[v.0]).abs() > TOL * (1.0 + expected[v.0].abs()) {
            out.push(Violation::new(
                Entity::Recipient(v),
                format!(
                    "recipient {} has Y_v = {got}, matched edges sum to {}",
                    s.recipient(v).name,
                    expected[v.0]
                ),
            ));
        }
    }
    if (outcome.total_weight - total).abs() > TOL * (1.0 + total.abs()) {
        out.push(Violation::new(
            Entity::Scenario,
            format!(
                "total weight {} differs from the sum of recipient weights {total}",
                outcome.total_weight
            ),
        ));
    }
    out
}
