//! Scenario and solution JSON documents.
//!
//! A scenario file looks like
//!
//! ```json
//! {
//!   "horizon": 3, "rate_limit": 2,
//!   "donors": [{"id": "d0", "lat": 0.0, "lon": 0.0, "first_notify": 1}],
//!   "recipients": [{"id": "r0", "lat": 0.0, "lon": 0.0, "kind": "dynamic"}],
//!   "edges": [{"donor": "d0", "recipient": "r0"}],
//!   "weights": [0.05],
//!   "availability": {"r0": [0.1, 0.9, 0.9]},
//!   "normalization": {"r0": 0.04}
//! }
//! ```
//!
//! `weights` runs parallel to `edges`. Each weight and availability entry is
//! a constant, an array with one value per step, or
//! `{"entries": [{"t": 1, "value": 0.3}, ...]}`. Steps missing from an
//! `entries` list are an error for weights and 0 for availability.
//! Recipients absent from `availability` are never available unless static.
//! `normalization` is optional.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use bloodmatch_core::graph::fixed_schedule;
use bloodmatch_core::{LatLon, LpSolution, RecipientKind, Scenario, StepValues};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub horizon: usize,
    pub rate_limit: usize,
    pub donors: Vec<DonorRecord>,
    pub recipients: Vec<RecipientRecord>,
    pub edges: Vec<EdgeRecord>,
    pub weights: Vec<Series>,
    #[serde(default)]
    pub availability: BTreeMap<String, Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DonorRecord {
    pub id: String,
    #[serde(default)]
    pub lat: f64,
    #[serde(default)]
    pub lon: f64,
    pub first_notify: usize,
    /// Explicit notification days; only needed when they differ from
    /// `first_notify + j·rate_limit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindRecord {
    Static,
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipientRecord {
    pub id: String,
    #[serde(default)]
    pub lat: f64,
    #[serde(default)]
    pub lon: f64,
    pub kind: KindRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub donor: String,
    pub recipient: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Constant(f64),
    PerStep(Vec<f64>),
    Entries { entries: Vec<StepEntry> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepEntry {
    pub t: usize,
    pub value: f64,
}

impl Series {
    fn compact(values: &[f64]) -> Self {
        match values.first() {
            Some(&first) if values.iter().all(|&v| v == first) => Series::Constant(first),
            _ => Series::PerStep(values.to_vec()),
        }
    }

    /// Expands to per-step values. `missing` fills steps absent from an
    /// `entries` list; `None` makes them an error.
    fn expand(&self, horizon: usize, missing: Option<f64>, what: &str) -> Result<StepValues> {
        match self {
            Series::Constant(c) => Ok(StepValues::Constant(*c)),
            Series::PerStep(vs) => {
                if vs.len() != horizon {
                    return Err(Error::Input(format!(
                        "{what}: {} per-step values for horizon {horizon}",
                        vs.len()
                    )));
                }
                Ok(StepValues::PerStep(vs.clone()))
            }
            Series::Entries { entries } => {
                let mut out: Vec<Option<f64>> = vec![None; horizon];
                for e in entries {
                    if e.t == 0 || e.t > horizon {
                        return Err(Error::Input(format!("{what}: step {} outside 1..={horizon}", e.t)));
                    }
                    if out[e.t - 1].replace(e.value).is_some() {
                        return Err(Error::Input(format!("{what}: step {} given twice", e.t)));
                    }
                }
                out.into_iter()
                    .enumerate()
                    .map(|(k, v)| {
                        v.or(missing)
                            .ok_or_else(|| Error::Input(format!("{what}: no value for step {}", k + 1)))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(StepValues::PerStep)
            }
        }
    }
}

fn index_ids<'a>(ids: impl Iterator<Item = &'a str>, what: &str) -> Result<HashMap<&'a str, usize>> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id, i).is_some() {
            return Err(Error::Input(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(map)
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        let h = s.horizon();
        let k = s.rate_limit();
        let donors = s
            .donor_ids()
            .map(|u| {
                let d = s.donor(u);
                let schedule = s.donor_schedule(u);
                let custom = schedule != fixed_schedule(d.first_notify, k, h).as_slice();
                DonorRecord {
                    id: d.name.clone(),
                    lat: d.location.lat,
                    lon: d.location.lon,
                    first_notify: d.first_notify,
                    schedule: custom.then(|| (1..=h).filter(|&t| schedule[t - 1]).collect()),
                }
            })
            .collect();
        let recipients = s
            .recipients()
            .iter()
            .map(|r| RecipientRecord {
                id: r.name.clone(),
                lat: r.location.lat,
                lon: r.location.lon,
                kind: match r.kind {
                    RecipientKind::Static => KindRecord::Static,
                    RecipientKind::Dynamic => KindRecord::Dynamic,
                },
            })
            .collect();
        let edges = s
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                donor: s.donor(e.donor).name.clone(),
                recipient: s.recipient(e.recipient).name.clone(),
            })
            .collect();
        let weights = s.edge_ids().map(|e| Series::compact(s.edge_weights(e))).collect();
        let availability = s
            .recipient_ids()
            .filter(|&v| s.recipient(v).kind == RecipientKind::Dynamic)
            .map(|v| (s.recipient(v).name.clone(), Series::compact(s.recipient_availability(v))))
            .collect();
        let normalization = s.normalization().map(|m| {
            s.recipients()
                .iter()
                .zip(m)
                .map(|(r, &mv)| (r.name.clone(), mv))
                .collect()
        });
        ScenarioFile {
            horizon: h,
            rate_limit: k,
            donors,
            recipients,
            edges,
            weights,
            availability,
            normalization,
        }
    }

    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let h = self.horizon;
        let donor_ix = index_ids(self.donors.iter().map(|d| d.id.as_str()), "donor")?;
        let recipient_ix = index_ids(self.recipients.iter().map(|r| r.id.as_str()), "recipient")?;
        if self.weights.len() != self.edges.len() {
            return Err(Error::Input(format!(
                "{} weight entries for {} edges",
                self.weights.len(),
                self.edges.len()
            )));
        }

        let mut b = Scenario::builder(h, self.rate_limit);
        for d in &self.donors {
            let u = b.add_donor(d.id.clone(), LatLon::new(d.lat, d.lon), d.first_notify);
            if let Some(days) = &d.schedule {
                let mut schedule = vec![false; h];
                for &t in days {
                    if t == 0 || t > h {
                        return Err(Error::Input(format!("donor {:?}: schedule day {t} outside 1..={h}", d.id)));
                    }
                    schedule[t - 1] = true;
                }
                b.set_schedule(u, schedule);
            }
        }
        for r in &self.recipients {
            let kind = match r.kind {
                KindRecord::Static => RecipientKind::Static,
                KindRecord::Dynamic => RecipientKind::Dynamic,
            };
            b.add_recipient(r.id.clone(), LatLon::new(r.lat, r.lon), kind);
        }
        for (id, series) in &self.availability {
            let &v = recipient_ix
                .get(id.as_str())
                .ok_or_else(|| Error::Input(format!("availability for unknown recipient {id:?}")))?;
            if self.recipients[v].kind == KindRecord::Static {
                return Err(Error::Input(format!("availability given for static recipient {id:?}")));
            }
            let p = series.expand(h, Some(0.0), &format!("availability of {id:?}"))?;
            b.set_availability(bloodmatch_core::RecipientIdx(v), p);
        }
        for (i, (e, w)) in self.edges.iter().zip(&self.weights).enumerate() {
            let &u = donor_ix
                .get(e.donor.as_str())
                .ok_or_else(|| Error::Input(format!("edge #{i} names unknown donor {:?}", e.donor)))?;
            let &v = recipient_ix
                .get(e.recipient.as_str())
                .ok_or_else(|| Error::Input(format!("edge #{i} names unknown recipient {:?}", e.recipient)))?;
            let what = format!("weights of edge {}→{}", e.donor, e.recipient);
            b.add_edge(
                bloodmatch_core::DonorIdx(u),
                bloodmatch_core::RecipientIdx(v),
                w.expand(h, None, &what)?,
            );
        }
        if let Some(m) = &self.normalization {
            let mut values = vec![None; self.recipients.len()];
            for (id, &mv) in m {
                let &v = recipient_ix
                    .get(id.as_str())
                    .ok_or_else(|| Error::Input(format!("normalization for unknown recipient {id:?}")))?;
                values[v] = Some(mv);
            }
            let values = values
                .into_iter()
                .zip(&self.recipients)
                .map(|(mv, r)| mv.ok_or_else(|| Error::Input(format!("no normalization score for {:?}", r.id))))
                .collect::<Result<Vec<_>>>()?;
            b.set_normalization(values);
        }
        let s = b.build();
        s.ensure_valid()?;
        Ok(s)
    }
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.into(),
        source,
    })?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::Json {
            path: path.into(),
            source,
        },
        Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: "<scenario>".into(),
        source,
    })?;
    file.to_scenario()
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let mut text = serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("scenario serializes");
    text.push('\n');
    text
}

pub fn write_scenario(path: &Path, s: &Scenario) -> Result<()> {
    write_text(path, &scenario_to_json(s))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.into(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Write {
        path: path.into(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub kind: String,
    pub gamma: f64,
    pub objective: f64,
    pub x: Vec<SolutionEntry>,
    /// `s_v` per recipient; `null` where undefined.
    pub s: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub donor: String,
    pub recipient: String,
    pub t: usize,
    pub value: f64,
}

impl SolutionFile {
    pub fn new(s: &Scenario, sol: &LpSolution) -> Self {
        SolutionFile {
            kind: sol.kind.as_str().to_string(),
            gamma: sol.gamma,
            objective: sol.objective,
            x: sol
                .nonzero()
                .map(|(e, t, value)| {
                    let edge = s.edge(e);
                    SolutionEntry {
                        donor: s.donor(edge.donor).name.clone(),
                        recipient: s.recipient(edge.recipient).name.clone(),
                        t,
                        value,
                    }
                })
                .collect(),
            s: s.recipients().iter().zip(&sol.s).map(|(r, &v)| (r.name.clone(), v)).collect(),
            excluded: sol.excluded.iter().map(|&v| s.recipient(v).name.clone()).collect(),
        }
    }
}

pub fn solution_to_json(s: &Scenario, sol: &LpSolution) -> String {
    let mut text = serde_json::to_string_pretty(&SolutionFile::new(s, sol)).expect("solution serializes");
    text.push('\n');
    text
}
