//! Generator configuration files and bundled cities.
//!
//! A config is JSON. Every field but the counts and the population has the
//! generator's default:
//!
//! ```json
//! {
//!   "donor_count": 60, "recipient_count": 20,
//!   "population": {"uniform_disc": {"center": {"lat": 0, "lon": 0}, "radius_km": 10}},
//!   "edge_radius_km": 15, "w0_range": [0.01, 0.08], "decay_set": [5, 10, 20],
//!   "static_fraction": 0.5,
//!   "availability": {"low": 0.1, "high": 0.9, "mean_run_length": 4},
//!   "horizon": 30, "rate_limit": 7, "seed": 1
//! }
//! ```
//!
//! The population is one of `uniform_disc`, `grid` (a CSV file with header
//! `lat,lon,weight`, resolved relative to the config file) or `clusters` (a
//! Gaussian mixture rasterized onto a grid).

use std::path::{Path, PathBuf};

use bloodmatch_core::synth::{cluster_grid, AvailabilityConfig, Cluster, GeneratorConfig, Population, PopulationCell};
use bloodmatch_core::LatLon;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub name: Option<String>,
    pub donor_count: usize,
    pub recipient_count: usize,
    pub population: PopulationSpec,
    pub edge_radius_km: Option<f64>,
    pub w0_range: Option<(f64, f64)>,
    pub decay_set: Option<Vec<f64>>,
    pub static_fraction: Option<f64>,
    pub availability: Option<AvailabilitySpec>,
    pub horizon: Option<usize>,
    pub rate_limit: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvailabilitySpec {
    pub low: f64,
    pub high: f64,
    pub mean_run_length: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub lat: f64,
    pub lon: f64,
}

impl From<Point> for LatLon {
    fn from(p: Point) -> Self {
        LatLon::new(p.lat, p.lon)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationSpec {
    UniformDisc {
        center: Point,
        radius_km: f64,
    },
    Grid {
        path: PathBuf,
        #[serde(default)]
        cell_size_deg: f64,
    },
    Clusters {
        center: Point,
        half_extent_km: f64,
        cell_size_deg: f64,
        clusters: Vec<ClusterSpec>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub lat: f64,
    pub lon: f64,
    pub sigma_km: f64,
    pub weight: f64,
}

/// Reads a population grid CSV with header `lat,lon,weight`.
pub fn read_grid_csv(path: &Path) -> Result<Vec<PopulationCell>> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["lat", "lon", "weight"] {
        return Err(Error::Input(format!(
            "{}: expected header lat,lon,weight, found {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut cells = Vec::new();
    for row in rdr.deserialize::<(f64, f64, f64)>() {
        let (lat, lon, weight) = row.map_err(csv_err)?;
        cells.push(PopulationCell { lat, lon, weight });
    }
    if cells.is_empty() {
        return Err(Error::Input(format!("{}: population grid has no rows", path.display())));
    }
    Ok(cells)
}

impl ConfigFile {
    /// Converts to a generator config; `base` resolves relative grid paths.
    pub fn to_generator(&self, base: Option<&Path>) -> Result<GeneratorConfig> {
        let population = match &self.population {
            PopulationSpec::UniformDisc { center, radius_km } => Population::UniformDisc {
                center: (*center).into(),
                radius_km: *radius_km,
            },
            PopulationSpec::Grid { path, cell_size_deg } => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                Population::Grid {
                    cells: read_grid_csv(&full)?,
                    cell_size_deg: *cell_size_deg,
                }
            }
            PopulationSpec::Clusters {
                center,
                half_extent_km,
                cell_size_deg,
                clusters,
            } => {
                let clusters: Vec<Cluster> = clusters
                    .iter()
                    .map(|c| Cluster {
                        center: LatLon::new(c.lat, c.lon),
                        sigma_km: c.sigma_km,
                        weight: c.weight,
                    })
                    .collect();
                if !(*cell_size_deg > 0.0) || !(*half_extent_km > 0.0) || clusters.is_empty() {
                    return Err(Error::Input(
                        "clusters population needs cell_size_deg > 0, half_extent_km > 0 and at least one cluster"
                            .into(),
                    ));
                }
                if clusters.iter().any(|c| !(c.sigma_km > 0.0) || !(c.weight >= 0.0)) {
                    return Err(Error::Input("every cluster needs sigma_km > 0 and weight ≥ 0".into()));
                }
                Population::Grid {
                    cells: cluster_grid((*center).into(), *half_extent_km, *cell_size_deg, &clusters),
                    cell_size_deg: *cell_size_deg,
                }
            }
        };
        let mut cfg = GeneratorConfig::new(self.donor_count, self.recipient_count, population);
        if let Some(v) = self.edge_radius_km {
            cfg.edge_radius_km = v;
        }
        if let Some(v) = self.w0_range {
            cfg.w0_range = v;
        }
        if let Some(v) = &self.decay_set {
            cfg.decay_set = v.clone();
        }
        if let Some(v) = self.static_fraction {
            cfg.static_fraction = v;
        }
        if let Some(a) = &self.availability {
            cfg.availability = AvailabilityConfig {
                low: a.low,
                high: a.high,
                mean_run_length: a.mean_run_length,
            };
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.rate_limit {
            cfg.rate_limit = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_config(text: &str, base: Option<&Path>) -> Result<GeneratorConfig> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: "<config>".into(),
        source,
    })?;
    file.to_generator(base)
}

pub fn read_config(path: &Path) -> Result<GeneratorConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.into(),
        source,
    })?;
    let file: ConfigFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    file.to_generator(path.parent())
        .map_err(|e| match e {
            Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
}

/// Bundled configs: `(name, JSON)`. The four metro configs are synthetic
/// multi-cluster populations loosely shaped after large cities; they are not
/// census data.
pub const BUNDLED: &[(&str, &str)] = &[
    ("city_small", include_str!("../cities/city_small.json")),
    ("jakarta", include_str!("../cities/jakarta.json")),
    ("istanbul", include_str!("../cities/istanbul.json")),
    ("sao_paulo", include_str!("../cities/sao_paulo.json")),
    ("san_francisco", include_str!("../cities/san_francisco.json")),
];

/// Names of the four metro configs used for the synthetic-city experiments.
pub const METRO_CITIES: [&str; 4] = ["jakarta", "istanbul", "sao_paulo", "san_francisco"];

pub fn bundled(name: &str) -> Option<GeneratorConfig> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_config(text, None).expect("bundled configs are valid"))
}

/// A bundled name or a path to a config file.
pub fn load_config(name_or_path: &str) -> Result<GeneratorConfig> {
    let path = Path::new(name_or_path);
    if !path.exists() {
        if let Some(cfg) = bundled(name_or_path) {
            return Ok(cfg);
        }
    }
    read_config(path)
}
