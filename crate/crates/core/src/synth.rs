//! Synthetic city generation.
//!
//! Donors and recipients are scattered over a population density, joined
//! when within `edge_radius_km`, and weighted `w0_v · exp(−d / k_u)` with a
//! nominal weight `w0_v` per recipient and a decay length `k_u` per donor.
//! Half of the recipients (by default) are static; the rest follow
//! alternating low/high availability runs of Poisson length.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::{LatLon, RecipientKind, Scenario, StepValues};
use crate::rng::{below, unit, Domain, Seeds};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance on a sphere of radius 6371 km.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let s1 = libm::sin(dp / 2.0);
    let s2 = libm::sin(dl / 2.0);
    let h = s1 * s1 + libm::cos(p1) * libm::cos(p2) * s2 * s2;
    2.0 * EARTH_RADIUS_KM * libm::asin(libm::sqrt(h.clamp(0.0, 1.0)))
}

/// `w0 · exp(−d / k)`.
pub fn edge_weight(w0: f64, k: f64, d_km: f64) -> f64 {
    w0 * libm::exp(-d_km / k)
}

/// Poisson draw by multiplication of uniforms; fine for small means.
pub fn poisson<R: RngCore + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    let limit = libm::exp(-mean);
    let mut k = 0u32;
    let mut p = unit(rng);
    while p > limit {
        k += 1;
        p *= unit(rng);
    }
    k
}

/// Run lengths are Poisson(`mean_run_length`) with zero draws redrawn, so
/// their mean is `λ / (1 − e^{−λ})`.
#[derive(Clone, Debug, PartialEq)]
pub struct AvailabilityConfig {
    pub low: f64,
    pub high: f64,
    pub mean_run_length: f64,
}

impl Default for AvailabilityConfig {
    fn default() -> Self {
        Self {
            low: 0.1,
            high: 0.9,
            mean_run_length: 4.0,
        }
    }
}

impl AvailabilityConfig {
    /// Expected run length after zero draws are redrawn.
    pub fn expected_run_length(&self) -> f64 {
        let l = self.mean_run_length;
        l / (1.0 - libm::exp(-l))
    }
}

/// `p_vt` for `t = 1..=horizon`: alternating runs of `low` and `high`,
/// starting level chosen uniformly.
pub fn availability_profile<R: RngCore + ?Sized>(horizon: usize, cfg: &AvailabilityConfig, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon);
    let mut high = rng.next_u32() & 1 == 1;
    while out.len() < horizon {
        let run = loop {
            let k = poisson(cfg.mean_run_length, rng);
            if k > 0 {
                break k as usize;
            }
        };
        let level = if high { cfg.high } else { cfg.low };
        for _ in 0..run.min(horizon - out.len()) {
            out.push(level);
        }
        high = !high;
    }
    out
}

/// One cell of a population density grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationCell {
    pub lat: f64,
    pub lon: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Population {
    /// Cells chosen in proportion to weight, then a uniform jitter of
    /// `±cell_size_deg / 2` in latitude and longitude.
    Grid {
        cells: Vec<PopulationCell>,
        cell_size_deg: f64,
    },
    /// Uniform over a disc.
    UniformDisc { center: LatLon, radius_km: f64 },
}

/// A Gaussian population cluster for [`cluster_grid`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cluster {
    pub center: LatLon,
    pub sigma_km: f64,
    pub weight: f64,
}

/// Density grid of a mixture of Gaussian clusters over the square of
/// half-width `half_extent_km` around `center`. Cells below 1e-6 of the peak
/// density are dropped.
pub fn cluster_grid(center: LatLon, half_extent_km: f64, cell_size_deg: f64, clusters: &[Cluster]) -> Vec<PopulationCell> {
    let km_per_deg = EARTH_RADIUS_KM * core::f64::consts::PI / 180.0;
    let dlat = half_extent_km / km_per_deg;
    let dlon = dlat / libm::cos(center.lat.to_radians());
    let n_lat = libm::ceil(2.0 * dlat / cell_size_deg) as usize;
    let n_lon = libm::ceil(2.0 * dlon / cell_size_deg) as usize;
    let mut cells = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        for j in 0..n_lon {
            let p = LatLon {
                lat: center.lat - dlat + (i as f64 + 0.5) * cell_size_deg,
                lon: center.lon - dlon + (j as f64 + 0.5) * cell_size_deg,
            };
            let weight: f64 = clusters
                .iter()
                .map(|c| {
                    let d = haversine_km(p, c.center) / c.sigma_km;
                    c.weight * libm::exp(-0.5 * d * d)
                })
                .sum();
            cells.push(PopulationCell {
                lat: p.lat,
                lon: p.lon,
                weight,
            });
        }
    }
    let peak = cells.iter().map(|c| c.weight).fold(0.0, f64::max);
    cells.retain(|c| c.weight > 1e-6 * peak);
    cells
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub donor_count: usize,
    pub recipient_count: usize,
    pub population: Population,
    pub edge_radius_km: f64,
    pub w0_range: (f64, f64),
    pub decay_set: Vec<f64>,
    /// `floor(static_fraction · recipient_count)` recipients are static.
    pub static_fraction: f64,
    pub availability: AvailabilityConfig,
    pub horizon: usize,
    pub rate_limit: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    /// Defaults for everything but the counts and population, with `T = 30`,
    /// `K = 7`.
    pub fn new(donor_count: usize, recipient_count: usize, population: Population) -> Self {
        Self {
            donor_count,
            recipient_count,
            population,
            edge_radius_km: 15.0,
            w0_range: (0.01, 0.08),
            decay_set: vec![5.0, 10.0, 20.0],
            static_fraction: 0.5,
            availability: AvailabilityConfig::default(),
            horizon: 30,
            rate_limit: 7,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        if self.donor_count == 0 || self.recipient_count == 0 {
            problems.push("donor_count and recipient_count must be ≥ 1".into());
        }
        if !(self.edge_radius_km > 0.0) {
            problems.push(format!("edge_radius_km = {} must be > 0", self.edge_radius_km));
        }
        if !(0.0..=1.0).contains(&self.static_fraction) {
            problems.push(format!("static_fraction = {} is outside [0, 1]", self.static_fraction));
        }
        let (lo, hi) = self.w0_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            problems.push(format!("w0_range [{lo}, {hi}] must satisfy 0 ≤ lo ≤ hi ≤ 1"));
        }
        if self.decay_set.is_empty() || self.decay_set.iter().any(|&k| !(k > 0.0)) {
            problems.push("decay_set must be non-empty with positive entries".into());
        }
        let a = &self.availability;
        if !(0.0..=1.0).contains(&a.low) || !(0.0..=1.0).contains(&a.high) {
            problems.push("availability levels must lie in [0, 1]".into());
        }
        if !(a.mean_run_length > 0.0) {
            problems.push("mean_run_length must be > 0".into());
        }
        if self.horizon == 0 || self.rate_limit == 0 {
            problems.push("horizon and rate_limit must be ≥ 1".into());
        }
        match &self.population {
            Population::Grid { cells, cell_size_deg } => {
                if cells.iter().any(|c| !(c.weight >= 0.0)) || !(cells.iter().map(|c| c.weight).sum::<f64>() > 0.0) {
                    problems.push("population grid needs non-negative weights with a positive total".into());
                }
                if !(*cell_size_deg >= 0.0) {
                    problems.push("cell_size_deg must be ≥ 0".into());
                }
            }
            Population::UniformDisc { radius_km, .. } => {
                if !(*radius_km > 0.0) {
                    problems.push("uniform_disc radius_km must be > 0".into());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}

struct Sampler<'a> {
    population: &'a Population,
    cumulative: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn new(population: &'a Population) -> Self {
        let cumulative = match population {
            Population::Grid { cells, .. } => {
                let mut acc = 0.0;
                cells
                    .iter()
                    .map(|c| {
                        acc += c.weight;
                        acc
                    })
                    .collect()
            }
            Population::UniformDisc { .. } => Vec::new(),
        };
        Self { population, cumulative }
    }

    fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> LatLon {
        match self.population {
            Population::Grid { cells, cell_size_deg } => {
                let total = *self.cumulative.last().unwrap_or(&0.0);
                let x = unit(rng) * total;
                let i = self.cumulative.partition_point(|&c| c <= x).min(cells.len() - 1);
                let c = cells[i];
                LatLon {
                    lat: c.lat + (unit(rng) - 0.5) * cell_size_deg,
                    lon: c.lon + (unit(rng) - 0.5) * cell_size_deg,
                }
            }
            Population::UniformDisc { center, radius_km } => {
                let r = radius_km * libm::sqrt(unit(rng));
                let theta = 2.0 * core::f64::consts::PI * unit(rng);
                let km_per_deg = EARTH_RADIUS_KM * core::f64::consts::PI / 180.0;
                LatLon {
                    lat: center.lat + r * libm::sin(theta) / km_per_deg,
                    lon: center.lon + r * libm::cos(theta) / (km_per_deg * libm::cos(center.lat.to_radians())),
                }
            }
        }
    }
}

// Generator stream indices; each facet of the city has its own stream so
// changing one count does not reshuffle unrelated draws.
const DONOR_LOCATIONS: u64 = 0;
const RECIPIENT_LOCATIONS: u64 = 1;
const NOMINAL_WEIGHTS: u64 = 2;
const DECAY_LENGTHS: u64 = 3;
const STATIC_SPLIT: u64 = 4;
const PROFILES: u64 = 5;
const FIRST_NOTIFY: u64 = 6;

/// Builds a synthetic city. Deterministic in `cfg`.
pub fn generate_city(cfg: &GeneratorConfig) -> Result<Scenario> {
    cfg.validate()?;
    let seeds = Seeds::new(cfg.seed);
    let sampler = Sampler::new(&cfg.population);
    let mut b = Scenario::builder(cfg.horizon, cfg.rate_limit);

    let mut rng = seeds.stream(Domain::Generator, DONOR_LOCATIONS);
    let donor_loc: Vec<LatLon> = (0..cfg.donor_count).map(|_| sampler.sample(&mut rng)).collect();
    let mut rng = seeds.stream(Domain::Generator, RECIPIENT_LOCATIONS);
    let recipient_loc: Vec<LatLon> = (0..cfg.recipient_count).map(|_| sampler.sample(&mut rng)).collect();

    let (lo, hi) = cfg.w0_range;
    let mut rng = seeds.stream(Domain::Generator, NOMINAL_WEIGHTS);
    let w0: Vec<f64> = (0..cfg.recipient_count).map(|_| lo + (hi - lo) * unit(&mut rng)).collect();
    let mut rng = seeds.stream(Domain::Generator, DECAY_LENGTHS);
    let decay: Vec<f64> = (0..cfg.donor_count)
        .map(|_| cfg.decay_set[below(&mut rng, cfg.decay_set.len())])
        .collect();

    // Partial Fisher-Yates: the first `n_static` of a random permutation.
    let n_static = libm::floor(cfg.static_fraction * cfg.recipient_count as f64) as usize;
    let mut order: Vec<usize> = (0..cfg.recipient_count).collect();
    let mut rng = seeds.stream(Domain::Generator, STATIC_SPLIT);
    for i in 0..n_static {
        let j = i + below(&mut rng, cfg.recipient_count - i);
        order.swap(i, j);
    }
    let mut is_static = vec![false; cfg.recipient_count];
    for &v in &order[..n_static] {
        is_static[v] = true;
    }

    let mut rng = seeds.stream(Domain::Generator, FIRST_NOTIFY);
    let first_span = cfg.rate_limit.saturating_sub(1).max(1);
    let donors: Vec<_> = donor_loc
        .iter()
        .enumerate()
        .map(|(i, &loc)| b.add_donor(format!("d{i}"), loc, 1 + below(&mut rng, first_span)))
        .collect();

    let mut rng = seeds.stream(Domain::Generator, PROFILES);
    let mut recipients = Vec::with_capacity(cfg.recipient_count);
    for (j, &loc) in recipient_loc.iter().enumerate() {
        let kind = if is_static[j] {
            RecipientKind::Static
        } else {
            RecipientKind::Dynamic
        };
        let v = b.add_recipient(format!("r{j}"), loc, kind);
        if kind == RecipientKind::Dynamic {
            b.set_availability(
                v,
                StepValues::PerStep(availability_profile(cfg.horizon, &cfg.availability, &mut rng)),
            );
        }
        recipients.push(v);
    }

    for (i, &u) in donors.iter().enumerate() {
        for (j, &v) in recipients.iter().enumerate() {
            let d = haversine_km(donor_loc[i], recipient_loc[j]);
            if d <= cfg.edge_radius_km {
                b.add_edge(u, v, StepValues::Constant(edge_weight(w0[j], decay[i], d)));
            }
        }
    }
    let s = b.build();
    s.ensure_valid()?;
    Ok(s)
}

/// Shape of the random instances from [`tiny_instance`].
#[derive(Clone, Debug, PartialEq)]
pub struct TinyInstanceConfig {
    pub max_donors: usize,
    pub max_recipients: usize,
    pub max_steps: usize,
    pub max_rate_limit: usize,
    pub edge_probability: f64,
}

impl Default for TinyInstanceConfig {
    fn default() -> Self {
        Self {
            max_donors: 3,
            max_recipients: 3,
            max_steps: 3,
            max_rate_limit: 3,
            edge_probability: 0.7,
        }
    }
}

/// Random instance small enough for the exhaustive oracle. Weights are
/// multiples of 1/20 and availabilities multiples of 1/4 so ties and
/// certain (un)availability occur; `m_v` is uniform on `[0.2, 1.2]`.
pub fn tiny_instance(cfg: &TinyInstanceConfig, seed: u64) -> Scenario {
    let mut rng = Seeds::new(seed).stream(Domain::Generator, 100);
    let nd = 1 + below(&mut rng, cfg.max_donors);
    let nr = 1 + below(&mut rng, cfg.max_recipients);
    let h = 1 + below(&mut rng, cfg.max_steps);
    let k = 1 + below(&mut rng, cfg.max_rate_limit);
    let mut b = Scenario::builder(h, k);
    let donors: Vec<_> = (0..nd)
        .map(|i| b.add_donor(format!("u{i}"), LatLon::default(), 1 + below(&mut rng, k)))
        .collect();
    let recipients: Vec<_> = (0..nr)
        .map(|j| {
            let kind = if unit(&mut rng) < 0.4 {
                RecipientKind::Static
            } else {
                RecipientKind::Dynamic
            };
            let v = b.add_recipient(format!("v{j}"), LatLon::default(), kind);
            if kind == RecipientKind::Dynamic {
                let p = (0..h).map(|_| below(&mut rng, 5) as f64 / 4.0).collect();
                b.set_availability(v, StepValues::PerStep(p));
            }
            v
        })
        .collect();
    for &u in &donors {
        for &v in &recipients {
            if unit(&mut rng) < cfg.edge_probability {
                let w = (0..h).map(|_| (1 + below(&mut rng, 20)) as f64 / 20.0).collect();
                b.add_edge(u, v, StepValues::PerStep(w));
            }
        }
    }
    b.set_normalization((0..nr).map(|_| 0.2 + unit(&mut rng)).collect());
    b.build()
}
