//! Rand, Max and RandMax: decisions that look only at the current step.

use alloc::vec::Vec;

use rand::RngCore;

use crate::error::Result;
use crate::graph::{available_edges, DemandRealization, DonorIdx, EdgeIdx, Scenario};
use crate::rng::below;

/// Uniform choice among `edges`.
pub fn choose_rand<R: RngCore + ?Sized>(edges: &[EdgeIdx], rng: &mut R) -> Option<EdgeIdx> {
    match edges.len() {
        0 => None,
        1 => Some(edges[0]),
        n => Some(edges[below(rng, n)]),
    }
}

/// Uniform choice among the edges of exactly maximal `w_et`.
pub fn choose_max<R: RngCore + ?Sized>(s: &Scenario, edges: &[EdgeIdx], t: usize, rng: &mut R) -> Option<EdgeIdx> {
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0usize;
    for &e in edges {
        let w = s.weight(e, t);
        if w > best {
            best = w;
            ties = 1;
        } else if w == best {
            ties += 1;
        }
    }
    match ties {
        0 => None,
        1 => edges.iter().copied().find(|&e| s.weight(e, t) == best),
        n => {
            let k = below(rng, n);
            edges.iter().copied().filter(|&e| s.weight(e, t) == best).nth(k)
        }
    }
}

/// Rand: uniform over `E^t_u:`. The donor is assumed available.
pub fn rand_decide<R: RngCore + ?Sized>(
    s: &Scenario,
    u: DonorIdx,
    t: usize,
    r: &DemandRealization,
    rng: &mut R,
) -> Result<Option<EdgeIdx>> {
    let edges: Vec<EdgeIdx> = available_edges(s, u, t, r, true)?;
    Ok(choose_rand(&edges, rng))
}

/// Max: a maximum-weight edge of `E^t_u:`, uniform among ties.
pub fn max_decide<R: RngCore + ?Sized>(
    s: &Scenario,
    u: DonorIdx,
    t: usize,
    r: &DemandRealization,
    rng: &mut R,
) -> Result<Option<EdgeIdx>> {
    let edges = available_edges(s, u, t, r, true)?;
    Ok(choose_max(s, &edges, t, rng))
}

/// RandMax(γ): Rand with probability `gamma`, Max otherwise.
pub fn randmax_decide<R: RngCore + ?Sized>(
    s: &Scenario,
    u: DonorIdx,
    t: usize,
    r: &DemandRealization,
    gamma: f64,
    rng: &mut R,
) -> Result<Option<EdgeIdx>> {
    let edges = available_edges(s, u, t, r, true)?;
    Ok(super::randmax_choice(s, &edges, t, gamma, rng))
}
