//! Gamma, expected proportionality and weight fractions.
//!
//! Conventions: with every `Y_v = 0` the outcome is γ-proportional for all γ
//! and Gamma is 1; with some zero and some positive it is 0.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::RecipientIdx;
use crate::sim::AggregateResult;

fn check_lengths(y: &[f64], m: &[f64]) -> Result<()> {
    if y.len() != m.len() {
        return Err(Error::InvalidParameter(format!(
            "{} outcomes for {} normalization scores",
            y.len(),
            m.len()
        )));
    }
    Ok(())
}

/// `Y_v / m_v`; every `m_v` must be positive.
pub fn normalized_outcomes(y: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    check_lengths(y, m)?;
    y.iter()
        .zip(m)
        .enumerate()
        .map(|(v, (&yv, &mv))| {
            if mv > 0.0 && mv.is_finite() {
                Ok(yv / mv)
            } else {
                Err(Error::InvalidParameter(format!(
                    "recipient #{v} has normalization score {mv}; Gamma needs m_v > 0"
                )))
            }
        })
        .collect()
}

/// Gamma of already-normalized outcomes: `min / max`, clamped to `[0, 1]`.
pub fn gamma_of_normalized(normalized: &[f64]) -> f64 {
    let (lo, hi) = normalized
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if normalized.is_empty() || hi <= 0.0 {
        1.0
    } else {
        (lo / hi).clamp(0.0, 1.0)
    }
}

/// Largest γ in `[0, 1]` such that `γ·Y_v/m_v ≤ Y_v'/m_v'` for all pairs.
pub fn gamma_of(y: &[f64], m: &[f64]) -> Result<f64> {
    Ok(gamma_of_normalized(&normalized_outcomes(y, m)?))
}

/// Gamma of the mean outcomes `Ȳ_v`.
pub fn empirical_ep(aggregate: &AggregateResult, m: &[f64]) -> Result<f64> {
    gamma_of(&aggregate.mean_recipient_weight, m)
}

/// Delta-method standard error of [`empirical_ep`]: Gamma is the ratio of
/// the smallest to the largest normalized mean, and the two means' relative
/// errors are combined in quadrature. Zero when Gamma is at a convention
/// value (all means zero, or a zero minimum).
pub fn empirical_ep_std_err(aggregate: &AggregateResult, m: &[f64]) -> Result<f64> {
    let z = normalized_outcomes(&aggregate.mean_recipient_weight, m)?;
    let (mut lo, mut hi) = (0usize, 0usize);
    for (v, &x) in z.iter().enumerate() {
        if x < z[lo] {
            lo = v;
        }
        if x > z[hi] {
            hi = v;
        }
    }
    if z.is_empty() || z[hi] <= 0.0 || z[lo] <= 0.0 {
        return Ok(0.0);
    }
    let rel = |v: usize| aggregate.std_err_recipient[v] / aggregate.mean_recipient_weight[v];
    let g = z[lo] / z[hi];
    Ok(g * libm::sqrt(rel(lo) * rel(lo) + rel(hi) * rel(hi)))
}

/// `policy_weight / reference`, e.g. the fraction of Max's weight.
pub fn competitive_fraction(policy_weight: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reference weight {reference} must be positive"
        )));
    }
    Ok(policy_weight / reference)
}

/// Per-policy fairness summary. Recipients with `m_v ≤ 0` are left out of
/// Gamma and listed in `excluded`.
#[derive(Clone, Debug, PartialEq)]
pub struct FairnessReport {
    pub total_weight: f64,
    pub gamma_empirical: f64,
    /// `Y_v / m_v`, `None` for excluded recipients.
    pub normalized: Vec<Option<f64>>,
    pub excluded: Vec<RecipientIdx>,
    pub min_normalized: f64,
    pub max_normalized: f64,
    pub weight_fraction_of_max: Option<f64>,
    pub lp_bound: Option<f64>,
}

impl FairnessReport {
    pub fn new(
        y: &[f64],
        m: &[f64],
        total_weight: f64,
        max_weight: Option<f64>,
        lp_bound: Option<f64>,
    ) -> Result<Self> {
        check_lengths(y, m)?;
        let mut excluded = Vec::new();
        let normalized: Vec<Option<f64>> = y
            .iter()
            .zip(m)
            .enumerate()
            .map(|(v, (&yv, &mv))| {
                if mv > 0.0 && mv.is_finite() {
                    Some(yv / mv)
                } else {
                    excluded.push(RecipientIdx(v));
                    None
                }
            })
            .collect();
        let kept: Vec<f64> = normalized.iter().flatten().copied().collect();
        let (min_normalized, max_normalized) = if kept.is_empty() {
            (0.0, 0.0)
        } else {
            kept.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
        };
        let weight_fraction_of_max = match max_weight {
            Some(w) if w > 0.0 => Some(total_weight / w),
            _ => None,
        };
        Ok(Self {
            total_weight,
            gamma_empirical: gamma_of_normalized(&kept),
            normalized,
            excluded,
            min_normalized,
            max_normalized,
            weight_fraction_of_max,
            lp_bound,
        })
    }
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side is constant or the lengths differ or are below 2.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / libm::sqrt(sxx * syy))
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied block i..=j shares the average.
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_of(&[0.3, 0.6], &[0.3, 0.6]).unwrap(), 1.0);
        assert_eq!(gamma_of(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(gamma_of(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(gamma_of(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(gamma_of(&[1.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(gamma_of(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn fraction_examples() {
        assert_eq!(competitive_fraction(2.0, 2.0).unwrap(), 1.0);
        assert!((competitive_fraction(0.6 * 3.0, 3.0).unwrap() - 0.6).abs() < 1e-15);
        assert!(competitive_fraction(1.0, 0.0).is_err());
    }

    #[test]
    fn report_excludes_zero_normalization() {
        let r = FairnessReport::new(&[1.0, 0.5, 0.0], &[1.0, 1.0, 0.0], 1.5, Some(3.0), None).unwrap();
        assert_eq!(r.excluded, vec![RecipientIdx(2)]);
        assert_eq!(r.gamma_empirical, 0.5);
        assert_eq!(r.normalized[2], None);
        assert_eq!(r.weight_fraction_of_max, Some(0.5));
        assert_eq!((r.min_normalized, r.max_normalized), (0.5, 1.0));
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }
}
