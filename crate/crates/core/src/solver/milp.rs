//! Best-first branch-and-bound over an [`LpBackend`].

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::lp::{LinearProgram, LpBackend, LpPoint, SolverError};

#[derive(Clone, Debug)]
pub struct BranchAndBound {
    pub integrality_tol: f64,
    pub relative_gap: f64,
    pub max_nodes: usize,
}

impl Default for BranchAndBound {
    fn default() -> Self {
        Self {
            integrality_tol: 1e-6,
            relative_gap: 1e-6,
            max_nodes: 200_000,
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Highest bound first; older nodes first among equals.
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl BranchAndBound {
    /// Maximizes `lp` with the variables in `integer` restricted to integers.
    /// Integer variables in the returned point are rounded exactly.
    pub fn solve(
        &self,
        backend: &dyn LpBackend,
        lp: &LinearProgram,
        integer: &[usize],
    ) -> Result<LpPoint, SolverError> {
        let mut work = lp.clone();
        let root = backend.solve_lp(&work)?;
        let mut heap = BinaryHeap::new();
        let mut seq = 0usize;
        heap.push(Node {
            bound: root.objective,
            seq,
            lower: lp.lower.clone(),
            upper: lp.upper.clone(),
        });
        let mut first = Some(root);
        let mut incumbent: Option<LpPoint> = None;
        let mut nodes = 0usize;

        while let Some(node) = heap.pop() {
            if let Some(best) = &incumbent {
                if !self.improves(node.bound, best.objective) {
                    break;
                }
            }
            nodes += 1;
            if nodes > self.max_nodes {
                return Err(SolverError::NodeLimit(self.max_nodes));
            }
            work.lower.clone_from(&node.lower);
            work.upper.clone_from(&node.upper);
            let point = match first.take() {
                Some(p) => p,
                None => match backend.solve_lp(&work) {
                    Ok(p) => p,
                    Err(SolverError::Infeasible) => continue,
                    Err(e) => return Err(e),
                },
            };
            if let Some(best) = &incumbent {
                if !self.improves(point.objective, best.objective) {
                    continue;
                }
            }

            // Most fractional integer variable.
            let mut branch: Option<(usize, f64)> = None;
            let mut best_frac = self.integrality_tol;
            for &j in integer {
                let v = point.x[j];
                let frac = (v - libm::floor(v)).min(libm::ceil(v) - v);
                if frac > best_frac {
                    best_frac = frac;
                    branch = Some((j, v));
                }
            }

            match branch {
                None => {
                    let mut x = point.x;
                    for &j in integer {
                        x[j] = libm::round(x[j]);
                    }
                    let objective = lp.evaluate(&x);
                    incumbent = Some(LpPoint { x, objective });
                }
                Some((j, v)) => {
                    let mut down_upper = node.upper.clone();
                    down_upper[j] = libm::floor(v);
                    let mut up_lower = node.lower.clone();
                    up_lower[j] = libm::ceil(v);
                    seq += 1;
                    heap.push(Node {
                        bound: point.objective,
                        seq,
                        lower: node.lower,
                        upper: down_upper,
                    });
                    seq += 1;
                    heap.push(Node {
                        bound: point.objective,
                        seq,
                        lower: up_lower,
                        upper: node.upper,
                    });
                }
            }
        }
        incumbent.ok_or(SolverError::Infeasible)
    }

    fn improves(&self, bound: f64, incumbent: f64) -> bool {
        bound - incumbent > self.relative_gap * incumbent.abs().max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::lp::Sense;
    use crate::solver::simplex::DenseSimplex;
    use alloc::vec;

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c ≤ 5, 4a + b + 2c ≤ 11, 3a + 4b + 2c ≤ 8, binary
        // The LP optimum is fractional; compared against enumeration.
        let mut lp = LinearProgram::new();
        let a = lp.add_var(5.0, 0.0, 1.0);
        let b = lp.add_var(4.0, 0.0, 1.0);
        let c = lp.add_var(3.0, 0.0, 1.0);
        lp.add_constraint(vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        lp.add_constraint(vec![(a, 4.0), (b, 1.0), (c, 2.0)], Sense::Le, 11.0);
        lp.add_constraint(vec![(a, 3.0), (b, 4.0), (c, 2.0)], Sense::Le, 8.0);
        let mut best: f64 = 0.0;
        for mask in 0..8u32 {
            let x = [(mask & 1) as f64, ((mask >> 1) & 1) as f64, ((mask >> 2) & 1) as f64];
            if lp.max_violation(&x) <= 0.0 {
                best = best.max(lp.evaluate(&x));
            }
        }
        let p = BranchAndBound::default()
            .solve(&DenseSimplex::default(), &lp, &[a, b, c])
            .unwrap();
        assert!((p.objective - best).abs() < 1e-9, "{} vs {best}", p.objective);
    }

    #[test]
    fn fractional_lp_integer_zero() {
        // max x + y s.t. x + y ≤ 1.5, 2x - 2y = 1 (integers force x - y = .5: infeasible)
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        let y = lp.add_var(1.0, 0.0, 1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.5);
        lp.add_constraint(vec![(x, 2.0), (y, -2.0)], Sense::Eq, 1.0);
        let r = BranchAndBound::default().solve(&DenseSimplex::default(), &lp, &[x, y]);
        assert_eq!(r, Err(SolverError::Infeasible));
    }
}
