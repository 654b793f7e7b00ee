//! Dense-tableau primal simplex with implicit variable bounds.
//!
//! Two phases (artificial variables, then the real objective). Nonbasic
//! variables sit at their lower or upper bound, so `x ≤ u` never becomes a
//! tableau row. Pricing is Dantzig's rule; after a run of degenerate pivots
//! it falls back to Bland's rule until the objective moves again.

use alloc::vec;
use alloc::vec::Vec;

use super::lp::{LinearProgram, LpBackend, LpPoint, Sense, SolverError};

#[derive(Clone, Debug)]
pub struct DenseSimplex {
    /// Primal feasibility tolerance (phase-1 residual, bound checks).
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    /// Hard cap on pivots per phase; `None` scales with problem size.
    pub max_iterations: Option<usize>,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: None,
        }
    }
}

impl LpBackend for DenseSimplex {
    fn solve_lp(&self, lp: &LinearProgram) -> Result<LpPoint, SolverError> {
        Tableau::build(lp, self)?.solve(lp, self)
    }

    fn name(&self) -> &'static str {
        "dense-simplex"
    }
}

const DEGENERATE_RUN: usize = 50;

struct Tableau {
    m: usize,
    cols: usize,
    /// Structural column count.
    n: usize,
    /// First artificial column.
    first_artificial: usize,
    /// Row-major `m × cols`.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram, opts: &DenseSimplex) -> Result<Self, SolverError> {
        let n = lp.var_count();
        if lp.lower.len() != n || lp.upper.len() != n {
            return Err(SolverError::Malformed("bound vectors do not match variable count".into()));
        }
        for j in 0..n {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            if !l.is_finite() || u.is_nan() || !lp.objective[j].is_finite() {
                return Err(SolverError::Malformed(alloc::format!(
                    "variable {j} has bounds [{l}, {u}] and cost {}",
                    lp.objective[j]
                )));
            }
            if u < l - opts.feasibility_tol {
                return Err(SolverError::Infeasible);
            }
        }
        let m = lp.row_count();

        // Shifted rhs and row orientation.
        let mut rhs = Vec::with_capacity(m);
        let mut slack_sign = Vec::with_capacity(m); // 0: no slack
        let mut row_sign = Vec::with_capacity(m);
        for c in &lp.constraints {
            let mut b = c.rhs;
            for &(j, a) in &c.terms {
                if j >= n || !a.is_finite() {
                    return Err(SolverError::Malformed(alloc::format!("bad term ({j}, {a})")));
                }
                b -= a * lp.lower[j];
            }
            let sgn = if b < 0.0 { -1.0 } else { 1.0 };
            let slack: f64 = match c.sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => 0.0,
            };
            rhs.push(b * sgn);
            slack_sign.push(slack * sgn);
            row_sign.push(sgn);
        }

        let n_slack = slack_sign.iter().filter(|&&s| s != 0.0).count();
        let n_art = slack_sign.iter().filter(|&&s| s != 1.0).count();
        let first_slack = n;
        let first_artificial = n + n_slack;
        let cols = first_artificial + n_art;

        let mut t = vec![0.0; m * cols];
        let mut basis = vec![0; m];
        let mut upper = Vec::with_capacity(cols);
        for j in 0..n {
            upper.push(lp.upper[j] - lp.lower[j]);
        }
        upper.resize(cols, f64::INFINITY);

        let mut next_slack = first_slack;
        let mut next_art = first_artificial;
        for (i, c) in lp.constraints.iter().enumerate() {
            let row = &mut t[i * cols..(i + 1) * cols];
            for &(j, a) in &c.terms {
                row[j] += a * row_sign[i];
            }
            if slack_sign[i] != 0.0 {
                row[next_slack] = slack_sign[i];
                if slack_sign[i] == 1.0 {
                    basis[i] = next_slack;
                }
                next_slack += 1;
            }
            if slack_sign[i] != 1.0 {
                row[next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }

        let mut is_basic = vec![false; cols];
        for &b in &basis {
            is_basic[b] = true;
        }
        Ok(Self {
            m,
            cols,
            n,
            first_artificial,
            t,
            beta: rhs,
            basis,
            is_basic,
            at_upper: vec![false; cols],
            upper,
        })
    }

    fn solve(mut self, lp: &LinearProgram, opts: &DenseSimplex) -> Result<LpPoint, SolverError> {
        let max_iter = opts
            .max_iterations
            .unwrap_or_else(|| 20_000 + 50 * (self.m + self.cols));

        if self.first_artificial < self.cols {
            let mut cost = vec![0.0; self.cols];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = -1.0;
            }
            self.run(&cost, self.cols, max_iter, opts)?;
            let residual: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.first_artificial)
                .map(|i| self.beta[i].max(0.0))
                .sum();
            let scale = 1.0 + self.beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if residual > opts.feasibility_tol * scale {
                return Err(SolverError::Infeasible);
            }
            self.retire_artificials(opts);
        }

        let mut cost = vec![0.0; self.cols];
        cost[..self.n].copy_from_slice(&lp.objective);
        self.run(&cost, self.first_artificial, max_iter, opts)?;

        let mut x = vec![0.0; self.n];
        for (j, xj) in x.iter_mut().enumerate() {
            if self.at_upper[j] {
                *xj = self.upper[j];
            }
        }
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n {
                x[b] = self.beta[i];
            }
        }
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (*xj + lp.lower[j]).clamp(lp.lower[j], lp.upper[j]);
        }
        let objective = lp.evaluate(&x);
        Ok(LpPoint { x, objective })
    }

    /// Fixes artificials at zero and pivots basic ones out where possible.
    fn retire_artificials(&mut self, opts: &DenseSimplex) {
        for j in self.first_artificial..self.cols {
            self.upper[j] = 0.0;
            self.at_upper[j] = false;
        }
        for r in 0..self.m {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let row = &self.t[r * self.cols..(r + 1) * self.cols];
            let candidate = (0..self.first_artificial)
                .filter(|&j| !self.is_basic[j])
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            if let Some(j) = candidate {
                if row[j].abs() > opts.pivot_tol {
                    let value = if self.at_upper[j] { self.upper[j] } else { 0.0 };
                    let leaving = self.basis[r];
                    self.pivot(r, j, None);
                    self.is_basic[leaving] = false;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.basis[r] = j;
                    self.beta[r] = value;
                }
            }
        }
    }

    /// Step length at which basic variable `i` reaches a bound when column
    /// entries `a` move in direction `sigma`, with the bound relaxed by
    /// `slack`; `None` when the variable never blocks.
    fn limit(&self, i: usize, a: f64, sigma: f64, slack: f64) -> Option<(f64, bool)> {
        let rate = -a * sigma;
        if rate < 0.0 {
            Some(((self.beta[i] + slack).max(0.0) / -rate, false))
        } else {
            let ub = self.upper[self.basis[i]];
            (ub != f64::INFINITY).then(|| ((ub - self.beta[i] + slack).max(0.0) / rate, true))
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Maximizes `cost` with columns `>= enter_limit` barred from entering.
    fn run(
        &mut self,
        cost: &[f64],
        enter_limit: usize,
        max_iter: usize,
        opts: &DenseSimplex,
    ) -> Result<(), SolverError> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate = 0usize;
        let mut bland = false;
        for _ in 0..max_iter {
            // Pricing.
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..enter_limit {
                if self.is_basic[j] {
                    continue;
                }
                let score = if self.at_upper[j] {
                    -d[j]
                } else if self.upper[j] > opts.feasibility_tol {
                    d[j]
                } else {
                    continue;
                };
                if score > opts.optimality_tol {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if score > best {
                        best = score;
                        entering = Some(j);
                    }
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let sigma = if self.at_upper[j] { -1.0 } else { 1.0 };

            // Harris ratio test: bound the step with every basic variable
            // allowed to overshoot by the feasibility tolerance, then take
            // the largest pivot among rows that block within that step.
            let tol = opts.feasibility_tol;
            let mut relaxed = f64::INFINITY;
            for i in 0..self.m {
                let a = self.t[i * self.cols + j];
                if a.abs() <= opts.pivot_tol {
                    continue;
                }
                if let Some((lim, _)) = self.limit(i, a, sigma, tol) {
                    relaxed = relaxed.min(lim);
                }
            }
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            if relaxed <= theta {
                let mut best_pivot = 0.0f64;
                for i in 0..self.m {
                    let a = self.t[i * self.cols + j];
                    if a.abs() <= opts.pivot_tol {
                        continue;
                    }
                    let Some((lim, to_upper)) = self.limit(i, a, sigma, 0.0) else {
                        continue;
                    };
                    if lim > relaxed {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((r, _)) if bland => self.basis[i] < self.basis[r],
                        Some(_) => a.abs() > best_pivot,
                    };
                    if better {
                        leave = Some((i, to_upper));
                        best_pivot = a.abs();
                        theta = lim;
                    }
                }
            }
            if theta == f64::INFINITY {
                return Err(SolverError::Unbounded);
            }

            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }

            for i in 0..self.m {
                let a = self.t[i * self.cols + j];
                if a != 0.0 {
                    self.beta[i] -= a * sigma * theta;
                }
            }

            match leave {
                None => {
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    let start = if self.at_upper[j] { self.upper[j] } else { 0.0 };
                    self.pivot(r, j, Some(&mut d));
                    self.is_basic[leaving] = false;
                    self.at_upper[leaving] = to_upper;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                    self.basis[r] = j;
                    self.beta[r] = start + sigma * theta;
                }
            }
        }
        Err(SolverError::IterationLimit(max_iter))
    }

    /// Gauss-Jordan pivot on `(r, j)`, touching only nonzeros of the pivot
    /// row and column.
    fn pivot(&mut self, r: usize, j: usize, d: Option<&mut Vec<f64>>) {
        let cols = self.cols;
        let p = self.t[r * cols + j];
        let inv = 1.0 / p;
        let mut nz = Vec::new();
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for (k, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < 1e-14 {
                        *v = 0.0;
                    } else {
                        nz.push(k);
                    }
                }
            }
            row[j] = 1.0;
        }
        let (head, tail) = self.t.split_at_mut(r * cols);
        let (pivot_row, rest) = tail.split_at_mut(cols);
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for &k in &nz {
                    let v = row[k] - f * pivot_row[k];
                    row[k] = if v.abs() < 1e-14 { 0.0 } else { v };
                }
                row[j] = 0.0;
            }
        };
        for row in head.chunks_exact_mut(cols) {
            eliminate(row);
        }
        for row in rest.chunks_exact_mut(cols) {
            eliminate(row);
        }
        if let Some(d) = d {
            let f = d[j];
            if f != 0.0 {
                for &k in &nz {
                    d[k] -= f * pivot_row[k];
                }
                d[j] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(lp: &LinearProgram) -> Result<LpPoint, SolverError> {
        DenseSimplex::default().solve_lp(lp)
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  → (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_var(3.0, 0.0, f64::INFINITY);
        let y = lp.add_var(5.0, 0.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0)], Sense::Le, 4.0);
        lp.add_constraint(vec![(y, 2.0)], Sense::Le, 12.0);
        lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        let p = solve(&lp).unwrap();
        assert!((p.objective - 36.0).abs() < 1e-9);
        assert!((p.x[0] - 2.0).abs() < 1e-9 && (p.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn bounds_ge_and_eq_rows() {
        // max x + y s.t. x + y = 1.5, x - y ≥ 0.5, x ≤ 1, y ≤ 1  → x = 1, y = .5
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        let y = lp.add_var(1.0, 0.0, 1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 1.5);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Sense::Ge, 0.5);
        let p = solve(&lp).unwrap();
        assert!((p.objective - 1.5).abs() < 1e-9);
        assert!(lp.max_violation(&p.x) < 1e-9);
        // Pure bound flip: max 2x, x ∈ [0.25, 3]
        let mut lp = LinearProgram::new();
        lp.add_var(2.0, 0.25, 3.0);
        assert!((solve(&lp).unwrap().objective - 6.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&lp), Err(SolverError::Infeasible));

        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve(&lp), Err(SolverError::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        // Two copies of the same equality; one artificial stays basic at 0.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(2.0, 0.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 1.0);
        lp.add_constraint(vec![(x, 2.0), (y, 2.0)], Sense::Eq, 2.0);
        let p = solve(&lp).unwrap();
        assert!((p.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_assignment_lp() {
        // 3x3 assignment polytope, heavily degenerate.
        let w = [[3.0, 1.0, 2.0], [2.0, 3.0, 1.0], [1.0, 2.0, 3.0]];
        let mut lp = LinearProgram::new();
        let mut v = [[0usize; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                v[i][j] = lp.add_var(w[i][j], 0.0, 1.0);
            }
        }
        for i in 0..3 {
            lp.add_constraint((0..3).map(|j| (v[i][j], 1.0)).collect(), Sense::Le, 1.0);
            lp.add_constraint((0..3).map(|j| (v[j][i], 1.0)).collect(), Sense::Le, 1.0);
        }
        let p = solve(&lp).unwrap();
        assert!((p.objective - 9.0).abs() < 1e-9);
    }
}
