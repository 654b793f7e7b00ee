//! Sparse LP backend over `microlp`, and a size-based switch between it and
//! the dense simplex in the core crate.

use bloodmatch_core::solver::{DenseSimplex, LinearProgram, LpBackend, LpPoint, Sense, SolverError};
use microlp::{ComparisonOp, OptimizationDirection, Problem, TerminationReason};

/// Revised simplex with sparse LU factorization (`microlp`).
#[derive(Clone, Copy, Debug, Default)]
pub struct SparseSimplex;

impl LpBackend for SparseSimplex {
    fn solve_lp(&self, lp: &LinearProgram) -> Result<LpPoint, SolverError> {
        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = (0..lp.var_count())
            .map(|j| problem.add_var(lp.objective[j], (lp.lower[j], lp.upper[j])))
            .collect();
        for row in &lp.constraints {
            let terms: Vec<_> = row.terms.iter().map(|&(j, a)| (vars[j], a)).collect();
            let op = match row.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(&terms[..], op, row.rhs);
        }
        let outcome = problem.solve().map_err(|e| match e {
            microlp::Error::Infeasible => SolverError::Infeasible,
            microlp::Error::Unbounded => SolverError::Unbounded,
            other => SolverError::Backend(other.to_string()),
        })?;
        if outcome.termination_reason() != TerminationReason::ProvenOptimal {
            return Err(SolverError::Backend(format!(
                "microlp stopped early: {:?}",
                outcome.termination_reason()
            )));
        }
        let solution = outcome
            .into_solution()
            .map_err(|stop| SolverError::Backend(format!("microlp stopped early: {stop:?}")))?;
        let x: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
        Ok(LpPoint {
            objective: lp.evaluate(&x),
            x,
        })
    }

    fn name(&self) -> &'static str {
        "sparse-simplex"
    }
}

/// Dense tableau for small models, sparse factorization above
/// `dense_limit` tableau entries.
#[derive(Clone, Debug)]
pub struct AutoBackend {
    pub dense: DenseSimplex,
    pub sparse: SparseSimplex,
    pub dense_limit: usize,
}

impl Default for AutoBackend {
    fn default() -> Self {
        Self {
            dense: DenseSimplex::default(),
            sparse: SparseSimplex,
            dense_limit: 200_000,
        }
    }
}

impl AutoBackend {
    fn use_dense(&self, lp: &LinearProgram) -> bool {
        let rows = lp.row_count();
        rows.saturating_mul(lp.var_count() + rows) <= self.dense_limit
    }
}

impl LpBackend for AutoBackend {
    fn solve_lp(&self, lp: &LinearProgram) -> Result<LpPoint, SolverError> {
        if self.use_dense(lp) {
            self.dense.solve_lp(lp)
        } else {
            self.sparse.solve_lp(lp)
        }
    }

    fn name(&self) -> &'static str {
        "auto"
    }
}
