//! Thin LP/MILP layer over the HiGHS backend.
//!
//! Models are assembled variable-by-variable into a [`ModelBuilder`],
//! solved with [`ModelBuilder::solve`], and read back through
//! [`SolveResult`]. Every optimal solution is re-checked against the
//! builder's own constraint list before it is returned; the backend is
//! not trusted for feasibility.

use thiserror::Error;

/// Opaque index of a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VariableHandle(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Constraint sense. Two-sided ranges are expressed as two constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// A linear constraint `sum(coef * var) sense rhs`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub terms: Vec<(VariableHandle, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
struct Column {
    kind: VarKind,
    lower: f64,
    upper: f64,
    objective: f64,
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped at the time limit with a feasible incumbent.
    GapLimit,
}

/// Solver output: status, objective, and one value per declared variable.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    values: Vec<f64>,
    /// Relative MIP gap at termination; `None` for pure LPs.
    pub mip_gap: Option<f64>,
}

impl SolveResult {
    pub fn value(&self, var: VariableHandle) -> f64 {
        self.values[var.0]
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative MIP gap at which branch-and-bound may stop.
    pub mip_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Backend threads; 1 gives deterministic solves.
    pub threads: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mip_gap: 1e-3,
            time_limit: None,
            threads: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("model has no variables")]
    EmptyModel,
    #[error("constraint {0} has no terms")]
    EmptyConstraint(usize),
    #[error("non-finite coefficient in constraint {0}")]
    BadCoefficient(usize),
    #[error("time limit reached with no feasible incumbent")]
    TimeLimitNoIncumbent,
    #[error("backend returned unexpected status {0}")]
    Backend(String),
    #[error("solution failed the residual check: constraint {row} violated by {residual:.3e}")]
    ResidualCheck { row: usize, residual: f64 },
}

/// Incrementally assembled minimization model.
#[derive(Debug, Clone, Default)]
pub struct ModelBuilder {
    cols: Vec<Column>,
    rows: Vec<LinearConstraint>,
}

/// Residual tolerance for the independent feasibility re-check.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare a continuous variable with finite bounds and an objective
    /// coefficient (minimization).
    pub fn add_continuous(&mut self, lower: f64, upper: f64, objective: f64) -> VariableHandle {
        self.cols.push(Column {
            kind: VarKind::Continuous,
            lower,
            upper,
            objective,
        });
        VariableHandle(self.cols.len() - 1)
    }

    /// Declare a binary variable.
    pub fn add_binary(&mut self, objective: f64) -> VariableHandle {
        self.cols.push(Column {
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
            objective,
        });
        VariableHandle(self.cols.len() - 1)
    }

    pub fn add_constraint(&mut self, constraint: LinearConstraint) {
        self.rows.push(constraint);
    }

    pub fn le(&mut self, terms: Vec<(VariableHandle, f64)>, rhs: f64) {
        self.add_constraint(LinearConstraint { terms, sense: Sense::Le, rhs });
    }

    pub fn eq(&mut self, terms: Vec<(VariableHandle, f64)>, rhs: f64) {
        self.add_constraint(LinearConstraint { terms, sense: Sense::Eq, rhs });
    }

    pub fn ge(&mut self, terms: Vec<(VariableHandle, f64)>, rhs: f64) {
        self.add_constraint(LinearConstraint { terms, sense: Sense::Ge, rhs });
    }

    pub fn num_variables(&self) -> usize {
        self.cols.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.cols.iter().filter(|c| c.kind == VarKind::Binary).count()
    }

    pub fn kind(&self, var: VariableHandle) -> VarKind {
        self.cols[var.0].kind
    }

    pub fn bounds(&self, var: VariableHandle) -> (f64, f64) {
        let col = &self.cols[var.0];
        (col.lower, col.upper)
    }

    /// The same model with every binary variable made continuous on
    /// [0, 1]. Solving it bounds the MILP optimum from below.
    pub fn relax_integrality(&self) -> ModelBuilder {
        let mut relaxed = self.clone();
        for col in &mut relaxed.cols {
            if col.kind == VarKind::Binary {
                col.kind = VarKind::Continuous;
                col.lower = 0.0;
                col.upper = 1.0;
            }
        }
        relaxed
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.cols.is_empty() {
            return Err(SolverError::EmptyModel);
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.terms.is_empty() {
                return Err(SolverError::EmptyConstraint(i));
            }
            if row.terms.iter().any(|&(_, c)| !c.is_finite()) || !row.rhs.is_finite() {
                return Err(SolverError::BadCoefficient(i));
            }
        }
        Ok(())
    }

    fn to_backend(&self) -> highs::RowProblem {
        let mut pb = highs::RowProblem::new();
        let cols: Vec<highs::Col> = self
            .cols
            .iter()
            .map(|c| match c.kind {
                VarKind::Continuous => pb.add_column(c.objective, c.lower..=c.upper),
                VarKind::Binary => pb.add_integer_column(c.objective, 0.0..=1.0),
            })
            .collect();
        for row in &self.rows {
            let terms: Vec<(highs::Col, f64)> =
                row.terms.iter().map(|&(v, coef)| (cols[v.0], coef)).collect();
            match row.sense {
                Sense::Le => pb.add_row(..=row.rhs, terms),
                Sense::Eq => pb.add_row(row.rhs..=row.rhs, terms),
                Sense::Ge => pb.add_row(row.rhs.., terms),
            };
        }
        pb
    }

    fn run_backend(&self, options: &SolveOptions, presolve: bool) -> highs::SolvedModel {
        let mut model = self.to_backend().optimise(highs::Sense::Minimise);
        model.make_quiet();
        model.set_option("threads", options.threads as i32);
        if options.threads <= 1 {
            model.set_option("parallel", "off");
        }
        model.set_option("random_seed", 0);
        model.set_option("mip_rel_gap", options.mip_gap);
        if let Some(limit) = options.time_limit {
            model.set_option("time_limit", limit);
        }
        if !presolve {
            model.set_option("presolve", "off");
        }
        model.solve()
    }

    /// Build the backend model, solve it, and return the checked result.
    ///
    /// Optimal solutions are verified against this builder's constraint
    /// list (max residual `RESIDUAL_TOLERANCE`); a violation is reported
    /// as an error rather than a solution.
    pub fn solve(&self, options: &SolveOptions) -> Result<SolveResult, SolverError> {
        self.validate()?;
        let is_mip = self.num_binaries() > 0;

        let mut solved = self.run_backend(options, true);
        if solved.status() == highs::HighsModelStatus::UnboundedOrInfeasible {
            // Presolve could not tell the two apart; rerun without it.
            solved = self.run_backend(options, false);
        }

        let status = match solved.status() {
            highs::HighsModelStatus::Optimal => SolveStatus::Optimal,
            highs::HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            highs::HighsModelStatus::Unbounded => SolveStatus::Unbounded,
            highs::HighsModelStatus::ReachedTimeLimit => {
                if is_mip && solved.mip_gap().is_finite() {
                    SolveStatus::GapLimit
                } else {
                    return Err(SolverError::TimeLimitNoIncumbent);
                }
            }
            other => return Err(SolverError::Backend(format!("{other:?}"))),
        };

        if matches!(status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
            return Ok(SolveResult {
                status,
                objective: f64::NAN,
                values: vec![f64::NAN; self.cols.len()],
                mip_gap: None,
            });
        }

        let solution = solved.get_solution();
        let values = solution.columns().to_vec();
        let result = SolveResult {
            status,
            objective: solved.objective_value(),
            values,
            mip_gap: is_mip.then(|| solved.mip_gap()),
        };

        if result.status == SolveStatus::Optimal {
            self.check_feasibility(&result)?;
        }
        Ok(result)
    }

    /// Largest bound or constraint violation of `values`, with the index
    /// of the worst constraint (or `None` if a bound is worst).
    pub fn max_residual(&self, values: &[f64]) -> (Option<usize>, f64) {
        let mut worst = 0.0f64;
        let mut worst_row = None;
        for (col, &v) in self.cols.iter().zip(values) {
            let violation = (col.lower - v).max(v - col.upper).max(0.0);
            if violation > worst {
                worst = violation;
                worst_row = None;
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let lhs: f64 = row.terms.iter().map(|&(v, c)| c * values[v.0]).sum();
            let violation = match row.sense {
                Sense::Le => (lhs - row.rhs).max(0.0),
                Sense::Ge => (row.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            if violation > worst {
                worst = violation;
                worst_row = Some(i);
            }
        }
        (worst_row, worst)
    }

    fn check_feasibility(&self, result: &SolveResult) -> Result<(), SolverError> {
        let (row, residual) = self.max_residual(&result.values);
        if residual > RESIDUAL_TOLERANCE {
            return Err(SolverError::ResidualCheck {
                row: row.unwrap_or(usize::MAX),
                residual,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_single_bounded_variable() {
        let mut m = ModelBuilder::new();
        m.add_continuous(3.0, 10.0, 1.0);
        let result = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert!((result.objective - 3.0).abs() < 1e-9);
        assert_eq!(result.mip_gap, None);
    }

    #[test]
    fn matches_vertex_enumeration_on_a_two_variable_lp() {
        // minimize 2a + 3b  s.t. a + b >= 4, a in [0,1], b in [0,10]
        let mut m = ModelBuilder::new();
        let a = m.add_continuous(0.0, 1.0, 2.0);
        let b = m.add_continuous(0.0, 10.0, 3.0);
        m.ge(vec![(a, 1.0), (b, 1.0)], 4.0);
        let result = m.solve(&SolveOptions::default()).unwrap();

        // Candidate vertices of the feasible polygon.
        let vertices = [(0.0, 4.0), (1.0, 3.0), (1.0, 10.0), (0.0, 10.0)];
        let oracle = vertices
            .iter()
            .map(|&(a, b)| 2.0 * a + 3.0 * b)
            .fold(f64::INFINITY, f64::min);
        assert!((result.objective - oracle).abs() < 1e-9);
        assert!((result.value(a) - 1.0).abs() < 1e-9);
        assert!((result.value(b) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn reports_infeasible_constraint_sets() {
        let mut m = ModelBuilder::new();
        let x = m.add_continuous(0.0, 10.0, 1.0);
        m.ge(vec![(x, 1.0)], 2.0);
        m.le(vec![(x, 1.0)], 1.0);
        let result = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Infeasible);
    }

    #[test]
    fn relaxation_is_identity_without_binaries() {
        let mut m = ModelBuilder::new();
        let x = m.add_continuous(0.0, 5.0, 1.0);
        m.ge(vec![(x, 1.0)], 2.0);
        let a = m.solve(&SolveOptions::default()).unwrap();
        let b = m.relax_integrality().solve(&SolveOptions::default()).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-12);
    }

    #[test]
    fn relaxation_bounds_the_milp_from_below() {
        // Fixed cost forces z = 1 in the MILP; the relaxation takes a
        // fractional z and lands strictly lower.
        let mut m = ModelBuilder::new();
        let g = m.add_continuous(0.0, 100.0, 1.0);
        let z = m.add_binary(50.0);
        m.ge(vec![(g, 1.0)], 30.0);
        m.le(vec![(g, 1.0), (z, -100.0)], 0.0);
        let milp = m.solve(&SolveOptions::default()).unwrap();
        let lp = m.relax_integrality().solve(&SolveOptions::default()).unwrap();
        assert!(lp.objective <= milp.objective + 1e-9);
        assert!(lp.objective < milp.objective - 1.0);
    }

    #[test]
    fn binary_solutions_take_integer_values() {
        let mut m = ModelBuilder::new();
        let z = m.add_binary(-1.0);
        m.le(vec![(z, 1.0)], 0.7);
        let result = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert!(result.value(z).abs() < 1e-9);
        assert!(result.mip_gap.unwrap() <= 1e-3);
    }

    #[test]
    fn repeated_solves_are_deterministic() {
        let mut m = ModelBuilder::new();
        let x = m.add_continuous(0.0, 9.0, 1.5);
        let y = m.add_continuous(0.0, 9.0, 2.5);
        let z = m.add_binary(4.0);
        m.ge(vec![(x, 1.0), (y, 1.0), (z, 3.0)], 10.0);
        let first = m.solve(&SolveOptions::default()).unwrap();
        let second = m.solve(&SolveOptions::default()).unwrap();
        let rel = (first.objective - second.objective).abs() / first.objective.abs();
        assert!(rel < 1e-9);
    }

    #[test]
    fn empty_models_are_rejected() {
        let m = ModelBuilder::new();
        assert!(matches!(m.solve(&SolveOptions::default()), Err(SolverError::EmptyModel)));
    }

    #[test]
    fn residual_checker_flags_violations() {
        let mut m = ModelBuilder::new();
        let x = m.add_continuous(0.0, 10.0, 1.0);
        let y = m.add_continuous(0.0, 10.0, 1.0);
        m.eq(vec![(x, 1.0), (y, 1.0)], 5.0);
        m.le(vec![(x, 2.0)], 4.0);

        let (row, residual) = m.max_residual(&[3.0, 2.0]);
        assert_eq!(row, Some(1));
        assert!((residual - 2.0).abs() < 1e-12);

        let (_, ok) = m.max_residual(&[2.0, 3.0]);
        assert!(ok < 1e-12);

        let (_, out_of_bounds) = m.max_residual(&[-1.0, 6.0]);
        assert!((out_of_bounds - 1.0).abs() < 1e-12);
    }
}
