//! Solver-independent convex program description and the Clarabel backend.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};

/// `Σ coef·x[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: usize) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, v: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn plus(mut self, other: &LinExpr, scale: f64) -> Self {
        for &(v, c) in &other.terms {
            self = self.term(v, scale * c);
        }
        self.constant += scale * other.constant;
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `expr = 0`
    Eq(LinExpr),
    /// `expr ≤ 0`
    Le(LinExpr),
    /// `Σ squares² ≤ bound`
    SumSquares { squares: Vec<LinExpr>, bound: LinExpr },
    /// `‖tail‖₂ ≤ head`
    Soc { head: LinExpr, tail: Vec<LinExpr> },
}

impl Constraint {
    /// Amount by which `x` violates the constraint (zero when satisfied).
    ///
    /// Every measure is in the units of `x`: a sum-of-squares row is
    /// compared as `‖squares‖₂` against `√bound`, so that large flows do not
    /// inflate its residual quadratically.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Eq(e) => e.eval(x).abs(),
            Constraint::Le(e) => e.eval(x).max(0.0),
            Constraint::SumSquares { squares, bound } => -root_gap(squares, bound, x).min(0.0),
            Constraint::Soc { head, tail } => {
                (tail.iter().map(|s| s.eval(x).powi(2)).sum::<f64>().sqrt() - head.eval(x)).max(0.0)
            }
        }
    }

    /// Distance from the boundary, used to report active constraints.
    pub fn slack(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Eq(_) => 0.0,
            Constraint::Le(e) => -e.eval(x),
            Constraint::SumSquares { squares, bound } => root_gap(squares, bound, x),
            Constraint::Soc { head, tail } => head.eval(x) - tail.iter().map(|s| s.eval(x).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

/// `√bound − ‖squares‖₂`, with a negative bound counted in full.
fn root_gap(squares: &[LinExpr], bound: &LinExpr, x: &[f64]) -> f64 {
    let b = bound.eval(x);
    let norm = squares.iter().map(|s| s.eval(x).powi(2)).sum::<f64>().sqrt();
    if b >= 0.0 {
        b.sqrt() - norm
    } else {
        b - norm
    }
}

/// `minimise objective(x)` subject to named constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexProblem {
    pub var_names: Vec<String>,
    pub objective: LinExpr,
    pub constraints: Vec<(String, Constraint)>,
}

impl ConvexProblem {
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.var_names.len() - 1
    }

    pub fn add(&mut self, name: impl Into<String>, c: Constraint) {
        self.constraints.push((name.into(), c));
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    /// Largest violation over all constraints, with the offending name.
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<&str>) {
        let mut worst = (0.0, None);
        for (name, c) in &self.constraints {
            let v = c.violation(x);
            if v > worst.0 {
                worst = (v, Some(name.as_str()));
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutput {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub iterations: u32,
    pub seconds: f64,
    /// Backend-specific status text.
    pub detail: String,
}

/// Backend able to handle linear, convex quadratic and second-order cone
/// constraints.
pub trait ConvexSolver {
    fn solve(&self, problem: &ConvexProblem) -> SolverOutput;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClarabelSolver {
    pub tolerance: f64,
    pub max_iter: u32,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        ClarabelSolver {
            tolerance: 1e-9,
            max_iter: 200,
        }
    }
}

/// Rows of `A x + s = b` for one conic block.
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Adds `s = expr(x)`, i.e. the row `−a·x + s = c`.
    fn push(&mut self, e: &LinExpr, scale: f64) {
        let row = self.b.len();
        for &(var, c) in &e.terms {
            self.i.push(row);
            self.j.push(var);
            self.v.push(-scale * c);
        }
        self.b.push(scale * e.constant);
    }
}

impl ConvexSolver for ClarabelSolver {
    fn solve(&self, problem: &ConvexProblem) -> SolverOutput {
        let start = Instant::now();
        let n = problem.num_vars();
        let mut rows = Rows {
            i: Vec::new(),
            j: Vec::new(),
            v: Vec::new(),
            b: Vec::new(),
        };
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        let eqs: Vec<_> = problem.constraints.iter().filter_map(|(_, c)| match c {
            Constraint::Eq(e) => Some(e),
            _ => None,
        }).collect();
        for e in &eqs {
            rows.push(e, 1.0);
        }
        if !eqs.is_empty() {
            cones.push(ZeroConeT(eqs.len()));
        }
        // expr ≤ 0  ⇔  −expr ∈ R₊
        let les: Vec<_> = problem.constraints.iter().filter_map(|(_, c)| match c {
            Constraint::Le(e) => Some(e),
            _ => None,
        }).collect();
        for e in &les {
            rows.push(e, -1.0);
        }
        if !les.is_empty() {
            cones.push(NonnegativeConeT(les.len()));
        }
        for (_, c) in &problem.constraints {
            match c {
                Constraint::SumSquares { squares, bound } => {
                    // Σw² ≤ s  ⇔  ‖(2w, s − 1)‖ ≤ s + 1
                    rows.push(&bound.clone().offset(1.0), 1.0);
                    for w in squares {
                        rows.push(w, 2.0);
                    }
                    rows.push(&bound.clone().offset(-1.0), 1.0);
                    cones.push(SecondOrderConeT(squares.len() + 2));
                }
                Constraint::Soc { head, tail } => {
                    rows.push(head, 1.0);
                    for w in tail {
                        rows.push(w, 1.0);
                    }
                    cones.push(SecondOrderConeT(tail.len() + 1));
                }
                _ => {}
            }
        }

        let m = rows.b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(v, c) in &problem.objective.terms {
            q[v] += c;
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tolerance)
            .tol_gap_rel(self.tolerance)
            .tol_feas(self.tolerance)
            .build()
            .expect("valid solver settings");
        let mut solver = match DefaultSolver::new(&p, &q, &a, &rows.b, &cones, settings) {
            Ok(s) => s,
            Err(e) => {
                return SolverOutput {
                    status: SolveStatus::Failed,
                    x: vec![0.0; n],
                    iterations: 0,
                    seconds: start.elapsed().as_secs_f64(),
                    detail: e.to_string(),
                }
            }
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::Failed,
        };
        SolverOutput {
            status,
            x: sol.x.clone(),
            iterations: sol.iterations,
            seconds: start.elapsed().as_secs_f64(),
            detail: format!("{:?}", sol.status),
        }
    }
}
