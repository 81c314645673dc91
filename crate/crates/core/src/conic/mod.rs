//! Solver-agnostic description of the convex programs solved in each outer
//! iteration.
//!
//! A [`ConicProblem`] maximizes a linear objective over
//!
//! * affine rows `expr <= rhs` or `expr == rhs`,
//! * exponential epigraphs `exp(u) <= v`,
//! * log hypographs `v <= ln(1 + u)`,
//! * Hermitian affine blocks required to be positive semidefinite.
//!
//! Backends lower Hermitian blocks to real symmetric blocks through
//! [`real_embedding`]. The Clarabel backend lives in [`solve`] behind the
//! `solver` feature.

mod embed;
mod expr;

#[cfg(feature = "solver")]
mod backend;

pub use embed::{real_embedding, SymmetricBlock};
pub use expr::AffineExpr;

#[cfg(feature = "solver")]
pub use backend::{solve, SolverSettings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
}

/// `expr (<= | ==) rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub expr: AffineExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn le(expr: AffineExpr, rhs: f64) -> Self {
        Self {
            expr,
            relation: Relation::Le,
            rhs,
        }
    }

    pub fn eq(expr: AffineExpr, rhs: f64) -> Self {
        Self {
            expr,
            relation: Relation::Eq,
            rhs,
        }
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let g = self.expr.eval(x) - self.rhs;
        match self.relation {
            Relation::Le => g.max(0.0),
            Relation::Eq => g.abs(),
        }
    }
}

/// `exp(u) <= v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpEpigraph {
    pub u: AffineExpr,
    pub v: AffineExpr,
}

impl ExpEpigraph {
    /// Violation relative to `max(1, |v|)`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let (u, v) = (self.u.eval(x), self.v.eval(x));
        ((u.exp() - v) / v.abs().max(1.0)).max(0.0)
    }
}

/// `v <= ln(1 + u)`, which also forces `u > -1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHypograph {
    pub u: AffineExpr,
    pub v: AffineExpr,
}

impl LogHypograph {
    pub fn violation(&self, x: &[f64]) -> f64 {
        let (u, v) = (self.u.eval(x), self.v.eval(x));
        if u <= -1.0 {
            return f64::INFINITY;
        }
        (v - u.ln_1p()).max(0.0)
    }
}

/// One upper-triangle entry `re + i im` of a Hermitian block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianEntry {
    pub row: usize,
    pub col: usize,
    pub re: AffineExpr,
    pub im: AffineExpr,
}

/// Hermitian affine matrix constrained to be positive semidefinite.
/// Entries are stored for `row <= col` only; missing entries are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianBlock {
    pub label: String,
    pub size: usize,
    pub entries: Vec<HermitianEntry>,
}

impl HermitianBlock {
    pub fn new(label: impl Into<String>, size: usize) -> Self {
        Self {
            label: label.into(),
            size,
            entries: Vec::new(),
        }
    }

    /// Adds `re + i im` to entry `(row, col)`; `(col, row)` receives the
    /// conjugate implicitly.
    pub fn add(&mut self, row: usize, col: usize, re: AffineExpr, im: AffineExpr) {
        let (row, col, im) = if row <= col { (row, col, im) } else { (col, row, -im) };
        if let Some(e) = self.entries.iter_mut().find(|e| e.row == row && e.col == col) {
            e.re += re;
            e.im += im;
        } else {
            self.entries.push(HermitianEntry { row, col, re, im });
        }
    }

    pub fn add_real(&mut self, row: usize, col: usize, re: AffineExpr) {
        self.add(row, col, re, AffineExpr::zero());
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|e| e.im.is_zero())
    }

    pub fn eval(&self, x: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.size, self.size);
        for e in &self.entries {
            let z = C64::new(e.re.eval(x), e.im.eval(x));
            m[(e.row, e.col)] = z;
            if e.row != e.col {
                m[(e.col, e.row)] = z.conj();
            }
        }
        m
    }

    /// Negative part of the smallest eigenvalue at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        (-linalg::min_eigenvalue(&self.eval(x))).max(0.0)
    }
}

/// A convex program in maximization form.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub n_vars: usize,
    /// Optional variable names, used only in debug dumps.
    #[serde(default)]
    pub var_names: Vec<String>,
    /// Maximized.
    pub objective: AffineExpr,
    pub linear_constraints: Vec<LinearConstraint>,
    pub exp_epigraphs: Vec<ExpEpigraph>,
    pub log_hypographs: Vec<LogHypograph>,
    pub psd_blocks: Vec<HermitianBlock>,
}

impl ConicProblem {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            ..Default::default()
        }
    }

    /// Appends a fresh variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        let idx = self.n_vars;
        self.n_vars += 1;
        if self.var_names.len() < idx {
            self.var_names.resize(idx, String::new());
        }
        self.var_names.push(name.into());
        idx
    }

    pub fn maximize(&mut self, objective: AffineExpr) {
        self.objective = objective;
    }

    pub fn add_le(&mut self, expr: AffineExpr, rhs: f64) {
        self.linear_constraints.push(LinearConstraint::le(expr, rhs));
    }

    pub fn add_eq(&mut self, expr: AffineExpr, rhs: f64) {
        self.linear_constraints.push(LinearConstraint::eq(expr, rhs));
    }

    /// `lhs <= rhs` for two affine expressions.
    pub fn add_le_expr(&mut self, lhs: AffineExpr, rhs: AffineExpr) {
        self.add_le(lhs - rhs, 0.0);
    }

    pub fn add_nonneg(&mut self, var: usize) {
        self.add_le(-AffineExpr::var(var), 0.0);
    }

    pub fn add_exp(&mut self, u: AffineExpr, v: AffineExpr) {
        self.exp_epigraphs.push(ExpEpigraph { u, v });
    }

    pub fn add_log(&mut self, u: AffineExpr, v: AffineExpr) {
        self.log_hypographs.push(LogHypograph { u, v });
    }

    pub fn add_psd(&mut self, block: HermitianBlock) {
        self.psd_blocks.push(block);
    }

    /// Checks that every expression stays within `n_vars`, every block entry
    /// is inside its block, diagonal entries are real and all coefficients
    /// are finite.
    pub fn validate(&self) -> Result<()> {
        let check = |e: &AffineExpr, what: &str| -> Result<()> {
            if let Some(v) = e.max_var() {
                if v >= self.n_vars {
                    return Err(Error::MalformedProblem(format!(
                        "{what} references variable {v} but n_vars = {}",
                        self.n_vars
                    )));
                }
            }
            if !e.is_finite() {
                return Err(Error::MalformedProblem(format!("{what} has a non-finite coefficient")));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.linear_constraints.iter().enumerate() {
            check(&c.expr, &format!("linear row {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::MalformedProblem(format!("linear row {i} has rhs {}", c.rhs)));
            }
        }
        for (i, c) in self.exp_epigraphs.iter().enumerate() {
            check(&c.u, &format!("exp cone {i}"))?;
            check(&c.v, &format!("exp cone {i}"))?;
        }
        for (i, c) in self.log_hypographs.iter().enumerate() {
            check(&c.u, &format!("log cone {i}"))?;
            check(&c.v, &format!("log cone {i}"))?;
        }
        for b in &self.psd_blocks {
            if b.size == 0 {
                return Err(Error::MalformedProblem(format!("block {} is empty", b.label)));
            }
            for e in &b.entries {
                if e.row > e.col || e.col >= b.size {
                    return Err(Error::MalformedProblem(format!(
                        "block {} entry ({}, {}) outside the upper triangle of size {}",
                        b.label, e.row, e.col, b.size
                    )));
                }
                if e.row == e.col && !e.im.is_zero() {
                    return Err(Error::MalformedProblem(format!(
                        "block {} has a complex diagonal entry {}",
                        b.label, e.row
                    )));
                }
                check(&e.re, &b.label)?;
                check(&e.im, &b.label)?;
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint at `x`, measured independently of
    /// the backend: absolute for rows, PSD blocks and log cones, relative to
    /// `max(1, |v|)` for exponential epigraphs.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.linear_constraints.iter().map(|c| c.violation(x));
        let exps = self.exp_epigraphs.iter().map(|c| c.violation(x));
        let logs = self.log_hypographs.iter().map(|c| c.violation(x));
        let psd = self.psd_blocks.iter().map(|b| b.violation(x));
        rows.chain(exps).chain(logs).chain(psd).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Pretty JSON for failure triage.
    pub fn to_debug_json(&self) -> String {
        serde_json::to_string_pretty(&DebugDump::from(self)).expect("problem serializes")
    }

    pub fn dump_debug(&self, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_debug_json())
    }
}

/// Debug layout: the problem itself plus each PSD block at zero as a dense
/// `[re, im]` matrix, which is usually what one wants to look at first.
#[derive(Serialize)]
struct DebugDump<'a> {
    problem: &'a ConicProblem,
    psd_constant_parts: Vec<(String, Vec<Vec<[f64; 2]>>)>,
}

impl<'a> From<&'a ConicProblem> for DebugDump<'a> {
    fn from(problem: &'a ConicProblem) -> Self {
        let zero = vec![0.0; problem.n_vars];
        let psd_constant_parts = problem
            .psd_blocks
            .iter()
            .map(|b| {
                let m = b.eval(&zero);
                let rows = (0..b.size)
                    .map(|r| (0..b.size).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                    .collect();
                (b.label.clone(), rows)
            })
            .collect();
        Self {
            problem,
            psd_constant_parts,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// The backend stopped without meeting the acceptance tolerances.
    Inaccurate,
    Failed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Independent maximum constraint violation at the returned point.
    pub primal: f64,
    /// Backend-reported dual residual.
    pub dual: f64,
    /// `|primal obj - dual obj| / max(1, |primal obj|)`.
    pub relative_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    /// Objective of the maximization at `primal`.
    pub objective_value: f64,
    pub residuals: Residuals,
    pub iterations: u32,
    /// Raw status string of the backend.
    pub backend_status: String,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Optimal, or stopped early at a point that satisfies every
    /// constraint to `tol`. Such a point is usable wherever only
    /// feasibility matters.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.is_optimal()
            || (self.status == SolveStatus::Inaccurate
                && self.residuals.primal <= tol
                && self.objective_value.is_finite())
    }

    /// Converts a non-optimal outcome into an error.
    pub fn into_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(self.into_error())
        }
    }

    /// Like [`into_optimal`](Self::into_optimal) but also keeps feasible
    /// early stops.
    pub fn into_feasible(self, tol: f64) -> Result<Self> {
        if self.is_feasible(tol) {
            Ok(self)
        } else {
            Err(self.into_error())
        }
    }

    fn into_error(self) -> Error {
        Error::Solver {
            status: self.status,
            detail: format!(
                "{} (violation {:.2e}, gap {:.2e})",
                self.backend_status, self.residuals.primal, self.residuals.relative_gap
            ),
        }
    }
}
