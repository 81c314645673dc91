//! Clarabel lowering.
//!
//! Clarabel solves `min q'x` subject to `Ax + s = b`, `s` in a product of
//! cones. Rows are emitted cone by cone in the order zero, nonnegative,
//! exponential, PSD.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{
    real_embedding, AffineExpr, ConicProblem, Relation, Residuals, SolveOutcome, SolveStatus,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Backend gap and feasibility tolerance.
    pub tol: f64,
    /// Largest independent violation and relative gap accepted as optimal.
    pub accept_tol: f64,
    pub max_iter: u32,
    /// Ruiz equilibration of the constraint matrix. Off by default: on the
    /// beamforming subproblems it stalls the solver short of the optimum.
    pub equilibrate: bool,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            accept_tol: 1e-6,
            max_iter: 200,
            equilibrate: false,
            verbose: false,
        }
    }
}

struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Appends the row `s = e(x)`, i.e. `A = -coefs`, `b = constant`.
    fn push_slack(&mut self, e: &AffineExpr, scale: f64) {
        let r = self.b.len();
        for &(var, c) in &e.terms {
            self.i.push(r);
            self.j.push(var);
            self.v.push(-c * scale);
        }
        self.b.push(e.constant * scale);
    }
}

/// Solves `p` with Clarabel and checks the result against the original
/// constraints.
pub fn solve(p: &ConicProblem, settings: &SolverSettings) -> Result<SolveOutcome> {
    p.validate()?;
    let n = p.n_vars;
    let mut rows = Rows {
        i: Vec::new(),
        j: Vec::new(),
        v: Vec::new(),
        b: Vec::new(),
    };
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    // Every row is written as a slack expression that must lie in the cone:
    // `rhs - expr` for rows, so `expr == rhs` gives zero slack.
    let eqs: Vec<_> = p.linear_constraints.iter().filter(|c| c.relation == Relation::Eq).collect();
    let les: Vec<_> = p.linear_constraints.iter().filter(|c| c.relation == Relation::Le).collect();
    for c in &eqs {
        rows.push_slack(&(AffineExpr::constant(c.rhs) - c.expr.clone()), 1.0);
    }
    if !eqs.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(eqs.len()));
    }
    for c in &les {
        rows.push_slack(&(AffineExpr::constant(c.rhs) - c.expr.clone()), 1.0);
    }
    if !les.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(les.len()));
    }
    let one = AffineExpr::constant(1.0);
    for c in &p.exp_epigraphs {
        rows.push_slack(&c.u, 1.0);
        rows.push_slack(&one, 1.0);
        rows.push_slack(&c.v, 1.0);
        cones.push(SupportedConeT::ExponentialConeT());
    }
    for c in &p.log_hypographs {
        rows.push_slack(&c.v, 1.0);
        rows.push_slack(&one, 1.0);
        rows.push_slack(&(c.u.clone() + 1.0), 1.0);
        cones.push(SupportedConeT::ExponentialConeT());
    }
    for h in &p.psd_blocks {
        let s = real_embedding(h);
        let dim = s.size * (s.size + 1) / 2;
        let mut svec = vec![AffineExpr::zero(); dim];
        for (r, c, e) in &s.entries {
            let (r, c) = if r <= c { (*r, *c) } else { (*c, *r) };
            let k = c * (c + 1) / 2 + r;
            let w = if r == c { 1.0 } else { std::f64::consts::SQRT_2 };
            svec[k].add_scaled(e, w);
        }
        for e in &svec {
            rows.push_slack(e, 1.0);
        }
        cones.push(SupportedConeT::PSDTriangleConeT(s.size));
    }

    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let pmat = CscMatrix::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(var, c) in &p.objective.terms {
        q[var] = -c;
    }
    let cl_settings = DefaultSettingsBuilder::default()
        .verbose(settings.verbose)
        .max_iter(settings.max_iter)
        .tol_gap_abs(settings.tol)
        .tol_gap_rel(settings.tol)
        .tol_feas(settings.tol)
        .max_threads(1)
        .equilibrate_enable(settings.equilibrate)
        .build()
        .map_err(|e| Error::MalformedProblem(format!("solver settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&pmat, &q, &a, &rows.b, &cones, cl_settings)
        .map_err(|e| Error::MalformedProblem(format!("solver rejected the problem: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let x = sol.x.clone();
    let objective_value = p.objective_value(&x);
    let primal = if x.iter().all(|v| v.is_finite()) {
        p.max_violation(&x)
    } else {
        f64::INFINITY
    };
    let relative_gap = (sol.obj_val - sol.obj_val_dual).abs() / sol.obj_val.abs().max(1.0);
    let residuals = Residuals {
        primal,
        dual: sol.r_dual,
        relative_gap,
    };
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved
            if primal <= settings.accept_tol && relative_gap <= settings.accept_tol =>
        {
            SolveStatus::Optimal
        }
        SolverStatus::Solved
        | SolverStatus::AlmostSolved
        | SolverStatus::MaxIterations
        | SolverStatus::MaxTime
        | SolverStatus::InsufficientProgress => SolveStatus::Inaccurate,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        _ => SolveStatus::Failed,
    };
    Ok(SolveOutcome {
        status,
        primal: x,
        objective_value,
        residuals,
        iterations: sol.iterations,
        backend_status: format!("{:?}", sol.status),
    })
}
