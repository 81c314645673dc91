//! Problem construction: the lifted robust subproblem solved in each outer
//! iteration and the feasibility problem used to find a starting point.
//!
//! # Variables
//!
//! Powers are expressed in units of `scale` (the caller normally passes
//! `P_max`), so the trace budget becomes `P_max / scale` and the noise
//! `sigma2 / scale`. SINR-like quantities (`beta`, `c`, `t`) are unit free;
//! `x`, `y` shift by `ln scale`.
//!
//! The subproblem holds, in order,
//!
//! * `W_c` (rate splitting only) and `W_1..W_K`, each as `M^2` reals
//!   (see [`HermitianVar`]),
//! * `c_1..c_K` (rate splitting only) and `t`,
//! * per user and stream, `beta, x, y, t_aux, q, lambda, lambda_bar`.
//!
//! The per-stream variables are stored relative to the expansion point so
//! the solver sees O(1) magnitudes: `beta = b0 beta~`, `x = x0 + x~`,
//! `y = y0 + y~`, `t_aux = e^x0 t~`, `q = e^y0 q~` with `b0 = 1 + e^(x0 - y0)`.
//! [`StreamVars`] turns them back into affine expressions and
//! [`Subproblem::decode`] into physical values. The LMI multipliers are the
//! scaled `mu` of [`lmi_lower_bound`].
//!
//! With rate splitting that is `(K + 1) M^2 + 15 K + 1` reals; the complex
//! count `KM + M` for the beamformers grows to `M^2` per lifted matrix and
//! each user gains four multipliers.
//!
//! # Constraints, per user `k`
//!
//! Common stream (rate splitting only):
//!
//! ```text
//! sum c - f2^(beta_c)     <= ln(1 + beta_c)
//! beta_c                  <= f1^(x_c, y_c)        tangent of exp(x - y)
//! exp(x_c)                <= t_c
//! q_c                     <= f3^(y_c)             tangent of exp(y)
//! h^H W_c h               >= t_c        on the ball  (Gamma)
//! h^H (sum_j W_j) h       <= q_c - s2   on the ball  (Psi)
//! ```
//!
//! Private stream, with `N_k = sum_{j != k} W_j`:
//!
//! ```text
//! t - c_k - f2^(beta_p)   <= ln(1 + beta_p)
//! beta_p                  <= f1^(x_p, y_p)
//! exp(x_p)                <= t_p
//! q_p                     <= f3^(y_p)
//! h^H W_k h               >= t_p        on the ball  (Omega)
//! h^H N_k h               <= q_p - s2   on the ball  (Theta)
//! ```
//!
//! plus `W >= 0`, `sum tr W <= P`, `c, beta, lambda >= 0`. The objective is
//! `max t`.

mod lmi;
mod minorant;

pub use lmi::{congruence_scale, lmi_lower_bound, lmi_upper_bound, CAffine, HermitianAffine, LmiBlock, LmiKind};
pub use minorant::{
    dispersion_term, minorant_dispersion, minorant_exp, minorant_exp_diff, Tangent1, Tangent2,
    BETA_CLAMP, BETA_MIN, EXP_GUARD,
};

use serde::{Deserialize, Serialize};

use crate::channels::ChannelSet;
use crate::config::{LiftedSolution, SystemConfig};
use crate::conic::{AffineExpr, ConicProblem, HermitianBlock};
use crate::error::{Error, Result};
use crate::fbl::FblPenalty;
use crate::linalg::{CMatrix, C64};

/// Which rate expressions the design uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Formulation {
    pub rate_splitting: bool,
    /// Penalty coefficient of each user's common stream.
    pub d_common: Vec<f64>,
    /// Penalty coefficient of each user's private stream.
    pub d_private: Vec<f64>,
}

impl Formulation {
    /// Finite-blocklength rates from the configuration.
    pub fn fbl(cfg: &SystemConfig, rate_splitting: bool) -> Result<Self> {
        let d = cfg
            .epsilon
            .iter()
            .map(|&e| FblPenalty::new(cfg.blocklength, e).map(|p| p.coefficient()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rate_splitting,
            d_common: d.clone(),
            d_private: d,
        })
    }

    /// Shannon rates (`D = 0`).
    pub fn ifbl(users: usize, rate_splitting: bool) -> Self {
        Self {
            rate_splitting,
            d_common: vec![0.0; users],
            d_private: vec![0.0; users],
        }
    }
}

/// Point at which the convex terms are linearized, in physical units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPoint {
    pub beta_c: Vec<f64>,
    pub x_c: Vec<f64>,
    pub y_c: Vec<f64>,
    pub beta_p: Vec<f64>,
    pub x_p: Vec<f64>,
    pub y_p: Vec<f64>,
}

impl ExpansionPoint {
    pub fn from_solution(s: &LiftedSolution) -> Self {
        Self {
            beta_c: s.beta_c.clone(),
            x_c: s.x_c.clone(),
            y_c: s.y_c.clone(),
            beta_p: s.beta_p.clone(),
            x_p: s.x_p.clone(),
            y_p: s.y_p.clone(),
        }
    }

    pub fn validate(&self, users: usize, rate_splitting: bool) -> Result<()> {
        let common_len = if rate_splitting { users } else { 0 };
        let lens = [
            (self.beta_c.len(), common_len),
            (self.x_c.len(), common_len),
            (self.y_c.len(), common_len),
            (self.beta_p.len(), users),
            (self.x_p.len(), users),
            (self.y_p.len(), users),
        ];
        if lens.iter().any(|(a, b)| a != b) {
            return Err(Error::MalformedProblem(format!("expansion point lengths {lens:?}")));
        }
        let all = || {
            self.beta_c
                .iter()
                .chain(&self.x_c)
                .chain(&self.y_c)
                .chain(&self.beta_p)
                .chain(&self.x_p)
                .chain(&self.y_p)
        };
        if let Some(v) = all().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateExpansion {
                function: "expansion point",
                value: *v,
            });
        }
        if let Some(v) = self.beta_c.iter().chain(&self.beta_p).find(|&&b| b < 0.0) {
            return Err(Error::DegenerateExpansion {
                function: "expansion point",
                value: *v,
            });
        }
        Ok(())
    }
}

/// An `M x M` Hermitian matrix variable stored as `M^2` reals: the real
/// diagonal first, then `(re, im)` of each strictly upper entry, row by row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermitianVar {
    pub m: usize,
    pub offset: usize,
}

impl HermitianVar {
    pub fn alloc(p: &mut ConicProblem, m: usize, name: &str) -> Self {
        let offset = p.n_vars;
        for i in 0..m {
            p.add_var(format!("{name}.d{i}"));
        }
        for i in 0..m {
            for j in i + 1..m {
                p.add_var(format!("{name}.re{i}{j}"));
                p.add_var(format!("{name}.im{i}{j}"));
            }
        }
        Self { m, offset }
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // Pairs before row i: sum_{r < i} (m - 1 - r).
        i * (2 * self.m - i - 1) / 2 + (j - i - 1)
    }

    /// `(re, im)` of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> CAffine {
        if i == j {
            return CAffine {
                re: AffineExpr::var(self.offset + i),
                im: AffineExpr::zero(),
            };
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let base = self.offset + self.m + 2 * self.pair(a, b);
        CAffine {
            re: AffineExpr::var(base),
            im: AffineExpr::term(base + 1, sign),
        }
    }

    pub fn affine(&self) -> HermitianAffine {
        let mut out = HermitianAffine::zeros(self.m);
        for i in 0..self.m {
            for j in 0..self.m {
                out.set(i, j, self.entry(i, j));
            }
        }
        out
    }

    pub fn trace(&self) -> AffineExpr {
        AffineExpr::from_terms((0..self.m).map(|i| (self.offset + i, 1.0)))
    }

    /// `W >= 0` as a PSD block.
    pub fn psd_block(&self, label: &str) -> HermitianBlock {
        let mut b = HermitianBlock::new(label, self.m);
        for i in 0..self.m {
            for j in i..self.m {
                let e = self.entry(i, j);
                b.add(i, j, e.re, e.im);
            }
        }
        b
    }

    pub fn decode(&self, x: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.m, self.m, |i, j| {
            let e = self.entry(i, j);
            C64::new(e.re.eval(x), e.im.eval(x))
        })
    }

    /// Variable values encoding the Hermitian part of `w`.
    pub fn encode(&self, w: &CMatrix, x: &mut [f64]) {
        for i in 0..self.m {
            x[self.offset + i] = w[(i, i)].re;
            for j in i + 1..self.m {
                let base = self.offset + self.m + 2 * self.pair(i, j);
                let z = (w[(i, j)] + w[(j, i)].conj()) * 0.5;
                x[base] = z.re;
                x[base + 1] = z.im;
            }
        }
    }
}

/// Auxiliary variables of one stream of one user, with the units they are
/// stored in (all in scaled power units).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamVars {
    pub beta: usize,
    pub x: usize,
    pub y: usize,
    /// Worst-case signal power `t_c` / `t_p`.
    pub t_aux: usize,
    /// Worst-case interference-plus-noise `q_c` / `q_p`.
    pub q: usize,
    pub lambda: usize,
    pub lambda_bar: usize,
    pub beta_unit: f64,
    pub x0: f64,
    pub y0: f64,
}

impl StreamVars {
    fn alloc(p: &mut ConicProblem, stream: &str, k: usize, x0: f64, y0: f64) -> Self {
        let mut v = |n: &str| p.add_var(format!("{n}_{stream}[{k}]"));
        Self {
            beta: v("beta"),
            x: v("x"),
            y: v("y"),
            t_aux: v("t"),
            q: v("q"),
            lambda: v("lambda"),
            lambda_bar: v("lambda_bar"),
            beta_unit: 1.0 + (x0 - y0).min(EXP_GUARD).exp(),
            x0,
            y0,
        }
    }

    pub fn beta_expr(&self) -> AffineExpr {
        AffineExpr::term(self.beta, self.beta_unit)
    }

    pub fn x_expr(&self) -> AffineExpr {
        AffineExpr::var(self.x) + self.x0
    }

    pub fn y_expr(&self) -> AffineExpr {
        AffineExpr::var(self.y) + self.y0
    }

    pub fn t_expr(&self) -> AffineExpr {
        AffineExpr::term(self.t_aux, self.x0.min(EXP_GUARD).exp())
    }

    pub fn q_expr(&self) -> AffineExpr {
        AffineExpr::term(self.q, self.y0.min(EXP_GUARD).exp())
    }
}

/// Variable map of the lifted subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub m: usize,
    pub k: usize,
    pub w_c: Option<HermitianVar>,
    pub w_k: Vec<HermitianVar>,
    pub c: Vec<usize>,
    pub t: usize,
    pub common: Vec<StreamVars>,
    pub private: Vec<StreamVars>,
}

/// One outer-iteration subproblem with the data needed to read it back.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub problem: ConicProblem,
    pub layout: Layout,
    pub scale: f64,
    pub lmi_count: usize,
}

fn sum_affine(vars: &[&HermitianVar], m: usize) -> HermitianAffine {
    let mut out = HermitianAffine::zeros(m);
    for v in vars {
        out.add_scaled(&v.affine(), 1.0);
    }
    out
}

fn check_inputs(cfg: &SystemConfig, ch: &ChannelSet, form: &Formulation, scale: f64) -> Result<()> {
    ch.validate()?;
    if ch.m != cfg.antennas || ch.k != cfg.users {
        return Err(Error::MalformedProblem(format!(
            "channels are {}x{}, config is {}x{}",
            ch.m, ch.k, cfg.antennas, cfg.users
        )));
    }
    if form.d_common.len() != cfg.users || form.d_private.len() != cfg.users {
        return Err(Error::MalformedProblem("penalty vectors do not match K".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::MalformedProblem(format!("power scale {scale}")));
    }
    Ok(())
}

/// Builds the convex restriction around `point`.
pub fn assemble_subproblem(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
    point: &ExpansionPoint,
    scale: f64,
) -> Result<Subproblem> {
    check_inputs(cfg, ch, form, scale)?;
    let (m, k) = (cfg.antennas, cfg.users);
    let rs = form.rate_splitting;
    point.validate(k, rs)?;
    let ln_s = scale.ln();

    let mut p = ConicProblem::new(0);
    let w_c = rs.then(|| HermitianVar::alloc(&mut p, m, "Wc"));
    let w_k: Vec<_> = (0..k).map(|i| HermitianVar::alloc(&mut p, m, &format!("W{i}"))).collect();
    let c: Vec<_> = if rs {
        (0..k).map(|i| p.add_var(format!("c[{i}]"))).collect()
    } else {
        Vec::new()
    };
    let t = p.add_var("t");
    let common: Vec<_> = if rs {
        (0..k)
            .map(|i| StreamVars::alloc(&mut p, "c", i, point.x_c[i] - ln_s, point.y_c[i] - ln_s))
            .collect()
    } else {
        Vec::new()
    };
    let private: Vec<_> = (0..k)
        .map(|i| StreamVars::alloc(&mut p, "p", i, point.x_p[i] - ln_s, point.y_p[i] - ln_s))
        .collect();

    p.maximize(AffineExpr::var(t));

    // Power budget and PSD lifted matrices.
    let mut power = AffineExpr::zero();
    for w in w_c.iter().chain(&w_k) {
        power += w.trace();
    }
    p.add_le(power, cfg.p_max / scale);
    if let Some(w) = &w_c {
        p.add_psd(w.psd_block("Wc"));
    }
    for (i, w) in w_k.iter().enumerate() {
        p.add_psd(w.psd_block(&format!("W{i}")));
    }
    for &ci in &c {
        p.add_nonneg(ci);
    }

    let all_private: Vec<&HermitianVar> = w_k.iter().collect();
    let z_all = sum_affine(&all_private, m);
    let c_sum = AffineExpr::from_terms(c.iter().map(|&v| (v, 1.0)));
    let mut lmi_count = 0;

    for user in 0..k {
        let h = &ch.h_hat[user];
        let delta = ch.delta[user];
        let s2 = cfg.sigma2[user] / scale;

        if let (Some(wc), Some(sv)) = (&w_c, common.get(user)) {
            let f2 = minorant_dispersion(point.beta_c[user].max(BETA_CLAMP), form.d_common[user])?;
            let f1 = minorant_exp_diff(point.x_c[user] - ln_s, point.y_c[user] - ln_s)?;
            let f3 = minorant_exp(point.y_c[user] - ln_s)?;
            stream_chain(&mut p, sv, c_sum.clone() - f2.apply(&sv.beta_expr()), &f1, &f3);
            lmi_lower_bound(LmiKind::Gamma, user, &wc.affine(), h, delta, sv.t_expr(), sv.lambda)
                .install(&mut p);
            lmi_upper_bound(LmiKind::Psi, user, &z_all, h, delta, sv.q_expr() - s2, sv.lambda_bar)
                .install(&mut p);
            lmi_count += 2;
        }

        let sv = &private[user];
        let f4 = minorant_dispersion(point.beta_p[user].max(BETA_CLAMP), form.d_private[user])?;
        let f6 = minorant_exp_diff(point.x_p[user] - ln_s, point.y_p[user] - ln_s)?;
        let f5 = minorant_exp(point.y_p[user] - ln_s)?;
        let mut lhs = AffineExpr::var(t) - f4.apply(&sv.beta_expr());
        if let Some(&ck) = c.get(user) {
            lhs.add_term(ck, -1.0);
        }
        stream_chain(&mut p, sv, lhs, &f6, &f5);
        let others: Vec<&HermitianVar> = w_k.iter().enumerate().filter(|(j, _)| *j != user).map(|(_, w)| w).collect();
        let n_k = sum_affine(&others, m);
        lmi_lower_bound(LmiKind::Omega, user, &w_k[user].affine(), h, delta, sv.t_expr(), sv.lambda)
            .install(&mut p);
        lmi_upper_bound(LmiKind::Theta, user, &n_k, h, delta, sv.q_expr() - s2, sv.lambda_bar)
            .install(&mut p);
        lmi_count += 2;
    }

    Ok(Subproblem {
        problem: p,
        layout: Layout {
            m,
            k,
            w_c,
            w_k,
            c,
            t,
            common,
            private,
        },
        scale,
        lmi_count,
    })
}

/// The rate and auxiliary chain of one stream:
/// `rate_lhs <= ln(1 + beta)`, `beta <= f1^`, `exp(x) <= t_aux`, `q <= f3^`.
/// Both tangents are taken in scaled units. Each row is divided by the
/// unit of its left side, and the two cone rows are written as
/// `exp(rate_lhs - ln b0) <= 1 / b0 + beta~` and `exp(x~) <= t~`.
fn stream_chain(p: &mut ConicProblem, sv: &StreamVars, rate_lhs: AffineExpr, f1: &Tangent2, f3: &Tangent1) {
    let b0 = sv.beta_unit;
    p.add_exp(rate_lhs - b0.ln(), AffineExpr::var(sv.beta) + 1.0 / b0);
    p.add_nonneg(sv.beta);
    p.add_le_expr(
        AffineExpr::var(sv.beta),
        f1.apply(&sv.x_expr(), &sv.y_expr()) * (1.0 / b0),
    );
    p.add_exp(AffineExpr::var(sv.x), AffineExpr::var(sv.t_aux));
    p.add_le_expr(
        AffineExpr::var(sv.q),
        f3.apply(&sv.y_expr()) * (1.0 / sv.y0.min(EXP_GUARD).exp()),
    );
}

impl Subproblem {
    /// Reads the optimizer back in physical units.
    pub fn decode(&self, x: &[f64]) -> LiftedSolution {
        let l = &self.layout;
        let s = self.scale;
        let ln_s = s.ln();
        let m = l.m;
        let pick = |streams: &[StreamVars], f: &dyn Fn(&StreamVars) -> f64| -> Vec<f64> {
            if streams.is_empty() {
                vec![0.0; l.k]
            } else {
                streams.iter().map(f).collect()
            }
        };
        let w_c = l
            .w_c
            .map(|w| w.decode(x) * C64::new(s, 0.0))
            .unwrap_or_else(|| CMatrix::zeros(m, m));
        LiftedSolution {
            w_c,
            w_k: l.w_k.iter().map(|w| w.decode(x) * C64::new(s, 0.0)).collect(),
            c: if l.c.is_empty() {
                vec![0.0; l.k]
            } else {
                l.c.iter().map(|&v| x[v]).collect()
            },
            t: x[l.t],
            beta_c: pick(&l.common, &|v| v.beta_expr().eval(x)),
            x_c: pick(&l.common, &|v| v.x_expr().eval(x) + ln_s),
            y_c: pick(&l.common, &|v| v.y_expr().eval(x) + ln_s),
            t_c: pick(&l.common, &|v| v.t_expr().eval(x) * s),
            q_c: pick(&l.common, &|v| v.q_expr().eval(x) * s),
            beta_p: pick(&l.private, &|v| v.beta_expr().eval(x)),
            x_p: pick(&l.private, &|v| v.x_expr().eval(x) + ln_s),
            y_p: pick(&l.private, &|v| v.y_expr().eval(x) + ln_s),
            t_p: pick(&l.private, &|v| v.t_expr().eval(x) * s),
            q_p: pick(&l.private, &|v| v.q_expr().eval(x) * s),
            lambda_c: pick(&l.common, &|v| x[v.lambda] * s),
            lambda_bar_c: pick(&l.common, &|v| x[v.lambda_bar] * s),
            lambda_p: pick(&l.private, &|v| x[v.lambda] * s),
            lambda_bar_p: pick(&l.private, &|v| x[v.lambda_bar] * s),
        }
    }
    /// Variable values representing `sol`; the inverse of [`Self::decode`].
    pub fn encode(&self, sol: &LiftedSolution) -> Vec<f64> {
        let l = &self.layout;
        let s = self.scale;
        let ln_s = s.ln();
        let mut x = vec![0.0; self.problem.n_vars];
        if let Some(w) = &l.w_c {
            w.encode(&(sol.w_c.clone() / C64::new(s, 0.0)), &mut x);
        }
        for (v, w) in l.w_k.iter().zip(&sol.w_k) {
            v.encode(&(w.clone() / C64::new(s, 0.0)), &mut x);
        }
        for (&v, &c) in l.c.iter().zip(&sol.c) {
            x[v] = c;
        }
        x[l.t] = sol.t;
        let mut put = |v: &StreamVars, i: usize, common: bool| {
            let (beta, xx, yy, tt, qq, lam, lam_bar) = if common {
                (&sol.beta_c, &sol.x_c, &sol.y_c, &sol.t_c, &sol.q_c, &sol.lambda_c, &sol.lambda_bar_c)
            } else {
                (&sol.beta_p, &sol.x_p, &sol.y_p, &sol.t_p, &sol.q_p, &sol.lambda_p, &sol.lambda_bar_p)
            };
            x[v.beta] = beta[i] / v.beta_unit;
            x[v.x] = xx[i] - ln_s - v.x0;
            x[v.y] = yy[i] - ln_s - v.y0;
            x[v.t_aux] = tt[i] / s / v.x0.min(EXP_GUARD).exp();
            x[v.q] = qq[i] / s / v.y0.min(EXP_GUARD).exp();
            x[v.lambda] = lam[i] / s;
            x[v.lambda_bar] = lam_bar[i] / s;
        };
        for (i, v) in l.common.iter().enumerate() {
            put(v, i, true);
        }
        for (i, v) in l.private.iter().enumerate() {
            put(v, i, false);
        }
        x
    }
}

/// Feasibility problem for the SINR targets `a_c`, `a_p`.
#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    pub problem: ConicProblem,
    pub w_c: Option<HermitianVar>,
    pub w_k: Vec<HermitianVar>,
    /// Common slack subtracted from every corner entry; maximized.
    pub margin: usize,
    pub scale: f64,
}

/// Robust SINR-target feasibility:
///
/// ```text
/// h^H (W_c - a_c sum_j W_j) h        >= s2 a_c + s   on the ball   (Xi_c)
/// h^H (W_k - a_p sum_{j != k} W_j) h >= s2 a_p + s   on the ball   (Xi_p)
/// ```
///
/// with `sum tr W <= P`, `W >= 0`, `s >= 0`, maximizing `s`. Pass an empty
/// `a_c` to leave out the common stream.
pub fn assemble_feasibility(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    a_c: &[f64],
    a_p: &[f64],
    scale: f64,
) -> Result<FeasibilityProblem> {
    let form = Formulation::ifbl(cfg.users, !a_c.is_empty());
    check_inputs(cfg, ch, &form, scale)?;
    let (m, k) = (cfg.antennas, cfg.users);
    let rs = !a_c.is_empty();
    if (rs && a_c.len() != k) || a_p.len() != k {
        return Err(Error::MalformedProblem("SINR target vectors do not match K".into()));
    }
    if let Some(a) = a_c.iter().chain(a_p).find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::MalformedProblem(format!("SINR target {a}")));
    }
    let mut p = ConicProblem::new(0);
    let w_c = rs.then(|| HermitianVar::alloc(&mut p, m, "Wc"));
    let w_k: Vec<_> = (0..k).map(|i| HermitianVar::alloc(&mut p, m, &format!("W{i}"))).collect();
    let margin = p.add_var("margin");
    p.maximize(AffineExpr::var(margin));
    p.add_nonneg(margin);
    let mut power = AffineExpr::zero();
    for w in w_c.iter().chain(&w_k) {
        power += w.trace();
        p.add_psd(w.psd_block("W"));
    }
    p.add_le(power, cfg.p_max / scale);

    let all: Vec<&HermitianVar> = w_k.iter().collect();
    let z_all = sum_affine(&all, m);
    for user in 0..k {
        let h = &ch.h_hat[user];
        let delta = ch.delta[user];
        let s2 = cfg.sigma2[user] / scale;
        if let Some(wc) = &w_c {
            let mut u = wc.affine();
            u.add_scaled(&z_all, -a_c[user]);
            let eta = p.add_var(format!("eta_c[{user}]"));
            let thr = AffineExpr::var(margin) + s2 * a_c[user];
            lmi_lower_bound(LmiKind::XiCommon, user, &u, h, delta, thr, eta).install(&mut p);
        }
        let others: Vec<&HermitianVar> = w_k.iter().enumerate().filter(|(j, _)| *j != user).map(|(_, w)| w).collect();
        let mut q = w_k[user].affine();
        q.add_scaled(&sum_affine(&others, m), -a_p[user]);
        let eta = p.add_var(format!("eta_p[{user}]"));
        let thr = AffineExpr::var(margin) + s2 * a_p[user];
        lmi_lower_bound(LmiKind::XiPrivate, user, &q, h, delta, thr, eta).install(&mut p);
    }
    Ok(FeasibilityProblem {
        problem: p,
        w_c,
        w_k,
        margin,
        scale,
    })
}

impl FeasibilityProblem {
    /// `(W_c, W_k)` in physical units; `W_c` is zero without a common stream.
    pub fn decode(&self, x: &[f64]) -> (CMatrix, Vec<CMatrix>) {
        let s = C64::new(self.scale, 0.0);
        let m = self.w_k[0].m;
        let w_c = self.w_c.map(|w| w.decode(x) * s).unwrap_or_else(|| CMatrix::zeros(m, m));
        (w_c, self.w_k.iter().map(|w| w.decode(x) * s).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::sample_rayleigh;
    use crate::linalg::{self, complex_normal, hermitian_part};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermitian_var_roundtrip() {
        let mut p = ConicProblem::new(0);
        let _pad = p.add_var("pad");
        let w = HermitianVar::alloc(&mut p, 3, "W");
        assert_eq!(p.n_vars, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = hermitian_part(&CMatrix::from_fn(3, 3, |_, _| complex_normal(&mut rng)));
        let mut x = vec![0.0; p.n_vars];
        w.encode(&a, &mut x);
        assert!((w.decode(&x) - &a).norm() < 1e-14);
        assert!((w.trace().eval(&x) - linalg::trace_re(&a)).abs() < 1e-14);
        assert!((w.psd_block("W").eval(&x) - &a).norm() < 1e-14);
    }

    fn point(k: usize, rs: bool) -> ExpansionPoint {
        let kc = if rs { k } else { 0 };
        ExpansionPoint {
            beta_c: vec![1.0; kc],
            x_c: vec![0.0; kc],
            y_c: vec![-1.0; kc],
            beta_p: vec![1.0; k],
            x_p: vec![0.0; k],
            y_p: vec![-1.0; k],
        }
    }

    #[test]
    fn subproblem_shape() {
        let cfg = SystemConfig::uniform(4, 2, 1000, 1e-5, 1000.0, 0.01, 0.005);
        let ch = sample_rayleigh(4, 2, 1).with_uniform_delta(0.005);
        let form = Formulation::fbl(&cfg, true).unwrap();
        let sp = assemble_subproblem(&cfg, &ch, &form, &point(2, true), cfg.p_max).unwrap();
        sp.problem.validate().unwrap();
        // Four robust blocks of size M + 1 per user, plus one PSD block per W.
        let robust: Vec<_> = sp.problem.psd_blocks.iter().filter(|b| b.size == 5).collect();
        assert_eq!(robust.len(), 8);
        assert_eq!(sp.lmi_count, 8);
        assert_eq!(sp.problem.psd_blocks.len(), 11);
        assert_eq!(sp.problem.n_vars, 3 * 16 + 15 * 2 + 1);
        // Rate rows and signal epigraphs are both exponential cones.
        assert!(sp.problem.log_hypographs.is_empty());
        assert_eq!(sp.problem.exp_epigraphs.len(), 8);

        let form = Formulation::fbl(&cfg, false).unwrap();
        let sp = assemble_subproblem(&cfg, &ch, &form, &point(2, false), cfg.p_max).unwrap();
        assert_eq!(sp.lmi_count, 4);
        assert!(sp.layout.w_c.is_none() && sp.layout.c.is_empty());
        assert!(assemble_subproblem(&cfg, &ch, &form, &point(2, true), cfg.p_max).is_err());
    }

    #[test]
    fn encode_inverts_decode() {
        let cfg = SystemConfig::uniform(3, 2, 500, 1e-5, 10.0, 0.1, 0.01);
        let ch = sample_rayleigh(3, 2, 2).with_uniform_delta(0.01);
        let form = Formulation::fbl(&cfg, true).unwrap();
        let sp = assemble_subproblem(&cfg, &ch, &form, &point(2, true), 0.7).unwrap();
        let x: Vec<f64> = (0..sp.problem.n_vars).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let sol = sp.decode(&x);
        let back = sp.encode(&sol);
        let again = sp.decode(&back);
        assert!((again.t - sol.t).abs() < 1e-12);
        for (a, b) in again.w_k.iter().zip(&sol.w_k) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in again.x_p.iter().zip(&sol.x_p).chain(again.q_c.iter().zip(&sol.q_c)) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_shape() {
        let cfg = SystemConfig::uniform(2, 3, 1000, 1e-5, 1.0, 0.01, 0.0);
        let ch = sample_rayleigh(2, 3, 1);
        let f = assemble_feasibility(&cfg, &ch, &[0.1; 3], &[0.1; 3], 1.0).unwrap();
        f.problem.validate().unwrap();
        assert_eq!(f.problem.psd_blocks.iter().filter(|b| b.size == 3).count(), 6);
        let f = assemble_feasibility(&cfg, &ch, &[], &[0.1; 3], 1.0).unwrap();
        assert!(f.w_c.is_none());
        assert!(assemble_feasibility(&cfg, &ch, &[0.1; 2], &[0.1; 3], 1.0).is_err());
    }
}
