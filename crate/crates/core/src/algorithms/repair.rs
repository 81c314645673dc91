//! Re-certification of a lifted subproblem solution.
//!
//! Interior-point solves return matrices that are PSD and satisfy the
//! robust constraints only up to a tolerance relative to the power budget.
//! When the noise is far below the budget that slack is enough to fake
//! interference cancellation, so every accepted iterate is rebuilt here
//! from its matrices alone, using the exact extremes of `h^H A h` over the
//! ball. These are the values the robust LMIs certify, so the rebuilt point
//! is feasible for the next subproblem.

use crate::channels::ChannelSet;
use crate::config::{LiftedSolution, SystemConfig};
use crate::fbl::fbl_rate;
use crate::linalg::{self, CMatrix, CVector};
use crate::schemes::bounds::allocate_common;
use crate::sdr::{congruence_scale, Formulation};

/// Smallest signal-to-noise ratio used for the log variables of a stream
/// with no certified signal power.
const SIGNAL_FLOOR: f64 = 1e-12;

/// Nearest PSD matrix in Frobenius norm.
pub fn psd_projection(a: &CMatrix) -> CMatrix {
    let (values, vectors) = linalg::eigh_desc(a);
    let mut out = CMatrix::zeros(a.nrows(), a.ncols());
    for (i, &v) in values.iter().enumerate() {
        if v > 0.0 {
            let u = vectors.column(i);
            out += (u * u.adjoint()).scale(v);
        }
    }
    out
}

/// Eigenvalues of `a` (clipped at zero) and squared magnitudes of the
/// coordinates of `h` in its eigenbasis.
fn spectrum(a: &CMatrix, h: &CVector) -> (Vec<f64>, Vec<f64>) {
    let (values, vectors) = linalg::eigh_desc(a);
    let coords = (0..values.len())
        .map(|i| vectors.column(i).dotc(h).norm_sqr())
        .collect();
    (values.into_iter().map(|v| v.max(0.0)).collect(), coords)
}

const BISECTIONS: usize = 200;

/// Exact minimum of `h^H A h` over the ball for PSD `A`.
pub fn quad_lb(a: &CMatrix, h_hat: &CVector, delta: f64) -> f64 {
    quad_lb_dual(a, h_hat, delta).0
}

/// Exact maximum of `h^H A h` over the ball for PSD `A`.
pub fn quad_ub(a: &CMatrix, h_hat: &CVector, delta: f64) -> f64 {
    quad_ub_dual(a, h_hat, delta).0
}

/// [`quad_lb`] together with the multiplier `nu` attaining it.
///
/// Every multiplier `nu >= 0` of the dual
/// `sum_i l_i g_i nu / (l_i + nu) - nu delta^2` is a lower bound, and the
/// best one is found by bisection on its decreasing derivative.
pub fn quad_lb_dual(a: &CMatrix, h_hat: &CVector, delta: f64) -> (f64, f64) {
    let (l, g) = spectrum(a, h_hat);
    let dual = |nu: f64| -> f64 {
        l.iter().zip(&g).map(|(&li, &gi)| if li > 0.0 { li * gi * nu / (li + nu) } else { 0.0 }).sum::<f64>()
            - nu * delta * delta
    };
    if delta == 0.0 {
        return (l.iter().zip(&g).map(|(li, gi)| li * gi).sum(), 0.0);
    }
    let slope = |nu: f64| -> f64 {
        l.iter().zip(&g).map(|(&li, &gi)| (li / (li + nu)).powi(2) * gi).sum::<f64>() - delta * delta
    };
    if l.iter().zip(&g).all(|(&li, &gi)| li * gi == 0.0) || slope(0.0) <= 0.0 {
        return (0.0, 0.0);
    }
    let a_h: f64 = l.iter().zip(&g).map(|(li, gi)| li * li * gi).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (0.0, a_h / delta);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if dual(lo) >= dual(hi) { lo } else { hi };
    if dual(best) > 0.0 {
        (dual(best), best)
    } else {
        (0.0, 0.0)
    }
}

/// [`quad_ub`] together with the multiplier `nu` attaining it.
///
/// Every multiplier `nu > lmax(A)` of the dual
/// `nu delta^2 + sum_i l_i g_i nu / (nu - l_i)` is an upper bound, and the
/// best one is found by bisection on its increasing derivative.
pub fn quad_ub_dual(a: &CMatrix, h_hat: &CVector, delta: f64) -> (f64, f64) {
    let (l, g) = spectrum(a, h_hat);
    if delta == 0.0 {
        return (l.iter().zip(&g).map(|(li, gi)| li * gi).sum(), 0.0);
    }
    let top = l.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return (0.0, 0.0);
    }
    let dual = |nu: f64| -> f64 {
        nu * delta * delta
            + l.iter().zip(&g).map(|(&li, &gi)| if gi > 0.0 { li * gi * nu / (nu - li) } else { 0.0 }).sum::<f64>()
    };
    let slope = |nu: f64| -> f64 {
        delta * delta - l.iter().zip(&g).map(|(&li, &gi)| (li / (nu - li)).powi(2) * gi).sum::<f64>()
    };
    let a_h: f64 = l.iter().zip(&g).map(|(li, gi)| li * li * gi).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (top, top + a_h / delta + top * f64::EPSILON);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `lo` may sit on the pole; `hi` is always a valid multiplier.
    let at_lo = dual(lo);
    if at_lo.is_finite() && lo > top && at_lo < dual(hi) {
        (at_lo, lo)
    } else {
        (dual(hi), hi)
    }
}

/// Certified values of one stream.
struct Certified {
    t: f64,
    q: f64,
    /// The point of `[0, t / q]` with the larger rate.
    beta: f64,
    /// Block multipliers `mu = nu tau^2` of the signal and interference LMIs.
    mu: f64,
    mu_bar: f64,
}

fn stream(signal: &CMatrix, interference: &CMatrix, h: &CVector, delta: f64, sigma2: f64, d: f64) -> Certified {
    let tau2 = congruence_scale(h, delta);
    let (ub, nu_bar) = quad_ub_dual(interference, h, delta);
    let (lb, nu) = quad_lb_dual(signal, h, delta);
    let q = sigma2 + ub;
    let t = lb.max(SIGNAL_FLOOR * q);
    let sinr = t / q;
    Certified {
        t,
        q,
        beta: if fbl_rate(sinr, d) >= 0.0 { sinr } else { 0.0 },
        mu: nu * tau2,
        mu_bar: nu_bar * tau2,
    }
}

/// Rebuilds `sol` as a point that satisfies the subproblem constraints
/// exactly: matrices are projected onto the PSD cone and into the power
/// budget, auxiliaries are recomputed from the bounds above, and the common
/// split is re-optimized. Multipliers are the ones attaining the bounds.
pub fn certify_lifted(
    sol: &LiftedSolution,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
) -> LiftedSolution {
    let full = certify_with(sol, cfg, ch, form, psd_projection);
    let truncated = certify_with(sol, cfg, ch, form, rank_one_part);
    if truncated.t > full.t {
        truncated
    } else {
        full
    }
}

/// Leading eigen-component of `a`.
pub fn rank_one_part(a: &CMatrix) -> CMatrix {
    let (values, vectors) = linalg::eigh_desc(a);
    match values.first() {
        Some(&v) if v > 0.0 => {
            let u = vectors.column(0);
            (u * u.adjoint()).scale(v)
        }
        _ => CMatrix::zeros(a.nrows(), a.ncols()),
    }
}

fn certify_with(
    sol: &LiftedSolution,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
    clean: fn(&CMatrix) -> CMatrix,
) -> LiftedSolution {
    let k = cfg.users;
    let rs = form.rate_splitting;
    let mut w_c = if rs { clean(&sol.w_c) } else { CMatrix::zeros(cfg.antennas, cfg.antennas) };
    let mut w_k: Vec<CMatrix> = sol.w_k.iter().map(clean).collect();
    let power = linalg::trace_re(&w_c) + w_k.iter().map(linalg::trace_re).sum::<f64>();
    if power > cfg.p_max {
        let f = cfg.p_max / power;
        w_c = w_c.scale(f);
        w_k.iter_mut().for_each(|w| *w = w.scale(f));
    }

    let mut out = sol.clone();
    let z_all = w_k.iter().fold(CMatrix::zeros(cfg.antennas, cfg.antennas), |acc, w| acc + w);
    for user in 0..k {
        let (h, delta, s2) = (&ch.h_hat[user], ch.delta[user], cfg.sigma2[user]);
        if rs {
            let s = stream(&w_c, &z_all, h, delta, s2, form.d_common[user]);
            out.t_c[user] = s.t;
            out.q_c[user] = s.q;
            out.x_c[user] = s.t.ln();
            out.y_c[user] = s.q.ln();
            out.beta_c[user] = s.beta;
            out.lambda_c[user] = s.mu;
            out.lambda_bar_c[user] = s.mu_bar;
        }
        let others = &z_all - &w_k[user];
        let s = stream(&w_k[user], &others, h, delta, s2, form.d_private[user]);
        out.t_p[user] = s.t;
        out.q_p[user] = s.q;
        out.x_p[user] = s.t.ln();
        out.y_p[user] = s.q.ln();
        out.beta_p[user] = s.beta;
        out.lambda_p[user] = s.mu;
        out.lambda_bar_p[user] = s.mu_bar;
    }

    let private: Vec<f64> = (0..k).map(|u| fbl_rate(out.beta_p[u], form.d_private[u])).collect();
    out.c = if rs {
        let cap = (0..k)
            .map(|u| fbl_rate(out.beta_c[u], form.d_common[u]))
            .fold(f64::INFINITY, f64::min);
        allocate_common(cap, &private)
    } else {
        vec![0.0; k]
    };
    out.t = (0..k).map(|u| out.c[u] + private[u]).fold(f64::INFINITY, f64::min);
    out.w_c = w_c;
    out.w_k = w_k;
    out
}
