//! Robust quadratic constraints over a norm ball as LMIs.
//!
//! For `h = h_hat + e`, `|e| <= delta`, the S-lemma turns
//! `h^H A h >= thr` for every such `h` into the existence of `lambda >= 0`
//! with
//!
//! ```text
//! [ lambda I + A      A h_hat                               ]
//! [ h_hat^H A         h_hat^H A h_hat - lambda delta^2 - thr ]  >= 0
//! ```
//!
//! and `h^H B h <= cap` into the same with `A = -B`, `thr = -cap`.
//!
//! The certificate needs `lambda ~ |h_hat| / delta` for small radii, which
//! leaves the block badly scaled. The builders emit the congruent block
//! `diag(tau I, 1) S diag(tau I, 1)` with `tau^2 = delta / |h_hat|`, in the
//! multiplier `mu = lambda tau^2`:
//!
//! ```text
//! [ mu I + tau^2 A     tau A h_hat                                ]
//! [ tau h_hat^H A      h_hat^H A h_hat - mu delta^2 / tau^2 - thr ]  >= 0
//! ```
//!
//! For `delta > 0` the two are equivalent. For `delta = 0` the scaled block
//! reduces to the nominal constraint `h_hat^H A h_hat >= thr`.

use serde::{Deserialize, Serialize};

use crate::conic::{AffineExpr, ConicProblem, HermitianBlock};
use crate::linalg::{CMatrix, CVector, C64};

/// Complex affine scalar `re + i im`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CAffine {
    pub re: AffineExpr,
    pub im: AffineExpr,
}

impl CAffine {
    /// `self * z` for a constant `z`.
    pub fn mul_c(&self, z: C64) -> Self {
        let mut re = self.re.clone() * z.re;
        re.add_scaled(&self.im, -z.im);
        let mut im = self.re.clone() * z.im;
        im.add_scaled(&self.im, z.re);
        Self { re, im }
    }

    pub fn add_assign(&mut self, other: &CAffine, scale: f64) {
        self.re.add_scaled(&other.re, scale);
        self.im.add_scaled(&other.im, scale);
    }
}

/// Dense Hermitian matrix whose entries are affine in the problem
/// variables. Stored row-major with both triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianAffine {
    pub size: usize,
    entries: Vec<CAffine>,
}

impl HermitianAffine {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            entries: vec![CAffine::default(); size * size],
        }
    }

    pub fn constant(m: &CMatrix) -> Self {
        let n = m.nrows();
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let z = m[(r, c)];
                out.entries[r * n + c] = CAffine {
                    re: AffineExpr::constant(z.re),
                    im: AffineExpr::constant(z.im),
                };
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> &CAffine {
        &self.entries[r * self.size + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: CAffine) {
        self.entries[r * self.size + c] = v;
    }

    pub fn add_scaled(&mut self, other: &HermitianAffine, scale: f64) {
        assert_eq!(self.size, other.size);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.add_assign(b, scale);
        }
    }

    /// `A v` for a constant vector.
    pub fn mul_vec(&self, v: &CVector) -> Vec<CAffine> {
        (0..self.size)
            .map(|r| {
                let mut acc = CAffine::default();
                for c in 0..self.size {
                    acc.add_assign(&self.get(r, c).mul_c(v[c]), 1.0);
                }
                acc
            })
            .collect()
    }

    /// Real part of `v^H A v`.
    pub fn quad(&self, v: &CVector) -> AffineExpr {
        let av = self.mul_vec(v);
        let mut out = AffineExpr::zero();
        for (r, a) in av.iter().enumerate() {
            out.add_scaled(&a.mul_c(v[r].conj()).re, 1.0);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> CMatrix {
        CMatrix::from_fn(self.size, self.size, |r, c| {
            let e = self.get(r, c);
            C64::new(e.re.eval(x), e.im.eval(x))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LmiKind {
    /// Common-stream signal lower bound.
    Gamma,
    /// Common-stream interference upper bound.
    Psi,
    /// Private-stream signal lower bound.
    Omega,
    /// Private-stream interference upper bound.
    Theta,
    /// Common-stream SINR target in the feasibility search.
    XiCommon,
    /// Private-stream SINR target in the feasibility search.
    XiPrivate,
}

/// An `(M + 1)`-dimensional robust-constraint block with its multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiBlock {
    pub kind: LmiKind,
    pub user: usize,
    pub multiplier: usize,
    pub block: HermitianBlock,
}

impl LmiBlock {
    pub fn size(&self) -> usize {
        self.block.size
    }

    /// Adds the PSD block and `multiplier >= 0` to `p`.
    pub fn install(self, p: &mut ConicProblem) {
        p.add_nonneg(self.multiplier);
        p.add_psd(self.block);
    }
}

fn s_block(
    kind: LmiKind,
    user: usize,
    a: &HermitianAffine,
    h_hat: &CVector,
    delta: f64,
    corner: AffineExpr,
    multiplier: usize,
    sign: f64,
) -> LmiBlock {
    let m = a.size;
    assert_eq!(h_hat.len(), m);
    let mut b = HermitianBlock::new(format!("{kind:?}[{user}]"), m + 1);
    let tau2 = congruence_scale(h_hat, delta);
    let tau = tau2.sqrt();
    let d2 = sign * tau2;
    for r in 0..m {
        for c in r..m {
            let e = a.get(r, c);
            let mut re = e.re.clone() * d2;
            if r == c {
                re.add_term(multiplier, 1.0);
                b.add_real(r, c, re);
            } else {
                b.add(r, c, re, e.im.clone() * d2);
            }
        }
    }
    for (r, e) in a.mul_vec(h_hat).into_iter().enumerate() {
        b.add(r, m, e.re * (sign * tau), e.im * (sign * tau));
    }
    let mut br = a.quad(h_hat) * sign + corner;
    br.add_term(multiplier, if tau2 > 0.0 { -delta * delta / tau2 } else { 0.0 });
    b.add_real(m, m, br);
    LmiBlock {
        kind,
        user,
        multiplier,
        block: b,
    }
}

/// `tau^2` of the congruence applied to every block; `mu = lambda tau^2`.
pub fn congruence_scale(h_hat: &CVector, delta: f64) -> f64 {
    let n = h_hat.norm();
    if n > 0.0 {
        delta / n
    } else {
        delta
    }
}

/// Certifies `h^H A h >= threshold` on the ball around `h_hat`.
pub fn lmi_lower_bound(
    kind: LmiKind,
    user: usize,
    a: &HermitianAffine,
    h_hat: &CVector,
    delta: f64,
    threshold: AffineExpr,
    multiplier: usize,
) -> LmiBlock {
    s_block(kind, user, a, h_hat, delta, -threshold, multiplier, 1.0)
}

/// Certifies `h^H B h <= cap` on the ball around `h_hat`.
pub fn lmi_upper_bound(
    kind: LmiKind,
    user: usize,
    b: &HermitianAffine,
    h_hat: &CVector,
    delta: f64,
    cap: AffineExpr,
    multiplier: usize,
) -> LmiBlock {
    s_block(kind, user, b, h_hat, delta, cap, multiplier, -1.0)
}
