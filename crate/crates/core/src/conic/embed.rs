use serde::{Deserialize, Serialize};

use super::{AffineExpr, HermitianBlock};

/// Real symmetric affine block; `entries` hold `(row, col, expr)` with
/// `row <= col`, missing entries are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricBlock {
    pub size: usize,
    pub entries: Vec<(usize, usize, AffineExpr)>,
}

impl SymmetricBlock {
    pub fn eval(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.size, self.size);
        for (r, c, e) in &self.entries {
            let v = e.eval(x);
            m[(*r, *c)] = v;
            m[(*c, *r)] = v;
        }
        m
    }
}

/// `[[Re H, -Im H], [Im H, Re H]]`, which is PSD exactly when `H` is.
/// Each eigenvalue of `H` appears twice in the embedding.
///
/// Blocks without imaginary parts are returned at their own size, since
/// the duplicate copy carries no information.
pub fn real_embedding(h: &HermitianBlock) -> SymmetricBlock {
    if h.is_real() {
        return SymmetricBlock {
            size: h.size,
            entries: h.entries.iter().map(|e| (e.row, e.col, e.re.clone())).collect(),
        };
    }
    let n = h.size;
    let mut entries = Vec::with_capacity(4 * h.entries.len());
    for e in &h.entries {
        let (i, j) = (e.row, e.col);
        entries.push((i, j, e.re.clone()));
        entries.push((n + i, n + j, e.re.clone()));
        if !e.im.is_zero() {
            // Upper-right block holds -Im H; its (i, n + j) and (j, n + i)
            // positions come from H_ij and H_ji = conj(H_ij).
            entries.push((i, n + j, -e.im.clone()));
            entries.push((j, n + i, e.im.clone()));
        }
    }
    SymmetricBlock {
        size: 2 * n,
        entries,
    }
}
