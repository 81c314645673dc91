//! Complex vector and Hermitian matrix helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// `a^H b`.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

pub fn norm(a: &CVector) -> f64 {
    a.norm()
}

pub fn norm_sqr(a: &CVector) -> f64 {
    a.norm_squared()
}

/// `w w^H`.
pub fn outer(w: &CVector) -> CMatrix {
    w * w.adjoint()
}

/// Real part of `h^H A h`; exact for Hermitian `A`.
pub fn quad_form(h: &CVector, a: &CMatrix) -> f64 {
    h.dotc(&(a * h)).re
}

pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Frobenius norm of `A - A^H`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the eigenvectors.
pub fn eigh_desc(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    eigh_desc(a).0.last().copied().unwrap_or(0.0)
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue_real(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()).scale(0.5);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// One draw of `CN(0, 1)`: independent real and imaginary parts with
/// variance 1/2 each.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| complex_normal(rng))
}

/// SplitMix64 finalizer, used to derive independent per-item seeds from a
/// base seed so parallel work does not depend on scheduling order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Serde adapters that write complex vectors as `[[re, im], ...]`.
pub mod serde_cvec {
    use super::{CVector, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_iterator(
            pairs.len(),
            pairs.into_iter().map(|[re, im]| C64::new(re, im)),
        ))
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[CVector], s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<Vec<[f64; 2]>> = v
                .iter()
                .map(|x| x.iter().map(|z| [z.re, z.im]).collect())
                .collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVector>, D::Error> {
            let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
            Ok(rows
                .into_iter()
                .map(|r| {
                    CVector::from_iterator(r.len(), r.into_iter().map(|[re, im]| C64::new(re, im)))
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_sorts_descending_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CMatrix::from_fn(3, 3, |_, _| complex_normal(&mut rng));
        let h = hermitian_part(&a);
        let (vals, vecs) = eigh_desc(&h);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            3,
            vals.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - h).norm() < 1e-10);
    }

    #[test]
    fn quad_form_of_outer_is_squared_inner() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = complex_normal_vector(&mut rng, 4);
        let w = complex_normal_vector(&mut rng, 4);
        let lhs = quad_form(&h, &outer(&w));
        assert!((lhs - inner(&h, &w).norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
