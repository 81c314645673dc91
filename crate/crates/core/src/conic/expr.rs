use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Sparse affine function `constant + sum coef * x[var]`.
///
/// Terms are kept sorted by variable with duplicates merged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: usize, coef: f64) -> Self {
        let mut e = Self::zero();
        e.add_term(v, coef);
        e
    }

    /// Sum of `coef * x[v]` over the given pairs.
    pub fn from_terms(terms: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut e = Self::zero();
        for (v, c) in terms {
            e.add_term(v, c);
        }
        e
    }

    pub fn add_term(&mut self, v: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.terms.binary_search_by_key(&v, |&(i, _)| i) {
            Ok(pos) => {
                self.terms[pos].1 += coef;
                if self.terms[pos].1 == 0.0 {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => self.terms.insert(pos, (v, coef)),
        }
    }

    pub fn add_scaled(&mut self, other: &AffineExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for &(v, c) in &other.terms {
            self.add_term(v, c * scale);
        }
        self.constant += other.constant * scale;
    }

    pub fn coef(&self, v: usize) -> f64 {
        self.terms
            .binary_search_by_key(&v, |&(i, _)| i)
            .map(|pos| self.terms[pos].1)
            .unwrap_or(0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.last().map(|&(v, _)| v)
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|&(_, c)| c.is_finite())
    }
}

impl AddAssign for AffineExpr {
    fn add_assign(&mut self, rhs: Self) {
        self.add_scaled(&rhs, 1.0);
    }
}

impl SubAssign for AffineExpr {
    fn sub_assign(&mut self, rhs: Self) {
        self.add_scaled(&rhs, -1.0);
    }
}

impl Add for AffineExpr {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl Sub for AffineExpr {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl Add<f64> for AffineExpr {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.constant += rhs;
        self
    }
}

impl Sub<f64> for AffineExpr {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for AffineExpr {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        if rhs == 0.0 {
            return Self::zero();
        }
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for AffineExpr {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}
