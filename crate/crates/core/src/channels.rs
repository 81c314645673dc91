//! Channel estimates, uncertainty balls and perturbation sampling.
//!
//! The transmitter knows `h_hat_k` and that the true channel satisfies
//! `|h_k - h_hat_k| <= delta_k`. Nothing is assumed about the error
//! distribution inside the ball; [`sample_perturbation`] draws uniformly
//! from the ball or its boundary for empirical checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, complex_normal_vector, serde_cvec, CVector, C64};

/// Channel estimates with per-user uncertainty radii.
///
/// Serialized as `{"M": .., "K": .., "h_hat": [[[re, im], ..], ..], "delta": [..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(with = "serde_cvec::list")]
    pub h_hat: Vec<CVector>,
    pub delta: Vec<f64>,
}

impl ChannelSet {
    pub fn new(h_hat: Vec<CVector>, delta: Vec<f64>) -> Result<Self> {
        let m = h_hat.first().map(|h| h.len()).unwrap_or(0);
        let set = Self {
            m,
            k: h_hat.len(),
            h_hat,
            delta,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 {
            return Err(Error::Channel("empty channel set".into()));
        }
        if self.h_hat.len() != self.k || self.delta.len() != self.k {
            return Err(Error::Channel(format!(
                "expected {} channels and radii, got {} and {}",
                self.k,
                self.h_hat.len(),
                self.delta.len()
            )));
        }
        if let Some((i, h)) = self.h_hat.iter().enumerate().find(|(_, h)| h.len() != self.m) {
            return Err(Error::Channel(format!(
                "channel {i} has length {}, expected {}",
                h.len(),
                self.m
            )));
        }
        if let Some(d) = self.delta.iter().find(|&&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::Channel(format!("negative radius: {d}")));
        }
        Ok(())
    }

    /// Same estimates with every radius replaced.
    pub fn with_delta(&self, delta: &[f64]) -> Self {
        Self {
            delta: delta.to_vec(),
            ..self.clone()
        }
    }

    pub fn with_uniform_delta(&self, delta: f64) -> Self {
        self.with_delta(&vec![delta; self.k])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("channel set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(s).map_err(|e| Error::Channel(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }
}

/// Estimates together with one draw of the true channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub h_true: Vec<CVector>,
    pub h_hat: Vec<CVector>,
    pub delta: Vec<f64>,
}

impl ChannelRealization {
    /// Draws `h_k = h_hat_k + e_k` with `e_k` from [`sample_perturbation`].
    pub fn draw<R: Rng + ?Sized>(set: &ChannelSet, mode: PerturbationMode, rng: &mut R) -> Self {
        let h_true = set
            .h_hat
            .iter()
            .zip(&set.delta)
            .map(|(h, &d)| h + sample_perturbation_with(d, set.m, mode, rng))
            .collect();
        Self {
            h_true,
            h_hat: set.h_hat.clone(),
            delta: set.delta.clone(),
        }
    }
}

/// `K` estimates with i.i.d. `CN(0, 1)` entries and zero radii.
pub fn sample_rayleigh(m: usize, k: usize, seed: u64) -> ChannelSet {
    assert!(m >= 1 && k >= 1, "need at least one antenna and one user");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_hat = (0..k).map(|_| complex_normal_vector(&mut rng, m)).collect();
    ChannelSet {
        m,
        k,
        h_hat,
        delta: vec![0.0; k],
    }
}

/// Two users on a uniform linear array: `h1 = [1, 1, 1, 1]^H`,
/// `h2 = gamma [1, e^{j theta}, e^{j2 theta}, e^{j3 theta}]^H`.
///
/// The conjugate transpose makes the stored entries of `h2` equal to
/// `gamma e^{-j m theta}`.
pub fn correlated_pair(m: usize, gamma: f64, theta: f64, delta: f64) -> Result<ChannelSet> {
    if m != 4 {
        return Err(Error::Channel(format!("the correlated pair needs M = 4, got {m}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Channel(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let h1 = CVector::from_element(4, C64::new(1.0, 0.0));
    let h2 = CVector::from_fn(4, |i, _| C64::from_polar(gamma, -(i as f64) * theta));
    ChannelSet::new(vec![h1, h2], vec![delta; 2])
}

/// `|h1^H h2| / (|h1| |h2|)`.
pub fn correlation(a: &CVector, b: &CVector) -> f64 {
    linalg::inner(a, b).norm() / (a.norm() * b.norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationMode {
    /// Uniform in the ball.
    Interior,
    /// Uniform on the sphere of radius `delta`.
    Boundary,
}

/// One error vector with `|e| <= delta`, seeded.
pub fn sample_perturbation(delta: f64, m: usize, seed: u64, mode: PerturbationMode) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_perturbation_with(delta, m, mode, &mut rng)
}

/// As [`sample_perturbation`] but drawing from `rng`.
///
/// The complex `M`-ball is the real `2M`-ball, so a uniform radius is
/// `delta U^{1/(2M)}`.
pub fn sample_perturbation_with<R: Rng + ?Sized>(
    delta: f64,
    m: usize,
    mode: PerturbationMode,
    rng: &mut R,
) -> CVector {
    debug_assert!(delta >= 0.0);
    if delta == 0.0 {
        return CVector::zeros(m);
    }
    let dir = loop {
        let g = complex_normal_vector(rng, m);
        let n = g.norm();
        if n > 1e-300 {
            break g.unscale(n);
        }
    };
    let radius = match mode {
        PerturbationMode::Boundary => delta,
        PerturbationMode::Interior => delta * rng.random::<f64>().powf(1.0 / (2 * m) as f64),
    };
    let mut e = dir.scale(radius);
    // Rounding can leave the norm an ulp above the radius.
    while e.norm() > delta {
        e = e.scale(1.0 - f64::EPSILON);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_is_deterministic() {
        assert_eq!(sample_rayleigh(4, 2, 7), sample_rayleigh(4, 2, 7));
        assert_ne!(sample_rayleigh(4, 2, 7), sample_rayleigh(4, 2, 8));
    }

    #[test]
    fn rayleigh_moments() {
        let set = sample_rayleigh(10, 10_000, 1);
        let n = (set.m * set.k) as f64;
        let entries = || set.h_hat.iter().flat_map(|h| h.iter());
        let mean_re = entries().map(|z| z.re).sum::<f64>() / n;
        let mean_im = entries().map(|z| z.im).sum::<f64>() / n;
        let var = entries().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!(mean_re.abs() < 0.02 && mean_im.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn correlated_pair_examples() {
        let theta = 7.0 * std::f64::consts::PI / 36.0;
        let set = correlated_pair(4, 0.9, theta, 0.0).unwrap();
        assert!((set.h_hat[1].norm() - 1.8).abs() < 1e-14);
        // |sum_m e^{j m theta}| / 4 in 40 digits: 0.78123918987847378.
        let rho = correlation(&set.h_hat[0], &set.h_hat[1]);
        assert!((rho - 0.781_239_189_878_473_8).abs() < 1e-12);

        let aligned = correlated_pair(4, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(aligned.h_hat[0], aligned.h_hat[1]);

        assert!(correlated_pair(3, 0.9, theta, 0.0).is_err());
        assert!(correlated_pair(4, 0.0, theta, 0.0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let set = sample_rayleigh(3, 2, 4).with_uniform_delta(0.01);
        let json = set.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["M"], 3);
        assert_eq!(v["h_hat"][1][2].as_array().unwrap().len(), 2);
        assert_eq!(ChannelSet::from_json(&json).unwrap(), set);
        assert!(ChannelSet::from_json(r#"{"M":2,"K":1,"h_hat":[[[1,0]]],"delta":[0]}"#).is_err());
    }

    #[test]
    fn perturbation_examples() {
        assert_eq!(sample_perturbation(0.0, 4, 1, PerturbationMode::Interior), CVector::zeros(4));
        for seed in 0..100 {
            let e = sample_perturbation(0.01, 4, seed, PerturbationMode::Boundary);
            assert!((e.norm() - 0.01).abs() < 1e-12);
            assert!(e.norm() <= 0.01 + 1e-15);
        }
    }

    #[test]
    fn interior_median_radius() {
        let m = 3;
        let delta = 0.2;
        let median = delta / 2f64.powf(1.0 / (2 * m) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut inside = 0;
        for _ in 0..n {
            let e = sample_perturbation_with(delta, m, PerturbationMode::Interior, &mut rng);
            assert!(e.norm() <= delta + 1e-15);
            if e.norm() <= median {
                inside += 1;
            }
        }
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn realization_stays_in_ball() {
        let set = sample_rayleigh(4, 3, 2).with_uniform_delta(0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mode in [PerturbationMode::Interior, PerturbationMode::Boundary] {
            let r = ChannelRealization::draw(&set, mode, &mut rng);
            for k in 0..3 {
                assert!((&r.h_true[k] - &r.h_hat[k]).norm() <= 0.05 + 1e-15);
            }
        }
    }
}
