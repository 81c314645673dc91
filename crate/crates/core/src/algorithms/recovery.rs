use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;

use crate::channels::ChannelSet;
use crate::config::{BeamformerSet, LiftedSolution, SystemConfig};
use crate::linalg::{self, complex_normal_vector, CMatrix, CVector, C64};
use crate::schemes::bounds::{evaluate, rebalance, Evaluation};
use crate::sdr::Formulation;

/// Principal component `sqrt(l1) u1` of a PSD matrix and the ratio `l2 / l1`
/// (zero when `l1 <= 0`).
pub fn extract_rank_one(w: &CMatrix) -> (CVector, f64) {
    let (vals, vecs) = linalg::eigh_desc(w);
    let l1 = vals[0];
    if !(l1 > 0.0) {
        return (CVector::zeros(w.nrows()), 0.0);
    }
    let l2 = vals.get(1).copied().unwrap_or(0.0).max(0.0);
    let v = vecs.column(0).into_owned() * C64::new(l1.sqrt(), 0.0);
    (v, l2 / l1)
}

/// One draw `w = U diag(sqrt(l_+)) g` with `g ~ CN(0, I)`, so `E[w w^H] = W`.
pub fn sample_from_covariance<R: Rng + ?Sized>(w: &CMatrix, rng: &mut R) -> CVector {
    let (vals, vecs) = linalg::eigh_desc(w);
    let g = complex_normal_vector(rng, w.nrows());
    let scaled = CVector::from_iterator(
        g.len(),
        g.iter().zip(&vals).map(|(z, &l)| z * l.max(0.0).sqrt()),
    );
    vecs * scaled
}

#[derive(Clone, Debug)]
pub struct RandomizedDesign {
    pub design: BeamformerSet,
    pub evaluation: Evaluation,
    /// Index of the winning candidate; 0 is the principal-eigenvector set.
    pub candidate: usize,
}

/// Scales every beamformer by a common factor so the total power equals
/// the budget (a hair below it, to absorb rounding).
fn fill_power(b: &BeamformerSet, p_max: f64) -> BeamformerSet {
    let p = b.power();
    if !(p > 0.0) {
        return b.clone();
    }
    b.scaled((p_max * (1.0 - 1e-12) / p).sqrt())
}

/// Gaussian randomization with certified evaluation.
///
/// Candidate 0 is the set of principal eigenvectors; candidates
/// `1..=draws` sample every beamformer from its lifted covariance. Each set
/// is scaled to the power budget, given the best common-rate split, and
/// scored by its certified min rate. Feasible candidates beat infeasible
/// ones.
pub fn gaussian_randomize(
    lifted: &LiftedSolution,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
    draws: usize,
    seed: u64,
) -> RandomizedDesign {
    let k = cfg.users;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let principal = BeamformerSet {
        w_c: if form.rate_splitting {
            extract_rank_one(&lifted.w_c).0
        } else {
            CVector::zeros(cfg.antennas)
        },
        w_k: lifted.w_k.iter().map(|w| extract_rank_one(w).0).collect(),
        c: vec![0.0; k],
    };
    let mut best: Option<RandomizedDesign> = None;
    for i in 0..=draws {
        let raw = if i == 0 {
            principal.clone()
        } else {
            BeamformerSet {
                w_c: if form.rate_splitting {
                    sample_from_covariance(&lifted.w_c, &mut rng)
                } else {
                    CVector::zeros(cfg.antennas)
                },
                w_k: lifted.w_k.iter().map(|w| sample_from_covariance(w, &mut rng)).collect(),
                c: vec![0.0; k],
            }
        };
        let design = rebalance(&fill_power(&raw, cfg.p_max), ch, cfg, form);
        let evaluation = evaluate(&design, ch, cfg, form);
        let better = match &best {
            None => true,
            Some(b) => {
                (evaluation.feasible, evaluation.min_rate) > (b.evaluation.feasible, b.evaluation.min_rate)
            }
        };
        if better {
            best = Some(RandomizedDesign {
                design,
                evaluation,
                candidate: i,
            });
        }
    }
    best.expect("at least one candidate")
}
