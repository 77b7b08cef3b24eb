//! Chamfer distance on point sets and the two losses built on it: vertices
//! against target samples, and samples against samples.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::rng::derive_seed;
use crate::sampler::{sample_surface, SampledPointSet};
use crate::scalar::Real;
use crate::vec3::Vec3;

use super::nearest::nearest_points;
use super::GradientBundle;

/// Value of the symmetric Chamfer sum and its gradient with respect to each
/// point of both sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamferResult<T> {
    pub value: T,
    pub grad_s: Vec<Vec3<T>>,
    pub grad_s_hat: Vec<Vec3<T>>,
}

/// `sum_{p in S} min_q |p - q|^2 + sum_{q in S_hat} min_p |p - q|^2`.
///
/// Each nearest-neighbor pairing is held fixed when differentiating.
pub fn chamfer_points<T: Real>(s: &[Vec3<T>], s_hat: &[Vec3<T>]) -> Result<ChamferResult<T>> {
    if s.is_empty() {
        return Err(Error::EmptyInput("first point set"));
    }
    if s_hat.is_empty() {
        return Err(Error::EmptyInput("second point set"));
    }
    let mut grad_s = vec![Vec3::zero(); s.len()];
    let mut grad_s_hat = vec![Vec3::zero(); s_hat.len()];
    let forward = nearest_points(s, s_hat);
    let backward = nearest_points(s_hat, s);
    let mut fwd = T::zero();
    for (i, &(d, j)) in forward.iter().enumerate() {
        fwd += d;
        let g = (s[i] - s_hat[j]).scale(T::lit(2.0));
        grad_s[i] += g;
        grad_s_hat[j] -= g;
    }
    let mut bwd = T::zero();
    for (j, &(d, i)) in backward.iter().enumerate() {
        bwd += d;
        let g = (s_hat[j] - s[i]).scale(T::lit(2.0));
        grad_s_hat[j] += g;
        grad_s[i] -= g;
    }
    Ok(ChamferResult {
        value: fwd + bwd,
        grad_s,
        grad_s_hat,
    })
}

/// Chamfer between target samples and the predicted vertex positions.
pub fn loss_vtp<T: Real>(pred: &Mesh<T>, target_points: &[Vec3<T>]) -> Result<GradientBundle<T>> {
    let c = chamfer_points(target_points, pred.vertices())?;
    Ok(GradientBundle {
        value: c.value,
        d_vertices: c.grad_s_hat,
    })
}

/// Sampling seeds for the predicted and target surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPair {
    pub pred: u64,
    pub target: u64,
}

const PRED_LABEL: u64 = 0x5052_4544;
const TARGET_LABEL: u64 = 0x5441_5247;

impl SeedPair {
    /// Two independent sub-seeds of one master seed.
    pub fn derived(seed: u64) -> Self {
        Self {
            pred: derive_seed(seed, PRED_LABEL),
            target: derive_seed(seed, TARGET_LABEL),
        }
    }

    /// The same seed on both sides, so identical meshes get identical
    /// samples.
    pub fn shared(seed: u64) -> Self {
        Self {
            pred: seed,
            target: seed,
        }
    }
}

impl From<u64> for SeedPair {
    fn from(seed: u64) -> Self {
        Self::derived(seed)
    }
}

/// Chamfer between `n` samples of each surface.
pub fn loss_ptp<T: Real>(
    pred: &Mesh<T>,
    target: &Mesh<T>,
    n: usize,
    seeds: impl Into<SeedPair>,
) -> Result<GradientBundle<T>> {
    let seeds = seeds.into();
    let s_hat = sample_surface(pred, n, seeds.pred)?;
    let s = sample_surface(target, n, seeds.target)?.positions();
    ptp_from_samples(pred, &s_hat, &s)
}

/// [`loss_ptp`] with the draws fixed: `pred_samples` must have been drawn
/// on (or repositioned onto) `pred`.
pub fn ptp_from_samples<T: Real>(
    pred: &Mesh<T>,
    pred_samples: &SampledPointSet<T>,
    target_points: &[Vec3<T>],
) -> Result<GradientBundle<T>> {
    let c = chamfer_points(target_points, &pred_samples.positions())?;
    let mut bundle = GradientBundle::zeros(pred.num_vertices());
    bundle.value = c.value;
    for (sample, g) in pred_samples.samples.iter().zip(&c.grad_s_hat) {
        bundle.scatter(pred.faces()[sample.face], sample.weights(), *g);
    }
    Ok(bundle)
}
