//! Point-to-surface loss: samples of each mesh against the exact surface of
//! the other.

use crate::error::Result;
use crate::mesh::Mesh;
use crate::sampler::{sample_surface, SampledPointSet};
use crate::scalar::Real;
use crate::tridist::mesh_has_valid_face;
use crate::vec3::Vec3;

use super::chamfer::SeedPair;
use super::nearest::nearest_faces;
use super::GradientBundle;

/// `sum_{p in S} min_f d(p, f_pred) + sum_{q in S_hat} min_f d(q, f_target)`
/// with `d` the squared point-triangle distance.
pub fn loss_pts<T: Real>(
    pred: &Mesh<T>,
    target: &Mesh<T>,
    n: usize,
    seeds: impl Into<SeedPair>,
) -> Result<GradientBundle<T>> {
    let seeds = seeds.into();
    let s_hat = sample_surface(pred, n, seeds.pred)?;
    let s = sample_surface(target, n, seeds.target)?.positions();
    pts_from_samples(pred, &s_hat, target, &s)
}

/// [`loss_pts`] with the draws fixed. `target_points` lie on `target` and
/// `pred_samples` on `pred`.
///
/// Gradients hold the nearest face and its `(s, t)` fixed. In the first term
/// the closest point `c = sum w_k v_k` moves with the predicted face, so
/// vertex `k` receives `-2 (p - c) w_k`; in the second the sample itself
/// moves and hands `2 (q - c)` back through its own weights.
pub fn pts_from_samples<T: Real>(
    pred: &Mesh<T>,
    pred_samples: &SampledPointSet<T>,
    target: &Mesh<T>,
    target_points: &[Vec3<T>],
) -> Result<GradientBundle<T>> {
    if !mesh_has_valid_face(pred) || !mesh_has_valid_face(target) {
        return Err(crate::error::Error::ZeroArea);
    }
    let two = T::lit(2.0);
    let mut bundle = GradientBundle::zeros(pred.num_vertices());
    let mut term1 = T::zero();
    for (&p, q) in target_points.iter().zip(nearest_faces(target_points, pred)) {
        term1 += q.sq_dist;
        let c = q.closest_point(pred);
        bundle.scatter(pred.faces()[q.face], q.barycentric(), (c - p).scale(two));
    }
    let positions = pred_samples.positions();
    let mut term2 = T::zero();
    for ((sample, &x), q) in pred_samples
        .samples
        .iter()
        .zip(&positions)
        .zip(nearest_faces(&positions, target))
    {
        term2 += q.sq_dist;
        let c = q.closest_point(target);
        bundle.scatter(
            pred.faces()[sample.face],
            sample.weights(),
            (x - c).scale(two),
        );
    }
    bundle.value = term1 + term2;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;

    #[test]
    fn identical_meshes_are_zero_for_any_seed() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let g = loss_pts(&m, &m, 500, 11).unwrap();
        assert!(g.value < 1e-9, "{}", g.value);
    }

    #[test]
    fn parallel_squares() {
        let sq = Primitive::Grid { nx: 1, ny: 1 }.build::<f64>();
        for d in [0.1, 0.25] {
            let up = sq.translated(Vec3::from_f64(0.0, 0.0, d));
            let n = 200;
            let g = loss_pts(&up, &sq, n, 3).unwrap();
            let want = 2.0 * n as f64 * d * d;
            assert!(((g.value - want) / want).abs() < 1e-9);
        }
    }
}
