//! Batched nearest-point and nearest-face queries. Small inputs are scanned
//! directly, larger ones go through the trees in `spatial`; both give the
//! same answer, ties included.

use rayon::prelude::*;

use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::spatial::{PointTree, TriangleBvh};
use crate::tridist::{point_triangle_sq_dist_robust, MeshQuery, TriangleParam};
use crate::vec3::Vec3;

const BRUTE_FORCE_MAX_WORK: usize = 1 << 14;
const PARALLEL_MIN_QUERIES: usize = 2048;

fn map_queries<T: Real, R: Send>(queries: &[Vec3<T>], f: impl Fn(Vec3<T>) -> R + Sync) -> Vec<R> {
    if queries.len() >= PARALLEL_MIN_QUERIES {
        queries.par_iter().map(|&q| f(q)).collect()
    } else {
        queries.iter().map(|&q| f(q)).collect()
    }
}

/// For each query, `(squared distance, index)` of its nearest point.
/// `points` must be non-empty.
pub(crate) fn nearest_points<T: Real>(queries: &[Vec3<T>], points: &[Vec3<T>]) -> Vec<(T, usize)> {
    if queries.len() * points.len() <= BRUTE_FORCE_MAX_WORK {
        return queries
            .iter()
            .map(|&q| {
                let mut best = (q.dist_squared(points[0]), 0);
                for (i, &p) in points.iter().enumerate().skip(1) {
                    let d = q.dist_squared(p);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                best
            })
            .collect();
    }
    let tree = PointTree::new(points);
    map_queries(queries, |q| tree.nearest(q).expect("non-empty point set"))
}

/// For each query, its nearest face on `mesh`. The mesh must have faces.
pub(crate) fn nearest_faces<T: Real>(queries: &[Vec3<T>], mesh: &Mesh<T>) -> Vec<MeshQuery<T>> {
    if queries.len() * mesh.num_faces() <= BRUTE_FORCE_MAX_WORK {
        let tris: Vec<_> = (0..mesh.num_faces())
            .map(|f| TriangleParam::from_face(mesh, f))
            .collect();
        return queries
            .iter()
            .map(|&q| {
                let mut best: Option<MeshQuery<T>> = None;
                for (face, tri) in tris.iter().enumerate() {
                    let r = point_triangle_sq_dist_robust(q, tri);
                    if best.is_none_or(|b| r.sq_dist < b.sq_dist) {
                        best = Some(MeshQuery {
                            sq_dist: r.sq_dist,
                            face,
                            s: r.s,
                            t: r.t,
                        });
                    }
                }
                best.expect("mesh has faces")
            })
            .collect();
    }
    let bvh = TriangleBvh::new(mesh);
    map_queries(queries, |q| bvh.nearest(q).expect("mesh has faces"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;
    use crate::sampler::sample_surface;

    #[test]
    fn direct_and_tree_paths_agree() {
        let m = Primitive::IcoSphere { subdiv: 2 }.build::<f64>();
        let q = sample_surface(&m.scaled(Vec3::from_f64(1.2, 0.8, 1.0)), 3000, 5)
            .unwrap()
            .positions();
        let pts = sample_surface(&m, 400, 6).unwrap().positions();
        let fast = nearest_points(&q, &pts);
        for (k, &p) in q.iter().enumerate().step_by(7) {
            assert_eq!(fast[k], nearest_points(&[p], &pts)[0]);
        }
        let fast = nearest_faces(&q, &m);
        for (k, &p) in q.iter().enumerate().step_by(7) {
            assert_eq!(fast[k], nearest_faces(&[p], &m)[0]);
        }
    }
}
