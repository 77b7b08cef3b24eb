//! Central finite-difference checks of analytic gradients, and margins that
//! tell how close a configuration sits to a switch of one of the discrete
//! choices the gradients hold fixed.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::Result;
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::tridist::{point_triangle_sq_dist_robust, TriangleParam};
use crate::vec3::Vec3;

use super::GradientBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_rel_err: f64,
    pub worst_vertex: usize,
    pub worst_axis: usize,
    pub coordinates: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `loss(mesh).d_vertices` against central differences with the
/// given step over every vertex coordinate.
///
/// The error at a coordinate is `|a - f| / max(|a|, |f|, 1e-3 * max|a|)`,
/// where `a` is analytic and `f` numeric; the floor keeps coordinates whose
/// true derivative is nearly zero from amplifying rounding noise.
pub fn check_gradient<T, F>(
    loss: F,
    mesh: &Mesh<T>,
    step: f64,
    tolerance: f64,
) -> Result<GradientCheck>
where
    T: Real,
    F: Fn(&Mesh<T>) -> Result<GradientBundle<T>>,
{
    let analytic = loss(mesh)?.flat_gradient();
    let scale = analytic.iter().fold(0.0f64, |m, a| m.max(a.as_f64().abs()));
    let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
    let h = T::lit(step);
    let mut verts = mesh.vertices().to_vec();
    let mut worst = (0.0f64, 0usize, 0usize);
    for v in 0..verts.len() {
        for axis in 0..3 {
            let orig = verts[v][axis];
            *verts[v].component_mut(axis) = orig + h;
            let plus = loss(&mesh.with_vertices(verts.clone())?)?.value;
            *verts[v].component_mut(axis) = orig - h;
            let minus = loss(&mesh.with_vertices(verts.clone())?)?.value;
            *verts[v].component_mut(axis) = orig;
            let numeric = ((plus - minus) / (h + h)).as_f64();
            let a = analytic[3 * v + axis].as_f64();
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if err > worst.0 || err.is_nan() {
                worst = (err, v, axis);
            }
        }
    }
    Ok(GradientCheck {
        max_rel_err: worst.0,
        worst_vertex: worst.1,
        worst_axis: worst.2,
        coordinates: 3 * verts.len(),
        tolerance,
        passed: worst.0 < tolerance,
    })
}

/// Smallest gap, over both directions, between a point's nearest and
/// second-nearest squared distance in the other set. Infinite when a set has
/// a single point.
pub fn chamfer_tie_margin<T: Real>(s: &[Vec3<T>], s_hat: &[Vec3<T>]) -> T {
    one_sided_point_margin(s, s_hat).min(one_sided_point_margin(s_hat, s))
}

fn one_sided_point_margin<T: Real>(queries: &[Vec3<T>], points: &[Vec3<T>]) -> T {
    let mut margin = T::infinity();
    for &q in queries {
        let (mut d1, mut d2) = (T::infinity(), T::infinity());
        for &p in points {
            let d = q.dist_squared(p);
            if d < d1 {
                d2 = d1;
                d1 = d;
            } else if d < d2 {
                d2 = d;
            }
        }
        margin = margin.min(d2 - d1);
    }
    margin
}

/// Smallest gap between a point's nearest face distance and the nearest
/// distance attained at a different closest point. Faces meeting at the
/// same closest point (a shared edge or vertex) give the same gradient and
/// do not count as a tie.
pub fn surface_tie_margin<T: Real>(points: &[Vec3<T>], mesh: &Mesh<T>) -> T {
    let tris: Vec<_> = (0..mesh.num_faces())
        .map(|f| TriangleParam::from_face(mesh, f))
        .collect();
    let same = T::lit(1e-18);
    let mut margin = T::infinity();
    for &p in points {
        let hits: Vec<(T, Vec3<T>)> = tris
            .iter()
            .map(|t| {
                let q = point_triangle_sq_dist_robust(p, t);
                (q.sq_dist, t.point_at(q.s, q.t))
            })
            .collect();
        let (d1, c1) =
            hits.iter().copied().fold(
                (T::infinity(), Vec3::zero()),
                |b, h| if h.0 < b.0 { h } else { b },
            );
        let d2 = hits
            .iter()
            .filter(|h| h.1.dist_squared(c1) > same)
            .fold(T::infinity(), |m, h| m.min(h.0));
        margin = margin.min(d2 - d1);
    }
    margin
}

/// Smallest gap between the largest and second-largest entry of any column.
pub fn maxpool_tie_margin<T: Real>(h: ArrayView2<T>) -> T {
    let mut margin = T::infinity();
    for col in h.columns() {
        let (mut a, mut b) = (T::neg_infinity(), T::neg_infinity());
        for &v in col {
            if v > a {
                b = a;
                a = v;
            } else if v > b {
                b = v;
            }
        }
        margin = margin.min(a - b);
    }
    margin
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::losses::loss_edge;
    use crate::mesh::Primitive;

    #[test]
    fn edge_loss_passes() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let r = check_gradient(|m| Ok(loss_edge(m)), &m, 1e-5, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.coordinates, 126);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let m = Primitive::Tetrahedron.build::<f64>();
        let bad = |m: &Mesh<f64>| {
            let mut g = loss_edge(m);
            g.d_vertices[2].y += 0.5;
            Ok(g)
        };
        let r = check_gradient(bad, &m, 1e-5, 1e-4).unwrap();
        assert!(!r.passed);
        assert_eq!((r.worst_vertex, r.worst_axis), (2, 1));
    }

    #[test]
    fn margins() {
        let a = [Vec3::<f64>::zero()];
        let b = [
            Vec3::from_f64(1.0, 0.0, 0.0),
            Vec3::from_f64(-1.0, 0.0, 0.0),
        ];
        assert_eq!(chamfer_tie_margin(&a, &b), 0.0);
        let c = [Vec3::from_f64(1.0, 0.0, 0.0), Vec3::from_f64(0.0, 2.0, 0.0)];
        assert_eq!(chamfer_tie_margin(&a, &c), 3.0);
        assert_eq!(
            maxpool_tie_margin(array![[1.0, 4.0], [3.0, 4.5]].view()),
            0.5
        );
        // above a cube edge the two incident faces share the closest point
        let cube = Primitive::Cube.build::<f64>();
        let p = Vec3::from_f64(0.9, 0.0, 0.9);
        assert!(surface_tie_margin(&[p], &cube) > 0.1);
        // the cube center is equidistant from opposite sides
        assert_eq!(surface_tie_margin(&[Vec3::zero()], &cube), 0.0);
    }
}
