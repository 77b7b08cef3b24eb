//! Shape regularizers: squared edge length and change of uniform Laplacian
//! coordinates.

use crate::error::{Error, Result};
use crate::mesh::{laplacian_with, Mesh};
use crate::scalar::Real;

use super::GradientBundle;

/// `sum over edges |v_i - v_j|^2`.
pub fn loss_edge<T: Real>(mesh: &Mesh<T>) -> GradientBundle<T> {
    let v = mesh.vertices();
    let mut bundle = GradientBundle::zeros(v.len());
    let two = T::lit(2.0);
    for &(i, j) in mesh.edges().iter() {
        let e = v[i] - v[j];
        bundle.value += e.norm_squared();
        bundle.d_vertices[i] += e.scale(two);
        bundle.d_vertices[j] -= e.scale(two);
    }
    bundle
}

/// `sum_p |delta'_p - delta_p|^2` where `delta` are the Laplacian
/// coordinates of `before` and `delta'` those of `after`. Differentiated with
/// respect to `after`.
pub fn loss_laplacian<T: Real>(before: &Mesh<T>, after: &Mesh<T>) -> Result<GradientBundle<T>> {
    if !before.same_topology(after) {
        return Err(Error::Shape(format!(
            "meshes differ in combinatorics: {} vertices / {} faces vs {} / {}",
            before.num_vertices(),
            before.num_faces(),
            after.num_vertices(),
            after.num_faces()
        )));
    }
    let neighbors = after.vertex_neighbors();
    let d0 = laplacian_with(before.vertices(), &neighbors)?;
    let d1 = laplacian_with(after.vertices(), &neighbors)?;
    let mut bundle = GradientBundle::zeros(after.num_vertices());
    let two = T::lit(2.0);
    for (p, nbrs) in neighbors.iter().enumerate() {
        let r = d1[p] - d0[p];
        bundle.value += r.norm_squared();
        let g = r.scale(two);
        bundle.d_vertices[p] += g;
        let share = g.scale(T::one() / T::from_usize_lossy(nbrs.len()));
        for &q in nbrs {
            bundle.d_vertices[q] -= share;
        }
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;
    use crate::vec3::Vec3;

    #[test]
    fn edge_values() {
        let m = Mesh::new(
            vec![
                Vec3::<f64>::zero(),
                Vec3::from_f64(2.0, 0.0, 0.0),
                Vec3::from_f64(0.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        // edges 0-1 and 1-2 have length 2, 0-2 has length 0
        assert_eq!(loss_edge(&m).value, 8.0);
        let collapsed = m.map_vertices(|_| Vec3::from_f64(0.3, 0.3, 0.3));
        assert_eq!(loss_edge(&collapsed).value, 0.0);
    }

    #[test]
    fn edge_scales_quadratically() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let k = 3.0;
        let big = m.scaled(Vec3::from_f64(k, k, k));
        assert!((loss_edge(&big).value - k * k * loss_edge(&m).value).abs() < 1e-9);
    }

    #[test]
    fn laplacian_zero_cases() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        assert_eq!(loss_laplacian(&m, &m).unwrap().value, 0.0);
        let moved = m.translated(Vec3::from_f64(0.4, -1.0, 2.0));
        assert!(loss_laplacian(&m, &moved).unwrap().value < 1e-20);
        let other = Primitive::Cube.build::<f64>();
        assert!(matches!(loss_laplacian(&m, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn laplacian_is_quadratic_in_normal_offset() {
        let g = Primitive::Grid { nx: 4, ny: 4 }.build::<f64>();
        // vertex 12 is interior on a 5x5 lattice
        let lift = |h: f64| {
            let mut v = g.vertices().to_vec();
            v[12].z = h;
            loss_laplacian(&g, &g.with_vertices(v).unwrap())
                .unwrap()
                .value
        };
        let ratio = lift(0.2) / lift(0.1);
        assert!((ratio - 4.0).abs() < 1e-9, "{ratio}");
    }
}
