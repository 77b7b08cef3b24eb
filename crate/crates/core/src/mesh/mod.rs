//! Triangle mesh representation and per-face geometry.

mod graph;
mod obj;
mod primitives;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

pub(crate) use graph::laplacian_with;
pub use graph::{AdjacencyMode, AdjacencyOp, EdgeSet};
pub use obj::{load_obj, parse_obj, save_obj, write_obj};
pub use primitives::Primitive;

/// Faces whose edge cross product is shorter than this are degenerate.
pub const DEGENERATE_AREA_EPS: f64 = 1e-12;

pub type Face = [usize; 3];

/// An indexed triangle mesh.
///
/// Immutable once built: every operation that changes geometry or
/// connectivity returns a new `Mesh`. Face vertex order `(v1, v2, v3)` fixes
/// the normal orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh<T> {
    vertices: Vec<Vec3<T>>,
    faces: Vec<Face>,
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh, checking that every face references three distinct,
    /// in-range vertices.
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<Face>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3<T>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Shape(format!(
                "expected {} vertex positions, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// True when both meshes share the same face index structure.
    pub fn same_topology(&self, other: &Self) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }

    pub fn map_vertices(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().copied().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, t: Vec3<T>) -> Self {
        self.map_vertices(|v| v + t)
    }

    pub fn scaled(&self, k: Vec3<T>) -> Self {
        self.map_vertices(|v| v.component_mul(k))
    }

    pub fn cast<U: Real>(&self) -> Mesh<U> {
        Mesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for an empty mesh.
    pub fn bounds(&self) -> Option<(Vec3<T>, Vec3<T>)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        )
    }

    /// Uniformly rescales and recenters so the bounding box fits the unit cube
    /// centered at the origin (longest side 1).
    pub fn normalized_to_unit_cube(&self) -> Self {
        let Some((lo, hi)) = self.bounds() else {
            return self.clone();
        };
        let center = (lo + hi).scale(T::lit(0.5));
        let extent = (hi - lo).max_abs();
        let k = if extent > T::zero() {
            T::one() / extent
        } else {
            T::one()
        };
        self.map_vertices(|v| (v - center).scale(k))
    }

    #[inline]
    pub fn face_vertices(&self, face_idx: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.faces[face_idx];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// `e1 x e2` with `e1 = v1 - v2`, `e2 = v3 - v2`. Its length is twice the
    /// face area.
    #[inline]
    pub fn face_cross(&self, face_idx: usize) -> Vec3<T> {
        let [v1, v2, v3] = self.face_vertices(face_idx);
        (v1 - v2).cross(v3 - v2)
    }

    pub fn face_area(&self, face_idx: usize) -> T {
        self.face_cross(face_idx).norm() * T::lit(0.5)
    }

    pub fn total_area(&self) -> T {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn face_centroid(&self, face_idx: usize) -> Vec3<T> {
        let [a, b, c] = self.face_vertices(face_idx);
        (a + b + c).scale(T::one() / T::lit(3.0))
    }

    /// Unit face normal `N_f = (e1 x e2) / |e1 x e2|`.
    pub fn face_normal(&self, face_idx: usize) -> Result<Vec3<T>> {
        self.check_face(face_idx)?;
        let c = self.face_cross(face_idx);
        let len = c.norm();
        if !(len >= T::lit(DEGENERATE_AREA_EPS)) {
            return Err(Error::DegenerateFace { face: face_idx });
        }
        Ok(c.scale(T::one() / len))
    }

    /// For every face, the faces sharing one of its edges, in ascending order.
    pub fn face_neighbors(&self) -> Vec<Vec<usize>> {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                by_edge
                    .entry(ordered(f[k], f[(k + 1) % 3]))
                    .or_default()
                    .push(fi);
            }
        }
        let mut out = vec![Vec::new(); self.faces.len()];
        for shared in by_edge.values() {
            for &a in shared {
                for &b in shared {
                    if a != b {
                        out[a].push(b);
                    }
                }
            }
        }
        for n in &mut out {
            n.sort_unstable();
            n.dedup();
        }
        out
    }

    /// Mean angle in degrees between the face normal and the normals of its
    /// edge-adjacent faces.
    pub fn face_curvature(&self, face_idx: usize) -> Result<T> {
        self.check_face(face_idx)?;
        let neighbors = self.face_neighbors();
        self.curvature_with(face_idx, &neighbors[face_idx])
    }

    /// Curvature of every face from one snapshot. Faces with no edge
    /// neighbors yield a `NoNeighbor` error.
    pub fn face_curvatures(&self) -> Result<Vec<T>> {
        let neighbors = self.face_neighbors();
        (0..self.faces.len())
            .map(|f| self.curvature_with(f, &neighbors[f]))
            .collect()
    }

    pub(crate) fn curvature_with(&self, face_idx: usize, neighbors: &[usize]) -> Result<T> {
        if neighbors.is_empty() {
            return Err(Error::NoNeighbor {
                what: "face",
                index: face_idx,
            });
        }
        let n = self.face_normal(face_idx)?;
        let mut sum = T::zero();
        for &other in neighbors {
            let m = self.face_normal(other)?;
            let cos = n.dot(m).max(-T::one()).min(T::one());
            sum += cos.acos();
        }
        let deg =
            T::lit(180.0) / (T::from_usize_lossy(neighbors.len()) * T::lit(std::f64::consts::PI));
        Ok(sum * deg)
    }

    fn check_face(&self, face_idx: usize) -> Result<()> {
        if face_idx >= self.faces.len() {
            return Err(Error::InvalidMesh(format!(
                "face index {face_idx} out of range ({} faces)",
                self.faces.len()
            )));
        }
        Ok(())
    }

    /// Applies a vertex relabeling: vertex `i` moves to slot `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.vertices.len();
        if perm.len() != n {
            return Err(Error::Shape(format!(
                "permutation has {} entries for {n} vertices",
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        let mut vertices = vec![Vec3::zero(); n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || seen[new] {
                return Err(Error::Shape("not a permutation".into()));
            }
            seen[new] = true;
            vertices[new] = self.vertices[old];
        }
        let faces = self
            .faces
            .iter()
            .map(|f| [perm[f[0]], perm[f[1]], perm[f[2]]])
            .collect();
        Self::new(vertices, faces)
    }
}

#[inline]
pub(crate) fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}
