//! Exact squared distance from a point to a triangle.
//!
//! The triangle is parameterized as `T(s, t) = B + s E0 + t E1` over
//! `D = {s >= 0, t >= 0, s + t <= 1}` and the squared distance is the
//! quadratic `Q(s, t) = a s^2 + 2 b s t + c t^2 + 2 d s + 2 e t + f`. The
//! unconstrained stationary point is used when it falls inside `D`; otherwise
//! the minimum lies on one of the three edges, where `Q` reduces to a clamped
//! quadratic in one unknown.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Triangles with `ac - b^2` at or below this are degenerate.
pub const DEGENERATE_DET_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleParam<T> {
    pub base: Vec3<T>,
    pub e0: Vec3<T>,
    pub e1: Vec3<T>,
    /// `E0 . E0`
    pub a: T,
    /// `E0 . E1`
    pub b: T,
    /// `E1 . E1`
    pub c: T,
}

impl<T: Real> TriangleParam<T> {
    pub fn new(v0: Vec3<T>, v1: Vec3<T>, v2: Vec3<T>) -> Self {
        let e0 = v1 - v0;
        let e1 = v2 - v0;
        Self {
            base: v0,
            e0,
            e1,
            a: e0.dot(e0),
            b: e0.dot(e1),
            c: e1.dot(e1),
        }
    }

    pub fn from_face(mesh: &Mesh<T>, face: usize) -> Self {
        let [v0, v1, v2] = mesh.face_vertices(face);
        Self::new(v0, v1, v2)
    }

    /// `ac - b^2`, i.e. `|E0 x E1|^2`.
    #[inline]
    pub fn det(&self) -> T {
        self.a * self.c - self.b * self.b
    }

    #[inline]
    pub fn is_degenerate(&self) -> bool {
        !(self.det() > T::lit(DEGENERATE_DET_EPS))
    }

    #[inline]
    pub fn point_at(&self, s: T, t: T) -> Vec3<T> {
        self.base + self.e0.scale(s) + self.e1.scale(t)
    }
}

/// Result of a point-triangle query: the squared distance and the
/// minimizing `(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleQuery<T> {
    pub sq_dist: T,
    pub s: T,
    pub t: T,
}

impl<T: Real> TriangleQuery<T> {
    /// Weights of `(v0, v1, v2)` in the closest point.
    #[inline]
    pub fn barycentric(&self) -> [T; 3] {
        [T::one() - self.s - self.t, self.s, self.t]
    }
}

/// Exact minimum squared distance from `p` to a non-degenerate triangle.
pub fn point_triangle_sq_dist<T: Real>(
    p: Vec3<T>,
    tri: &TriangleParam<T>,
) -> Result<TriangleQuery<T>> {
    if tri.is_degenerate() {
        return Err(Error::DegenerateFace { face: 0 });
    }
    Ok(closest_on_triangle(p, tri))
}

/// Like [`point_triangle_sq_dist`] but never fails: degenerate triangles are
/// treated as the union of their three edges.
pub fn point_triangle_sq_dist_robust<T: Real>(
    p: Vec3<T>,
    tri: &TriangleParam<T>,
) -> TriangleQuery<T> {
    if tri.is_degenerate() {
        closest_on_boundary(p, tri)
    } else {
        closest_on_triangle(p, tri)
    }
}

fn closest_on_triangle<T: Real>(p: Vec3<T>, tri: &TriangleParam<T>) -> TriangleQuery<T> {
    let diff = tri.base - p;
    let d = tri.e0.dot(diff);
    let e = tri.e1.dot(diff);
    let det = tri.det();
    let s = (tri.b * e - tri.c * d) / det;
    let t = (tri.b * d - tri.a * e) / det;
    if s >= T::zero() && t >= T::zero() && s + t <= T::one() {
        return TriangleQuery {
            sq_dist: p.dist_squared(tri.point_at(s, t)),
            s,
            t,
        };
    }
    closest_on_boundary(p, tri)
}

/// Minimum over the three edges `t = 0`, `s = 0` and `s + t = 1`.
fn closest_on_boundary<T: Real>(p: Vec3<T>, tri: &TriangleParam<T>) -> TriangleQuery<T> {
    let diff = tri.base - p;
    let d = tri.e0.dot(diff);
    let e = tri.e1.dot(diff);
    let (a, b, c) = (tri.a, tri.b, tri.c);

    let candidates = [
        (clamped_ratio(-d, a), T::zero()),
        (T::zero(), clamped_ratio(-e, c)),
        {
            // Q(s, 1 - s) is minimized at s = (c + e - b - d) / (a - 2b + c)
            let s = clamped_ratio(c + e - b - d, a - b - b + c);
            (s, T::one() - s)
        },
    ];
    let mut best: Option<TriangleQuery<T>> = None;
    for (s, t) in candidates {
        let sq_dist = p.dist_squared(tri.point_at(s, t));
        if best.is_none_or(|b| sq_dist < b.sq_dist) {
            best = Some(TriangleQuery { sq_dist, s, t });
        }
    }
    best.expect("three candidates")
}

/// `num / den` clamped to `[0, 1]`; zero when the edge has no length.
#[inline]
fn clamped_ratio<T: Real>(num: T, den: T) -> T {
    if den > T::zero() {
        (num / den).max(T::zero()).min(T::one())
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuery<T> {
    pub sq_dist: T,
    pub face: usize,
    pub s: T,
    pub t: T,
}

impl<T: Real> MeshQuery<T> {
    #[inline]
    pub fn barycentric(&self) -> [T; 3] {
        [T::one() - self.s - self.t, self.s, self.t]
    }

    pub fn closest_point(&self, mesh: &Mesh<T>) -> Vec3<T> {
        TriangleParam::from_face(mesh, self.face).point_at(self.s, self.t)
    }
}

/// Brute-force minimum over all faces; ties go to the lowest face index.
/// Degenerate faces contribute their edge distance.
pub fn point_mesh_sq_dist<T: Real>(p: Vec3<T>, mesh: &Mesh<T>) -> Result<MeshQuery<T>> {
    if !mesh_has_valid_face(mesh) {
        return Err(Error::ZeroArea);
    }
    let mut best: Option<MeshQuery<T>> = None;
    for face in 0..mesh.num_faces() {
        let q = point_triangle_sq_dist_robust(p, &TriangleParam::from_face(mesh, face));
        if best.is_none_or(|b| q.sq_dist < b.sq_dist) {
            best = Some(MeshQuery {
                sq_dist: q.sq_dist,
                face,
                s: q.s,
                t: q.t,
            });
        }
    }
    best.ok_or(Error::ZeroArea)
}

pub(crate) fn mesh_has_valid_face<T: Real>(mesh: &Mesh<T>) -> bool {
    (0..mesh.num_faces()).any(|f| !TriangleParam::from_face(mesh, f).is_degenerate())
}
