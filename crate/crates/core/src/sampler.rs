//! Area-weighted uniform surface sampling with reparameterized positions.
//!
//! A face is drawn with probability `A_f / A_T`, then two independent
//! uniforms `(u, w)` are mapped onto it with
//! `r = (1 - sqrt(u)) v1 + sqrt(u)(1 - w) v2 + sqrt(u) w v3`.
//! Positions are a deterministic function of the vertices and `(u, w)`, so
//! gradients reach the vertices through the three barycentric weights; the
//! discrete face choice carries no gradient.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::rng::TripleStream;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Below this many points sampling stays on the calling thread.
const PARALLEL_MIN_POINTS: usize = 4096;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct FaceDistribution<T> {
    areas: Vec<T>,
    cumulative: Vec<T>,
    total: T,
}

impl<T: Real> FaceDistribution<T> {
    pub fn new(mesh: &Mesh<T>) -> Result<Self> {
        let areas: Vec<T> = (0..mesh.num_faces()).map(|f| mesh.face_area(f)).collect();
        let mut cumulative = Vec::with_capacity(areas.len());
        let mut acc = T::zero();
        for &a in &areas {
            acc += a;
            cumulative.push(acc);
        }
        if !(acc > T::zero()) || !acc.is_finite() {
            return Err(Error::ZeroArea);
        }
        Ok(Self {
            areas,
            cumulative,
            total: acc,
        })
    }

    pub fn areas(&self) -> &[T] {
        &self.areas
    }

    pub fn total_area(&self) -> T {
        self.total
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.areas.iter().map(|&a| a / self.total).collect()
    }

    /// Inverse CDF: maps `x` in `[0, 1)` to a face. Zero-area faces occupy an
    /// empty interval and are never returned.
    pub fn pick(&self, x: T) -> usize {
        let target = x * self.total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.cumulative.len() - 1)
    }
}

/// Convenience wrapper for [`FaceDistribution::new`].
pub fn face_distribution<T: Real>(mesh: &Mesh<T>) -> Result<FaceDistribution<T>> {
    FaceDistribution::new(mesh)
}

/// Barycentric weights of `(v1, v2, v3)` for draws `(u, w)`.
#[inline]
pub fn draw_weights<T: Real>(u: T, w: T) -> [T; 3] {
    let su = u.sqrt();
    [T::one() - su, su * (T::one() - w), su * w]
}

/// Position of draw `(u, w)` on a face.
#[inline]
pub fn point_on_face<T: Real>(mesh: &Mesh<T>, face: usize, u: T, w: T) -> Vec3<T> {
    let [v1, v2, v3] = mesh.face_vertices(face);
    let [a, b, c] = draw_weights(u, w);
    v1.scale(a) + v2.scale(b) + v3.scale(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceSample<T> {
    pub face: usize,
    pub u: T,
    pub w: T,
    pub position: Vec3<T>,
}

impl<T: Real> SurfaceSample<T> {
    #[inline]
    pub fn weights(&self) -> [T; 3] {
        draw_weights(self.u, self.w)
    }
}

/// Samples together with the provenance needed to recompute or
/// differentiate their positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPointSet<T> {
    pub seed: u64,
    pub samples: Vec<SurfaceSample<T>>,
}

impl<T: Real> SampledPointSet<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3<T>> {
        self.samples.iter().map(|s| s.position).collect()
    }

    /// Recomputes positions on a mesh with the same faces, keeping each
    /// sample's face and `(u, w)`.
    pub fn reposition(&self, mesh: &Mesh<T>) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                check_provenance(s.face, mesh)?;
                Ok(SurfaceSample {
                    position: point_on_face(mesh, s.face, s.u, s.w),
                    ..*s
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            seed: self.seed,
            samples,
        })
    }

    /// CSV with header `x,y,z,face_idx,u,w`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "z", "face_idx", "u", "w"])?;
        for s in &self.samples {
            out.write_record(&[
                s.position.x.to_string(),
                s.position.y.to_string(),
                s.position.z.to_string(),
                s.face.to_string(),
                s.u.to_string(),
                s.w.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Plain `x y z` lines.
    pub fn write_xyz<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for s in &self.samples {
            writeln!(w, "{} {} {}", s.position.x, s.position.y, s.position.z)?;
        }
        Ok(())
    }
}

/// Draws `n` area-uniform samples. Deterministic in `(mesh, n, seed)`.
pub fn sample_surface<T: Real>(mesh: &Mesh<T>, n: usize, seed: u64) -> Result<SampledPointSet<T>> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let dist = FaceDistribution::new(mesh)?;
    let draw_chunk = |start: usize, end: usize| {
        let mut stream = TripleStream::at(seed, start);
        (start..end)
            .map(|_| {
                let [x, u, w] = stream.next_triple();
                let face = dist.pick(T::lit(x));
                let (u, w) = (T::lit(u), T::lit(w));
                SurfaceSample {
                    face,
                    u,
                    w,
                    position: point_on_face(mesh, face, u, w),
                }
            })
            .collect::<Vec<_>>()
    };
    let samples = if n < PARALLEL_MIN_POINTS {
        draw_chunk(0, n)
    } else {
        (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| draw_chunk(c * CHUNK, ((c + 1) * CHUNK).min(n)))
            .flatten_iter()
            .collect()
    };
    Ok(SampledPointSet { seed, samples })
}

/// Derivative of one sample position with respect to its face's vertices:
/// `dr/dv_k = weights[k] * I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleJacobian<T> {
    pub face: usize,
    pub vertices: [usize; 3],
    pub weights: [T; 3],
}

impl<T: Real> SampleJacobian<T> {
    /// Dense `3 x 9` form, columns ordered `(v1.x, v1.y, v1.z, v2.x, ...)`.
    pub fn matrix(&self) -> [[T; 9]; 3] {
        let mut m = [[T::zero(); 9]; 3];
        for (k, &wk) in self.weights.iter().enumerate() {
            for (axis, row) in m.iter_mut().enumerate() {
                row[3 * k + axis] = wk;
            }
        }
        m
    }
}

pub fn sample_jacobian<T: Real>(
    points: &SampledPointSet<T>,
    mesh: &Mesh<T>,
) -> Result<Vec<SampleJacobian<T>>> {
    points
        .samples
        .iter()
        .map(|s| {
            check_provenance(s.face, mesh)?;
            Ok(SampleJacobian {
                face: s.face,
                vertices: mesh.faces()[s.face],
                weights: s.weights(),
            })
        })
        .collect()
}

fn check_provenance<T: Real>(face: usize, mesh: &Mesh<T>) -> Result<()> {
    if face >= mesh.num_faces() {
        return Err(Error::Provenance {
            face,
            faces: mesh.num_faces(),
        });
    }
    Ok(())
}
