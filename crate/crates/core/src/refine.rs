//! Curvature-adaptive and uniform centroid splitting.
//!
//! A split face `(a, b, c)` gains a vertex `m` at its centroid and becomes
//! `(a, b, m)`, `(b, c, m)`, `(c, a, m)`. Original edges are untouched, so no
//! neighbor needs retriangulating and the surface is tiled exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub alpha_degrees: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            alpha_degrees: 70.0,
        }
    }
}

impl SplitConfig {
    pub fn new(alpha_degrees: f64) -> Result<Self> {
        let c = Self { alpha_degrees };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_degrees > 0.0 && self.alpha_degrees < 180.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 180) degrees, got {}",
                self.alpha_degrees
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub split_face_indices: Vec<usize>,
    pub vertices_before: usize,
    pub vertices_after: usize,
    pub faces_before: usize,
    pub faces_after: usize,
    /// Curvature of every input face at decision time, in degrees. Uniform
    /// splits record `None` since no curvature is consulted.
    pub curvatures: Option<Vec<f64>>,
}

impl SplitReport {
    pub fn num_split(&self) -> usize {
        self.split_face_indices.len()
    }

    /// Mean curvature of split and unsplit faces. `None` for an empty group
    /// or a uniform split.
    pub fn mean_curvatures(&self) -> (Option<f64>, Option<f64>) {
        let Some(c) = &self.curvatures else {
            return (None, None);
        };
        let mut flag = vec![false; c.len()];
        for &f in &self.split_face_indices {
            flag[f] = true;
        }
        let mean = |want: bool| {
            let (s, n) = c
                .iter()
                .zip(&flag)
                .filter(|(_, &f)| f == want)
                .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
            (n > 0).then(|| s / n as f64)
        };
        (mean(true), mean(false))
    }

    /// CSV with header `face_idx,curvature,split`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["face_idx", "curvature", "split"])?;
        let mut flag = vec![false; self.faces_before];
        for &f in &self.split_face_indices {
            flag[f] = true;
        }
        for (f, &s) in flag.iter().enumerate() {
            let curv = self
                .curvatures
                .as_ref()
                .map_or(String::new(), |c| c[f].to_string());
            out.write_record(&[f.to_string(), curv, (s as u8).to_string()])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Splits every face whose curvature exceeds `alpha`. Curvatures are taken
/// from one snapshot of the input, so the result does not depend on face
/// order. A face with no edge-neighbors counts as flat.
pub fn split_adaptive<T: Real>(
    mesh: &Mesh<T>,
    config: &SplitConfig,
) -> Result<(Mesh<T>, SplitReport)> {
    config.validate()?;
    for f in 0..mesh.num_faces() {
        mesh.face_normal(f)?;
    }
    let neighbors = mesh.face_neighbors();
    let curvatures = (0..mesh.num_faces())
        .map(|f| {
            if neighbors[f].is_empty() {
                Ok(0.0)
            } else {
                mesh.curvature_with(f, &neighbors[f]).map(|c| c.as_f64())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let selected: Vec<usize> = curvatures
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > config.alpha_degrees)
        .map(|(f, _)| f)
        .collect();
    let mut report = split_faces(mesh, &selected)?;
    report.1.curvatures = Some(curvatures);
    Ok(report)
}

/// Splits every face.
pub fn split_uniform<T: Real>(mesh: &Mesh<T>) -> Result<(Mesh<T>, SplitReport)> {
    let all: Vec<usize> = (0..mesh.num_faces()).collect();
    split_faces(mesh, &all)
}

/// Centroid-splits the listed faces (sorted, unique). New vertices are
/// appended in the order of `selected`; each split face's first child keeps
/// the original slot and the other two are appended.
pub fn split_faces<T: Real>(mesh: &Mesh<T>, selected: &[usize]) -> Result<(Mesh<T>, SplitReport)> {
    if selected.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "split face list must be sorted and unique".into(),
        ));
    }
    if let Some(&bad) = selected.last().filter(|&&f| f >= mesh.num_faces()) {
        return Err(Error::Config(format!("face {bad} out of range")));
    }
    let mut vertices = mesh.vertices().to_vec();
    let mut faces = mesh.faces().to_vec();
    for &f in selected {
        let [a, b, c] = mesh.faces()[f];
        let m = vertices.len();
        vertices.push(mesh.face_centroid(f));
        faces[f] = [a, b, m];
        faces.push([b, c, m]);
        faces.push([c, a, m]);
    }
    let out = Mesh::new(vertices, faces)?;
    let report = SplitReport {
        split_face_indices: selected.to_vec(),
        vertices_before: mesh.num_vertices(),
        vertices_after: out.num_vertices(),
        faces_before: mesh.num_faces(),
        faces_after: out.num_faces(),
        curvatures: None,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;
    use crate::vec3::Vec3;

    #[test]
    fn flat_grid_is_unchanged() {
        let g = Primitive::Grid { nx: 4, ny: 3 }.build::<f64>();
        let (out, rep) = split_adaptive(&g, &SplitConfig::default()).unwrap();
        assert_eq!(out, g);
        assert_eq!(rep.num_split(), 0);
    }

    #[test]
    fn tetrahedron_splits_everywhere() {
        let t = Primitive::Tetrahedron.build::<f64>();
        let (out, rep) = split_adaptive(&t, &SplitConfig::default()).unwrap();
        assert_eq!((out.num_vertices(), out.num_faces()), (8, 12));
        assert_eq!(rep.split_face_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn uniform_counts() {
        let (c, _) = split_uniform(&Primitive::Cube.build::<f64>()).unwrap();
        assert_eq!((c.num_vertices(), c.num_faces()), (20, 36));
        let tri = Mesh::new(
            vec![
                Vec3::<f64>::zero(),
                Vec3::from_f64(1.0, 0.0, 0.0),
                Vec3::from_f64(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let (once, _) = split_uniform(&tri).unwrap();
        let (twice, _) = split_uniform(&once).unwrap();
        // V' = V + F at each step: 3 -> 4 -> 7
        assert_eq!((once.num_vertices(), once.num_faces()), (4, 3));
        assert_eq!((twice.num_vertices(), twice.num_faces()), (7, 9));
    }

    #[test]
    fn children_keep_orientation_and_area() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let (out, _) = split_uniform(&m).unwrap();
        assert!((out.total_area() - m.total_area()).abs() < 1e-12);
        for f in 0..m.num_faces() {
            let n0 = m.face_normal(f).unwrap();
            assert!(out.face_normal(f).unwrap().dot(n0) > 0.999_999);
        }
    }

    #[test]
    fn single_split_counts() {
        let m = Primitive::Cube.build::<f64>();
        let (out, rep) = split_faces(&m, &[5]).unwrap();
        assert_eq!((out.num_vertices(), out.num_faces()), (9, 14));
        assert_eq!(rep.faces_after, rep.faces_before + 2);
    }

    #[test]
    fn degenerate_face_rejected() {
        let m = Mesh::new(
            vec![
                Vec3::<f64>::zero(),
                Vec3::from_f64(1.0, 0.0, 0.0),
                Vec3::from_f64(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            split_adaptive(&m, &SplitConfig::default()),
            Err(Error::DegenerateFace { face: 0 })
        ));
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(SplitConfig::new(0.0).is_err());
        assert!(SplitConfig::new(180.0).is_err());
        assert!(SplitConfig::new(70.0).is_ok());
    }

    #[test]
    fn report_csv() {
        let t = Primitive::Tetrahedron.build::<f64>();
        let (_, rep) = split_adaptive(&t, &SplitConfig::default()).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().ends_with(",1"));
    }
}
