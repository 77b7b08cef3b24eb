//! Vertex-graph operators: edges, adjacency matrices, Laplacian coordinates.

use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{ordered, Mesh};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Distinct undirected edges, each stored as `(lo, hi)` with `lo < hi`,
/// sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet(Vec<(usize, usize)>);

impl EdgeSet {
    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// 0/1 entries, zero diagonal.
    Raw,
    /// `D^-1 (A + I)`.
    RowNormalized,
    /// `D^-1/2 (A + I) D^-1/2`.
    #[default]
    SymmetricNormalized,
}

impl FromStr for AdjacencyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "row" | "row_normalized" => Ok(Self::RowNormalized),
            "sym" | "symmetric" | "symmetric_normalized" => Ok(Self::SymmetricNormalized),
            _ => Err(Error::Config(format!("unknown adjacency mode {s:?}"))),
        }
    }
}

/// Sparse `N x N` vertex adjacency in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyOp<T> {
    mode: AdjacencyMode,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> AdjacencyOp<T> {
    /// `N x N` identity, i.e. the zeroth power of any adjacency.
    pub fn identity(n: usize) -> Self {
        Self {
            mode: AdjacencyMode::Raw,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![T::one(); n],
        }
    }

    /// Operator on an explicit graph with `n` vertices.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], mode: AdjacencyMode) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        Self::from_neighbors(&neighbors, mode)
    }

    /// Operator from sorted, symmetric neighbor lists.
    pub fn from_neighbors(neighbors: &[Vec<usize>], mode: AdjacencyMode) -> Self {
        let self_loop = mode != AdjacencyMode::Raw;
        let degree: Vec<T> = neighbors
            .iter()
            .map(|n| T::from_usize_lossy(n.len() + usize::from(self_loop)))
            .collect();

        let mut row_ptr = Vec::with_capacity(neighbors.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, nbrs) in neighbors.iter().enumerate() {
            let mut row: Vec<usize> = nbrs.clone();
            if self_loop {
                row.push(i);
                row.sort_unstable();
            }
            for j in row {
                let v = match mode {
                    AdjacencyMode::Raw => T::one(),
                    AdjacencyMode::RowNormalized => T::one() / degree[i],
                    AdjacencyMode::SymmetricNormalized => T::one() / (degree[i] * degree[j]).sqrt(),
                };
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            mode,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn mode(&self) -> AdjacencyMode {
        self.mode
    }

    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_else(T::zero)
    }

    pub fn to_dense(&self) -> Array2<T> {
        let n = self.size();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `A X` for a dense `N x k` matrix.
    pub fn apply(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let n = self.size();
        if x.nrows() != n {
            return Err(Error::Shape(format!(
                "adjacency is {n}x{n} but features have {} rows",
                x.nrows()
            )));
        }
        let mut out = Array2::zeros((n, x.ncols()));
        for i in 0..n {
            let mut row = out.row_mut(i);
            for (j, v) in self.row(i) {
                row.scaled_add(v, &x.row(j));
            }
        }
        Ok(out)
    }

    /// `A^T X` for a dense `N x k` matrix.
    pub fn apply_transpose(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let n = self.size();
        if x.nrows() != n {
            return Err(Error::Shape(format!(
                "adjacency is {n}x{n} but features have {} rows",
                x.nrows()
            )));
        }
        let mut out = Array2::zeros((n, x.ncols()));
        for i in 0..n {
            let xi = x.row(i);
            for (j, v) in self.row(i) {
                out.row_mut(j).scaled_add(v, &xi);
            }
        }
        Ok(out)
    }
}

impl<T: Real> Mesh<T> {
    /// The distinct undirected edges of all faces.
    pub fn edges(&self) -> EdgeSet {
        let mut e: Vec<(usize, usize)> = self
            .faces()
            .iter()
            .flat_map(|f| (0..3).map(move |k| ordered(f[k], f[(k + 1) % 3])))
            .collect();
        e.sort_unstable();
        e.dedup();
        EdgeSet(e)
    }

    /// Sorted one-ring neighbor lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vertices()];
        for &(a, b) in self.edges().iter() {
            out[a].push(b);
            out[b].push(a);
        }
        for n in &mut out {
            n.sort_unstable();
        }
        out
    }

    pub fn adjacency(&self, mode: AdjacencyMode) -> AdjacencyOp<T> {
        AdjacencyOp::from_neighbors(&self.vertex_neighbors(), mode)
    }

    /// Uniform-weight Laplacian coordinates `v_p - mean(neighbors of p)`.
    pub fn laplacian_coordinates(&self) -> Result<Vec<Vec3<T>>> {
        let neighbors = self.vertex_neighbors();
        laplacian_with(self.vertices(), &neighbors)
    }
}

pub(crate) fn laplacian_with<T: Real>(
    vertices: &[Vec3<T>],
    neighbors: &[Vec<usize>],
) -> Result<Vec<Vec3<T>>> {
    vertices
        .iter()
        .zip(neighbors)
        .enumerate()
        .map(|(p, (&v, nbrs))| {
            if nbrs.is_empty() {
                return Err(Error::NoNeighbor {
                    what: "vertex",
                    index: p,
                });
            }
            let mut mean = Vec3::zero();
            for &q in nbrs {
                mean += vertices[q];
            }
            Ok(v - mean.scale(T::one() / T::from_usize_lossy(nbrs.len())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;

    fn single_triangle() -> Mesh<f64> {
        Mesh::new(
            vec![
                Vec3::from_f64(0.0, 0.0, 0.0),
                Vec3::from_f64(1.0, 0.0, 0.0),
                Vec3::from_f64(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn edge_counts() {
        assert_eq!(single_triangle().edges().len(), 3);
        // Euler: V - E + F = 2 with V = 8, F = 12
        assert_eq!(Primitive::Cube.build::<f64>().edges().len(), 18);
        let two = Mesh::<f64>::new(vec![Vec3::zero(); 4], vec![[0, 1, 2], [2, 1, 3]]).unwrap();
        assert_eq!(two.edges().len(), 5);
    }

    #[test]
    fn raw_adjacency_of_triangle() {
        let a = single_triangle().adjacency(AdjacencyMode::Raw).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[[i, j]], if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn row_normalized_triangle_is_all_thirds() {
        let a = single_triangle()
            .adjacency(AdjacencyMode::RowNormalized)
            .to_dense();
        assert!(a.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn adjacency_properties_on_sphere() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let raw = m.adjacency(AdjacencyMode::Raw).to_dense();
        assert_eq!(raw, raw.t());

        let row = m.adjacency(AdjacencyMode::RowNormalized).to_dense();
        for r in row.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-9);
        }

        // symmetric normalization: symmetric and row sums of |entries| bounded
        // by one in the D^-1/2 metric, so the power iteration stays bounded
        let sym = m.adjacency(AdjacencyMode::SymmetricNormalized).to_dense();
        assert!((&sym - &sym.t()).iter().all(|v| v.abs() < 1e-15));
        let mut x = Array2::from_elem((m.num_vertices(), 1), 1.0);
        for _ in 0..200 {
            x = sym.dot(&x);
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.mapv_inplace(|v| v / n);
        }
        let rayleigh = x.t().dot(&sym.dot(&x))[[0, 0]];
        assert!(rayleigh <= 1.0 + 1e-9);
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let a = m.adjacency(AdjacencyMode::RowNormalized);
        let x = Array2::from_shape_fn((m.num_vertices(), 2), |(i, j)| (i * 7 + j * 3) as f64 % 5.0);
        let dense = a.to_dense();
        let diff = &a.apply(x.view()).unwrap() - &dense.dot(&x);
        assert!(diff.iter().all(|v| v.abs() < 1e-12));
        let diff = &a.apply_transpose(x.view()).unwrap() - &dense.t().dot(&x);
        assert!(diff.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn laplacian_of_path_midpoint_is_zero() {
        // degenerate single face used only as a 3-vertex path 0 - 1 - 2 via edges
        let m = Mesh::<f64>::new(
            vec![
                Vec3::from_f64(0.0, 0.0, 0.0),
                Vec3::from_f64(1.0, 0.0, 0.0),
                Vec3::from_f64(2.0, 0.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        let nbrs = vec![vec![1], vec![0, 2], vec![1]];
        let d = laplacian_with(m.vertices(), &nbrs).unwrap();
        assert_eq!(d[1], Vec3::zero());
    }

    #[test]
    fn laplacian_at_fan_center_is_zero() {
        let m = Primitive::Square2d.build::<f64>();
        let d = m.laplacian_coordinates().unwrap();
        assert!(d[4].max_abs() < 1e-15);
    }

    #[test]
    fn laplacian_is_translation_invariant() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let a = m.laplacian_coordinates().unwrap();
        let b = m
            .translated(Vec3::from_f64(3.5, -7.25, 11.0))
            .laplacian_coordinates()
            .unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((*p - *q).max_abs() < 1e-9);
        }
    }

    #[test]
    fn isolated_vertex_is_an_error() {
        let m = Mesh::<f64>::new(vec![Vec3::zero(); 4], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            m.laplacian_coordinates(),
            Err(Error::NoNeighbor { index: 3, .. })
        ));
    }
}
