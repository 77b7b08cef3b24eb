//! Acceleration structures. Both return exactly what the brute-force scans
//! they replace would return, including lowest-index tie-breaking.

use std::collections::HashMap;

use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::tridist::{point_triangle_sq_dist_robust, MeshQuery, TriangleParam};
use crate::vec3::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node<T> {
    lo: Vec3<T>,
    hi: Vec3<T>,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

/// Bounding volume hierarchy over the faces of one mesh.
#[derive(Debug, Clone)]
pub struct TriangleBvh<T> {
    tris: Vec<TriangleParam<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> TriangleBvh<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        let tris: Vec<_> = (0..mesh.num_faces())
            .map(|f| TriangleParam::from_face(mesh, f))
            .collect();
        let bounds: Vec<(Vec3<T>, Vec3<T>)> = (0..mesh.num_faces())
            .map(|f| {
                let [a, b, c] = mesh.face_vertices(f);
                (a.min(b).min(c), a.max(b).max(c))
            })
            .collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build(&bounds, &mut order, 0, tris.len(), &mut nodes);
        }
        Self { tris, order, nodes }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Nearest face to `p`; `None` for a mesh without faces.
    pub fn nearest(&self, p: Vec3<T>) -> Option<MeshQuery<T>> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<MeshQuery<T>> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if let Some(b) = best {
                // equal bounds may still hide a lower-index tie
                if box_sq_dist(p, node.lo, node.hi) > b.sq_dist {
                    continue;
                }
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &face in &self.order[start..end] {
                        let q = point_triangle_sq_dist_robust(p, &self.tris[face]);
                        let better = match best {
                            None => true,
                            Some(b) => {
                                q.sq_dist < b.sq_dist || (q.sq_dist == b.sq_dist && face < b.face)
                            }
                        };
                        if better {
                            best = Some(MeshQuery {
                                sq_dist: q.sq_dist,
                                face,
                                s: q.s,
                                t: q.t,
                            });
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = box_sq_dist(p, self.nodes[left].lo, self.nodes[left].hi);
                    let dr = box_sq_dist(p, self.nodes[right].lo, self.nodes[right].hi);
                    // push the farther child first so the nearer is visited first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}

/// Nearest-neighbor tree over a point set.
#[derive(Debug, Clone)]
pub struct PointTree<T> {
    points: Vec<Vec3<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> PointTree<T> {
    pub fn new(points: &[Vec3<T>]) -> Self {
        let bounds: Vec<_> = points.iter().map(|&p| (p, p)).collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build(&bounds, &mut order, 0, points.len(), &mut nodes);
        }
        Self {
            points: points.to_vec(),
            order,
            nodes,
        }
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    /// `(squared distance, index)` of the nearest stored point, lowest index
    /// on exact ties; `None` when empty.
    pub fn nearest(&self, p: Vec3<T>) -> Option<(T, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(T, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if let Some((d, _)) = best {
                if box_sq_dist(p, node.lo, node.hi) > d {
                    continue;
                }
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let d = self.points[i].dist_squared(p);
                        let better = match best {
                            None => true,
                            Some((bd, bi)) => d < bd || (d == bd && i < bi),
                        };
                        if better {
                            best = Some((d, i));
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = box_sq_dist(p, self.nodes[left].lo, self.nodes[left].hi);
                    let dr = box_sq_dist(p, self.nodes[right].lo, self.nodes[right].hi);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}

fn build<T: Real>(
    bounds: &[(Vec3<T>, Vec3<T>)],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node<T>>,
) -> usize {
    let (mut lo, mut hi) = bounds[order[start]];
    for &i in &order[start + 1..end] {
        lo = lo.min(bounds[i].0);
        hi = hi.max(bounds[i].1);
    }
    let index = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        kind: NodeKind::Leaf { start, end },
    });
    if end - start <= LEAF_SIZE {
        return index;
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let key = |i: usize| bounds[i].0[axis] + bounds[i].1[axis];
    order[start..end].sort_by(|&a, &b| {
        key(a)
            .partial_cmp(&key(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mid = start + (end - start) / 2;
    let left = build(bounds, order, start, mid, nodes);
    let right = build(bounds, order, mid, end, nodes);
    nodes[index].kind = NodeKind::Inner { left, right };
    index
}

#[inline]
fn box_sq_dist<T: Real>(p: Vec3<T>, lo: Vec3<T>, hi: Vec3<T>) -> T {
    let axis = |v: T, l: T, h: T| {
        if v < l {
            l - v
        } else if v > h {
            v - h
        } else {
            T::zero()
        }
    };
    let dx = axis(p.x, lo.x, hi.x);
    let dy = axis(p.y, lo.y, hi.y);
    let dz = axis(p.z, lo.z, hi.z);
    dx * dx + dy * dy + dz * dz
}

/// Uniform hash grid for fixed-radius "is any point within r" queries.
#[derive(Debug, Clone)]
pub struct PointGrid<T> {
    cell: T,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    points: Vec<Vec3<T>>,
}

impl<T: Real> PointGrid<T> {
    /// `radius` must be positive.
    pub fn new(points: &[Vec3<T>], radius: T) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, &p) in points.iter().enumerate() {
            cells.entry(cell_of(p, radius)).or_default().push(i);
        }
        Self {
            cell: radius,
            cells,
            points: points.to_vec(),
        }
    }

    /// True when some stored point has squared distance `<= sq_radius` from
    /// `p`; `sq_radius` must not exceed the construction radius squared.
    pub fn any_within(&self, p: Vec3<T>, sq_radius: T) -> bool {
        let (cx, cy, cz) = cell_of(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        if ids
                            .iter()
                            .any(|&i| self.points[i].dist_squared(p) <= sq_radius)
                        {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

fn cell_of<T: Real>(p: Vec3<T>, size: T) -> (i64, i64, i64) {
    let f = |v: T| (v / size).floor().to_i64().unwrap_or(i64::MAX);
    (f(p.x), f(p.y), f(p.z))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mesh::Primitive;
    use crate::tridist::point_mesh_sq_dist;

    #[test]
    fn bvh_matches_brute_force() {
        let mesh = Primitive::Torus {
            major: 0.4,
            minor: 0.15,
            rings: 20,
            segments: 10,
        }
        .build::<f64>();
        let bvh = TriangleBvh::new(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let p = Vec3::from_f64(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let fast = bvh.nearest(p).unwrap();
            let slow = point_mesh_sq_dist(p, &mesh).unwrap();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn bvh_breaks_ties_by_lowest_index() {
        // the cube center is equidistant from all 12 faces
        let cube = Primitive::Cube.build::<f64>();
        let q = TriangleBvh::new(&cube).nearest(Vec3::zero()).unwrap();
        assert_eq!(q.face, 0);
        assert_eq!(point_mesh_sq_dist(Vec3::zero(), &cube).unwrap().face, 0);
    }

    #[test]
    fn point_tree_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Vec3<f64>> = (0..500)
            .map(|_| Vec3::from_f64(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        // duplicates exercise the tie rule
        pts.push(pts[17]);
        pts.push(pts[3]);
        let tree = PointTree::new(&pts);
        for k in 0..1000 {
            let p = if k % 10 == 0 {
                pts[k % pts.len()]
            } else {
                Vec3::from_f64(rng.gen(), rng.gen(), rng.gen())
            };
            let slow = pts
                .iter()
                .enumerate()
                .fold(None, |b: Option<(f64, usize)>, (i, q)| {
                    let d = q.dist_squared(p);
                    match b {
                        Some((bd, _)) if bd <= d => b,
                        _ => Some((d, i)),
                    }
                });
            assert_eq!(tree.nearest(p), slow);
        }
        assert_eq!(PointTree::<f64>::new(&[]).nearest(Vec3::zero()), None);
    }

    #[test]
    fn grid_radius_queries() {
        let pts = vec![Vec3::from_f64(0.0, 0.0, 0.0), Vec3::from_f64(1.0, 1.0, 1.0)];
        let grid = PointGrid::new(&pts, 0.1);
        assert!(grid.any_within(Vec3::from_f64(0.05, 0.05, 0.0), 0.01));
        assert!(!grid.any_within(Vec3::from_f64(0.1, 0.1, 0.0), 0.01));
        assert!(grid.any_within(Vec3::from_f64(0.99, 1.0, 1.0), 0.01));
    }
}
