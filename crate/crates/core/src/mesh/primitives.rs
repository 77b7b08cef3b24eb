use std::collections::HashMap;
use std::f64::consts::PI;
use std::str::FromStr;

use super::{Face, Mesh};
use crate::error::Error;
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Built-in shapes. 3D kinds are closed and consistently oriented
/// (counter-clockwise seen from outside); 2D kinds lie in the `z = 0` plane
/// and are fan-triangulated from their centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Unit-radius icosphere after `subdiv` rounds of 1-to-4 subdivision.
    IcoSphere { subdiv: u32 },
    /// Axis-aligned cube of side 1 centered at the origin.
    Cube,
    /// Icosphere scaled by the three semi-axes.
    Ellipsoid { a: f64, b: f64, c: f64, subdiv: u32 },
    /// Regular tetrahedron inscribed in the cube `[-1, 1]^3`.
    Tetrahedron,
    /// Torus around the z axis.
    Torus {
        major: f64,
        minor: f64,
        rings: usize,
        segments: usize,
    },
    /// Flat `nx x ny` grid over `[0, 1]^2`, two triangles per cell.
    Grid { nx: usize, ny: usize },
    /// Square `[-1, 1]^2`: 4 corners plus the centroid, 4 faces.
    Square2d,
    /// Triangle `(-1,-1), (1,-1), (0,1)` plus its centroid, 3 faces.
    Triangle2d,
}

impl Primitive {
    pub fn build<T: Real>(&self) -> Mesh<T> {
        let (verts, faces) = match *self {
            Primitive::IcoSphere { subdiv } => icosphere(subdiv),
            Primitive::Cube => cube(),
            Primitive::Ellipsoid { a, b, c, subdiv } => {
                let (v, f) = icosphere(subdiv);
                (
                    v.into_iter()
                        .map(|p| [p[0] * a, p[1] * b, p[2] * c])
                        .collect(),
                    f,
                )
            }
            Primitive::Tetrahedron => (
                vec![
                    [1.0, 1.0, 1.0],
                    [1.0, -1.0, -1.0],
                    [-1.0, 1.0, -1.0],
                    [-1.0, -1.0, 1.0],
                ],
                vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
            ),
            Primitive::Torus {
                major,
                minor,
                rings,
                segments,
            } => torus(major, minor, rings.max(3), segments.max(3)),
            Primitive::Grid { nx, ny } => grid(nx.max(1), ny.max(1)),
            Primitive::Square2d => fan(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
            Primitive::Triangle2d => fan(&[[-1.0, -1.0], [1.0, -1.0], [0.0, 1.0]]),
        };
        let verts = verts
            .into_iter()
            .map(|p| Vec3::from_f64(p[0], p[1], p[2]))
            .collect();
        Mesh::new(verts, faces).expect("primitive connectivity is valid")
    }
}

impl FromStr for Primitive {
    type Err = Error;

    /// Accepts `ico_sphere[:subdiv]`, `cube`, `tetrahedron`, `torus`,
    /// `ellipsoid:a,b,c[,subdiv]`, `grid:nx,ny`, `square2d`, `triangle2d`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad primitive argument {a:?}")))
                })
                .collect::<Result<_, _>>()?
        };
        let arg = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
        Ok(match name {
            "ico_sphere" | "icosphere" | "sphere" => Primitive::IcoSphere {
                subdiv: arg(0, 2.0) as u32,
            },
            "cube" => Primitive::Cube,
            "tetrahedron" => Primitive::Tetrahedron,
            "ellipsoid" => Primitive::Ellipsoid {
                a: arg(0, 1.0),
                b: arg(1, 1.0),
                c: arg(2, 1.0),
                subdiv: arg(3, 2.0) as u32,
            },
            "torus" => Primitive::Torus {
                major: arg(0, 0.35),
                minor: arg(1, 0.15),
                rings: arg(2, 24.0) as usize,
                segments: arg(3, 12.0) as usize,
            },
            "grid" => Primitive::Grid {
                nx: arg(0, 4.0) as usize,
                ny: arg(1, 4.0) as usize,
            },
            "square2d" => Primitive::Square2d,
            "triangle2d" => Primitive::Triangle2d,
            other => return Err(Error::Config(format!("unknown primitive {other:?}"))),
        })
    }
}

type Raw = (Vec<[f64; 3]>, Vec<Face>);

fn cube() -> Raw {
    let verts = (0..8)
        .map(|i| {
            [
                if i & 1 == 0 { -0.5 } else { 0.5 },
                if i & 2 == 0 { -0.5 } else { 0.5 },
                if i & 4 == 0 { -0.5 } else { 0.5 },
            ]
        })
        .collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    (verts, faces)
}

fn icosphere(subdiv: u32) -> Raw {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<Face> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for v in &mut verts {
        *v = unit(*v);
    }
    for _ in 0..subdiv {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            *midpoint.entry(super::ordered(a, b)).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(unit([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

fn unit(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

fn torus(major: f64, minor: f64, rings: usize, segments: usize) -> Raw {
    let mut verts = Vec::with_capacity(rings * segments);
    for i in 0..rings {
        let u = 2.0 * PI * i as f64 / rings as f64;
        for j in 0..segments {
            let v = 2.0 * PI * j as f64 / segments as f64;
            let r = major + minor * v.cos();
            verts.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % rings) * segments + (j % segments);
    let mut faces = Vec::with_capacity(2 * rings * segments);
    for i in 0..rings {
        for j in 0..segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    (verts, faces)
}

fn grid(nx: usize, ny: usize) -> Raw {
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push([i as f64 / nx as f64, j as f64 / ny as f64, 0.0]);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    (verts, faces)
}

/// Counter-clockwise polygon, fan-triangulated around an appended centroid.
fn fan(corners: &[[f64; 2]]) -> Raw {
    let n = corners.len();
    let cx = corners.iter().map(|c| c[0]).sum::<f64>() / n as f64;
    let cy = corners.iter().map(|c| c[1]).sum::<f64>() / n as f64;
    let mut verts: Vec<[f64; 3]> = corners.iter().map(|c| [c[0], c[1], 0.0]).collect();
    verts.push([cx, cy, 0.0]);
    let faces = (0..n).map(|i| [n, i, (i + 1) % n]).collect();
    (verts, faces)
}
