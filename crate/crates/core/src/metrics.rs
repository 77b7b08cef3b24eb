//! Surface F1 score and rasterized 2D IoU.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::rng::derive_seed;
use crate::sampler::sample_surface;
use crate::scalar::Real;
use crate::spatial::PointGrid;
use crate::vec3::Vec3;

/// Vertices with `|z|` above this make a mesh non-planar for
/// [`polygon_iou_2d`].
pub const PLANAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Threshold on the squared distance.
    pub tau: f64,
    pub n_eval: usize,
    pub raster_resolution: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            tau: 1e-4,
            n_eval: 100_000,
            raster_resolution: 512,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.n_eval == 0 {
            return Err(Error::Config("n_eval must be at least 1".into()));
        }
        if self.raster_resolution < 64 {
            return Err(Error::Config(format!(
                "raster resolution must be at least 64, got {}",
                self.raster_resolution
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Percentage of points within squared distance `tau` of the other set, in
/// both directions, combined by the harmonic mean. All values in `[0, 100]`.
pub fn f1_score<T: Real>(pred: &[Vec3<T>], target: &[Vec3<T>], tau: T) -> Result<F1Score> {
    if pred.is_empty() {
        return Err(Error::EmptyInput("predicted points"));
    }
    if target.is_empty() {
        return Err(Error::EmptyInput("target points"));
    }
    if !(tau > T::zero()) {
        return Err(Error::Config("tau must be positive".into()));
    }
    let precision = matched_percent(pred, target, tau);
    let recall = matched_percent(target, pred, tau);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(F1Score {
        precision,
        recall,
        f1,
    })
}

fn matched_percent<T: Real>(queries: &[Vec3<T>], points: &[Vec3<T>], tau: T) -> f64 {
    let grid = PointGrid::new(points, tau.sqrt());
    let hits = if queries.len() >= 4096 {
        queries
            .par_iter()
            .filter(|&&q| grid.any_within(q, tau))
            .count()
    } else {
        queries.iter().filter(|&&q| grid.any_within(q, tau)).count()
    };
    100.0 * hits as f64 / queries.len() as f64
}

/// F1 between `config.n_eval` samples of each mesh. Both sides use the same
/// draws, so a mesh scores exactly 100 against itself.
pub fn f1_meshes<T: Real>(
    pred: &Mesh<T>,
    target: &Mesh<T>,
    config: &MetricConfig,
    seed: u64,
) -> Result<F1Score> {
    config.validate()?;
    let seed = derive_seed(seed, 0x4631);
    let p = sample_surface(pred, config.n_eval, seed)?.positions();
    let t = sample_surface(target, config.n_eval, seed)?.positions();
    f1_score(&p, &t, T::lit(config.tau))
}

/// Intersection over union of the regions covered by two meshes lying in the
/// `z = 0` plane, measured on a `resolution x resolution` grid of cell
/// centers spanning their joint bounding box. A cell counts as covered when
/// its center is inside (or on the boundary of) any triangle, whatever the
/// triangle's winding.
pub fn polygon_iou_2d<T: Real>(a: &Mesh<T>, b: &Mesh<T>, resolution: usize) -> Result<f64> {
    if resolution < 64 {
        return Err(Error::Config(format!(
            "raster resolution must be at least 64, got {resolution}"
        )));
    }
    check_planar(a)?;
    check_planar(b)?;
    let (Some((lo_a, hi_a)), Some((lo_b, hi_b))) = (a.bounds(), b.bounds()) else {
        return Err(Error::EmptyInput("mesh vertices"));
    };
    let lo = lo_a.min(lo_b).cast::<f64>();
    let hi = hi_a.max(hi_b).cast::<f64>();
    let grid = Raster {
        x0: lo.x,
        y0: lo.y,
        dx: (hi.x - lo.x) / resolution as f64,
        dy: (hi.y - lo.y) / resolution as f64,
        n: resolution,
    };
    if !(grid.dx > 0.0 && grid.dy > 0.0) {
        // both shapes collapse to a segment or a point
        return Ok(0.0);
    }
    let ma = grid.cover(a);
    let mb = grid.cover(b);
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in ma.iter().zip(&mb) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

fn check_planar<T: Real>(m: &Mesh<T>) -> Result<()> {
    for (i, v) in m.vertices().iter().enumerate() {
        let z = v.z.as_f64();
        if !(z.abs() <= PLANAR_EPS) {
            return Err(Error::NonPlanar { vertex: i, z });
        }
    }
    Ok(())
}

struct Raster {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    n: usize,
}

impl Raster {
    fn cover<T: Real>(&self, m: &Mesh<T>) -> Vec<bool> {
        let mut mask = vec![false; self.n * self.n];
        for f in 0..m.num_faces() {
            let [p, q, r] = m.face_vertices(f).map(|v| (v.x.as_f64(), v.y.as_f64()));
            let xmin = p.0.min(q.0).min(r.0);
            let xmax = p.0.max(q.0).max(r.0);
            let ymin = p.1.min(q.1).min(r.1);
            let ymax = p.1.max(q.1).max(r.1);
            let (i0, i1) = self.span(xmin, xmax, self.x0, self.dx);
            let (j0, j1) = self.span(ymin, ymax, self.y0, self.dy);
            for j in j0..j1 {
                let cy = self.y0 + (j as f64 + 0.5) * self.dy;
                for i in i0..i1 {
                    let cx = self.x0 + (i as f64 + 0.5) * self.dx;
                    if in_triangle((cx, cy), p, q, r) {
                        mask[j * self.n + i] = true;
                    }
                }
            }
        }
        mask
    }

    /// Cell indices whose centers can fall in `[lo, hi]`.
    fn span(&self, lo: f64, hi: f64, origin: f64, step: f64) -> (usize, usize) {
        let a = ((lo - origin) / step - 0.5).ceil().max(0.0) as usize;
        let b = (((hi - origin) / step - 0.5).floor() + 1.0).clamp(0.0, self.n as f64) as usize;
        (a.min(self.n), b)
    }
}

fn in_triangle(c: (f64, f64), p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> bool {
    let cross =
        |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let d1 = cross(p, q);
    let d2 = cross(q, r);
    let d3 = cross(r, p);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    let area = (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
    area != 0.0 && !(has_neg && has_pos)
}

/// One row of a metric report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub config: String,
}

/// CSV with header `metric,value,config`.
pub fn write_metric_rows<W: Write>(rows: &[MetricRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;

    fn p(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::from_f64(x, y, z)
    }

    #[test]
    fn f1_hand_cases() {
        let a = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)];
        assert_eq!(f1_score(&a, &a, 1e-4).unwrap().f1, 100.0);
        let far = [p(5.0, 0.0, 0.0)];
        assert_eq!(f1_score(&a, &far, 1e-4).unwrap().f1, 0.0);
        let s = f1_score(&a, &a[..1], 1e-4).unwrap();
        assert_eq!((s.precision, s.recall), (50.0, 100.0));
        assert!((s.f1 - 200.0 / 3.0).abs() < 1e-12);
        assert!(f1_score::<f64>(&[], &a, 1e-4).is_err());
    }

    #[test]
    fn tau_is_squared() {
        let a = [p(0.0, 0.0, 0.0)];
        let b = [p(0.01, 0.0, 0.0)];
        assert_eq!(f1_score(&a, &b, 1e-4).unwrap().f1, 100.0);
        assert_eq!(f1_score(&a, &b, 0.99e-4).unwrap().f1, 0.0);
    }

    fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Mesh<f64> {
        Mesh::new(
            vec![
                p(x0, y0, 0.0),
                p(x1, y0, 0.0),
                p(x1, y1, 0.0),
                p(x0, y1, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn iou_cases() {
        let sq = Primitive::Square2d.build::<f64>();
        assert_eq!(polygon_iou_2d(&sq, &sq, 128).unwrap(), 1.0);
        let far = rect(5.0, 6.0, 5.0, 6.0);
        assert_eq!(polygon_iou_2d(&sq, &far, 128).unwrap(), 0.0);
        for res in [256, 512] {
            let half =
                polygon_iou_2d(&rect(0.0, 1.0, 0.0, 1.0), &rect(0.0, 0.5, 0.0, 1.0), res).unwrap();
            assert!((half - 0.5).abs() <= 2.0 / res as f64, "{half}");
        }
    }

    #[test]
    fn iou_rejects_lifted_mesh() {
        let sq = Primitive::Square2d.build::<f64>();
        let lifted = sq.translated(p(0.0, 0.0, 0.1));
        assert!(matches!(
            polygon_iou_2d(&sq, &lifted, 128),
            Err(Error::NonPlanar { .. })
        ));
        assert!(polygon_iou_2d(&sq, &sq, 32).is_err());
    }

    #[test]
    fn f1_of_mesh_with_itself() {
        let m = Primitive::Cube.build::<f64>();
        let cfg = MetricConfig {
            n_eval: 20_000,
            ..MetricConfig::default()
        };
        // shared draws land on the same points
        let s = f1_meshes(&m, &m, &cfg, 0).unwrap();
        assert_eq!(s.f1, 100.0);
        // each draw keeps a twin at the shift distance, so only shifts past
        // sqrt(tau) = 0.01 cost anything
        let near = f1_meshes(&m.translated(p(0.005, 0.0, 0.0)), &m, &cfg, 0).unwrap();
        assert_eq!(near.f1, 100.0);
        let far = f1_meshes(&m.translated(p(0.02, 0.0, 0.0)), &m, &cfg, 0).unwrap();
        assert!(far.f1 > 10.0 && far.f1 < 90.0, "{far:?}");
    }

    #[test]
    fn report_csv() {
        let rows = vec![MetricRow {
            metric: "f1".into(),
            value: 12.5,
            config: "tau=0.0001".into(),
        }];
        let mut buf = Vec::new();
        write_metric_rows(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "metric,value,config\nf1,12.5,tau=0.0001\n"
        );
    }
}
