//! Planar toy study: move the vertices of a square so that it covers a
//! triangle, under each surface loss, and score the result by IoU.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{surface_loss, SurfaceMode};
use crate::mesh::{Mesh, Primitive};
use crate::metrics::polygon_iou_2d;
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::derive_seed;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub loss: SurfaceMode,
    pub n_points: usize,
    pub iters: usize,
    pub lr: f64,
    pub seed: u64,
    pub raster_resolution: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            loss: SurfaceMode::PtS,
            n_points: 50,
            iters: 2000,
            lr: 0.01,
            seed: 0,
            raster_resolution: 512,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub iou: f64,
    pub final_mesh: Mesh<f64>,
    /// Loss at the last iteration, before its step.
    pub final_loss: f64,
}

/// Optimizes the fan-triangulated square toward the triangle with Adam,
/// z held at 0 and fresh samples every iteration.
pub fn toy_square_triangle(config: &ToyConfig) -> Result<ToyRun> {
    if config.n_points == 0 {
        return Err(Error::Config(
            "the toy needs at least one sample point".into(),
        ));
    }
    let target = Primitive::Triangle2d.build::<f64>();
    let mut mesh = Primitive::Square2d.build::<f64>();
    let mut params: Vec<f64> = mesh.vertices().iter().flat_map(|v| v.to_array()).collect();
    let mut opt = Optimizer::new(OptimizerKind::default(), params.len());
    let mut final_loss = f64::NAN;
    for iter in 0..config.iters {
        let seed = derive_seed(config.seed, iter as u64);
        let g = surface_loss(config.loss, &mesh, &target, config.n_points, seed)?;
        final_loss = g.value;
        let mut grad = g.flat_gradient();
        grad.iter_mut().skip(2).step_by(3).for_each(|v| *v = 0.0);
        opt.step(&mut params, &grad, config.lr);
        mesh = mesh.with_vertices(
            params
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect(),
        )?;
    }
    let iou = polygon_iou_2d(&mesh, &target, config.raster_resolution)?;
    Ok(ToyRun {
        iou,
        final_mesh: mesh,
        final_loss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyRow {
    pub loss: SurfaceMode,
    pub n_points: usize,
    pub seed: u64,
    pub iou: f64,
}

/// Every combination of loss, sample count and seed. Runs in parallel;
/// rows come back in loss, count, seed order.
pub fn toy_sweep(
    losses: &[SurfaceMode],
    counts: &[usize],
    seeds: &[u64],
    base: &ToyConfig,
) -> Result<Vec<ToyRow>> {
    let jobs: Vec<(SurfaceMode, usize, u64)> = losses
        .iter()
        .flat_map(|&l| {
            counts
                .iter()
                .flat_map(move |&n| seeds.iter().map(move |&s| (l, n, s)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(loss, n_points, seed)| {
            let run = toy_square_triangle(&ToyConfig {
                loss,
                n_points,
                seed,
                ..*base
            })?;
            Ok(ToyRow {
                loss,
                n_points,
                seed,
                iou: run.iou,
            })
        })
        .collect()
}

/// Mean IoU of the rows matching a loss and sample count.
pub fn mean_iou(rows: &[ToyRow], loss: SurfaceMode, n_points: usize) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.loss == loss && r.n_points == n_points)
        .map(|r| r.iou)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// CSV with header `loss,n_points,seed,iou`.
pub fn write_toy_csv<W: Write>(rows: &[ToyRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_points_rejected() {
        let cfg = ToyConfig {
            n_points: 0,
            ..ToyConfig::default()
        };
        assert!(matches!(toy_square_triangle(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn short_pts_run_improves_iou() {
        let start = polygon_iou_2d(
            &Primitive::Square2d.build::<f64>(),
            &Primitive::Triangle2d.build::<f64>(),
            256,
        )
        .unwrap();
        let run = toy_square_triangle(&ToyConfig {
            iters: 300,
            n_points: 30,
            raster_resolution: 256,
            ..ToyConfig::default()
        })
        .unwrap();
        assert!(run.iou > start, "{} vs {start}", run.iou);
        assert!(run.final_mesh.vertices().iter().all(|v| v.z == 0.0));
    }

    #[test]
    fn sweep_order_and_csv() {
        let base = ToyConfig {
            iters: 5,
            raster_resolution: 64,
            ..ToyConfig::default()
        };
        let rows = toy_sweep(
            &[SurfaceMode::VtP, SurfaceMode::PtS],
            &[1, 3],
            &[0, 1],
            &base,
        )
        .unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(
            (rows[0].loss, rows[0].n_points, rows[0].seed),
            (SurfaceMode::VtP, 1, 0)
        );
        assert_eq!(
            (rows[7].loss, rows[7].n_points, rows[7].seed),
            (SurfaceMode::PtS, 3, 1)
        );
        assert!(mean_iou(&rows, SurfaceMode::PtS, 3).is_some());
        let mut buf = Vec::new();
        write_toy_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("loss,n_points,seed,iou\n"));
    }
}
