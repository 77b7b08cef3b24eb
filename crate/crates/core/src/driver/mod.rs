//! Optimization loops and experiment runners.
//!
//! Vertex coordinates are optimized directly: every stage runs a fixed
//! number of optimizer steps on the weighted total loss, then splits faces
//! before the next stage. Each step draws fresh samples from a seed derived
//! from the master seed, the stage and the iteration, so a run is
//! reproducible bit for bit.

mod ablation;
mod gradsuite;
mod toy;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphnet::{
    evaluate_nearest_centroid, toy_shape_dataset, train_toy_encoder, EncoderParams,
    LatentReference, TrainConfig,
};
use crate::losses::{total_loss, LossContext, LossWeights, SurfaceMode};
use crate::mesh::Mesh;
use crate::metrics::{f1_meshes, MetricConfig};
use crate::optim::{Optimizer, OptimizerKind};
use crate::refine::{split_adaptive, split_uniform, SplitConfig, SplitReport};
use crate::rng::{derive_seed, derive_seed_path};
use crate::scalar::Real;
use crate::vec3::Vec3;

pub use ablation::{ablation_run, AblationRow, AblationTable, AblationVariant};
pub use gradsuite::{gradient_suite, GradLoss, GradSuiteReport};
pub use toy::{mean_iou, toy_square_triangle, toy_sweep, write_toy_csv, ToyConfig, ToyRow, ToyRun};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitStrategy {
    Adaptive(SplitConfig),
    Uniform,
    Never,
}

impl Default for SplitStrategy {
    fn default() -> Self {
        SplitStrategy::Adaptive(SplitConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of deform-then-split stages.
    pub stages: usize,
    pub iters_per_stage: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Multiplies `lr` from `switch_iter` on.
    pub lr_decay: f64,
    pub weights: LossWeights,
    /// Surface loss at the start of each stage.
    pub mode: SurfaceMode,
    /// Iteration within each stage where the refinement phase starts: the
    /// learning rate is decayed and a sample-to-sample loss gives way to the
    /// sample-to-surface loss. `None` keeps one phase.
    pub switch_iter: Option<usize>,
    pub samples: usize,
    pub split: SplitStrategy,
    /// Also split after the final stage.
    pub split_after_last: bool,
    /// Zero the z component of every gradient (planar problems).
    pub freeze_z: bool,
    pub metric: MetricConfig,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            stages: 3,
            iters_per_stage: 400,
            optimizer: OptimizerKind::default(),
            lr: 1e-3,
            lr_decay: 0.1,
            weights: LossWeights::default(),
            mode: SurfaceMode::PtP,
            switch_iter: Some(300),
            samples: 2500,
            split: SplitStrategy::default(),
            split_after_last: false,
            freeze_z: false,
            metric: MetricConfig::default(),
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::Config("stages must be at least 1".into()));
        }
        if self.iters_per_stage == 0 {
            return Err(Error::Config(
                "iterations per stage must be at least 1".into(),
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            )));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return Err(Error::Config(format!(
                "lr decay must be positive, got {}",
                self.lr_decay
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        if let SplitStrategy::Adaptive(c) = &self.split {
            c.validate()?;
        }
        self.optimizer.validate()?;
        self.weights.validate()?;
        self.metric.validate()
    }

    /// Surface loss and learning-rate factor at one iteration of a stage.
    pub fn phase(&self, iter: usize) -> (SurfaceMode, f64) {
        match self.switch_iter {
            Some(s) if iter >= s => {
                let mode = match self.mode {
                    SurfaceMode::PtP => SurfaceMode::PtS,
                    m => m,
                };
                (mode, self.lr_decay)
            }
            _ => (self.mode, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub stage: usize,
    pub iter: usize,
    pub mode: SurfaceMode,
    pub lr: f64,
    pub total: f64,
    pub latent: Option<f64>,
    pub surface: Option<f64>,
    pub edge: Option<f64>,
    pub laplacian: Option<f64>,
    pub vertices: usize,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitEvent {
    /// Stage after which the split was applied.
    pub stage: usize,
    pub report: SplitReport,
}

#[derive(Debug, Clone)]
pub struct FitTrace<T> {
    pub rows: Vec<TraceRow>,
    pub splits: Vec<SplitEvent>,
    pub final_mesh: Mesh<T>,
    /// F1 of the final mesh (percent).
    pub final_f1: f64,
}

impl<T: Real> FitTrace<T> {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.rows, w)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// CSV of every split decision: `stage,face_idx,curvature,split`.
    pub fn write_split_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["stage", "face_idx", "curvature", "split"])?;
        for ev in &self.splits {
            let mut flag = vec![false; ev.report.faces_before];
            for &f in &ev.report.split_face_indices {
                flag[f] = true;
            }
            for (f, &s) in flag.iter().enumerate() {
                let c = ev
                    .report
                    .curvatures
                    .as_ref()
                    .map_or(String::new(), |c| c[f].to_string());
                out.write_record(&[
                    ev.stage.to_string(),
                    f.to_string(),
                    c,
                    (s as u8).to_string(),
                ])?;
            }
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// `stage,iter,mode,lr,total,latent,surface,edge,laplacian,vertices,faces`;
/// terms with zero weight are left empty.
pub fn write_rows<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

/// Deforms `init` toward `target` in `config.stages` stages. `latent` is
/// required when the latent weight is positive.
pub fn fit_mesh<T: Real>(
    init: &Mesh<T>,
    target: &Mesh<T>,
    config: &FitConfig,
    latent: Option<&LatentReference<T>>,
) -> Result<FitTrace<T>> {
    config.validate()?;
    if config.weights.gamma1 > 0.0 && latent.is_none() {
        return Err(Error::Config(
            "the latent term has positive weight but no encoder was given".into(),
        ));
    }
    let mut mesh = init.clone();
    let mut rows = Vec::with_capacity(config.stages * config.iters_per_stage);
    let mut splits = Vec::new();
    for stage in 0..config.stages {
        let before = mesh.clone();
        let mut params: Vec<T> = mesh.vertices().iter().flat_map(|v| v.to_array()).collect();
        let mut opt = Optimizer::new(config.optimizer, params.len());
        for iter in 0..config.iters_per_stage {
            if !mesh.total_area().is_finite() {
                return Err(divergence(&rows, stage, iter, f64::INFINITY));
            }
            let (mode, factor) = config.phase(iter);
            let ctx = LossContext {
                target,
                before: &before,
                weights: config.weights,
                samples: config.samples,
                seed: derive_seed_path(config.seed, &[stage as u64, iter as u64]),
                mode,
                latent,
            };
            let out = total_loss(&mesh, &ctx)?;
            let b = out.breakdown;
            let lr = config.lr * factor;
            rows.push(TraceRow {
                stage,
                iter,
                mode,
                lr,
                total: b.total,
                latent: b.latent,
                surface: b.surface,
                edge: b.edge,
                laplacian: b.laplacian,
                vertices: mesh.num_vertices(),
                faces: mesh.num_faces(),
            });
            let mut grad = out.bundle.flat_gradient();
            if !b.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(divergence(&rows, stage, iter, b.total));
            }
            if config.freeze_z {
                grad.iter_mut()
                    .skip(2)
                    .step_by(3)
                    .for_each(|g| *g = T::zero());
            }
            opt.step(&mut params, &grad, T::lit(lr));
            if params.iter().any(|p| !p.is_finite()) {
                return Err(divergence(&rows, stage, iter, f64::NAN));
            }
            mesh = mesh.with_vertices(
                params
                    .chunks_exact(3)
                    .map(|c| Vec3::new(c[0], c[1], c[2]))
                    .collect(),
            )?;
        }
        if stage + 1 < config.stages || config.split_after_last {
            let split = match config.split {
                SplitStrategy::Adaptive(c) => Some(split_adaptive(&mesh, &c)?),
                SplitStrategy::Uniform => Some(split_uniform(&mesh)?),
                SplitStrategy::Never => None,
            };
            if let Some((next, report)) = split {
                mesh = next;
                splits.push(SplitEvent { stage, report });
            }
        }
    }
    let final_f1 = f1_meshes(
        &mesh,
        target,
        &config.metric,
        derive_seed(config.seed, 0x4631),
    )?
    .f1;
    Ok(FitTrace {
        rows,
        splits,
        final_mesh: mesh,
        final_f1,
    })
}

fn divergence(rows: &[TraceRow], stage: usize, iter: usize, loss: f64) -> Error {
    let mut buf = Vec::new();
    let trace_csv = match write_rows(rows, &mut buf) {
        Ok(()) => String::from_utf8_lossy(&buf).into_owned(),
        Err(e) => format!("trace unavailable: {e}"),
    };
    Error::Divergence {
        stage,
        iter,
        loss,
        trace_csv,
    }
}

/// Encoder trained on the cube-versus-sphere surrogate task with default
/// settings, plus its held-out nearest-centroid accuracy.
pub fn default_encoder<T: Real>(seed: u64) -> Result<(EncoderParams<T>, f64)> {
    let train = toy_shape_dataset::<T>(20, derive_seed(seed, 0x5452));
    let test = toy_shape_dataset::<T>(10, derive_seed(seed, 0x5445));
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let out = train_toy_encoder(&train, &config)?;
    let acc = evaluate_nearest_centroid(&out.encoder, &train, &test)?;
    Ok((out.encoder, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;

    fn quick() -> FitConfig {
        FitConfig {
            stages: 2,
            iters_per_stage: 20,
            samples: 200,
            switch_iter: Some(10),
            weights: LossWeights::new(0.0, 1.0, 0.3, 1.0).unwrap(),
            metric: MetricConfig {
                n_eval: 2000,
                ..MetricConfig::default()
            },
            ..FitConfig::default()
        }
    }

    #[test]
    fn zero_lr_keeps_init() {
        let init = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let target = Primitive::Cube.build::<f64>();
        let cfg = FitConfig {
            lr: 0.0,
            split: SplitStrategy::Never,
            ..quick()
        };
        let t = fit_mesh(&init, &target, &cfg, None).unwrap();
        assert_eq!(t.final_mesh, init);
        assert_eq!(t.rows.len(), 40);
    }

    #[test]
    fn phases() {
        let cfg = quick();
        assert_eq!(cfg.phase(0), (SurfaceMode::PtP, 1.0));
        assert_eq!(cfg.phase(10), (SurfaceMode::PtS, 0.1));
        let vtp = FitConfig {
            mode: SurfaceMode::VtP,
            ..quick()
        };
        assert_eq!(vtp.phase(15).0, SurfaceMode::VtP);
    }

    #[test]
    fn latent_weight_needs_encoder() {
        let m = Primitive::Cube.build::<f64>();
        let cfg = FitConfig {
            weights: LossWeights::default(),
            ..quick()
        };
        assert!(matches!(
            fit_mesh(&m, &m, &cfg, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            FitConfig {
                stages: 0,
                ..quick()
            },
            FitConfig {
                iters_per_stage: 0,
                ..quick()
            },
            FitConfig {
                samples: 0,
                ..quick()
            },
            FitConfig {
                lr: f64::NAN,
                ..quick()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        let init = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let target = Primitive::Cube.build::<f64>();
        let cfg = FitConfig {
            optimizer: OptimizerKind::GradientDescent,
            lr: 1e6,
            ..quick()
        };
        match fit_mesh(&init, &target, &cfg, None) {
            Err(Error::Divergence { trace_csv, .. }) => {
                assert!(trace_csv.starts_with("stage,iter"))
            }
            other => panic!("expected divergence, got {:?}", other.map(|t| t.final_f1)),
        }
    }

    #[test]
    fn trace_is_reproducible_and_vertex_counts_grow() {
        let init = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let target = Primitive::Cube.build::<f64>();
        let a = fit_mesh(&init, &target, &quick(), None).unwrap();
        let b = fit_mesh(&init, &target, &quick(), None).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(a.rows.windows(2).all(|w| w[0].vertices <= w[1].vertices));
    }
}
