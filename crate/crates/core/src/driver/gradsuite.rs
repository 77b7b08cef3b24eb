//! Randomized finite-difference checks of every differentiable loss.
//! Configurations that sit within `tie_eps` of switching a held-fixed
//! discrete choice are redrawn; for distance ties the bound is raised to
//! what the difference stencil itself can cross.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphnet::{EncoderParams, EncoderTrace, LatentReference};
use crate::losses::{
    chamfer_tie_margin, check_gradient, loss_edge, loss_laplacian, loss_vtp, maxpool_tie_margin,
    ptp_from_samples, pts_from_samples, surface_tie_margin, GradientCheck,
};
use crate::mesh::{Mesh, Primitive};
use crate::rng::derive_seed;
use crate::sampler::sample_surface;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradLoss {
    Vtp,
    Ptp,
    Pts,
    Edge,
    Laplacian,
    Latent,
}

impl GradLoss {
    pub const ALL: [GradLoss; 6] = [
        GradLoss::Vtp,
        GradLoss::Ptp,
        GradLoss::Pts,
        GradLoss::Edge,
        GradLoss::Laplacian,
        GradLoss::Latent,
    ];
}

impl fmt::Display for GradLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradLoss::Vtp => "vtp",
            GradLoss::Ptp => "ptp",
            GradLoss::Pts => "pts",
            GradLoss::Edge => "edge",
            GradLoss::Laplacian => "laplacian",
            GradLoss::Latent => "latent",
        })
    }
}

impl FromStr for GradLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradSuiteReport {
    pub loss: GradLoss,
    pub trials: usize,
    pub passed: usize,
    pub resampled: usize,
    pub max_rel_err: f64,
}

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
const SAMPLES: usize = 24;
const MAX_REDRAWS: usize = 1000;
/// Bound on the distance between any two points of a random configuration.
const DIAMETER: f64 = 4.0;

/// How far one central-difference evaluation can shift a squared distance
/// between points at most `DIAMETER` apart. A nearest-neighbor gap smaller
/// than this can flip inside the stencil.
fn stencil_reach() -> f64 {
    2.0 * (2.0 * DIAMETER * STEP + STEP * STEP)
}

/// Runs `trials` independent checks of one loss.
pub fn gradient_suite(
    loss: GradLoss,
    trials: usize,
    seed: u64,
    tie_eps: f64,
) -> Result<GradSuiteReport> {
    let mut report = GradSuiteReport {
        loss,
        trials,
        passed: 0,
        resampled: 0,
        max_rel_err: 0.0,
    };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial as u64));
        let mut redraws = 0;
        let check = loop {
            if let Some(c) = try_configuration(loss, &mut rng, tie_eps)? {
                break c;
            }
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(Error::Config(format!(
                    "no configuration clear of ties after {MAX_REDRAWS} draws"
                )));
            }
        };
        report.resampled += redraws;
        report.passed += usize::from(check.passed);
        report.max_rel_err = report.max_rel_err.max(check.max_rel_err);
    }
    Ok(report)
}

fn jittered(base: &Mesh<f64>, amount: f64, rng: &mut ChaCha8Rng) -> Mesh<f64> {
    let k = rng.gen_range(0.6..1.2);
    let vertices = base
        .vertices()
        .iter()
        .map(|v| {
            v.scale(k)
                + Vec3::new(
                    rng.gen_range(-amount..amount),
                    rng.gen_range(-amount..amount),
                    rng.gen_range(-amount..amount),
                )
        })
        .collect();
    base.with_vertices(vertices).expect("same vertex count")
}

fn random_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3<f64>> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect()
}

/// One random configuration; `None` when it is too close to a tie.
fn try_configuration(
    loss: GradLoss,
    rng: &mut ChaCha8Rng,
    tie_eps: f64,
) -> Result<Option<GradientCheck>> {
    let distance_eps = tie_eps.max(stencil_reach());
    let ico0 = Primitive::IcoSphere { subdiv: 0 }.build::<f64>();
    let pred = jittered(&ico0, 0.15, rng);
    let check = match loss {
        GradLoss::Vtp => {
            let targets = random_points(SAMPLES, rng);
            if chamfer_tie_margin(&targets, pred.vertices()) < distance_eps {
                return Ok(None);
            }
            check_gradient(|m| loss_vtp(m, &targets), &pred, STEP, TOLERANCE)?
        }
        GradLoss::Ptp | GradLoss::Pts => {
            let target = jittered(&Primitive::Cube.build::<f64>(), 0.1, rng);
            let pred_samples = sample_surface(&pred, SAMPLES, rng.gen())?;
            let target_points = sample_surface(&target, SAMPLES, rng.gen())?.positions();
            let margin = if loss == GradLoss::Ptp {
                chamfer_tie_margin(&target_points, &pred_samples.positions())
            } else {
                surface_tie_margin(&target_points, &pred)
                    .min(surface_tie_margin(&pred_samples.positions(), &target))
            };
            if margin < distance_eps {
                return Ok(None);
            }
            if loss == GradLoss::Ptp {
                check_gradient(
                    |m| ptp_from_samples(m, &pred_samples.reposition(m)?, &target_points),
                    &pred,
                    STEP,
                    TOLERANCE,
                )?
            } else {
                check_gradient(
                    |m| pts_from_samples(m, &pred_samples.reposition(m)?, &target, &target_points),
                    &pred,
                    STEP,
                    TOLERANCE,
                )?
            }
        }
        GradLoss::Edge => {
            let m = jittered(&Primitive::IcoSphere { subdiv: 1 }.build(), 0.1, rng);
            check_gradient(|m| Ok(loss_edge(m)), &m, STEP, TOLERANCE)?
        }
        GradLoss::Laplacian => {
            let after = jittered(&pred, 0.1, rng);
            check_gradient(|m| loss_laplacian(&pred, m), &after, STEP, TOLERANCE)?
        }
        GradLoss::Latent => {
            let encoder = EncoderParams::random(&[3, 8, 6], rng.gen())?;
            let target = jittered(&Primitive::Cube.build::<f64>(), 0.1, rng);
            let trace = EncoderTrace::forward(&pred, &encoder)?;
            if maxpool_tie_margin(trace.pooled_features().view()) < tie_eps {
                return Ok(None);
            }
            let reference = LatentReference::new(encoder, &target)?;
            check_gradient(|m| reference.loss(m), &pred, STEP, TOLERANCE)?
        }
    };
    Ok(Some(check))
}
