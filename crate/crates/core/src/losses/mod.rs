//! Surface losses and regularizers with analytic vertex gradients.
//!
//! Every loss returns a [`GradientBundle`]: its value and the derivative
//! with respect to each predicted vertex. Discrete choices inside a loss
//! (which sample is nearest, which face is closest, which face a sample was
//! drawn from) are held fixed while differentiating.

mod chamfer;
mod gradcheck;
mod nearest;
mod regularizers;
mod surface;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphnet::LatentReference;
use crate::mesh::Mesh;
use crate::rng::derive_seed;
use crate::sampler::sample_surface;
use crate::scalar::Real;
use crate::vec3::Vec3;

pub use chamfer::{chamfer_points, loss_ptp, loss_vtp, ptp_from_samples, ChamferResult, SeedPair};
pub use gradcheck::{
    chamfer_tie_margin, check_gradient, maxpool_tie_margin, surface_tie_margin, GradientCheck,
};
pub use regularizers::{loss_edge, loss_laplacian};
pub use surface::{loss_pts, pts_from_samples};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle<T> {
    pub value: T,
    pub d_vertices: Vec<Vec3<T>>,
}

impl<T: Real> GradientBundle<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            value: T::zero(),
            d_vertices: vec![Vec3::zero(); n],
        }
    }

    /// Adds `g` to the three vertices of a face, weighted.
    #[inline]
    pub(crate) fn scatter(&mut self, face: [usize; 3], weights: [T; 3], g: Vec3<T>) {
        for (&v, &w) in face.iter().zip(&weights) {
            self.d_vertices[v] += g.scale(w);
        }
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, other: &Self, k: T) -> Result<()> {
        if other.d_vertices.len() != self.d_vertices.len() {
            return Err(Error::Shape(format!(
                "gradient over {} vertices added to one over {}",
                other.d_vertices.len(),
                self.d_vertices.len()
            )));
        }
        self.value += k * other.value;
        for (a, &b) in self.d_vertices.iter_mut().zip(&other.d_vertices) {
            *a += b.scale(k);
        }
        Ok(())
    }

    /// Gradient as a flat `[x0, y0, z0, x1, ...]` vector.
    pub fn flat_gradient(&self) -> Vec<T> {
        self.d_vertices.iter().flat_map(|v| v.to_array()).collect()
    }
}

/// Weights of the latent, surface, edge and Laplacian terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            gamma1: 0.001,
            gamma2: 1.0,
            gamma3: 0.3,
            gamma4: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64, gamma4: f64) -> Result<Self> {
        let w = Self {
            gamma1,
            gamma2,
            gamma3,
            gamma4,
        };
        w.validate()?;
        Ok(w)
    }

    /// Only the surface term.
    pub fn surface_only() -> Self {
        Self::new(0.0, 1.0, 0.0, 0.0).expect("valid")
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma1, self.gamma2, self.gamma3, self.gamma4];
        if all.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Config(format!(
                "loss weights must be finite and non-negative, got {all:?}"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.gamma1, self.gamma2, self.gamma3, self.gamma4]
    }
}

impl FromStr for LossWeights {
    type Err = Error;

    /// `g1,g2,g3,g4`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad weight list {s:?}: {e}")))?;
        match parts[..] {
            [a, b, c, d] => Self::new(a, b, c, d),
            _ => Err(Error::Config(format!("expected four weights, got {s:?}"))),
        }
    }
}

/// Which loss ties the predicted surface to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceMode {
    /// Predicted vertices against target samples.
    VtP,
    /// Samples against samples.
    PtP,
    /// Samples against the exact surfaces.
    PtS,
}

impl fmt::Display for SurfaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurfaceMode::VtP => "vtp",
            SurfaceMode::PtP => "ptp",
            SurfaceMode::PtS => "pts",
        })
    }
}

impl FromStr for SurfaceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vtp" => Ok(SurfaceMode::VtP),
            "ptp" => Ok(SurfaceMode::PtP),
            "pts" => Ok(SurfaceMode::PtS),
            _ => Err(Error::Config(format!(
                "unknown surface loss {s:?} (vtp, ptp, pts)"
            ))),
        }
    }
}

/// Evaluates the surface loss selected by `mode` with `n` samples.
pub fn surface_loss<T: Real>(
    mode: SurfaceMode,
    pred: &Mesh<T>,
    target: &Mesh<T>,
    n: usize,
    seed: u64,
) -> Result<GradientBundle<T>> {
    match mode {
        SurfaceMode::VtP => {
            let pts = sample_surface(target, n, SeedPair::derived(seed).target)?.positions();
            loss_vtp(pred, &pts)
        }
        SurfaceMode::PtP => loss_ptp(pred, target, n, seed),
        SurfaceMode::PtS => loss_pts(pred, target, n, seed),
    }
}

/// Unweighted term values of one total-loss evaluation; `None` for terms
/// whose weight is zero (they are not evaluated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub weights: LossWeights,
    pub mode: SurfaceMode,
    pub latent: Option<f64>,
    pub surface: Option<f64>,
    pub edge: Option<f64>,
    pub laplacian: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss<T> {
    pub bundle: GradientBundle<T>,
    pub breakdown: LossBreakdown,
}

/// Inputs of [`total_loss`] other than the predicted mesh.
#[derive(Debug, Clone, Copy)]
pub struct LossContext<'a, T> {
    pub target: &'a Mesh<T>,
    /// Reference for the Laplacian term; same connectivity as the prediction.
    pub before: &'a Mesh<T>,
    pub weights: LossWeights,
    pub samples: usize,
    pub seed: u64,
    pub mode: SurfaceMode,
    /// Needed when `weights.gamma1 > 0`.
    pub latent: Option<&'a LatentReference<T>>,
}

/// `g1 L_latent + g2 L_surface + g3 L_edge + g4 L_laplacian`.
pub fn total_loss<T: Real>(pred: &Mesh<T>, ctx: &LossContext<'_, T>) -> Result<TotalLoss<T>> {
    let w = ctx.weights;
    w.validate()?;
    let mut bundle = GradientBundle::zeros(pred.num_vertices());
    let mut add = |gamma: f64, term: Result<GradientBundle<T>>| -> Result<f64> {
        let term = term?;
        bundle.add_scaled(&term, T::lit(gamma))?;
        Ok(term.value.as_f64())
    };
    let latent = if w.gamma1 > 0.0 {
        let reference = ctx.latent.ok_or_else(|| {
            Error::Config("the latent term has positive weight but no encoder was given".into())
        })?;
        Some(add(w.gamma1, reference.loss(pred))?)
    } else {
        None
    };
    let surface = if w.gamma2 > 0.0 {
        let seed = derive_seed(ctx.seed, 0x5355_5246);
        Some(add(
            w.gamma2,
            surface_loss(ctx.mode, pred, ctx.target, ctx.samples, seed),
        )?)
    } else {
        None
    };
    let edge = if w.gamma3 > 0.0 {
        Some(add(w.gamma3, Ok(loss_edge(pred)))?)
    } else {
        None
    };
    let laplacian = if w.gamma4 > 0.0 {
        Some(add(w.gamma4, loss_laplacian(ctx.before, pred))?)
    } else {
        None
    };
    let breakdown = LossBreakdown {
        weights: w,
        mode: ctx.mode,
        latent,
        surface,
        edge,
        laplacian,
        total: bundle.value.as_f64(),
    };
    Ok(TotalLoss { bundle, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Primitive;

    #[test]
    fn zero_weights_give_zero() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let t = Primitive::Cube.build::<f64>();
        let ctx = LossContext {
            target: &t,
            before: &m,
            weights: LossWeights::new(0.0, 0.0, 0.0, 0.0).unwrap(),
            samples: 100,
            seed: 0,
            mode: SurfaceMode::PtS,
            latent: None,
        };
        let out = total_loss(&m, &ctx).unwrap();
        assert_eq!(out.bundle.value, 0.0);
        assert!(out.bundle.d_vertices.iter().all(|v| *v == Vec3::zero()));
    }

    #[test]
    fn surface_only_on_identical_meshes() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let ctx = LossContext {
            target: &m,
            before: &m,
            weights: LossWeights::surface_only(),
            samples: 200,
            seed: 3,
            mode: SurfaceMode::PtS,
            latent: None,
        };
        assert!(total_loss(&m, &ctx).unwrap().bundle.value < 1e-9);
    }

    #[test]
    fn defaults_are_echoed() {
        let m = Primitive::IcoSphere { subdiv: 1 }.build::<f64>();
        let t = Primitive::Cube.build::<f64>();
        let enc = crate::graphnet::EncoderParams::random(&[3, 8, 8], 0).unwrap();
        let reference = LatentReference::new(enc, &t).unwrap();
        let ctx = LossContext {
            target: &t,
            before: &m,
            weights: LossWeights::default(),
            samples: 50,
            seed: 1,
            mode: SurfaceMode::PtP,
            latent: Some(&reference),
        };
        let out = total_loss(&m, &ctx).unwrap();
        assert_eq!(out.breakdown.weights.as_array(), [0.001, 1.0, 0.3, 1.0]);
        let b = out.breakdown;
        let recombined = 0.001 * b.latent.unwrap()
            + b.surface.unwrap()
            + 0.3 * b.edge.unwrap()
            + b.laplacian.unwrap();
        assert!((recombined - b.total).abs() < 1e-9 * b.total);
    }

    #[test]
    fn latent_weight_without_encoder_is_an_error() {
        let m = Primitive::Cube.build::<f64>();
        let ctx = LossContext {
            target: &m,
            before: &m,
            weights: LossWeights::default(),
            samples: 10,
            seed: 0,
            mode: SurfaceMode::PtS,
            latent: None,
        };
        assert!(matches!(total_loss(&m, &ctx), Err(Error::Config(_))));
    }

    #[test]
    fn parse_weights_and_modes() {
        let w: LossWeights = "0.001,1,0.3,1".parse().unwrap();
        assert_eq!(w, LossWeights::default());
        assert!("1,2,3".parse::<LossWeights>().is_err());
        assert!("1,-2,3,4".parse::<LossWeights>().is_err());
        assert_eq!("PtS".parse::<SurfaceMode>().unwrap(), SurfaceMode::PtS);
        assert!("x".parse::<SurfaceMode>().is_err());
    }
}
