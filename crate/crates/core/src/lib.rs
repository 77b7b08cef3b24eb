//! Differentiable triangle-mesh fitting.
//!
//! Meshes are deformed toward a target by gradient descent on surface
//! losses whose gradients are derived analytically: samples are
//! reparameterized over faces, point-to-surface distances come from an
//! exact point-triangle kernel, and shapes can be compared through a
//! graph-convolution encoder. Faces of high curvature are split between
//! optimization stages so detail is added only where it is needed.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common choice.

// `!(x > 0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod graphnet;
pub mod losses;
pub mod mesh;
pub mod metrics;
pub mod optim;
pub mod refine;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod spatial;
pub mod tridist;
pub mod vec3;

pub use error::{Error, Result};
pub use graphnet::{encode_mesh, loss_latent, EncoderParams, LatentReference, LayerParams};
pub use losses::{
    loss_edge, loss_laplacian, loss_ptp, loss_pts, loss_vtp, total_loss, GradientBundle,
    LossContext, LossWeights, SurfaceMode,
};
pub use mesh::{AdjacencyMode, AdjacencyOp, EdgeSet, Mesh, Primitive};
pub use refine::{split_adaptive, split_uniform, SplitConfig, SplitReport};
pub use sampler::{sample_jacobian, sample_surface, FaceDistribution, SampledPointSet};
pub use scalar::Real;
pub use vec3::Vec3;

pub type Mesh64 = Mesh<f64>;
pub type Mesh32 = Mesh<f32>;
pub type Vec3d = Vec3<f64>;
pub type Vec3f = Vec3<f32>;
