//! Stacked zero-neighbor layers followed by a vertex max-pool, and the
//! latent loss that compares two meshes through it.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    maxpool_with_argmax, zn_backward, zn_preactivation, Activation, LayerGrad, LayerParams,
};
use crate::error::{Error, Result};
use crate::losses::GradientBundle;
use crate::mesh::{AdjacencyMode, AdjacencyOp, Mesh};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Default layer widths: coordinates in, a 50-wide embedding out.
pub const DEFAULT_WIDTHS: [usize; 5] = [3, 32, 32, 32, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct EncoderParams<T> {
    pub layers: Vec<LayerParams<T>>,
    pub adjacency: AdjacencyMode,
}

impl<T: Real> EncoderParams<T> {
    pub fn new(layers: Vec<LayerParams<T>>, adjacency: AdjacencyMode) -> Result<Self> {
        let e = Self { layers, adjacency };
        e.validate()?;
        Ok(e)
    }

    /// Glorot-initialized encoder with the given widths (the first must be
    /// 3). Each layer aggregates the first half of its output columns.
    pub fn random(widths: &[usize], seed: u64) -> Result<Self> {
        Self::random_with(
            widths,
            |w| w / 2,
            Activation::Elu,
            AdjacencyMode::default(),
            seed,
        )
    }

    pub fn random_with(
        widths: &[usize],
        split: impl Fn(usize) -> usize,
        activation: Activation,
        adjacency: AdjacencyMode,
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config("an encoder needs at least two widths".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .map(|w| LayerParams::glorot(w[0], w[1], split(w[1]), activation, &mut rng))
            .collect::<Result<_>>()?;
        Self::new(layers, adjacency)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::Config("encoder has no layers".into()))?;
        if first.in_width() != 3 {
            return Err(Error::Shape(format!(
                "first layer takes {} features but vertices carry 3 coordinates",
                first.in_width()
            )));
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_width() != pair[1].in_width() {
                return Err(Error::Shape(format!(
                    "layer {k} outputs {} features but layer {} takes {}",
                    pair[0].out_width(),
                    k + 1,
                    pair[1].in_width()
                )));
            }
        }
        for l in &self.layers {
            l.validate()?;
        }
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_width())
    }

    /// Same weights with every layer aggregating all of its columns, i.e. a
    /// plain graph-convolution stack.
    pub fn as_plain_gcn(&self) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            l.split_index = l.out_width();
        }
        out
    }

    /// Multiplies the final layer's weights and bias by `k`. With an identity
    /// final activation the embedding scales by `k`.
    pub fn scale_output(&mut self, k: T) {
        if let Some(l) = self.layers.last_mut() {
            l.weight.mapv_inplace(|w| w * k);
            l.bias.mapv_inplace(|b| b * k);
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer, weights (row-major) then bias.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *w = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let e: Self = serde_json::from_str(text)?;
        e.validate()?;
        Ok(e)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()>
    where
        T: Serialize,
    {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Flattens per-layer gradients in the order of [`EncoderParams::flatten`].
pub(crate) fn flatten_grads<T: Real>(grads: &[LayerGrad<T>]) -> Vec<T> {
    grads
        .iter()
        .flat_map(|g| g.weight.iter().chain(g.bias.iter()).copied())
        .collect()
}

pub(crate) fn vertex_features<T: Real>(mesh: &Mesh<T>) -> Array2<T> {
    Array2::from_shape_fn((mesh.num_vertices(), 3), |(i, j)| mesh.vertices()[i][j])
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct EncoderTrace<T> {
    adjacency: AdjacencyOp<T>,
    inputs: Vec<Array2<T>>,
    pres: Vec<Array2<T>>,
    output: Array2<T>,
    argmax: Vec<usize>,
    embedding: Array1<T>,
}

impl<T: Real> EncoderTrace<T> {
    pub fn forward(mesh: &Mesh<T>, encoder: &EncoderParams<T>) -> Result<Self> {
        encoder.validate()?;
        let adjacency = mesh.adjacency(encoder.adjacency);
        let mut inputs = Vec::with_capacity(encoder.layers.len());
        let mut pres = Vec::with_capacity(encoder.layers.len());
        let mut h = vertex_features(mesh);
        for layer in &encoder.layers {
            let pre = zn_preactivation(h.view(), &adjacency, layer)?;
            let next = pre.mapv(|z| layer.activation.apply(z));
            inputs.push(std::mem::replace(&mut h, next));
            pres.push(pre);
        }
        let (embedding, argmax) = maxpool_with_argmax(h.view())?;
        Ok(Self {
            adjacency,
            inputs,
            pres,
            output: h,
            argmax,
            embedding,
        })
    }

    pub fn embedding(&self) -> &Array1<T> {
        &self.embedding
    }

    /// Per-vertex features entering the max-pool.
    pub fn pooled_features(&self) -> &Array2<T> {
        &self.output
    }

    /// Backpropagates `d_embedding` to the layer parameters and to the
    /// vertex coordinates (`N x 3`). Each pooled column sends its gradient
    /// to the row that won the max.
    pub fn backward(
        &self,
        encoder: &EncoderParams<T>,
        d_embedding: &Array1<T>,
    ) -> Result<(Vec<LayerGrad<T>>, Array2<T>)> {
        let last = self.pres.last().expect("encoder has layers");
        let mut d = Array2::zeros(last.raw_dim());
        for (j, &r) in self.argmax.iter().enumerate() {
            d[[r, j]] = d_embedding[j];
        }
        let mut grads = Vec::with_capacity(encoder.layers.len());
        for k in (0..encoder.layers.len()).rev() {
            let (g, d_in) = zn_backward(
                self.inputs[k].view(),
                self.pres[k].view(),
                d.view(),
                &self.adjacency,
                &encoder.layers[k],
            )?;
            grads.push(g);
            d = d_in;
        }
        grads.reverse();
        Ok((grads, d))
    }
}

/// Embedding of a mesh: vertex coordinates through every layer, then the
/// columnwise max over vertices.
pub fn encode_mesh<T: Real>(mesh: &Mesh<T>, encoder: &EncoderParams<T>) -> Result<Array1<T>> {
    Ok(EncoderTrace::forward(mesh, encoder)?.embedding)
}

/// A frozen encoder together with the embedding of a fixed target, so
/// repeated latent-loss evaluations skip re-encoding the target.
#[derive(Debug, Clone)]
pub struct LatentReference<T> {
    pub encoder: EncoderParams<T>,
    pub target_embedding: Array1<T>,
}

impl<T: Real> LatentReference<T> {
    pub fn new(encoder: EncoderParams<T>, target: &Mesh<T>) -> Result<Self> {
        let target_embedding = encode_mesh(target, &encoder)?;
        Ok(Self {
            encoder,
            target_embedding,
        })
    }

    /// `|E(pred) - E(target)|^2` and its gradient with respect to the
    /// predicted vertices.
    pub fn loss(&self, pred: &Mesh<T>) -> Result<GradientBundle<T>> {
        let trace = EncoderTrace::forward(pred, &self.encoder)?;
        let diff = trace.embedding() - &self.target_embedding;
        let value = diff.iter().map(|&d| d * d).sum();
        let d_emb = diff.mapv(|d| d * T::lit(2.0));
        let (_, d_x) = trace.backward(&self.encoder, &d_emb)?;
        let d_vertices = d_x
            .rows()
            .into_iter()
            .map(|r| Vec3::new(r[0], r[1], r[2]))
            .collect();
        Ok(GradientBundle { value, d_vertices })
    }
}

/// `|E(pred) - E(target)|^2` with the encoder held fixed.
pub fn loss_latent<T: Real>(
    pred: &Mesh<T>,
    target: &Mesh<T>,
    encoder: &EncoderParams<T>,
) -> Result<GradientBundle<T>> {
    LatentReference::new(encoder.clone(), target)?.loss(pred)
}
