//! Graph convolutions over mesh vertices and a max-pooled mesh encoder.
//!
//! A layer computes `H' = H W` and then mixes only the first `split_index`
//! columns across neighbors with the adjacency operator; the remaining
//! columns stay per-vertex (the adjacency raised to the power zero). With
//! `split_index` equal to the output width this is the ordinary graph
//! convolution `sigma(A H W + b)`.

mod encoder;
mod train;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::AdjacencyOp;
use crate::scalar::Real;

pub use encoder::{
    encode_mesh, loss_latent, EncoderParams, EncoderTrace, LatentReference, DEFAULT_WIDTHS,
};
pub use train::{
    evaluate_nearest_centroid, toy_shape_dataset, train_toy_encoder, LabeledMesh, ShapeFamily,
    TrainConfig, TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// ELU with unit scale, continuously differentiable at 0.
    #[default]
    Elu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Elu => {
                if z > T::zero() {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Identity => z,
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Elu => {
                if z > T::zero() {
                    T::one()
                } else {
                    z.exp()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct LayerParams<T> {
    /// `F x F'`
    pub weight: Array2<T>,
    /// `F'`
    pub bias: Array1<T>,
    /// Output columns below this index aggregate over neighbors.
    pub split_index: usize,
    pub activation: Activation,
}

impl<T: Real> LayerParams<T> {
    pub fn new(
        weight: Array2<T>,
        bias: Array1<T>,
        split_index: usize,
        activation: Activation,
    ) -> Result<Self> {
        let p = Self {
            weight,
            bias,
            split_index,
            activation,
        };
        p.validate()?;
        Ok(p)
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(
        fan_in: usize,
        fan_out: usize,
        split_index: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight =
            Array2::from_shape_fn((fan_in, fan_out), |_| T::lit(rng.gen_range(-limit..limit)));
        Self::new(weight, Array1::zeros(fan_out), split_index, activation)
    }

    pub fn in_width(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.out_width() {
            return Err(Error::Shape(format!(
                "bias has length {} but the weight has {} columns",
                self.bias.len(),
                self.out_width()
            )));
        }
        if self.split_index > self.out_width() {
            return Err(Error::Config(format!(
                "split index {} exceeds output width {}",
                self.split_index,
                self.out_width()
            )));
        }
        if !self
            .weight
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::Config("layer parameters must be finite".into()));
        }
        Ok(())
    }

    fn check_input(&self, h: &ArrayView2<T>, a: &AdjacencyOp<T>) -> Result<()> {
        if h.ncols() != self.in_width() {
            return Err(Error::Shape(format!(
                "features have {} columns but the layer expects {}",
                h.ncols(),
                self.in_width()
            )));
        }
        if h.nrows() != a.size() {
            return Err(Error::Shape(format!(
                "features have {} rows but the adjacency is {}x{}",
                h.nrows(),
                a.size(),
                a.size()
            )));
        }
        Ok(())
    }
}

/// `sigma(A H W + b)`. The split index is ignored.
pub fn gcn_layer<T: Real>(
    h: ArrayView2<T>,
    a: &AdjacencyOp<T>,
    params: &LayerParams<T>,
) -> Result<Array2<T>> {
    params.check_input(&h, a)?;
    let hw = h.dot(&params.weight);
    let mut pre = a.apply(hw.view())?;
    pre += &params.bias;
    Ok(pre.mapv(|z| params.activation.apply(z)))
}

/// `sigma([A H' [:, :i] | H' [:, i:]] + b)` with `H' = H W`.
pub fn zn_gcn_layer<T: Real>(
    h: ArrayView2<T>,
    a: &AdjacencyOp<T>,
    params: &LayerParams<T>,
) -> Result<Array2<T>> {
    let pre = zn_preactivation(h, a, params)?;
    Ok(pre.mapv(|z| params.activation.apply(z)))
}

fn zn_preactivation<T: Real>(
    h: ArrayView2<T>,
    a: &AdjacencyOp<T>,
    params: &LayerParams<T>,
) -> Result<Array2<T>> {
    params.validate()?;
    params.check_input(&h, a)?;
    let i = params.split_index;
    let hw = h.dot(&params.weight);
    let mixed = a.apply(hw.slice(s![.., ..i]))?;
    let mut pre = concatenate(Axis(1), &[mixed.view(), hw.slice(s![.., i..])])
        .expect("blocks share the row count");
    pre += &params.bias;
    Ok(pre)
}

/// Gradients of one zero-neighbor layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

/// Backward pass of [`zn_gcn_layer`] given the layer input, its
/// preactivation, and the gradient with respect to the output. Returns the
/// parameter gradients and the gradient with respect to the input.
pub(crate) fn zn_backward<T: Real>(
    h: ArrayView2<T>,
    pre: ArrayView2<T>,
    d_out: ArrayView2<T>,
    a: &AdjacencyOp<T>,
    params: &LayerParams<T>,
) -> Result<(LayerGrad<T>, Array2<T>)> {
    let act = params.activation;
    let mut d_pre = d_out.to_owned();
    d_pre.zip_mut_with(&pre, |g, &z| *g *= act.derivative(z));
    let i = params.split_index;
    let mixed = a.apply_transpose(d_pre.slice(s![.., ..i]))?;
    let d_hw = concatenate(Axis(1), &[mixed.view(), d_pre.slice(s![.., i..])])
        .expect("blocks share the row count");
    let grad = LayerGrad {
        weight: h.t().dot(&d_hw),
        bias: d_pre.sum_axis(Axis(0)),
    };
    Ok((grad, d_hw.dot(&params.weight.t())))
}

/// Columnwise max over vertices. Ties go to the lowest row.
pub fn vertex_maxpool<T: Real>(h: ArrayView2<T>) -> Result<Array1<T>> {
    Ok(maxpool_with_argmax(h)?.0)
}

pub(crate) fn maxpool_with_argmax<T: Real>(h: ArrayView2<T>) -> Result<(Array1<T>, Vec<usize>)> {
    if h.nrows() == 0 {
        return Err(Error::EmptyInput("vertex set"));
    }
    let mut best = h.row(0).to_owned();
    let mut arg = vec![0usize; h.ncols()];
    for (r, row) in h.rows().into_iter().enumerate().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = r;
            }
        }
    }
    Ok((best, arg))
}
