//! Small supervised surrogate for encoder pretraining: classify randomly
//! scaled cubes against randomly scaled spheres with a linear head, then
//! judge the embedding by nearest-centroid accuracy on held-out shapes.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::{flatten_grads, DEFAULT_WIDTHS};
use super::{EncoderParams, EncoderTrace};
use crate::error::{Error, Result};
use crate::mesh::{AdjacencyMode, Mesh, Primitive};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::derive_seed;
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Cube,
    Sphere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMesh<T> {
    pub mesh: Mesh<T>,
    pub label: usize,
}

/// `per_family` meshes of each family, alternating cube, sphere. Both
/// families span `[-1, 1]^3` before a random per-axis scale in
/// `[0.6, 1.4]` and a shift of up to 0.2 per axis, so size alone does not
/// separate them.
pub fn toy_shape_dataset<T: Real>(per_family: usize, seed: u64) -> Vec<LabeledMesh<T>> {
    let cube = Primitive::Cube
        .build::<T>()
        .scaled(Vec3::from_f64(2.0, 2.0, 2.0));
    let sphere = Primitive::IcoSphere { subdiv: 1 }.build::<T>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * per_family);
    for _ in 0..per_family {
        for (label, base) in [&cube, &sphere].into_iter().enumerate() {
            let mut axis = || T::lit(rng.gen_range(0.6..1.4));
            let k = Vec3::new(axis(), axis(), axis());
            let mut shift = || T::lit(rng.gen_range(-0.2..0.2));
            let t = Vec3::new(shift(), shift(), shift());
            out.push(LabeledMesh {
                mesh: base.scaled(k).translated(t),
                label,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub widths: Vec<usize>,
    pub adjacency: AdjacencyMode,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            widths: DEFAULT_WIDTHS.to_vec(),
            adjacency: AdjacencyMode::default(),
            steps: 500,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub encoder: EncoderParams<T>,
    pub head_weight: Array2<T>,
    pub head_bias: Array1<T>,
    /// Mean cross-entropy before each step.
    pub losses: Vec<f64>,
    /// Accuracy of the linear head on the training set after the last step.
    pub train_accuracy: f64,
}

/// Trains a fresh encoder and a linear classification head with full-batch
/// Adam on softmax cross-entropy.
pub fn train_toy_encoder<T: Real>(
    train: &[LabeledMesh<T>],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let classes = train.iter().map(|m| m.label + 1).max().unwrap_or(0);
    if classes < 2 || (0..classes).any(|c| !train.iter().any(|m| m.label == c)) {
        return Err(Error::Config(
            "training needs at least two populated classes".into(),
        ));
    }
    let mut encoder = EncoderParams::random_with(
        &config.widths,
        |w| w / 2,
        super::Activation::Elu,
        config.adjacency,
        derive_seed(config.seed, 1),
    )?;
    let dim = encoder.embedding_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));
    let limit = (6.0 / (dim + classes) as f64).sqrt();
    let mut head_weight =
        Array2::from_shape_fn((dim, classes), |_| T::lit(rng.gen_range(-limit..limit)));
    let mut head_bias = Array1::zeros(classes);

    let n_enc = encoder.param_count();
    let mut params = encoder.flatten();
    params.extend(head_weight.iter().copied());
    params.extend(head_bias.iter().copied());
    let mut opt = Optimizer::new(OptimizerKind::default(), params.len());
    let lr = T::lit(config.lr);
    let batch = T::from_usize_lossy(train.len());
    let mut losses = Vec::with_capacity(config.steps);

    let unpack =
        |params: &[T], enc: &mut EncoderParams<T>, hw: &mut Array2<T>, hb: &mut Array1<T>| {
            enc.set_flat(&params[..n_enc]).expect("length matches");
            let (w, b) = params[n_enc..].split_at(dim * classes);
            hw.iter_mut().zip(w).for_each(|(d, &s)| *d = s);
            hb.iter_mut().zip(b).for_each(|(d, &s)| *d = s);
        };

    for _ in 0..config.steps {
        let per_mesh: Vec<(T, Vec<T>)> = train
            .par_iter()
            .map(|item| -> Result<(T, Vec<T>)> {
                let trace = EncoderTrace::forward(&item.mesh, &encoder)?;
                let emb = trace.embedding();
                let logits = emb.dot(&head_weight) + &head_bias;
                let probs = softmax(&logits);
                let loss = -probs[item.label].ln();
                let mut d_logits = probs;
                d_logits[item.label] -= T::one();
                let d_emb = head_weight.dot(&d_logits);
                let (grads, _) = trace.backward(&encoder, &d_emb)?;
                let mut flat = flatten_grads(&grads);
                for e in emb.iter() {
                    flat.extend(d_logits.iter().map(|&g| *e * g));
                }
                flat.extend(d_logits.iter().copied());
                Ok((loss, flat))
            })
            .collect::<Result<_>>()?;
        let mut total = T::zero();
        let mut grad = vec![T::zero(); params.len()];
        for (loss, g) in &per_mesh {
            total += *loss;
            for (a, &b) in grad.iter_mut().zip(g) {
                *a += b / batch;
            }
        }
        losses.push((total / batch).as_f64());
        opt.step(&mut params, &grad, lr);
        unpack(&params, &mut encoder, &mut head_weight, &mut head_bias);
    }

    let correct = train
        .iter()
        .map(|item| -> Result<bool> {
            let emb = super::encode_mesh(&item.mesh, &encoder)?;
            let logits = emb.dot(&head_weight) + &head_bias;
            Ok(argmax(&logits) == item.label)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&c| c)
        .count();
    Ok(TrainOutcome {
        encoder,
        head_weight,
        head_bias,
        losses,
        train_accuracy: correct as f64 / train.len() as f64,
    })
}

fn softmax<T: Real>(logits: &Array1<T>) -> Array1<T> {
    let m = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let e = logits.mapv(|v| (v - m).exp());
    let s: T = e.iter().copied().sum();
    e.mapv(|v| v / s)
}

fn argmax<T: Real>(v: &Array1<T>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of `test` meshes whose embedding is closest to the centroid of
/// their own class, centroids taken over `reference`.
pub fn evaluate_nearest_centroid<T: Real>(
    encoder: &EncoderParams<T>,
    reference: &[LabeledMesh<T>],
    test: &[LabeledMesh<T>],
) -> Result<f64> {
    if reference.is_empty() || test.is_empty() {
        return Err(Error::EmptyInput("labeled mesh set"));
    }
    let classes = reference.iter().map(|m| m.label + 1).max().unwrap_or(0);
    let dim = encoder.embedding_dim();
    let mut centroids = Array2::<T>::zeros((classes, dim));
    let mut counts = vec![0usize; classes];
    for item in reference {
        let e = super::encode_mesh(&item.mesh, encoder)?;
        let mut row = centroids.row_mut(item.label);
        row += &e;
        counts[item.label] += 1;
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            let k = T::one() / T::from_usize_lossy(n);
            centroids.row_mut(c).mapv_inplace(|v| v * k);
        }
    }
    let mut correct = 0;
    for item in test {
        let e = super::encode_mesh(&item.mesh, encoder)?;
        let mut best: Option<(T, usize)> = None;
        for c in (0..classes).filter(|&c| counts[c] > 0) {
            let d: T = (&centroids.row(c) - &e).iter().map(|&x| x * x).sum();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        if best.map(|b| b.1) == Some(item.label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_alternates_labels() {
        let d = toy_shape_dataset::<f64>(3, 0);
        assert_eq!(d.len(), 6);
        assert_eq!(
            d.iter().map(|m| m.label).collect::<Vec<_>>(),
            vec![0, 1, 0, 1, 0, 1]
        );
    }

    #[test]
    fn zero_lr_keeps_initial_params() {
        let data = toy_shape_dataset::<f64>(2, 1);
        let cfg = TrainConfig {
            widths: vec![3, 6, 4],
            steps: 5,
            lr: 0.0,
            ..TrainConfig::default()
        };
        let out = train_toy_encoder(&data, &cfg).unwrap();
        let fresh = EncoderParams::<f64>::random_with(
            &cfg.widths,
            |w| w / 2,
            super::super::Activation::Elu,
            cfg.adjacency,
            derive_seed(cfg.seed, 1),
        )
        .unwrap();
        assert_eq!(out.encoder, fresh);
    }

    #[test]
    fn single_class_rejected() {
        let data: Vec<_> = toy_shape_dataset::<f64>(2, 1)
            .into_iter()
            .filter(|m| m.label == 0)
            .collect();
        assert!(train_toy_encoder(&data, &TrainConfig::default()).is_err());
    }
}
