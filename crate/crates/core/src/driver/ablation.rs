//! Variant comparison: the full pipeline against versions with one
//! component swapped out, fitted to the same targets.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_mesh, FitConfig, SplitStrategy};
use crate::error::{Error, Result};
use crate::graphnet::{EncoderParams, LatentReference};
use crate::losses::SurfaceMode;
use crate::mesh::Mesh;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    /// Zero-neighbor encoder, adaptive splits, surface loss schedule.
    Full,
    /// Encoder layers aggregate every column.
    GcnEncoder,
    /// Every face split between stages.
    UniformSplit,
    /// Latent term dropped.
    NoLatent,
    /// Vertices fitted to target samples.
    VtpLoss,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 5] = [
        AblationVariant::Full,
        AblationVariant::GcnEncoder,
        AblationVariant::UniformSplit,
        AblationVariant::NoLatent,
        AblationVariant::VtpLoss,
    ];

    /// The fit configuration and encoder this variant runs with.
    pub fn apply<T: Real>(
        self,
        base: &FitConfig,
        encoder: Option<&EncoderParams<T>>,
    ) -> (FitConfig, Option<EncoderParams<T>>) {
        let mut cfg = base.clone();
        let mut enc = encoder.cloned();
        match self {
            AblationVariant::Full => {}
            AblationVariant::GcnEncoder => enc = enc.map(|e| e.as_plain_gcn()),
            AblationVariant::UniformSplit => cfg.split = SplitStrategy::Uniform,
            AblationVariant::NoLatent => {
                cfg.weights.gamma1 = 0.0;
                enc = None;
            }
            AblationVariant::VtpLoss => cfg.mode = SurfaceMode::VtP,
        }
        (cfg, enc)
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationVariant::Full => "full",
            AblationVariant::GcnEncoder => "gcn_encoder",
            AblationVariant::UniformSplit => "uniform_split",
            AblationVariant::NoLatent => "no_latent",
            AblationVariant::VtpLoss => "vtp_loss",
        })
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub target: String,
    pub f1: f64,
    pub vertices: usize,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn mean_f1(&self, variant: AblationVariant) -> Option<f64> {
        self.mean(variant, |r| r.f1)
    }

    pub fn mean_vertices(&self, variant: AblationVariant) -> Option<f64> {
        self.mean(variant, |r| r.vertices as f64)
    }

    fn mean(&self, variant: AblationVariant, f: impl Fn(&AblationRow) -> f64) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.variant == variant)
            .map(f)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// One row per run: `variant,target,f1,vertices,faces`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// One row per variant: `variant,mean_f1,mean_vertices`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["variant", "mean_f1", "mean_vertices"])?;
        let mut seen = Vec::new();
        for r in &self.rows {
            if seen.contains(&r.variant) {
                continue;
            }
            seen.push(r.variant);
            out.write_record(&[
                r.variant.to_string(),
                self.mean_f1(r.variant).unwrap_or(f64::NAN).to_string(),
                self.mean_vertices(r.variant)
                    .unwrap_or(f64::NAN)
                    .to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Fits `init` to every target under every variant. Runs in parallel; rows
/// come back in variant, target order.
pub fn ablation_run<T: Real>(
    variants: &[AblationVariant],
    targets: &[(String, Mesh<T>)],
    init: &Mesh<T>,
    config: &FitConfig,
    encoder: Option<&EncoderParams<T>>,
) -> Result<AblationTable> {
    if targets.len() < 3 {
        return Err(Error::Config(format!(
            "an ablation needs at least 3 targets, got {}",
            targets.len()
        )));
    }
    let jobs: Vec<(AblationVariant, usize)> = variants
        .iter()
        .flat_map(|&v| (0..targets.len()).map(move |t| (v, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(variant, t)| {
            let (name, target) = &targets[t];
            let (cfg, enc) = variant.apply(config, encoder);
            let reference = match (&enc, cfg.weights.gamma1 > 0.0) {
                (Some(e), true) => Some(LatentReference::new(e.clone(), target)?),
                _ => None,
            };
            let trace = fit_mesh(init, target, &cfg, reference.as_ref())?;
            Ok(AblationRow {
                variant,
                target: name.clone(),
                f1: trace.final_f1,
                vertices: trace.final_mesh.num_vertices(),
                faces: trace.final_mesh.num_faces(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(AblationTable { rows })
}
