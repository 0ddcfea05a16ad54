use serde::{Deserialize, Serialize};

use super::{ClassMixture, Gene, LatentError, LatentVector};

/// Accepted deviation of normalized weights from a unit sum.
const NORMALIZED_TOLERANCE: f64 = 1e-9;
const ZERO_NORM: f64 = 1e-12;
const ANTIPODAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    #[default]
    Linear,
    Spherical,
}

impl std::fmt::Display for BlendMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BlendMode::Linear => "linear",
            BlendMode::Spherical => "spherical",
        })
    }
}

/// Slider state: raw per-slot weights, blend mode and truncation bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendSpec {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub mode: BlendMode,
    pub truncation: f64,
}

impl BlendSpec {
    pub fn new(weights: Vec<f64>, mode: BlendMode, truncation: f64) -> Self {
        Self {
            weights,
            mode,
            truncation,
        }
    }

    /// Checks these weights and truncation against a slot count and returns the normalized weights.
    pub fn validate(&self, slots: usize) -> Result<Vec<f64>, LatentError> {
        if self.weights.len() != slots {
            return Err(LatentError::WeightCountMismatch {
                genes: slots,
                weights: self.weights.len(),
            });
        }
        if !(self.truncation.is_finite() && self.truncation > 0.0) {
            return Err(LatentError::InvalidTruncation(self.truncation));
        }
        normalize_weights(&self.weights)
    }
}

/// Scale raw slider weights to sum to one.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>, LatentError> {
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
        return Err(LatentError::InvalidWeight { index, value });
    }
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        return Err(LatentError::AllZeroWeights);
    }
    Ok(raw.iter().map(|w| w / sum).collect())
}

fn check_inputs(genes: &[Gene], weights: &[f64]) -> Result<usize, LatentError> {
    if genes.is_empty() {
        return Err(LatentError::NoGenes);
    }
    if genes.len() != weights.len() {
        return Err(LatentError::WeightCountMismatch {
            genes: genes.len(),
            weights: weights.len(),
        });
    }
    let dim = genes[0].dim();
    for g in &genes[1..] {
        g.latent.check_dim(dim)?;
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
        return Err(LatentError::InvalidWeight { index, value });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > NORMALIZED_TOLERANCE {
        return Err(LatentError::NotNormalized { sum });
    }
    Ok(dim)
}

/// Index of the only nonzero weight, if the weight vector is a basis vector.
fn basis_index(weights: &[f64]) -> Option<usize> {
    let mut nonzero = weights.iter().enumerate().filter(|(_, w)| **w != 0.0);
    match (nonzero.next(), nonzero.next()) {
        (Some((k, _)), None) => Some(k),
        _ => None,
    }
}

fn linear_latent(genes: &[Gene], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (g, &w) in genes.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (o, z) in out.iter_mut().zip(g.latent.as_slice()) {
            *o += w * z;
        }
    }
    out
}

fn blend_mixture(genes: &[Gene], weights: &[f64]) -> ClassMixture {
    ClassMixture::weighted(genes.iter().map(|g| &g.class_mix).zip(weights.iter().copied()))
}

/// Convex combination of genes under normalized weights.
pub fn blend_linear(genes: &[Gene], weights: &[f64]) -> Result<Gene, LatentError> {
    let dim = check_inputs(genes, weights)?;
    if let Some(k) = basis_index(weights) {
        return Ok(genes[k].clone());
    }
    Ok(Gene {
        latent: LatentVector::from_raw(linear_latent(genes, weights, dim)),
        class_mix: blend_mixture(genes, weights),
    })
}

/// Norm-preserving blend. With two active inputs this is exact slerp; with
/// more, the linear blend is rescaled to the weighted mean of input norms.
///
/// Only inputs with nonzero weight count as active.
pub fn blend_spherical(genes: &[Gene], weights: &[f64]) -> Result<Gene, LatentError> {
    let dim = check_inputs(genes, weights)?;
    if let Some(k) = basis_index(weights) {
        return Ok(genes[k].clone());
    }
    let active: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] != 0.0).collect();
    let norms: Vec<f64> = genes.iter().map(|g| g.latent.norm()).collect();
    if let Some(&index) = active.iter().find(|&&i| norms[i] < ZERO_NORM) {
        return Err(LatentError::ZeroNormInput { index });
    }
    let class_mix = blend_mixture(genes, weights);

    let latent = if let [i, j] = active[..] {
        let t = weights[j] / (weights[i] + weights[j]);
        slerp(
            genes[i].latent.as_slice(),
            genes[j].latent.as_slice(),
            norms[i],
            norms[j],
            t,
        )?
    } else {
        let lin = linear_latent(genes, weights, dim);
        let target: f64 = active.iter().map(|&i| weights[i] * norms[i]).sum();
        let n = libm::sqrt(lin.iter().map(|x| x * x).sum());
        if n < ZERO_NORM {
            return Err(LatentError::DegenerateBlend);
        }
        let scale = target / n;
        lin.into_iter().map(|x| x * scale).collect()
    };
    Ok(Gene {
        latent: LatentVector::from_raw(latent),
        class_mix,
    })
}

fn slerp(a: &[f64], b: &[f64], na: f64, nb: f64, t: f64) -> Result<Vec<f64>, LatentError> {
    // Angle from the chord lengths of the unit directions; stable near 0 and pi.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let theta = 2.0 * libm::atan2(libm::sqrt(diff), libm::sqrt(sum));
    if std::f64::consts::PI - theta < ANTIPODAL_TOLERANCE {
        return Err(LatentError::DegenerateAngle);
    }
    if theta < ZERO_NORM {
        return Ok(a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect());
    }
    let s = libm::sin(theta);
    let ca = libm::sin((1.0 - t) * theta);
    let cb = libm::sin(t * theta);
    Ok(a.iter().zip(b).map(|(x, y)| (ca * x + cb * y) / s).collect())
}

/// Blend under the given mode.
pub fn blend(genes: &[Gene], weights: &[f64], mode: BlendMode) -> Result<Gene, LatentError> {
    match mode {
        BlendMode::Linear => blend_linear(genes, weights),
        BlendMode::Spherical => blend_spherical(genes, weights),
    }
}
