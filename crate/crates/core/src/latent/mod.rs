//! Latent genes and the pure operators on them.
//!
//! A [`Gene`] is a latent vector plus an optional class mixture. Everything in
//! this module is a pure function of its inputs; seeded operators draw from
//! the pinned [`Stream`](crate::rng::Stream).

mod blend;
mod breed;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::Stream;

pub use blend::{blend, blend_linear, blend_spherical, normalize_weights, BlendMode, BlendSpec};
pub use breed::{crossover, mutate};

/// Default latent dimensionality for a deployment.
pub const DEFAULT_LATENT_DIM: usize = 128;

/// Tolerance on the sum of a class mixture.
pub const MIXTURE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatentError {
    #[error("all blend weights are zero")]
    AllZeroWeights,
    #[error("invalid weight {value} at index {index}: weights must be finite and non-negative")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights are not normalized (sum {sum})")]
    NotNormalized { sum: f64 },
    #[error("latent dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{genes} genes but {weights} weights")]
    WeightCountMismatch { genes: usize, weights: usize },
    #[error("cannot blend an empty set of genes")]
    NoGenes,
    #[error("latent {index} has zero norm")]
    ZeroNormInput { index: usize },
    #[error("latents are antipodal; the great circle is undefined")]
    DegenerateAngle,
    #[error("spherical blend collapsed to the zero vector")]
    DegenerateBlend,
    #[error("invalid truncation {0}: must be finite and > 0")]
    InvalidTruncation(f64),
    #[error("invalid mutation sigma {0}: must be finite and >= 0")]
    InvalidSigma(f64),
    #[error("latent component {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid class mixture: {0}")]
    InvalidClassMixture(String),
}

/// Fixed-length vector of finite latent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self, LatentError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(LatentError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<(), LatentError> {
        if self.dim() != expected {
            return Err(LatentError::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for LatentVector {
    type Error = LatentError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<LatentVector> for Vec<f64> {
    fn from(v: LatentVector) -> Self {
        v.0
    }
}

/// Category weights for class-conditional backends. Empty means unconditional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct ClassMixture(BTreeMap<String, f64>);

impl ClassMixture {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self, LatentError> {
        for (id, w) in &entries {
            if !w.is_finite() || *w < 0.0 {
                return Err(LatentError::InvalidClassMixture(format!("weight for {id:?} is {w}")));
            }
        }
        if !entries.is_empty() {
            let sum: f64 = entries.values().sum();
            if (sum - 1.0).abs() > MIXTURE_SUM_TOLERANCE {
                return Err(LatentError::InvalidClassMixture(format!(
                    "weights sum to {sum}, expected 1"
                )));
            }
        }
        Ok(Self(entries))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// A mixture concentrated on a single category.
    pub fn single(id: impl Into<String>) -> Self {
        Self(BTreeMap::from([(id.into(), 1.0)]))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.0.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Weighted sum of mixtures, renormalized. Inputs that are empty add no
    /// mass; if nothing has mass the result is empty.
    pub(crate) fn weighted<'a>(parts: impl IntoIterator<Item = (&'a ClassMixture, f64)>) -> Self {
        let mut acc: BTreeMap<String, f64> = BTreeMap::new();
        for (mix, w) in parts {
            if w == 0.0 {
                continue;
            }
            for (id, x) in &mix.0 {
                *acc.entry(id.clone()).or_insert(0.0) += w * x;
            }
        }
        let total: f64 = acc.values().sum();
        if total <= 0.0 {
            return Self::default();
        }
        acc.retain(|_, v| *v > 0.0);
        for v in acc.values_mut() {
            *v /= total;
        }
        Self(acc)
    }
}

impl TryFrom<BTreeMap<String, f64>> for ClassMixture {
    type Error = LatentError;

    fn try_from(entries: BTreeMap<String, f64>) -> Result<Self, Self::Error> {
        Self::new(entries)
    }
}

impl From<ClassMixture> for BTreeMap<String, f64> {
    fn from(m: ClassMixture) -> Self {
        m.0
    }
}

/// The full latent description of an image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gene {
    pub latent: LatentVector,
    #[serde(default, with = "nullable_mixture")]
    pub class_mix: ClassMixture,
}

impl Gene {
    pub fn new(latent: LatentVector, class_mix: ClassMixture) -> Self {
        Self { latent, class_mix }
    }

    pub fn unconditional(latent: LatentVector) -> Self {
        Self::new(latent, ClassMixture::empty())
    }

    pub fn dim(&self) -> usize {
        self.latent.dim()
    }

    pub fn digest(&self) -> GeneDigest {
        gene_digest(self)
    }
}

/// Wire form for class mixtures: an empty mixture travels as `null`.
pub(crate) mod nullable_mixture {
    use super::*;

    pub fn serialize<S: Serializer>(mix: &ClassMixture, s: S) -> Result<S::Ok, S::Error> {
        if mix.is_empty() {
            s.serialize_none()
        } else {
            s.serialize_some(mix)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ClassMixture, D::Error> {
        Ok(Option::<ClassMixture>::deserialize(d)?.unwrap_or_default())
    }
}

/// SHA-256 of a gene's canonical byte form, as lowercase hex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneDigest(pub String);

impl fmt::Display for GeneDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Canonical bytes: each latent component as little-endian `f64`, then each
/// mixture entry in key order as UTF-8 key, a zero byte, and the LE weight.
pub fn gene_digest(gene: &Gene) -> GeneDigest {
    let mut h = Sha256::new();
    for x in gene.latent.as_slice() {
        h.update(x.to_le_bytes());
    }
    for (id, w) in gene.class_mix.iter() {
        h.update(id.as_bytes());
        h.update([0u8]);
        h.update(w.to_le_bytes());
    }
    GeneDigest(hex::encode(h.finalize()))
}

/// `dim` standard-normal components drawn from the stream seeded with `seed`.
pub fn random_latent(seed: u64, dim: usize) -> LatentVector {
    let mut s = Stream::new(seed);
    LatentVector::from_raw((0..dim).map(|_| s.next_normal()).collect())
}

/// Clamp every component into `[-t, t]`. Components already inside keep their bits.
pub fn truncate(z: &LatentVector, t: f64) -> Result<LatentVector, LatentError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(LatentError::InvalidTruncation(t));
    }
    let values = z
        .as_slice()
        .iter()
        .map(|&x| {
            if x > t {
                t
            } else if x < -t {
                -t
            } else {
                x
            }
        })
        .collect();
    Ok(LatentVector::from_raw(values))
}

/// Euclidean distance.
pub fn latent_distance(a: &LatentVector, b: &LatentVector) -> Result<f64, LatentError> {
    b.check_dim(a.dim())?;
    let sq: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(libm::sqrt(sq))
}
