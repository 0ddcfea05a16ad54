//! Deterministic sinusoidal-feature renderer.
//!
//! Each latent coordinate `k` owns a plane wave with frequency `w_k`, phase
//! `p_k` and per-channel amplitudes `a_{k,c}`. A pixel at normalized
//! coordinates `(u, v)` is
//!
//! ```text
//! sigmoid( (1/sqrt(D)) * sum_k z_k * a_{k,c} * sin(w_k . (u, v) + p_k) )
//! ```
//!
//! quantized with round-half-away-from-zero on `value * 255`. Features are
//! drawn from the stream seeded with `backend_seed ^ FEATURE_DOMAIN`, six
//! uniforms per coordinate in the order `w_u, w_v, p, a_0, a_1, a_2`, with
//! `w` in `[2pi, 16pi)`, `p` in `[0, 2pi)` and `a` in `[-1, 1)`.
//!
//! Pixel `(x, y)` samples `u = x / (width - 1)`, `v = y / (height - 1)`.

use std::f64::consts::{PI, TAU};

use super::{BackendDescriptor, BackendKind, GenerateError, Generator, RenderParams};
use crate::image::Image;
use crate::latent::{Gene, LatentVector};
use crate::rng::Stream;

pub const PROCEDURAL_BACKEND_ID: &str = "procedural";

/// Separates the feature stream from latent streams that share a seed.
const FEATURE_DOMAIN: u64 = 0x6C61_6E64_7363_6170;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub freq: [f64; 2],
    pub phase: f64,
    pub amp: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct ProceduralBackend {
    descriptor: BackendDescriptor,
    seed: u64,
    features: Vec<Feature>,
    inv_sqrt_dim: f64,
}

impl ProceduralBackend {
    pub fn new(seed: u64, latent_dim: usize) -> Self {
        let mut stream = Stream::new(seed ^ FEATURE_DOMAIN);
        let features = (0..latent_dim)
            .map(|_| {
                let fu = stream.next_range(2.0 * PI, 16.0 * PI);
                let fv = stream.next_range(2.0 * PI, 16.0 * PI);
                let phase = stream.next_range(0.0, TAU);
                let amp = [
                    stream.next_range(-1.0, 1.0),
                    stream.next_range(-1.0, 1.0),
                    stream.next_range(-1.0, 1.0),
                ];
                Feature {
                    freq: [fu, fv],
                    phase,
                    amp,
                }
            })
            .collect();
        Self::with_features(seed, features)
    }

    /// Backend with explicit features, for constructed cases.
    pub fn with_features(seed: u64, features: Vec<Feature>) -> Self {
        assert!(!features.is_empty(), "procedural backend needs at least one feature");
        let dim = features.len();
        Self {
            descriptor: BackendDescriptor {
                backend_id: PROCEDURAL_BACKEND_ID.to_string(),
                kind: BackendKind::Procedural,
                latent_dim: dim,
                supports_class_mix: false,
                endpoint: None,
            },
            seed,
            features,
            inv_sqrt_dim: 1.0 / libm::sqrt(dim as f64),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.descriptor.backend_id = id.into();
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    fn check_dim(&self, z: &LatentVector) -> Result<(), GenerateError> {
        if z.dim() != self.features.len() {
            return Err(GenerateError::DimensionMismatch {
                expected: self.features.len(),
                found: z.dim(),
            });
        }
        Ok(())
    }

    /// Pre-quantization value of one channel at `(u, v)` in the unit square.
    pub fn pixel(&self, z: &LatentVector, u: f64, v: f64, channel: usize) -> Result<f64, GenerateError> {
        self.check_dim(z)?;
        if !((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)) {
            return Err(GenerateError::OutOfDomain { u, v });
        }
        if channel > 2 {
            return Err(GenerateError::BadChannel(channel));
        }
        Ok(self.activations(z.as_slice(), u, v)[channel])
    }

    #[inline]
    fn activations(&self, z: &[f64], u: f64, v: f64) -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        for (zk, f) in z.iter().zip(&self.features) {
            let s = zk * libm::sin(f.freq[0] * u + f.freq[1] * v + f.phase);
            acc[0] += s * f.amp[0];
            acc[1] += s * f.amp[1];
            acc[2] += s * f.amp[2];
        }
        acc.map(|a| sigmoid(a * self.inv_sqrt_dim))
    }

    /// Row-major pre-quantization channel values for a `width x height` grid.
    pub fn render_values(&self, z: &LatentVector, width: u32, height: u32) -> Result<Vec<f64>, GenerateError> {
        self.check_dim(z)?;
        let mut out = Vec::with_capacity(width as usize * height as usize * 3);
        let du = 1.0 / (width.max(2) - 1) as f64;
        let dv = 1.0 / (height.max(2) - 1) as f64;
        for y in 0..height {
            let v = y as f64 * dv;
            for x in 0..width {
                let u = x as f64 * du;
                out.extend(self.activations(z.as_slice(), u, v));
            }
        }
        Ok(out)
    }

    /// Lipschitz constant `C = (1/4) (1/sqrt(D)) max_c sum_k |a_{k,c}|`.
    ///
    /// For any two latents and any pixel and channel,
    /// `|value(z1) - value(z2)| <= C * ||z1 - z2||_inf <= C * ||z1 - z2||_2`,
    /// so `C` also serves as the bound against Euclidean latent distance.
    pub fn lipschitz_bound(&self) -> f64 {
        let per_channel = |c: usize| self.features.iter().map(|f| f.amp[c].abs()).sum::<f64>();
        let worst = (0..3).map(per_channel).fold(0.0, f64::max);
        0.25 * self.inv_sqrt_dim * worst
    }
}

impl Generator for ProceduralBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn generate(&self, gene: &Gene, params: &RenderParams) -> Result<Image, GenerateError> {
        params.validate()?;
        let values = self.render_values(&gene.latent, params.width, params.height)?;
        let pixels = values.into_iter().map(quantize).collect();
        Ok(Image::new(params.width, params.height, pixels)?)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Round-half-away-from-zero onto `0..=255`.
#[inline]
pub(crate) fn quantize(value: f64) -> u8 {
    (value * 255.0).round().clamp(0.0, 255.0) as u8
}
