use super::{ClassMixture, Gene, LatentError, LatentVector};
use crate::rng::Stream;

/// Uniform crossover. Component `i` comes from `b` when the `i`-th coin of the
/// stream seeded with `seed` lands heads, from `a` otherwise. The class mixture
/// is the renormalized average of the parents'.
pub fn crossover(a: &Gene, b: &Gene, seed: u64) -> Result<Gene, LatentError> {
    b.latent.check_dim(a.dim())?;
    let mut stream = Stream::new(seed);
    let latent = a
        .latent
        .as_slice()
        .iter()
        .zip(b.latent.as_slice())
        .map(|(&x, &y)| if stream.next_bool() { y } else { x })
        .collect();
    let class_mix = if a.class_mix == b.class_mix {
        a.class_mix.clone()
    } else {
        ClassMixture::weighted([(&a.class_mix, 0.5), (&b.class_mix, 0.5)])
    };
    Ok(Gene {
        latent: LatentVector::from_raw(latent),
        class_mix,
    })
}

/// Gaussian mutation: `latent + sigma * eps`, `eps` drawn per component from
/// the normal stream seeded with `seed`.
pub fn mutate(g: &Gene, sigma: f64, seed: u64) -> Result<Gene, LatentError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(LatentError::InvalidSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(g.clone());
    }
    let mut stream = Stream::new(seed);
    let latent = g
        .latent
        .as_slice()
        .iter()
        .map(|x| x + sigma * stream.next_normal())
        .collect();
    Ok(Gene {
        latent: LatentVector::from_raw(latent),
        class_mix: g.class_mix.clone(),
    })
}
