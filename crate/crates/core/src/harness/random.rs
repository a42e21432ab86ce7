//! Band-limited random fields, deterministic in `(model, band, seed)`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ScalarField, SpectralModel, VectorField};

fn check_band(model: &SpectralModel, band_limit: usize) -> Result<()> {
    let avail = model.mode_count().saturating_sub(1);
    if band_limit == 0 || band_limit > avail {
        return Err(Error::Usage(format!(
            "band limit must be in 1..={avail} for {}, got {band_limit}",
            model.label
        )));
    }
    Ok(())
}

fn coefficients(model: &SpectralModel, band_limit: usize, zero_mean: bool, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let lam1 = model.lambda1();
    DVector::from_fn(model.mode_count(), |k, _| {
        let z: f64 = StandardNormal.sample(rng);
        match k {
            0 if zero_mean => 0.0,
            0 => z,
            k if k <= band_limit => z / (1.0 + model.eigenvalues[k] / lam1).sqrt(),
            _ => 0.0,
        }
    })
}

/// `Σ_{k ≤ band} c_k φ_k` with Gaussian `c_k` damped by `(1 + λ_k/λ_1)^{−1/2}`.
/// `band_limit` counts nonconstant modes, so `band_limit = 1` gives a
/// multiple of `φ_1` (plus a constant unless `zero_mean`).
pub fn random_field(model: &SpectralModel, band_limit: usize, seed: u64, zero_mean: bool) -> Result<ScalarField> {
    check_band(model, band_limit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(model.synthesize(&coefficients(model, band_limit, zero_mean, &mut rng)))
}

/// One band-limited field per vector component; the zero field on graphs.
pub fn random_vector_field(model: &SpectralModel, band_limit: usize, seed: u64) -> Result<VectorField> {
    if model.vector_dim() == 0 {
        return Ok(VectorField::zeros(model));
    }
    check_band(model, band_limit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..model.vector_dim())
        .map(|_| model.synthesize(&coefficients(model, band_limit, false, &mut rng)).values)
        .collect();
    Ok(VectorField::new(comps))
}

/// Nonnegative test function `|g| + c` with `g` band-limited and `c ≥ 0`.
pub fn random_nonnegative(model: &SpectralModel, band_limit: usize, seed: u64) -> Result<ScalarField> {
    let g = random_field(model, band_limit, seed, false)?;
    let shift = (seed % 3) as f64 * 0.25;
    Ok(g.map(|v| v.abs() + shift))
}
