//! Synthetic spectra from known model parameters, used as fixtures and as the
//! ground truth the fitter is checked against.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{GaussianBand, GridModel, ModelParams, ReferenceSpectrum};
use crate::spectrum::{Convention, Quantity, Spectrum};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub truth: ModelParams,
    pub reference: ReferenceSpectrum,
    pub grid: Vec<f64>,
    /// Standard deviation of additive white noise on absorption, cm⁻¹.
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// Bands outside the model, e.g. a contaminant near 800 nm.
    pub extra_bands: Vec<GaussianBand>,
}

impl SynthSpec {
    pub fn noiseless(truth: ModelParams, reference: ReferenceSpectrum, grid: Vec<f64>) -> Self {
        SynthSpec {
            truth,
            reference,
            grid,
            noise_sigma: 0.0,
            rng_seed: 0,
            extra_bands: Vec::new(),
        }
    }
}

/// `lo, lo + step, …` up to and including `hi` (to within rounding).
pub fn uniform_grid(lo_nm: f64, hi_nm: f64, step_nm: f64) -> Result<Vec<f64>> {
    if !(step_nm > 0.0 && lo_nm < hi_nm) || !(lo_nm.is_finite() && hi_nm.is_finite()) {
        return Err(Error::InvalidSpectrum(format!(
            "bad grid {lo_nm}:{hi_nm}:{step_nm}"
        )));
    }
    let n = ((hi_nm - lo_nm) / step_nm + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo_nm + i as f64 * step_nm).collect())
}

/// 200 to 800 nm in 1 nm steps.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(200.0, 800.0, 1.0).expect("valid default grid")
}

/// Model absorption plus extra bands plus seeded Gaussian noise, in the
/// reference's convention.
pub fn generate_absorption(s: &SynthSpec) -> Result<Spectrum> {
    s.truth.validate()?;
    if !(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "noise sigma must be >= 0, got {}",
            s.noise_sigma
        )));
    }
    for b in &s.extra_bands {
        b.validate()?;
    }
    let model = GridModel::new(&s.grid, &s.reference, s.truth.mode())?;
    let mut values = model.eval_vec(&s.truth.to_vec());
    for band in &s.extra_bands {
        for (v, &wl) in values.iter_mut().zip(&s.grid) {
            *v += band.eval(wl);
        }
    }
    if s.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(s.rng_seed);
        let normal = Normal::new(0.0, s.noise_sigma).expect("finite sigma");
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Spectrum::new(
        s.grid.clone(),
        values,
        Quantity::absorption(s.reference.convention()),
    )
}

/// Transmission fraction of a plate of `thickness_cm` whose absorption
/// coefficient is [`generate_absorption`] read in `convention`:
/// `T = 10^(−A·d)` or `T = exp(−A·d)`.
///
/// Noise can push `A` below zero; the resulting `T > 1` is rejected.
pub fn generate_transmission(
    s: &SynthSpec,
    thickness_cm: f64,
    convention: Convention,
) -> Result<Spectrum> {
    if !(thickness_cm > 0.0 && thickness_cm.is_finite()) {
        return Err(Error::InvalidMeta(format!(
            "thickness must be positive, got {thickness_cm} cm"
        )));
    }
    let absorption = generate_absorption(s)?;
    let values = absorption
        .values()
        .iter()
        .map(|a| match convention {
            Convention::Decadic => 10f64.powf(-a * thickness_cm),
            Convention::Natural => (-a * thickness_cm).exp(),
        })
        .collect();
    Spectrum::new(s.grid.clone(), values, Quantity::TransmissionFraction)
}
