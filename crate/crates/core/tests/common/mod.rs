#![allow(dead_code)]

use nsfit::model::{BuiltinRefParams, GaussianBand, ModelMode, ModelParams, ReferenceSpectrum};
use nsfit::spectrum::Convention;
use nsfit::synth::{default_grid, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random truth with band centers and widths well inside the default bounds.
pub fn random_truth(rng: &mut ChaCha8Rng, mode: ModelMode) -> ModelParams {
    let mut band = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| GaussianBand {
        amplitude: rng.random_range(a.0..a.1),
        center_nm: rng.random_range(b.0..b.1),
        width_nm: rng.random_range(c.0..c.1),
    };
    let g270 = band((1.0, 40.0), (268.5, 271.5), (15.0, 25.0));
    let g360 = band((0.5, 10.0), (345.0, 375.0), (25.0, 70.0));
    let g520 = band((0.3, 5.0), (495.0, 545.0), (25.0, 80.0));
    ModelParams {
        g270,
        g360,
        g520: (mode == ModelMode::FiveComponent).then_some(g520),
        ramp: rng.random_range(1e6..4e7),
        ref_weight: rng.random_range(0.5..2.0),
    }
}

pub fn builtin_reference(grid: &[f64], convention: Convention) -> ReferenceSpectrum {
    ReferenceSpectrum::builtin(&BuiltinRefParams::default(), grid, convention).unwrap()
}

pub fn synth(truth: ModelParams) -> SynthSpec {
    let grid = default_grid();
    let reference = builtin_reference(&grid, Convention::Decadic);
    SynthSpec::noiseless(truth, reference, grid)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Largest relative deviation over all parameters.
pub fn max_rel_param_error(fitted: &ModelParams, truth: &ModelParams) -> f64 {
    fitted
        .to_vec()
        .iter()
        .zip(truth.to_vec())
        .map(|(f, t)| rel(*f, t))
        .fold(0.0, f64::max)
}
