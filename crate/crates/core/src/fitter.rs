//! Box-constrained least-squares decomposition of an absorption spectrum and
//! the boundary-hit reliability rule.
//!
//! A fit is judged reliable only when it converged and neither the 270 nm
//! band center nor its width ended on a bound: a parameter pinned to its
//! bound means the optimum lies outside the expected range.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{self, LmSettings, ModelProblem};
use crate::model::{GaussianBand, GridModel, ModelMode, ModelParams, ParamName, ReferenceSpectrum};
use crate::spectrum::{Convention, Spectrum};

pub use crate::lm::Termination;

/// Upper end of the window when the 650 nm cutoff is requested.
pub const CUTOFF_650_NM: f64 = 650.0;

/// Per-parameter `(lo, hi)` box. Unbounded sides are infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    ranges: [(f64, f64); 11],
}

impl Default for Bounds {
    fn default() -> Self {
        use ParamName::*;
        let mut b = Bounds {
            ranges: [(0.0, f64::INFINITY); 11],
        };
        b.ranges[B270 as usize] = (268.0, 272.0);
        b.ranges[C270 as usize] = (13.0, 27.0);
        b.ranges[B360 as usize] = (340.0, 380.0);
        b.ranges[C360 as usize] = (20.0, 80.0);
        b.ranges[B520 as usize] = (490.0, 550.0);
        b.ranges[C520 as usize] = (20.0, 90.0);
        b
    }
}

impl Bounds {
    pub fn get(&self, name: ParamName) -> (f64, f64) {
        self.ranges[name as usize]
    }

    pub fn set(&mut self, name: ParamName, lo: f64, hi: f64) -> Result<()> {
        if !(lo < hi) || lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "bounds for {name} need lo < hi, got [{lo}, {hi}]"
            )));
        }
        if matches!(name, ParamName::C270 | ParamName::C360 | ParamName::C520) && lo <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "width bound for {name} must be positive"
            )));
        }
        if name.is_linear() && lo < 0.0 {
            return Err(Error::InvalidConfig(format!("{name} cannot be negative")));
        }
        self.ranges[name as usize] = (lo, hi);
        Ok(())
    }

    fn vectors(&self, mode: ModelMode) -> (Vec<f64>, Vec<f64>) {
        mode.params().iter().map(|&p| self.get(p)).unzip()
    }

    /// Absolute distance from a bound that still counts as touching it.
    fn tolerance(&self, name: ParamName, epsilon: f64) -> f64 {
        let (lo, hi) = self.get(name);
        let span = if (hi - lo).is_finite() {
            hi - lo
        } else {
            [lo, hi]
                .into_iter()
                .filter(|v| v.is_finite())
                .map(f64::abs)
                .fold(1.0, f64::max)
        };
        epsilon * span
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: ModelMode,
    pub fit_window_nm: (f64, f64),
    /// Caps the window at 650 nm.
    pub cutoff_650: bool,
    pub bounds: Bounds,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub residual_tolerance: f64,
    /// Fraction of the bound span treated as touching a bound.
    pub boundary_epsilon: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: ModelMode::FiveComponent,
            fit_window_nm: (200.0, 800.0),
            cutoff_650: false,
            bounds: Bounds::default(),
            max_iterations: 200,
            step_tolerance: 1e-10,
            residual_tolerance: 1e-12,
            boundary_epsilon: 1e-6,
        }
    }
}

impl FitConfig {
    pub fn four_component() -> Self {
        FitConfig {
            mode: ModelMode::FourComponent,
            ..Default::default()
        }
    }

    pub fn window(&self) -> (f64, f64) {
        let (lo, hi) = self.fit_window_nm;
        if self.cutoff_650 {
            (lo, hi.min(CUTOFF_650_NM))
        } else {
            (lo, hi)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window();
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "fit window [{lo}, {hi}] nm is empty"
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        for (name, v) in [
            ("step_tolerance", self.step_tolerance),
            ("residual_tolerance", self.residual_tolerance),
            ("boundary_epsilon", self.boundary_epsilon),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Window restricted to the data; both must overlap.
    fn window_on(&self, spec: &Spectrum) -> Result<Spectrum> {
        let (lo, hi) = self.window();
        spec.crop(lo.max(spec.min_wavelength()), hi.min(spec.max_wavelength()))
            .map_err(|_| Error::EmptyResult {
                lo_nm: lo,
                hi_nm: hi,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Lower,
    Upper,
}

impl BoundSide {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundSide::Lower => "lower",
            BoundSide::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryHit {
    pub param: ParamName,
    pub side: BoundSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    /// Sum of squared residuals, cm⁻².
    pub rss: f64,
    /// cm⁻¹.
    pub rmse: f64,
    pub initial_rss: f64,
    pub n_points: usize,
    /// Window actually fitted, nm.
    pub window_nm: (f64, f64),
    pub convention: Convention,
    pub bounds: Bounds,
    pub boundary_hits: Vec<BoundaryHit>,
    /// Height of the 270 nm band, cm⁻¹, in `convention`.
    pub mu270: f64,
    pub reliable: bool,
}

impl FitResult {
    pub fn hit(&self, name: ParamName) -> Option<BoundSide> {
        self.boundary_hits
            .iter()
            .find(|h| h.param == name)
            .map(|h| h.side)
    }
}

/// Nominal `(center, width)` of each band before fitting.
const NOMINAL_BANDS: [(f64, f64); 3] = [(270.0, 20.0), (360.0, 40.0), (520.0, 40.0)];
/// Widths tried for each band when picking the starting point, nominal first.
const CANDIDATE_WIDTHS: [&[f64]; 3] = [
    &[20.0, 15.0, 25.0],
    &[40.0, 25.0, 60.0],
    &[40.0, 25.0, 60.0, 80.0],
];
const ANCHOR_NM: f64 = 270.0;

/// Deterministic starting point for [`fit`].
///
/// Band centers start at their nominal positions. For each combination of a
/// few candidate widths, the parameters the model is linear in (amplitudes,
/// ramp, reference weight) are solved by non-negative least squares; the
/// combination with the smallest residual wins.
/// Band amplitudes are floored at `1e-3 · max|data|` so center and width
/// derivatives do not vanish at the start.
pub fn initial_guess(
    spec: &Spectrum,
    reference: &ReferenceSpectrum,
    config: &FitConfig,
) -> Result<ModelParams> {
    config.validate()?;
    spec.convention()?;
    let (lo, hi) = config.window();
    if !(lo <= ANCHOR_NM && ANCHOR_NM <= hi) {
        return Err(Error::WindowTooNarrow {
            lo_nm: lo,
            hi_nm: hi,
            anchor_nm: ANCHOR_NM,
        });
    }
    let windowed = config.window_on(spec)?;
    if !(windowed.min_wavelength() <= ANCHOR_NM && ANCHOR_NM <= windowed.max_wavelength()) {
        return Err(Error::WindowTooNarrow {
            lo_nm: windowed.min_wavelength(),
            hi_nm: windowed.max_wavelength(),
            anchor_nm: ANCHOR_NM,
        });
    }
    let grid = windowed.wavelengths();
    let data = windowed.values();
    let ref_values = reference.values_on(grid)?;

    let n_bands = match config.mode {
        ModelMode::FiveComponent => 3,
        ModelMode::FourComponent => 2,
    };
    let bounds = &config.bounds;
    let band_names = [
        [ParamName::A270, ParamName::B270, ParamName::C270],
        [ParamName::A360, ParamName::B360, ParamName::C360],
        [ParamName::A520, ParamName::B520, ParamName::C520],
    ];
    let clamp = |name: ParamName, v: f64| {
        let (l, h) = bounds.get(name);
        v.clamp(l, h)
    };
    let centers: Vec<f64> = (0..n_bands)
        .map(|k| clamp(band_names[k][1], NOMINAL_BANDS[k].0))
        .collect();
    let width_sets: Vec<Vec<f64>> = (0..n_bands)
        .map(|k| {
            let mut ws: Vec<f64> = CANDIDATE_WIDTHS[k]
                .iter()
                .map(|&c| clamp(band_names[k][2], c))
                .collect();
            ws.dedup();
            ws
        })
        .collect();

    let yy: f64 = data.iter().map(|v| v * v).sum();
    let ramp_column: Vec<f64> = grid.iter().map(|&wl| wl.powi(-3)).collect();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for widths in cartesian(&width_sets) {
        let mut columns: Vec<Vec<f64>> = centers
            .iter()
            .zip(&widths)
            .map(|(&b, &c)| {
                grid.iter()
                    .map(|&wl| {
                        let z = (wl - b) / c;
                        (-0.5 * z * z).exp()
                    })
                    .collect()
            })
            .collect();
        columns.push(ramp_column.clone());
        columns.push(ref_values.clone());
        let (coef, rss) = nnls(&columns, data);
        if best.as_ref().is_none_or(|(r, _, _)| improves(rss, *r, yy)) {
            best = Some((rss, widths, coef));
        }
    }
    let (_, widths, coef) = best.expect("at least one width combination");

    let peak = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-3 * peak;
    let band = |k: usize| {
        let [a, _, _] = band_names[k];
        GaussianBand {
            amplitude: clamp(a, coef[k].max(floor)),
            center_nm: centers[k],
            width_nm: widths[k],
        }
    };
    Ok(ModelParams {
        g270: band(0),
        g360: band(1),
        g520: (n_bands == 3).then(|| band(2)),
        ramp: clamp(ParamName::Ramp, coef[n_bands]),
        ref_weight: clamp(ParamName::RefWeight, coef[n_bands + 1]),
    })
}

/// Strictly better by more than rounding noise, so ties keep the earlier
/// (simpler or nominal) candidate.
fn improves(rss: f64, best: f64, scale: f64) -> bool {
    rss < best * (1.0 - 1e-9) - 1e-12 * scale
}

/// Every combination taking one value from each set.
fn cartesian(sets: &[Vec<f64>]) -> Vec<Vec<f64>> {
    sets.iter().fold(vec![Vec::new()], |acc, set| {
        acc.iter()
            .flat_map(|prefix| {
                set.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect()
    })
}

/// Non-negative least squares by enumerating passive sets over the normal
/// equations; fine for the handful of linear parameters here. Returns the
/// coefficients and the residual sum of squares.
fn nnls(columns: &[Vec<f64>], data: &[f64]) -> (Vec<f64>, f64) {
    let k = columns.len();
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram = DMatrix::from_fn(k, k, |r, c| {
        if norms[r] > 0.0 && norms[c] > 0.0 {
            dot(&columns[r], &columns[c]) / (norms[r] * norms[c])
        } else {
            0.0
        }
    });
    let rhs = DVector::from_fn(k, |r, _| {
        if norms[r] > 0.0 {
            dot(&columns[r], data) / norms[r]
        } else {
            0.0
        }
    });
    let yy = dot(data, data);

    let mut best = vec![0.0; k];
    let mut best_rss = yy;
    for mask in 1u32..(1 << k) {
        let passive: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        if passive.iter().any(|&i| norms[i] == 0.0) {
            continue;
        }
        let m = passive.len();
        let sub = DMatrix::from_fn(m, m, |r, c| gram[(passive[r], passive[c])]);
        let sub_rhs = DVector::from_fn(m, |r, _| rhs[passive[r]]);
        let Some(chol) = sub.cholesky() else {
            continue;
        };
        let x = chol.solve(&sub_rhs);
        if x.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            continue;
        }
        let rss = yy - x.dot(&sub_rhs);
        if improves(rss, best_rss, yy) {
            best_rss = rss;
            best = vec![0.0; k];
            for (c, &i) in passive.iter().enumerate() {
                best[i] = x[c] / norms[i];
            }
        }
    }
    (best, best_rss.max(0.0))
}

impl ModelProblem for GridModel {
    fn eval(&self, p: &[f64]) -> Vec<f64> {
        self.eval_vec(p)
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        self.jacobian_vec(p)
    }
}

/// Fits the model to an absorption spectrum inside the configured window.
///
/// A fit that runs out of iterations is still returned, with
/// `converged == false` and `reliable == false`.
pub fn fit(
    spec: &Spectrum,
    reference: &ReferenceSpectrum,
    config: &FitConfig,
    init: Option<&ModelParams>,
) -> Result<FitResult> {
    config.validate()?;
    let convention = spec.convention()?;
    if reference.convention() != convention {
        return Err(Error::ConventionMismatch {
            left: convention,
            right: reference.convention(),
        });
    }
    let windowed = config.window_on(spec)?;
    let mode = config.mode;
    let n_params = mode.n_params();
    if windowed.len() < n_params {
        return Err(Error::DegenerateInput {
            points: windowed.len(),
            params: n_params,
        });
    }
    let model = GridModel::new(windowed.wavelengths(), reference, mode)?;

    let start = match init {
        Some(p) => {
            p.validate()?;
            p.into_mode(mode)
        }
        None => initial_guess(spec, reference, config)?,
    };
    let (lo, hi) = config.bounds.vectors(mode);
    let outcome = lm::minimize_box(
        &model,
        windowed.values(),
        &start.to_vec(),
        &lo,
        &hi,
        LmSettings {
            max_iterations: config.max_iterations,
            step_tolerance: config.step_tolerance,
            residual_tolerance: config.residual_tolerance,
        },
    );

    let params = ModelParams::from_slice(mode, &outcome.params)?;
    let boundary_hits: Vec<BoundaryHit> = mode
        .params()
        .iter()
        .zip(&outcome.params)
        .filter_map(|(&name, &v)| {
            let (l, h) = config.bounds.get(name);
            let tol = config.bounds.tolerance(name, config.boundary_epsilon);
            if v - l <= tol {
                Some(BoundaryHit {
                    param: name,
                    side: BoundSide::Lower,
                })
            } else if h - v <= tol {
                Some(BoundaryHit {
                    param: name,
                    side: BoundSide::Upper,
                })
            } else {
                None
            }
        })
        .collect();
    let converged = outcome.termination.converged();
    let reliable = converged
        && !boundary_hits
            .iter()
            .any(|h| matches!(h.param, ParamName::B270 | ParamName::C270));
    let n_points = windowed.len();

    Ok(FitResult {
        params,
        converged,
        termination: outcome.termination,
        iterations: outcome.iterations,
        rss: outcome.rss,
        rmse: (outcome.rss / n_points as f64).sqrt(),
        initial_rss: outcome.initial_rss,
        n_points,
        window_nm: (windowed.min_wavelength(), windowed.max_wavelength()),
        convention,
        bounds: config.bounds,
        boundary_hits,
        mu270: params.g270.amplitude,
        reliable,
    })
}

/// `data − model` over the window of `result`.
pub fn residual_spectrum(
    spec: &Spectrum,
    result: &FitResult,
    reference: &ReferenceSpectrum,
) -> Result<Spectrum> {
    let (lo, hi) = result.window_nm;
    let windowed = spec.crop(lo, hi)?;
    let model = GridModel::new(windowed.wavelengths(), reference, result.params.mode())?;
    let fitted = model.eval_vec(&result.params.to_vec());
    let resid = windowed
        .values()
        .iter()
        .zip(&fitted)
        .map(|(y, f)| y - f)
        .collect();
    windowed.with_values(resid)
}
