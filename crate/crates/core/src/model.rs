//! The absorption model: three Gaussian bands (270, 360 and optionally
//! 520 nm), a `R·λ⁻³` ramp and a weighted reference spectrum of an
//! electronic-grade diamond.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Convention, Quantity, Spectrum};

/// `a·exp(−(λ−b)²/(2c²))` with `a` in cm⁻¹ and `b`, `c` in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBand {
    pub amplitude: f64,
    pub center_nm: f64,
    /// RMS width.
    pub width_nm: f64,
}

impl GaussianBand {
    pub fn new(amplitude: f64, center_nm: f64, width_nm: f64) -> Result<Self> {
        let band = GaussianBand {
            amplitude,
            center_nm,
            width_nm,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "band amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        if !self.center_nm.is_finite() {
            return Err(Error::InvalidParams("band center must be finite".into()));
        }
        if !(self.width_nm > 0.0 && self.width_nm.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "band width must be > 0, got {}",
                self.width_nm
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, wavelength_nm: f64) -> f64 {
        eval_gaussian(self, wavelength_nm)
    }
}

#[inline]
pub fn eval_gaussian(band: &GaussianBand, wavelength_nm: f64) -> f64 {
    let z = (wavelength_nm - band.center_nm) / band.width_nm;
    band.amplitude * (-0.5 * z * z).exp()
}

#[inline]
pub fn eval_ramp(ramp: f64, wavelength_nm: f64) -> f64 {
    ramp / (wavelength_nm * wavelength_nm * wavelength_nm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    FiveComponent,
    FourComponent,
}

impl ModelMode {
    pub fn n_params(self) -> usize {
        self.params().len()
    }

    /// Parameter vector layout, also the Jacobian column order.
    pub fn params(self) -> &'static [ParamName] {
        use ParamName::*;
        match self {
            ModelMode::FiveComponent => &[
                A270, B270, C270, A360, B360, C360, A520, B520, C520, Ramp, RefWeight,
            ],
            ModelMode::FourComponent => &[A270, B270, C270, A360, B360, C360, Ramp, RefWeight],
        }
    }
}

/// Named model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamName {
    #[serde(rename = "a270")]
    A270,
    #[serde(rename = "b270")]
    B270,
    #[serde(rename = "c270")]
    C270,
    #[serde(rename = "a360")]
    A360,
    #[serde(rename = "b360")]
    B360,
    #[serde(rename = "c360")]
    C360,
    #[serde(rename = "a520")]
    A520,
    #[serde(rename = "b520")]
    B520,
    #[serde(rename = "c520")]
    C520,
    #[serde(rename = "ramp")]
    Ramp,
    #[serde(rename = "ref_weight")]
    RefWeight,
}

impl ParamName {
    pub const ALL: [ParamName; 11] = [
        ParamName::A270,
        ParamName::B270,
        ParamName::C270,
        ParamName::A360,
        ParamName::B360,
        ParamName::C360,
        ParamName::A520,
        ParamName::B520,
        ParamName::C520,
        ParamName::Ramp,
        ParamName::RefWeight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::A270 => "a270",
            ParamName::B270 => "b270",
            ParamName::C270 => "c270",
            ParamName::A360 => "a360",
            ParamName::B360 => "b360",
            ParamName::C360 => "c360",
            ParamName::A520 => "a520",
            ParamName::B520 => "b520",
            ParamName::C520 => "c520",
            ParamName::Ramp => "ramp",
            ParamName::RefWeight => "ref_weight",
        }
    }

    /// Parameters the model is linear in.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            ParamName::A270
                | ParamName::A360
                | ParamName::A520
                | ParamName::Ramp
                | ParamName::RefWeight
        )
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParamName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown parameter {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub g270: GaussianBand,
    pub g360: GaussianBand,
    /// Present exactly in five-component mode.
    pub g520: Option<GaussianBand>,
    /// Ramp factor `R`, cm⁻¹·nm³.
    pub ramp: f64,
    /// Weight of the reference spectrum (dimensionless).
    pub ref_weight: f64,
}

impl ModelParams {
    pub fn mode(&self) -> ModelMode {
        if self.g520.is_some() {
            ModelMode::FiveComponent
        } else {
            ModelMode::FourComponent
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.g270.validate()?;
        self.g360.validate()?;
        if let Some(g) = &self.g520 {
            g.validate()?;
        }
        if !(self.ramp >= 0.0 && self.ramp.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "ramp must be >= 0, got {}",
                self.ramp
            )));
        }
        if !(self.ref_weight >= 0.0 && self.ref_weight.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "ref_weight must be >= 0, got {}",
                self.ref_weight
            )));
        }
        Ok(())
    }

    pub fn get(&self, name: ParamName) -> Option<f64> {
        let g520 = self.g520.as_ref();
        Some(match name {
            ParamName::A270 => self.g270.amplitude,
            ParamName::B270 => self.g270.center_nm,
            ParamName::C270 => self.g270.width_nm,
            ParamName::A360 => self.g360.amplitude,
            ParamName::B360 => self.g360.center_nm,
            ParamName::C360 => self.g360.width_nm,
            ParamName::A520 => g520?.amplitude,
            ParamName::B520 => g520?.center_nm,
            ParamName::C520 => g520?.width_nm,
            ParamName::Ramp => self.ramp,
            ParamName::RefWeight => self.ref_weight,
        })
    }

    /// Parameter vector in [`ModelMode::params`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.mode()
            .params()
            .iter()
            .map(|&p| self.get(p).unwrap())
            .collect()
    }

    /// Inverse of [`ModelParams::to_vec`]; does not validate.
    pub fn from_slice(mode: ModelMode, values: &[f64]) -> Result<Self> {
        if values.len() != mode.n_params() {
            return Err(Error::InvalidParams(format!(
                "{:?} takes {} parameters, got {}",
                mode,
                mode.n_params(),
                values.len()
            )));
        }
        let band = |i: usize| GaussianBand {
            amplitude: values[i],
            center_nm: values[i + 1],
            width_nm: values[i + 2],
        };
        Ok(match mode {
            ModelMode::FiveComponent => ModelParams {
                g270: band(0),
                g360: band(3),
                g520: Some(band(6)),
                ramp: values[9],
                ref_weight: values[10],
            },
            ModelMode::FourComponent => ModelParams {
                g270: band(0),
                g360: band(3),
                g520: None,
                ramp: values[6],
                ref_weight: values[7],
            },
        })
    }

    /// Same parameters in another mode; switching to five components adds a
    /// zero-amplitude 520 nm band at the nominal position.
    pub fn into_mode(self, mode: ModelMode) -> Self {
        match mode {
            ModelMode::FourComponent => ModelParams { g520: None, ..self },
            ModelMode::FiveComponent => ModelParams {
                g520: Some(self.g520.unwrap_or(GaussianBand {
                    amplitude: 0.0,
                    center_nm: 520.0,
                    width_nm: 40.0,
                })),
                ..self
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceOrigin {
    UserFile,
    BuiltInParametric,
}

/// Sigmoid stand-in for an electronic-grade diamond spectrum, in decadic cm⁻¹:
/// `height / (1 + exp((λ − edge_nm)/edge_width_nm)) + floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuiltinRefParams {
    pub edge_nm: f64,
    pub edge_width_nm: f64,
    pub height: f64,
    pub floor: f64,
}

/// Overrides [`BuiltinRefParams::default`] as `edge_nm,edge_width_nm,height,floor`.
pub const BUILTIN_REF_ENV: &str = "NSFIT_BUILTIN_REF_PARAMS";

impl Default for BuiltinRefParams {
    fn default() -> Self {
        BuiltinRefParams {
            edge_nm: 230.0,
            edge_width_nm: 3.0,
            height: 20.0,
            floor: 0.0,
        }
    }
}

impl BuiltinRefParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.edge_nm.is_finite()
            && self.edge_width_nm > 0.0
            && self.edge_width_nm.is_finite()
            && self.height >= 0.0
            && self.height.is_finite()
            && self.floor >= 0.0
            && self.floor.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "invalid built-in reference parameters {self:?}"
            )))
        }
    }

    /// Parses `edge_nm,edge_width_nm,height,floor`.
    pub fn parse(text: &str) -> Result<Self> {
        let fields = text
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParams(format!("{BUILTIN_REF_ENV}: {e}")))?;
        let [edge_nm, edge_width_nm, height, floor] = fields[..] else {
            return Err(Error::InvalidParams(format!(
                "{BUILTIN_REF_ENV}: expected 4 comma-separated numbers, got {}",
                fields.len()
            )));
        };
        let p = BuiltinRefParams {
            edge_nm,
            edge_width_nm,
            height,
            floor,
        };
        p.validate()?;
        Ok(p)
    }

    /// Defaults, overridden by the environment variable when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUILTIN_REF_ENV) {
            Ok(text) if !text.trim().is_empty() => Self::parse(&text),
            _ => Ok(Self::default()),
        }
    }

    /// Decadic value at `wavelength_nm`.
    pub fn eval(&self, wavelength_nm: f64) -> f64 {
        let z = (wavelength_nm - self.edge_nm) / self.edge_width_nm;
        // exp overflow to inf gives 0, the intended limit
        self.height / (1.0 + z.exp()) + self.floor
    }
}

/// Baseline absorption spectrum `e(λ)` entering the model with a fitted weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpectrum {
    spectrum: Spectrum,
    origin: ReferenceOrigin,
}

impl ReferenceSpectrum {
    /// Wraps a user-supplied absorption spectrum. Values must be non-negative.
    pub fn from_spectrum(spectrum: Spectrum) -> Result<Self> {
        spectrum.convention()?;
        if let Some((wl, v)) = spectrum.iter().find(|&(_, v)| v < 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "reference spectrum is negative ({v}) at {wl} nm"
            )));
        }
        Ok(ReferenceSpectrum {
            spectrum,
            origin: ReferenceOrigin::UserFile,
        })
    }

    /// Samples the parametric reference on `grid` in the given convention.
    pub fn builtin(
        params: &BuiltinRefParams,
        grid: &[f64],
        convention: Convention,
    ) -> Result<Self> {
        params.validate()?;
        let k = convention.from_decadic();
        let values = grid.iter().map(|&wl| k * params.eval(wl)).collect();
        let spectrum = Spectrum::new(grid.to_vec(), values, Quantity::absorption(convention))?;
        Ok(ReferenceSpectrum {
            spectrum,
            origin: ReferenceOrigin::BuiltInParametric,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn origin(&self) -> ReferenceOrigin {
        self.origin
    }

    pub fn convention(&self) -> Convention {
        self.spectrum
            .convention()
            .expect("reference is an absorption spectrum")
    }

    /// The same reference expressed in another convention.
    pub fn to_convention(&self, convention: Convention) -> Self {
        let k = convention.from_decadic() / self.convention().from_decadic();
        let values = self.spectrum.values().iter().map(|v| v * k).collect();
        let spectrum = Spectrum::new(
            self.spectrum.wavelengths().to_vec(),
            values,
            Quantity::absorption(convention),
        )
        .expect("scaling keeps the spectrum valid");
        ReferenceSpectrum {
            spectrum,
            origin: self.origin,
        }
    }

    /// Multiplies every value by `k > 0`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let values = self.spectrum.values().iter().map(|v| v * k).collect();
        Ok(ReferenceSpectrum {
            spectrum: self.spectrum.with_values(values)?,
            origin: self.origin,
        })
    }

    /// Reference values on `grid`, linearly interpolated.
    pub fn values_on(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid == self.spectrum.wavelengths() {
            return Ok(self.spectrum.values().to_vec());
        }
        grid.iter().map(|&wl| self.spectrum.value_at(wl)).collect()
    }
}

/// Per-component contributions on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub g270: Vec<f64>,
    pub g360: Vec<f64>,
    /// All zeros in four-component mode.
    pub g520: Vec<f64>,
    pub ramp: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Components {
    pub fn total(&self) -> Vec<f64> {
        (0..self.g270.len())
            .map(|i| self.g270[i] + self.g360[i] + self.g520[i] + self.ramp[i] + self.offset[i])
            .collect()
    }
}

/// Model bound to one wavelength grid with the reference already sampled on
/// it, so repeated evaluations skip the interpolation.
#[derive(Debug, Clone)]
pub struct GridModel {
    grid: Vec<f64>,
    reference: Vec<f64>,
    mode: ModelMode,
}

impl GridModel {
    pub fn new(grid: &[f64], reference: &ReferenceSpectrum, mode: ModelMode) -> Result<Self> {
        Ok(GridModel {
            grid: grid.to_vec(),
            reference: reference.values_on(grid)?,
            mode,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn n_params(&self) -> usize {
        self.mode.n_params()
    }

    /// Model values for a parameter vector in [`ModelMode::params`] order.
    pub fn eval_vec(&self, p: &[f64]) -> Vec<f64> {
        let (bands, ramp, weight) = self.split(p);
        self.grid
            .iter()
            .zip(&self.reference)
            .map(|(&wl, &e)| {
                let mut y = 0.0;
                for b in bands {
                    y += gauss(b, wl);
                }
                y + eval_ramp(ramp, wl) + weight * e
            })
            .collect()
    }

    /// Analytic Jacobian `∂model/∂p`, rows = grid points.
    pub fn jacobian_vec(&self, p: &[f64]) -> DMatrix<f64> {
        let (bands, _, _) = self.split(p);
        let n_bands = bands.len();
        let mut jac = DMatrix::zeros(self.grid.len(), p.len());
        for (row, (&wl, &e)) in self.grid.iter().zip(&self.reference).enumerate() {
            for (k, b) in bands.iter().enumerate() {
                let (a, center, width) = (b[0], b[1], b[2]);
                let dx = wl - center;
                let w2 = width * width;
                let g = (-0.5 * dx * dx / w2).exp();
                jac[(row, 3 * k)] = g;
                jac[(row, 3 * k + 1)] = a * g * dx / w2;
                jac[(row, 3 * k + 2)] = a * g * dx * dx / (w2 * width);
            }
            jac[(row, 3 * n_bands)] = 1.0 / (wl * wl * wl);
            jac[(row, 3 * n_bands + 1)] = e;
        }
        jac
    }

    pub fn components(&self, params: &ModelParams) -> Components {
        let band = |g: &GaussianBand| self.grid.iter().map(|&wl| g.eval(wl)).collect::<Vec<_>>();
        Components {
            g270: band(&params.g270),
            g360: band(&params.g360),
            g520: params
                .g520
                .as_ref()
                .map(band)
                .unwrap_or_else(|| vec![0.0; self.grid.len()]),
            ramp: self
                .grid
                .iter()
                .map(|&wl| eval_ramp(params.ramp, wl))
                .collect(),
            offset: self
                .reference
                .iter()
                .map(|e| params.ref_weight * e)
                .collect(),
        }
    }

    fn split<'p>(&self, p: &'p [f64]) -> (&'p [[f64; 3]], f64, f64) {
        assert_eq!(p.len(), self.mode.n_params(), "parameter vector length");
        let n_bands = (p.len() - 2) / 3;
        let (flat, rest) = p.split_at(3 * n_bands);
        let (bands, _) = flat.as_chunks::<3>();
        (bands, rest[0], rest[1])
    }
}

#[inline]
fn gauss(b: &[f64; 3], wl: f64) -> f64 {
    let z = (wl - b[1]) / b[2];
    b[0] * (-0.5 * z * z).exp()
}

/// Pointwise model sum on `grid`.
pub fn eval_model(
    params: &ModelParams,
    grid: &[f64],
    reference: &ReferenceSpectrum,
) -> Result<Vec<f64>> {
    params.validate()?;
    let model = GridModel::new(grid, reference, params.mode())?;
    Ok(model.eval_vec(&params.to_vec()))
}

/// Analytic Jacobian, columns in [`ModelMode::params`] order:
/// `a270, b270, c270, a360, b360, c360, [a520, b520, c520,] ramp, ref_weight`.
pub fn jacobian(
    params: &ModelParams,
    grid: &[f64],
    reference: &ReferenceSpectrum,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    let model = GridModel::new(grid, reference, params.mode())?;
    Ok(model.jacobian_vec(&params.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Vec<f64> {
        (0..=600).map(|i| 200.0 + i as f64).collect()
    }

    fn params() -> ModelParams {
        ModelParams {
            g270: GaussianBand::new(5.9, 270.0, 20.0).unwrap(),
            g360: GaussianBand::new(2.0, 360.0, 40.0).unwrap(),
            g520: Some(GaussianBand::new(0.8, 520.0, 45.0).unwrap()),
            ramp: 8e6,
            ref_weight: 1.2,
        }
    }

    fn reference(g: &[f64]) -> ReferenceSpectrum {
        ReferenceSpectrum::builtin(
            &BuiltinRefParams {
                floor: 0.3,
                ..Default::default()
            },
            g,
            Convention::Decadic,
        )
        .unwrap()
    }

    #[test]
    fn gaussian_values() {
        let g = GaussianBand::new(5.9, 270.0, 20.0).unwrap();
        assert_eq!(eval_gaussian(&g, 270.0), 5.9);
        let unit = GaussianBand::new(1.0, 270.0, 20.0).unwrap();
        assert_relative_eq!(unit.eval(290.0), (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(unit.eval(290.0), 0.6065, epsilon = 1e-4);
        let zero = GaussianBand::new(0.0, 270.0, 20.0).unwrap();
        assert_eq!(zero.eval(123.0), 0.0);
        assert!(GaussianBand::new(-1.0, 270.0, 20.0).is_err());
        assert!(GaussianBand::new(1.0, 270.0, 0.0).is_err());
    }

    #[test]
    fn ramp_values() {
        assert_eq!(eval_ramp(8e6, 200.0), 1.0);
        assert_eq!(eval_ramp(0.0, 321.0), 0.0);
        assert_eq!(eval_ramp(8e6, 400.0), 0.125);
        assert!(eval_ramp(8e6, 401.0) < eval_ramp(8e6, 400.0));
    }

    #[test]
    fn offset_only_and_empty_models() {
        let g = grid();
        let r = reference(&g);
        let mut p = params();
        p.g270.amplitude = 0.0;
        p.g360.amplitude = 0.0;
        p.g520.as_mut().unwrap().amplitude = 0.0;
        p.ramp = 0.0;
        p.ref_weight = 1.0;
        assert_eq!(eval_model(&p, &g, &r).unwrap(), r.spectrum().values());
        p.ref_weight = 0.0;
        assert!(eval_model(&p, &g, &r).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reference_must_cover_grid() {
        let g = grid();
        let r = reference(&g[100..]);
        assert!(matches!(
            eval_model(&params(), &g, &r),
            Err(Error::GridOutOfRange { .. })
        ));
    }

    #[test]
    fn four_component_equals_zero_520() {
        let g = grid();
        let r = reference(&g);
        let mut five = params();
        five.g520.as_mut().unwrap().amplitude = 0.0;
        let four = five.into_mode(ModelMode::FourComponent);
        assert_eq!(
            eval_model(&five, &g, &r).unwrap(),
            eval_model(&four, &g, &r).unwrap()
        );
    }

    #[test]
    fn linear_parameters_scale_their_component() {
        let g = grid();
        let r = reference(&g);
        let p = params();
        let model = GridModel::new(&g, &r, p.mode()).unwrap();
        let base = p.to_vec();
        let y0 = model.eval_vec(&base);
        for (i, name) in ModelMode::FiveComponent.params().iter().enumerate() {
            if !name.is_linear() {
                continue;
            }
            let mut doubled = base.clone();
            doubled[i] *= 2.0;
            let mut only = vec![0.0; base.len()];
            only.copy_from_slice(&base);
            for (j, n) in ModelMode::FiveComponent.params().iter().enumerate() {
                if n.is_linear() && j != i {
                    only[j] = 0.0;
                }
            }
            only[i] = base[i];
            let comp = model.eval_vec(&only);
            let y1 = model.eval_vec(&doubled);
            for k in 0..g.len() {
                assert_relative_eq!(
                    y1[k],
                    y0[k] + comp[k],
                    max_relative = 1e-13,
                    epsilon = 1e-13
                );
            }
        }
    }

    #[test]
    fn jacobian_special_columns() {
        let g = grid();
        let r = reference(&g);
        let p = params();
        let jac = jacobian(&p, &g, &r).unwrap();
        assert_eq!(jac.ncols(), 11);
        let last = jac.ncols() - 1;
        for (i, &e) in r.spectrum().values().iter().enumerate() {
            assert_eq!(jac[(i, last)], e);
        }
        assert_eq!(jac[(70, 0)], 1.0); // λ = 270 nm
        let four = jacobian(&p.into_mode(ModelMode::FourComponent), &g, &r).unwrap();
        assert_eq!(four.ncols(), 8);
    }

    #[test]
    fn param_vector_round_trip() {
        let p = params();
        assert_eq!(ModelParams::from_slice(p.mode(), &p.to_vec()).unwrap(), p);
        let four = p.into_mode(ModelMode::FourComponent);
        assert_eq!(
            ModelParams::from_slice(four.mode(), &four.to_vec()).unwrap(),
            four
        );
        assert!(ModelParams::from_slice(ModelMode::FourComponent, &p.to_vec()).is_err());
        for name in ParamName::ALL {
            assert_eq!(name.as_str().parse::<ParamName>().unwrap(), name);
        }
    }

    #[test]
    fn builtin_reference_shape() {
        let p = BuiltinRefParams::default();
        assert_relative_eq!(p.eval(230.0), 10.0);
        assert!(p.eval(200.0) > 19.9);
        assert!(p.eval(800.0) < 1e-60);
        let parsed = BuiltinRefParams::parse("225, 2.5, 30, 0.1").unwrap();
        assert_eq!(parsed.edge_nm, 225.0);
        assert_eq!(parsed.floor, 0.1);
        assert!(BuiltinRefParams::parse("1,2,3").is_err());
        assert!(BuiltinRefParams::parse("230,0,3,0").is_err());
        let g = grid();
        let nat = ReferenceSpectrum::builtin(&p, &g, Convention::Natural).unwrap();
        let dec = ReferenceSpectrum::builtin(&p, &g, Convention::Decadic).unwrap();
        assert_eq!(
            dec.to_convention(Convention::Natural).convention(),
            Convention::Natural
        );
        for (a, b) in nat.spectrum().values().iter().zip(dec.spectrum().values()) {
            assert_relative_eq!(*a, b * std::f64::consts::LN_10, max_relative = 1e-15);
        }
    }
}
