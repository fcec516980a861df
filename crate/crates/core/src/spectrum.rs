//! Spectra on a wavelength grid and the transmission to absorption conversion.

use std::f64::consts::LN_10;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logarithm base used to turn transmission into an absorption coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Decadic,
    Natural,
}

impl Convention {
    /// Multiplier taking a decadic coefficient into this convention.
    pub fn from_decadic(self) -> f64 {
        match self {
            Convention::Decadic => 1.0,
            Convention::Natural => LN_10,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Decadic => "decadic",
            Convention::Natural => "natural",
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "decadic" | "log10" => Ok(Convention::Decadic),
            "natural" | "ln" => Ok(Convention::Natural),
            other => Err(format!(
                "unknown convention {other:?} (expected decadic|natural)"
            )),
        }
    }
}

/// What the per-point values of a [`Spectrum`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    TransmissionFraction,
    TransmissionPercent,
    /// Decadic absorption coefficient, cm⁻¹.
    AbsorptionDecadic,
    /// Natural absorption coefficient, cm⁻¹.
    AbsorptionNatural,
}

impl Quantity {
    pub fn is_transmission(self) -> bool {
        matches!(
            self,
            Quantity::TransmissionFraction | Quantity::TransmissionPercent
        )
    }

    /// Convention of an absorption kind, `None` for transmission kinds.
    pub fn convention(self) -> Option<Convention> {
        match self {
            Quantity::AbsorptionDecadic => Some(Convention::Decadic),
            Quantity::AbsorptionNatural => Some(Convention::Natural),
            _ => None,
        }
    }

    pub fn absorption(convention: Convention) -> Self {
        match convention {
            Convention::Decadic => Quantity::AbsorptionDecadic,
            Convention::Natural => Quantity::AbsorptionNatural,
        }
    }

    /// Key used in spectrum file headers.
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::TransmissionFraction => "transmission_fraction",
            Quantity::TransmissionPercent => "transmission_percent",
            Quantity::AbsorptionDecadic => "absorption_decadic",
            Quantity::AbsorptionNatural => "absorption_natural",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "transmission_fraction" => Ok(Quantity::TransmissionFraction),
            "transmission_percent" => Ok(Quantity::TransmissionPercent),
            "absorption_decadic" => Ok(Quantity::AbsorptionDecadic),
            "absorption_natural" => Ok(Quantity::AbsorptionNatural),
            other => Err(format!("unknown quantity {other:?}")),
        }
    }
}

/// Values sampled on a strictly increasing wavelength grid (nm).
///
/// Construction validates the grid and the value range of the quantity, so a
/// `Spectrum` in hand always satisfies its invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    wavelengths_nm: Vec<f64>,
    values: Vec<f64>,
    quantity: Quantity,
}

impl Spectrum {
    pub fn new(wavelengths_nm: Vec<f64>, values: Vec<f64>, quantity: Quantity) -> Result<Self> {
        if wavelengths_nm.len() < 2 {
            return Err(Error::InvalidSpectrum(format!(
                "need at least 2 points, got {}",
                wavelengths_nm.len()
            )));
        }
        if wavelengths_nm.len() != values.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} wavelengths but {} values",
                wavelengths_nm.len(),
                values.len()
            )));
        }
        validate_grid(&wavelengths_nm)?;
        let upper = match quantity {
            Quantity::TransmissionFraction => Some(1.0),
            Quantity::TransmissionPercent => Some(100.0),
            _ => None,
        };
        for (&wl, &v) in wavelengths_nm.iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::InvalidSpectrum(format!(
                    "non-finite value {v} at {wl} nm"
                )));
            }
            if let Some(upper) = upper {
                if !(0.0..=upper).contains(&v) {
                    return Err(Error::InvalidSpectrum(format!(
                        "{quantity} value {v} at {wl} nm outside [0, {upper}]"
                    )));
                }
            }
        }
        Ok(Spectrum {
            wavelengths_nm,
            values,
            quantity,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_wavelength(&self) -> f64 {
        self.wavelengths_nm[0]
    }

    pub fn max_wavelength(&self) -> f64 {
        *self.wavelengths_nm.last().unwrap()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.wavelengths_nm
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Convention of an absorption spectrum.
    pub fn convention(&self) -> Result<Convention> {
        self.quantity
            .convention()
            .ok_or(Error::NotAbsorption(self.quantity.as_str()))
    }

    /// Same grid and quantity, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Spectrum::new(self.wavelengths_nm.clone(), values, self.quantity)
    }

    /// Lambert-Beer conversion of a transmission spectrum into an absorption
    /// coefficient in cm⁻¹, `-log(T) / d`.
    pub fn to_absorption(&self, meta: &SampleMeta, convention: Convention) -> Result<Spectrum> {
        let scale = match self.quantity {
            Quantity::TransmissionFraction => 1.0,
            Quantity::TransmissionPercent => 0.01,
            _ => return Err(Error::AlreadyAbsorption),
        };
        let thickness = meta.thickness_cm;
        let values = self
            .iter()
            .map(|(wl, v)| {
                if v <= 0.0 {
                    return Err(Error::NonPositiveTransmission {
                        wavelength_nm: wl,
                        value: v,
                    });
                }
                let t = v * scale;
                Ok(match convention {
                    Convention::Decadic => -t.log10() / thickness,
                    Convention::Natural => -t.ln() / thickness,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Spectrum::new(
            self.wavelengths_nm.clone(),
            values,
            Quantity::absorption(convention),
        )
    }

    /// Linear interpolation at a single wavelength inside the data range.
    pub fn value_at(&self, wavelength_nm: f64) -> Result<f64> {
        let wl = &self.wavelengths_nm;
        let (lo, hi) = (self.min_wavelength(), self.max_wavelength());
        if !(lo..=hi).contains(&wavelength_nm) {
            return Err(Error::GridOutOfRange {
                wavelength_nm,
                lo_nm: lo,
                hi_nm: hi,
            });
        }
        let idx = wl.partition_point(|&w| w < wavelength_nm);
        if wl[idx] == wavelength_nm {
            return Ok(self.values[idx]);
        }
        let (x0, x1) = (wl[idx - 1], wl[idx]);
        let (y0, y1) = (self.values[idx - 1], self.values[idx]);
        let t = (wavelength_nm - x0) / (x1 - x0);
        Ok(y0 + t * (y1 - y0))
    }

    /// Linearly interpolated copy on `target_grid`. Extrapolation is an error.
    pub fn resample(&self, target_grid: &[f64]) -> Result<Spectrum> {
        if target_grid.len() < 2 {
            return Err(Error::InvalidSpectrum(format!(
                "target grid needs at least 2 points, got {}",
                target_grid.len()
            )));
        }
        validate_grid(target_grid)?;
        let values = target_grid
            .iter()
            .map(|&wl| self.value_at(wl))
            .collect::<Result<Vec<_>>>()?;
        Spectrum::new(target_grid.to_vec(), values, self.quantity)
    }

    /// Points with `lo_nm <= λ <= hi_nm`.
    pub fn crop(&self, lo_nm: f64, hi_nm: f64) -> Result<Spectrum> {
        if !(lo_nm < hi_nm) {
            return Err(Error::InvalidSpectrum(format!(
                "crop range [{lo_nm}, {hi_nm}] is empty"
            )));
        }
        let (wavelengths, values): (Vec<f64>, Vec<f64>) = self
            .iter()
            .filter(|&(wl, _)| lo_nm <= wl && wl <= hi_nm)
            .unzip();
        if wavelengths.len() < 2 {
            return Err(Error::EmptyResult { lo_nm, hi_nm });
        }
        Spectrum::new(wavelengths, values, self.quantity)
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if let Some(bad) = grid.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidSpectrum(format!(
            "non-finite wavelength {bad}"
        )));
    }
    if let Some(pair) = grid.windows(2).find(|p| p[1] <= p[0]) {
        return Err(Error::InvalidSpectrum(format!(
            "wavelengths not strictly increasing at {} -> {} nm",
            pair[0], pair[1]
        )));
    }
    Ok(())
}

/// Default relative error of an EPR reference concentration.
pub const DEFAULT_EPR_REL_ERR: f64 = 0.06;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub thickness_cm: f64,
    pub epr_ppm: Option<f64>,
    pub epr_rel_err: Option<f64>,
}

impl SampleMeta {
    pub fn new(sample_id: impl Into<String>, thickness_cm: f64) -> Result<Self> {
        let meta = SampleMeta {
            sample_id: sample_id.into(),
            thickness_cm,
            epr_ppm: None,
            epr_rel_err: None,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn with_epr(mut self, ppm: f64, rel_err: Option<f64>) -> Result<Self> {
        self.epr_ppm = Some(ppm);
        self.epr_rel_err = rel_err;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness_cm > 0.0 && self.thickness_cm.is_finite()) {
            return Err(Error::InvalidMeta(format!(
                "thickness must be positive, got {} cm",
                self.thickness_cm
            )));
        }
        if let Some(ppm) = self.epr_ppm {
            if !(ppm > 0.0 && ppm.is_finite()) {
                return Err(Error::InvalidMeta(format!(
                    "EPR ppm must be positive, got {ppm}"
                )));
            }
        }
        if let Some(e) = self.epr_rel_err {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidMeta(format!(
                    "EPR relative error must be in (0, 1), got {e}"
                )));
            }
        }
        Ok(())
    }

    pub fn epr_rel_err_or_default(&self) -> f64 {
        self.epr_rel_err.unwrap_or(DEFAULT_EPR_REL_ERR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn meta(d: f64) -> SampleMeta {
        SampleMeta::new("s", d).unwrap()
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    #[test]
    fn full_transmission_is_zero_absorption() {
        let s = Spectrum::new(
            vec![200.0, 300.0, 400.0],
            vec![100.0; 3],
            Quantity::TransmissionPercent,
        )
        .unwrap();
        let a = s.to_absorption(&meta(0.03), Convention::Decadic).unwrap();
        assert!(a.values().iter().all(|&v| v == 0.0));
        assert_eq!(a.quantity(), Quantity::AbsorptionDecadic);
    }

    #[test]
    fn ten_percent_through_a_millimetre() {
        let s = Spectrum::new(
            vec![270.0, 271.0],
            vec![10.0, 100.0],
            Quantity::TransmissionPercent,
        )
        .unwrap();
        let dec = s.to_absorption(&meta(0.1), Convention::Decadic).unwrap();
        assert_relative_eq!(dec.values()[0], 10.0, max_relative = 1e-14);
        let nat = s.to_absorption(&meta(0.1), Convention::Natural).unwrap();
        assert_relative_eq!(nat.values()[0], 10.0 * LN_10, max_relative = 1e-14);
        assert_relative_eq!(nat.values()[0], 23.026, epsilon = 1e-3);
    }

    #[test]
    fn zero_transmission_is_rejected_with_location() {
        let s = Spectrum::new(
            vec![200.0, 210.0],
            vec![0.0, 0.5],
            Quantity::TransmissionFraction,
        )
        .unwrap();
        match s.to_absorption(&meta(0.03), Convention::Decadic) {
            Err(Error::NonPositiveTransmission {
                wavelength_nm,
                value,
            }) => {
                assert_eq!(wavelength_nm, 200.0);
                assert_eq!(value, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn absorption_input_is_rejected() {
        let s = Spectrum::new(
            vec![200.0, 210.0],
            vec![1.0, 2.0],
            Quantity::AbsorptionDecadic,
        )
        .unwrap();
        assert!(matches!(
            s.to_absorption(&meta(0.03), Convention::Decadic),
            Err(Error::AlreadyAbsorption)
        ));
    }

    #[test]
    fn construction_checks_invariants() {
        assert!(Spectrum::new(vec![1.0], vec![1.0], Quantity::AbsorptionDecadic).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![1.0], Quantity::AbsorptionDecadic).is_err());
        assert!(
            Spectrum::new(vec![2.0, 1.0], vec![1.0, 1.0], Quantity::AbsorptionDecadic).is_err()
        );
        assert!(
            Spectrum::new(vec![1.0, 1.0], vec![1.0, 1.0], Quantity::AbsorptionDecadic).is_err()
        );
        assert!(Spectrum::new(
            vec![1.0, 2.0],
            vec![1.0, 1.1],
            Quantity::TransmissionFraction
        )
        .is_err());
        assert!(Spectrum::new(
            vec![1.0, 2.0],
            vec![-1.0, 50.0],
            Quantity::TransmissionPercent
        )
        .is_err());
        assert!(Spectrum::new(
            vec![1.0, 2.0],
            vec![f64::NAN, 1.0],
            Quantity::AbsorptionNatural
        )
        .is_err());
        assert!(SampleMeta::new("x", 0.0).is_err());
        assert!(SampleMeta::new("x", 0.03)
            .unwrap()
            .with_epr(3.2, Some(1.5))
            .is_err());
    }

    #[test]
    fn resample_identity_midpoint_and_out_of_range() {
        let s = Spectrum::new(
            vec![200.0, 300.0, 400.0],
            vec![0.0, 10.0, 4.0],
            Quantity::AbsorptionDecadic,
        )
        .unwrap();
        assert_eq!(s.resample(s.wavelengths()).unwrap(), s);
        let mid = s.resample(&[250.0, 300.0]).unwrap();
        assert_eq!(mid.values()[0], 5.0);
        assert!(matches!(
            s.resample(&[150.0, 250.0]),
            Err(Error::GridOutOfRange { .. })
        ));
        assert!(s.resample(&[250.0, 450.0]).is_err());
    }

    #[test]
    fn crop_cases() {
        let wl = grid(200.0, 800.0, 1.0);
        let s =
            Spectrum::new(wl.clone(), vec![1.0; wl.len()], Quantity::AbsorptionDecadic).unwrap();
        let c = s.crop(200.0, 650.0).unwrap();
        assert_eq!(c.len(), 451);
        assert_eq!(c.max_wavelength(), 650.0);
        assert_eq!(s.crop(200.0, 800.0).unwrap(), s);
        assert!(matches!(
            s.crop(900.0, 1000.0),
            Err(Error::EmptyResult { .. })
        ));
        assert_eq!(s.len(), 601);
    }

    proptest! {
        #[test]
        fn transmission_round_trip(
            ts in proptest::collection::vec(1e-6f64..=1.0, 2..50),
            d in 1e-3f64..1.0,
        ) {
            let wl: Vec<f64> = (0..ts.len()).map(|i| 200.0 + i as f64).collect();
            let s = Spectrum::new(wl, ts.clone(), Quantity::TransmissionFraction).unwrap();
            let dec = s.to_absorption(&meta(d), Convention::Decadic).unwrap();
            let nat = s.to_absorption(&meta(d), Convention::Natural).unwrap();
            for ((&t, &a), &n) in ts.iter().zip(dec.values()).zip(nat.values()) {
                let back = 10f64.powf(-a * d);
                prop_assert!((back - t).abs() <= 1e-12 * t);
                if a != 0.0 {
                    prop_assert!((n - a * LN_10).abs() <= 1e-12 * n.abs());
                }
            }
        }

        #[test]
        fn resample_exact_on_affine_data(
            c0 in -10.0f64..10.0,
            c1 in -0.1f64..0.1,
            queries in proptest::collection::vec(200.0f64..800.0, 2..20),
        ) {
            let wl = grid(200.0, 800.0, 7.0);
            let vals = wl.iter().map(|w| c0 + c1 * w).collect();
            let s = Spectrum::new(wl, vals, Quantity::AbsorptionDecadic).unwrap();
            let mut q = queries;
            q.sort_by(f64::total_cmp);
            q.dedup();
            prop_assume!(q.len() >= 2);
            let r = s.resample(&q).unwrap();
            for (w, v) in r.iter() {
                let expect = c0 + c1 * w;
                prop_assert!((v - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }

        #[test]
        fn nested_crops_compose(a in 200.0f64..500.0, b in 500.0f64..800.0, da in 0.0f64..100.0, db in 0.0f64..100.0) {
            let wl = grid(200.0, 800.0, 1.0);
            let vals: Vec<f64> = wl.iter().map(|w| w.sin()).collect();
            let s = Spectrum::new(wl, vals, Quantity::AbsorptionDecadic).unwrap();
            let (ia, ib) = (a + da, b - db);
            prop_assume!(ib - ia > 2.0);
            let outer = s.crop(a, b).unwrap();
            prop_assert_eq!(outer.crop(ia, ib).unwrap(), s.crop(ia, ib).unwrap());
        }
    }
}
