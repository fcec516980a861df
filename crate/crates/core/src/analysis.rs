//! Concentration from the 270 nm band height, cross-section constants, the
//! EPR calibration regression and the detectable concentration range.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::spectrum::Convention;

/// Mass of a ¹²C atom, g.
pub const CARBON_ATOM_MASS_G: f64 = 1.99e-23;
/// Density of diamond, g/cm³.
pub const DIAMOND_DENSITY_G_CM3: f64 = 3.51;

/// Relative error of a fitted 270 nm band height when none is given.
pub const DEFAULT_MU270_REL_ERR: f64 = 0.01;

/// Smallest absorbance (`μ·d`, decadic) the spectrometer resolves. Chosen so a
/// 300 µm plate bottoms out at 0.01 ppm.
pub const DEFAULT_MIN_DETECTABLE_ABSORBANCE: f64 = 5.9e-4;
/// Largest absorbance (`μ·d`, decadic) still measurable before the signal
/// saturates.
pub const DEFAULT_MAX_MEASURABLE_ABSORBANCE: f64 = 2.3;

/// EPR concentration (ppm) and fitted 270 nm band height (decadic cm⁻¹) of the
/// six calibration samples.
pub const EPR_REFERENCE_SAMPLES: [(&str, f64, f64); 6] = [
    ("Cas-40", 3.2, 5.9),
    ("Cas-44", 9.5, 17.7),
    ("Cas-48", 5.2, 10.9),
    ("Cas-50", 19.3, 37.2),
    ("Cas-51", 11.2, 24.7),
    ("Cas-68", 7.8, 13.9),
];

/// Absorption cross-section of the 270 nm band, cm⁻¹·ppm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub value: f64,
    /// Half-width of the 95% confidence interval.
    pub uncertainty: f64,
    pub convention: Convention,
}

impl CrossSection {
    pub const DECADIC: CrossSection = CrossSection {
        value: 1.96,
        uncertainty: 0.15,
        convention: Convention::Decadic,
    };
    pub const NATURAL: CrossSection = CrossSection {
        value: 4.51,
        uncertainty: 0.35,
        convention: Convention::Natural,
    };

    /// The calibrated constant for `convention`.
    pub fn builtin(convention: Convention) -> Self {
        match convention {
            Convention::Decadic => Self::DECADIC,
            Convention::Natural => Self::NATURAL,
        }
    }

    pub fn new(value: f64, uncertainty: f64, convention: Convention) -> Result<Self> {
        let cs = CrossSection {
            value,
            uncertainty,
            convention,
        };
        cs.validate()?;
        Ok(cs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value > 0.0 && self.value.is_finite()) || !(self.uncertainty >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "invalid cross-section {self:?}"
            )));
        }
        Ok(())
    }

    pub fn rel_uncertainty(&self) -> f64 {
        self.uncertainty / self.value
    }
}

/// Cross-section in cm², `σ · 10⁶ · m_C / ρ_diamond`.
pub fn cross_section_cm2(cs: &CrossSection) -> f64 {
    cs.value * 1e6 * CARBON_ATOM_MASS_G / DIAMOND_DENSITY_G_CM3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEstimate {
    pub ppm: f64,
    pub ppm_uncertainty: f64,
    /// cm⁻¹, in `cross_section_used.convention`.
    pub mu270: f64,
    pub mu270_rel_err: f64,
    pub cross_section_used: CrossSection,
}

impl ConcentrationEstimate {
    pub fn rel_uncertainty(&self) -> f64 {
        if self.ppm > 0.0 {
            self.ppm_uncertainty / self.ppm
        } else {
            (self.mu270_rel_err.powi(2) + self.cross_section_used.rel_uncertainty().powi(2)).sqrt()
        }
    }
}

/// `[N] = μ₂₇₀ / σ`, with independent relative errors added in quadrature.
///
/// `convention` is the convention `mu270` was computed in and must match the
/// cross-section's.
pub fn concentration(
    mu270: f64,
    convention: Convention,
    mu270_rel_err: f64,
    cs: &CrossSection,
) -> Result<ConcentrationEstimate> {
    cs.validate()?;
    if convention != cs.convention {
        return Err(Error::ConventionMismatch {
            left: convention,
            right: cs.convention,
        });
    }
    if !(mu270 >= 0.0 && mu270.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "mu270 must be >= 0, got {mu270}"
        )));
    }
    if !(mu270_rel_err >= 0.0 && mu270_rel_err.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "mu270 relative error must be >= 0, got {mu270_rel_err}"
        )));
    }
    let ppm = mu270 / cs.value;
    let rel = (mu270_rel_err.powi(2) + cs.rel_uncertainty().powi(2)).sqrt();
    Ok(ConcentrationEstimate {
        ppm,
        ppm_uncertainty: ppm * rel,
        mu270,
        mu270_rel_err,
        cross_section_used: *cs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionModel {
    ThroughOrigin,
    WithIntercept,
}

impl RegressionModel {
    fn n_coefficients(self) -> usize {
        match self {
            RegressionModel::ThroughOrigin => 1,
            RegressionModel::WithIntercept => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: RegressionModel,
    /// cm⁻¹·ppm⁻¹.
    pub slope: f64,
    /// `None` when there are no residual degrees of freedom.
    pub slope_ci95_half_width: Option<f64>,
    /// cm⁻¹, only for [`RegressionModel::WithIntercept`].
    pub intercept: Option<f64>,
    pub intercept_ci95_half_width: Option<f64>,
    pub n_points: usize,
    pub degrees_of_freedom: usize,
    /// `μ₂₇₀ − fitted`, in input order.
    pub residuals: Vec<f64>,
}

impl CalibrationResult {
    /// Slope as a cross-section; an undefined CI becomes infinite uncertainty.
    pub fn to_cross_section(&self, convention: Convention) -> CrossSection {
        CrossSection {
            value: self.slope,
            uncertainty: self.slope_ci95_half_width.unwrap_or(f64::INFINITY),
            convention,
        }
    }
}

/// Two-sided 95% Student-t quantile.
pub fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Linear regression of `μ₂₇₀` (y) on EPR ppm (x).
pub fn calibrate(pairs: &[(f64, f64)], model: RegressionModel) -> Result<CalibrationResult> {
    let n = pairs.len();
    let needed = model.n_coefficients();
    if n < needed {
        return Err(Error::InsufficientPoints { needed, got: n });
    }
    for &(x, y) in pairs {
        if !(x > 0.0 && x.is_finite()) || !y.is_finite() {
            return Err(Error::InvalidCalibrationData(format!(
                "ppm must be positive and mu270 finite, got ({x}, {y})"
            )));
        }
    }
    let dof = n - needed;
    let tq = (dof > 0).then(|| t_quantile_975(dof));

    match model {
        RegressionModel::ThroughOrigin => {
            let sxx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
            if sxx == 0.0 {
                return Err(Error::DegenerateX);
            }
            let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
            let slope = sxy / sxx;
            let residuals: Vec<f64> = pairs.iter().map(|(x, y)| y - slope * x).collect();
            let half = tq.map(|t| {
                let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof as f64;
                t * (s2 / sxx).sqrt()
            });
            Ok(CalibrationResult {
                model,
                slope,
                slope_ci95_half_width: half,
                intercept: None,
                intercept_ci95_half_width: None,
                n_points: n,
                degrees_of_freedom: dof,
                residuals,
            })
        }
        RegressionModel::WithIntercept => {
            let nf = n as f64;
            let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
            let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
            let sxx: f64 = pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
            if sxx == 0.0 {
                return Err(Error::DegenerateX);
            }
            let sxy: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let slope = sxy / sxx;
            let intercept = my - slope * mx;
            let residuals: Vec<f64> = pairs
                .iter()
                .map(|(x, y)| y - intercept - slope * x)
                .collect();
            let s2 = tq.map(|_| residuals.iter().map(|r| r * r).sum::<f64>() / dof as f64);
            Ok(CalibrationResult {
                model,
                slope,
                slope_ci95_half_width: tq.zip(s2).map(|(t, s2)| t * (s2 / sxx).sqrt()),
                intercept: Some(intercept),
                intercept_ci95_half_width: tq
                    .zip(s2)
                    .map(|(t, s2)| t * (s2 * (1.0 / nf + mx * mx / sxx)).sqrt()),
                n_points: n,
                degrees_of_freedom: dof,
                residuals,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectableRange {
    pub ppm_min: f64,
    pub ppm_max: f64,
}

/// Concentrations whose 270 nm band absorbance `σ·[N]·d` falls between the
/// instrument's smallest detectable and largest measurable absorbance. Both
/// limits are in the cross-section's convention.
pub fn detectable_range(
    thickness_cm: f64,
    min_detectable_absorbance: f64,
    max_measurable_absorbance: f64,
    cs: &CrossSection,
) -> Result<DetectableRange> {
    cs.validate()?;
    if !(thickness_cm > 0.0 && thickness_cm.is_finite()) {
        return Err(Error::InvalidLimits(format!(
            "thickness must be positive, got {thickness_cm} cm"
        )));
    }
    if !(min_detectable_absorbance > 0.0 && min_detectable_absorbance < max_measurable_absorbance)
        || !max_measurable_absorbance.is_finite()
    {
        return Err(Error::InvalidLimits(format!(
            "need 0 < min ({min_detectable_absorbance}) < max ({max_measurable_absorbance})"
        )));
    }
    let per_ppm = thickness_cm * cs.value;
    Ok(DetectableRange {
        ppm_min: min_detectable_absorbance / per_ppm,
        ppm_max: max_measurable_absorbance / per_ppm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn epr_pairs() -> Vec<(f64, f64)> {
        EPR_REFERENCE_SAMPLES
            .iter()
            .map(|&(_, x, y)| (x, y))
            .collect()
    }

    #[test]
    fn cas40_concentration() {
        let c = concentration(5.9, Convention::Decadic, 0.01, &CrossSection::DECADIC).unwrap();
        assert_relative_eq!(c.ppm, 5.9 / 1.96, max_relative = 1e-15);
        assert!((c.ppm - 3.01).abs() < 0.005);
        let rel = (0.01f64.powi(2) + (0.15f64 / 1.96).powi(2)).sqrt();
        assert_relative_eq!(c.ppm_uncertainty, c.ppm * rel, max_relative = 1e-15);
    }

    #[test]
    fn unit_height_gives_one_ppm() {
        let c = concentration(1.96, Convention::Decadic, 0.0, &CrossSection::DECADIC).unwrap();
        assert_eq!(c.ppm, 1.0);
        let c = concentration(4.51, Convention::Natural, 0.0, &CrossSection::NATURAL).unwrap();
        assert_eq!(c.ppm, 1.0);
    }

    #[test]
    fn mismatched_convention() {
        assert!(matches!(
            concentration(4.51, Convention::Natural, 0.01, &CrossSection::DECADIC),
            Err(Error::ConventionMismatch { .. })
        ));
        assert!(concentration(-1.0, Convention::Decadic, 0.01, &CrossSection::DECADIC).is_err());
    }

    #[test]
    fn cm2_conversion() {
        let v = cross_section_cm2(&CrossSection::DECADIC);
        assert!((v - 1.11e-17).abs() / 1.11e-17 < 0.01);
        let zero = CrossSection {
            value: 0.0,
            ..CrossSection::DECADIC
        };
        assert_eq!(cross_section_cm2(&zero), 0.0);
        let double = CrossSection {
            value: 3.92,
            ..CrossSection::DECADIC
        };
        assert_relative_eq!(cross_section_cm2(&double), 2.0 * v, max_relative = 1e-15);
        assert!((cross_section_cm2(&double) - 2.22e-17).abs() / 2.22e-17 < 0.01);
    }

    #[test]
    fn student_t_table() {
        // two-sided 95% values from a printed t-table
        for (dof, t) in [
            (1, 12.706),
            (2, 4.303),
            (4, 2.776),
            (5, 2.571),
            (10, 2.228),
            (30, 2.042),
        ] {
            assert!((t_quantile_975(dof) - t).abs() < 1e-3, "dof {dof}");
        }
    }

    #[test]
    fn single_pair_has_no_ci() {
        let r = calibrate(&[(1.0, 2.0)], RegressionModel::ThroughOrigin).unwrap();
        assert_eq!(r.slope, 2.0);
        assert_eq!(r.slope_ci95_half_width, None);
        assert_eq!(r.degrees_of_freedom, 0);
        assert!(r
            .to_cross_section(Convention::Decadic)
            .uncertainty
            .is_infinite());
    }

    #[test]
    fn collinear_points_have_zero_ci() {
        let r = calibrate(
            &[(1.0, 2.5), (2.0, 5.0), (4.0, 10.0)],
            RegressionModel::ThroughOrigin,
        )
        .unwrap();
        assert_eq!(r.slope, 2.5);
        assert_eq!(r.slope_ci95_half_width, Some(0.0));
    }

    #[test]
    fn degenerate_and_insufficient() {
        assert!(matches!(
            calibrate(&[], RegressionModel::ThroughOrigin),
            Err(Error::InsufficientPoints { needed: 1, got: 0 })
        ));
        assert!(matches!(
            calibrate(&[(1.0, 2.0)], RegressionModel::WithIntercept),
            Err(Error::InsufficientPoints { needed: 2, got: 1 })
        ));
        assert!(matches!(
            calibrate(
                &[(2.0, 1.0), (2.0, 3.0), (2.0, 2.0)],
                RegressionModel::WithIntercept
            ),
            Err(Error::DegenerateX)
        ));
        assert!(calibrate(&[(0.0, 1.0), (1.0, 2.0)], RegressionModel::ThroughOrigin).is_err());
    }

    #[test]
    fn epr_samples_through_origin_matches_closed_form() {
        let pairs = epr_pairs();
        // hand-summed: Σxy = 1346.73, Σx² = 686.3
        let r = calibrate(&pairs, RegressionModel::ThroughOrigin).unwrap();
        assert_relative_eq!(r.slope, 1346.73 / 686.3, max_relative = 1e-12);
        assert!((r.slope - 1.96).abs() <= 0.02);
        assert_eq!(r.degrees_of_freedom, 5);
        assert_eq!(r.residuals.len(), 6);
    }

    #[test]
    fn epr_samples_with_intercept_is_close() {
        let r = calibrate(&epr_pairs(), RegressionModel::WithIntercept).unwrap();
        assert!((r.slope - 1.96).abs() < 0.1, "{}", r.slope);
        assert_eq!(r.degrees_of_freedom, 4);
        assert!(r.intercept.is_some() && r.intercept_ci95_half_width.is_some());
    }

    #[test]
    fn epr_samples_per_sample_within_15_percent() {
        for (id, ppm, mu) in EPR_REFERENCE_SAMPLES {
            let c = concentration(
                mu,
                Convention::Decadic,
                DEFAULT_MU270_REL_ERR,
                &CrossSection::DECADIC,
            )
            .unwrap();
            assert!((c.ppm - ppm).abs() / ppm <= 0.15, "{id}");
        }
    }

    #[test]
    fn detectable_range_defaults() {
        let r = detectable_range(
            0.03,
            DEFAULT_MIN_DETECTABLE_ABSORBANCE,
            DEFAULT_MAX_MEASURABLE_ABSORBANCE,
            &CrossSection::DECADIC,
        )
        .unwrap();
        assert!((r.ppm_min - 0.0100).abs() < 5e-5, "{}", r.ppm_min);
        assert!((r.ppm_max - 39.1).abs() < 0.05, "{}", r.ppm_max);
        let thick = detectable_range(0.06, 5.9e-4, 2.3, &CrossSection::DECADIC).unwrap();
        assert_relative_eq!(thick.ppm_min, r.ppm_min / 2.0, max_relative = 1e-15);
        assert_relative_eq!(thick.ppm_max, r.ppm_max / 2.0, max_relative = 1e-15);
        assert!(matches!(
            detectable_range(0.03, 2.3, 2.3, &CrossSection::DECADIC),
            Err(Error::InvalidLimits(_))
        ));
        assert!(detectable_range(0.03, 2.3, 5.9e-4, &CrossSection::DECADIC).is_err());
    }
}
