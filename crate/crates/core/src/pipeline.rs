//! File-to-report composition shared by the `fit` and `batch` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{concentration, CrossSection, DEFAULT_MU270_REL_ERR};
use crate::error::{Error, Result};
use crate::fitter::{fit, FitConfig, FitResult};
use crate::io::{parse_spectrum_file, FitReport, SampleReport, SpectrumFile};
use crate::model::{BuiltinRefParams, ReferenceSpectrum};
use crate::spectrum::{Convention, Spectrum};

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    Builtin(BuiltinRefParams),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub fit: FitConfig,
    pub reference: ReferenceSource,
    /// Convention for converting transmission input. For absorption input it
    /// must agree with the file, if given.
    pub convention: Option<Convention>,
    pub mu270_rel_err: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            fit: FitConfig::default(),
            reference: ReferenceSource::Builtin(BuiltinRefParams::default()),
            convention: None,
            mu270_rel_err: DEFAULT_MU270_REL_ERR,
        }
    }
}

/// The spectrum of `file` as absorption in the resolved convention.
pub fn absorption_of(file: &SpectrumFile, convention: Option<Convention>) -> Result<Spectrum> {
    let spectrum = &file.spectrum;
    match spectrum.quantity().convention() {
        Some(own) => match convention {
            Some(c) if c != own => Err(Error::ConventionMismatch {
                left: own,
                right: c,
            }),
            _ => Ok(spectrum.clone()),
        },
        None => spectrum.to_absorption(&file.meta()?, convention.unwrap_or(Convention::Decadic)),
    }
}

/// Loads or builds the reference. A built-in reference is sampled on `grid`.
pub fn load_reference(
    source: &ReferenceSource,
    grid: &[f64],
    convention: Convention,
) -> Result<ReferenceSpectrum> {
    match source {
        ReferenceSource::Builtin(params) => ReferenceSpectrum::builtin(params, grid, convention),
        ReferenceSource::File(path) => {
            let file = parse_spectrum_file(path)?;
            let absorption = absorption_of(&file, Some(convention))?;
            ReferenceSpectrum::from_spectrum(absorption)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub file: SpectrumFile,
    pub absorption: Spectrum,
    pub reference: ReferenceSpectrum,
    pub result: FitResult,
    pub report: FitReport,
}

pub fn analyze_file(path: &Path, options: &AnalysisOptions) -> Result<Analysis> {
    let file = parse_spectrum_file(path)?;
    analyze(file, options)
}

pub fn analyze(file: SpectrumFile, options: &AnalysisOptions) -> Result<Analysis> {
    let absorption = absorption_of(&file, options.convention)?;
    let convention = absorption.convention()?;
    let reference = load_reference(&options.reference, absorption.wavelengths(), convention)?;
    let result = fit(&absorption, &reference, &options.fit, None)?;
    let conc = concentration(
        result.mu270,
        convention,
        options.mu270_rel_err,
        &CrossSection::builtin(convention),
    )?;
    let sample = SampleReport {
        sample_id: file.sample_id(),
        thickness_cm: file.header.thickness_cm,
        input_quantity: file.spectrum.quantity(),
        epr_ppm: file.header.epr_ppm,
        epr_rel_err: file.header.epr_rel_err,
    };
    let report = FitReport::new(
        sample,
        &result,
        reference.origin(),
        conc,
        Some((file.path.as_path(), file.sha256.as_str())),
    );
    Ok(Analysis {
        file,
        absorption,
        reference,
        result,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sample_id: String,
    /// File name without directory.
    pub file: String,
    pub outcome: std::result::Result<SummaryFit, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryFit {
    pub reliable: bool,
    pub mu270: f64,
    pub ppm: f64,
    pub ppm_uncertainty: f64,
    pub rmse: f64,
    pub boundary_hits: Vec<String>,
}

impl SummaryRow {
    pub fn from_report(file: &str, report: &FitReport) -> Self {
        SummaryRow {
            sample_id: report.sample.sample_id.clone(),
            file: file.to_string(),
            outcome: Ok(SummaryFit {
                reliable: report.reliable,
                mu270: report.mu270,
                ppm: report.concentration.ppm,
                ppm_uncertainty: report.concentration.ppm_uncertainty,
                rmse: report.rmse,
                boundary_hits: report
                    .boundary_hits
                    .iter()
                    .map(|h| format!("{}:{}", h.param, h.side.as_str()))
                    .collect(),
            }),
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Fits every file in parallel. `per_file` runs after each successful
/// analysis (for writing reports) and may itself fail. Rows come back sorted
/// by sample id, then file name.
pub fn run_batch<F>(paths: &[PathBuf], options: &AnalysisOptions, per_file: F) -> Vec<SummaryRow>
where
    F: Fn(&Analysis) -> Result<()> + Sync,
{
    let mut rows: Vec<SummaryRow> = paths
        .par_iter()
        .map(|path| {
            let name = file_name(path);
            let fallback_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            match analyze_file(path, options).and_then(|a| per_file(&a).map(|_| a)) {
                Ok(a) => SummaryRow::from_report(&name, &a.report),
                Err(e) => SummaryRow {
                    sample_id: fallback_id,
                    file: name,
                    outcome: Err(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| (&a.sample_id, &a.file).cmp(&(&b.sample_id, &b.file)));
    rows
}

pub const SUMMARY_COLUMNS: &str =
    "sample_id,file,status,reliable,mu270,ppm,ppm_uncertainty,rmse,boundary_hits,error";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_COLUMNS);
    out.push('\n');
    for row in rows {
        let id = csv_field(&row.sample_id);
        let file = csv_field(&row.file);
        match &row.outcome {
            Ok(f) => writeln!(
                out,
                "{id},{file},ok,{},{:?},{:?},{:?},{:?},{},",
                f.reliable,
                f.mu270,
                f.ppm,
                f.ppm_uncertainty,
                f.rmse,
                f.boundary_hits.join(";")
            ),
            Err(msg) => writeln!(out, "{id},{file},error,,,,,,,{}", csv_field(msg)),
        }
        .unwrap();
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
    }

    #[test]
    fn error_rows_keep_column_count() {
        let rows = vec![SummaryRow {
            sample_id: "s".into(),
            file: "s.csv".into(),
            outcome: Err("bad".into()),
        }];
        let csv = summary_csv(&rows);
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), SUMMARY_COLUMNS.split(',').count());
    }
}
