//! Spectrum files, calibration tables, fit reports and plot data.
//!
//! Spectrum files are UTF-8 text: `#`-prefixed `key: value` header lines
//! followed by `wavelength_nm,value` rows in ascending wavelength order.
//!
//! ```text
//! # sample_id: Cas-40
//! # thickness: 300 um
//! # quantity: transmission_percent
//! # epr_ppm: 3.2
//! 200,0.51
//! 201,0.73
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::ConcentrationEstimate;
use crate::error::{Error, Result};
use crate::fitter::{BoundSide, BoundaryHit, FitResult, Termination};
use crate::model::{GridModel, ModelMode, ParamName, ReferenceOrigin, ReferenceSpectrum};
use crate::spectrum::{Convention, Quantity, SampleMeta, Spectrum};

pub const TOOL_NAME: &str = "nsfit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Parses `"300 um"`, `"0.3mm"`, `"0.03 cm"` into centimetres.
pub fn parse_thickness(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_alphabetic() || c == 'µ' || c == 'μ')
        .ok_or_else(|| format!("thickness {text:?} lacks a unit (um, mm or cm)"))?;
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("bad thickness number {:?}", number.trim()))?;
    let per_cm = match unit.trim() {
        "um" | "µm" | "μm" => 1e4,
        "mm" => 10.0,
        "cm" => 1.0,
        other => {
            return Err(format!(
                "unknown thickness unit {other:?} (expected um, mm or cm)"
            ))
        }
    };
    let cm = value / per_cm;
    if !(cm > 0.0 && cm.is_finite()) {
        return Err(format!("thickness must be positive, got {text:?}"));
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumHeader {
    pub sample_id: Option<String>,
    pub thickness_cm: Option<f64>,
    pub epr_ppm: Option<f64>,
    pub epr_rel_err: Option<f64>,
    /// Keys this tool does not interpret, preserved on rewrite.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFile {
    pub path: PathBuf,
    pub spectrum: Spectrum,
    pub header: SpectrumHeader,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

impl SpectrumFile {
    /// Sample id from the header, falling back to the file stem.
    pub fn sample_id(&self) -> String {
        self.header.sample_id.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    /// Sample metadata; the thickness is mandatory here.
    pub fn meta(&self) -> Result<SampleMeta> {
        let thickness = self
            .header
            .thickness_cm
            .ok_or_else(|| Error::MissingThickness {
                path: self.path.clone(),
            })?;
        let meta = SampleMeta {
            sample_id: self.sample_id(),
            thickness_cm: thickness,
            epr_ppm: self.header.epr_ppm,
            epr_rel_err: self.header.epr_rel_err,
        };
        meta.validate()?;
        Ok(meta)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn parse_spectrum_file(path: impl AsRef<Path>) -> Result<SpectrumFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let (spectrum, header) = parse_spectrum_str(text, path)?;
    Ok(SpectrumFile {
        path: path.to_path_buf(),
        spectrum,
        header,
        sha256: sha256_hex(&bytes),
    })
}

/// Parses file contents; `path` is only used in error messages.
pub fn parse_spectrum_str(text: &str, path: &Path) -> Result<(Spectrum, SpectrumHeader)> {
    let malformed = |line: usize, message: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        line,
        message,
    };
    let bad_numeric = |line: usize, text: &str| Error::BadNumeric {
        path: path.to_path_buf(),
        line,
        text: text.to_string(),
    };

    let mut header = SpectrumHeader::default();
    let mut quantity = None;
    let mut wavelengths = Vec::new();
    let mut values = Vec::new();
    let mut in_data = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if in_data {
                continue;
            }
            let rest = rest.trim();
            if rest.is_empty() {
                continue;
            }
            let (key, value) = rest.split_once(':').ok_or_else(|| {
                malformed(line_no, format!("expected 'key: value', got {rest:?}"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let number = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| malformed(line_no, format!("{key}: bad number {v:?}")))
            };
            match key {
                "sample_id" => header.sample_id = Some(value.to_string()),
                "thickness" => {
                    header.thickness_cm =
                        Some(parse_thickness(value).map_err(|m| malformed(line_no, m))?)
                }
                "quantity" => {
                    quantity = Some(
                        value
                            .parse::<Quantity>()
                            .map_err(|m| malformed(line_no, m))?,
                    )
                }
                "epr_ppm" => header.epr_ppm = Some(number(value)?),
                "epr_rel_err" => header.epr_rel_err = Some(number(value)?),
                _ => {
                    header.extra.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }

        let mut fields = line.split(',').map(str::trim);
        let (Some(wl_text), Some(v_text), None) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(bad_numeric(line_no, raw));
        };
        let parsed = (wl_text.parse::<f64>(), v_text.parse::<f64>());
        let (wl, v) = match parsed {
            (Ok(wl), Ok(v)) if wl.is_finite() && v.is_finite() => (wl, v),
            // a single column-name row is allowed before the data
            (Err(_), Err(_)) if !in_data && is_column_label(wl_text) && is_column_label(v_text) => {
                in_data = true;
                continue;
            }
            _ => return Err(bad_numeric(line_no, raw)),
        };
        in_data = true;
        if wavelengths.last().is_some_and(|&prev| wl <= prev) {
            return Err(Error::NonMonotonicWavelength {
                path: path.to_path_buf(),
                line: line_no,
            });
        }
        wavelengths.push(wl);
        values.push(v);
    }

    let quantity = quantity.ok_or_else(|| malformed(0, "missing 'quantity' key".into()))?;
    let spectrum = Spectrum::new(wavelengths, values, quantity).map_err(|e| match e {
        Error::InvalidSpectrum(m) => Error::InvalidSpectrum(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((spectrum, header))
}

fn is_column_label(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == ' ')
}

/// Serialises a spectrum file. Floats use the shortest representation that
/// parses back to the same bits.
pub fn format_spectrum(spectrum: &Spectrum, header: &SpectrumHeader) -> String {
    let mut out = String::new();
    if let Some(id) = &header.sample_id {
        writeln!(out, "# sample_id: {id}").unwrap();
    }
    if let Some(d) = header.thickness_cm {
        writeln!(out, "# thickness: {d:?} cm").unwrap();
    }
    writeln!(out, "# quantity: {}", spectrum.quantity()).unwrap();
    if let Some(ppm) = header.epr_ppm {
        writeln!(out, "# epr_ppm: {ppm:?}").unwrap();
    }
    if let Some(e) = header.epr_rel_err {
        writeln!(out, "# epr_rel_err: {e:?}").unwrap();
    }
    for (k, v) in &header.extra {
        writeln!(out, "# {k}: {v}").unwrap();
    }
    for (wl, v) in spectrum.iter() {
        writeln!(out, "{wl:?},{v:?}").unwrap();
    }
    out
}

pub fn write_spectrum_file(
    path: impl AsRef<Path>,
    spectrum: &Spectrum,
    header: &SpectrumHeader,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_spectrum(spectrum, header)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub sample_id: Option<String>,
    pub ppm: f64,
    pub mu270: f64,
}

/// Reads `ppm,mu270` or `sample_id,ppm,mu270` rows. `#` comments and a
/// leading column-name row are skipped.
pub fn parse_calibration_str(text: &str, path: &Path) -> Result<Vec<CalibrationPoint>> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::BadNumeric {
            path: path.to_path_buf(),
            line: idx + 1,
            text: raw.to_string(),
        };
        let (id, ppm_text, mu_text) = match fields[..] {
            [p, m] => (None, p, m),
            [id, p, m] => (Some(id), p, m),
            _ => return Err(bad()),
        };
        match (ppm_text.parse::<f64>(), mu_text.parse::<f64>()) {
            (Ok(ppm), Ok(mu270)) => points.push(CalibrationPoint {
                sample_id: id.map(str::to_string),
                ppm,
                mu270,
            }),
            (Err(_), Err(_)) if points.is_empty() => continue,
            _ => return Err(bad()),
        }
    }
    Ok(points)
}

pub fn parse_calibration_file(path: impl AsRef<Path>) -> Result<Vec<CalibrationPoint>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration_str(&text, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub name: ParamName,
    pub value: f64,
    /// `None` when unbounded.
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub at_bound: Option<BoundSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample_id: String,
    pub thickness_cm: Option<f64>,
    pub input_quantity: Quantity,
    pub epr_ppm: Option<f64>,
    pub epr_rel_err: Option<f64>,
}

/// Per-sample fit report. Field order is the serialisation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool: String,
    pub tool_version: String,
    pub input_file: Option<String>,
    pub input_sha256: Option<String>,
    pub sample: SampleReport,
    pub mode: ModelMode,
    pub window_nm: (f64, f64),
    pub reference_origin: ReferenceOrigin,
    pub convention: Convention,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub n_points: usize,
    pub rss: f64,
    pub rmse: f64,
    pub reliable: bool,
    pub parameters: Vec<ParameterReport>,
    pub boundary_hits: Vec<BoundaryHit>,
    pub mu270: f64,
    pub concentration: ConcentrationEstimate,
    /// `(ppm_uv_vis − ppm_epr) / ppm_epr` when an EPR value is known.
    pub epr_relative_difference: Option<f64>,
}

impl FitReport {
    pub fn new(
        sample: SampleReport,
        result: &FitResult,
        reference_origin: ReferenceOrigin,
        concentration: ConcentrationEstimate,
        input: Option<(&Path, &str)>,
    ) -> Self {
        let mode = result.params.mode();
        let parameters = mode
            .params()
            .iter()
            .map(|&name| {
                let (lo, hi) = result.bounds.get(name);
                ParameterReport {
                    name,
                    value: result.params.get(name).expect("parameter of this mode"),
                    lower_bound: lo.is_finite().then_some(lo),
                    upper_bound: hi.is_finite().then_some(hi),
                    at_bound: result.hit(name),
                }
            })
            .collect();
        let epr_relative_difference = sample.epr_ppm.map(|epr| (concentration.ppm - epr) / epr);
        FitReport {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            input_file: input.map(|(p, _)| p.display().to_string()),
            input_sha256: input.map(|(_, h)| h.to_string()),
            sample,
            mode,
            window_nm: result.window_nm,
            reference_origin,
            convention: result.convention,
            converged: result.converged,
            termination: result.termination,
            iterations: result.iterations,
            n_points: result.n_points,
            rss: result.rss,
            rmse: result.rmse,
            reliable: result.reliable,
            parameters,
            boundary_hits: result.boundary_hits.clone(),
            mu270: result.mu270,
            concentration,
            epr_relative_difference,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Data, fit and each component on the fit window.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub wavelength_nm: Vec<f64>,
    pub data: Vec<f64>,
    pub total_fit: Vec<f64>,
    pub g270: Vec<f64>,
    pub g360: Vec<f64>,
    pub g520: Vec<f64>,
    pub ramp: Vec<f64>,
    pub offset: Vec<f64>,
    pub residual: Vec<f64>,
}

pub const PLOT_COLUMNS: [&str; 9] = [
    "wavelength_nm",
    "data",
    "total_fit",
    "g270",
    "g360",
    "g520",
    "ramp",
    "offset",
    "residual",
];

impl PlotTable {
    pub fn new(spec: &Spectrum, result: &FitResult, reference: &ReferenceSpectrum) -> Result<Self> {
        let (lo, hi) = result.window_nm;
        let windowed = spec.crop(lo, hi)?;
        let model = GridModel::new(windowed.wavelengths(), reference, result.params.mode())?;
        let parts = model.components(&result.params);
        let total_fit = parts.total();
        let residual = windowed
            .values()
            .iter()
            .zip(&total_fit)
            .map(|(y, f)| y - f)
            .collect();
        Ok(PlotTable {
            wavelength_nm: windowed.wavelengths().to_vec(),
            data: windowed.values().to_vec(),
            total_fit,
            g270: parts.g270,
            g360: parts.g360,
            g520: parts.g520,
            ramp: parts.ramp,
            offset: parts.offset,
            residual,
        })
    }

    fn columns(&self) -> [&[f64]; 9] {
        [
            &self.wavelength_nm,
            &self.data,
            &self.total_fit,
            &self.g270,
            &self.g360,
            &self.g520,
            &self.ramp,
            &self.offset,
            &self.residual,
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = PLOT_COLUMNS.join(",");
        out.push('\n');
        let cols = self.columns();
        for i in 0..self.wavelength_nm.len() {
            let row: Vec<String> = cols.iter().map(|c| format!("{:?}", c[i])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Line chart of every series except the residual, which gets its own
    /// strip underneath.
    pub fn to_svg(&self, title: &str) -> String {
        const W: f64 = 800.0;
        const H: f64 = 560.0;
        const LEFT: f64 = 70.0;
        const RIGHT: f64 = 150.0;
        const TOP: f64 = 40.0;
        const MAIN_H: f64 = 360.0;
        const GAP: f64 = 30.0;
        const RESID_H: f64 = 80.0;

        let x_lo = self.wavelength_nm[0];
        let x_hi = *self.wavelength_nm.last().unwrap();
        let series: [(&str, &[f64], &str); 7] = [
            ("data", &self.data, "#000000"),
            ("total fit", &self.total_fit, "#1f77b4"),
            ("g270", &self.g270, "#d62728"),
            ("g360", &self.g360, "#2ca02c"),
            ("g520", &self.g520, "#9467bd"),
            ("ramp", &self.ramp, "#ff7f0e"),
            ("offset", &self.offset, "#7f7f7f"),
        ];
        let (y_lo, y_hi) = range_of(series.iter().flat_map(|s| s.1.iter().copied()));
        let (r_lo, r_hi) = range_of(self.residual.iter().copied());
        let plot_w = W - LEFT - RIGHT;
        let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;

        let mut svg = String::new();
        writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        )
        .unwrap();
        writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape_xml(title)
        )
        .unwrap();

        let panel = |svg: &mut String, top: f64, height: f64, lo: f64, hi: f64, label: &str| {
            let sy = |y: f64| top + height - (y - lo) / (hi - lo) * height;
            writeln!(
                svg,
                r#"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{height}" fill="none" stroke="black"/>"#
            )
            .unwrap();
            for t in nice_ticks(lo, hi, if height > 100.0 { 6 } else { 3 }) {
                let y = sy(t);
                writeln!(
                    svg,
                    r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                    LEFT - 4.0,
                    LEFT - 6.0,
                    y + 4.0,
                    fmt_tick(t)
                )
                .unwrap();
            }
            writeln!(
                svg,
                r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{label}</text>"#,
                top + height / 2.0,
                top + height / 2.0
            )
            .unwrap();
        };

        panel(&mut svg, TOP, MAIN_H, y_lo, y_hi, "absorption (cm⁻¹)");
        let sy_main = |y: f64| TOP + MAIN_H - (y - y_lo) / (y_hi - y_lo) * MAIN_H;
        for (i, (name, values, color)) in series.iter().enumerate() {
            writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="{}" points="{}"/>"#,
                if i == 0 { 1.5 } else { 1.0 },
                polyline_points(&self.wavelength_nm, values, &sx, &sy_main)
            )
            .unwrap();
            let ly = TOP + 10.0 + 18.0 * i as f64;
            writeln!(
                svg,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
                W - RIGHT + 12.0,
                W - RIGHT + 32.0,
                W - RIGHT + 38.0,
                ly + 4.0
            )
            .unwrap();
        }

        let resid_top = TOP + MAIN_H + GAP;
        panel(&mut svg, resid_top, RESID_H, r_lo, r_hi, "residual");
        let sy_resid = |y: f64| resid_top + RESID_H - (y - r_lo) / (r_hi - r_lo) * RESID_H;
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#,
            polyline_points(&self.wavelength_nm, &self.residual, &sx, &sy_resid)
        )
        .unwrap();

        let axis_y = resid_top + RESID_H;
        for t in nice_ticks(x_lo, x_hi, 7) {
            let x = sx(t);
            writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{axis_y}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                axis_y + 4.0,
                axis_y + 16.0,
                fmt_tick(t)
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">wavelength (nm)</text>"#,
            LEFT + plot_w / 2.0,
            axis_y + 34.0
        )
        .unwrap();
        svg.push_str("</svg>\n");
        svg
    }
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn polyline_points(
    xs: &[f64],
    ys: &[f64],
    sx: &impl Fn(f64) -> f64,
    sy: &impl Fn(f64) -> f64,
) -> String {
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        if !out.is_empty() {
            out.push(' ');
        }
        write!(out, "{:.2},{:.2}", sx(*x), sy(*y)).unwrap();
    }
    out
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// Writes `<prefix>.csv` and `<prefix>.svg`.
pub fn emit_plot_data(
    spec: &Spectrum,
    result: &FitResult,
    reference: &ReferenceSpectrum,
    path_prefix: impl AsRef<Path>,
    title: &str,
) -> Result<PlotFiles> {
    let table = PlotTable::new(spec, result, reference)?;
    let prefix = path_prefix.as_ref().as_os_str().to_owned();
    let with_ext = |ext: &str| {
        let mut p = prefix.clone();
        p.push(ext);
        PathBuf::from(p)
    };
    let files = PlotFiles {
        csv: with_ext(".csv"),
        svg: with_ext(".svg"),
    };
    fs::write(&files.csv, table.to_csv()).map_err(|e| Error::io(&files.csv, e))?;
    fs::write(&files.svg, table.to_svg(title)).map_err(|e| Error::io(&files.svg, e))?;
    Ok(files)
}
