//! The `nsfit` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 unreliable fit under
//! `--strict`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    calibrate, concentration, detectable_range, CrossSection, RegressionModel,
    DEFAULT_MAX_MEASURABLE_ABSORBANCE, DEFAULT_MIN_DETECTABLE_ABSORBANCE, DEFAULT_MU270_REL_ERR,
};
use crate::error::{Error, Result};
use crate::fitter::{FitConfig, FitResult};
use crate::io::{
    emit_plot_data, parse_calibration_file, parse_spectrum_file, parse_thickness,
    write_spectrum_file, SpectrumHeader,
};
use crate::model::{BuiltinRefParams, GaussianBand, ModelParams, ReferenceSpectrum};
use crate::pipeline::{
    analyze_file, run_batch, summary_csv, Analysis, AnalysisOptions, ReferenceSource,
};
use crate::spectrum::Convention;
use crate::synth::{
    default_grid, generate_absorption, generate_transmission, uniform_grid, SynthSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_UNRELIABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "nsfit",
    version,
    about = "N_s⁰ concentration in diamond from UV-Vis spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a transmission spectrum to an absorption coefficient spectrum.
    Convert {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "decadic")]
        convention: Convention,
    },
    /// Fit one spectrum and report μ₂₇₀ and the concentration.
    Fit {
        input: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write `<PREFIX>.csv` and `<PREFIX>.svg` with every fitted component.
        #[arg(long, value_name = "PREFIX")]
        plot: Option<PathBuf>,
        /// Exit with code 3 when the fit is unreliable.
        #[arg(long)]
        strict: bool,
    },
    /// Concentration from a known μ₂₇₀.
    Conc {
        #[arg(long)]
        mu270: f64,
        #[arg(long)]
        convention: Convention,
        #[arg(long, default_value_t = DEFAULT_MU270_REL_ERR)]
        mu270_rel_err: f64,
        #[arg(long)]
        json: bool,
    },
    /// Cross-section from (ppm, μ₂₇₀) pairs.
    Calibrate {
        input: PathBuf,
        #[arg(long, conflicts_with = "with_intercept")]
        through_origin: bool,
        #[arg(long)]
        with_intercept: bool,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic spectrum fixture.
    Synth(Box<SynthArgs>),
    /// Concentrations measurable in a plate of the given thickness.
    Range {
        /// Plate thickness with unit, e.g. `300um`.
        #[arg(long, value_parser = thickness_arg)]
        thickness: f64,
        /// Smallest detectable decadic absorbance.
        #[arg(long, default_value_t = DEFAULT_MIN_DETECTABLE_ABSORBANCE)]
        a_noise: f64,
        /// Largest measurable decadic absorbance.
        #[arg(long, default_value_t = DEFAULT_MAX_MEASURABLE_ABSORBANCE)]
        a_max: f64,
        #[arg(long, default_value = "decadic")]
        convention: Convention,
        #[arg(long)]
        json: bool,
    },
    /// Fit every spectrum file in a directory.
    Batch {
        dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        /// Also write plot data for every sample.
        #[arg(long)]
        plot: bool,
    },
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Reference spectrum file (absorption, or transmission with thickness).
    #[arg(long, conflicts_with = "builtin_ref")]
    reference: Option<PathBuf>,
    /// Use the built-in parametric reference (the default).
    #[arg(long)]
    builtin_ref: bool,
    /// Built-in reference as `edge_nm,edge_width_nm,height,floor`.
    #[arg(long, value_name = "PARAMS", conflicts_with = "reference")]
    ref_params: Option<String>,
    #[arg(long)]
    four_component: bool,
    /// Limit the fit to at most 650 nm.
    #[arg(long)]
    cutoff_650: bool,
    /// Fit window as `lo:hi` in nm.
    #[arg(long, value_parser = window_arg)]
    window: Option<(f64, f64)>,
    /// Convention for transmission input.
    #[arg(long)]
    convention: Option<Convention>,
    #[arg(long, default_value_t = DEFAULT_MU270_REL_ERR)]
    mu270_rel_err: f64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(short, long)]
    output: PathBuf,
    /// JSON file with any of the fields of the synth config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a270: Option<f64>,
    #[arg(long)]
    b270: Option<f64>,
    #[arg(long)]
    c270: Option<f64>,
    #[arg(long)]
    a360: Option<f64>,
    #[arg(long)]
    b360: Option<f64>,
    #[arg(long)]
    c360: Option<f64>,
    #[arg(long)]
    a520: Option<f64>,
    #[arg(long)]
    b520: Option<f64>,
    #[arg(long)]
    c520: Option<f64>,
    #[arg(long)]
    ramp: Option<f64>,
    #[arg(long)]
    ref_weight: Option<f64>,
    #[arg(long)]
    four_component: bool,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid as `lo:hi:step` in nm.
    #[arg(long, value_parser = grid_arg)]
    grid: Option<(f64, f64, f64)>,
    /// Extra band as `amplitude,center_nm,width_nm`; repeatable.
    #[arg(long = "contaminant", value_parser = band_arg)]
    contaminants: Vec<GaussianBand>,
    /// Built-in reference as `edge_nm,edge_width_nm,height,floor`.
    #[arg(long, value_name = "PARAMS")]
    ref_params: Option<String>,
    #[arg(long)]
    convention: Option<Convention>,
    /// Write transmission (fraction) instead of absorption; needs --thickness.
    #[arg(long, requires = "thickness")]
    transmission: bool,
    #[arg(long, value_parser = thickness_arg)]
    thickness: Option<f64>,
    #[arg(long)]
    sample_id: Option<String>,
    #[arg(long)]
    epr_ppm: Option<f64>,
}

/// Contents of `synth --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub truth: ModelParams,
    pub noise_sigma: f64,
    pub seed: u64,
    /// `(lo, hi, step)` in nm.
    pub grid: Option<(f64, f64, f64)>,
    pub contaminants: Vec<GaussianBand>,
    pub reference: Option<BuiltinRefParams>,
    pub convention: Convention,
    pub transmission: bool,
    pub thickness_cm: Option<f64>,
    pub sample_id: Option<String>,
    pub epr_ppm: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            truth: nominal_truth(),
            noise_sigma: 0.0,
            seed: 0,
            grid: None,
            contaminants: Vec::new(),
            reference: None,
            convention: Convention::Decadic,
            transmission: false,
            thickness_cm: None,
            sample_id: None,
            epr_ppm: None,
        }
    }
}

/// Parameters typical of a few-ppm sample.
pub fn nominal_truth() -> ModelParams {
    ModelParams {
        g270: GaussianBand {
            amplitude: 5.9,
            center_nm: 270.0,
            width_nm: 20.0,
        },
        g360: GaussianBand {
            amplitude: 1.5,
            center_nm: 362.0,
            width_nm: 45.0,
        },
        g520: Some(GaussianBand {
            amplitude: 0.7,
            center_nm: 515.0,
            width_nm: 50.0,
        }),
        ramp: 4e6,
        ref_weight: 1.0,
    }
}

fn thickness_arg(s: &str) -> std::result::Result<f64, String> {
    parse_thickness(s)
}

fn numbers<const N: usize>(
    s: &str,
    sep: char,
    what: &str,
) -> std::result::Result<[f64; N], String> {
    let parts: Vec<f64> = s
        .split(sep)
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{what}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("{what}: expected {N} values separated by '{sep}'"))
}

fn window_arg(s: &str) -> std::result::Result<(f64, f64), String> {
    let [lo, hi] = numbers::<2>(s, ':', "window")?;
    if !(lo < hi) {
        return Err(format!("window: need lo < hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn grid_arg(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let [lo, hi, step] = numbers::<3>(s, ':', "grid")?;
    Ok((lo, hi, step))
}

fn band_arg(s: &str) -> std::result::Result<GaussianBand, String> {
    let [a, b, c] = numbers::<3>(s, ',', "band")?;
    GaussianBand::new(a, b, c).map_err(|e| e.to_string())
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code. Output goes to stdout, diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Convert {
            input,
            output,
            convention,
        } => {
            let file = parse_spectrum_file(&input)?;
            let absorption = file.spectrum.to_absorption(&file.meta()?, convention)?;
            write_spectrum_file(&output, &absorption, &file.header)?;
            Ok(EXIT_OK)
        }
        Command::Fit {
            input,
            fit,
            report,
            plot,
            strict,
        } => {
            let options = fit.options()?;
            let analysis = analyze_file(&input, &options)?;
            let json = analysis.report.to_json()?;
            match &report {
                Some(path) => {
                    write(path, &json)?;
                    println!("{}", one_line(&analysis));
                }
                None => print!("{json}"),
            }
            if let Some(prefix) = plot {
                write_plot(&analysis, &prefix)?;
            }
            if !analysis.result.reliable {
                eprintln!("warning: {}", unreliable_reason(&analysis.result));
                if strict {
                    return Ok(EXIT_UNRELIABLE);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Conc {
            mu270,
            convention,
            mu270_rel_err,
            json,
        } => {
            let c = concentration(
                mu270,
                convention,
                mu270_rel_err,
                &CrossSection::builtin(convention),
            )?;
            if json {
                println!("{}", serde_json::to_string_pretty(&c)?);
            } else {
                println!(
                    "{:.3} ± {:.3} ppm (μ270 = {} cm⁻¹ {}, σ = {} ± {} cm⁻¹/ppm)",
                    c.ppm,
                    c.ppm_uncertainty,
                    mu270,
                    convention,
                    c.cross_section_used.value,
                    c.cross_section_used.uncertainty
                );
            }
            Ok(EXIT_OK)
        }
        Command::Calibrate {
            input,
            through_origin: _,
            with_intercept,
            json,
        } => {
            let model = if with_intercept {
                RegressionModel::WithIntercept
            } else {
                RegressionModel::ThroughOrigin
            };
            let pairs: Vec<(f64, f64)> = parse_calibration_file(&input)?
                .iter()
                .map(|p| (p.ppm, p.mu270))
                .collect();
            let cal = calibrate(&pairs, model)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&cal)?);
            } else {
                let ci =
                    |h: Option<f64>| h.map_or_else(|| "n/a".to_string(), |h| format!("{h:.4}"));
                println!(
                    "slope = {:.4} ± {} cm⁻¹/ppm (95% CI, n = {}, dof = {})",
                    cal.slope,
                    ci(cal.slope_ci95_half_width),
                    cal.n_points,
                    cal.degrees_of_freedom
                );
                if let Some(b) = cal.intercept {
                    println!(
                        "intercept = {b:.4} ± {} cm⁻¹",
                        ci(cal.intercept_ci95_half_width)
                    );
                }
            }
            Ok(EXIT_OK)
        }
        Command::Synth(args) => synth(*args),
        Command::Range {
            thickness,
            a_noise,
            a_max,
            convention,
            json,
        } => {
            let k = convention.from_decadic();
            let r = detectable_range(
                thickness,
                a_noise * k,
                a_max * k,
                &CrossSection::builtin(convention),
            )?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!(
                    "{:.4} to {:.1} ppm (thickness {} cm, {convention})",
                    r.ppm_min, r.ppm_max, thickness
                );
            }
            Ok(EXIT_OK)
        }
        Command::Batch {
            dir,
            out_dir,
            fit,
            plot,
        } => batch(&dir, &out_dir, &fit, plot),
    }
}

impl FitArgs {
    fn options(&self) -> Result<AnalysisOptions> {
        let mut config = if self.four_component {
            FitConfig::four_component()
        } else {
            FitConfig::default()
        };
        config.cutoff_650 = self.cutoff_650;
        if let Some(w) = self.window {
            config.fit_window_nm = w;
        }
        config.validate()?;
        let reference = match &self.reference {
            Some(path) => ReferenceSource::File(path.clone()),
            None => ReferenceSource::Builtin(builtin_params(self.ref_params.as_deref())?),
        };
        Ok(AnalysisOptions {
            fit: config,
            reference,
            convention: self.convention,
            mu270_rel_err: self.mu270_rel_err,
        })
    }
}

fn builtin_params(flag: Option<&str>) -> Result<BuiltinRefParams> {
    match flag {
        Some(text) => BuiltinRefParams::parse(text),
        None => BuiltinRefParams::from_env(),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn one_line(a: &Analysis) -> String {
    let c = &a.report.concentration;
    format!(
        "{}: μ270 = {:.4} cm⁻¹, {:.3} ± {:.3} ppm, rmse = {:.3e}, reliable = {}",
        a.report.sample.sample_id,
        a.result.mu270,
        c.ppm,
        c.ppm_uncertainty,
        a.result.rmse,
        a.result.reliable
    )
}

fn unreliable_reason(r: &FitResult) -> String {
    if !r.converged {
        return format!("fit did not converge in {} iterations", r.iterations);
    }
    let hits: Vec<String> = r
        .boundary_hits
        .iter()
        .map(|h| format!("{} at {} bound", h.param, h.side.as_str()))
        .collect();
    format!("unreliable fit: {}", hits.join(", "))
}

fn write_plot(a: &Analysis, prefix: &Path) -> Result<()> {
    emit_plot_data(
        &a.absorption,
        &a.result,
        &a.reference,
        prefix,
        &a.report.sample.sample_id,
    )?;
    Ok(())
}

fn batch(dir: &Path, out_dir: &Path, fit: &FitArgs, plot: bool) -> Result<i32> {
    let options = fit.options()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv" || x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no .csv or .txt spectrum files in {}",
            dir.display()
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let rows = run_batch(&paths, &options, |a| {
        let name = a
            .file
            .path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        write(&out_dir.join(format!("{name}.json")), &a.report.to_json()?)?;
        if plot {
            write_plot(a, &out_dir.join(format!("{name}.plot")))?;
        }
        Ok(())
    });
    let summary = summary_csv(&rows);
    write(&out_dir.join("summary.csv"), &summary)?;
    print!("{summary}");

    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    for row in rows.iter().filter(|r| r.outcome.is_err()) {
        if let Err(msg) = &row.outcome {
            eprintln!("error: {}: {msg}", row.file);
        }
    }
    Ok(if failed == rows.len() {
        EXIT_DATA
    } else {
        EXIT_OK
    })
}

fn synth(args: SynthArgs) -> Result<i32> {
    let mut cfg: SynthConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::default(),
    };

    let t = &mut cfg.truth;
    if args.four_component {
        t.g520 = None;
    }
    let overrides = [
        (args.a270, &mut t.g270.amplitude),
        (args.b270, &mut t.g270.center_nm),
        (args.c270, &mut t.g270.width_nm),
        (args.a360, &mut t.g360.amplitude),
        (args.b360, &mut t.g360.center_nm),
        (args.c360, &mut t.g360.width_nm),
        (args.ramp, &mut t.ramp),
        (args.ref_weight, &mut t.ref_weight),
    ];
    for (flag, slot) in overrides {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if let Some(g) = t.g520.as_mut() {
        for (flag, slot) in [
            (args.a520, &mut g.amplitude),
            (args.b520, &mut g.center_nm),
            (args.c520, &mut g.width_nm),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
    } else if args.a520.or(args.b520).or(args.c520).is_some() {
        return Err(Error::InvalidConfig(
            "520 nm band parameters given for a four-component truth".into(),
        ));
    }
    if let Some(v) = args.noise_sigma {
        cfg.noise_sigma = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.grid.is_some() {
        cfg.grid = args.grid;
    }
    cfg.contaminants.extend(args.contaminants);
    if let Some(text) = &args.ref_params {
        cfg.reference = Some(BuiltinRefParams::parse(text)?);
    }
    if let Some(c) = args.convention {
        cfg.convention = c;
    }
    cfg.transmission |= args.transmission;
    if args.thickness.is_some() {
        cfg.thickness_cm = args.thickness;
    }
    if args.sample_id.is_some() {
        cfg.sample_id = args.sample_id;
    }
    if args.epr_ppm.is_some() {
        cfg.epr_ppm = args.epr_ppm;
    }

    let grid = match cfg.grid {
        Some((lo, hi, step)) => uniform_grid(lo, hi, step)?,
        None => default_grid(),
    };
    let ref_params = match cfg.reference {
        Some(p) => p,
        None => BuiltinRefParams::from_env()?,
    };
    let reference = ReferenceSpectrum::builtin(&ref_params, &grid, cfg.convention)?;
    let spec = SynthSpec {
        truth: cfg.truth,
        reference,
        grid,
        noise_sigma: cfg.noise_sigma,
        rng_seed: cfg.seed,
        extra_bands: cfg.contaminants,
    };
    let spectrum = if cfg.transmission {
        let d = cfg
            .thickness_cm
            .ok_or_else(|| Error::InvalidConfig("transmission output needs a thickness".into()))?;
        generate_transmission(&spec, d, cfg.convention)?
    } else {
        generate_absorption(&spec)?
    };
    let header = SpectrumHeader {
        sample_id: cfg.sample_id,
        thickness_cm: cfg.thickness_cm,
        epr_ppm: cfg.epr_ppm,
        ..SpectrumHeader::default()
    };
    write_spectrum_file(&args.output, &spectrum, &header)?;
    Ok(EXIT_OK)
}
