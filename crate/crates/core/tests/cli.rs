use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nsfit::analysis::{
    calibrate, concentration, CrossSection, RegressionModel, EPR_REFERENCE_SAMPLES,
};
use nsfit::io::{parse_spectrum_file, FitReport};
use nsfit::spectrum::{Convention, Quantity};

fn nsfit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsfit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NSFIT_BUILTIN_REF_PARAMS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_epr_table(dir: &Path) -> std::path::PathBuf {
    let mut text = String::from("sample,ppm,mu270\n");
    for (id, ppm, mu) in EPR_REFERENCE_SAMPLES {
        text.push_str(&format!("{id},{ppm},{mu}\n"));
    }
    let path = dir.join("epr.csv");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn conc_prints_cas40_concentration() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsfit(
        &["conc", "--mu270", "5.9", "--convention", "decadic"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("3.010 ± 0.232 ppm"), "{text}");

    let out = nsfit(
        &[
            "conc",
            "--mu270",
            "5.9",
            "--convention",
            "decadic",
            "--json",
        ],
        dir.path(),
    );
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lib = concentration(5.9, Convention::Decadic, 0.01, &CrossSection::DECADIC).unwrap();
    assert_eq!(json["ppm"].as_f64().unwrap(), lib.ppm);
    assert_eq!(
        json["ppm_uncertainty"].as_f64().unwrap(),
        lib.ppm_uncertainty
    );
}

#[test]
fn calibrate_epr_table_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let table = write_epr_table(dir.path());
    let out = nsfit(
        &[
            "calibrate",
            table.to_str().unwrap(),
            "--through-origin",
            "--json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pairs: Vec<(f64, f64)> = EPR_REFERENCE_SAMPLES
        .iter()
        .map(|(_, p, m)| (*p, *m))
        .collect();
    let lib = calibrate(&pairs, RegressionModel::ThroughOrigin).unwrap();
    assert_eq!(json["slope"].as_f64().unwrap(), lib.slope);
    assert!((lib.slope - 1.96).abs() <= 0.02);

    let text = stdout(&nsfit(&["calibrate", table.to_str().unwrap()], dir.path()));
    assert!(text.starts_with("slope = 1.962"), "{text}");
}

#[test]
fn strict_fit_on_out_of_bounds_center_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsfit(
        &[
            "synth",
            "-o",
            "bad.csv",
            "--b270",
            "280",
            "--sample-id",
            "bad",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = nsfit(
        &["fit", "bad.csv", "--strict", "--report", "bad.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let report: FitReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bad.json")).unwrap()).unwrap();
    assert!(!report.reliable);
    assert!(report
        .boundary_hits
        .iter()
        .any(|h| h.param.as_str() == "b270"));

    let out = nsfit(&["fit", "bad.csv", "--report", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn synth_transmission_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsfit(
        &[
            "synth",
            "-o",
            "t.csv",
            "--transmission",
            "--thickness",
            "300um",
            "--a270",
            "11.2",
            "--sample-id",
            "T",
            "--epr-ppm",
            "5.7",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let file = parse_spectrum_file(dir.path().join("t.csv")).unwrap();
    assert_eq!(file.spectrum.quantity(), Quantity::TransmissionFraction);
    assert_eq!(file.header.thickness_cm, Some(0.03));

    let out = nsfit(
        &["fit", "t.csv", "--strict", "--plot", "t_plot"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let report: FitReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.reliable);
    assert!((report.mu270 - 11.2).abs() <= 1e-6 * 11.2);
    assert_eq!(report.input_sha256.as_deref(), Some(file.sha256.as_str()));
    assert!(dir.path().join("t_plot.csv").exists());
    assert!(dir.path().join("t_plot.svg").exists());

    let out = nsfit(
        &["convert", "t.csv", "-o", "a.csv", "--convention", "natural"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let converted = parse_spectrum_file(dir.path().join("a.csv")).unwrap();
    assert_eq!(converted.spectrum.quantity(), Quantity::AbsorptionNatural);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str| {
        [
            "synth",
            "-o",
            o,
            "--noise-sigma",
            "0.05",
            "--seed",
            "12",
            "--contaminant",
            "5,800,30",
        ]
    };
    nsfit(&args("x.csv"), dir.path());
    nsfit(&args("y.csv"), dir.path());
    assert_eq!(
        fs::read(dir.path().join("x.csv")).unwrap(),
        fs::read(dir.path().join("y.csv")).unwrap()
    );
}

#[test]
fn synth_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"truth": {"g270": {"amplitude": 2.0, "center_nm": 269.5, "width_nm": 18.0},
                      "g360": {"amplitude": 0.8, "center_nm": 355.0, "width_nm": 40.0},
                      "g520": null, "ramp": 1e6, "ref_weight": 1.2},
            "convention": "natural", "grid": [220.0, 700.0, 2.0]}"#,
    )
    .unwrap();
    let out = nsfit(
        &["synth", "-o", "c.csv", "--config", "cfg.json"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let file = parse_spectrum_file(dir.path().join("c.csv")).unwrap();
    assert_eq!(file.spectrum.quantity(), Quantity::AbsorptionNatural);
    assert_eq!(file.spectrum.len(), 241);

    let out = nsfit(&["fit", "c.csv", "--four-component"], dir.path());
    let report: FitReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report.mu270 - 2.0).abs() <= 1e-6 * 2.0);
    assert_eq!(
        report.concentration.cross_section_used,
        CrossSection::NATURAL
    );
}

#[test]
fn range_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsfit(&["range", "--thickness", "300um", "--json"], dir.path());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["ppm_min"].as_f64().unwrap() - 0.01).abs() < 0.001);
    assert!((30.0..=50.0).contains(&json["ppm_max"].as_f64().unwrap()));
}

#[test]
fn batch_writes_reports_and_tolerates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    for (name, seed) in [("b.csv", "1"), ("a.csv", "2")] {
        let out = nsfit(
            &[
                "synth",
                "-o",
                &format!("data/{name}"),
                "--noise-sigma",
                "0.03",
                "--seed",
                seed,
                "--sample-id",
                name.trim_end_matches(".csv"),
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
    }
    fs::write(data.join("c.csv"), "not a spectrum\n").unwrap();

    let out = nsfit(&["batch", "data", "--out-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(stdout(&out), summary);
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("a,a.csv,ok,true,"));
    assert!(rows[2].starts_with("b,b.csv,ok,true,"));
    assert!(rows[3].starts_with("c,c.csv,error,"));
    assert!(dir.path().join("out/a.csv.json").exists());
    assert!(!dir.path().join("out/c.csv.json").exists());

    let only_bad = dir.path().join("bad");
    fs::create_dir(&only_bad).unwrap();
    fs::write(only_bad.join("x.csv"), "nope\n").unwrap();
    let out = nsfit(&["batch", "bad", "--out-dir", "out2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nsfit(&["fit"], dir.path()).status.code(), Some(1));
    assert_eq!(
        nsfit(&["fit", "missing.csv"], dir.path()).status.code(),
        Some(2)
    );
    fs::write(
        dir.path().join("t.csv"),
        "# quantity: transmission_percent\n200,50\n201,50\n",
    )
    .unwrap();
    assert_eq!(
        nsfit(&["convert", "t.csv", "-o", "a.csv"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(nsfit(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn reference_file_with_wrong_convention_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    nsfit(&["synth", "-o", "s.csv"], dir.path());
    nsfit(
        &[
            "synth",
            "-o",
            "r.csv",
            "--convention",
            "natural",
            "--a270",
            "0",
            "--a360",
            "0",
            "--a520",
            "0",
            "--ramp",
            "0",
        ],
        dir.path(),
    );
    let out = nsfit(&["fit", "s.csv", "--reference", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("convention"));

    nsfit(
        &[
            "synth", "-o", "r2.csv", "--a270", "0", "--a360", "0", "--a520", "0", "--ramp", "0",
        ],
        dir.path(),
    );
    let out = nsfit(&["fit", "s.csv", "--reference", "r2.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: FitReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report.mu270 - 5.9).abs() <= 1e-6 * 5.9);
}
