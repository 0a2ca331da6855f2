use std::fs;
use std::path::Path;
use std::process::Command;

use moire_relax::output::{emit_svg, render_svg, Plot, Series};
use moire_relax::{run, CliError, Mode, ResultRecord, RunConfig};

const BIN: &str = env!("CARGO_BIN_EXE_moire-relax");

fn config(mode: Mode, json: &str, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_json(json).unwrap();
    cfg.mode = Some(mode);
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn derive_params_reports_graphene_groups() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Mode::DeriveParams,
        r#"{"model": {"a_nm": 0.25, "theta": 0.02, "kappa_mev_per_nm": 50000, "v0_mev_per_nm": 20}}"#,
        dir.path(),
    );
    let record = run(&cfg).unwrap();
    let g = record.groups.unwrap();
    assert!((g.a_m_nm - 12.25).abs() < 1e-12);
    assert!((g.delta - 4e-4).abs() < 1e-16);
    assert!((g.eta - 0.98).abs() < 1e-12);
    assert_eq!((g.layer1_atoms, g.layer2_atoms), (49, 50));
    let csv = fs::read_to_string(dir.path().join("derive_params.csv")).unwrap();
    assert!(
        csv.starts_with("a_m_nm,epsilon,delta,eta,eta_abstract,layer1_atoms,layer2_atoms\n12.25,")
    );
}

#[test]
fn seeded_runs_are_byte_identical() {
    let json = r#"{"model": {"a_nm": 0.25, "theta": 0.05}, "grid_n": 64, "etas": [2.0, 0.5], "perturbation_over_a": 0.02}"#;
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut c1 = config(Mode::EtaSweep, json, d1.path());
    let mut c2 = config(Mode::EtaSweep, json, d2.path());
    c1.seed = Some(42);
    c2.seed = Some(42);
    c2.jobs = Some(1);
    let r1 = run(&c1).unwrap();
    run(&c2).unwrap();
    for file in &r1.files {
        let name = file.file_name().unwrap();
        if name == "result.json" {
            continue;
        }
        assert_eq!(
            fs::read(file).unwrap(),
            fs::read(d2.path().join(name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn record_echo_round_trips_and_files_exist() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Mode::GsfeRelax,
        r#"{"model": {"a_nm": 0.25, "theta": 0.02, "eta": 1.5}, "grid_n": 128, "optimizer": {"memory": 5, "line_search": "strong_wolfe"}}"#,
        dir.path(),
    );
    let record = run(&cfg).unwrap();
    assert!(record.converged);
    for file in &record.files {
        assert!(file.exists(), "{}", file.display());
    }
    let text = fs::read_to_string(dir.path().join("result.json")).unwrap();
    let parsed: ResultRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.config, cfg);
    assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);

    let csv = fs::read_to_string(dir.path().join("gsfe_relax.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("x_over_aM,u_minus_over_a,delta_unreduced_over_a,delta_mod_over_period")
    );
    assert_eq!(lines.count(), 129);
    let atoms = fs::read_to_string(dir.path().join("gsfe_atoms.csv")).unwrap();
    assert_eq!(atoms.lines().count(), 1 + 49 + 50);
}

#[test]
fn atomistic_relax_writes_positions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Mode::AtomisticRelax,
        r#"{"model": {"theta": 0.05, "eta": 1.0}, "emit_svg": false}"#,
        dir.path(),
    );
    let record = run(&cfg).unwrap();
    assert!(record.converged);
    let atoms = fs::read_to_string(dir.path().join("atomistic_atoms.csv")).unwrap();
    assert_eq!(atoms.lines().count(), 1 + 19 + 20);
    assert!(!dir.path().join("atomistic_u_minus.svg").exists());
}

#[test]
fn convergence_study_writes_one_row_per_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Mode::ConvergenceStudy,
        r#"{"thetas": [0.1, 0.05]}"#,
        dir.path(),
    );
    run(&cfg).unwrap();
    let csv = fs::read_to_string(dir.path().join("convergence_study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "theta,epsilon,eta,l2_error,energy_gap,atoms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",9") && lines[2].ends_with(",19"));
}

#[test]
fn empty_series_is_an_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.svg");
    let plot = Plot {
        title: "t".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        series: vec![Series::new("none", vec![])],
    };
    assert!(matches!(
        emit_svg(&plot, &path),
        Err(CliError::EmptySeries { .. })
    ));
    assert!(!path.exists());
}

#[test]
fn single_point_series_renders() {
    let plot = Plot {
        title: "t".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        series: vec![Series::new("one", vec![(0.5, 0.5)])],
    };
    let svg = render_svg(&plot).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 800 500""#));
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert_eq!(render_svg(&plot).unwrap(), svg);
}

fn exit_code(args: &[&str]) -> i32 {
    Command::new(BIN)
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let good = write_config(
        dir.path(),
        r#"{"model": {"a_nm": 0.25, "theta": 0.02, "eta": 1.0}, "grid_n": 64}"#,
    );
    assert_eq!(
        exit_code(&[
            "gsfe-relax",
            "--config",
            good.to_str().unwrap(),
            "--out",
            out
        ]),
        0
    );

    let missing = dir.path().join("missing.json");
    assert_eq!(
        exit_code(&[
            "gsfe-relax",
            "--config",
            missing.to_str().unwrap(),
            "--out",
            out
        ]),
        4
    );

    let bad = write_config(dir.path(), r#"{"model": {"theta": 0.03, "eta": 1.0}}"#);
    assert_eq!(
        exit_code(&[
            "gsfe-relax",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            out
        ]),
        2
    );

    let short = write_config(
        dir.path(),
        r#"{"model": {"a_nm": 0.25, "theta": 0.02, "eta": 3.0}, "grid_n": 256, "optimizer": {"max_iterations": 2}}"#,
    );
    let short = short.to_str().unwrap();
    assert_eq!(
        exit_code(&["gsfe-relax", "--config", short, "--out", out]),
        3
    );
    assert_eq!(
        exit_code(&[
            "gsfe-relax",
            "--config",
            short,
            "--out",
            out,
            "--allow-nonconverged"
        ]),
        0
    );
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "gsfe_relax", "model": {"a_nm": 0.25, "theta": 0.02, "kappa_mev_per_nm": 50000, "v0_mev_per_nm": 20}, "output_dir": "ignored", "seed": 1}"#,
    );
    let out = dir.path().join("flagged");
    let status = Command::new(BIN)
        .args([
            "derive-params",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let record: ResultRecord =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(record.mode, Mode::DeriveParams);
    assert_eq!(record.config.seed, Some(9));
    assert!(!dir.path().join("ignored").exists());
}
