use std::fs;
use std::path::PathBuf;
use std::process::Command;

use nelsonbath::config::{BathParams, ConfigError, Scale, Subcommand};
use nelsonbath::output::{parse, parse_csv, render, OutputError};
use nelsonbath::runner::{execute, sibling_path, write_report};
use nelsonbath::{emit, parse_config, Format, Metadata, RunConfig, Table, Value, DEFAULT_SEED};
use nelsonbath_core::heatbath::{BathKind, Mode};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    let mut cfg = parse_config(&fs::read_to_string(configs().join(name)).unwrap()).unwrap();
    cfg.base_dir = Some(configs());
    cfg
}

fn run(cfg: &RunConfig) -> nelsonbath::Report {
    execute(cfg, &mut |_| {}).unwrap()
}

const MINIMAL_BATH: &str = r#"{
  "subcommand": "bath",
  "bath": { "M": 1.0, "gamma2": 0.01, "c_w": 1.0, "tau_bar": 1.0 }
}"#;

#[test]
fn minimal_bath_config_gets_defaults() {
    let cfg = parse_config(MINIMAL_BATH).unwrap();
    assert_eq!(cfg.subcommand, Subcommand::Bath);
    assert_eq!(cfg.seed, DEFAULT_SEED);
    assert_eq!(cfg.format, Format::Csv);
    assert_eq!(cfg.output, None);
    let b: &BathParams = cfg.bath.as_ref().unwrap();
    assert_eq!(b.n_collisions, 100_000);
    assert_eq!(b.mode, Mode::Paper);
    assert_eq!(b.bath_kind, BathKind::IsotropicFixedSpeed);
    assert_eq!(b.target_correlation, None);
    assert_eq!(b.burn_in_fraction, 0.1);
}

#[test]
fn range_errors_name_every_field() {
    let text = MINIMAL_BATH.replace("\"gamma2\": 0.01", "\"gamma2\": -1").replace("\"c_w\": 1.0", "\"c_w\": 0");
    let err = parse_config(&text).unwrap_err();
    let ConfigError::Range(v) = &err else { panic!("{err:?}") };
    let fields: Vec<&str> = v.iter().map(|x| x.field.as_str()).collect();
    assert_eq!(fields, ["bath.gamma2", "bath.c_w"]);
    assert!(err.to_string().contains("bath.gamma2"));
}

#[test]
fn unknown_keys_are_rejected() {
    let text = MINIMAL_BATH.replace("\"subcommand\"", "\"colour\": \"red\",\n  \"subcommand\"");
    match parse_config(&text).unwrap_err() {
        ConfigError::UnknownKey { key, line, .. } => {
            assert_eq!(key, "colour");
            assert_eq!(line, 2);
        }
        e => panic!("{e:?}"),
    }
    let nested = MINIMAL_BATH.replace("\"tau_bar\": 1.0", "\"tau_bar\": 1.0, \"colour\": 1");
    assert!(matches!(parse_config(&nested), Err(ConfigError::UnknownKey { key, .. }) if key == "colour"));
    let wave = r#"{"subcommand": "nelson", "nelson": {"wave": {"kind": "harmonic-ground", "dim": 1, "omega": 1, "colour": 2},
      "M": 1, "eta": 1, "n_particles": 10, "t1": 1, "dt": 0.1, "tau_bar": null}}"#;
    assert!(matches!(parse_config(wave), Err(ConfigError::UnknownKey { key, .. }) if key == "colour"));
}

#[test]
fn syntax_errors_carry_position() {
    let err = parse_config("{\n  \"subcommand\": \"bath\",\n  \"bath\": {,\n}").unwrap_err();
    match err {
        ConfigError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 12)),
        e => panic!("{e:?}"),
    }
}

#[test]
fn physics_parameters_are_never_defaulted() {
    let no_cw = MINIMAL_BATH.replace("\"c_w\": 1.0, ", "");
    assert!(matches!(parse_config(&no_cw), Err(ConfigError::Schema { message, .. }) if message.contains("c_w")));
    let nelson = r#"{"subcommand": "nelson", "nelson": {"wave": {"kind": "harmonic-ground", "dim": 1, "omega": 1},
      "M": 1, "eta": 1, "n_particles": 10, "t1": 1, "dt": 0.1}}"#;
    assert!(matches!(parse_config(nelson), Err(ConfigError::Schema { message, .. }) if message.contains("tau_bar")));
    let with_null = nelson.replace("\"dt\": 0.1", "\"dt\": 0.1, \"tau_bar\": null");
    assert_eq!(parse_config(&with_null).unwrap().nelson.unwrap().tau_bar, None);
}

#[test]
fn blocks_must_match_the_subcommand() {
    let text = r#"{"subcommand": "selftest", "bath": {"M": 1, "gamma2": 0.01, "c_w": 1, "tau_bar": 1}}"#;
    let Err(ConfigError::Range(v)) = parse_config(text) else { panic!() };
    assert_eq!(v[0].field, "bath");
    let Err(ConfigError::Range(v)) = parse_config(r#"{"subcommand": "bath"}"#) else { panic!() };
    assert_eq!(v[0].field, "bath");
}

#[test]
fn empty_row_set_is_header_only() {
    let t = Table::new(["a", "b"]);
    let csv = render(&t, &Metadata::default(), Format::Csv).unwrap();
    assert_eq!(csv, "a,b\n");
    let json = render(&t, &Metadata::default(), Format::Json).unwrap();
    let (_, back) = parse(&json, Format::Json).unwrap();
    assert!(back.same(&t));

    let cfg = parse_config(r#"{"subcommand": "collide"}"#).unwrap();
    let report = run(&cfg);
    assert!(report.main_table().rows.is_empty());
    let text = render(report.main_table(), &report.metadata, Format::Csv).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body.len(), 1);
    assert!(text.ends_with('\n'));
}

#[test]
fn emit_round_trips_bit_for_bit() {
    let mut t = Table::new(["x", "k", "label"]);
    let mut state = 0x2545_f491_4f6c_dd1du64;
    for i in 0..500 {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let x = f64::from_bits(state >> 2) * if i % 2 == 0 { 1.0 } else { -1e-300 };
        let x = if x.is_finite() { x } else { 1.0 / (i as f64 + 3.0) };
        t.push(vec![Value::Real(x), Value::Int(i - 250), Value::from(format!("row {i}, \"q\""))]);
    }
    t.push(vec![Value::Real(f64::NAN), Value::Int(0), Value::from("nan row")]);
    let mut meta = Metadata::default();
    meta.push("seed", "12");
    meta.push("scale", 0.5);
    for format in [Format::Csv, Format::Json] {
        let text = render(&t, &meta, format).unwrap();
        let (m, back) = parse(&text, format).unwrap();
        assert!(back.same(&t), "{format:?}");
        assert!(m.get("scale").unwrap().same(&Value::Real(0.5)));
    }
}

#[test]
fn both_formats_carry_the_same_numbers() {
    let mut cfg = load("collide.json");
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for format in [Format::Csv, Format::Json] {
        cfg.format = format;
        cfg.output = Some(dir.path().join(format!("out.{}", format.extension())));
        let report = run(&cfg);
        write_report(&cfg, &report).unwrap();
        let text = fs::read_to_string(cfg.output.as_ref().unwrap()).unwrap();
        assert!(text.ends_with('\n'));
        tables.push(parse(&text, format).unwrap().1);
    }
    assert!(tables[0].same(&tables[1]));
}

#[test]
fn head_on_collide_row() {
    let report = run(&load("collide.json"));
    let t = report.main_table();
    let get = |row: usize, name: &str| t.rows[row][t.column(name).unwrap()].as_f64().unwrap();
    assert!((get(0, "v2_x") - 0.2).abs() < 1e-15);
    assert!((get(0, "w2_x") - 2.2).abs() < 1e-15);
    assert!((get(0, "ledger_total") - 1.25).abs() < 1e-15);
    assert!((get(0, "a_x") - 0.6).abs() < 1e-15);
    assert!((get(0, "g_x") + 1.6).abs() < 1e-15);
    // Axis perpendicular to the relative velocity: nothing happens.
    assert_eq!(get(1, "v2_x"), 1.0);
    assert_eq!(get(1, "w2_x"), -1.0);
    // Full exchange has no axis.
    assert!(get(2, "phi_x").is_nan());
}

#[test]
fn collide_reads_csv_input() {
    let report = run(&load("collide_file.json"));
    let t = report.main_table();
    assert_eq!(t.rows.len(), 3);
    let v2 = t.rows[0][t.column("v2_x").unwrap()].as_f64().unwrap();
    assert!((v2 - 0.2).abs() < 1e-15);
    assert!(matches!(report.metadata.get("input_sha256"), Some(Value::Text(_))));

    let mut bad = load("collide_file.json");
    bad.input = Some("missing.csv".into());
    let err = execute(&bad, &mut |_| {}).unwrap_err();
    assert!(err.to_string().contains("missing.csv"));
}

#[test]
fn bath_reaches_equipartition() {
    let report = run(&load("bath.json"));
    let t = report.main_table();
    assert_eq!(t.rows.len(), 10);
    let ratio = t.rows.last().unwrap()[t.column("energy_ratio").unwrap()].as_f64().unwrap();
    assert!((0.95..=1.05).contains(&ratio), "{ratio}");
    assert_eq!(report.metadata.get("final_energy_ratio").unwrap().as_f64(), Some(ratio));
}

#[test]
fn bath_trajectory_goes_to_a_sibling_file() {
    let mut cfg = parse_config(MINIMAL_BATH).unwrap();
    let b = cfg.bath.as_mut().unwrap();
    b.n_collisions = 50;
    b.trajectory = true;
    let dir = tempfile::tempdir().unwrap();
    cfg.output = Some(dir.path().join("bath.csv"));
    let written = write_report(&cfg, &run(&cfg)).unwrap();
    assert_eq!(written[1], dir.path().join("bath.trajectory.csv"));
    let (_, traj) = parse_csv(&fs::read_to_string(&written[1]).unwrap()).unwrap();
    assert_eq!(traj.rows.len(), 50);
}

#[test]
fn zero_collisions_report_the_initial_state() {
    let mut cfg = parse_config(MINIMAL_BATH).unwrap();
    cfg.bath.as_mut().unwrap().n_collisions = 0;
    let t = run(&cfg).main_table().clone();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0][t.column("n").unwrap()], Value::Int(0));
}

#[test]
fn nelson_writes_energy_series_and_histograms() {
    let cfg = load("nelson.json");
    let report = run(&cfg);
    let t = report.main_table();
    assert_eq!(t.rows.len(), 6);
    for row in &t.rows {
        let e = row[t.column("energy").unwrap()].as_f64().unwrap();
        let se = row[t.column("energy_se").unwrap()].as_f64().unwrap();
        assert!((e - 0.5).abs() < 4.0 * se);
        assert!(row[t.column("madelung_max").unwrap()].as_f64().unwrap() < 1e-8);
    }
    assert!(report.metadata.get("osmotic_residual").unwrap().as_f64().unwrap() < 0.1);
    let hist = &report.artifacts[1];
    assert_eq!(hist.suffix, Some("histograms"));
    assert_eq!(hist.table.rows.len(), 6 * 200);
}

#[test]
fn packet_energy_includes_the_collision_constant() {
    let report = run(&load("packet.json"));
    let t = report.main_table();
    let exact = report.metadata.get("exact_energy").unwrap().as_f64().unwrap();
    for row in &t.rows {
        assert_eq!(row[t.column("collision_constant").unwrap()].as_f64(), Some(0.75));
        assert!((row[t.column("quadrature_rs").unwrap()].as_f64().unwrap() - exact).abs() < 1e-8);
    }
}

#[test]
fn minkowski_reports_the_correlation_term() {
    let report = run(&load("minkowski.json"));
    let t = report.main_table();
    let col = |n: &str| t.rows[0][t.column(n).unwrap()].as_f64().unwrap();
    let z = (col("statistical_residual") - col("correlation_term")).abs()
        / col("statistical_residual_se").hypot(col("correlation_term_se"));
    assert!(z < 3.0);
    assert!(col("identity_gap").abs() < 1e-10);
    assert!(col("frame_residual") < 1e-12);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let cfg = load("bath.json");
    let a = run(&cfg);
    let b = run(&cfg);
    assert_eq!(render(a.main_table(), &a.metadata, Format::Csv).unwrap(), render(b.main_table(), &b.metadata, Format::Csv).unwrap());
    // The output path is not part of the provenance hash.
    let mut moved = cfg.clone();
    moved.output = Some("elsewhere.csv".into());
    assert_eq!(moved.canonical_json(), cfg.canonical_json());
    let mut reseeded = cfg.clone();
    reseeded.seed += 1;
    assert_ne!(reseeded.canonical_json(), cfg.canonical_json());
}

#[test]
fn io_errors_name_the_path() {
    let t = Table::new(["a"]);
    let path = PathBuf::from("/nonexistent-dir/out.csv");
    match emit(&t, &Metadata::default(), Format::Csv, Some(&path)) {
        Err(e @ OutputError::Io { .. }) => assert!(e.to_string().contains("/nonexistent-dir/out.csv")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sibling_paths() {
    assert_eq!(sibling_path("run/out.csv".as_ref(), "histograms"), PathBuf::from("run/out.histograms.csv"));
    assert_eq!(sibling_path("out".as_ref(), "trajectory"), PathBuf::from("out.trajectory"));
}

#[test]
fn quick_selftest_passes() {
    let mut cfg = RunConfig::bare(Subcommand::Selftest);
    cfg.selftest = Some(nelsonbath::config::SelftestParams { scale: Scale::Quick });
    let mut lines = Vec::new();
    let report = execute(&cfg, &mut |l| lines.push(l.to_string())).unwrap();
    assert_eq!(lines.len(), 12);
    assert!(report.failed.is_empty(), "{lines:#?}");
}

#[test]
fn binary_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, MINIMAL_BATH.replace("0.01", "-1")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nelsonbath")).arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "range");
    assert_eq!(err["error"]["violations"][0]["field"], "bath.gamma2");

    let out = Command::new(env!("CARGO_BIN_EXE_nelsonbath")).arg("bath").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn binary_collide_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.json");
    let status = Command::new(env!("CARGO_BIN_EXE_nelsonbath"))
        .arg("collide")
        .arg("--config")
        .arg(configs().join("collide_file.json"))
        .args(["--format", "json", "--seed", "5", "--output"])
        .arg(&out_path)
        .status()
        .unwrap();
    assert!(status.success());
    let (meta, t) = parse(&fs::read_to_string(&out_path).unwrap(), Format::Json).unwrap();
    assert_eq!(meta.get("seed"), Some(&Value::from("5")));
    assert_eq!(t.rows.len(), 3);
}
