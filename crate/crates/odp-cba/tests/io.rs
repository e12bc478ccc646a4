use std::fs;
use std::path::Path;
use std::process::Command;

use odp_cba::appraisal::DiscountSpec;
use odp_cba::io::config::{parse_config, ConfigError, RunConfig, RunMode};
use odp_cba::io::fixtures::{export_shipped, load_fixtures, write_manifest, FixtureError, FixturePack};
use odp_cba::io::pipeline::{run, Stages};
use odp_cba::io::report::{emit_report, headline_value, Format};
use odp_cba::monte_carlo::default_bindings;
use odp_cba::scenario::{default_impact_matrix, default_scenarios, default_tornado_ranges};
use serde_json::Value;

const DEFAULT: &str = include_str!("../config/default.json");

fn edit(f: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(DEFAULT).unwrap();
    f(&mut v);
    serde_json::to_string_pretty(&v).unwrap()
}

#[test]
fn shipped_config_loads_in_fixture_mode() {
    let cfg = RunConfig::shipped().unwrap();
    assert_eq!(cfg.mode, RunMode::Fixture);
    assert_eq!(cfg.countries.len(), 3);
}

#[test]
fn shipped_config_matches_code_defaults() {
    let cfg = RunConfig::shipped().unwrap();
    assert_eq!(cfg.impact_matrix, default_impact_matrix());
    assert_eq!(cfg.tornado_ranges, default_tornado_ranges());
    assert_eq!(cfg.scenarios, default_scenarios());
    assert_eq!(cfg.monte_carlo.bindings, default_bindings());
}

#[test]
fn zero_trials_is_a_schema_violation() {
    let text = edit(|v| v["monte_carlo"]["n_trials"] = 0.into());
    assert!(matches!(parse_config(&text), Err(ConfigError::SchemaViolation(_))));
}

#[test]
fn omitted_discount_defaults_to_four_percent() {
    let text = edit(|v| {
        v.as_object_mut().unwrap().remove("discount");
    });
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.discount, DiscountSpec::default());
    assert_eq!(cfg.discount.rate, rust_decimal::Decimal::new(4, 2));
}

#[test]
fn unknown_key_is_rejected_with_position() {
    let text = edit(|v| v["monte_carlo"]["n_trails"] = 10.into());
    match parse_config(&text) {
        Err(ConfigError::UnknownKey { line, message, .. }) => {
            assert!(line > 1);
            assert!(message.contains("n_trails"));
        }
        other => panic!("expected UnknownKey, got {other:?}"),
    }
}

#[test]
fn syntax_error_reports_position() {
    let broken = DEFAULT.replacen('{', "{,", 1);
    assert!(matches!(
        parse_config(&broken),
        Err(ConfigError::ParseError { line: 1, .. })
    ));
}

#[test]
fn exported_pack_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    export_shipped(dir.path()).unwrap();
    assert_eq!(load_fixtures(dir.path()).unwrap(), FixturePack::shipped().unwrap());
}

#[test]
fn truncated_benefit_table_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    export_shipped(dir.path()).unwrap();
    let path = dir.path().join("annual_benefits.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let last = lines.pop().unwrap();
    let cut: Vec<&str> = last.split(',').take(4).collect();
    let truncated = format!("{}\n{}\n", lines.join("\n"), cut.join(","));
    fs::write(&path, truncated).unwrap();
    write_manifest(dir.path()).unwrap();
    match load_fixtures(dir.path()) {
        Err(FixtureError::MalformedRow { file, row, .. }) => {
            assert_eq!(file, "annual_benefits.csv");
            assert_eq!(row as usize, lines.len() + 1);
        }
        other => panic!("expected MalformedRow, got {other:?}"),
    }
}

#[test]
fn edited_fixture_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    export_shipped(dir.path()).unwrap();
    let path = dir.path().join("stream_pv.csv");
    let text = fs::read_to_string(&path).unwrap().replacen("70.63", "70.64", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(
        load_fixtures(dir.path()),
        Err(FixtureError::ChecksumMismatch { file, .. }) if file == "stream_pv.csv"
    ));
}

#[test]
fn missing_fixture_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    export_shipped(dir.path()).unwrap();
    fs::remove_file(dir.path().join("country_pv.csv")).unwrap();
    assert!(matches!(
        load_fixtures(dir.path()),
        Err(FixtureError::MissingFixture(_))
    ));
}

fn small_run() -> odp_cba::io::pipeline::ReportBundle {
    let mut cfg = RunConfig::shipped().unwrap();
    cfg.monte_carlo.n_trials = 2000;
    cfg.monte_carlo.dump_trials = true;
    cfg.country_monte_carlo.n_trials = 500;
    run(&cfg, &FixturePack::shipped().unwrap(), Stages::ALL).unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn reports_are_byte_identical() {
    let formats = [Format::Csv, Format::Json, Format::Plotdata];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&small_run(), &formats, a.path()).unwrap();
    emit_report(&small_run(), &formats, b.path()).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert!(fa.len() > 10);
    assert_eq!(fa, fb);
}

#[test]
fn headline_json_and_tornado_csv() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&small_run(), &[Format::Json, Format::Csv], dir.path()).unwrap();
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(headline_value(&json, "npv"), Some(356.7));
    assert_eq!(headline_value(&json, "bcr"), Some(1.41));
    assert!(json["annotations"].as_array().is_some_and(|a| !a.is_empty()));

    let mut rdr = csv::Reader::from_path(dir.path().join("tornado.csv")).unwrap();
    let ranges: Vec<f64> = rdr.records().map(|r| r.unwrap()[5].parse().unwrap()).collect();
    assert_eq!(ranges.len(), 7);
    assert!(ranges.windows(2).all(|w| w[0] >= w[1]));

    let headline = fs::read_to_string(dir.path().join("headline.csv")).unwrap();
    assert!(headline.contains("npv,356.7\n"));
    assert!(headline.contains("pv_costs,877.2\n"));
}

#[test]
fn unwritable_directory_is_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    assert!(emit_report(&small_run(), &[Format::Json], &file.join("sub")).is_err());
}

fn cli(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_odp-cba"))
        .args(args)
        .env("ODP_CBA_OUT", out)
        .output()
        .unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout) = cli(&["appraise"], out.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("356.7"));

    assert_eq!(cli(&["check-fixtures"], out.path()).0, 0);
    assert_eq!(cli(&["montecarlo", "--trials", "0"], out.path()).0, 2);

    let bad = out.path().join("bad.json");
    fs::write(&bad, edit(|v| v["surprise"] = true.into())).unwrap();
    assert_eq!(cli(&["appraise", "--config", bad.to_str().unwrap()], out.path()).0, 2);

    let fx = out.path().join("fixtures");
    export_shipped(&fx).unwrap();
    let p = fx.join("annual_costs.csv");
    let text = fs::read_to_string(&p).unwrap() + "\n";
    fs::write(&p, text).unwrap();
    assert_eq!(
        cli(&["check-fixtures", "--fixtures", fx.to_str().unwrap()], out.path()).0,
        3
    );

    let missing = out.path().join("nowhere.json");
    assert_eq!(
        cli(&["appraise", "--config", missing.to_str().unwrap()], out.path()).0,
        4
    );
}

#[test]
fn cli_report_honours_output_override() {
    let out = tempfile::tempdir().unwrap();
    let (code, _) = cli(&["report", "--trials", "500", "--format", "json"], out.path());
    assert_eq!(code, 0);
    assert!(out.path().join("report.json").exists());
    assert!(!out.path().join("headline.csv").exists());
}
