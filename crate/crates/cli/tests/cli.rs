use serde_json::Value;
use std::io::Write;
use std::process::{Command, Output};

const NOMINAL: [&str; 8] = ["--isc", "5.26", "--voc", "21.15", "--imp", "4.85", "--vmp", "16.71"];
const LOW: &str = "5.25,21.06,4.83,16.65";
const HIGH: &str = "5.28,21.23,4.87,16.78";

fn sdm1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdm1"))
        .args(args)
        .env_remove("SDM1_ABS_TOL_F")
        .env_remove("SDM1_ABS_TOL_X")
        .output()
        .expect("binary runs")
}

fn with_nominal<'a>(sub: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![sub];
    args.extend(NOMINAL);
    args.extend(extra);
    args
}

fn json(out: &Output) -> Vec<Value> {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON array")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

fn temp_csv(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

const NATIVE_HEADER: &str = "timestamp,isc_a,voc_v,imp_a,vmp_v,u_isc_pct,u_voc_pct,u_imp_pct,u_vmp_pct";

#[test]
fn domain_csv_has_header_and_one_row() {
    let out = sdm1(&with_nominal("domain", &[]));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("timestamp,isc_a,voc_v,imp_a,vmp_v,a_max_v,r_s_min_ohm"));
    assert!(lines[1].contains(",intersection,true,"));
    assert!(lines[1].ends_with(",ok"));
}

#[test]
fn missing_flag_is_usage_error() {
    let out = sdm1(&["domain", "--isc", "5.26", "--voc", "21.15", "--imp", "4.85"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--vmp") && err.contains("Usage"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_cardinal_points_exit_2_with_json_error() {
    let out = sdm1(&["domain", "--isc", "5.0", "--voc", "21.15", "--imp", "5.5", "--vmp", "16.71", "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert_eq!(err["error"]["exit_code"], 2);
    assert_eq!(err["error"]["kind"], "input");
}

#[test]
fn input_sources_are_exclusive() {
    let f = temp_csv(&format!("{NATIVE_HEADER}\n"));
    let path = f.path().to_str().unwrap();
    let out = sdm1(&with_nominal("domain", &["--input", path]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_tolerance_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_sdm1"))
        .args(with_nominal("domain", &[]))
        .env("SDM1_ABS_TOL_F", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tolerance_environment_is_honoured() {
    let loose = Command::new(env!("CARGO_BIN_EXE_sdm1"))
        .args(with_nominal("domain", &["--format", "json"]))
        .env("SDM1_ABS_TOL_X", "1e-3")
        .env("SDM1_ABS_TOL_F", "1e-3")
        .output()
        .unwrap();
    let tight = json(&sdm1(&with_nominal("domain", &["--format", "json"])));
    let loose = json(&loose);
    let (a, b) = (num(&tight[0], "a_max_v"), num(&loose[0], "a_max_v"));
    assert!((a - b).abs() < 1e-2);
}

#[test]
fn params_inside_domain_are_positive() {
    let rows = json(&sdm1(&with_nominal("params", &["--a", "1.2", "--format", "json"])));
    for key in ["i_ph_a", "i_o_a", "g_sh_s", "r_s_ohm"] {
        assert!(num(&rows[0], key) > 0.0, "{key}");
    }
}

#[test]
fn params_beyond_a_max_name_the_negative_parameter() {
    let d = json(&sdm1(&with_nominal("domain", &["--format", "json"])));
    let a = format!("{}", num(&d[0], "a_max_v") + 0.01);
    let out = sdm1(&with_nominal("params", &["--a", &a, "--format", "json"]));
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    let msg = err["error"]["message"].as_str().unwrap();
    assert!(msg.contains("non-positive") && msg.contains("G_sh = -"), "{msg}");
}

#[test]
fn params_just_below_a_max_has_small_shunt() {
    let d = json(&sdm1(&with_nominal("domain", &["--format", "json"])));
    let a = format!("{}", num(&d[0], "a_max_v") - 1e-3);
    let rows = json(&sdm1(&with_nominal("params", &["--a", &a, "--format", "json"])));
    let g_sh = num(&rows[0], "g_sh_s");
    assert!(g_sh > 0.0 && g_sh < 1e-3 * 5.26 / 21.15, "{g_sh}");
}

#[test]
fn curve_endpoints() {
    let rows = json(&sdm1(&with_nominal("curve", &["--a", "1.3", "--points", "101", "--format", "json"])));
    assert_eq!(rows.len(), 101);
    assert_eq!(num(&rows[0], "v_pv_v"), 0.0);
    assert!((num(&rows[0], "i_pv_a") - 5.26).abs() < 1e-9);
    let last = &rows[100];
    assert!((num(last, "v_pv_v") - 21.15).abs() < 1e-6);
    assert!(num(last, "i_pv_a").abs() < 1e-9);

    let two = json(&sdm1(&with_nominal("curve", &["--a", "1.3", "--points", "2", "--format", "json"])));
    assert_eq!(two.len(), 2);
    assert_eq!(num(&two[0], "v_pv_v"), 0.0);
    assert_eq!(num(&two[1], "v_pv_v"), num(last, "v_pv_v"));
}

#[test]
fn low_and_high_curves_bracket_nominal() {
    let curve = |cp: &str| {
        let v: Vec<&str> = cp.split(',').collect();
        let args = [
            "curve",
            "--isc",
            v[0],
            "--voc",
            v[1],
            "--imp",
            v[2],
            "--vmp",
            v[3],
            "--a-fraction",
            "0.9",
            "--points",
            "201",
            "--format",
            "json",
        ];
        json(&sdm1(&args))
    };
    let low = curve(LOW);
    let nominal = curve("5.26,21.15,4.85,16.71");
    let high = curve(HIGH);
    // compare at the nominal voltages, interpolating the other two curves
    let at = |rows: &[Value], v: f64| -> f64 {
        let k = rows.iter().position(|r| num(r, "v_pv_v") >= v).unwrap();
        if k == 0 {
            return num(&rows[0], "i_pv_a");
        }
        let (v0, i0) = (num(&rows[k - 1], "v_pv_v"), num(&rows[k - 1], "i_pv_a"));
        let (v1, i1) = (num(&rows[k], "v_pv_v"), num(&rows[k], "i_pv_a"));
        i0 + (i1 - i0) * (v - v0) / (v1 - v0)
    };
    assert_ne!(low, high);
    for r in &nominal[..190] {
        let (v, i) = (num(r, "v_pv_v"), num(r, "i_pv_a"));
        assert!(at(&low, v) <= i + 1e-9 && i <= at(&high, v) + 1e-9, "v = {v}");
    }
}

#[test]
fn plot_data_traces_cross_inside_grid() {
    let rows = json(&sdm1(&with_nominal("plot-data", &["--a-grid", "1.25:1.35:11", "--format", "json"])));
    assert_eq!(rows.len(), 11);
    let gap: Vec<f64> = rows.iter().map(|r| num(r, "r_s_sh_ohm") - num(r, "r_s_mp_ohm")).collect();
    assert!(gap[0] > 0.0 && gap[10] < 0.0);
    assert_eq!(gap.windows(2).filter(|w| w[0].signum() != w[1].signum()).count(), 1);
}

#[test]
fn plot_data_series_for_low_and_high() {
    let out =
        sdm1(&with_nominal("plot-data", &["--a-grid", "1.2:1.5:31", "--low", LOW, "--high", HIGH, "--format", "json"]));
    let rows = json(&out);
    assert_eq!(rows.len(), 93);
    for series in ["low", "high"] {
        let gap: Vec<f64> = rows
            .iter()
            .filter(|r| r["series"] == series)
            .map(|r| num(r, "r_s_sh_ohm") - num(r, "r_s_mp_ohm"))
            .collect();
        assert_eq!(gap.windows(2).filter(|w| w[0].signum() != w[1].signum()).count(), 1, "{series}");
    }
}

#[test]
fn zero_spread_interval_is_the_nominal_domain() {
    let d = json(&sdm1(&with_nominal("domain", &["--format", "json"])));
    let u = json(&sdm1(&with_nominal("uncertainty", &["--format", "json"])));
    let a = num(&d[0], "a_max_v");
    assert_eq!(num(&u[0], "a_max_lo_v"), a);
    assert_eq!(num(&u[0], "a_max_hi_v"), a);
    assert_eq!(num(&u[0], "r_s_min_lo_ohm"), num(&d[0], "r_s_min_ohm"));
}

#[test]
fn explicit_realizations_give_an_interval() {
    let u = json(&sdm1(&with_nominal("uncertainty", &["--low", LOW, "--high", HIGH, "--format", "json"])));
    assert!(num(&u[0], "a_max_lo_v") < num(&u[0], "a_max_hi_v"));
    assert_eq!(u[0]["status"], "ok");
}

#[test]
fn corners_have_distinct_outcomes() {
    let args =
        ["--corners", "--d-isc", "0.02", "--d-voc", "0.08", "--d-imp", "0.02", "--d-vmp", "0.07", "--format", "json"];
    let rows = json(&sdm1(&with_nominal("uncertainty", &args)));
    assert_eq!(rows.len(), 16);
    let mut outcomes: Vec<(u64, u64)> = rows
        .iter()
        .filter(|r| r["status"] == "ok")
        .map(|r| (num(r, "a_max_v").to_bits(), num(r, "r_s_min_ohm").to_bits()))
        .collect();
    outcomes.sort_unstable();
    outcomes.dedup();
    assert!(outcomes.len() >= 2);
}

#[test]
fn file_mode_keeps_row_order_and_reports_bad_rows_in_band() {
    let mut body = format!("{NATIVE_HEADER}\n");
    for k in 0..40 {
        let isc = 5.0 + 0.01 * k as f64;
        body.push_str(&format!("2011-01-22T12:{:02}:00,{isc},21.15,{},16.71,0.4,0.4,0.4,0.4\n", k, isc * 0.92));
    }
    // valid cardinal points, but a fill factor too close to 1 for any feasible domain
    body.push_str("2011-01-22T13:00:00,5.26,21.15,5.2,20.9,0.4,0.4,0.4,0.4\n");
    body.push_str("garbage,row\n");
    let f = temp_csv(&body);
    let out = sdm1(&["domain", "--input", f.path().to_str().unwrap(), "--format", "json"]);
    let rows = json(&out);
    assert_eq!(rows.len(), 41);
    for (k, r) in rows.iter().take(40).enumerate() {
        assert_eq!(r["timestamp"], format!("2011-01-22T12:{k:02}:00"));
        assert_eq!(r["status"], "ok");
    }
    assert!(rows[40]["a_max_v"].is_null());
    assert!(rows[40]["status"].as_str().unwrap().contains("not found"));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let diag: Value = serde_json::from_str(stderr.trim()).expect("diagnostics are JSON in JSON mode");
    assert_eq!(diag["skipped_rows"], 1);
}

#[test]
fn file_mode_uncertainty_uses_percentages() {
    let body = format!("{NATIVE_HEADER}\n2011-01-22T12:05:04,5.26,21.15,4.85,16.71,0,0,0,0\n");
    let f = temp_csv(&body);
    let u = json(&sdm1(&["uncertainty", "--input", f.path().to_str().unwrap(), "--format", "json"]));
    let d = json(&sdm1(&with_nominal("domain", &["--format", "json"])));
    assert_eq!(u[0]["a_max_lo_v"], d[0]["a_max_v"]);
    assert_eq!(u[0]["a_max_hi_v"], d[0]["a_max_v"]);
}

#[test]
fn stats_of_two_rows() {
    let body = format!(
        "{NATIVE_HEADER}\n2011-01-22T12:05:04,5.26,21.15,4.85,16.71,1.0,0.4,2.0,0.2\n2011-01-22T12:10:04,5.26,21.15,4.85,16.71,3.0,0.6,2.0,0.4\n"
    );
    let f = temp_csv(&body);
    let rows = json(&sdm1(&["stats", "--input", f.path().to_str().unwrap(), "--format", "json"]));
    let expect = [
        ("isc", 1.0, 2.0, 3.0, 1.0),
        ("voc", 0.4, 0.5, 0.6, 0.1),
        ("imp", 2.0, 2.0, 2.0, 0.0),
        ("vmp", 0.2, 0.3, 0.4, 0.1),
    ];
    assert_eq!(rows.len(), 4);
    for (r, (name, min, mean, max, sd)) in rows.iter().zip(expect) {
        assert_eq!(r["variable"], name);
        assert_eq!(r["count"], 2);
        assert_eq!((num(r, "min_pct"), num(r, "mean_pct"), num(r, "max_pct"), num(r, "sd_pct")), (min, mean, max, sd));
    }
}

#[test]
fn stats_of_empty_data_is_exit_2() {
    let f = temp_csv(&format!("{NATIVE_HEADER}\n"));
    let out = sdm1(&["stats", "--input", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no rows"));
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("domain.csv");
    let out = sdm1(&with_nominal("domain", &["--output", path.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let direct = sdm1(&with_nominal("domain", &[]));
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
}

#[test]
fn repeated_invocations_are_byte_identical() {
    for args in [
        with_nominal("domain", &[]),
        with_nominal("uncertainty", &["--low", LOW, "--high", HIGH, "--format", "json"]),
        with_nominal("curve", &["--a", "1.3", "--points", "33"]),
    ] {
        let first = sdm1(&args);
        let second = sdm1(&args);
        assert_eq!(first.stdout, second.stdout);
        assert_eq!(first.status.code(), Some(0));
    }
}
