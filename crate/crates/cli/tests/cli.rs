use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn qrloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrloop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", stderr(out));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qrloop-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Data rows of a CSV table as header-keyed maps.
fn csv_rows(text: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| {
            // code labels are quoted and may contain commas
            let mut fields = Vec::new();
            let mut cur = String::new();
            let mut quoted = false;
            for c in l.chars() {
                match c {
                    '"' => quoted = !quoted,
                    ',' if !quoted => fields.push(std::mem::take(&mut cur)),
                    c => cur.push(c),
                }
            }
            fields.push(cur);
            header.iter().cloned().zip(fields).collect()
        })
        .collect()
}

fn field(row: &[(String, String)], key: &str) -> f64 {
    row.iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no column {key}"))
        .1
        .parse()
        .unwrap()
}

#[test]
fn rate_reports_reference_raw_rate() {
    let out = qrloop(&[
        "rate", "--L", "1000", "--n", "10", "--code", "gkp", "--s", "18",
    ]);
    assert!(out.status.success());
    assert!(
        stdout(&out).contains("raw rate         3.5"),
        "{}",
        stdout(&out)
    );

    let v = json(&qrloop(&[
        "rate", "--L", "1000", "--n", "10", "--code", "gkp", "--s", "18", "--json",
    ]));
    let r = v["result"]["raw_rate_hz"].as_f64().unwrap();
    assert!((r - 3.5).abs() < 0.175, "{r}");
    assert_eq!(v["manifest"]["tool"], "qrloop");
}

#[test]
fn single_photon_qpc_halves_per_swap() {
    let v = json(&qrloop(&[
        "rate", "--L", "1000", "--n", "10", "--m", "1", "--code", "qpc", "--a", "1", "--b", "1",
        "--p-loop", "1", "--json",
    ]));
    let skf = v["result"]["skf"].as_f64().unwrap();
    assert!(skf > 0.0 && skf <= 0.5f64.powi(9), "{skf}");
}

#[test]
fn invalid_inputs_exit_with_validation_code() {
    let out = qrloop(&[
        "rate", "--L", "1000", "--n", "10", "--code", "gkp", "--s", "18", "--p-link", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("p_link"));

    let out = qrloop(&["rate", "--L", "1000", "--n", "0", "--code", "ideal"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("segments"));

    let out = qrloop(&["rate", "--L", "1000", "--n", "10", "--code", "surface"]);
    assert_eq!(out.status.code(), Some(2));

    let path = scratch("bad.toml");
    std::fs::write(
        &path,
        "[chain]\ntotal_length_km = 1000\nsegments = 10\np_link = 1.5\n[code]\nkind = \"ideal\"\n",
    )
    .unwrap();
    let out = qrloop(&["rate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("p_link"));
}

#[test]
fn domain_errors_exit_with_code_3() {
    // p underflows next to 1 for a 3000 km segment
    let out = qrloop(&[
        "rate", "--L", "3000", "--n", "1", "--m", "1", "--code", "gkp", "--s", "18",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn json_record_reingests_to_identical_result() {
    let first = qrloop(&[
        "rate",
        "--L",
        "2345.6789",
        "--n",
        "47",
        "--code",
        "steane-gkp",
        "--s",
        "15.3",
        "--json",
    ]);
    let v1 = json(&first);
    let path = scratch("record.json");
    std::fs::write(&path, &first.stdout).unwrap();
    let v2 = json(&qrloop(&[
        "rate",
        "--config",
        path.to_str().unwrap(),
        "--json",
    ]));
    assert_eq!(v1["result"], v2["result"]);
    assert_eq!(v1["config"], v2["config"]);
}

#[test]
fn toml_config_with_flag_override() {
    let path = scratch("run.toml");
    std::fs::write(
        &path,
        "[chain]\ntotal_length_km = 1000\nsegments = 100\nloops = 20\n\n[code]\nkind = \"gkp\"\nsqueezing_db = 18\n",
    )
    .unwrap();
    let from_file = json(&qrloop(&[
        "rate",
        "--config",
        path.to_str().unwrap(),
        "--json",
    ]));
    assert_eq!(from_file["result"]["diagnostics"]["loops"], 20);
    let overridden = json(&qrloop(&[
        "rate",
        "--config",
        path.to_str().unwrap(),
        "--n",
        "50",
        "--s",
        "19",
        "--json",
    ]));
    assert_eq!(overridden["result"]["diagnostics"]["segments"], 50);
    assert_eq!(overridden["config"]["code"]["squeezing_db"], 19.0);
}

#[test]
fn single_cell_sweep_matches_rate() {
    let rate = json(&qrloop(&[
        "rate",
        "--L",
        "1000",
        "--n",
        "20",
        "--m",
        "100",
        "--code",
        "steane-gkp",
        "--s",
        "15",
        "--json",
    ]));
    let out = qrloop(&[
        "sweep",
        "--L",
        "1000",
        "--code",
        "steane-gkp",
        "--s",
        "15",
        "--segments",
        "20",
        "--loops",
        "100",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with(
        "code,total_length_km,segments,loops,segment_length_km,raw_rate_hz,skf,skr_hz,epsilon,p,eta_loop,tau0_s\r\n"
    ));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    for key in ["skf", "raw_rate_hz", "epsilon", "skr_hz"] {
        assert_eq!(
            field(&rows[0], key),
            rate["result"][key].as_f64().unwrap(),
            "{key}"
        );
    }
}

#[test]
fn long_segment_grid_has_nonzero_cells() {
    let out = qrloop(&[
        "sweep",
        "--L",
        "1000",
        "--code",
        "steane-gkp",
        "--s",
        "15",
        "--segments",
        "10,20,50,100",
        "--loops",
        "log:1:1000:13",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 4 * 13);
    assert!(rows
        .iter()
        .any(|r| field(r, "segments") == 20.0 && field(r, "skf") > 0.0));
}

#[test]
fn distance_curve_is_nonincreasing() {
    let out_path = scratch("curve.csv");
    let out = qrloop(&[
        "sweep",
        "--n",
        "100",
        "--code",
        "gkp",
        "--s",
        "20",
        "--lengths",
        "lin:1000:12000:12",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&std::fs::read_to_string(&out_path).unwrap());
    let skf: Vec<f64> = rows.iter().map(|r| field(r, "skf")).collect();
    assert_eq!(skf.len(), 12);
    assert!(skf.windows(2).all(|w| w[1] <= w[0]), "{skf:?}");
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{}.manifest.json", out_path.display())).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["outputs"][0], out_path.to_str().unwrap());
}

#[test]
fn sweep_config_file() {
    let path = scratch("sweep.toml");
    std::fs::write(
        &path,
        "[chain]\ntotal_length_km = 5000\n\n[code]\nkind = \"qpc\"\na = 5\nb = 21\n\n[sweep]\nkind = \"nm_grid\"\nsegments = [50, 100, 200]\nloops = \"1,10,100\"\n",
    )
    .unwrap();
    let out = qrloop(&[
        "sweep",
        "--config",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
}

#[test]
fn thresholds() {
    let out = qrloop(&[
        "threshold",
        "--code",
        "gkp",
        "--L",
        "1000",
        "--n",
        "100",
        "--json",
    ]);
    let gkp = json(&out)[0]["result"]["threshold"].as_f64().unwrap();
    assert!((gkp - 17.0).abs() <= 0.5, "{gkp}");
    let out = qrloop(&[
        "threshold",
        "--code",
        "steane-gkp",
        "--L",
        "1000",
        "--n",
        "100",
        "--json",
    ]);
    let steane = json(&out)[0]["result"]["threshold"].as_f64().unwrap();
    assert!((2.0..=5.0).contains(&(gkp - steane)), "{gkp} {steane}");

    let out = qrloop(&[
        "threshold",
        "--code",
        "gkp",
        "--L",
        "1000",
        "--n",
        "100",
        "--high",
        "10",
        "--m-max",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("[5, 10]"), "{}", stderr(&out));
}

#[test]
fn validate_small_suite() {
    let out = qrloop(&[
        "validate",
        "--samples",
        "20000",
        "--seed",
        "7",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with(
        "quantity,model,parameters,analytic,mc_mean,mc_std_error,samples,z,gated\r\n"
    ));
    assert!(text.contains("chain"));
    let out = qrloop(&["validate", "--samples", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_from_environment() {
    let a = Command::new(env!("CARGO_BIN_EXE_qrloop"))
        .args(["validate", "--samples", "70000", "--format", "json"])
        .env("QRLOOP_THREADS", "1")
        .output()
        .unwrap();
    let b = qrloop(&[
        "validate",
        "--samples",
        "70000",
        "--format",
        "json",
        "--threads",
        "3",
    ]);
    assert_eq!(json(&a)["rows"], json(&b)["rows"]);
}
