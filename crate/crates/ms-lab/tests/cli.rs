use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ms-lab"));
    c.env_remove("MS_LAB_PRECISION");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Runs a command with --format json, checks the exit code and validates
/// the document against the shipped schema of that command.
fn json_doc(args: &[&str], code: i32) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json", "--deterministic"]);
    let o = run(&all);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&stdout(&o)).expect("valid json");
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{}.schema.json", args[0]));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{args:?} violates its schema: {errors:?}");
    doc
}

fn summary(doc: &Value, key: &str) -> f64 {
    doc["summary"][key].as_f64().unwrap_or_else(|| panic!("summary {key} missing"))
}

#[test]
fn volume_slopes() {
    let d = json_doc(&["volume", "-n", "2", "--t", "10,100,1000"], 0);
    assert!((summary(&d, "slope") + 1.0).abs() < 0.01);
    assert_eq!(d["rows"].as_array().unwrap().len(), 3);
    let d = json_doc(&["volume", "-n", "3", "--t", "10,100,1000,10000"], 0);
    assert!((summary(&d, "slope") + 3.0).abs() < 0.1);
    let r = json_doc(&["volume", "-n", "2", "--t", "100", "--eps", "1e-3"], 0);
    let v = r["rows"][0][1].as_f64().unwrap();
    assert!((v - (std::f64::consts::PI / 6.0 - 0.005)).abs() < 1e-8);
}

#[test]
fn l1_breakdown() {
    let d = json_doc(&["l1", "-n", "2", "-k", "1", "-H", "10", "--delta", "0.05", "-T", "100", "--eta", "0.9"], 0);
    let bd = &d["breakdown"];
    let want = summary(&d, "mellin_at_n") * summary(&d, "xi_nk") * summary(&d, "vol_c");
    assert!((bd["main"].as_f64().unwrap() - want).abs() < 1e-10 * want);
    assert_eq!(bd["cross_check"]["consistent"], Value::Bool(true));
    assert!(d["checks"][0]["pass"].as_bool().unwrap());
}

#[test]
fn inner_kappa_and_default_eta2() {
    let d = json_doc(&["inner", "-n", "4", "--k1", "2", "--k2", "2", "--eta1", "0.1", "--eta2", "0.9", "--kappa-only"], 0);
    assert!((summary(&d, "kappa") - 6.0).abs() < 1e-12);
    let d = json_doc(&["inner", "-n", "2", "--k1", "1", "--k2", "1", "--eta1", "0.2", "--kappa-only"], 0);
    assert_eq!(d["manifest"]["parameters"]["eta2"], "0.9");
    let d = json_doc(&["inner", "-n", "2", "--k1", "1", "--k2", "1", "--eta1", "0.2", "--eta2", "0.6"], 0);
    assert_eq!(d["breakdown"]["cross_check"]["consistent"], Value::Bool(true));
    assert!(d["rows"].as_array().unwrap().iter().any(|r| r[0] == "res_remain"));
}

#[test]
fn second_moment_runs_and_checks_its_hypothesis() {
    let d = json_doc(&["second-moment", "-n", "2", "-k", "1", "--n1", "1e5", "--n2", "1.05e5", "--eta1", "0.4", "--eta2", "0.6", "-T", "10"], 0);
    assert!(summary(&d, "budget_over_main") < 1.0);
    let o = run(&["second-moment", "-n", "2", "-k", "1", "--n1", "10", "--n2", "10.5", "-T", "100"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["second-moment", "-n", "2", "-k", "1", "--n1", "10", "--n2", "30"]);
    assert_eq!(o.status.code(), Some(2), "too wide a window is a usage error");
}

#[test]
fn count_matches_gcd_oracle() {
    let d = json_doc(&["count", "-n", "2", "-k", "1", "-p", "50"], 0);
    assert_eq!(d["rows"][0][1].as_u64(), d["summary"]["gcd_scan"].as_u64());
    let ratio = d["rows"][0][1].as_f64().unwrap() / summary(&d, "three_p2_over_pi");
    assert!((ratio - 1.0).abs() < 0.01);
}

#[test]
fn random_twist_is_seeded() {
    let a = json_doc(&["count", "-n", "3", "-k", "1", "-p", "4", "--g", "random", "--seed", "7"], 0);
    let b = json_doc(&["count", "-n", "3", "-k", "1", "-p", "4", "--g", "random", "--seed", "7"], 0);
    let c = json_doc(&["count", "-n", "3", "-k", "1", "-p", "4", "--g", "random", "--seed", "8"], 0);
    assert_eq!(a, b);
    assert_eq!(a["manifest"]["seed"], 7);
    assert_ne!(a["rows"], c["rows"]);
}

#[test]
fn discrepancy_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let d = json_doc(&["discrepancy", "-n", "4", "-k", "2", "--p-grid", "2:20", "--eps", "0.01", "--plot-csv", plot.to_str().unwrap()], 0);
    let rows = d["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 19);
    for r in rows {
        let (p, disc, norm) = (r[0].as_f64().unwrap(), r[3].as_f64().unwrap(), r[4].as_f64().unwrap());
        assert!((norm - disc / p.powf(summary(&d, "exponent"))).abs() < 1e-9 * disc.abs().max(1.0));
    }
    assert!((summary(&d, "classical_exponent") - 3.5).abs() < 1e-12);
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_path(&plot).unwrap();
    let recs: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(&recs[0][0], "#manifest");
    assert_eq!(recs[1].iter().collect::<Vec<_>>(), vec!["log_p", "log_abs_d"]);
    assert_eq!(recs.len(), 2 + 19);
}

#[test]
fn cancel_check_n5_r2() {
    let d = json_doc(&["cancel-check", "-n", "5", "--r", "2"], 0);
    let rows = d["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[4] == 2 && r[6].as_f64().unwrap() >= 1.9));
}

#[test]
fn saddle_check_reports_failing_invariants() {
    let d = json_doc(&["saddle-check", "--k", "100,400,1600"], 1);
    assert_eq!(d["rows"].as_array().unwrap().len(), 3);
    let checks = d["checks"].as_array().unwrap();
    assert!(checks[0]["pass"].as_bool().unwrap(), "error at k = 1600 is within 0.2");
    assert!(checks.iter().any(|c| !c["pass"].as_bool().unwrap()));
}

#[test]
fn selftest_all_green() {
    let d = json_doc(&["selftest"], 0);
    assert_eq!(d["summary"]["passed"], d["summary"]["total"]);
    let o = run(&["selftest"]);
    let text = stdout(&o);
    assert!(text.contains("lattice-gcd-oracle") && !text.contains("FAIL"));
}

#[test]
fn exit_codes() {
    for args in [
        vec!["volume"],
        vec!["volume", "-n", "1"],
        vec!["discrepancy", "-n", "4", "-k", "2", "--p-grid", "20:2"],
        vec!["count", "-n", "3", "-k", "3", "-p", "2"],
        vec!["selftest", "--jobs", "0"],
        vec!["volume", "-n", "2", "--format", "xml"],
        vec!["bogus"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
    let o = run(&["count", "-n", "4", "-k", "2", "-p", "30", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("try p <="));
    let o = bin().args(["volume", "-n", "2"]).env("MS_LAB_PRECISION", "quad").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn precision_switches() {
    let d = json_doc(&["volume", "-n", "3", "--dd"], 0);
    assert_eq!(d["manifest"]["versions"]["precision"], "dd");
    let o = bin().args(["volume", "-n", "3", "--format", "json"]).env("MS_LAB_PRECISION", "dd").output().unwrap();
    let d: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(d["manifest"]["versions"]["precision"], "dd");
    let plain = json_doc(&["volume", "-n", "3"], 0);
    assert_eq!(plain["manifest"]["versions"]["precision"], "double");
    let (a, b) = (plain["rows"][2][1].as_f64().unwrap(), d["rows"][2][1].as_f64().unwrap());
    assert!((a - b).abs() < 1e-13);
}

#[test]
fn deterministic_across_runs_and_jobs() {
    for args in [
        vec!["discrepancy", "-n", "3", "-k", "1", "--p-grid", "1:8", "--g", "random", "--seed", "3"],
        vec!["l1", "-n", "3", "-k", "1", "-T", "50"],
        vec!["selftest", "--only", "monte-carlo"],
    ] {
        let mut outs = Vec::new();
        for jobs in ["1", "2", "2", "4"] {
            let mut a = args.clone();
            a.extend(["--deterministic", "--format", "json", "--jobs", jobs]);
            let o = run(&a);
            assert_eq!(o.status.code(), Some(0));
            outs.push(o.stdout);
        }
        assert!(outs.windows(2).all(|w| w[0] == w[1]), "{args:?} differs across runs or worker counts");
    }
}

#[test]
fn csv_is_rfc4180() {
    let o = run(&["cancel-check", "-n", "4", "--k1", "2", "--k2", "2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("\r\n"));
    assert!(text.contains("\"("), "permutations contain commas and must be quoted");
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_reader(text.as_bytes());
    let recs: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(&recs[0][0], "#manifest");
    let manifest: Value = serde_json::from_str(&recs[0][1]).unwrap();
    assert_eq!(manifest["command"], "cancel-check");
    assert_eq!(recs[1].len(), 8);
    assert!(recs[2..].iter().all(|r| r.len() == 8 && r[2].starts_with('(')));
}

#[test]
fn out_file_and_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vol.json");
    let o = run(&["volume", "-n", "2", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let d: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(d["manifest"]["command"], "volume");
    let text = stdout(&run(&["volume", "-n", "2"]));
    assert!(text.starts_with("# ms-lab volume") && text.contains("slope:"));
}
