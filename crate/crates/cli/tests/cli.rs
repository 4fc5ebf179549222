use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualsep::load_spec;
use dualsep::spec::IfsSpecFile;
use serde_json::Value;
use tempfile::TempDir;

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/paper_example.json")
}

fn dualsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualsep"))
        .args(args)
        .env_remove("DUALSEP_THREADS")
        .output()
        .unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_spec(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_example_is_the_three_map_system() {
    let text = std::fs::read_to_string(example()).unwrap();
    let spec = IfsSpecFile::from_json(&text).unwrap();
    assert_eq!(spec.maps, ["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"]);
    let ifs = load_spec(&example()).unwrap();
    assert!(ifs.c_max().contains(3.0 / 16.0));
}

#[test]
fn sesc_certify_accepts_the_example() {
    let o = dualsep(&["sesc-certify", "--json", example().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["verdict"], "ACCEPT");
    assert_eq!(r["command"], "sesc-certify");
    assert_eq!(r["input"]["sha256"].as_str().unwrap().len(), 64);
    let margin = r["detail"]["margin"].as_f64().unwrap();
    assert!(margin >= 1.0 / 26.0 - 1e-6);
    for c in r["evidence"].as_array().unwrap() {
        assert!(c["tolerance"].is_number(), "{c}");
        assert!(c["method"].is_string(), "{c}");
    }
}

#[test]
fn expanding_map_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let p = write_spec(
        &dir,
        "bad.json",
        r#"{"epsilon": 0.05, "maps": ["x/2", "2*x"]}"#,
    );
    let o = dualsep(&["validate", &p]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("maps[1]: property (C) violated"), "{e}");
    let o = dualsep(&["sesc-certify", &p]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("maps[1]"));
}

#[test]
fn validate_passes_the_example() {
    let o = dualsep(&["validate", "--json", example().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["verdict"], "VALID");
}

#[test]
fn depth_zero_is_vacuous() {
    let o = dualsep(&[
        "dual-ssc",
        "--depth",
        "0",
        "--json",
        example().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["verdict"], "PASS");
    assert_eq!(r["detail"]["pairs_checked"], 0);
}

#[test]
fn malformed_expression_cites_position() {
    let dir = TempDir::new().unwrap();
    let p = write_spec(
        &dir,
        "m.json",
        r#"{"epsilon": 0.05, "maps": ["x/2", "x/3 + (1"]}"#,
    );
    let o = dualsep(&["sesc-certify", &p]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("maps[1]") && e.contains("position"), "{e}");
}

#[test]
fn schema_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    for (text, path) in [
        (r#"{"epsilon": "a", "maps": ["x/2"]}"#, "epsilon"),
        (r#"{"epsilon": 0.05, "maps": "x/2"}"#, "maps"),
        (r#"{"epsilon": 0.05, "maps": ["x/2", null]}"#, "maps[1]"),
        (
            r#"{"epsilon": 0.05, "maps": ["x/2"], "weights": ["a"]}"#,
            "weights[0]",
        ),
        (r#"{"epsilon": 0.05, "maps": ["x/2"], "extra": 1}"#, "extra"),
    ] {
        let p = write_spec(&dir, "s.json", text);
        let o = dualsep(&["validate", &p]);
        assert_eq!(o.status.code(), Some(3), "{text}");
        assert!(
            stderr(&o).starts_with(&format!("error: {path}:")),
            "{}",
            stderr(&o)
        );
    }
}

#[test]
fn usage_errors_exit_3_with_help() {
    let o = dualsep(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("Usage"));
    let o = dualsep(&["dual-ssc", example().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = dualsep(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("separation-scan"));
    let o = dualsep(&["perturb", example().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn weights_default_to_uniform() {
    let o = dualsep(&[
        "dimension",
        "--json",
        "--samples",
        "200",
        example().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let w: Vec<f64> = json(&o)["parameters"]["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(w, [1.0 / 3.0; 3]);
    let o = dualsep(&[
        "dimension",
        "--weights",
        "0.5,0.5",
        "--samples",
        "200",
        example().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let e = example();
    let args = |t: &'static str| {
        [
            "dimension",
            "--json",
            "--samples",
            "5000",
            "--seed",
            "9",
            "--threads",
            t,
            e.to_str().unwrap(),
        ]
        .map(str::to_owned)
    };
    let run = |a: [String; 9]| {
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        dualsep(&refs).stdout
    };
    let one = run(args("1"));
    assert_eq!(one, run(args("1")));
    assert_eq!(one, run(args("4")));
    let text = String::from_utf8(one).unwrap();
    assert!(text.contains("\"wall_time\": null"));

    let env = Command::new(env!("CARGO_BIN_EXE_dualsep"))
        .args(["dual-ssc", "--depth", "3", "--json", e.to_str().unwrap()])
        .env("DUALSEP_THREADS", "2")
        .output()
        .unwrap();
    let plain = dualsep(&["dual-ssc", "--depth", "3", "--json", e.to_str().unwrap()]);
    assert_eq!(env.stdout, plain.stdout);
}

#[test]
fn floats_are_printed_with_17_digits() {
    let o = dualsep(&["sesc-certify", "--json", example().to_str().unwrap()]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("1.8750000000000000e-1"), "{text}");
}

#[test]
fn timing_fills_wall_time() {
    let o = dualsep(&[
        "sesc-certify",
        "--json",
        "--timing",
        example().to_str().unwrap(),
    ]);
    assert!(json(&o)["wall_time"].as_f64().unwrap() >= 0.0);
}

#[test]
fn separation_scan_csv_columns() {
    let o = dualsep(&[
        "separation-scan",
        "--max-depth",
        "3",
        "--grid",
        "65",
        "--csv",
        example().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rows.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "depth",
            "delta",
            "log_delta_over_n",
            "pairs_scanned",
            "witness_i",
            "witness_j"
        ]
    );
    let records: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 3);
    assert_eq!(&records[0][3], "3");
    assert!(records.iter().all(|r| r[1].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn exact_overlap_exits_1() {
    let dir = TempDir::new().unwrap();
    let p = write_spec(
        &dir,
        "o.json",
        r#"{"epsilon": 0.05, "maps": ["x/3", "x/3 + 2/3", "x/9"]}"#,
    );
    let o = dualsep(&["separation-scan", "--max-depth", "2", "--json", &p]);
    assert_eq!(o.status.code(), Some(1));
    let r = json(&o);
    assert_eq!(r["verdict"], "EXACT_OVERLAP");
    assert_eq!(r["detail"]["rows"][1]["exact_overlap"], true);
}

#[test]
fn pressure_csv_columns() {
    let o = dualsep(&[
        "dimension",
        "--csv",
        "--samples",
        "100",
        "--t-points",
        "3",
        example().to_str().unwrap(),
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,P");
    assert_eq!(lines.len(), 4);
    let p0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(p0, 3f64.ln());
}

#[test]
fn conjugacy_exit_codes() {
    let o = dualsep(&["conjugacy", "--json", example().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["verdict"], "NOT_DETECTED");
    let dir = TempDir::new().unwrap();
    let p = write_spec(
        &dir,
        "t.json",
        r#"{"epsilon": 0.05, "maps": ["x/3", "x/3 + 2/3"]}"#,
    );
    let o = dualsep(&["conjugacy", &p]);
    assert_eq!(o.status.code(), Some(0));
    let o = dualsep(&["conjugacy", &p, "--conjugate-by", "4*x - 4*x^2"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn perturb_separated_system_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("psi.json");
    let o = dualsep(&[
        "perturb",
        "--delta",
        "0.05",
        "--json",
        "--output",
        out.to_str().unwrap(),
        example().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&o);
    assert_eq!(r["detail"]["report"]["bad_pairs"], 0);
    assert!(r["parameters"]["depth"].as_u64().unwrap() >= 1);
    let psi = load_spec(&out).unwrap();
    let phi = load_spec(&example()).unwrap();
    for (a, b) in phi.maps().iter().zip(psi.maps()) {
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            assert_eq!(a.eval(x).unwrap(), b.eval(x).unwrap());
        }
    }
}

#[test]
fn text_output_is_default() {
    let o = dualsep(&["sesc-certify", example().to_str().unwrap()]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("sesc-certify "));
    assert!(text.contains("verdict: ACCEPT"));
    assert!(text.contains("(enclosure)"));
}
