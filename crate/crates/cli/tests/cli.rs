use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mg1_core::oracle::gth;
use mg1_core::{presets, FiniteChainSpec};
use serde_json::Value;
use tempfile::TempDir;

fn mg1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mg1"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn preset(dir: &TempDir, name: &str) -> PathBuf {
    let path = dir.path().join(format!("{name}.json"));
    let o = mg1(&["preset", name]);
    assert_eq!(code(&o), 0);
    fs::write(&path, &o.stdout).unwrap();
    path
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Rows of a CSV file as `f64` columns, empty cells as NaN.
fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| {
                    if c.is_empty() {
                        f64::NAN
                    } else {
                        c.parse().unwrap()
                    }
                })
                .collect()
        })
        .collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_reports_and_classifies_errors() {
    let dir = TempDir::new().unwrap();
    let sc1 = preset(&dir, "sc1");
    let o = mg1(&["validate", s(&sc1)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((report["sigma"].as_f64().unwrap() + 0.3).abs() < 1e-15);
    assert_eq!(report["negative_drift"], Value::Bool(true));

    let broken = fs::read_to_string(&sc1).unwrap().replacen("0.3", "0.35", 1);
    let broken = write(&dir, "broken.json", &broken);
    let o = mg1(&["validate", s(&broken)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sum_k A(k)"), "{}", stderr(&o));

    let o = mg1(&["validate", s(&dir.path().join("missing.json"))]);
    assert_eq!(code(&o), 64);

    let garbled = write(&dir, "garbled.json", "{\"m0\": 1");
    assert_eq!(code(&mg1(&["validate", s(&garbled)])), 2);
}

#[test]
fn preset_round_trips_through_the_format() {
    for name in ["sc1", "mm1", "mp2", "hc1"] {
        let o = mg1(&["preset", name]);
        let text = stdout(&o);
        let spec = mg1_core::ChainSpec::from_json(&text).unwrap();
        assert_eq!(spec.to_json().unwrap().trim(), text.trim());
    }
    assert_eq!(code(&mg1(&["preset", "nope"])), 64);
}

#[test]
fn solve_infinite_and_finite() {
    let dir = TempDir::new().unwrap();
    let sc1 = preset(&dir, "sc1");
    let out = dir.path().join("inf");
    let o = mg1(&["solve", s(&sc1), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv(&out.join("pi.csv"));
    assert_eq!(header, ["level", "phase", "value"]);
    for r in &rows {
        assert!((r[2] - 0.6 * 0.4f64.powi(r[0] as i32)).abs() < 1e-12);
    }
    assert!(
        json(&out.join("summary.json"))["normalization_gap"]
            .as_f64()
            .unwrap()
            < 1e-12
    );

    let out = dir.path().join("fin");
    let o = mg1(&[
        "solve",
        s(&sc1),
        "--mode",
        "finite",
        "--N",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv(&out.join("pi.csv"));
    let p = FiniteChainSpec::last_column(&presets::sc1(), 3)
        .unwrap()
        .assemble();
    let x = gth(&p).unwrap();
    assert_eq!(rows.len(), 4);
    for (r, v) in rows.iter().zip(x.iter()) {
        assert!((r[2] - v).abs() < 1e-15);
    }

    let o = mg1(&["solve", s(&sc1), "--mode", "finite", "--out", s(&out)]);
    assert_eq!(code(&o), 64);
}

#[test]
fn deviation_checks_and_window_errors() {
    let dir = TempDir::new().unwrap();
    let sc1 = preset(&dir, "sc1");
    let out = dir.path().join("dev");
    let o = mg1(&[
        "deviation",
        s(&sc1),
        "--K",
        "12",
        "--L",
        "4",
        "--check-poisson",
        "--check-diff",
        "--N",
        "5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = json(&out.join("summary.json"));
    assert!(summary["poisson"]["max_residual"].as_f64().unwrap() < 1e-10);
    assert!(summary["difference"]["max_error"].as_f64().unwrap() < 1e-12);
    assert!(stdout(&o).contains("poisson residual"));

    let (header, rows) = csv(&out.join("deviation.csv"));
    assert_eq!(header, ["k", "l", "i", "j", "H", "E"]);
    // H(1;0) = -2 and E(k;1) = 2 on this chain
    let h10 = rows.iter().find(|r| r[0] == 1.0 && r[1] == 0.0).unwrap();
    assert!((h10[4] + 2.0).abs() < 1e-10);
    let e31 = rows.iter().find(|r| r[0] == 3.0 && r[1] == 1.0).unwrap();
    assert!((e31[5] - 2.0).abs() < 1e-10);

    let o = mg1(&[
        "deviation",
        s(&sc1),
        "--K",
        "3",
        "--L",
        "2",
        "--check-diff",
        "--N",
        "5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("K >= 5"), "{}", stderr(&o));
    let o = mg1(&[
        "deviation",
        s(&sc1),
        "--K",
        "3",
        "--L",
        "2",
        "--check-diff",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 64);
}

#[test]
fn study_heavy_and_light_tails() {
    let dir = TempDir::new().unwrap();
    let hc1 = preset(&dir, "hc1");
    let out = dir.path().join("study");
    let o = mg1(&[
        "study",
        s(&hc1),
        "--grid",
        "25,50,100,200,400",
        "--k-list",
        "0,1,2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv(&out.join("study.csv"));
    assert_eq!(header, ["N", "k", "phase", "r_N", "pibar_N", "Fbar_N"]);
    assert_eq!(rows.len(), 15);
    let summary = json(&out.join("study.json"));
    assert_eq!(summary["pass"], Value::Bool(true));
    assert_eq!(summary["assumptions_ok"], Value::Bool(true));
    assert_eq!(summary["last_level_ratio"]["trend_ok"], Value::Bool(true));

    let sc1 = preset(&dir, "sc1");
    let out = dir.path().join("light");
    let o = mg1(&["study", s(&sc1), "--grid", "10,20", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("assumptions violated"));
    let summary = json(&out.join("study.json"));
    assert_eq!(summary["assumptions_ok"], Value::Bool(false));
    assert!(summary["context"]
        .as_str()
        .unwrap()
        .starts_with("assumption-violated"));

    let mm1 = preset(&dir, "mm1");
    let o = mg1(&["study", s(&mm1), "--grid", "10,20", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        json(&out.join("study.json"))["assumptions_ok"],
        Value::Bool(false)
    );

    assert_eq!(
        code(&mg1(&["study", s(&hc1), "--grid", "", "--out", s(&out)])),
        64
    );
    assert_eq!(
        code(&mg1(&[
            "study",
            s(&hc1),
            "--grid",
            "10",
            "--tail-model",
            "weibull",
            "--out",
            s(&out)
        ])),
        64
    );
}

#[test]
fn loss_grid_asymptotics_and_simulation() {
    let dir = TempDir::new().unwrap();
    let mm1 = write(
        &dir,
        "mm1.json",
        r#"{"lambda0": [[-1.0]], "lambda1": [[1.0]]}"#,
    );
    let exp = r#"{"kind": "exponential", "rate": 2.0}"#;
    let out = dir.path().join("mm1");
    let o = mg1(&[
        "loss",
        s(&mm1),
        "--svc",
        exp,
        "--N-grid",
        "1..20",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv(&out.join("loss.csv"));
    assert_eq!(header, ["N", "loss_exact", "loss_asymptotic", "ratio"]);
    assert_eq!(rows.len(), 20);
    for r in &rows {
        let n = r[0] as i32;
        let closed = 0.5 * 0.5f64.powi(n + 1) / (1.0 - 0.5f64.powi(n + 2));
        assert!((r[1] - closed).abs() < 1e-10, "N={n}");
        assert!(r[2].is_nan());
    }

    let o = mg1(&[
        "loss",
        s(&mm1),
        "--svc",
        exp,
        "--N-grid",
        "1..3",
        "--asymptotic",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 65);

    let pareto = write(
        &dir,
        "svc.json",
        r#"{"kind": "pareto", "shape": 3.5, "scale": 2.5}"#,
    );
    let half = write(
        &dir,
        "half.json",
        r#"{"lambda0": [[-0.5]], "lambda1": [[0.5]]}"#,
    );
    let out = dir.path().join("pareto");
    let o = mg1(&[
        "loss",
        s(&half),
        "--svc",
        s(&pareto),
        "--N-grid",
        "25,50,100,200",
        "--asymptotic",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv(&out.join("loss.csv"));
    let dev: Vec<f64> = rows.iter().map(|r| (r[3] - 1.0).abs()).collect();
    assert!(
        dev.windows(2).all(|w| w[1] < w[0]) && dev[3] < 0.4,
        "{dev:?}"
    );
    for r in &rows {
        assert!((r[1] / r[2] - r[3]).abs() < 1e-12);
    }

    let run = |tag: &str| {
        let out = dir.path().join(tag);
        let o = mg1(&[
            "loss",
            s(&mm1),
            "--svc",
            exp,
            "--N-grid",
            "4",
            "--simulate",
            "7",
            "--arrivals",
            "200000",
            "--replications",
            "10",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(out.join("loss.csv")).unwrap()
    };
    let (a, b) = (run("sim_a"), run("sim_b"));
    assert_eq!(a, b);
    let (header, rows) = csv(&dir.path().join("sim_a").join("loss.csv"));
    assert_eq!(header.len(), 7);
    assert!((rows[0][4] - rows[0][1]).abs() < 4.0 * rows[0][5]);

    let bad = write(
        &dir,
        "bad.json",
        r#"{"lambda0": [[-1.0]], "lambda1": [[2.0]]}"#,
    );
    assert_eq!(
        code(&mg1(&[
            "loss",
            s(&bad),
            "--svc",
            exp,
            "--N-grid",
            "1",
            "--out",
            s(&out)
        ])),
        2
    );
}

#[test]
fn verify_light_and_heavy() {
    let dir = TempDir::new().unwrap();
    for name in ["sc1", "mp2", "hc1"] {
        let path = preset(&dir, name);
        let o = mg1(&["verify", s(&path)]);
        assert_eq!(code(&o), 0, "{name}: {}", stdout(&o));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["checks"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn usage_errors() {
    assert_eq!(code(&mg1(&[])), 64);
    assert_eq!(code(&mg1(&["solve"])), 64);
    assert_eq!(
        code(&mg1(&[
            "solve", "x.json", "--mode", "sideways", "--out", "o"
        ])),
        64
    );
    let help = mg1(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("Exit status"));
}
