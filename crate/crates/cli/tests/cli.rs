use std::process::{Command, Output};

use qbask_cli::config::{Command as Cmd, ExperimentConfig};
use qbask_cli::experiments::{run_moments, run_moments_with};

fn qbask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbask"))
        .args(args)
        .env_remove("QBASK_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn parse_csv(bytes: &[u8]) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::str::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn q_int(m: u32, q: f64) -> f64 {
    if q == 1.0 {
        m as f64
    } else {
        (1.0 - q.powi(m as i32)) / (1.0 - q)
    }
}

#[test]
fn figure1_default_run() {
    let out = qbask(&["figure1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&out.stdout);
    assert_eq!(header, ["x", "g", "m=10", "m=30", "m=80"]);
    assert_eq!(rows.len(), 201);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
}

#[test]
fn figure1_reproduces_e1() {
    let out = qbask(&["figure1", "--function", "e1"]);
    assert_eq!(code(&out), 0);
    let (_, rows) = parse_csv(&out.stdout);
    for r in rows {
        for v in &r[2..] {
            assert!((v - r[1]).abs() <= 1e-8);
        }
    }
}

#[test]
fn figure1_single_degree_matches_second_moment() {
    let out = qbask(&["figure1", "--m", "10"]);
    assert_eq!(code(&out), 0);
    let (_, rows) = parse_csv(&out.stdout);
    let (q, mq) = (0.95, q_int(10, 0.95));
    let max_err = rows.iter().map(|r| (r[2] - r[1]).abs()).fold(0.0, f64::max);
    let expected = rows
        .iter()
        .map(|r| r[0] * r[0] / (q * mq) + r[0] / mq)
        .fold(0.0, f64::max);
    assert!((max_err - expected).abs() <= 1e-8, "{max_err} vs {expected}");
}

#[test]
fn figure2_spot_values() {
    let out = qbask(&["figure2"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = parse_csv(&out.stdout);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 1.0);
    let col = |label: &str| header.iter().position(|h| h == label).unwrap();
    assert!((last[col("m=10")] - last[1] - 0.2).abs() <= 1e-8);
    assert!((last[col("m=60")] - last[1] - 1.0 / 30.0).abs() <= 1e-8);
    for m in ["m=10", "m=30", "m=60"] {
        assert!((rows[0][col(m)] - rows[0][1]).abs() <= 1e-8);
    }
}

#[test]
fn figure3_includes_unit_q_reference() {
    let out = qbask(&["figure3", "--q", "0.9,1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = parse_csv(&out.stdout);
    let at2 = rows.iter().find(|r| r[0] == 2.0).unwrap();
    let mq = q_int(50, 0.9);
    let expected = 4.0 / (0.9 * mq) + 2.0 / mq;
    assert!((expected - 0.647783).abs() <= 1e-6);
    assert!((at2[2] - at2[1] - expected).abs() <= 1e-8, "{at2:?}");
    assert!((at2[3] - at2[1] - 0.12).abs() <= 1e-8);
}

#[test]
fn haar_fails_the_closed_form_check() {
    let out = qbask(&["figure2", "--wavelet", "haar", "--check"]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("closed-form error check failed"));
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        &["figure1", "--points", "1"][..],
        &["figure1", "--m", "0"],
        &["figure1", "--m", "30,10"],
        &["figure1", "--q", "1.5"],
        &["figure1", "--function", "x +"],
        &["figure1", "--domain", "2:1"],
        &["figure1", "--wavelet", "daubechies"],
        &["figure1", "--tail-tol", "0"],
        &["korovkin", "--format", "svg"],
        &["density", "--q", "0.5"],
        &["figure1", "--no-such-flag"],
    ] {
        let out = qbask(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn non_convergence_exits_3() {
    let out = qbask(&["figure1", "--max-terms", "3"]);
    assert_eq!(code(&out), 3);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerical failure"));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig3.csv");
    let to_file = qbask(&["figure3", "--points", "41", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&to_file), 0);
    assert!(to_file.stdout.is_empty());
    let to_stdout = qbask(&["figure3", "--points", "41"]);
    assert_eq!(std::fs::read(&path).unwrap(), to_stdout.stdout);
}

#[test]
fn svg_output() {
    let out = qbask(&["figure1", "--format", "svg"]);
    assert_eq!(code(&out), 0);
    let svg = String::from_utf8(out.stdout).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 4);
    assert!(svg.contains("(x-1/5)*(x-4/9)"));
}

#[test]
fn runs_are_byte_identical() {
    for args in [
        &["figure3", "--points", "51"][..],
        &["moments"],
        &["evaluate", "--family", "q-baskakov-kantorovich", "--q", "0.9,1"],
        &["density", "--set", "squares", "--horizon", "10000"],
        &["korovkin", "--m", "10,20", "--domain", "0:10", "--points", "21"],
    ] {
        let a = qbask(args);
        let b = qbask(args);
        assert_eq!(code(&a), 0, "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_qbask"))
            .args(["figure1", "--points", "51"])
            .env("QBASK_THREADS", threads)
            .output()
            .unwrap()
    };
    let (one, four) = (run("1"), run("4"));
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(code(&run("many")), 2);
}

#[test]
fn density_command() {
    let out = qbask(&["density", "--expect", "0.5"]);
    assert_eq!(code(&out), 0);
    let (header, rows) = parse_csv(&out.stdout);
    assert_eq!(header, ["n", "q_density"]);
    assert_eq!(rows.last().unwrap(), &vec![1000.0, 0.5]);
    assert_eq!(code(&qbask(&["density", "--expect", "0.3"])), 1);
    let q = qbask(&["density", "--q", "1.01", "--set", "all"]);
    let (_, rows) = parse_csv(&q.stdout);
    assert!((rows.last().unwrap()[1] - 1.0).abs() < 1e-12);
}

#[test]
fn korovkin_and_rate_commands() {
    let out = qbask(&["korovkin", "--m", "10,20", "--domain", "0:10", "--points", "21"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&out.stdout);
    assert_eq!(header[0], "n");
    assert_eq!(rows.len(), 2);
    let out = qbask(&["rate", "--m", "10,20", "--domain", "0:10", "--points", "21"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&out.stdout);
    let norm = header.iter().position(|h| h == "norm").unwrap();
    let bound = header.iter().position(|h| h == "bound").unwrap();
    assert!(rows.iter().all(|r| r[norm] <= r[bound]));
}

#[test]
fn check_flag_suppresses_output() {
    let out = qbask(&["moments", "--check"]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
}

#[test]
fn moments_table_passes_and_tampering_is_caught() {
    let config = ExperimentConfig::defaults(Cmd::Moments);
    let outcome = run_moments(&config).unwrap();
    assert!(outcome.passed);
    assert_eq!(outcome.exit_code(), 0);

    // a basis with one weight nudged by 1e-6 must be detected
    let tampered = |j: u32, spec: &qbask_core::operators::OperatorSpec, w: &qbask_core::operators::Wavelet, x: f64| {
        qbask_core::operators::wavelet_q_operator(|t| t.powi(j as i32), spec, w, x).map(|v| v * (1.0 + 1e-6))
    };
    let outcome = run_moments_with(&config, &tampered).unwrap();
    assert!(!outcome.passed);
    assert_eq!(outcome.exit_code(), 1);
    assert!(outcome.messages[0].starts_with("moment check failed"));
}
