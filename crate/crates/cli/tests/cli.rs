use std::io::Write;
use std::process::{Command, Output, Stdio};

use unbias::bounds::{BoundFamily, VariationReport};
use unbias::stats::format_sig;

fn unbias(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_unbias"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn unbias");
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn tv_exact_small_case() {
    assert_eq!(stdout(&unbias(&["tv", "--m", "2", "--alpha", "0.2", "--method", "exact"], b"")), "0.11\n");
}

#[test]
fn tv_matches_library() {
    for (family, name) in [(BoundFamily::Exact, "exact"), (BoundFamily::Naive, "naive"), (BoundFamily::Linear, "linear")] {
        let expected = VariationReport::for_alpha(family, 1000, 1e-3).unwrap().value;
        let out = stdout(&unbias(&["tv", "--m", "1000", "--alpha", "0.001", "--method", name], b""));
        assert_eq!(out.trim(), format_sig(expected, 12), "{name}");
    }
}

#[test]
fn calibrate_linear_at_one_million() {
    let out = stdout(&unbias(&["calibrate", "--m", "1000000", "--rho", "0.01", "--method", "linear"], b""));
    let alpha: f64 = out.trim().parse().unwrap();
    assert!((alpha - 2.5066e-5).abs() < 1e-9, "{alpha}");
}

#[test]
fn calibrate_with_drift_reports_both() {
    let out = stdout(&unbias(&["calibrate", "--m", "1000", "--rho", "0.01", "--p0", "0.5", "--beta", "0.1"], b""));
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("alpha ") && lines[1].starts_with("delta "));
}

#[test]
fn vn_of_equal_pairs_is_empty() {
    let out = unbias(&["normalize", "--method", "vn"], b"0011");
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn normalize_methods() {
    assert_eq!(stdout(&unbias(&["normalize", "--method", "vn"], b"0110")), "01");
    assert_eq!(stdout(&unbias(&["normalize", "--method", "parity", "--block", "2"], b"01101")), "11");
}

#[test]
fn generate_is_reproducible() {
    let args = ["generate", "-n", "64", "--p0", "0.5", "--seed", "42"];
    let a = stdout(&unbias(&args, b""));
    assert_eq!(a, "1101000110111110100000100011111000110011110111011101000011100110");
    assert_eq!(a, stdout(&unbias(&["generate", "-n", "64", "--p0", "0.5"], b"")));
}

#[test]
fn exit_codes() {
    assert_eq!(unbias(&["tv", "--bogus"], b"").status.code(), Some(1));
    assert_eq!(unbias(&["tv", "--m", "2", "--alpha", "0.2", "--method", "linear"], b"").status.code(), Some(1));
    assert_eq!(unbias(&["tv", "--m", "10", "--alpha", "1.5"], b"").status.code(), Some(1));
    assert_eq!(unbias(&["generate", "-n", "10", "--p0", "1.2"], b"").status.code(), Some(1));
    assert_eq!(unbias(&["normalize"], b"01x1").status.code(), Some(1));
    assert_eq!(unbias(&["analyze", "-i", "/nonexistent/bits"], b"").status.code(), Some(2));
    assert_eq!(unbias(&["--help"], b"").status.code(), Some(0));
    assert_eq!(unbias(&["--version"], b"").status.code(), Some(0));
}

#[test]
fn dist_of_constant_source() {
    let out = stdout(&unbias(&["dist", "-n", "2", "--p0", "0.25"], b""));
    assert_eq!(out, "string,probability\n00,0.0625\n01,0.1875\n10,0.1875\n11,0.5625\n");
    let out = stdout(&unbias(&["dist", "-n", "6", "--m", "2", "--p0", "0.3"], b""));
    assert_eq!(out, "string,probability\n00,0.25\n01,0.25\n10,0.25\n11,0.25\n");
    assert_eq!(stdout(&unbias(&["dist", "-n", "4", "--p0", "0.3", "--independence"], b"")), "independent\n");
}

#[test]
fn sweep_and_markov_write_csv() {
    let out = stdout(&unbias(&["sweep", "--m", "100", "--alphas", "0.01,0.1"], b""));
    assert_eq!(out.lines().next(), Some("m,alpha,tv_exact,tv_linear,tv_naive"));
    assert_eq!(out.lines().count(), 3);
    let out = stdout(&unbias(&["markov", "--k", "1", "--kappa", "0.05", "--samples", "500"], b""));
    assert_eq!(out.lines().next(), Some("k,kappa,m,n,tv_exact,tv_empirical,samples,seed"));
    assert!(out.lines().nth(1).unwrap().starts_with("1,0.05,2,16,"));
}

#[test]
fn pipeline_removes_bias() {
    let dir = std::env::temp_dir().join(format!("unbias-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let raw = dir.join("raw.txt");
    let clean = dir.join("clean.txt");
    let raw_s = raw.to_str().unwrap();
    let clean_s = clean.to_str().unwrap();
    stdout(&unbias(&["generate", "-n", "1000000", "--p0", "0.7", "--seed", "7", "-o", raw_s], b""));
    stdout(&unbias(&["normalize", "--method", "vn", "-i", raw_s, "-o", clean_s], b""));
    let report = stdout(&unbias(&["analyze", "-i", clean_s, "--max-m", "1"], b""));
    let line = report.lines().find(|l| l.starts_with("ones ")).unwrap();
    let fields: Vec<_> = line.split_whitespace().collect();
    let sigma: f64 = fields[5].parse().unwrap();
    assert!(sigma.abs() <= 4.0, "{report}");
    let n: f64 = report.lines().next().unwrap()["bits ".len()..].parse().unwrap();
    assert!((n - 1e6 * 0.21).abs() < 4.0 * (1e6f64 * 0.21 * 0.79).sqrt(), "{n}");
    std::fs::remove_dir_all(&dir).unwrap();
}
