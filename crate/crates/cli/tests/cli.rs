use std::process::{Command, Output};

use feedcap_cli::commands::{
    BodePayload, DarePayload, LqgPayload, SearchPayload, SimulatePayload, SkPayload, SumcapPayload, VerifyPayload,
};
use serde::de::DeserializeOwned;
use serde_json::Value;

fn feedcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feedcap")).args(args).output().expect("binary runs")
}

fn feedcap_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feedcap")).args(args).env(key, val).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn payload<T: DeserializeOwned>(o: &Output) -> T {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(o)).unwrap();
    serde_json::from_value(v["payload"].clone()).unwrap()
}

#[test]
fn sumcap_reports_the_crossing_point() {
    let o = feedcap(&["sumcap", "--n", "2", "--power", "1"]);
    let p: SumcapPayload = payload(&o);
    assert!((p.phi - 1.3111078).abs() < 1e-6);
    assert_eq!(p.sum_capacity, p.c1);
    assert!((p.sum_capacity - 0.5 * (1.0 + 2.0 * p.phi).log2()).abs() < 1e-14);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["command"]["command"], "sumcap");
    assert_eq!(v["config"]["base"], "bits");
    assert!(v.get("wall_time_ms").is_none());
}

#[test]
fn nats_base_changes_units() {
    let bits: SumcapPayload = payload(&feedcap(&["sumcap", "--n", "3", "--power", "2"]));
    let nats: SumcapPayload = payload(&feedcap(&["--base", "nats", "sumcap", "--n", "3", "--power", "2"]));
    assert!((bits.sum_capacity * std::f64::consts::LN_2 - nats.sum_capacity).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    let o = feedcap(&["sumcap", "--n", "2", "--pwr", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(feedcap(&["sumcap", "--n", "1", "--power", "1"]).status.code(), Some(2));
    assert_eq!(feedcap(&["sumcap", "--n", "2", "--power", "-1"]).status.code(), Some(2));
    assert_eq!(feedcap(&["--base", "decibels", "sumcap", "--n", "2", "--power", "1"]).status.code(), Some(2));
    assert_eq!(feedcap(&["p2p", "search", "--power", "1", "--grid", "400"]).status.code(), Some(2));
    assert_eq!(feedcap_env(&["sumcap", "--n", "2", "--power", "1"], "FEEDCAP_THREADS", "zero").status.code(), Some(2));
    assert_eq!(feedcap(&["--help"]).status.code(), Some(0));
}

#[test]
fn numeric_failures_exit_3() {
    let o = feedcap(&["dare", "--n", "3", "--beta", "1.1", "--method", "iterate", "--k0", "zero"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive definite"));
    assert!(o.stdout.is_empty());
}

#[test]
fn dare_methods_agree() {
    let c: DarePayload = payload(&feedcap(&["dare", "--n", "3", "--beta", "1.1"]));
    let i: DarePayload = payload(&feedcap(&["dare", "--n", "3", "--beta", "1.1", "--method", "iterate"]));
    assert!(c.solution.residual <= 1e-10 && c.control_residual <= 1e-10);
    let d = feedcap_core::matrix::frobenius_distance(&c.solution.g, &i.solution.g).unwrap();
    assert!(d < 1e-8);
    assert!(c.min_eigenvalue > 0.0);
}

#[test]
fn lqg_meets_power() {
    let p: LqgPayload = payload(&feedcap(&["lqg", "--n", "3", "--power", "2"]));
    assert!(p.spectral_radius < 1.0);
    assert!(p.power_per_sender.iter().all(|g| (g - 2.0).abs() < 1e-6));
    assert!(p.asymptotic_powers.iter().all(|g| (g - 2.0).abs() < 1e-6));
}

#[test]
fn simulate_is_byte_reproducible_across_thread_counts() {
    let args = ["simulate", "--n", "3", "--power", "2", "--steps", "15", "--trials", "3000", "--seed", "5"];
    let a = feedcap_env(&args, "FEEDCAP_THREADS", "1");
    let b = feedcap_env(&args, "FEEDCAP_THREADS", "4");
    let c = feedcap(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let p: SimulatePayload = payload(&a);
    assert_eq!(p.report.trials, 3000);
    for (mc, ex) in p.report.mse_exponents.iter().zip(&p.exact.mse_exponents) {
        assert!(((mc - ex) / ex).abs() < 0.05);
    }
}

#[test]
fn simulate_trace_and_timing() {
    let o = feedcap(&["--timing", "simulate", "--n", "2", "--beta", "1.3", "--steps", "5", "--trials", "100", "--trace"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["wall_time_ms"].is_u64());
    let p: SimulatePayload = payload(&o);
    assert_eq!(p.trace.unwrap().len(), 6);
    assert_eq!(p.exact_trace.unwrap().len(), 6);
}

#[test]
fn p2p_commands() {
    let sk: SkPayload = payload(&feedcap(&["p2p", "sk", "--power", "1", "--trials", "2000"]));
    let target = 0.5 * 2f64.ln();
    for v in [sk.instability, sk.rate_integral, sk.bode_integral] {
        assert!((v - target).abs() < 1e-6);
    }
    assert!((sk.power_integral - 1.0).abs() < 1e-6);

    let bode: BodePayload = payload(&feedcap(&["p2p", "bode", "--poles", "1.3,1.7"]));
    assert!((bode.bode_integral - (1.3f64 * 1.7).ln()).abs() < 1e-6);
    let bode: BodePayload = payload(&feedcap(&["p2p", "bode", "--poles", "1.5", "--gain", "-1.2"]));
    assert!(bode.difference < 1e-6);
    let o = feedcap(&["p2p", "bode", "--poles", "1.5", "--gain", "0.1"]);
    assert_eq!(o.status.code(), Some(3));

    let s: SearchPayload = payload(&feedcap(&["p2p", "search", "--alpha", "0.5", "--pole-coef", "0.2", "--power", "2", "--grid", "100x101"]));
    assert!(s.result.rate > 0.0);
    assert!(s.result.power_used <= 2.0 * (1.0 + 1e-9));
}

#[test]
fn p2p_csv_samples() {
    let o = feedcap(&["p2p", "sk", "--power", "1", "--csv", "--quad-points", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "omega,sensitivity,noise_psd,output_psd,log_sensitivity");
    assert_eq!(lines.count(), 65);
}

#[test]
fn verify_all_passes() {
    let o = feedcap(&["verify", "all", "--n", "3", "--power", "2", "--seed", "1"]);
    let p: VerifyPayload = payload(&o);
    assert!(p.passed);
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().filter(|l| l.starts_with("PASS")).count(), p.checks.len());
    for suite in ["converse", "dare", "lqg", "code", "p2p"] {
        assert!(p.checks.iter().any(|c| c.suite == suite));
    }
}

#[test]
fn verify_failure_exits_3() {
    let o = feedcap(&["verify", "converse", "--n", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn power_sweep_is_monotone() {
    let o = feedcap(&["sweep", "power", "--n", "2", "--from", "0.1", "--to", "10", "--count", "25"]);
    let text = stdout(&o);
    let ps = column(&text, "P");
    let caps = column(&text, "sum_capacity");
    assert_eq!(ps.len(), 25);
    assert!(ps.windows(2).all(|w| w[0] < w[1]));
    assert!(caps.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn empty_sweep_is_header_only() {
    let o = feedcap(&["sweep", "power", "--from", "5", "--to", "1"]);
    assert_eq!(stdout(&o), "N,P,phi,rho,sum_capacity,beta,G_jj,error\n");
    let o = feedcap(&["sweep", "power", "--from", "1", "--to", "5", "--count", "0"]);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn sweep_marks_failed_rows() {
    let o = feedcap(&["sweep", "n", "--power", "1", "--from", "1", "--to", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(!rows[0][7].is_empty() && rows[0][2].is_empty());
    assert!(rows[1][7].is_empty());
}

#[test]
fn sender_sweep_matches_golden_file() {
    let o = feedcap(&["sweep", "n", "--power", "1", "--from", "2", "--to", "6"]);
    let got = stdout(&o);
    let want = include_str!("golden/sweep_n_power1.csv");
    assert_eq!(got.lines().next(), want.lines().next());
    for name in ["N", "P", "phi", "rho", "sum_capacity", "beta", "G_jj"] {
        let (g, w) = (column(&got, name), column(want, name));
        assert_eq!(g.len(), w.len());
        for (a, b) in g.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{name}: {a} vs {b}");
        }
    }
    // per-sender rate falls as senders are added
    let per: Vec<f64> = column(&got, "sum_capacity").iter().zip(column(&got, "N")).map(|(c, n)| c / n).collect();
    assert!(per.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn payloads_round_trip() {
    let o = feedcap(&["sumcap", "--n", "4", "--power", "3"]);
    let p: SumcapPayload = payload(&o);
    let again: SumcapPayload = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(p, again);
    let d: DarePayload = payload(&feedcap(&["dare", "--n", "2", "--beta", "1.5"]));
    let again: DarePayload = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
    assert_eq!(d, again);
}
