use std::path::Path;
use std::process::{Command, Output};

fn rankopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankopt")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> String {
    let prefix = format!("{key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key} in\n{text}")).to_string()
}

#[test]
fn gen_reports_omega_for_full_size_presets() {
    for (preset, omega, pct) in [("fig1-k20", "238800", "94.03"), ("fig1-k80", "940800", "76.48")] {
        let o = rankopt(&["gen", "--preset", preset]);
        assert!(o.status.success());
        let s = stdout(&o);
        assert_eq!(value(&s, "omega"), omega);
        assert_eq!(value(&s, "missing_percent"), pct);
    }
}

#[test]
fn infeasible_spec_exits_2() {
    let o = rankopt(&["gen", "--n", "10", "--rank", "2", "--budget", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible"));
}

#[test]
fn bad_input_exits_1() {
    let o = rankopt(&["gen", "--n", "10", "--rank", "20", "--budget", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = rankopt(&["gen", "--preset", "nope"]);
    assert_eq!(o.status.code(), Some(1));
}

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--n", "40", "--rank", "3", "--budget", "3", "--seed", "7", "--max-iters", "80", "--no-timing"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", out.to_str().unwrap()]);
    rankopt(&args)
}

#[test]
fn run_errors_and_ratefit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_small(&out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace_sd.csv", "trace_rf.csv", "summary_sd.txt", "summary_rf.txt", "x_sd/U.csv", "x_rf/sigma.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("trace_sd.csv")).unwrap();
    assert!(header.starts_with("n,f,g_minus,alpha,backtracks,rank,sigma1,sigmak,displacement,rel_err_full,rel_err_mask,wall_ms\n"));

    let prob = dir.path().join("problem");
    let g = rankopt(&["gen", "--n", "40", "--rank", "3", "--budget", "3", "--seed", "7", "--out", prob.to_str().unwrap()]);
    assert!(g.status.success());
    let e = rankopt(&["errors", "--problem", prob.to_str().unwrap(), "--x", out.join("x_sd").to_str().unwrap()]);
    assert!(e.status.success());
    let summary = std::fs::read_to_string(out.join("summary_sd.txt")).unwrap();
    let from_cli: f64 = value(&stdout(&e), "rel_mask").parse().unwrap();
    let from_run: f64 = value(&summary, "final_rel_mask").parse().unwrap();
    assert!((from_cli - from_run).abs() <= 1e-10 * from_run.max(1e-300) + 1e-15, "{from_cli} vs {from_run}");

    let r = rankopt(&["ratefit", "--trace", out.join("trace_sd.csv").to_str().unwrap()]);
    assert!(r.status.success());
    assert!(["exp", "power", "unavailable"].contains(&value(&stdout(&r), "rate_model").as_str()));
}

#[test]
fn run_is_byte_reproducible_and_config_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_small(&a, &["--alg", "rf"]).status.success());
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "n = 40\nr = 3\nk = 3\nos = 3.0\nseed = 7\n\n[solver]\nmax_iters = 80\nrecord_time = false\n").unwrap();
    let o = rankopt(&["run", "--config", cfg.to_str().unwrap(), "--alg", "rf", "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace_rf.csv", "summary_rf.txt", "x_rf/U.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("trace_sd.csv").exists());
}

#[test]
fn solver_failure_exits_3() {
    // A single allowed backtrack from a huge initial step cannot satisfy the
    // sufficient-decrease test.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "n = 40\nr = 3\nk = 3\nseed = 7\n\n[solver]\nmax_iters = 50\n\n[solver.armijo]\nmax_backtracks = 1\ninitial_floor = 1e6\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = rankopt(&["run", "--config", cfg.to_str().unwrap(), "--alg", "sd", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(out.join("trace_sd.csv").exists());
}
