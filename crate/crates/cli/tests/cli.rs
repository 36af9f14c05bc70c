//! End-to-end tests through the compiled binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypdelay"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn validate_prints_margins_and_flags_marginal_vessel() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("boundary coupling: FAIL"));
    assert!(text.contains("lambda1"));
    assert!(text.contains("MARGINAL"));
}

#[test]
fn validate_strict_mode_fails_on_marginal_config() {
    let out = bin().arg("validate").arg("--strict").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn unknown_config_key_is_rejected_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nnx = 31\nbogus = 1\n");
    let out = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "stderr: {err}");
    assert!(err.contains("bogus"));
}

#[test]
fn simulate_writes_reparseable_outputs_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--t-end", "2.0", "--stride", "100"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = dir.path().join("trajectory.csv");
    let events = dir.path().join("events.csv");
    let tt = std::fs::read_to_string(&traj).unwrap();
    assert!(tt.starts_with("t,omega,v_lyap,x0,z1,w0,v1,u,dhat,event_flag"));
    let rows = hypdelay::export::read_trajectory_csv(&traj).unwrap();
    assert!(!rows.is_empty());
    let et = std::fs::read_to_string(&events).unwrap();
    assert!(et.starts_with("t,dhat,upsilon_hat"));
}

#[test]
fn open_loop_mode_keeps_the_estimate_column_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--mode", "open_loop", "--t-end", "1.0", "--stride", "50"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = hypdelay::export::read_trajectory_csv(&dir.path().join("trajectory.csv")).unwrap();
    let first = rows[0].dhat;
    assert!(rows.iter().all(|r| r.dhat == first));
    assert!(rows.iter().all(|r| r.u == 0.0));
}

#[test]
fn kernel_tables_depend_on_the_delay_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let d1 = dir.path().join("d100");
    let d2 = dir.path().join("d025");
    for (d, out_dir) in [("1.0", &d1), ("0.25", &d2)] {
        let out = bin()
            .args(["kernels", "--delay", d, "--nx", "21"])
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read_to_string(d1.join("k2.csv")).unwrap();
    let b = std::fs::read_to_string(d2.join("k2.csv")).unwrap();
    assert_ne!(a, b, "k2 tables at different delays must differ");
    // Stage-1 tables are delay-independent: identical files.
    let a1 = std::fs::read_to_string(d1.join("alpha_w.csv")).unwrap();
    let b1 = std::fs::read_to_string(d2.join("alpha_w.csv")).unwrap();
    assert_eq!(a1, b1);
}

#[test]
fn config_written_by_the_tool_reloads_identically() {
    use hypdelay::config::RunConfig;
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.dhat0 = 1.5;
    cfg.k = vec![-13.0];
    cfg.t_end = 12.5;
    let path = dir.path().join("saved.cfg");
    cfg.save(&path).unwrap();
    let back = RunConfig::load(&path).unwrap();
    assert_eq!(cfg, back);
    // And the binary accepts it.
    let out = bin().arg("validate").arg("--config").arg(&path).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn reproduce_dcv_emits_four_cases_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["reproduce-dcv", "--t-end", "8.0", "--stride", "100"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for case in ["open_loop", "nonadaptive_d025", "adaptive_d025", "adaptive_d150"] {
        assert!(dir.path().join(case).join("trajectory.csv").exists(), "{case}");
        assert!(dir.path().join(case).join("events.csv").exists(), "{case}");
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("case,"));
    assert_eq!(summary.lines().count(), 5);
    // First-event estimates appear in the stdout report.
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("adaptive_d025"));
    assert!(text.contains("adaptive_d150"));
}

#[test]
fn env_var_sets_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--t-end", "0.5", "--stride", "100"])
        .env("HYPDELAY_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("out").join("trajectory.csv").exists());
}
