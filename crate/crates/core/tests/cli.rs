use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn heatflux() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatflux"))
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heatflux-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn convergence_with_verify_succeeds_and_writes_outputs() {
    let dir = scratch_dir("conv");
    let out = heatflux()
        .args(["convergence", "--problem", "S1", "--levels", "2", "--p", "1", "--q", "0", "--coupling", "tau~h", "--verify"])
        .arg("--output")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn adaptive_summary_has_documented_keys() {
    let dir = scratch_dir("adaptive");
    let out = heatflux()
        .args(["adaptive", "--problem", "S4", "--theta", "0.5", "--steps", "3", "--level", "1", "--verify"])
        .arg("--output")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("adaptive_summary.json")).unwrap()).unwrap();
    for key in ["eta_X", "error_X", "effectivity", "delta_quad", "gamma_max", "global_efficiency_ratio"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    let csv = fs::read_to_string(dir.join("adaptive_estimators.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,element,eta_F,eta_J"));
    let kkt = fs::read_to_string(dir.join("adaptive_kkt.csv")).unwrap();
    assert_eq!(kkt.lines().next(), Some("patch_id,step,mode,constraint_res,optimality_res"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn solve_reads_config_file() {
    let dir = scratch_dir("solve");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "problem = S2\np = 1\nq = 2\nlevels = 1\nsteps = 2\nt_end = 0.5\n").unwrap();
    let out = heatflux().arg("solve").arg("--config").arg(&cfg).arg("--verify").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["problem"], "S2");
    assert!(record["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn scan_prints_one_row_per_cell() {
    let out = heatflux()
        .args(["scan", "--problem", "S1", "--hmin", "0.3", "--hmax", "0.8", "--taumin", "0.1", "--taumax", "0.25"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().count() >= 3);
}

#[test]
fn bad_input_exits_with_error_code() {
    let out = heatflux().args(["convergence", "--problem", "S9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = heatflux().args(["solve", "--config", "/nonexistent/file.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
