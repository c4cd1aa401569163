use std::path::{Path, PathBuf};
use std::process::Command;

use contdef::commands::{sweep_rows, SweepParam};
use contdef::report::certify;
use contdef::{CliError, Scenario};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scenario"))
}

fn text(name: &str) -> String {
    std::fs::read_to_string(scenario_path(name)).unwrap()
}

fn contdef() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_contdef"));
    cmd.env_remove(contdef::OUT_DIR_ENV);
    cmd
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("test.scenario");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn scenarios_round_trip() {
    for name in ["paper_global", "paper_local_wind"] {
        let first = Scenario::from_toml(&text(name)).unwrap();
        let second = Scenario::from_toml(&first.to_toml().unwrap()).unwrap();
        assert_eq!(first, second);
    }
}

#[test]
fn optional_sections_round_trip() {
    let mut s = Scenario::from_toml(&text("paper_global")).unwrap();
    s.network.burst = Some(contdef::scenario::BurstSection {
        good_to_bad: 0.01,
        bad_to_good: 0.3,
        bad_drop_probability: 0.8,
    });
    s.mission.intermediate = Some(contdef::scenario::WaypointSection { leg: 2, fraction: 0.5 });
    s.faults.stalls.push(contdef::scenario::StallEntry {
        agent: 4,
        start_s: 8.0,
        duration_s: 0.3,
    });
    s.simulation.output_dir = Some("somewhere".into());
    let back = Scenario::from_toml(&s.to_toml().unwrap()).unwrap();
    assert_eq!(s, back);
    assert!(back.resolve().is_ok());
}

#[test]
fn unknown_keys_are_rejected() {
    let body = text("paper_global").replace("epsilon_m = 0.28", "epsilon_m = 0.28\nepsilon_cm = 28");
    assert!(matches!(Scenario::from_toml(&body), Err(CliError::Parse(_))));
    let body = text("paper_global").replace("seed = 1", "seed = 1\nspeed = 3");
    assert!(Scenario::from_toml(&body).is_err());
}

#[test]
fn certify_reports_contracted_edge() {
    let out = contdef().arg("certify").arg(scenario_path("paper_global")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("min leader edge            3.71"), "{stdout}");
    assert!(stdout.contains("PASS"));

    let out = contdef()
        .args(["certify", "--json"])
        .arg(scenario_path("paper_global"))
        .output()
        .unwrap();
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["passed"], true);
}

#[test]
fn larger_delta_raises_lambda_min() {
    let base = Scenario::from_toml(&text("paper_global")).unwrap();
    let lambda = |delta: f64| {
        let mut s = base.clone();
        s.formation.delta_m = delta;
        certify(&s.resolve().unwrap()).unwrap().margins.lambda_min
    };
    let (small, large) = (lambda(0.2), lambda(0.4));
    assert!(large > small);
    // (δ + ε) / (δ_max + ε) with δ_max unchanged
    assert!((large / small - (0.4 + 0.28) / (0.2 + 0.28)).abs() < 1e-12);
}

#[test]
fn uncertifiable_plan_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // a contraction well below lambda_min violates the certificate
    let body = text("paper_global").replace(
        "segment_duration_s = 3.75",
        "segment_duration_s = 3.75\ncontraction_scale = 0.5",
    );
    let path = write_scenario(dir.path(), &body);
    let status = contdef().arg("certify").arg(&path).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let out_dir = dir.path().join("out");
    let status = contdef().arg("run").arg(&path).arg("--out").arg(&out_dir).status().unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn collinear_leaders_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = text("paper_global").replace("y_m = 4.08763990586255", "y_m = 0.0");
    let path = write_scenario(dir.path(), &body);
    let out = contdef().arg("certify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("formation"), "{stderr}");
}

#[test]
fn missing_file_and_bad_args_exit_two() {
    let status = contdef().args(["certify", "/nonexistent.scenario"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = contdef()
        .arg("sweep")
        .arg(scenario_path("paper_global"))
        .args(["--param", "v_max"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn run_writes_outputs_and_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("global");
    let status = contdef()
        .arg("run")
        .arg(scenario_path("paper_global"))
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in [
        "trace.csv",
        "deliveries.csv",
        "statistics.csv",
        "summary.json",
        "report.txt",
        "panel_a_boundary.csv",
        "panel_b_nearest_neighbor.csv",
        "panel_c_local_deviation.csv",
        "panel_d_global_deviation.csv",
    ] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(out_dir.join("panel_b_nearest_neighbor.csv")).unwrap();
    assert!(header.starts_with("t_s,phase,agent_1_m,agent_2_m,agent_3_m,agent_4_m,agent_5_m,two_epsilon_m"));
    let deliveries = std::fs::read_to_string(out_dir.join("deliveries.csv")).unwrap();
    assert!(deliveries.starts_with("send_time_s,deliver_time_s,destination,dropped"));

    let again = contdef()
        .arg("run")
        .arg(scenario_path("paper_global"))
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(again.code(), Some(2));
    let forced = contdef()
        .arg("run")
        .arg(scenario_path("paper_global"))
        .arg("--out")
        .arg(&out_dir)
        .arg("--force")
        .status()
        .unwrap();
    assert_eq!(forced.code(), Some(0));
}

#[test]
fn wind_scenario_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = contdef()
        .arg("run")
        .arg(scenario_path("paper_local_wind"))
        .env(contdef::OUT_DIR_ENV, dir.path().join("wind"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("wind").join("trace.csv").is_file());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("global_deviation"));
}

#[test]
fn seed_is_irrelevant_without_noise_or_loss() {
    let dir = tempfile::tempdir().unwrap();
    let quiet = text("paper_global")
        .replace("drop_probability = 0.05", "drop_probability = 0.0")
        .replace("noise_std_mps2 = 0.3", "noise_std_mps2 = 0.0");
    let mut traces = Vec::new();
    for seed in [1, 99] {
        let body = quiet.replace("seed = 1", &format!("seed = {seed}"));
        let path = dir.path().join(format!("s{seed}.scenario"));
        std::fs::write(&path, body).unwrap();
        let out = dir.path().join(format!("out{seed}"));
        let status = contdef().arg("run").arg(&path).arg("--out").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(0));
        traces.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn drop_sweep_error_does_not_shrink() {
    let base = Scenario::from_toml(&text("paper_global")).unwrap();
    let rows = sweep_rows(&base, SweepParam::DropProbability, &[0.0, 0.3]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].dropped, 0);
    assert!(rows[1].dropped > 0);
    assert!(rows[1].global.mean >= rows[0].global.mean);
    assert!(matches!(
        sweep_rows(&base, SweepParam::Delta, &[]),
        Err(CliError::Usage(_))
    ));
}

#[test]
fn sweep_prints_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = contdef()
        .arg("sweep")
        .arg(scenario_path("paper_global"))
        .args(["--param", "v_max", "--values", "0,0.5,1.0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("       v_max_mps"));
}
