use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn orbitfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitfit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn bad_config_exits_2_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.conf");
    fs::write(&cfg, "seed = 1\nscenario = bogus\n").unwrap();
    let o = orbitfit(&["scenario", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&orbitfit(&["frobnicate"])), 2);
    assert_eq!(code(&orbitfit(&["scenario", "--mode", "noisy"])), 2);
    let o = orbitfit(&["scenario", "--config", "/nonexistent/x.conf"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn gate_violation_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("low.conf");
    fs::write(&cfg, "scenario = torus-reconstruct\nenergy_factor = 0.5\n").unwrap();
    let o = orbitfit(&["scenario", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("E >= C0"), "{}", stderr(&o));
}

#[test]
fn drift_gate_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let o = orbitfit(&[
        "simulate",
        "--dt",
        "0.05",
        "--t-final",
        "5",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("drift"));
}

#[test]
fn failing_threshold_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("strict.conf");
    let out = tmp.path().join("g");
    fs::write(&cfg, "scenario = gronwall-check\nperiod_tol = 1e-15\n").unwrap();
    let o = orbitfit(&[
        "scenario",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let s = summary(&out);
    assert_eq!(s["passed"], false);
}

#[test]
fn scenario_writes_summary_and_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = orbitfit(&[
        "scenario",
        "--scenario",
        "torus-reconstruct",
        "--seed",
        "4",
        "--t-final",
        "30",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(&out);
    for key in [
        "residual_rms",
        "condition",
        "sigma_min",
        "rank_deficient",
        "occupancy",
        "crossing_count",
        "sup_error",
        "wall_clock_seconds",
    ] {
        assert!(!s[key].is_null(), "{key}");
    }
    assert_eq!(s["config"]["seed"], "4");
    assert_eq!(s["config"]["t_final"], "30.0");
    // The echo re-parses to the config that ran.
    let echo = fs::read_to_string(out.join("config.txt")).unwrap();
    let cfg = orbitfit::parse_config(&echo).unwrap();
    assert_eq!(cfg.seed, 4);
    assert_eq!(cfg.output_dir, out);
    let head = fs::read_to_string(out.join("reconstruction.csv")).unwrap();
    assert!(head.starts_with("k1,k2,a_true,b_true,a_fit,b_fit,abs_err\n"));
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,q1,q2,p1,p2,energy"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 6);
    // 17 significant digits: d.dddddddddddddddde±x
    assert_eq!(
        row[1]
            .split('e')
            .next()
            .unwrap()
            .trim_start_matches('-')
            .len(),
        18
    );
}

#[test]
fn reconstruct_reads_a_potential_file() {
    let tmp = tempfile::tempdir().unwrap();
    let pot = tmp.path().join("u.csv");
    fs::write(
        &pot,
        "k1,k2,a,b\n0,0,0.5,0\n1,0,1.0,0\n1,1,0.0,-0.5\n0,2,0.25,0.25\n",
    )
    .unwrap();
    let out = tmp.path().join("r");
    let o = orbitfit(&[
        "reconstruct",
        "--potential",
        pot.to_str().unwrap(),
        "--kmax",
        "2",
        "--t-final",
        "30",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = fs::read_to_string(out.join("potential_fit.csv")).unwrap();
    let u = orbitfit::io::parse_potential_csv::<2>(&fit, None, Path::new("fit")).unwrap();
    assert!((u.coefficient([1, 1]).1 + 0.5).abs() < 1e-9);
    assert!((u.coefficient([0, 2]).0 - 0.25).abs() < 1e-9);
}

#[test]
fn coverage_and_detect_orbits_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = orbitfit(&[
        "coverage",
        "--slope",
        "1.618033988749895",
        "--t-final",
        "200",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cov = fs::read_to_string(out.join("coverage.csv")).unwrap();
    assert_eq!(cov.lines().count(), 1 + 64 * 64);
    assert!(summary(&out)["occupancy"].as_f64().unwrap() > 0.5);

    let cfg = tmp.path().join("s.conf");
    fs::write(&cfg, "scenario = sphere-closed\nensemble = 4\n").unwrap();
    let out = tmp.path().join("d");
    let o = orbitfit(&[
        "detect-orbits",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let orbits = fs::read_to_string(out.join("orbits.csv")).unwrap();
    assert_eq!(orbits.lines().count(), 5);
    assert!(orbits.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn batch_runs_each_config_into_its_own_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.conf");
    let b = tmp.path().join("b.conf");
    fs::write(&a, "scenario = gronwall-check\nensemble = 5\n").unwrap();
    fs::write(&b, "scenario = sphere-closed\nensemble = 3\n").unwrap();
    let out = tmp.path().join("batch");
    let o = orbitfit(&[
        "batch",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut dirs: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    dirs.sort();
    assert_eq!(dirs, ["00-gronwall-check-seed1", "01-sphere-closed-seed1"]);
}
