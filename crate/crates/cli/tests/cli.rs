use std::fs;
use std::process::{Command, Output};

fn rrsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrsplit"))
        .args(args)
        .env_remove("RRSPLIT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_required_flag_exits_2() {
    let o = rrsplit(&["run", "--dt", "0.25"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--case"));
}

#[test]
fn unknown_subcommand_and_flag_are_usage_errors() {
    let o = rrsplit(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    let o = rrsplit(&["run", "--case", "zero", "--dt", "0.25", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn order_mismatch_is_rejected() {
    let o = rrsplit(&["run", "--case", "ph_uniform", "--k", "1", "--dt", "0.25"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not match"));
}

#[test]
fn unknown_case_is_rejected() {
    let o = rrsplit(&["run", "--case", "pp_nowhere", "--dt", "0.25"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rrsplit(&[
        "convergence",
        "--case",
        "ph_uniform",
        "--k",
        "2",
        "--dt-max",
        "0.25",
        "--dt-min",
        "0.0625",
        "--out",
        out,
        "--emit-plot",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("convergence_ph_uniform.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dt,errU,rateU,errW,rateW,errQ,rateQ");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2.50000e-1,"));
    let gp = fs::read_to_string(dir.path().join("convergence_ph_uniform.gp")).unwrap();
    assert!(gp.contains("convergence_ph_uniform.csv"));

    // identical inputs give identical bytes
    let again = tempfile::tempdir().unwrap();
    let o = rrsplit(&[
        "convergence",
        "--case",
        "ph_uniform",
        "--dt-max",
        "0.25",
        "--dt-min",
        "0.0625",
        "--out",
        again.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(again.path().join("convergence_ph_uniform.csv")).unwrap(),
        csv
    );
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rrsplit"))
        .args(["mesh-dump", "--case", "pp_conforming", "--dt", "0.25"])
        .env("RRSPLIT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let dump = fs::read_to_string(dir.path().join("mesh_pp_conforming_dt2.5e-1.txt")).unwrap();
    assert!(dump.starts_with("# nodes 25"));
}

#[test]
fn config_file_supplies_flags_and_cli_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    fs::write(
        &cfg,
        format!(
            "# shared settings\ncase = zero\ndt = 0.5\nt-final = 0.5\nout = {}\ndt-min = 0.1\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let o = rrsplit(&["--config", cfg.to_str().unwrap(), "run", "--dt", "0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("case zero"));
    assert!(text.contains("dt = 0.25, steps = 2"), "{text}");
    assert!(dir.path().join("run_zero_dt2.5e-1_energy.csv").exists());

    fs::write(&cfg, "not_a_flag = 3\n").unwrap();
    let o = rrsplit(&[
        "--config",
        cfg.to_str().unwrap(),
        "run",
        "--case",
        "zero",
        "--dt",
        "0.25",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn energy_audit_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrsplit(&[
        "energy-audit",
        "--k",
        "2",
        "--dt",
        "0.5",
        "--alpha",
        "10",
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(": pass"));
    let csv = fs::read_to_string(dir.path().join("energy_audit_k2_dt5e-1_seed3.csv")).unwrap();
    assert!(csv.starts_with("n,Z,S,Z_plus_cumS"));
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn cutoff_verify_flags_large_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rrsplit(&[
        "cutoff-verify",
        "--dt-max",
        "0.25",
        "--dt-min",
        "0.0625",
        "--out",
        out,
        "--emit-plot",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("cutoff_report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("cutoff_report.gp").exists());

    let o = rrsplit(&[
        "cutoff-verify",
        "--dt-max",
        "0.6",
        "--dt-min",
        "0.6",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("precondition=false"));
}

#[test]
fn run_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrsplit(&[
        "run",
        "--case",
        "pp_conforming",
        "--dt",
        "0.125",
        "--oracle",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("solver: monolithic"));
    let state =
        fs::read_to_string(dir.path().join("run_pp_conforming_dt1.25e-1_state.txt")).unwrap();
    assert!(state.starts_with("2\n"));
}
