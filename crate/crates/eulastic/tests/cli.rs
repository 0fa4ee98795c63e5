//! End-to-end tests of the command line binary: exit codes, output
//! files, headers and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("eulastic-it-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &std::path::Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eulastic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn eval_writes_energies_and_admissibility() {
    let dir = scratch("eval");
    let cfg = write_config(
        &dir,
        "run.cfg",
        "[mesh]\ndim = 2\nresolution = 8 8\n[sweep]\neps_list = 0.125\n[diagnostics]\npitch = 0.0078125\nsamples = 400\n",
    );
    let out_dir = dir.join("out");
    let out = run(&["eval", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 0);
    let energies = std::fs::read_to_string(out_dir.join("energies.csv")).unwrap();
    assert!(energies.starts_with("# mesh.dim = 2"));
    let sharp: f64 = energies
        .lines()
        .find(|l| l.starts_with("sharp_interface"))
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((sharp - 1.0).abs() < 1e-12, "sharp interface {sharp}");
    assert!(energies.contains("diffuse_interface,0.125,"));
    assert!(out_dir.join("admissibility.txt").exists());
}

#[test]
fn eval_wrap_warns_but_succeeds() {
    let dir = scratch("wrap");
    let cfg = write_config(
        &dir,
        "run.cfg",
        "[mesh]\ndim = 2\nresolution = 12 96\n[boundary]\nmap = wrap\n[sweep]\neps_list =\n[diagnostics]\npitch = 0.00390625\nsamples = 1000\n",
    );
    let out_dir = dir.join("out");
    let out = run(&["eval", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let adm = std::fs::read_to_string(out_dir.join("admissibility.txt")).unwrap();
    assert!(adm.contains("cn_satisfied false"));
    assert!(adm.contains("warning_cn_violated true"));
}

#[test]
fn config_errors_exit_2() {
    let dir = scratch("badcfg");
    let cfg = write_config(&dir, "run.cfg", "[mesh]\ndim = 7\n");
    let out = run(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dim"));

    let missing = dir.join("nope.cfg");
    let out = run(&["eval", "--config", missing.to_str().unwrap()]);
    assert_exit(&out, 2);

    let cfg = write_config(&dir, "typo.cfg", "[mesh]\ndim = 2\nresolutio = 4 4\n");
    let out = run(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn infeasible_state_exits_3() {
    let dir = scratch("fold");
    // orientation-reversing affine map: det < 0 everywhere
    let cfg = write_config(
        &dir,
        "run.cfg",
        "[mesh]\ndim = 2\nresolution = 4 4\n[boundary]\nmap = affine\nmatrix = -1 0 0 1\n",
    );
    let out_dir = dir.join("out");
    let out = run(&["eval", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("det"));
}

fn minimize_config() -> &'static str {
    "[mesh]\ndim = 2\nresolution = 8 8\n\
     [model]\nphase0.d = 50\nphase0.well_det = 0.5\n\
     [phase]\ninit = noisy\nvalue = 0.5\namplitude = 0.01\n\
     [optimize]\neps = 0.25\nmax_iterations = 4000\ngradient_tolerance = 1e-6\ncn_pitch = 0.015625\nschedule = alternate\n\
     [run]\nseed = 9\n"
}

#[test]
fn minimize_writes_log_summary_snapshot() {
    let dir = scratch("minimize");
    let cfg = write_config(&dir, "run.cfg", minimize_config());
    let out_dir = dir.join("out");
    let out = run(&[
        "minimize",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("converged true"), "{summary}");
    let log = std::fs::read_to_string(out_dir.join("iterations.csv")).unwrap();
    assert!(log.lines().any(|l| l.starts_with("0,1,")));
    // the snapshot must round-trip
    let snap = std::fs::read_to_string(out_dir.join("snapshot.txt")).unwrap();
    let (mesh, fields) = eulastic::mesh::read_snapshot(&snap).unwrap();
    assert_eq!(mesh.dim(), 2);
    assert_eq!(fields.len(), 2);
}

#[test]
fn minimize_is_deterministic_per_seed() {
    let dir = scratch("determ");
    let cfg = write_config(&dir, "run.cfg", minimize_config());
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out_dir in [&a, &b] {
        let out = run(&[
            "minimize",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "77",
        ]);
        assert_exit(&out, 0);
    }
    // the headers echo the differing --out paths; everything else must
    // match byte for byte
    let strip = |path: PathBuf| -> String {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# output.dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let log_a = strip(a.join("iterations.csv"));
    let log_b = strip(b.join("iterations.csv"));
    assert_eq!(log_a, log_b, "iteration logs are not bit-identical");
}

#[test]
fn sweep_emits_table_and_snapshots() {
    let dir = scratch("sweep");
    let cfg = write_config(
        &dir,
        "run.cfg",
        "[mesh]\ndim = 2\nresolution = 40 40\n[sweep]\neps_list = 0.2\nslice_count = 25\n",
    );
    let out_dir = dir.join("out");
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 0);
    let table = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let row = table.lines().find(|l| l.starts_with("0.2,")).expect("sweep row");
    let f_int: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((f_int - 1.0).abs() < 0.05, "F_int {f_int}");
    assert!(out_dir.join("snapshot_eps_0.txt").exists());

    // increasing lists are rejected as configuration errors
    let bad = write_config(
        &dir,
        "bad.cfg",
        "[mesh]\ndim = 2\n[sweep]\neps_list = 0.1 0.2\n",
    );
    let out = run(&["sweep", "--config", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 2);
}

#[test]
fn verify_reports_clean_suite() {
    let dir = scratch("verify");
    let cfg = write_config(&dir, "run.cfg", "[mesh]\ndim = 2\n");
    let out_dir = dir.join("out");
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let worst: f64 = stdout
        .lines()
        .find(|l| l.contains("worst discrepancy"))
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(worst < 1e-10, "worst {worst}");
    let table = std::fs::read_to_string(out_dir.join("verify.csv")).unwrap();
    assert!(!table.contains(",false"));
}

#[test]
fn gradcheck_reports_small_errors() {
    let dir = scratch("gradcheck");
    let cfg = write_config(
        &dir,
        "run.cfg",
        "[mesh]\ndim = 2\nresolution = 6 6\n[optimize]\neps = 0.2\n",
    );
    let out_dir = dir.join("out");
    let out =
        run(&["gradcheck", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let worst: f64 = stdout
        .lines()
        .find(|l| l.contains("max relative error"))
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(worst < 1e-5, "max relative error {worst}");
    assert!(out_dir.join("gradcheck.csv").exists());
}

#[test]
fn eval_accepts_imported_mesh_files() {
    let dir = scratch("import");
    // export a mesh, then run against the file instead of the builder
    let mesh = eulastic::mesh::build_box_mesh(2, &[1.0, 1.0], &[6, 6]).unwrap();
    let snapshot = eulastic::mesh::write_snapshot(&mesh, &[]);
    let mesh_path = dir.join("mesh.txt");
    std::fs::write(&mesh_path, snapshot).unwrap();
    let cfg = write_config(
        &dir,
        "run.cfg",
        &format!(
            "[mesh]\nfile = {}\n[sweep]\neps_list =\n[diagnostics]\npitch = 0.01\nsamples = 200\n",
            mesh_path.display()
        ),
    );
    let out_dir = dir.join("out");
    let out = run(&["eval", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_exit(&out, 0);
    let energies = std::fs::read_to_string(out_dir.join("energies.csv")).unwrap();
    let sharp: f64 = energies
        .lines()
        .find(|l| l.starts_with("sharp_interface"))
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((sharp - 1.0).abs() < 1e-12, "imported-mesh sharp interface {sharp}");
}

#[test]
fn compare_same_state_is_zero() {
    let dir = scratch("compare");
    let cfg = write_config(
        &dir,
        "run.cfg",
        "[mesh]\ndim = 2\nresolution = 6 6\n[diagnostics]\npitch = 0.01\n",
    );
    let out_dir = dir.join("out");
    let out = run(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--config-b",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let text = std::fs::read_to_string(out_dir.join("compare.txt")).unwrap();
    assert!(text.contains("symmetric_difference 0"));
}
