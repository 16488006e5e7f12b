use std::path::Path;
use std::process::{Command, Output};

fn msewave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msewave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&msewave(&["converge", "--case", "plane-wave", "--bogus", "1"])), 2);
    assert_eq!(code(&msewave(&["converge", "--case", "plane-wave", "--h", "0.2x"])), 2);
    assert_eq!(code(&msewave(&["run", "--p", "4"])), 2);
    assert_eq!(code(&msewave(&["converge", "--case", "plane-wave", "--p", "5..2"])), 2);
    assert_eq!(code(&msewave(&["frobnicate"])), 2);
    assert_eq!(code(&msewave(&["run", "--case", "plane-wave", "--p", "4"])), 2);
}

#[test]
fn help_exits_0() {
    let o = msewave(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["converge", "run", "dump-mesh", "kernel-check"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn plane_wave_sweep_writes_one_row_per_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = msewave(&[
        "converge", "--case", "plane-wave", "--h", "0.5", "--p", "2..5", "--method", "bsem", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,n,dof,linf_error,relative_error,runtime_s");
    assert_eq!(lines.len(), 5);
    for (l, p) in lines[1..].iter().zip(2..) {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 6);
        assert_eq!(cols[0], p.to_string());
        assert_eq!(cols[1], "12");
        assert!(cols[3].parse::<f64>().unwrap() > 0.0);
        assert_eq!(cols[4], "");
    }
}

#[test]
fn single_threaded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = msewave(&[
            "--threads", "1", "run", "--case", "null-scatterer", "--nx", "3", "--ny", "3", "--p", "4", "--timing", "false",
            "--out", &out_arg(d.path()),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["field.csv", "profile_y1.2.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# null scatterer\ncase = null-scatterer\nnx = 2\nny = 2\np = 3\ntiming = false\n").unwrap();
    let o = msewave(&["run", "--config", cfg.to_str().unwrap(), "--p", "4", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 9 * 9);

    std::fs::write(&cfg, "case = null-scatterer\nelements = 4\n").unwrap();
    let o = msewave(&["run", "--config", cfg.to_str().unwrap(), "--p", "4"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("elements"));
}

#[test]
fn reference_is_stored_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run", "--case", "circular-shoal", "--nx", "2", "--ny", "2", "--p", "3", "--ref-p", "5", "--out",
        dir.path().to_str().unwrap(),
    ];
    let first = msewave(&args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let stored = dir.path().join("reference").join("circular-shoal-p5.field");
    assert!(stored.exists());
    let e1 = std::fs::read_to_string(dir.path().join("error.csv")).unwrap();
    let second = msewave(&args);
    assert_eq!(code(&second), 0);
    let e2 = std::fs::read_to_string(dir.path().join("error.csv")).unwrap();
    let rel = |s: &str| s.lines().nth(1).unwrap().split(',').nth(4).unwrap().to_string();
    assert_eq!(rel(&e1), rel(&e2));
    assert!(rel(&e1).parse::<f64>().unwrap() > 0.0);
}

#[test]
fn dump_mesh_and_kernel_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = msewave(&["dump-mesh", "--case", "plane-wave", "--p", "4", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("mesh.txt")).unwrap();
    assert!(text.starts_with("# nodes 861\n"));
    assert!(text.contains("# quads 50\n"));

    let o = msewave(&["kernel-check", "--pairs", "6", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("kernel_check.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    for l in text.lines().skip(1) {
        let err: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(err < 1e-6, "{l}");
    }
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = msewave(&["dump-mesh", "--case", "plane-wave", "--p", "2", "--out", blocker.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let o = msewave(&["dump-mesh", "--case", "plane-wave", "--p", "2", "--h", "0.3"]);
    assert_eq!(code(&o), 1);
}
