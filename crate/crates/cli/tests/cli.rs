use std::fs;
use std::process::{Command, Output};

fn nitsche(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nitsche")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_writes_vtk_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nitsche(&["solve", "--preset", "two_membrane", "--n", "4", "--param", "g=0.02", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("two_membrane:"));
    let csv = fs::read_to_string(dir.path().join("solve.csv")).unwrap();
    assert!(csv.starts_with("n,n_dofs,newton_iters,final_residual,energy\n4,"));
    let vtk = fs::read_to_string(dir.path().join("two_membrane.vtk")).unwrap();
    assert!(vtk.contains("UNSTRUCTURED_GRID"));
}

#[test]
fn converge_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nitsche(&["converge", "--preset", "obstacle", "--levels", "4,8,16", "--norm", "h1", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file = fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert_eq!(stdout(&o), file);
    assert_eq!(file.lines().count(), 3);
}

#[test]
fn condition_reports_both_methods() {
    let o = nitsche(&["condition", "--preset", "two_membrane", "--levels", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains(",nitsche,") && s.contains(",penalty,"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    fs::write(&cfg, "preset = \"obstacle\"\nlevels = [4, 8]\nnorm = \"h2\"\n\n[param]\ng = -0.02\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = nitsche(&["converge", "--config", cfg, "--norm", "h1"]);
    let explicit = nitsche(&["converge", "--preset", "obstacle", "--levels", "4,8", "--norm", "h1", "--param", "g=-0.02"]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    assert_eq!(stdout(&from_file), stdout(&explicit));

    let overridden = nitsche(&["converge", "--config", cfg, "--norm", "h1", "--param", "g=-0.05"]);
    assert_ne!(stdout(&overridden), stdout(&explicit));
}

#[test]
fn bad_input_fails_with_a_message() {
    let cases: [&[&str]; 5] = [
        &["solve", "--preset", "nope"],
        &["solve"],
        &["converge", "--preset", "obstacle", "--levels", "4"],
        &["converge", "--preset", "obstacle", "--levels", "4,8", "--norm", "h3"],
        &["solve", "--preset", "obstacle", "--param", "alpha=-1"],
    ];
    for args in cases {
        let o = nitsche(args);
        assert!(!o.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn presets_are_listed() {
    let o = nitsche(&["presets"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 8);
}
