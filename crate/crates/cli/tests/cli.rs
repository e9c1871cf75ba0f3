use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use h2kit::io::load;

fn h2kit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_h2kit")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn built(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join(format!("exp{n}.h2m"));
    let o = h2kit(&["build", "--kernel", "exp2d", "--n", &n.to_string(), "--m", "32", "--p", "5", "--out", s(&path)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn build_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let path = built(dir.path(), 1024);
    let a = load(&path).unwrap();
    let out = h2kit(&["inspect", "--matrix", s(&path)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("rows 1024 cols 1024 depth 5"), "{text}");
    assert!(text.contains(&format!("sparsity constant {}", a.sparsity_constant())));
    let st = h2kit::geometry::dual_tree_traversal(a.row_tree(), a.col_tree(), 0.9).unwrap();
    assert_eq!(st.sparsity_constant(), a.sparsity_constant());
}

#[test]
fn inspect_csv_has_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let path = built(dir.path(), 256);
    let csv = dir.path().join("levels.csv");
    assert_eq!(code(&h2kit(&["inspect", "--matrix", s(&path), "--csv", s(&csv)])), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "level,nodes,row_rank,col_rank,lowrank_blocks,dense_blocks");
    assert_eq!(lines.len(), 1 + 4);
}

#[test]
fn same_seed_same_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = built(dir.path(), 1024);
    let mut files = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("run{i}.csv"));
        let o = h2kit(&["matvec", "--matrix", s(&path), "--nv", "2", "--seed", "7", "--no-timings", "--csv", s(&csv)]);
        assert_eq!(code(&o), 0);
        files.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let other = dir.path().join("other.csv");
    h2kit(&["matvec", "--matrix", s(&path), "--nv", "2", "--seed", "8", "--no-timings", "--csv", s(&other)]);
    assert_ne!(std::fs::read(&other).unwrap(), files[0]);
}

#[test]
fn matvec_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = built(dir.path(), 1024);
    assert_eq!(code(&h2kit(&["matvec", "--matrix", s(&path), "--check", "--tol", "1e-3"])), 0);
    assert_eq!(code(&h2kit(&["matvec", "--matrix", s(&path), "--check", "--tol", "1e-30"])), 1);
    // above the oracle cap there is nothing to check against
    assert_eq!(code(&h2kit(&["matvec", "--matrix", s(&path), "--check", "--oracle-cap", "100"])), 1);
    assert_eq!(code(&h2kit(&["matvec", "--matrix", s(&path), "--oracle-cap", "100"])), 0);
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(code(&h2kit(&["inspect", "--matrix", "/nonexistent/a.h2m"])), 2);
    assert_eq!(code(&h2kit(&["frobnicate"])), 2);
    assert_eq!(code(&h2kit(&["matvec", "--bogus"])), 2);
    assert_eq!(code(&h2kit(&["build", "--kernel", "fd-frac", "--n", "1000", "--out", "/tmp/x.h2m"])), 2);
    assert_eq!(code(&h2kit(&["--help"])), 0);
}

#[test]
fn compress_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = built(dir.path(), 1024);
    let out = dir.path().join("c.h2m");
    let csv = dir.path().join("c.csv");
    let o = h2kit(&["compress", "--matrix", s(&path), "--tau", "1e-4", "--out", s(&out), "--csv", s(&csv), "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (a, b) = (load(&path).unwrap(), load(&out).unwrap());
    assert!(b.memory_report().lowrank_bytes < a.memory_report().lowrank_bytes);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + a.depth() + 1);
}

#[test]
fn distributed_runs_match_single_rank() {
    let dir = tempfile::tempdir().unwrap();
    let path = built(dir.path(), 1024);
    let csv = dir.path().join("d.csv");
    let o = h2kit(&["dist-matvec", "--matrix", s(&path), "--ranks", "4", "--nv", "2", "--check", "--csv", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("ranks,rank,kind,level,messages,values,bytes,max_abs_difference,time_s"));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(7) == Some("0.000000e0")), "{text}");
    let o = h2kit(&["dist-compress", "--matrix", s(&path), "--ranks", "2", "--tau", "1e-3", "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&h2kit(&["dist-matvec", "--matrix", s(&path), "--ranks", "3"])), 2);
}

#[test]
fn solve_fd_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fd.csv");
    let o = h2kit(&["solve-fd", "--n", "32", "--ranks", "2", "--check", "--csv", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PCG converged"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("section,name,index,value\n"));
    for key in ["k_build_s", "compression_s", "d_assembly_s", "c_assembly_s", "preconditioner_s", "per_iteration_s", "iterations"] {
        assert!(text.contains(&format!(",{key},")), "{key}");
    }
    assert!(text.contains("residual,relative,0,1.000000e0"));
    // too few iterations fails the check
    let o = h2kit(&["solve-fd", "--n", "32", "--ranks", "2", "--maxit", "2", "--check"]);
    assert_eq!(code(&o), 1);
}
