use std::path::Path;
use std::process::{Command, Output};

const CUBE: &str = "\
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v -0.5 0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v -0.5 0.5 0.5
v 0.5 0.5 0.5
f 1 3 4
f 1 4 2
f 5 6 8
f 5 8 7
f 1 2 6
f 1 6 5
f 3 7 8
f 3 8 4
f 1 5 7
f 1 7 3
f 2 4 8
f 2 8 6
";

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshfit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cube.obj"), CUBE).unwrap();
    dir
}

#[test]
fn split_writes_mesh_and_report() {
    let dir = setup();
    let out = run(
        &[
            "split", "--in", "cube.obj", "--alpha", "50", "--out", "s.obj", "--report", "r.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let obj = std::fs::read_to_string(dir.path().join("s.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 20);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 36);
    let report = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(report.starts_with("face_idx,curvature,split\n"));
    assert_eq!(report.lines().count(), 13);
}

#[test]
fn metrics_of_a_mesh_against_itself() {
    let dir = setup();
    let out = run(
        &[
            "metrics",
            "--pred",
            "cube.obj",
            "--target",
            "cube.obj",
            "--samples",
            "2000",
            "--tau",
            "0.01",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("metric,value,config\n"));
    // both sides are sampled independently, so a loose threshold is needed
    let f1: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("f1,"))
        .and_then(|rest| rest.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(f1 > 99.0, "{text}");
}

#[test]
fn fit_writes_outputs() {
    let dir = setup();
    let out = run(
        &[
            "fit",
            "--target",
            "cube.obj",
            "--stages",
            "2",
            "--iters",
            "15",
            "--switch-iter",
            "10",
            "--gammas",
            "0,1,0.3,1",
            "--samples",
            "200",
            "--out-dir",
            "o",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = std::fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    assert!(trace
        .starts_with("stage,iter,mode,lr,total,latent,surface,edge,laplacian,vertices,faces\n"));
    assert_eq!(trace.lines().count(), 1 + 2 * 15);
    assert!(dir.path().join("o/final.obj").exists());
    assert!(dir.path().join("o/splits.csv").exists());
}

#[test]
fn toy2d_rows_per_seed() {
    let dir = setup();
    let out = run(
        &[
            "toy2d", "--loss", "pts,vtp", "--points", "5,10", "--seeds", "2", "--iters", "50",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("loss,n_points,seed,iou\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(text.lines().nth(1).unwrap().starts_with("pts,5,0,"));
}

#[test]
fn gradcheck_single_loss() {
    let dir = setup();
    let out = run(
        &["gradcheck", "--loss", "edge", "--trials", "5"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.lines().nth(1).unwrap().starts_with("edge,5,5,"),
        "{text}"
    );
}

#[test]
fn errors_exit_nonzero() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    for args in [
        &["fit", "--target", "missing.obj"][..],
        &["split", "--in", "bad.obj", "--out", "x.obj"],
        &[
            "split", "--in", "cube.obj", "--alpha", "200", "--out", "x.obj",
        ],
        &[
            "metrics", "--pred", "cube.obj", "--target", "cube.obj", "--tau", "-1",
        ],
        &["gradcheck", "--loss", "nope"],
        &["fit", "--target", "cube.obj", "--lr", "nan"],
    ] {
        let out = run(args, dir.path());
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("error"),
            "{args:?}"
        );
    }
}
