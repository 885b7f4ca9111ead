use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shapewalk::Grid;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shapewalk"))
}

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn copy_scenes(dir: &Path) {
    for name in ["disk.toml", "translate.toml", "translate_target.toml"] {
        std::fs::copy(scene(name), dir.join(name)).unwrap();
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_disk_center_matches_analytic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.txt");
    let o = run(&["solve", s(&scene("disk.toml")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = Grid::read_path(&out).unwrap();
    assert_eq!((g.nx(), g.ny(), g.channels()), (5, 5, 2));
    let c = g.center(2, 2);
    assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    let (mean, se) = (g.get(2, 2, 0), g.get(2, 2, 1));
    assert!(se > 0.0);
    assert!((mean - 0.5).abs() <= 3.0 * se, "{mean} ± {se}");
    assert!(g.get(0, 0, 0).is_nan());
}

#[test]
fn solve_is_a_function_of_seed() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = run(&["solve", s(&scene("disk.toml")), "--seed", seed, "--wpp", "50", "--grid", "3x3", "--out", s(&out)]);
        assert!(o.status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let a = read("a.txt", "9");
    assert_eq!(a, read("b.txt", "9"));
    assert_ne!(a, read("c.txt", "10"));
    assert!(a.starts_with("3 3 2 "));
}

#[test]
fn grad_of_frozen_parameter_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("du.txt");
    let o = run(&["grad", s(&scene("disk.toml")), "--params", "0", "--wpp", "64", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = Grid::read_path(&out).unwrap();
    assert_eq!(g.channels(), 1);
    assert!(g.values().iter().all(|v| *v == 0.0));

    let o = run(&["grad", s(&scene("disk.toml")), "--params", "1-2", "--wpp", "64", "--out", s(&out)]);
    assert!(o.status.success());
    let g = Grid::read_path(&out).unwrap();
    assert_eq!(g.channels(), 2);
    assert!(g.channel(0).iter().any(|v| *v != 0.0));
}

#[test]
fn fdcheck_reports_every_selected_parameter() {
    let dir = tempfile::tempdir().unwrap();
    copy_scenes(dir.path());
    let o = run(&["solve", s(&dir.path().join("translate_target.toml")), "--wpp", "32", "--out", s(&dir.path().join("target.txt"))]);
    assert!(o.status.success());
    let report = dir.path().join("fd.csv");
    let o = run(&[
        "fdcheck",
        s(&dir.path().join("translate.toml")),
        "--params",
        "0,1",
        "--wpp",
        "8",
        "--reps",
        "4",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param,gradient,gradient_se,fd,fd_se,z,agree");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 7);
    }
}

#[test]
fn ablate_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("ablate.csv");
    let o = run(&[
        "ablate",
        s(&scene("disk.toml")),
        "--axis",
        "method",
        "--levels",
        "backward,offset_ball",
        "--params",
        "1",
        "--wpp",
        "8",
        "--reps",
        "2",
        "--reference-walks",
        "200",
        "--grid",
        "3,3",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(report).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("method,backward,"));
    assert!(rows[2].starts_with("method,offset_ball,"));
}

fn strip_seconds(log: &str) -> Vec<String> {
    log.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(4);
            f.join(",")
        })
        .collect()
}

#[test]
fn optimize_is_deterministic_and_writes_scene() {
    let dir = tempfile::tempdir().unwrap();
    copy_scenes(dir.path());
    let o = run(&["solve", s(&dir.path().join("translate_target.toml")), "--out", s(&dir.path().join("target.txt"))]);
    assert!(o.status.success());
    let config = dir.path().join("translate.toml");
    let text = std::fs::read_to_string(&config).unwrap().replace("iterations = 200", "iterations = 40");
    std::fs::write(&config, text).unwrap();

    let logs: Vec<String> = ["a.csv", "b.csv"]
        .iter()
        .map(|name| {
            let log = dir.path().join(name);
            let o = run(&["optimize", s(&config), "--seed", "4", "--out", s(&log)]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            std::fs::read_to_string(log).unwrap()
        })
        .collect();
    assert_eq!(logs[0].lines().count(), 41);
    assert!(logs[0].starts_with("t,loss,grad_norm,wpp,seconds"));
    assert_eq!(strip_seconds(&logs[0]), strip_seconds(&logs[1]));

    let result = dir.path().join("translate_result.toml");
    let (_, scene) = shapewalk::SceneConfig::open(&result).unwrap();
    let p = shapewalk::Boundary::params(&scene.shape);
    assert_eq!(p[2], 0.3);
    assert_ne!((p[0], p[1]), (0.5, 0.5));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[geometry]\nkind = \"spheres\"\nspheres = []\nbogus = 1\n").unwrap();
    assert_eq!(run(&["solve", s(&bad)]).status.code(), Some(2));
    assert_eq!(run(&["solve", s(&dir.path().join("missing.toml"))]).status.code(), Some(2));
    assert_eq!(run(&["grad", s(&scene("disk.toml")), "--params", "7"]).status.code(), Some(2));
    assert_eq!(run(&["solve", s(&scene("disk.toml")), "--grid", "0x3"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn degenerate_geometry_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("collapsed.toml");
    std::fs::write(
        &cfg,
        r#"
[geometry]
kind = "polyline"
vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]

[bvp]
dirichlet = { kind = "constant", value = 1.0 }
"#,
    )
    .unwrap();
    let o = run(&["solve", s(&cfg), "--wpp", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
