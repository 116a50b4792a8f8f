use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pftrack::bench::{format_trajectory_csv, load_sequence, TrajectoryRow};
use pftrack::TriangleMesh;

fn pftrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pftrack")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    mesh: PathBuf,
    seq: PathBuf,
    templates: PathBuf,
}

/// A short synthetic blob sequence plus templates, made through the CLI.
fn fixture(frames: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("blob.obj");
    std::fs::write(&mesh, TriangleMesh::blob(0.05, 3).to_obj_string()).unwrap();
    let seq = dir.path().join("seq");
    let templates = dir.path().join("blob.pfvm");
    let o = pftrack(&["synth", p(&mesh), p(&seq), "--frames", &frames.to_string(), "--seed", "3", "--distance", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = pftrack(&["gen-templates", p(&mesh), p(&templates), "--views", "2", "--radius", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    Fixture { _dir: dir, mesh, seq, templates }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = pftrack(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_inputs_exit_with_two() {
    let o = pftrack(&["eval", "/nonexistent/seq", "/nonexistent/traj.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sequence"));
    let o = pftrack(&["synth", "/nonexistent.obj", "/tmp/x", "--variant", "fog"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "roi_margn = 3\n").unwrap();
    let o = pftrack(&["--config", p(&cfg), "eval", "a", "b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
}

#[test]
fn eval_of_a_perfect_trajectory() {
    let f = fixture(4);
    let seq = load_sequence(&f.seq).unwrap();
    let rows: Vec<TrajectoryRow> = seq
        .ground_truth()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(frame, pose)| TrajectoryRow { frame, pose: *pose, runtime_ms: 1.0 })
        .collect();
    let traj = f.seq.join("perfect.csv");
    std::fs::write(&traj, format_trajectory_csv(&rows)).unwrap();

    let o = pftrack(&["eval", p(&f.seq), p(&traj)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("success_rate: 100.0"), "{text}");
    assert!(text.contains("auc: 20.00"), "{text}");

    let o = pftrack(&["eval", p(&f.seq), p(&traj), "--json"]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["success_rate"], 100.0);
    assert_eq!(report["per_frame"].as_array().unwrap().len(), 3);
}

#[test]
fn track_writes_a_trajectory_and_follows_the_object() {
    let f = fixture(5);
    let traj = f.seq.join("traj.csv");
    let o = pftrack(&["track", p(&f.seq), p(&f.mesh), p(&f.templates), "--out", p(&traj)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&traj).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let o = pftrack(&["eval", p(&f.seq), p(&traj)]);
    assert!(stdout(&o).contains("success_rate: 100.0"), "{}", stdout(&o));
}

#[test]
fn lost_track_without_reset_exits_with_one() {
    let f = fixture(3);
    // Blank out the object in the later frames.
    for i in 1..3 {
        let img = image::RgbImage::from_pixel(640, 512, image::Rgb([40, 120, 160]));
        img.save(f.seq.join("frames").join(format!("{i:06}.png"))).unwrap();
    }
    let traj = f.seq.join("traj.csv");
    let o = pftrack(&["track", p(&f.seq), p(&f.mesh), p(&f.templates), "--out", p(&traj)]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(traj.exists());
}

#[test]
fn templates_must_match_the_mesh() {
    let f = fixture(2);
    let other = f.seq.join("sphere.obj");
    std::fs::write(&other, TriangleMesh::icosphere(0.05, 2).to_obj_string()).unwrap();
    let o = pftrack(&["track", p(&f.seq), p(&other), p(&f.templates), "--out", p(&f.seq.join("t.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_reports_runtime_and_success() {
    let f = fixture(4);
    let o = pftrack(&["bench", p(&f.seq), "--views", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("frame 3:"), "{text}");
    assert!(text.contains("mean ms"), "{text}");
    let row = text.lines().last().unwrap();
    assert!(row.split_whitespace().nth(2).unwrap().parse::<f64>().unwrap() >= 0.0, "{row}");
}
