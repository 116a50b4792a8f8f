//! Benchmark plumbing: sequence and trajectory files, synthetic sequence
//! generation, the tracking loop with its reset policy, and the metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::{Rgb, RgbImage};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pose_errors, CameraIntrinsics, Pose};
use crate::imaging::Rect;
use crate::mesh::TriangleMesh;
use crate::rasterizer::{render_synthetic_frame, Occluder, SynthOptions};
use crate::tracker::Tracker;

pub const SEQUENCE_FILE: &str = "sequence.toml";
const SUCCESS_T: f64 = 0.05;
const SUCCESS_R_DEG: f64 = 5.0;
pub const ADD_THRESHOLDS: [f64; 3] = [0.02, 0.05, 0.1];
const AUC_POINTS: usize = 200;
const AUC_MAX: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PoseUnits {
    #[default]
    #[serde(rename = "m")]
    Meters,
    #[serde(rename = "mm")]
    Millimeters,
}

impl PoseUnits {
    fn to_meters(self) -> f64 {
        match self {
            PoseUnits::Meters => 1.0,
            PoseUnits::Millimeters => 1e-3,
        }
    }
}

/// Parses one ground-truth line: nine row-major rotation entries, then the
/// translation. Blank lines and `#` comments are the caller's business.
pub fn parse_pose_line(line: &str, line_no: usize, units: PoseUnits) -> Result<Pose> {
    let err = |reason: String| Error::MalformedPoseLine { line: line_no, reason };
    let values = line
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| err(format!("'{s}' is not a number"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != 12 {
        return Err(err(format!("expected 12 numbers, found {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(err("non-finite value".into()));
    }
    let mut a = [0.0; 12];
    a.copy_from_slice(&values);
    let s = units.to_meters();
    for t in &mut a[9..] {
        *t *= s;
    }
    let pose = Pose::from_array_raw(&a);
    if pose.orthonormality_error() > 1e-3 {
        return Err(err("rotation is not orthonormal".into()));
    }
    Ok(Pose::from_array(&a))
}

pub fn parse_pose_file(src: &str, units: PoseUnits) -> Result<Vec<Pose>> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_pose_line(l, i + 1, units))
        .collect()
}

pub fn format_pose_file(poses: &[Pose]) -> String {
    let mut out = String::new();
    for p in poses {
        let a = p.to_array();
        let line: Vec<String> = a.iter().map(|v| format!("{v:.12}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Contents of `sequence.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceMeta {
    pub camera: CameraSpec,
    /// Mesh path relative to the sequence directory.
    pub mesh: Option<String>,
    #[serde(default = "default_frames_dir")]
    pub frames_dir: String,
    #[serde(default = "default_pose_file")]
    pub pose_file: String,
    #[serde(default)]
    pub pose_units: PoseUnits,
}

impl SequenceMeta {
    /// Parses `sequence.toml` and checks the camera.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let meta: Self = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        meta.intrinsics()?;
        Ok(meta)
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let c = self.camera;
        CameraIntrinsics::new(c.fx, c.fy, c.cx, c.cy)
    }
}

fn default_frames_dir() -> String {
    "frames".into()
}

fn default_pose_file() -> String {
    "poses.txt".into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub root: PathBuf,
    pub frames: Vec<PathBuf>,
    pub gt_poses: Option<Vec<Pose>>,
    pub intrinsics: CameraIntrinsics,
    pub mesh_path: Option<PathBuf>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn load_frame(&self, i: usize) -> Result<RgbImage> {
        Ok(image::open(&self.frames[i])?.to_rgb8())
    }

    pub fn load_mesh(&self) -> Result<TriangleMesh> {
        let path = self.mesh_path.as_ref().ok_or_else(|| Error::Config("sequence names no mesh".into()))?;
        TriangleMesh::load_obj(path)
    }

    pub fn ground_truth(&self) -> Result<&[Pose]> {
        self.gt_poses.as_deref().ok_or(Error::MissingGroundTruth)
    }
}

pub fn load_sequence(path: impl AsRef<Path>) -> Result<Sequence> {
    let root = path.as_ref().to_path_buf();
    let meta_src = std::fs::read_to_string(root.join(SEQUENCE_FILE))?;
    let meta = SequenceMeta::from_toml_str(&meta_src)?;
    let intrinsics = meta.intrinsics()?;

    let frames_dir = root.join(&meta.frames_dir);
    let mut frames: Vec<PathBuf> = std::fs::read_dir(&frames_dir)
        .map_err(|_| Error::MissingFrames(frames_dir.clone()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(Error::MissingFrames(frames_dir));
    }

    let pose_path = root.join(&meta.pose_file);
    let gt_poses = if pose_path.exists() {
        let poses = parse_pose_file(&std::fs::read_to_string(&pose_path)?, meta.pose_units)?;
        if poses.len() != frames.len() {
            return Err(Error::MissingFrames(frames_dir));
        }
        Some(poses)
    } else {
        None
    };
    Ok(Sequence {
        frames,
        gt_poses,
        intrinsics,
        mesh_path: meta.mesh.map(|m| root.join(m)),
        root,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub frame: usize,
    pub pose: Pose,
    pub runtime_ms: f64,
}

pub const TRAJECTORY_HEADER: &str = "frame,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,runtime_ms";

pub fn format_trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.frame);
        for v in r.pose.to_array() {
            let _ = write!(out, ",{v:.12}");
        }
        let _ = writeln!(out, ",{:.4}", r.runtime_ms);
    }
    out
}

pub fn parse_trajectory_csv(src: &str) -> Result<Vec<TrajectoryRow>> {
    let mut rows = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() || (i == 0 && t.starts_with("frame")) {
            continue;
        }
        let err = |reason: String| Error::MalformedTrajectory { line: line_no, reason };
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if fields.len() != 14 {
            return Err(err(format!("expected 14 fields, found {}", fields.len())));
        }
        let frame = fields[0].parse::<usize>().map_err(|_| err(format!("bad frame index '{}'", fields[0])))?;
        let mut vals = [0.0; 13];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f.parse::<f64>().map_err(|_| err(format!("'{f}' is not a number")))?;
            if !v.is_finite() {
                return Err(err("non-finite value".into()));
            }
        }
        let mut a = [0.0; 12];
        a.copy_from_slice(&vals[..12]);
        if Pose::from_array_raw(&a).orthonormality_error() > 1e-3 {
            return Err(err("rotation is not orthonormal".into()));
        }
        rows.push(TrajectoryRow { frame, pose: Pose::from_array(&a), runtime_ms: vals[12] });
    }
    Ok(rows)
}

/// Object spinning about a fixed camera-frame axis through its centre at
/// a constant rate while the centre follows a smooth Lissajous path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub frames: usize,
    pub start: Pose,
    pub axis: Vector3<f64>,
    pub deg_per_frame: f64,
    /// Per-axis translation amplitude, meters.
    pub amplitude: Vector3<f64>,
    /// Frames per period of the translation path.
    pub period: f64,
}

impl TrajectorySpec {
    pub fn orbit(frames: usize, start: Pose) -> Self {
        Self {
            frames,
            start,
            axis: Vector3::new(0.3, 1.0, -0.5),
            deg_per_frame: 3.0,
            amplitude: Vector3::new(0.06, 0.04, 0.05),
            period: 120.0,
        }
    }

    pub fn static_at(frames: usize, start: Pose) -> Self {
        Self { deg_per_frame: 0.0, amplitude: Vector3::zeros(), ..Self::orbit(frames, start) }
    }

    pub fn poses(&self) -> Vec<Pose> {
        let w = std::f64::consts::TAU / self.period;
        (0..self.frames)
            .map(|f| {
                let f = f as f64;
                let spin = Pose::from_axis_angle(self.axis, (f * self.deg_per_frame).to_radians(), Vector3::zeros());
                let offset = Vector3::new(
                    self.amplitude.x * (w * f).sin(),
                    self.amplitude.y * (2.0 * w * f).sin(),
                    self.amplitude.z * (1.0 - (w * f).cos()),
                );
                Pose::new(spin.rotation * self.start.rotation, self.start.translation + offset)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Regular,
    Noise { sigma: f64 },
    /// Global gain ramping linearly over the sequence.
    Light { from: f64, to: f64 },
    /// Grey bar sweeping across the image.
    Occlusion,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "regular" => Some(Variant::Regular),
            "noise" => Some(Variant::Noise { sigma: 15.0 }),
            "light" => Some(Variant::Light { from: 0.7, to: 1.3 }),
            "occlusion" => Some(Variant::Occlusion),
            _ => None,
        }
    }
}

/// Scene appearance for synthetic sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneStyle {
    pub albedo: [u8; 3],
    /// Per-face albedo variation.
    pub texture: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for SceneStyle {
    fn default() -> Self {
        Self { albedo: [210, 70, 40], texture: 0.25, width: 640, height: 512 }
    }
}

/// Smooth cool-toned random background, far from the default albedo.
pub fn synthetic_background(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB4C6_0000);
    let cell = 16usize;
    let (gw, gh) = (width / cell + 2, height / cell + 2);
    let lattice: Vec<[f64; 3]> = (0..gw * gh)
        .map(|_| [rng.gen_range(20.0..90.0), rng.gen_range(70.0..200.0), rng.gen_range(90.0..230.0)])
        .collect();
    RgbImage::from_fn(width as u32, height as u32, |x, y| {
        let (fx, fy) = (x as f64 / cell as f64, y as f64 / cell as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let at = |i: usize, j: usize, c: usize| lattice[j * gw + i][c];
        let mut px = [0u8; 3];
        for (c, p) in px.iter_mut().enumerate() {
            let a = at(x0, y0, c) * (1.0 - tx) + at(x0 + 1, y0, c) * tx;
            let b = at(x0, y0 + 1, c) * (1.0 - tx) + at(x0 + 1, y0 + 1, c) * tx;
            *p = (a * (1.0 - ty) + b * ty).round() as u8;
        }
        Rgb(px)
    })
}

fn frame_options(variant: &Variant, style: &SceneStyle, f: usize, n: usize, seed: u64) -> SynthOptions {
    let mut o = SynthOptions { texture: style.texture, seed: seed.wrapping_mul(1_000_003).wrapping_add(f as u64), ..Default::default() };
    let t = if n > 1 { f as f64 / (n - 1) as f64 } else { 0.0 };
    match *variant {
        Variant::Regular => {}
        Variant::Noise { sigma } => o.noise_sigma = sigma,
        Variant::Light { from, to } => o.light_gain = from + (to - from) * t,
        Variant::Occlusion => {
            let bar = style.width / 8;
            let x = ((style.width + bar) as f64 * t) as usize;
            let x0 = x.saturating_sub(bar);
            let w = x.min(style.width) - x0.min(style.width);
            if w > 0 {
                o.occluder = Some(Occluder { rect: Rect::new(x0, 0, w, style.height), color: [128, 128, 128] });
            }
        }
    }
    o
}

/// Renders a sequence into `out`: `frames/NNNNNN.png`, `poses.txt`
/// (meters), `mesh.obj` and `sequence.toml`.
pub fn generate_synthetic_sequence(
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    poses: &[Pose],
    variant: Variant,
    style: &SceneStyle,
    seed: u64,
    out: impl AsRef<Path>,
) -> Result<Sequence> {
    let out = out.as_ref();
    let full = Rect::full(style.width, style.height);
    for p in poses {
        for v in mesh.vertices() {
            let x = k.project(p, v).map_err(|_| Error::ObjectOutOfView)?;
            if !full.contains_point(x.x, x.y) {
                return Err(Error::ObjectOutOfView);
            }
        }
    }
    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir)?;
    let background = synthetic_background(style.width, style.height, seed);
    let mut frames = Vec::with_capacity(poses.len());
    for (f, pose) in poses.iter().enumerate() {
        let opts = frame_options(&variant, style, f, poses.len(), seed);
        let img = render_synthetic_frame(mesh, k, pose, &background, style.albedo, &opts);
        let path = frames_dir.join(format!("{f:06}.png"));
        img.save(&path)?;
        frames.push(path);
    }
    std::fs::write(out.join("poses.txt"), format_pose_file(poses))?;
    std::fs::write(out.join("mesh.obj"), mesh.to_obj_string())?;
    let meta = SequenceMeta {
        camera: CameraSpec { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy },
        mesh: Some("mesh.obj".into()),
        frames_dir: default_frames_dir(),
        pose_file: default_pose_file(),
        pose_units: PoseUnits::Meters,
    };
    std::fs::write(out.join(SEQUENCE_FILE), toml::to_string(&meta).expect("meta serializes"))?;
    Ok(Sequence {
        root: out.to_path_buf(),
        frames,
        gt_poses: Some(poses.to_vec()),
        intrinsics: *k,
        mesh_path: Some(out.join("mesh.obj")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicy {
    /// Restore the ground truth after every frame failing 5cm-5deg.
    Reset5cm5deg,
    NoReset,
}

impl ResetPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reset" | "reset_5cm5deg" => Some(Self::Reset5cm5deg),
            "no_reset" | "none" => Some(Self::NoReset),
            _ => None,
        }
    }
}

pub fn is_success(pose: &Pose, gt: &Pose) -> bool {
    let e = pose_errors(pose, gt);
    e.e_t < SUCCESS_T && e.e_r < SUCCESS_R_DEG.to_radians()
}

/// Mean vertex displacement between two poses of the mesh.
pub fn add_error(vertices: &[Vector3<f64>], pose: &Pose, gt: &Pose) -> f64 {
    if vertices.is_empty() {
        return 0.0;
    }
    let sum: f64 = vertices.iter().map(|v| (pose.transform_point(v) - gt.transform_point(v)).norm()).sum();
    sum / vertices.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub e_t: f64,
    pub e_r: f64,
    pub add: f64,
    pub success: bool,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_frame: Vec<FrameMetrics>,
    /// Percent.
    pub success_rate: f64,
    /// 0 to 20.
    pub auc: f64,
    /// Threshold (fraction of the diameter) to percent of frames below it.
    pub add_fractions: BTreeMap<String, f64>,
    pub resets: usize,
    pub mean_runtime_ms: f64,
}

/// Area under the ADD success curve over thresholds in `(0, 0.2] d_m`,
/// scaled to 0..20.
pub fn auc_score(add: &[f64], d_m: f64) -> f64 {
    if add.is_empty() {
        return 0.0;
    }
    let step = AUC_MAX / AUC_POINTS as f64;
    let mut acc = 0.0;
    for i in 0..AUC_POINTS {
        let k = step * (i as f64 + 0.5);
        acc += add.iter().filter(|&&e| e < k * d_m).count() as f64 / add.len() as f64;
    }
    100.0 * AUC_MAX * acc / AUC_POINTS as f64
}

/// Scores every frame after the first (the initialization) against the
/// ground truth. Under the reset policy every failure counts as a reset.
pub fn evaluate(
    gt: &[Pose],
    trajectory: &[TrajectoryRow],
    policy: ResetPolicy,
    vertices: &[Vector3<f64>],
    d_m: f64,
) -> Result<MetricReport> {
    if gt.is_empty() {
        return Err(Error::MissingGroundTruth);
    }
    let mut per_frame = Vec::new();
    for row in trajectory.iter().filter(|r| r.frame >= 1) {
        let g = gt.get(row.frame).ok_or(Error::MissingGroundTruth)?;
        let e = pose_errors(&row.pose, g);
        per_frame.push(FrameMetrics {
            frame: row.frame,
            e_t: e.e_t,
            e_r: e.e_r,
            add: add_error(vertices, &row.pose, g),
            success: is_success(&row.pose, g),
            runtime_ms: row.runtime_ms,
        });
    }
    let n = per_frame.len().max(1) as f64;
    let successes = per_frame.iter().filter(|m| m.success).count();
    let adds: Vec<f64> = per_frame.iter().map(|m| m.add).collect();
    let add_fractions = ADD_THRESHOLDS
        .iter()
        .map(|&k| {
            let hits = adds.iter().filter(|&&e| e < k * d_m).count();
            (format!("{k}"), 100.0 * hits as f64 / n)
        })
        .collect();
    Ok(MetricReport {
        success_rate: 100.0 * successes as f64 / n,
        auc: auc_score(&adds, d_m),
        add_fractions,
        resets: match policy {
            ResetPolicy::Reset5cm5deg => per_frame.len() - successes,
            ResetPolicy::NoReset => 0,
        },
        mean_runtime_ms: per_frame.iter().map(|m| m.runtime_ms).sum::<f64>() / n,
        per_frame,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trajectory: Vec<TrajectoryRow>,
    pub resets: usize,
    /// Frames where the tracker reported a loss.
    pub lost_frames: Vec<usize>,
}

/// Tracks a whole sequence from `init` (the pose of frame 0). The reset
/// policy needs ground truth: failed frames are recorded as tracked, then
/// the tracker restarts from the ground truth of that frame.
pub fn run_sequence(
    tracker: &Tracker,
    seq: &Sequence,
    init: &Pose,
    policy: ResetPolicy,
    mut on_frame: impl FnMut(&TrajectoryRow),
) -> Result<RunResult> {
    let gt = match policy {
        ResetPolicy::Reset5cm5deg => Some(seq.ground_truth()?),
        ResetPolicy::NoReset => None,
    };
    let first = seq.load_frame(0)?;
    let start = Instant::now();
    let mut state = tracker.init(&first, init)?;
    let row = TrajectoryRow { frame: 0, pose: *init, runtime_ms: start.elapsed().as_secs_f64() * 1e3 };
    on_frame(&row);
    let mut trajectory = vec![row];
    let mut resets = 0;
    let mut lost_frames = Vec::new();
    for f in 1..seq.len() {
        let img = seq.load_frame(f)?;
        let start = Instant::now();
        let result = tracker.track(&mut state, &img);
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        match result {
            Ok(_) => {}
            Err(Error::LostTrack { .. } | Error::ObjectOutOfView | Error::SingularSystem) => lost_frames.push(f),
            Err(e) => return Err(e),
        }
        let row = TrajectoryRow { frame: f, pose: state.pose, runtime_ms };
        on_frame(&row);
        trajectory.push(row);
        if let Some(gt) = gt {
            if !is_success(&state.pose, &gt[f]) {
                resets += 1;
                tracker.reset(&mut state, &img, &gt[f])?;
            }
        }
    }
    Ok(RunResult { trajectory, resets, lost_frames })
}

/// Camera used by the synthetic benchmarks: 640x512 with a 60 degree
/// horizontal field of view.
pub fn default_camera(width: usize, height: usize) -> CameraIntrinsics {
    let f = width as f64 / (2.0 * (30f64).to_radians().tan());
    CameraIntrinsics::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0).expect("positive focal length")
}

/// A pose with the model origin `distance` ahead of the camera, seen from
/// a slightly raised, turned viewpoint.
pub fn default_start_pose(distance: f64) -> Pose {
    let r = Pose::from_axis_angle(Vector3::new(1.0, 0.4, 0.0), 0.5, Vector3::zeros());
    Pose::new(r.rotation, Vector3::new(0.0, 0.0, distance))
}

/// Pixel bounds of a mesh under a pose, for sanity checks.
pub fn projected_bounds(mesh: &TriangleMesh, k: &CameraIntrinsics, pose: &Pose) -> Option<(Vector2<f64>, Vector2<f64>)> {
    let mut lo = Vector2::repeat(f64::INFINITY);
    let mut hi = Vector2::repeat(f64::NEG_INFINITY);
    for v in mesh.vertices() {
        let x = k.project(pose, v).ok()?;
        lo = lo.inf(&x);
        hi = hi.sup(&x);
    }
    Some((lo, hi))
}
