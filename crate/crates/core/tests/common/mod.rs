#![allow(dead_code)]

use nalgebra::{Rotation3, Vector3};
use pftrack::bench::{
    default_camera, default_start_pose, evaluate, generate_synthetic_sequence, run_sequence, MetricReport, ResetPolicy,
    SceneStyle, Sequence, TrajectorySpec, Variant,
};
use pftrack::config::TrackerConfig;
use pftrack::tracker::Tracker;
use pftrack::viewpoint::{generate_model, TemplateParams, ViewpointModel};
use pftrack::{Pose, TriangleMesh};

pub const DISTANCE: f64 = 0.5;

pub fn blob() -> TriangleMesh {
    TriangleMesh::blob(0.05, 3)
}

pub fn cylinder() -> TriangleMesh {
    TriangleMesh::cylinder(0.04, 0.12, 32, 4)
}

pub fn model_for(mesh: &TriangleMesh) -> ViewpointModel {
    // Templates rendered from the tracking distance see the same rim.
    generate_model(mesh, &TemplateParams { radius: Some(DISTANCE), ..Default::default() }).unwrap()
}

/// Orbit for the blob: the default tilted spin axis.
pub fn blob_orbit(frames: usize) -> Vec<Pose> {
    TrajectorySpec::orbit(frames, default_start_pose(DISTANCE)).poses()
}

/// Orbit for the cylinder: the spin axis is the symmetry axis, so the
/// silhouette carries no information about the spin.
pub fn cylinder_orbit(frames: usize) -> Vec<Pose> {
    let mut spec = TrajectorySpec::orbit(frames, Pose::identity());
    let axis = spec.axis.normalize();
    let r = Rotation3::rotation_between(&Vector3::z(), &axis).unwrap();
    spec.start = Pose::new(*r.matrix(), Vector3::new(0.0, 0.0, DISTANCE));
    spec.poses()
}

pub struct Scene {
    pub dir: tempfile::TempDir,
    pub seq: Sequence,
    pub mesh: TriangleMesh,
    pub model: ViewpointModel,
}

pub fn scene(mesh: TriangleMesh, poses: &[Pose], variant: Variant, seed: u64) -> Scene {
    let style = SceneStyle::default();
    let k = default_camera(style.width, style.height);
    let dir = tempfile::tempdir().unwrap();
    let seq = generate_synthetic_sequence(&mesh, &k, poses, variant, &style, seed, dir.path()).unwrap();
    let model = model_for(&mesh);
    Scene { dir, seq, mesh, model }
}

pub fn track_scene(scene: &Scene, config: TrackerConfig) -> MetricReport {
    let tracker = Tracker::new(scene.mesh.clone(), scene.model.clone(), scene.seq.intrinsics, config).unwrap();
    let gt = scene.seq.ground_truth().unwrap();
    let run = run_sequence(&tracker, &scene.seq, &gt[0], ResetPolicy::Reset5cm5deg, |_| {}).unwrap();
    evaluate(gt, &run.trajectory, ResetPolicy::Reset5cm5deg, scene.mesh.vertices(), scene.mesh.diameter()).unwrap()
}

pub fn contour_only() -> TrackerConfig {
    TrackerConfig { use_interior: false, ..Default::default() }
}

pub fn camera() -> pftrack::CameraIntrinsics {
    let style = SceneStyle::default();
    default_camera(style.width, style.height)
}

/// One regular frame rendered in memory.
pub fn render(mesh: &TriangleMesh, pose: &Pose, seed: u64) -> image::RgbImage {
    let style = SceneStyle::default();
    let bg = pftrack::bench::synthetic_background(style.width, style.height, seed);
    let opts = pftrack::rasterizer::SynthOptions { texture: style.texture, seed, ..Default::default() };
    pftrack::rasterizer::render_synthetic_frame(mesh, &camera(), pose, &bg, style.albedo, &opts)
}

pub fn tracker(mesh: &TriangleMesh, model: &ViewpointModel, config: TrackerConfig) -> Tracker {
    Tracker::new(mesh.clone(), model.clone(), camera(), config).unwrap()
}

/// Left-perturbs `pose` by a rotation about its own origin and a shift.
pub fn perturbed(pose: &Pose, axis: Vector3<f64>, deg: f64, shift: Vector3<f64>) -> Pose {
    let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), deg.to_radians());
    Pose::new(r.matrix() * pose.rotation, pose.translation + shift)
}
