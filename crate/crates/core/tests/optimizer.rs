mod common;

use common::*;
use nalgebra::Vector3;
use pftrack::config::TrackerConfig;
use pftrack::flow::{compute_flow_crops, interior_correspondences, InteriorCorrespondence};
use pftrack::geometry::pose_errors;
use pftrack::imaging::to_gray_roi;
use pftrack::optimizer::{optimize_pose, FrameInputs, OptimizeOutcome};
use pftrack::segmentation::probability_map;
use pftrack::viewpoint::ViewpointModel;
use pftrack::{Pose, TriangleMesh};

/// Optimizes frame `to` starting from `from`, with colours learned on the
/// frame rendered at `from` and interior flow between the two frames.
fn optimize_between(mesh: &TriangleMesh, model: &ViewpointModel, from: &Pose, to: &Pose, interior: bool) -> OptimizeOutcome {
    let cfg = TrackerConfig { use_interior: interior, ..Default::default() };
    let t = tracker(mesh, model, cfg.clone());
    let prev = render(mesh, from, 1);
    let cur = render(mesh, to, 1);
    let state = t.init(&prev, from).unwrap();
    let prob = probability_map(&cur, &state.roi, &state.color_model);
    let flows: Vec<InteriorCorrespondence> = if interior {
        let params = cfg.flow.fitted_to(state.roi.width, state.roi.height).unwrap();
        let cur_gray = to_gray_roi(&cur, &state.roi);
        let flow = compute_flow_crops(&state.prev_gray, &cur_gray, state.roi, &params).unwrap();
        let view = &model.views[model.closest_view(from)];
        interior_correspondences(&view.interior_points, from, &camera(), &flow, &state.prev_gray, &cur_gray, &cfg.confidence)
    } else {
        Vec::new()
    };
    let k = camera();
    let inputs = FrameInputs { k: &k, model, prob: &prob, interior: &flows };
    optimize_pose(&inputs, from, &cfg.schedule, &cfg.fan).unwrap()
}

#[test]
fn every_iteration_lowers_the_frozen_energy() {
    let mesh = blob();
    let model = model_for(&mesh);
    let poses = blob_orbit(2);
    for interior in [true, false] {
        let out = optimize_between(&mesh, &model, &poses[0], &poses[1], interior);
        assert_eq!(out.steps.len(), 27);
        for (i, s) in out.steps.iter().enumerate() {
            assert!(s.energy_after <= s.energy_before * (1.0 + 1e-9), "iteration {i}: {s:?}");
        }
    }
}

#[test]
fn a_correct_pose_stays_put() {
    let mesh = blob();
    let model = model_for(&mesh);
    let pose = blob_orbit(1)[0];
    let out = optimize_between(&mesh, &model, &pose, &pose, true);
    let e = pose_errors(&out.pose, &pose);
    assert!(e.e_t < 2e-3 && e.e_r.to_degrees() < 1.0, "{e:?}");
}

#[test]
fn one_frame_of_motion_is_recovered() {
    let mesh = blob();
    let model = model_for(&mesh);
    let poses = blob_orbit(2);
    let before = pose_errors(&poses[0], &poses[1]);
    let out = optimize_between(&mesh, &model, &poses[0], &poses[1], true);
    let e = pose_errors(&out.pose, &poses[1]);
    assert!(e.e_t < 2e-3 && e.e_r.to_degrees() < 1.0, "{e:?} from {before:?}");

    // The blob silhouette hardly constrains rotation; the cylinder does,
    // except about its own axis.
    let mesh = cylinder();
    let model = model_for(&mesh);
    let truth = cylinder_orbit(1)[0];
    let across = truth.rotation * Vector3::x();
    let off = perturbed(&truth, across, 3.0, Vector3::new(0.006, -0.008, 0.0));
    let out = optimize_between(&mesh, &model, &off, &truth, false);
    let e = pose_errors(&out.pose, &truth);
    assert!(e.e_t < 2e-3 && e.e_r.to_degrees() < 1.0, "contour only: {e:?}");
}
