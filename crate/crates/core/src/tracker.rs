//! Per-frame orchestration: region of interest, modalities, optimization
//! and the end-of-frame model updates.

use image::RgbImage;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::flow::{compute_flow_crops, interior_correspondences, InteriorCorrespondence};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::imaging::{to_gray_roi, Mask, Plane, Rect};
use crate::mesh::TriangleMesh;
use crate::optimizer::{optimize_pose, FrameInputs, OptimizeOutcome};
use crate::rasterizer::{mask_from_depth, rasterize_clipped};
use crate::segmentation::{bootstrap_color_model, probability_map, update_color_model, ColorModel};
use crate::viewpoint::ViewpointModel;

/// Everything that changes from frame to frame for one object.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub pose: Pose,
    pub color_model: ColorModel,
    pub roi: Rect,
    /// Luma of `roi` in the last frame.
    pub prev_gray: Plane,
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub pose: Pose,
    pub valid_contours: usize,
    pub interior_correspondences: usize,
    pub outcome: OptimizeOutcome,
}

/// Immutable tracking context for one object and camera.
#[derive(Debug, Clone)]
pub struct Tracker {
    mesh: TriangleMesh,
    model: ViewpointModel,
    k: CameraIntrinsics,
    config: TrackerConfig,
}

impl Tracker {
    pub fn new(mesh: TriangleMesh, model: ViewpointModel, k: CameraIntrinsics, config: TrackerConfig) -> Result<Self> {
        model.check_mesh(&mesh)?;
        config.validate()?;
        Ok(Self { mesh, model, k, config })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.k
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn model(&self) -> &ViewpointModel {
        &self.model
    }

    /// Projected bounding box of the mesh grown by the margin and clipped
    /// to the image.
    pub fn roi_for(&self, pose: &Pose, width: usize, height: usize) -> Result<Rect> {
        let mut lo = nalgebra::Vector2::repeat(f64::INFINITY);
        let mut hi = nalgebra::Vector2::repeat(f64::NEG_INFINITY);
        for v in self.mesh.vertices() {
            let x = self.k.project(pose, v).map_err(|_| Error::ObjectOutOfView)?;
            lo = lo.inf(&x);
            hi = hi.sup(&x);
        }
        Rect::from_bounds((lo.x, lo.y), (hi.x, hi.y), self.config.roi_margin as f64, width, height).ok_or(Error::ObjectOutOfView)
    }

    fn silhouette(&self, pose: &Pose, roi: &Rect, width: usize, height: usize) -> Result<Mask> {
        let raster = rasterize_clipped(&self.mesh, &self.k, pose, width, height, *roi)
            .map_err(|_| Error::ObjectOutOfView)?;
        Ok(mask_from_depth(&raster.depth))
    }

    /// Starts tracking at a known pose.
    pub fn init(&self, image: &RgbImage, pose: &Pose) -> Result<TrackerState> {
        let (w, h) = (image.width() as usize, image.height() as usize);
        let roi = self.roi_for(pose, w, h)?;
        let mask = self.silhouette(pose, &roi, w, h)?;
        let color_model = bootstrap_color_model(&self.config.histogram, image, &mask, &roi).map_err(|e| match e {
            Error::EmptyRegion(_) => Error::ObjectOutOfView,
            e => e,
        })?;
        Ok(TrackerState {
            pose: *pose,
            color_model,
            roi,
            prev_gray: to_gray_roi(image, &roi),
            frame_index: 0,
        })
    }

    /// Re-initializes at `pose` on `image`, keeping the frame counter.
    pub fn reset(&self, state: &mut TrackerState, image: &RgbImage, pose: &Pose) -> Result<()> {
        let frame_index = state.frame_index;
        *state = self.init(image, pose)?;
        state.frame_index = frame_index;
        Ok(())
    }

    fn interior(&self, state: &TrackerState, image: &RgbImage) -> Vec<InteriorCorrespondence> {
        if !self.config.use_interior {
            return Vec::new();
        }
        let roi = state.roi;
        let Some(params) = self.config.flow.fitted_to(roi.width, roi.height) else {
            return Vec::new();
        };
        let cur = to_gray_roi(image, &roi);
        let Ok(flow) = compute_flow_crops(&state.prev_gray, &cur, roi, &params) else {
            return Vec::new();
        };
        let view = &self.model.views[self.model.closest_view(&state.pose)];
        interior_correspondences(
            &view.interior_points,
            &state.pose,
            &self.k,
            &flow,
            &state.prev_gray,
            &cur,
            &self.config.confidence,
        )
    }

    /// Tracks one frame. On failure only the frame counter advances.
    pub fn track(&self, state: &mut TrackerState, image: &RgbImage) -> Result<FrameReport> {
        state.frame_index += 1;
        let (w, h) = (image.width() as usize, image.height() as usize);
        if !Rect::full(w, h).contains_rect(&state.roi) {
            return Err(Error::ObjectOutOfView);
        }
        let prob = probability_map(image, &state.roi, &state.color_model);
        let interior = self.interior(state, image);
        let inputs = FrameInputs { k: &self.k, model: &self.model, prob: &prob, interior: &interior };
        let outcome = optimize_pose(&inputs, &state.pose, &self.config.schedule, &self.config.fan)?;
        let pose = outcome.pose;

        let roi = self.roi_for(&pose, w, h)?;
        let mask = self.silhouette(&pose, &roi, w, h)?;
        // A silhouette that fills or misses the ROI leaves the colours as
        // they were.
        let color_model = match update_color_model(&state.color_model, image, &mask, &roi) {
            Ok(m) => m,
            Err(Error::EmptyRegion(_)) => state.color_model.clone(),
            Err(e) => return Err(e),
        };
        state.pose = pose;
        state.color_model = color_model;
        state.roi = roi;
        state.prev_gray = to_gray_roi(image, &roi);
        Ok(FrameReport {
            pose,
            valid_contours: outcome.valid_contours,
            interior_correspondences: interior.len(),
            outcome,
        })
    }
}
