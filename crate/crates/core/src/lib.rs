//! Monocular 6DoF pose tracking of rigid objects.
//!
//! The tracker fuses two cues in a re-weighted, regularized Gauss-Newton
//! loop:
//!
//! * **Contour** – silhouette points from precomputed viewpoint templates are
//!   matched against a colour-statistics probability map with a fan of search
//!   lines; each match becomes a distribution with shape and noise
//!   uncertainty ([`contour`]).
//! * **Interior** – interior template points are followed with dense
//!   inverse-search optical flow and weighted by patch-wise flow confidence
//!   ([`flow`]).
//!
//! Offline, [`viewpoint`] renders the mesh from an icosphere of directions
//! with the CPU [`rasterizer`] and stores the sampled points. [`bench`]
//! provides sequence I/O, a synthetic sequence generator and the usual
//! 5cm-5° / ADD / AUC metrics.

pub mod bench;
pub mod config;
pub mod contour;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod imaging;
pub mod mesh;
pub mod optimizer;
pub mod rasterizer;
pub mod segmentation;
pub mod tracker;
pub mod viewpoint;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, Pose, PoseError, Twist};
pub use imaging::{Mask, Plane, Rect};
pub use mesh::TriangleMesh;
