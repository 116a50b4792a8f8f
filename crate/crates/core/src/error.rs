use std::path::PathBuf;

/// Errors produced anywhere in the tracking toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("back-projection depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("no triangle of the mesh projects in front of the camera")]
    DegenerateMesh,
    #[error("malformed OBJ record at line {line}: {reason}")]
    MalformedObj { line: usize, reason: String },

    #[error("insufficient coverage: {found} {kind} pixels, {needed} requested")]
    InsufficientCoverage {
        kind: &'static str,
        found: usize,
        needed: usize,
    },
    #[error("template file has a bad magic number")]
    BadMagic,
    #[error("template file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("template file checksum mismatch")]
    ChecksumMismatch,
    #[error("template model was generated for a different mesh")]
    MeshMismatch,
    #[error("template file is truncated or malformed: {0}")]
    MalformedTemplate(String),

    #[error("colour model update found an empty {0} region")]
    EmptyRegion(&'static str),
    #[error("point ({x:.2}, {y:.2}) lies outside the region of interest")]
    OutOfRoi { x: f64, y: f64 },

    #[error("correspondence is not valid")]
    InvalidCorrespondence,
    #[error("mixture weights must be positive (a1 = {a1}, a2 = {a2})")]
    NonPositiveWeight { a1: f64, a2: f64 },

    #[error("region of interest {width}x{height} is smaller than one flow patch at the coarsest level")]
    RoiTooSmall { width: usize, height: usize },
    #[error("confidence patch around ({x:.2}, {y:.2}) leaves the flow field")]
    PatchOutOfBounds { x: f64, y: f64 },

    #[error("normal equations are singular")]
    SingularSystem,
    #[error("tracking lost: only {valid} valid contour correspondences")]
    LostTrack { valid: usize },
    #[error("object is not visible in the image at the given pose")]
    ObjectOutOfView,

    #[error("sequence at {0} has missing frames")]
    MissingFrames(PathBuf),
    #[error("malformed pose at line {line}: {reason}")]
    MalformedPoseLine { line: usize, reason: String },
    #[error("malformed trajectory at line {line}: {reason}")]
    MalformedTrajectory { line: usize, reason: String },
    #[error("sequence has no ground truth poses")]
    MissingGroundTruth,
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
