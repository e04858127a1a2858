//! Anatomy-informed synthetic data generation for 3D segmentation pre-training.
//!
//! The pipeline has three stages:
//!
//! 1. [`shape_bank`] turns label-only source volumes into a catalog of cropped
//!    per-instance organ masks, and [`anchors`] fits a Gaussian over each
//!    class's normalized centroid.
//! 2. [`placement`] composes a scene organ by organ: it samples a shape and an
//!    anchor, perturbs the anchor into a set of candidate poses, scores every
//!    candidate against the already-placed organs under a [`relation`] graph and
//!    keeps the best one.
//! 3. [`render`] turns the scene into a training pair: a contour-shell intensity
//!    image and a dense filled label volume, written with [`nifti`].
//!
//! Voxel data is stored with x varying fastest, then y, then z.

pub mod anchors;
pub mod dataset;
pub mod error;
pub mod ffi;
pub mod manifest;
pub mod nifti;
pub mod phantom;
pub mod placement;
pub mod relation;
pub mod render;
pub mod rng;
pub mod shape_bank;
pub mod volume;

pub use anchors::{fit_anchors, AnchorDistribution, AnchorModel};
pub use error::{Error, Result};
pub use placement::{
    generate_candidates, score_candidate, select_best, synthesize_scene, validate_scene,
    Candidate, SceneState, ScoreBreakdown, SynthesisConfig, ValidationReport,
};
pub use relation::{EdgeKind, RelationEdge, RelationGraph, Weights};
pub use render::{render_image, render_labels, RenderParams};
pub use shape_bank::{build_bank, AugmentParams, ShapeBank, ShapeEntry, Subject};
pub use volume::{BBox3, BinaryMask, Centroid, Dims, Grid, IntensityGrid, LabelGrid};
