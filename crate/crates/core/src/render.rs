//! Turns a composed scene into a training pair: a dense label volume and a
//! texture-free image in which each organ appears only as its contour shell.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::SceneState;
use crate::volume::{overlay, shell, BinaryMask, IntensityGrid, LabelGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub shell_thickness: usize,
    pub intensity_range: [f32; 2],
    pub background: f32,
    pub noise_sigma: f32,
    /// Draw one shell intensity per instance; otherwise use the range midpoint.
    pub per_instance_intensity: bool,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            shell_thickness: 1,
            intensity_range: [0.3, 1.0],
            background: 0.0,
            noise_sigma: 0.02,
            per_instance_intensity: true,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.intensity_range;
        if !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("intensity range [{lo}, {hi}] must satisfy 0 < lo < hi <= 1")));
        }
        if self.shell_thickness < 1 {
            return Err(Error::Config("shell thickness must be >= 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::Config("background must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Filled label volume, composited largest organ first so smaller organs stay
/// visible where they overlap.
pub fn render_labels(scene: &SceneState) -> LabelGrid {
    let mut grid = LabelGrid::new(scene.dims());
    for i in scene.compositing_order() {
        let p = &scene.placements()[i];
        overlay(&mut grid, &p.candidate.mask, p.candidate.offset, p.class_id);
    }
    grid
}

/// The scene-clipped part of a placement as a local window: (origin, mask).
/// Window faces are either scene borders or lie in the shape's empty margin,
/// so erosion inside the window equals erosion in the full scene frame.
fn clipped_window(mask: &BinaryMask, offset: [i64; 3], dims: [usize; 3]) -> Option<([usize; 3], BinaryMask)> {
    let sd = mask.dims();
    let mut lo = [0usize; 3];
    let mut ext = [0usize; 3];
    for a in 0..3 {
        let start = offset[a].max(0);
        let end = (offset[a] + sd[a] as i64).min(dims[a] as i64);
        if end <= start {
            return None;
        }
        lo[a] = start as usize;
        ext[a] = (end - start) as usize;
    }
    let shift = [0, 1, 2].map(|a| offset[a] - lo[a] as i64);
    let local = mask.placed(ext, shift);
    (!local.is_empty()).then_some((lo, local))
}

/// Contour-shell image: background everywhere, each instance's outer
/// `shell_thickness` voxels painted with one intensity, then additive Gaussian
/// noise and a clamp to `[0, 1]`.
pub fn render_image(scene: &SceneState, params: &RenderParams, rng: &mut impl Rng) -> IntensityGrid {
    let dims = scene.dims();
    let mut img = IntensityGrid::new(dims);
    img.fill(params.background);
    let [lo, hi] = params.intensity_range;
    for i in scene.compositing_order() {
        let p = &scene.placements()[i];
        let value = if params.per_instance_intensity {
            rng.random_range(lo..=hi)
        } else {
            0.5 * (lo + hi)
        };
        let Some((origin, local)) = clipped_window(&p.candidate.mask, p.candidate.offset, dims) else {
            continue;
        };
        for c in shell(&local, params.shell_thickness).iter_coords() {
            img.set(c[0] + origin[0], c[1] + origin[1], c[2] + origin[2], value);
        }
    }
    if params.noise_sigma > 0.0 {
        let noise = Normal::new(0.0f32, params.noise_sigma).expect("validated sigma");
        for v in img.data_mut() {
            *v = (*v + noise.sample(rng)).clamp(0.0, 1.0);
        }
    }
    img
}
