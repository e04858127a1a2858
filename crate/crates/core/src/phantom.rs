//! Procedural label-only torso phantoms.
//!
//! Real label corpora are not redistributable, so examples and tests build
//! their source subjects here: 32 organ-like classes, each an ellipsoid with a
//! secondary lobe, with per-subject jitter in position, size and lobe shape.
//! Axes are x (right to left), y (anterior to posterior), z (inferior to
//! superior), all in normalized units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::shape_bank::Subject;
use crate::volume::{Dims, LabelGrid};

pub struct OrganSpec {
    pub name: &'static str,
    pub center: [f64; 3],
    pub radii: [f64; 3],
    /// Tubular organs get no secondary lobe.
    pub lobed: bool,
}

const fn organ(name: &'static str, center: [f64; 3], radii: [f64; 3], lobed: bool) -> OrganSpec {
    OrganSpec { name, center, radii, lobed }
}

/// Raw label `i + 1` is `ORGANS[i]`.
pub const ORGANS: [OrganSpec; 32] = [
    organ("spleen", [0.72, 0.62, 0.60], [0.07, 0.05, 0.09], true),
    organ("kidney_right", [0.33, 0.72, 0.45], [0.05, 0.05, 0.08], true),
    organ("kidney_left", [0.67, 0.72, 0.47], [0.05, 0.05, 0.08], true),
    organ("gallbladder", [0.36, 0.38, 0.52], [0.03, 0.03, 0.04], true),
    organ("liver", [0.32, 0.50, 0.62], [0.17, 0.14, 0.11], true),
    organ("stomach", [0.62, 0.42, 0.62], [0.09, 0.07, 0.08], true),
    organ("aorta", [0.53, 0.66, 0.55], [0.025, 0.025, 0.30], false),
    organ("inferior_vena_cava", [0.45, 0.62, 0.55], [0.025, 0.025, 0.28], false),
    organ("portal_vein", [0.42, 0.52, 0.56], [0.02, 0.02, 0.05], false),
    organ("pancreas", [0.55, 0.55, 0.52], [0.10, 0.03, 0.03], true),
    organ("adrenal_gland_right", [0.38, 0.68, 0.57], [0.02, 0.015, 0.025], false),
    organ("adrenal_gland_left", [0.62, 0.68, 0.58], [0.02, 0.015, 0.025], false),
    organ("lung_left", [0.68, 0.55, 0.85], [0.13, 0.17, 0.12], true),
    organ("lung_right", [0.32, 0.55, 0.85], [0.13, 0.17, 0.12], true),
    organ("trachea", [0.50, 0.50, 0.93], [0.025, 0.025, 0.06], false),
    organ("esophagus", [0.52, 0.62, 0.80], [0.02, 0.02, 0.15], false),
    organ("heart", [0.55, 0.40, 0.78], [0.10, 0.09, 0.08], true),
    organ("duodenum", [0.48, 0.50, 0.45], [0.06, 0.03, 0.03], true),
    organ("small_bowel", [0.48, 0.35, 0.30], [0.14, 0.08, 0.10], true),
    organ("colon", [0.50, 0.40, 0.20], [0.22, 0.06, 0.06], true),
    organ("urinary_bladder", [0.50, 0.38, 0.08], [0.06, 0.05, 0.05], true),
    organ("vertebra_T10", [0.50, 0.80, 0.74], [0.05, 0.05, 0.028], false),
    organ("vertebra_T11", [0.50, 0.80, 0.67], [0.05, 0.05, 0.028], false),
    organ("vertebra_T12", [0.50, 0.80, 0.60], [0.05, 0.05, 0.028], false),
    organ("vertebra_L1", [0.50, 0.80, 0.53], [0.05, 0.05, 0.028], false),
    organ("vertebra_L2", [0.50, 0.80, 0.46], [0.05, 0.05, 0.028], false),
    organ("vertebra_L3", [0.50, 0.80, 0.39], [0.05, 0.05, 0.028], false),
    organ("vertebra_L4", [0.50, 0.80, 0.32], [0.05, 0.05, 0.028], false),
    organ("vertebra_L5", [0.50, 0.80, 0.25], [0.05, 0.05, 0.028], false),
    organ("sacrum", [0.50, 0.80, 0.14], [0.06, 0.05, 0.05], true),
    organ("hip_left", [0.72, 0.65, 0.10], [0.08, 0.09, 0.08], true),
    organ("hip_right", [0.28, 0.65, 0.10], [0.08, 0.09, 0.08], true),
];

/// Raw labels `1..=32`.
pub fn raw_labels() -> Vec<u8> {
    (1..=ORGANS.len() as u8).collect()
}

pub fn class_names() -> Vec<&'static str> {
    ORGANS.iter().map(|o| o.name).collect()
}

struct Ellipsoid {
    center: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    fn paint(&self, grid: &mut LabelGrid, label: u8) {
        let dims = grid.dims();
        let scale = dims.map(|d| (d - 1) as f64);
        let c = [0, 1, 2].map(|a| self.center[a] * scale[a]);
        let r = [0, 1, 2].map(|a| (self.radii[a] * scale[a]).max(0.75));
        let lo = [0, 1, 2].map(|a| (c[a] - r[a]).floor().max(0.0) as usize);
        let hi = [0, 1, 2].map(|a| ((c[a] + r[a]).ceil() as usize).min(dims[a] - 1));
        if (0..3).any(|a| c[a] + r[a] < 0.0 || lo[a] > hi[a]) {
            return;
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let q = [x, y, z];
                    let d: f64 = (0..3).map(|a| ((q[a] as f64 - c[a]) / r[a]).powi(2)).sum();
                    if d <= 1.0 {
                        grid.set(x, y, z, label);
                    }
                }
            }
        }
    }
}

/// One phantom subject; `index` selects the jitter stream.
pub fn subject(dims: Dims, seed: u64, index: u64) -> Subject {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let body: [f64; 3] = [(); 3].map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal));
    let mut parts: Vec<(f64, u8, Vec<Ellipsoid>)> = ORGANS
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let s = rng.random_range(0.9..1.1);
            let center = [0, 1, 2].map(|a| o.center[a] + body[a] + 0.015 * rng.sample::<f64, _>(StandardNormal));
            let radii = o.radii.map(|r| r * s * rng.random_range(0.95..1.05));
            let mut blobs = vec![Ellipsoid { center, radii }];
            if o.lobed {
                let shift = [0, 1, 2].map(|a| radii[a] * rng.random_range(-0.6..0.6));
                blobs.push(Ellipsoid {
                    center: [0, 1, 2].map(|a| center[a] + shift[a]),
                    radii: radii.map(|r| r * rng.random_range(0.5..0.75)),
                });
            }
            let volume = radii[0] * radii[1] * radii[2];
            (volume, (i + 1) as u8, blobs)
        })
        .collect();
    // paint large organs first so small ones stay intact
    parts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut labels = LabelGrid::new(dims);
    for (_, label, blobs) in &parts {
        for b in blobs {
            b.paint(&mut labels, *label);
        }
    }
    Subject {
        id: format!("phantom_{index:03}"),
        labels,
    }
}

/// `k` phantom subjects sharing `seed`.
pub fn corpus(k: usize, dims: Dims, seed: u64) -> Vec<Subject> {
    (0..k as u64).map(|i| subject(dims, seed, i)).collect()
}
