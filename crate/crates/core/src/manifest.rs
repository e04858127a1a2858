//! JSON scene manifests and the dataset index.
//!
//! A manifest records everything needed to rebuild a scene exactly: every
//! placement with its pose, anchor, score breakdown and shape mask
//! (run-length encoded), every skipped instance, the seed and the full
//! configuration.
//!
//! ```json
//! {
//!   "format": "anatomy-forge/scene-v1",
//!   "index": 0, "seed": 42, "dims": [96, 96, 96],
//!   "config": { ... }, "render": { ... },
//!   "placements": [{
//!     "step": 0, "class_id": 5, "class_name": "liver", "instance": 0,
//!     "offset": [12, 30, 40], "centroid": [0.31, 0.52, 0.61],
//!     "anchor": [0.32, 0.5, 0.6], "attempts": 1, "voxels": 9120,
//!     "score": { "s_spatial": -0.02, "s_phys": -0.0, "s_topo": 0.0,
//!                "total": -0.02, "rejection": null },
//!     "mask": { "dims": [30, 26, 22], "runs": [31, 4, 22, ...] }
//!   }],
//!   "skips": [{ "class_id": 11, "instance": 0, "attempts": 6, "reason": "all_rejected" }],
//!   "compositing_order": [0, 2, 1]
//! }
//! ```
//!
//! `runs` alternates background and foreground run lengths over the mask's
//! flat (x-fastest) order, starting with background.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{Candidate, SceneState, ScoreBreakdown, Skip, SynthesisConfig};
use crate::relation::RelationGraph;
use crate::render::RenderParams;
use crate::volume::{BinaryMask, Dims};

pub const SCENE_FORMAT: &str = "anatomy-forge/scene-v1";
pub const DATASET_FORMAT: &str = "anatomy-forge/dataset-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RleMask {
    pub dims: Dims,
    pub runs: Vec<u32>,
}

impl RleMask {
    pub fn encode(m: &BinaryMask) -> Self {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for i in 0..m.len() {
            let v = m.get_index(i);
            if v != current {
                runs.push(len);
                current = v;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        Self { dims: m.dims(), runs }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        let mut m = BinaryMask::new(self.dims);
        let mut i = 0usize;
        for (k, &r) in self.runs.iter().enumerate() {
            let end = i + r as usize;
            if end > m.len() {
                return Err(Error::Config("mask runs exceed mask size".into()));
            }
            if k % 2 == 1 {
                for j in i..end {
                    m.set_index(j, true);
                }
            }
            i = end;
        }
        if i != m.len() {
            return Err(Error::Config("mask runs do not cover the mask".into()));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub step: usize,
    pub class_id: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
    pub instance: usize,
    pub offset: [i64; 3],
    pub centroid: [f64; 3],
    pub anchor: [f64; 3],
    pub attempts: usize,
    pub voxels: usize,
    pub score: ScoreBreakdown,
    pub mask: RleMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub format: String,
    pub index: u64,
    pub seed: u64,
    pub dims: Dims,
    pub config: SynthesisConfig,
    pub render: RenderParams,
    pub placements: Vec<PlacementRecord>,
    pub skips: Vec<Skip>,
    pub compositing_order: Vec<usize>,
}

impl SceneManifest {
    pub fn from_scene(
        scene: &SceneState,
        index: u64,
        config: &SynthesisConfig,
        render: &RenderParams,
        graph: Option<&RelationGraph>,
    ) -> Self {
        let placements = scene
            .placements()
            .iter()
            .map(|p| PlacementRecord {
                step: p.step,
                class_id: p.class_id,
                class_name: graph.and_then(|g| g.name(p.class_id)).map(str::to_string),
                instance: p.instance,
                offset: p.candidate.offset,
                centroid: p.candidate.centroid,
                anchor: p.anchor,
                attempts: p.attempts,
                voxels: p.voxels,
                score: p.score,
                mask: RleMask::encode(&p.candidate.mask),
            })
            .collect();
        Self {
            format: SCENE_FORMAT.to_string(),
            index,
            seed: config.seed,
            dims: scene.dims(),
            config: config.clone(),
            render: *render,
            placements,
            skips: scene.skips().to_vec(),
            compositing_order: scene.compositing_order(),
        }
    }

    /// Replays the recorded placements into a scene.
    pub fn to_scene(&self) -> Result<SceneState> {
        let mut scene = SceneState::new(self.dims);
        for r in &self.placements {
            let cand = Candidate::new(Arc::new(r.mask.decode()?), r.offset, self.dims);
            scene.place(r.class_id, r.instance, cand, r.score, r.anchor, r.attempts);
        }
        for s in &self.skips {
            scene.record_skip(s.clone());
        }
        Ok(scene)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if m.format != SCENE_FORMAT {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                msg: format!("unknown format {:?}", m.format),
            });
        }
        Ok(m)
    }
}

pub fn image_name(index: u64) -> String {
    format!("img_{index:06}.nii")
}

pub fn label_name(index: u64) -> String {
    format!("lab_{index:06}.nii")
}

pub fn manifest_name(index: u64) -> String {
    format!("scene_{index:06}.json")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub index: u64,
    pub image: String,
    pub label: String,
    pub manifest: String,
}

/// `dataset.json`: index of every pair in an output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub format: String,
    pub seed: u64,
    pub count: u64,
    pub num_classes: usize,
    pub class_names: Vec<(u8, String)>,
    pub pairs: Vec<DatasetEntry>,
}

impl DatasetIndex {
    pub fn new(seed: u64, indices: impl IntoIterator<Item = u64>, graph: &RelationGraph) -> Self {
        let pairs: Vec<DatasetEntry> = indices
            .into_iter()
            .map(|index| DatasetEntry {
                index,
                image: image_name(index),
                label: label_name(index),
                manifest: manifest_name(index),
            })
            .collect();
        Self {
            format: DATASET_FORMAT.to_string(),
            seed,
            count: pairs.len() as u64,
            num_classes: graph.num_classes(),
            class_names: graph.names().iter().map(|(&k, v)| (k, v.clone())).collect(),
            pairs,
        }
    }
}

/// Scene manifests in `dir`, sorted by name.
pub fn list_manifests(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("scene_") && n.ends_with(".json"))
        })
        .collect();
    out.sort();
    Ok(out)
}
