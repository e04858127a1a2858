//! Dataset-level driver: index-addressed scene generation, directory output,
//! and directory-wide validation and centroid statistics.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::AnchorModel;
use crate::error::{Error, Result};
use crate::manifest::{
    image_name, label_name, list_manifests, manifest_name, DatasetIndex, SceneManifest,
};
use crate::nifti::{read_nifti, write_nifti, Datatype};
use crate::placement::{synthesize_scene, validate_scene, SceneState, SynthesisConfig, ValidationReport};
use crate::relation::RelationGraph;
use crate::render::{render_image, render_labels, RenderParams};
use crate::rng::{render_rng, scene_rng};
use crate::shape_bank::ShapeBank;
use crate::volume::{IntensityGrid, LabelGrid};

/// Everything needed to produce scene `i` of a dataset. Generation is a pure
/// function of `(inputs, config.seed, i)`.
pub struct Generator {
    pub bank: ShapeBank,
    pub anchors: AnchorModel,
    pub graph: RelationGraph,
    pub config: SynthesisConfig,
    pub render: RenderParams,
}

pub struct GeneratedPair {
    pub index: u64,
    pub scene: SceneState,
    pub image: IntensityGrid,
    pub labels: LabelGrid,
}

impl Generator {
    pub fn new(
        bank: ShapeBank,
        anchors: AnchorModel,
        graph: RelationGraph,
        config: SynthesisConfig,
        render: RenderParams,
    ) -> Result<Self> {
        config.validate()?;
        render.validate()?;
        if graph.num_classes() != bank.num_classes() {
            return Err(Error::Config(format!(
                "graph declares {} classes but the bank has {}",
                graph.num_classes(),
                bank.num_classes()
            )));
        }
        if let Some(c) = (1..=bank.num_classes() as u8).find(|&c| anchors.get(c).is_none()) {
            return Err(Error::Config(format!("anchor table has no row for class {c}")));
        }
        Ok(Self { bank, anchors, graph, config, render })
    }

    pub fn scene(&self, index: u64) -> Result<SceneState> {
        let mut rng = scene_rng(self.config.seed, index);
        synthesize_scene(&self.bank, &self.anchors, &self.graph, &self.config, &mut rng)
    }

    pub fn pair(&self, index: u64) -> Result<GeneratedPair> {
        let scene = self.scene(index)?;
        let labels = render_labels(&scene);
        let image = render_image(&scene, &self.render, &mut render_rng(self.config.seed, index));
        Ok(GeneratedPair { index, scene, image, labels })
    }

    pub fn manifest(&self, pair: &GeneratedPair) -> SceneManifest {
        SceneManifest::from_scene(&pair.scene, pair.index, &self.config, &self.render, Some(&self.graph))
    }

    /// Writes `img_*.nii`, `lab_*.nii` and `scene_*.json` for one index.
    pub fn write_pair(&self, out_dir: &Path, index: u64) -> Result<GeneratedPair> {
        let pair = self.pair(index)?;
        write_nifti(&pair.image, &out_dir.join(image_name(index)), Datatype::Float32)?;
        write_nifti(&pair.labels, &out_dir.join(label_name(index)), Datatype::Uint8)?;
        std::fs::write(out_dir.join(manifest_name(index)), self.manifest(&pair).to_json()?)?;
        Ok(pair)
    }

    /// Generates `count` pairs on `jobs` threads and writes `dataset.json`.
    pub fn write_dataset(&self, out_dir: &Path, count: u64, jobs: usize) -> Result<RunSummary> {
        std::fs::create_dir_all(out_dir)?;
        let start = Instant::now();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        let per_scene: Vec<(usize, usize)> = pool.install(|| {
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let p = self.write_pair(out_dir, i)?;
                    Ok((p.scene.placements().len(), p.scene.skips().len()))
                })
                .collect::<Result<_>>()
        })?;
        let index = DatasetIndex::new(self.config.seed, 0..count, &self.graph);
        std::fs::write(out_dir.join("dataset.json"), serde_json::to_string_pretty(&index)?)?;
        Ok(RunSummary {
            scenes: count,
            placements: per_scene.iter().map(|p| p.0).sum(),
            skips: per_scene.iter().map(|p| p.1).sum(),
            elapsed: start.elapsed(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub scenes: u64,
    pub placements: usize,
    pub skips: usize,
    pub elapsed: Duration,
}

impl RunSummary {
    pub fn volumes_per_second(&self) -> f64 {
        self.scenes as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DirValidation {
    pub scenes: usize,
    pub report: ValidationReport,
    /// Scenes whose label volume differs from the one rebuilt from the manifest.
    pub label_mismatches: Vec<String>,
    /// Scenes with no label volume next to the manifest.
    pub missing_labels: Vec<String>,
}

impl DirValidation {
    pub fn is_clean(&self) -> bool {
        self.report.hard_violations() == 0 && self.label_mismatches.is_empty()
    }
}

/// Validates every `scene_*.json` in `dir` against `graph`, and checks each
/// label volume against the scene rebuilt from its manifest.
pub fn validate_dir(dir: &Path, graph: &RelationGraph) -> Result<DirValidation> {
    let manifests = list_manifests(dir)?;
    if manifests.is_empty() {
        return Err(Error::Config(format!("no scene manifests in {}", dir.display())));
    }
    let per_scene: Vec<(String, ValidationReport, Option<bool>)> = manifests
        .par_iter()
        .map(|path| {
            let m = SceneManifest::load(path)?;
            let scene = m.to_scene()?;
            let report = validate_scene(&scene, graph);
            let lab_path = dir.join(label_name(m.index));
            let matches = if lab_path.exists() {
                let on_disk = read_nifti(&lab_path)?.into_labels();
                Some(on_disk.as_ref() == Some(&render_labels(&scene)))
            } else {
                None
            };
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            Ok((name, report, matches))
        })
        .collect::<Result<_>>()?;
    let mut out = DirValidation::default();
    for (name, report, matches) in per_scene {
        out.scenes += 1;
        out.report.merge(&report);
        match matches {
            Some(false) => out.label_mismatches.push(name),
            None => out.missing_labels.push(name),
            Some(true) => {}
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: u8,
    pub n: usize,
    /// Too few placements for a covariance estimate.
    pub low_n: bool,
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
    pub anchor_mu: Option<[f64; 3]>,
    pub anchor_sigma: Option<[[f64; 3]; 3]>,
    /// `|mean - mu|` per axis.
    pub abs_error: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub scenes: usize,
    pub classes: Vec<ClassStats>,
    pub warnings: Vec<String>,
}

impl StatsReport {
    /// Fraction of anchored classes whose per-axis mean error is below `tol`.
    pub fn fraction_within(&self, tol: f64) -> f64 {
        let scored: Vec<&[f64; 3]> = self.classes.iter().filter_map(|c| c.abs_error.as_ref()).collect();
        if scored.is_empty() {
            return 0.0;
        }
        scored.iter().filter(|e| e.iter().all(|&v| v < tol)).count() as f64 / scored.len() as f64
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>5} {:>5} {:>22} {:>22} {:>8}\n",
            "class", "n", "mean (x,y,z)", "anchor mu", "max|err|"
        );
        for c in &self.classes {
            let fmt = |v: &[f64; 3]| format!("{:.3},{:.3},{:.3}", v[0], v[1], v[2]);
            let mu = c.anchor_mu.as_ref().map(fmt).unwrap_or_else(|| "-".into());
            let err = c
                .abs_error
                .map(|e| format!("{:.4}", e.iter().cloned().fold(0.0, f64::max)))
                .unwrap_or_else(|| "-".into());
            let flag = if c.low_n { " (n<2)" } else { "" };
            s.push_str(&format!(
                "{:>5} {:>5} {:>22} {:>22} {:>8}{flag}\n",
                c.class_id,
                c.n,
                fmt(&c.mean),
                mu,
                err
            ));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

/// Per-class empirical centroid statistics of placed instances, compared with
/// the anchor distributions.
pub fn centroid_stats<'a>(
    manifests: impl IntoIterator<Item = &'a SceneManifest>,
    anchors: &AnchorModel,
) -> StatsReport {
    let mut pts: BTreeMap<u8, Vec<[f64; 3]>> = BTreeMap::new();
    let mut scenes = 0;
    for m in manifests {
        scenes += 1;
        for p in &m.placements {
            pts.entry(p.class_id).or_default().push(p.centroid);
        }
    }
    let mut report = StatsReport { scenes, ..Default::default() };
    for (&class_id, v) in &pts {
        let n = v.len();
        let mut mean = [0.0; 3];
        for p in v {
            for a in 0..3 {
                mean[a] += p[a] / n as f64;
            }
        }
        let mut cov = [[0.0; 3]; 3];
        if n > 1 {
            for p in v {
                for r in 0..3 {
                    for c in 0..3 {
                        cov[r][c] += (p[r] - mean[r]) * (p[c] - mean[c]) / (n - 1) as f64;
                    }
                }
            }
        }
        let anchor = anchors.get(class_id);
        if anchor.is_none() {
            report.warnings.push(format!("class {class_id} appears in scenes but has no anchor"));
        }
        report.classes.push(ClassStats {
            class_id,
            n,
            low_n: n < 2,
            mean,
            cov,
            anchor_mu: anchor.map(|a| a.mu),
            anchor_sigma: anchor.map(|a| a.sigma),
            abs_error: anchor.map(|a| [0, 1, 2].map(|i| (mean[i] - a.mu[i]).abs())),
        });
    }
    for a in anchors.iter() {
        if !pts.contains_key(&a.class_id) {
            report.warnings.push(format!("anchored class {} never placed", a.class_id));
        }
    }
    report
}

/// [`centroid_stats`] over every manifest in `dir`.
pub fn stats_dir(dir: &Path, anchors: &AnchorModel) -> Result<StatsReport> {
    let paths = list_manifests(dir)?;
    if paths.is_empty() {
        return Err(Error::Config(format!("no scene manifests in {}", dir.display())));
    }
    let manifests: Vec<SceneManifest> = paths.iter().map(|p| SceneManifest::load(p)).collect::<Result<_>>()?;
    Ok(centroid_stats(&manifests, anchors))
}

/// Loads a bank, anchor table and optional relation graph (the built-in graph
/// when `None`) into a [`Generator`].
///
/// `overrides` is a JSON object merged over the default [`SynthesisConfig`];
/// an optional `"render"` member is merged over the default [`RenderParams`].
pub fn open_generator(
    bank: &Path,
    anchors: &Path,
    graph: Option<&Path>,
    overrides: Option<&serde_json::Value>,
) -> Result<Generator> {
    let bank = ShapeBank::load(bank)?;
    let anchors = AnchorModel::from_text(&std::fs::read_to_string(anchors)?)?;
    let graph_text = match graph {
        Some(p) => std::fs::read_to_string(p)?,
        None => crate::relation::DEFAULT_GRAPH.to_string(),
    };
    let graph = crate::relation::load_graph(&graph_text, bank.num_classes())?;
    let mut config = serde_json::to_value(SynthesisConfig::default())?;
    let mut render = serde_json::to_value(RenderParams::default())?;
    if let Some(o) = overrides {
        let obj = o
            .as_object()
            .ok_or_else(|| Error::Config("config overrides must be a JSON object".into()))?;
        for (k, v) in obj {
            if k == "render" {
                merge(&mut render, v)?;
            } else {
                merge(&mut config, &serde_json::json!({ k: v }))?;
            }
        }
    }
    let config: SynthesisConfig =
        serde_json::from_value(config).map_err(|e| Error::Config(format!("config: {e}")))?;
    let render: RenderParams =
        serde_json::from_value(render).map_err(|e| Error::Config(format!("render: {e}")))?;
    Generator::new(bank, anchors, graph, config, render)
}

fn merge(base: &mut serde_json::Value, patch: &serde_json::Value) -> Result<()> {
    let (Some(b), Some(p)) = (base.as_object_mut(), patch.as_object()) else {
        return Err(Error::Config("overrides must be JSON objects".into()));
    };
    for (k, v) in p {
        if !b.contains_key(k) {
            return Err(Error::Config(format!("unknown config key {k:?}")));
        }
        b.insert(k.clone(), v.clone());
    }
    Ok(())
}

/// Read access to a directory written by [`Generator::write_dataset`].
pub struct DatasetReader {
    dir: std::path::PathBuf,
    pub index: DatasetIndex,
}

impl DatasetReader {
    pub fn len(&self) -> usize {
        self.index.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.pairs.is_empty()
    }

    /// The `i`-th pair listed in `dataset.json`.
    pub fn get(&self, i: usize) -> Result<(IntensityGrid, LabelGrid, SceneManifest)> {
        let e = self
            .index
            .pairs
            .get(i)
            .ok_or_else(|| Error::Config(format!("pair {i} out of range 0..{}", self.len())))?;
        let image = read_nifti(&self.dir.join(&e.image))?
            .into_intensity()
            .ok_or_else(|| Error::Config(format!("{} is not an intensity volume", e.image)))?;
        let labels = read_nifti(&self.dir.join(&e.label))?
            .into_labels()
            .ok_or_else(|| Error::Config(format!("{} is not a label volume", e.label)))?;
        Ok((image, labels, SceneManifest::load(&self.dir.join(&e.manifest))?))
    }
}

pub fn read_dataset(dir: &Path) -> Result<DatasetReader> {
    let path = dir.join("dataset.json");
    let index: DatasetIndex = serde_json::from_str(&std::fs::read_to_string(&path)?)
        .map_err(|e| Error::Manifest { path: path.clone(), msg: e.to_string() })?;
    if index.format != crate::manifest::DATASET_FORMAT {
        return Err(Error::Manifest { path, msg: format!("unknown format {:?}", index.format) });
    }
    Ok(DatasetReader { dir: dir.to_path_buf(), index })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom;
    use crate::relation::{load_graph, DEFAULT_GRAPH};
    use crate::shape_bank::{build_bank, BankOptions};
    use crate::anchors::fit_anchors;

    fn generator(dims: [usize; 3]) -> Generator {
        let corpus = phantom::corpus(2, [64, 64, 64], 8);
        let bank = build_bank(&corpus, &phantom::raw_labels(), BankOptions::default()).unwrap();
        let anchors = fit_anchors(&corpus, bank.class_map()).unwrap();
        let graph = load_graph(DEFAULT_GRAPH, 32).unwrap();
        let config = SynthesisConfig { dims, n_candidates: 8, seed: 3, ..Default::default() };
        Generator::new(bank, anchors, graph, config, RenderParams::default()).unwrap()
    }

    #[test]
    fn pairs_are_a_function_of_index() {
        let g = generator([40, 40, 40]);
        let a = g.pair(2).unwrap();
        let b = g.pair(2).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.labels, b.labels);
        assert_ne!(g.pair(3).unwrap().labels, a.labels);
        assert_eq!(a.labels, render_labels(&g.manifest(&a).to_scene().unwrap()));
    }

    #[test]
    fn written_directory_validates_and_reports_stats() {
        let g = generator([40, 40, 40]);
        let dir = tempfile::tempdir().unwrap();
        let summary = g.write_dataset(dir.path(), 3, 2).unwrap();
        assert_eq!(summary.scenes, 3);
        let v = validate_dir(dir.path(), &g.graph).unwrap();
        assert_eq!(v.scenes, 3);
        assert!(v.is_clean());
        assert!(v.missing_labels.is_empty());

        let st = stats_dir(dir.path(), &g.anchors).unwrap();
        assert_eq!(st.scenes, 3);
        let placed: usize = (0..3)
            .map(|i| SceneManifest::load(&dir.path().join(manifest_name(i))).unwrap().placements.len())
            .sum();
        assert_eq!(st.classes.iter().map(|c| c.n).sum::<usize>(), placed);
        assert!(st.classes.iter().all(|c| c.n <= 3 && c.low_n == (c.n < 2)));
        assert!(st.table().contains("class"));

        // corrupt one label volume
        let mut lab = read_nifti(&dir.path().join(label_name(1))).unwrap().into_labels().unwrap();
        lab.data_mut()[0] = 7;
        write_nifti(&lab, &dir.path().join(label_name(1)), Datatype::Uint8).unwrap();
        let v = validate_dir(dir.path(), &g.graph).unwrap();
        assert_eq!(v.label_mismatches, vec![manifest_name(1)]);
        assert!(!v.is_clean());
    }

    #[test]
    fn mismatched_inputs_are_refused() {
        let g = generator([40, 40, 40]);
        let small = load_graph("class 1 a\nclass 2 b\n", 2).unwrap();
        assert!(Generator::new(g.bank.clone(), g.anchors.clone(), small, g.config.clone(), g.render).is_err());
        let partial = AnchorModel::new(g.anchors.iter().filter(|a| a.class_id != 4).cloned()).unwrap();
        assert!(Generator::new(g.bank.clone(), partial, g.graph.clone(), g.config.clone(), g.render).is_err());
    }

    #[test]
    fn open_generator_applies_overrides_and_matches_written_files() {
        let g = generator([40, 40, 40]);
        let dir = tempfile::tempdir().unwrap();
        let (bank, anchors) = (dir.path().join("b.bank"), dir.path().join("a.txt"));
        g.bank.save(&bank).unwrap();
        std::fs::write(&anchors, g.anchors.to_text()).unwrap();
        let o = serde_json::json!({ "dims": [40, 40, 40], "n_candidates": 8, "seed": 3 });
        let h = open_generator(&bank, &anchors, None, Some(&o)).unwrap();
        assert_eq!(h.config, g.config);

        let out = dir.path().join("out");
        g.write_dataset(&out, 2, 1).unwrap();
        let r = read_dataset(&out).unwrap();
        assert_eq!(r.len(), 2);
        let (img, lab, m) = r.get(1).unwrap();
        let p = h.pair(1).unwrap();
        assert_eq!((img, lab), (p.image, p.labels));
        assert_eq!(m.placements.len(), p.scene.placements().len());
        assert!(r.get(2).is_err());

        let bad = serde_json::json!({ "n_candidatez": 8 });
        assert!(open_generator(&bank, &anchors, None, Some(&bad)).is_err());
        assert!(open_generator(&dir.path().join("missing"), &anchors, None, None).is_err());
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let g = load_graph(DEFAULT_GRAPH, 32).unwrap();
        assert!(validate_dir(dir.path(), &g).is_err());
    }
}
