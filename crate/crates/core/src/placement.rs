//! Structure-aware sequential placement.
//!
//! Each organ instance is placed by drawing a shape from the bank and an anchor
//! from its class Gaussian, perturbing the anchor into `N` candidate poses and
//! keeping the candidate with the highest score
//!
//! ```text
//! S = -λ_anc·‖t − a‖  −  λ_ovl·IoU(m, Y)  +  Σ_in λ_in·[|m ∩ Y_k| / |m| > τ_in]
//!                                         +  Σ_adj λ_adj·[|∂m ∩ Y_k| > ν_contact]
//! ```
//!
//! where `Y` is everything placed so far and `Y_k` the voxels of class `k`.
//! A candidate whose IoU with an excluded class exceeds that edge's `τ_hard`
//! is rejected outright. Distances are measured in normalized coordinates.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::anchors::AnchorModel;
use crate::error::{Error, Result};
use crate::relation::{EdgeKind, RelationGraph, Weights};
use crate::shape_bank::{sample_shape, AugmentParams, ShapeBank};
use crate::volume::{boundary_voxels, iou, translate, BinaryMask, Dims};

/// Fresh anchors drawn after every candidate of an instance is rejected.
pub const DEFAULT_RETRY_BUDGET: usize = 5;
/// Resamples of a single candidate that lands fully outside the scene.
const OUTSIDE_RETRIES: usize = 10;

/// A concrete pose: the shape translated by `offset` into scene coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub mask: Arc<BinaryMask>,
    pub offset: [i64; 3],
    /// Normalized scene-frame centroid of the (unclipped) translated shape.
    pub centroid: [f64; 3],
}

impl Candidate {
    pub fn new(mask: Arc<BinaryMask>, offset: [i64; 3], scene: Dims) -> Self {
        let (sums, n) = mask.coord_sums();
        let centroid = translated_centroid(sums, n, offset, scene);
        Self { mask, offset, centroid }
    }

    /// The candidate as a scene-frame mask, clipped to the scene.
    pub fn placed(&self, scene: Dims) -> BinaryMask {
        self.mask.placed(scene, self.offset)
    }
}

/// `(Σ(v + o) / n) / (d − 1)` per axis, from exact integer sums.
fn translated_centroid(sums: [u64; 3], n: u64, offset: [i64; 3], scene: Dims) -> [f64; 3] {
    [0, 1, 2].map(|a| {
        let s = sums[a] as i64 + n as i64 * offset[a];
        let p = s as f64 / n as f64;
        if scene[a] > 1 {
            p / (scene[a] - 1) as f64
        } else {
            0.5
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// The excluded, already-placed class that triggered the rejection.
    pub class_id: u8,
    pub iou: f64,
    pub tau_hard: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub s_spatial: f64,
    pub s_phys: f64,
    pub s_topo: f64,
    /// `s_spatial + s_phys + s_topo`, or `None` when rejected.
    pub total: Option<f64>,
    pub rejection: Option<Rejection>,
}

impl ScoreBreakdown {
    pub fn is_rejected(&self) -> bool {
        self.rejection.is_some()
    }
}

/// Voxel list of a shape with its own-frame boundary flags, so the `N`
/// candidates of one shape share the work.
#[derive(Clone, Debug)]
pub struct ShapeVoxels {
    dims: Dims,
    voxels: Vec<[i64; 3]>,
    boundary: Vec<bool>,
    sums: [u64; 3],
}

impl ShapeVoxels {
    pub fn new(mask: &BinaryMask) -> Self {
        let b = boundary_voxels(mask);
        let mut voxels = Vec::with_capacity(mask.count());
        let mut boundary = Vec::with_capacity(voxels.capacity());
        for i in mask.iter_ones() {
            let c = mask.coords(i);
            voxels.push(c.map(|v| v as i64));
            boundary.push(b.get_index(i));
        }
        let (sums, _) = mask.coord_sums();
        Self {
            dims: mask.dims(),
            voxels,
            boundary,
            sums,
        }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    fn fully_inside(&self, offset: [i64; 3], scene: Dims) -> bool {
        (0..3).all(|a| offset[a] >= 0 && offset[a] + self.dims[a] as i64 <= scene[a] as i64)
    }

    fn touches(&self, offset: [i64; 3], scene: Dims) -> bool {
        if self.fully_inside(offset, scene) {
            return !self.voxels.is_empty();
        }
        self.voxels.iter().any(|v| {
            (0..3).all(|a| {
                let p = v[a] + offset[a];
                p >= 0 && p < scene[a] as i64
            })
        })
    }
}

/// Organs placed so far: per-class occupancy, their union, and the ordered
/// placement record.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneState {
    dims: Dims,
    occupied: BTreeMap<u8, BinaryMask>,
    occupied_count: BTreeMap<u8, usize>,
    union: BinaryMask,
    union_count: usize,
    placements: Vec<Placement>,
    skips: Vec<Skip>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub step: usize,
    pub class_id: u8,
    /// Index of this instance within its class.
    pub instance: usize,
    pub candidate: Candidate,
    pub score: ScoreBreakdown,
    pub anchor: [f64; 3],
    /// Anchors drawn before a candidate was accepted (1 = first try).
    pub attempts: usize,
    /// In-scene voxel count of the placed mask.
    pub voxels: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Every candidate of every attempt hit an exclusion threshold.
    AllRejected,
    /// The augmented shape is larger than the scene along some axis.
    ShapeTooLarge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub class_id: u8,
    pub instance: usize,
    pub attempts: usize,
    pub reason: SkipReason,
}

impl SceneState {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            occupied: BTreeMap::new(),
            occupied_count: BTreeMap::new(),
            union: BinaryMask::new(dims),
            union_count: 0,
            placements: Vec::new(),
            skips: Vec::new(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn skips(&self) -> &[Skip] {
        &self.skips
    }

    /// Voxels of class `k` placed so far.
    pub fn occupied(&self, class_id: u8) -> Option<&BinaryMask> {
        self.occupied.get(&class_id)
    }

    pub fn union(&self) -> &BinaryMask {
        &self.union
    }

    /// Commits a candidate: updates occupancy and appends to the record.
    pub fn place(
        &mut self,
        class_id: u8,
        instance: usize,
        candidate: Candidate,
        score: ScoreBreakdown,
        anchor: [f64; 3],
        attempts: usize,
    ) -> &Placement {
        let dims = self.dims;
        let occ = self
            .occupied
            .entry(class_id)
            .or_insert_with(|| BinaryMask::new(dims));
        let mut voxels = 0;
        for c in candidate.mask.iter_coords() {
            if let Some(p) = translate(c, candidate.offset, dims) {
                let i = occ.index(p[0], p[1], p[2]);
                occ.set_index(i, true);
                self.union.set_index(i, true);
                voxels += 1;
            }
        }
        self.occupied_count.insert(class_id, occ.count());
        self.union_count = self.union.count();
        self.placements.push(Placement {
            step: self.placements.len(),
            class_id,
            instance,
            candidate,
            score,
            anchor,
            attempts,
            voxels,
        });
        self.placements.last().unwrap()
    }

    pub fn record_skip(&mut self, skip: Skip) {
        self.skips.push(skip);
    }

    /// Placement indices in compositing order: larger in-scene volume first,
    /// so smaller organs end on top; ties keep placement order.
    pub fn compositing_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.placements.len()).collect();
        idx.sort_by(|&a, &b| {
            self.placements[b]
                .voxels
                .cmp(&self.placements[a].voxels)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Draws `n` candidate poses around `anchor` (normalized), each placing the
/// shape's centroid at `anchor + δ`, `δ ~ N(0, σ²I)`, rounded to whole voxels.
///
/// A draw whose mask misses the scene entirely is redrawn up to ten times and
/// then clamped so the shape's box lies inside the scene.
pub fn generate_candidates(
    shape: &Arc<BinaryMask>,
    anchor: [f64; 3],
    scene: Dims,
    n: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Candidate>> {
    generate_for(shape, &ShapeVoxels::new(shape), anchor, scene, n, sigma, rng)
}

fn generate_for(
    shape: &Arc<BinaryMask>,
    voxels: &ShapeVoxels,
    anchor: [f64; 3],
    scene: Dims,
    n: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Candidate>> {
    let sd = shape.dims();
    if (0..3).any(|a| sd[a] > scene[a]) {
        return Err(Error::ShapeTooLarge { shape: sd, scene });
    }
    let count = voxels.len() as u64;
    let local = [0, 1, 2].map(|a| voxels.sums[a] as f64 / count as f64);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut offset = [0i64; 3];
        for attempt in 0..=OUTSIDE_RETRIES {
            for a in 0..3 {
                let d: f64 = rng.sample(StandardNormal);
                let target = (anchor[a] + sigma * d) * scene[a].saturating_sub(1) as f64;
                offset[a] = (target - local[a]).round() as i64;
            }
            if voxels.touches(offset, scene) {
                break;
            }
            if attempt == OUTSIDE_RETRIES {
                for a in 0..3 {
                    offset[a] = offset[a].clamp(0, (scene[a] - sd[a]) as i64);
                }
            }
        }
        out.push(Candidate {
            mask: Arc::clone(shape),
            offset,
            centroid: translated_centroid(voxels.sums, count, offset, scene),
        });
    }
    Ok(out)
}

/// Scores one candidate for class `class_id` against the current scene.
pub fn score_candidate(
    class_id: u8,
    candidate: &Candidate,
    anchor: [f64; 3],
    scene: &SceneState,
    graph: &RelationGraph,
) -> ScoreBreakdown {
    let voxels = ShapeVoxels::new(&candidate.mask);
    Scorer::new(class_id, scene, graph, graph.weights).score(&voxels, candidate, anchor)
}

/// Scoring context for one class against a fixed scene.
struct Scorer<'a> {
    scene: &'a SceneState,
    weights: Weights,
    /// (class, τ_hard) in declaration order.
    exclusions: Vec<(u8, f64)>,
    containment: Vec<(u8, f64)>,
    adjacency: Vec<(u8, u32)>,
    /// Distinct reference classes that are already placed.
    refs: Vec<u8>,
}

impl<'a> Scorer<'a> {
    fn new(class_id: u8, scene: &'a SceneState, graph: &RelationGraph, weights: Weights) -> Self {
        let placed = |k: &u8| scene.occupied.contains_key(k);
        let exclusions: Vec<(u8, f64)> = graph
            .exclusions_of(class_id)
            .into_iter()
            .filter(|(k, _)| placed(k))
            .collect();
        let containment: Vec<(u8, f64)> = graph
            .edges_for(class_id, EdgeKind::Containment)
            .iter()
            .filter(|e| placed(&e.b))
            .map(|e| (e.b, e.tau_in().unwrap()))
            .collect();
        let adjacency: Vec<(u8, u32)> = graph
            .edges_for(class_id, EdgeKind::Adjacency)
            .iter()
            .filter(|e| placed(&e.b))
            .map(|e| (e.b, e.nu_contact().unwrap()))
            .collect();
        let mut refs: Vec<u8> = exclusions
            .iter()
            .map(|e| e.0)
            .chain(containment.iter().map(|e| e.0))
            .chain(adjacency.iter().map(|e| e.0))
            .collect();
        refs.sort_unstable();
        refs.dedup();
        Self {
            scene,
            weights,
            exclusions,
            containment,
            adjacency,
            refs,
        }
    }

    fn score(&self, shape: &ShapeVoxels, c: &Candidate, anchor: [f64; 3]) -> ScoreBreakdown {
        let scene = self.scene;
        let dims = scene.dims;
        let nref = self.refs.len();
        let ref_masks: Vec<&BinaryMask> = self.refs.iter().map(|k| &scene.occupied[k]).collect();

        let mut inside = 0usize;
        let mut inter_union = 0usize;
        // per reference class: |m ∩ Y_k| and |∂m ∩ Y_k|
        let mut inter = vec![0usize; nref];
        let mut contact = vec![0usize; nref];
        let max = dims.map(|d| d as i64 - 1);
        for (v, &own_edge) in shape.voxels.iter().zip(&shape.boundary) {
            let p = [v[0] + c.offset[0], v[1] + c.offset[1], v[2] + c.offset[2]];
            if (0..3).any(|a| p[a] < 0 || p[a] > max[a]) {
                continue;
            }
            inside += 1;
            let i = scene.union.index(p[0] as usize, p[1] as usize, p[2] as usize);
            if !scene.union.get_index(i) {
                continue;
            }
            inter_union += 1;
            if nref == 0 {
                continue;
            }
            let on_edge = own_edge || (0..3).any(|a| p[a] == 0 || p[a] == max[a]);
            for (r, m) in ref_masks.iter().enumerate() {
                if m.get_index(i) {
                    inter[r] += 1;
                    if on_edge {
                        contact[r] += 1;
                    }
                }
            }
        }
        debug_assert!(inside > 0, "candidate lies outside the scene");

        let dist = ((c.centroid[0] - anchor[0]).powi(2)
            + (c.centroid[1] - anchor[1]).powi(2)
            + (c.centroid[2] - anchor[2]).powi(2))
        .sqrt();
        let s_spatial = -self.weights.anchor * dist;
        let s_phys = -self.weights.overlap * ratio(inter_union, inside + scene.union_count - inter_union);

        let slot = |k: u8| self.refs.binary_search(&k).unwrap();
        let mut rejection = None;
        for &(k, tau_hard) in &self.exclusions {
            let r = slot(k);
            let iou_k = ratio(inter[r], inside + scene.occupied_count[&k] - inter[r]);
            if iou_k > tau_hard {
                rejection = Some(Rejection {
                    class_id: k,
                    iou: iou_k,
                    tau_hard,
                });
                break;
            }
        }

        let mut s_topo = 0.0;
        for &(k, tau_in) in &self.containment {
            if ratio(inter[slot(k)], inside) > tau_in {
                s_topo += self.weights.containment;
            }
        }
        for &(k, nu) in &self.adjacency {
            if contact[slot(k)] > nu as usize {
                s_topo += self.weights.adjacency;
            }
        }

        ScoreBreakdown {
            s_spatial,
            s_phys,
            s_topo,
            total: rejection.is_none().then_some(s_spatial + s_phys + s_topo),
            rejection,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Index of the highest total among non-rejected scores; ties go to the
/// lowest index. `None` when every candidate is rejected.
pub fn select_best(scores: &[ScoreBreakdown]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(t) = s.total {
            if best.is_none_or(|(_, b)| t > b) {
                best = Some((i, t));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// How many instances of each class to place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSchedule {
    pub default: usize,
    #[serde(default)]
    pub per_class: BTreeMap<u8, usize>,
}

impl Default for InstanceSchedule {
    fn default() -> Self {
        Self {
            default: 1,
            per_class: BTreeMap::new(),
        }
    }
}

impl InstanceSchedule {
    pub fn count(&self, class_id: u8) -> usize {
        self.per_class.get(&class_id).copied().unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub dims: Dims,
    pub n_candidates: usize,
    /// Standard deviation of candidate perturbations, normalized units.
    pub perturb_sigma: f64,
    pub instances: InstanceSchedule,
    pub seed: u64,
    pub augment: AugmentParams,
    /// Replaces the graph's weights when set.
    pub weights: Option<Weights>,
    pub tau_in: Option<f64>,
    pub nu_contact: Option<u32>,
    pub tau_hard: Option<f64>,
    pub retry_budget: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            dims: [128, 128, 128],
            n_candidates: 40,
            perturb_sigma: 0.12,
            instances: InstanceSchedule::default(),
            seed: 0,
            augment: AugmentParams::default(),
            weights: None,
            tau_in: None,
            nu_contact: None,
            tau_hard: None,
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidates < 1 {
            return Err(Error::Config("n_candidates must be >= 1".into()));
        }
        if !(self.perturb_sigma > 0.0 && self.perturb_sigma.is_finite()) {
            return Err(Error::Config("perturb_sigma must be > 0".into()));
        }
        if self.dims.iter().any(|&d| d < 32) {
            return Err(Error::Config(format!(
                "scene dims {:?} must be >= 32 on every axis",
                self.dims
            )));
        }
        self.augment.validate()
    }

    /// The graph with this config's weight and threshold overrides applied.
    pub fn effective_graph(&self, graph: &RelationGraph) -> Result<RelationGraph> {
        let mut g = graph.with_threshold_overrides(self.tau_in, self.nu_contact, self.tau_hard)?;
        if let Some(w) = self.weights {
            g.weights = w;
        }
        Ok(g)
    }
}

/// Class placement order: descending mean bank-entry volume, ties by class id.
pub fn placement_order(bank: &ShapeBank) -> Vec<u8> {
    let mut classes: Vec<(u8, f64)> = (1..=bank.num_classes() as u8)
        .map(|c| (c, bank.mean_entry_volume(c).unwrap_or(0.0)))
        .collect();
    classes.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    classes.into_iter().map(|(c, _)| c).collect()
}

/// Greedily composes one scene.
///
/// Classes are visited in [`placement_order`]. For each instance a shape and
/// an anchor are drawn, candidates generated and scored, and the best one
/// committed. If all candidates are rejected a fresh anchor is tried, up to
/// `retry_budget` times, before the instance is skipped.
pub fn synthesize_scene(
    bank: &ShapeBank,
    anchors: &AnchorModel,
    graph: &RelationGraph,
    config: &SynthesisConfig,
    rng: &mut impl Rng,
) -> Result<SceneState> {
    config.validate()?;
    if graph.num_classes() != bank.num_classes() {
        return Err(Error::Config(format!(
            "graph has {} classes, bank has {}",
            graph.num_classes(),
            bank.num_classes()
        )));
    }
    let graph = config.effective_graph(graph)?;
    let order = placement_order(bank);
    for &c in &order {
        if config.instances.count(c) > 0 && anchors.get(c).is_none() {
            return Err(Error::Config(format!("no anchor for class {c}")));
        }
    }

    let dims = config.dims;
    let mut scene = SceneState::new(dims);
    for &class_id in &order {
        for instance in 0..config.instances.count(class_id) {
            let shape = Arc::new(sample_shape(bank, class_id, &config.augment, rng)?);
            if (0..3).any(|a| shape.dims()[a] > dims[a]) {
                scene.record_skip(Skip {
                    class_id,
                    instance,
                    attempts: 0,
                    reason: SkipReason::ShapeTooLarge,
                });
                continue;
            }
            let voxels = ShapeVoxels::new(&shape);
            let mut placed = false;
            for attempt in 0..=config.retry_budget {
                let anchor = anchors.sample(class_id, rng)?;
                let cands = generate_for(
                    &shape,
                    &voxels,
                    anchor,
                    dims,
                    config.n_candidates,
                    config.perturb_sigma,
                    rng,
                )?;
                let scorer = Scorer::new(class_id, &scene, &graph, graph.weights);
                let scores: Vec<ScoreBreakdown> =
                    cands.iter().map(|c| scorer.score(&voxels, c, anchor)).collect();
                if let Some(best) = select_best(&scores) {
                    let cand = cands.into_iter().nth(best).unwrap();
                    scene.place(class_id, instance, cand, scores[best], anchor, attempt + 1);
                    placed = true;
                    break;
                }
            }
            if !placed {
                scene.record_skip(Skip {
                    class_id,
                    instance,
                    attempts: config.retry_budget + 1,
                    reason: SkipReason::AllRejected,
                });
            }
        }
    }
    if scene.placements.is_empty() {
        return Err(Error::EmptyScene);
    }
    Ok(scene)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionViolation {
    pub step: usize,
    pub class_id: u8,
    pub other: u8,
    pub iou: f64,
    pub tau_hard: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationStats {
    /// Edge checks whose reference class was already placed.
    pub evaluated: usize,
    pub satisfied: usize,
    /// Edge checks skipped because the reference was not yet placed.
    pub unevaluated: usize,
}

impl RelationStats {
    pub fn rate(&self) -> Option<f64> {
        (self.evaluated > 0).then(|| self.satisfied as f64 / self.evaluated as f64)
    }

    pub fn merge(&mut self, o: &RelationStats) {
        self.evaluated += o.evaluated;
        self.satisfied += o.satisfied;
        self.unevaluated += o.unevaluated;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub exclusion_violations: Vec<ExclusionViolation>,
    /// Exclusion checks performed (pairs with the other class already placed).
    pub exclusion_checks: usize,
    pub containment: RelationStats,
    pub adjacency: RelationStats,
    /// ‖t − a‖ per placement, normalized units.
    pub anchor_residuals: Vec<f64>,
}

impl ValidationReport {
    pub fn hard_violations(&self) -> usize {
        self.exclusion_violations.len()
    }

    pub fn merge(&mut self, o: &ValidationReport) {
        self.exclusion_violations.extend(o.exclusion_violations.iter().cloned());
        self.exclusion_checks += o.exclusion_checks;
        self.containment.merge(&o.containment);
        self.adjacency.merge(&o.adjacency);
        self.anchor_residuals.extend(&o.anchor_residuals);
    }
}

/// Replays the placements of a finished scene and re-measures every relation
/// against the organs placed before each step, using dense scene-frame masks.
pub fn validate_scene(scene: &SceneState, graph: &RelationGraph) -> ValidationReport {
    let dims = scene.dims;
    let mut report = ValidationReport::default();
    let mut occ: BTreeMap<u8, BinaryMask> = BTreeMap::new();
    for p in &scene.placements {
        let m = p.candidate.placed(dims);
        let m_count = m.count();
        for (k, tau_hard) in graph.exclusions_of(p.class_id) {
            if let Some(yk) = occ.get(&k) {
                report.exclusion_checks += 1;
                let v = iou(&m, yk).expect("scene dims");
                if v > tau_hard {
                    report.exclusion_violations.push(ExclusionViolation {
                        step: p.step,
                        class_id: p.class_id,
                        other: k,
                        iou: v,
                        tau_hard,
                    });
                }
            }
        }
        for e in graph.edges_for(p.class_id, EdgeKind::Containment) {
            match occ.get(&e.b) {
                Some(yk) => {
                    report.containment.evaluated += 1;
                    let inside = m.intersection_count(yk).expect("scene dims");
                    if m_count > 0 && inside as f64 / m_count as f64 > e.tau_in().unwrap() {
                        report.containment.satisfied += 1;
                    }
                }
                None => report.containment.unevaluated += 1,
            }
        }
        let adj = graph.edges_for(p.class_id, EdgeKind::Adjacency);
        if !adj.is_empty() {
            let rim = boundary_voxels(&m);
            for e in adj {
                match occ.get(&e.b) {
                    Some(yk) => {
                        report.adjacency.evaluated += 1;
                        let touch = rim.intersection_count(yk).expect("scene dims");
                        if touch > e.nu_contact().unwrap() as usize {
                            report.adjacency.satisfied += 1;
                        }
                    }
                    None => report.adjacency.unevaluated += 1,
                }
            }
        }
        let d: f64 = (0..3)
            .map(|a| (p.candidate.centroid[a] - p.anchor[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        report.anchor_residuals.push(d);
        occ.entry(p.class_id)
            .or_insert_with(|| BinaryMask::new(dims))
            .union_with(&m)
            .expect("scene dims");
    }
    report
}
