//! Brute-force reference implementations and shared fixtures for the
//! integration tests. Every oracle here works on dense `Vec<bool>` / `Vec<u8>`
//! volumes with plain loops and shares no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use anatomy_forge::anchors::AnchorDistribution;
use anatomy_forge::placement::Candidate;
use anatomy_forge::relation::{EdgeKind, RelationGraph};
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{build_bank, fit_anchors, phantom, AnchorModel, BinaryMask, Dims, LabelGrid, ShapeBank};
use rand::Rng;

pub fn flat(d: Dims, x: usize, y: usize, z: usize) -> usize {
    x + d[0] * (y + d[1] * z)
}

pub fn dense(m: &BinaryMask) -> Vec<bool> {
    let d = m.dims();
    let mut out = vec![false; d[0] * d[1] * d[2]];
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                out[flat(d, x, y, z)] = m.get(x, y, z);
            }
        }
    }
    out
}

/// 26-connected components by breadth-first flood fill, each as a sorted list
/// of flat indices; the list is ordered by (size desc, first index asc).
pub fn components_oracle(labels: &[u8], d: Dims, class: u8) -> Vec<Vec<usize>> {
    let mut seen = vec![false; labels.len()];
    let mut out = Vec::new();
    for start in 0..labels.len() {
        if labels[start] != class || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (x, y, z) = (i % d[0], (i / d[0]) % d[1], i / (d[0] * d[1]));
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if nx < 0 || ny < 0 || nz < 0 || nx >= d[0] as i64 || ny >= d[1] as i64 || nz >= d[2] as i64 {
                            continue;
                        }
                        let j = flat(d, nx as usize, ny as usize, nz as usize);
                        if labels[j] == class && !seen[j] {
                            seen[j] = true;
                            comp.push(j);
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

pub fn iou_oracle(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Set voxels with at least one 6-neighbour that is unset or off the grid.
pub fn boundary_oracle(m: &[bool], d: Dims) -> Vec<bool> {
    let mut out = vec![false; m.len()];
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                let i = flat(d, x, y, z);
                if !m[i] {
                    continue;
                }
                let p = [x as i64, y as i64, z as i64];
                'n: for a in 0..3 {
                    for s in [-1i64, 1] {
                        let mut q = p;
                        q[a] += s;
                        if (0..3).any(|b| q[b] < 0 || q[b] >= d[b] as i64) {
                            out[i] = true;
                            break 'n;
                        }
                        if !m[flat(d, q[0] as usize, q[1] as usize, q[2] as usize)] {
                            out[i] = true;
                            break 'n;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Dense scene-frame copy of a candidate, clipped to the scene.
pub fn placed_oracle(c: &Candidate, d: Dims) -> Vec<bool> {
    let m = &c.mask;
    let sd = m.dims();
    let mut out = vec![false; d[0] * d[1] * d[2]];
    for z in 0..sd[2] {
        for y in 0..sd[1] {
            for x in 0..sd[0] {
                if !m.get(x, y, z) {
                    continue;
                }
                let p = [x as i64 + c.offset[0], y as i64 + c.offset[1], z as i64 + c.offset[2]];
                if (0..3).all(|a| p[a] >= 0 && p[a] < d[a] as i64) {
                    out[flat(d, p[0] as usize, p[1] as usize, p[2] as usize)] = true;
                }
            }
        }
    }
    out
}

/// Reference score of one candidate. `layers` holds the dense occupancy of
/// every class placed so far. `None` means rejected by an exclusion edge.
pub fn score_oracle(
    class: u8,
    c: &Candidate,
    anchor: [f64; 3],
    d: Dims,
    layers: &BTreeMap<u8, Vec<bool>>,
    graph: &RelationGraph,
) -> Option<f64> {
    let w = graph.weights;
    let m = placed_oracle(c, d);

    // centroid of the unclipped translated shape, normalized by (d - 1)
    let mut sums = [0i64; 3];
    let mut n = 0i64;
    let sd = c.mask.dims();
    for z in 0..sd[2] {
        for y in 0..sd[1] {
            for x in 0..sd[0] {
                if c.mask.get(x, y, z) {
                    let v = [x, y, z];
                    for a in 0..3 {
                        sums[a] += v[a] as i64 + c.offset[a];
                    }
                    n += 1;
                }
            }
        }
    }
    let t: Vec<f64> = (0..3).map(|a| sums[a] as f64 / n as f64 / (d[a] - 1) as f64).collect();
    let dist = ((t[0] - anchor[0]).powi(2) + (t[1] - anchor[1]).powi(2) + (t[2] - anchor[2]).powi(2)).sqrt();

    let mut union = vec![false; m.len()];
    for l in layers.values() {
        for (u, v) in union.iter_mut().zip(l) {
            *u |= *v;
        }
    }
    let s_spatial = -w.anchor * dist;
    let s_phys = -w.overlap * iou_oracle(&m, &union);

    for e in graph.edges() {
        if e.kind != EdgeKind::Exclusion || (e.a != class && e.b != class) {
            continue;
        }
        let other = if e.a == class { e.b } else { e.a };
        if let Some(l) = layers.get(&other) {
            if iou_oracle(&m, l) > e.tau_hard().unwrap() {
                return None;
            }
        }
    }

    let size = m.iter().filter(|v| **v).count();
    let rim = boundary_oracle(&m, d);
    let mut s_topo = 0.0;
    for e in graph.edges().iter().filter(|e| e.kind == EdgeKind::Containment && e.a == class) {
        if let Some(l) = layers.get(&e.b) {
            let inside = m.iter().zip(l).filter(|(a, b)| **a && **b).count();
            if size > 0 && inside as f64 / size as f64 > e.tau_in().unwrap() {
                s_topo += w.containment;
            }
        }
    }
    for e in graph.edges().iter().filter(|e| e.kind == EdgeKind::Adjacency && e.a == class) {
        if let Some(l) = layers.get(&e.b) {
            let touch = rim.iter().zip(l).filter(|(a, b)| **a && **b).count();
            if touch > e.nu_contact().unwrap() as usize {
                s_topo += w.adjacency;
            }
        }
    }
    Some(s_spatial + s_phys + s_topo)
}

/// First index of the maximum non-rejected score.
pub fn argmax_oracle(scores: &[Option<f64>]) -> Option<usize> {
    let best = scores.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|s| *s == Some(best))
}

/// A random blob: union of a few random boxes inside `d`, never empty.
pub fn random_blob(rng: &mut impl Rng, d: Dims, boxes: usize) -> BinaryMask {
    let mut m = BinaryMask::new(d);
    for _ in 0..boxes.max(1) {
        let lo = d.map(|n| rng.random_range(0..n));
        let hi = [0, 1, 2].map(|a| rng.random_range(lo[a]..d[a].min(lo[a] + 1 + d[a] / 2)));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    m.set(x, y, z, true);
                }
            }
        }
    }
    m
}

/// Random labels: `classes` classes of scattered boxes and speckle.
pub fn random_labels(rng: &mut impl Rng, d: Dims, classes: u8) -> LabelGrid {
    let mut g = LabelGrid::new(d);
    let n = d[0] * d[1] * d[2];
    let density: f64 = rng.random_range(0.02..0.5);
    for i in 0..n {
        if rng.random_bool(density) {
            g.data_mut()[i] = rng.random_range(1..=classes);
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let b = random_blob(rng, d, 1);
        let c = rng.random_range(1..=classes);
        for idx in b.iter_ones() {
            g.data_mut()[idx] = c;
        }
    }
    g
}

pub fn random_dims(rng: &mut impl Rng, lo: usize, hi: usize) -> Dims {
    [(); 3].map(|_| rng.random_range(lo..=hi))
}

pub fn arc(m: BinaryMask) -> Arc<BinaryMask> {
    Arc::new(m)
}

/// Phantom-derived bank and anchors for the 32-class default graph.
pub fn phantom_inputs(subjects: usize, dims: Dims, seed: u64) -> (ShapeBank, AnchorModel) {
    let corpus = phantom::corpus(subjects, dims, seed);
    let bank = build_bank(&corpus, &phantom::raw_labels(), BankOptions::default()).unwrap();
    let anchors = fit_anchors(&corpus, bank.class_map()).unwrap();
    (bank, anchors)
}

pub fn iso_anchor(class_id: u8, mu: [f64; 3], sd: f64) -> AnchorDistribution {
    let v = sd * sd;
    AnchorDistribution {
        class_id,
        mu,
        sigma: [[v, 0.0, 0.0], [0.0, v, 0.0], [0.0, 0.0, v]],
        n_samples: 5,
    }
}

pub struct OracleTrial {
    pub engine: Option<usize>,
    pub oracle: Option<usize>,
    /// Candidates sharing the best oracle score.
    pub tied: usize,
    pub totals_agree: bool,
}

/// One randomized scoring trial: a random scene of up to four classes, a
/// random relation graph and up to eight candidates for one class, scored by
/// the engine and by [`score_oracle`].
pub fn oracle_trial(rng: &mut impl Rng) -> OracleTrial {
    use anatomy_forge::placement::{generate_candidates, score_candidate, select_best, SceneState, ScoreBreakdown};
    use anatomy_forge::{RelationEdge, Weights};

    let d = random_dims(rng, 8, 32);
    let classes: u8 = rng.random_range(1..=4);
    let target = rng.random_range(1..=classes);

    let mut scene = SceneState::new(d);
    let mut layers: BTreeMap<u8, Vec<bool>> = BTreeMap::new();
    let zero = ScoreBreakdown { s_spatial: 0.0, s_phys: 0.0, s_topo: 0.0, total: Some(0.0), rejection: None };
    for k in 1..=classes {
        for inst in 0..rng.random_range(0..=2) {
            let sd = [0, 1, 2].map(|a| rng.random_range(2..=d[a].min(16)));
            let nb = rng.random_range(1..=3);
            let m = random_blob(rng, sd, nb);
            let off = [0, 1, 2].map(|a| rng.random_range(-(sd[a] as i64) / 2..(d[a] - sd[a] / 2) as i64));
            let cand = Candidate::new(arc(m), off, d);
            let p = placed_oracle(&cand, d);
            if !p.iter().any(|v| *v) {
                continue;
            }
            let layer = layers.entry(k).or_insert_with(|| vec![false; p.len()]);
            for (l, v) in layer.iter_mut().zip(&p) {
                *l |= *v;
            }
            scene.place(k, inst, cand, zero, [0.5; 3], 1);
        }
    }

    let mut edges = Vec::new();
    if classes > 1 {
        for _ in 0..rng.random_range(0..=6) {
            let a = if rng.random_bool(0.7) { target } else { rng.random_range(1..=classes) };
            let b = rng.random_range(1..=classes);
            if a == b {
                continue;
            }
            let e = match rng.random_range(0..3) {
                // a < b keeps containment acyclic
                0 if a < b => RelationEdge::containment(a, b, rng.random_range(0.05..0.9)),
                0 => continue,
                1 => RelationEdge::adjacency(a, b, rng.random_range(1..30)),
                _ => RelationEdge::exclusion(a, b, rng.random_range(0.05..0.9)),
            };
            if edges.iter().any(|o: &RelationEdge| o.kind == e.kind && o.a == e.a && o.b == e.b) {
                continue;
            }
            edges.push(e);
        }
    }
    let pick = |rng: &mut dyn rand::RngCore| [0.0, 0.5, 0.8, 1.0][rng.random_range(0..4)];
    let weights = Weights {
        anchor: pick(rng),
        overlap: pick(rng),
        containment: pick(rng),
        adjacency: pick(rng),
    };
    let graph = RelationGraph::new(classes as usize, BTreeMap::new(), edges, weights).unwrap();

    let sd = [0, 1, 2].map(|a| rng.random_range(1..=d[a].min(12)));
    let nb = rng.random_range(1..=3);
    let shape = arc(random_blob(rng, sd, nb));
    let anchor = [(); 3].map(|_| rng.random_range(0.0..1.0));
    let n = rng.random_range(1..=8);
    let sigma = [1e-9, 0.05, 0.3][rng.random_range(0..3)];
    let cands = generate_candidates(&shape, anchor, d, n, sigma, rng).unwrap();

    let engine_scores: Vec<ScoreBreakdown> =
        cands.iter().map(|c| score_candidate(target, c, anchor, &scene, &graph)).collect();
    let oracle_scores: Vec<Option<f64>> =
        cands.iter().map(|c| score_oracle(target, c, anchor, d, &layers, &graph)).collect();
    let totals_agree = engine_scores.iter().zip(&oracle_scores).all(|(e, o)| match (e.total, o) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    });
    let oracle = argmax_oracle(&oracle_scores);
    let tied = oracle.map_or(0, |i| oracle_scores.iter().filter(|s| **s == oracle_scores[i]).count());
    OracleTrial {
        engine: select_best(&engine_scores),
        oracle,
        tied,
        totals_agree,
    }
}

/// write → read → write for one NIfTI datatype; `true` when both encodings are
/// byte-identical and the decoded grid equals the input.
pub fn nifti_roundtrip(rng: &mut impl Rng, dt: anatomy_forge::nifti::Datatype) -> bool {
    use anatomy_forge::nifti::{decode_nifti, encode_nifti, Datatype, Volume};
    let d = random_dims(rng, 1, 24);
    match dt {
        Datatype::Float32 => {
            let data: Vec<f32> = (0..d[0] * d[1] * d[2]).map(|_| rng.random_range(-1e3f32..1e3)).collect();
            let g = anatomy_forge::IntensityGrid::from_vec(d, data).unwrap();
            let a = encode_nifti(&g, dt).unwrap();
            let Ok((_, Volume::Intensity(back))) = decode_nifti(&a) else { return false };
            back == g && encode_nifti(&back, dt).unwrap() == a
        }
        _ => {
            let g = random_labels(rng, d, 255);
            let a = encode_nifti(&g, dt).unwrap();
            let Ok((_, Volume::Labels(back))) = decode_nifti(&a) else { return false };
            back == g && encode_nifti(&back, dt).unwrap() == a
        }
    }
}

/// save → load → save of a bank; `true` when the bytes and the banks match.
pub fn bank_roundtrip(bank: &ShapeBank) -> bool {
    let mut a = Vec::new();
    bank.write_to(&mut a).unwrap();
    let back = ShapeBank::read_from(&mut &a[..]).unwrap();
    let mut b = Vec::new();
    back.write_to(&mut b).unwrap();
    a == b && back.entries() == bank.entries() && back.class_map() == bank.class_map()
}

/// text → parse → text of an anchor table; `true` when exact.
pub fn anchors_roundtrip(model: &AnchorModel) -> bool {
    let t = model.to_text();
    let back = AnchorModel::from_text(&t).unwrap();
    back.to_text() == t && back.iter().zip(model.iter()).all(|(a, b)| a == b)
}
