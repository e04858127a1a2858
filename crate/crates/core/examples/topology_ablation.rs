// Containment rate of a small trachea-in-lung fixture with and without the
// topology reward.
//
// $ cargo run --release --example topology_ablation

use std::collections::BTreeMap;

use anatomy_forge::placement::RelationStats;
use anatomy_forge::rng::scene_rng;
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{
    build_bank, synthesize_scene, validate_scene, AnchorDistribution, AnchorModel, LabelGrid, RelationEdge,
    RelationGraph, Subject, SynthesisConfig, Weights,
};

fn ellipsoid(g: &mut LabelGrid, label: u8, c: [f64; 3], r: [f64; 3]) {
    let d = g.dims();
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                let q = [x, y, z];
                let s: f64 = (0..3).map(|a| ((q[a] as f64 / (d[a] - 1) as f64 - c[a]) / r[a]).powi(2)).sum();
                if s <= 1.0 {
                    g.set(x, y, z, label);
                }
            }
        }
    }
}

fn anchor(class_id: u8, mu: [f64; 3], sd: f64) -> AnchorDistribution {
    let v = sd * sd;
    AnchorDistribution { class_id, mu, sigma: [[v, 0.0, 0.0], [0.0, v, 0.0], [0.0, 0.0, v]], n_samples: 3 }
}

fn main() -> anatomy_forge::Result<()> {
    let mut g = LabelGrid::new([48, 48, 48]);
    ellipsoid(&mut g, 1, [0.35, 0.5, 0.6], [0.18, 0.2, 0.22]);
    ellipsoid(&mut g, 3, [0.7, 0.5, 0.4], [0.14, 0.12, 0.1]);
    ellipsoid(&mut g, 2, [0.35, 0.5, 0.6], [0.04, 0.04, 0.1]);
    let bank = build_bank(&[Subject { id: "fixture".into(), labels: g }], &[1, 2, 3], BankOptions::default())?;
    let anchors = AnchorModel::new([
        anchor(1, [0.35, 0.5, 0.6], 0.02),
        anchor(2, [0.53, 0.5, 0.6], 0.06),
        anchor(3, [0.72, 0.5, 0.4], 0.02),
    ])?;
    let graph = RelationGraph::new(
        3,
        BTreeMap::new(),
        vec![RelationEdge::containment(2, 1, 0.30), RelationEdge::adjacency(3, 1, 20)],
        Weights::default(),
    )?;

    for (label, w) in [
        ("with s_topo", Weights::default()),
        ("without s_topo", Weights { containment: 0.0, adjacency: 0.0, ..Weights::default() }),
    ] {
        let cfg = SynthesisConfig { dims: [48, 48, 48], weights: Some(w), ..Default::default() };
        let mut stats = RelationStats::default();
        for i in 0..100 {
            let scene = synthesize_scene(&bank, &anchors, &graph, &cfg, &mut scene_rng(0, i))?;
            stats.merge(&validate_scene(&scene, &graph).containment);
        }
        println!("{label:<15} containment satisfied in {:.0}% of scenes", 100.0 * stats.rate().unwrap_or(0.0));
    }
    Ok(())
}
