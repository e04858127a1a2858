// Scores the candidate poses of one organ against a partly built scene and
// prints each score breakdown.
//
// $ cargo run --release --example score_candidates

use std::sync::Arc;

use anatomy_forge::relation::{load_graph, DEFAULT_GRAPH};
use anatomy_forge::rng::scene_rng;
use anatomy_forge::shape_bank::{sample_shape, BankOptions};
use anatomy_forge::{
    build_bank, fit_anchors, generate_candidates, phantom, score_candidate, select_best, synthesize_scene,
    SynthesisConfig,
};

fn main() -> anatomy_forge::Result<()> {
    let subjects = phantom::corpus(5, [96, 96, 96], 0);
    let bank = build_bank(&subjects, &phantom::raw_labels(), BankOptions::default())?;
    let anchors = fit_anchors(&subjects, bank.class_map())?;
    let graph = load_graph(DEFAULT_GRAPH, 32)?;

    // a scene without the gallbladder (class 4)
    let mut cfg = SynthesisConfig { dims: [96, 96, 96], ..Default::default() };
    cfg.instances.per_class.insert(4, 0);
    let mut rng = scene_rng(3, 0);
    let scene = synthesize_scene(&bank, &anchors, &graph, &cfg, &mut rng)?;

    let shape = Arc::new(sample_shape(&bank, 4, &cfg.augment, &mut rng)?);
    let anchor = anchors.sample(4, &mut rng)?;
    let cands = generate_candidates(&shape, anchor, scene.dims(), 8, 0.12, &mut rng)?;
    let scores: Vec<_> = cands.iter().map(|c| score_candidate(4, c, anchor, &scene, &graph)).collect();

    println!("anchor ({:.3}, {:.3}, {:.3})", anchor[0], anchor[1], anchor[2]);
    println!("{:>3} {:>9} {:>9} {:>7} {:>9}", "#", "spatial", "phys", "topo", "total");
    for (i, s) in scores.iter().enumerate() {
        let total = s.total.map_or("REJECTED".to_string(), |t| format!("{t:.4}"));
        println!("{i:>3} {:>9.4} {:>9.4} {:>7.2} {total:>9}", s.s_spatial, s.s_phys, s.s_topo);
    }
    println!("selected: {:?}", select_best(&scores));
    Ok(())
}
