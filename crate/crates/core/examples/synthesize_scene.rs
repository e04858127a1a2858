// Composes one 96³ scene and lists its placements in order.
//
// $ cargo run --release --example synthesize_scene -- 42

use anatomy_forge::relation::{load_graph, DEFAULT_GRAPH};
use anatomy_forge::rng::scene_rng;
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{build_bank, fit_anchors, phantom, synthesize_scene, validate_scene, SynthesisConfig};

fn main() -> anatomy_forge::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(42, |s| s.parse().expect("seed"));
    let subjects = phantom::corpus(5, [96, 96, 96], 0);
    let bank = build_bank(&subjects, &phantom::raw_labels(), BankOptions::default())?;
    let anchors = fit_anchors(&subjects, bank.class_map())?;
    let graph = load_graph(DEFAULT_GRAPH, 32)?;

    let cfg = SynthesisConfig { dims: [96, 96, 96], seed, ..Default::default() };
    let scene = synthesize_scene(&bank, &anchors, &graph, &cfg, &mut scene_rng(seed, 0))?;
    for p in scene.placements() {
        println!(
            "{:>2} {:<20} voxels {:>6}  attempts {}  score {:>8.4}",
            p.step,
            graph.name(p.class_id).unwrap_or("?"),
            p.voxels,
            p.attempts,
            p.score.total.unwrap_or(f64::NAN)
        );
    }
    for s in scene.skips() {
        println!("skipped class {} instance {}: {:?}", s.class_id, s.instance, s.reason);
    }
    let r = validate_scene(&scene, &graph);
    println!("exclusion violations: {} of {} checks", r.hard_violations(), r.exclusion_checks);
    Ok(())
}
