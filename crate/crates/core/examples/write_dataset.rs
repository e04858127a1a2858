// Generates a small dataset directory (images, labels, manifests and
// dataset.json) and reports throughput.
//
// $ cargo run --release --example write_dataset -- /tmp/dataset 20

use std::path::PathBuf;

use anatomy_forge::dataset::Generator;
use anatomy_forge::relation::{load_graph, DEFAULT_GRAPH};
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{build_bank, fit_anchors, phantom, RenderParams, SynthesisConfig};

fn main() -> anatomy_forge::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "dataset".into()));
    let count: u64 = args.next().map_or(20, |s| s.parse().expect("count"));

    let subjects = phantom::corpus(5, [96, 96, 96], 0);
    let bank = build_bank(&subjects, &phantom::raw_labels(), BankOptions::default())?;
    let anchors = fit_anchors(&subjects, bank.class_map())?;
    let graph = load_graph(DEFAULT_GRAPH, 32)?;
    let cfg = SynthesisConfig { dims: [96, 96, 96], seed: 42, ..Default::default() };
    let generator = Generator::new(bank, anchors, graph, cfg, RenderParams::default())?;

    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let s = generator.write_dataset(&out, count, jobs)?;
    println!(
        "{} pairs in {:.2}s on {jobs} threads: {:.2} volumes/s, {} placements, {} skips",
        s.scenes,
        s.elapsed.as_secs_f64(),
        s.volumes_per_second(),
        s.placements,
        s.skips
    );
    Ok(())
}
