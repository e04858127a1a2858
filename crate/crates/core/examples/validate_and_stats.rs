// Validates a dataset directory against the relation graph and compares the
// placed centroids with the anchors.
//
// $ cargo run --release --example write_dataset -- /tmp/dataset 20
// $ cargo run --release --example validate_and_stats -- /tmp/dataset

use std::path::PathBuf;

use anatomy_forge::dataset::{stats_dir, validate_dir};
use anatomy_forge::relation::{load_graph, DEFAULT_GRAPH};
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{build_bank, fit_anchors, phantom};

fn main() -> anatomy_forge::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "dataset".into()));
    let graph = load_graph(DEFAULT_GRAPH, 32)?;
    let v = validate_dir(&dir, &graph)?;
    println!("{} scenes, {} exclusion violations", v.scenes, v.report.hard_violations());
    println!("containment rate {:?}, adjacency rate {:?}", v.report.containment.rate(), v.report.adjacency.rate());
    println!("label volumes matching manifests: {}", v.scenes - v.label_mismatches.len());

    // anchors refitted from the same phantom corpus write_dataset used
    let subjects = phantom::corpus(5, [96, 96, 96], 0);
    let bank = build_bank(&subjects, &phantom::raw_labels(), BankOptions::default())?;
    let anchors = fit_anchors(&subjects, bank.class_map())?;
    let stats = stats_dir(&dir, &anchors)?;
    print!("{}", stats.table());
    println!("classes within 0.05 of their anchor mean: {:.0}%", 100.0 * stats.fraction_within(0.05));
    Ok(())
}
