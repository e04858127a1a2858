// Fits the per-class centroid Gaussians and draws a few anchors.
//
// $ cargo run --release --example fit_anchors

use anatomy_forge::rng::scene_rng;
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{build_bank, fit_anchors, phantom};

fn main() -> anatomy_forge::Result<()> {
    let subjects = phantom::corpus(5, [96, 96, 96], 0);
    let bank = build_bank(&subjects, &phantom::raw_labels(), BankOptions::default())?;
    let anchors = fit_anchors(&subjects, bank.class_map())?;

    for d in anchors.iter().take(5) {
        let sd: Vec<String> = (0..3).map(|a| format!("{:.4}", d.sigma[a][a].sqrt())).collect();
        println!(
            "class {:>2}: mu = ({:.3}, {:.3}, {:.3}), sd = ({}), n = {}",
            d.class_id, d.mu[0], d.mu[1], d.mu[2], sd.join(", "), d.n_samples
        );
    }

    let mut rng = scene_rng(1, 0);
    for _ in 0..3 {
        let a = anchors.sample(5, &mut rng)?;
        println!("liver anchor draw: ({:.3}, {:.3}, {:.3})", a[0], a[1], a[2]);
    }

    // the plaintext table round-trips exactly
    print!("{}", anchors.to_text().lines().take(2).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
