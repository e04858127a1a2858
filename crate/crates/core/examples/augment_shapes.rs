// Draws augmented variants of one bank entry: random flips, one of the 24
// axis-aligned rotations and an isotropic rescale.
//
// $ cargo run --release --example augment_shapes

use anatomy_forge::rng::scene_rng;
use anatomy_forge::shape_bank::{augment, BankOptions};
use anatomy_forge::{build_bank, phantom, AugmentParams};

fn main() -> anatomy_forge::Result<()> {
    let subjects = phantom::corpus(1, [96, 96, 96], 0);
    let bank = build_bank(&subjects, &phantom::raw_labels(), BankOptions::default())?;
    let liver = bank.entries_of(5)?.next().unwrap();
    println!("source: {:?} box, {} voxels", liver.mask.dims(), liver.mask.count());

    let mut rng = scene_rng(0, 0);
    let params = AugmentParams::default();
    for _ in 0..5 {
        let m = augment(liver, &params, &mut rng);
        println!("variant: {:?} box, {} voxels", m.dims(), m.count());
    }
    let same = augment(liver, &AugmentParams::identity(), &mut rng);
    println!("identity params reproduce the entry: {}", same == liver.mask);
    Ok(())
}
