// Writes procedural 32-class torso phantoms as NIfTI label volumes.
//
// $ cargo run --release --example phantom_corpus -- /tmp/phantoms 5
// phantom_000.nii.gz: 32 classes, 48505 labelled voxels
// ...

use std::path::PathBuf;

use anatomy_forge::nifti::{write_nifti, Datatype};
use anatomy_forge::phantom;

fn main() -> anatomy_forge::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "phantoms".into()));
    let count: usize = args.next().map_or(5, |s| s.parse().expect("count"));
    std::fs::create_dir_all(&out)?;

    for s in phantom::corpus(count, [96, 96, 96], 0) {
        let h = s.labels.histogram();
        let classes = h[1..].iter().filter(|&&n| n > 0).count();
        let voxels: usize = h[1..].iter().sum();
        let name = format!("{}.nii.gz", s.id);
        write_nifti(&s.labels, &out.join(&name), Datatype::Uint8)?;
        println!("{name}: {classes} classes, {voxels} labelled voxels");
    }
    Ok(())
}
