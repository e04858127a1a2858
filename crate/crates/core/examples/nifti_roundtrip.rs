// Writes a label volume as uint8, int16 and gzip, reads each back, and checks
// that re-encoding reproduces the same bytes.
//
// $ cargo run --example nifti_roundtrip

use anatomy_forge::nifti::{decode_nifti, encode_nifti, read_nifti_with_header, write_nifti, Datatype};
use anatomy_forge::phantom;

fn main() -> anatomy_forge::Result<()> {
    let labels = phantom::subject([64, 64, 64], 0, 0).labels;
    let dir = std::env::temp_dir();

    for dt in [Datatype::Uint8, Datatype::Int16] {
        let bytes = encode_nifti(&labels, dt)?;
        let (h, v) = decode_nifti(&bytes)?;
        let again = encode_nifti(&v.into_labels().unwrap(), dt)?;
        println!("{dt:?}: {} bytes, dims {:?}, identical after round trip: {}", bytes.len(), h.dims(), bytes == again);
    }

    let path = dir.join("phantom.nii.gz");
    write_nifti(&labels, &path, Datatype::Uint8)?;
    let (h, v) = read_nifti_with_header(&path)?;
    println!(
        "{}: {} compressed bytes, spacing {:?}, equal: {}",
        path.display(),
        std::fs::metadata(&path)?.len(),
        h.spacing(),
        v.into_labels().as_ref() == Some(&labels)
    );
    Ok(())
}
