// Connected components, IoU, boundary and shell extraction on a toy grid.
//
// $ cargo run --example morphology

use anatomy_forge::volume::{boundary_voxels, connected_components, iou, shell};
use anatomy_forge::{BinaryMask, LabelGrid};

fn main() {
    let mut g = LabelGrid::new([12, 12, 12]);
    for z in 1..6 {
        for y in 1..6 {
            for x in 1..6 {
                g.set(x, y, z, 1);
            }
        }
    }
    // touches the cube only at a corner: still one 26-connected component
    g.set(6, 6, 6, 1);
    g.set(10, 10, 10, 1);

    for c in connected_components(&g, 1) {
        println!("component at {:?}: {} voxels", c.origin, c.voxels);
    }

    let cube = BinaryMask::from_fn([7, 7, 7], |x, y, z| [x, y, z].iter().all(|&v| (1..=5).contains(&v)));
    let shifted = BinaryMask::from_fn([7, 7, 7], |x, y, z| [x, y, z].iter().all(|&v| (2..=6).contains(&v)));
    println!("IoU of two offset 5³ cubes: {:.4}", iou(&cube, &shifted).unwrap());
    println!("boundary of a 5³ cube: {} voxels", boundary_voxels(&cube).count());
    println!("2-voxel shell of a 5³ cube: {} voxels", shell(&cube, 2).count());
}
