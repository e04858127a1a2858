mod common;

use anatomy_forge::volume::{boundary_voxels, connected_components, erode, iou, overlay, shell};
use anatomy_forge::{BinaryMask, LabelGrid};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_strategy(max: usize, classes: u8) -> impl Strategy<Value = LabelGrid> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(move |(x, y, z)| {
        proptest::collection::vec(prop_oneof![3 => Just(0u8), 2 => 1..=classes], x * y * z)
            .prop_map(move |v| LabelGrid::from_vec([x, y, z], v).unwrap())
    })
}

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(|(x, y, z)| {
        proptest::collection::vec(any::<bool>(), x * y * z).prop_map(move |bits| {
            BinaryMask::from_fn([x, y, z], |i, j, k| bits[i + x * (j + y * k)])
        })
    })
}

proptest! {
    #[test]
    fn components_match_flood_fill(g in grid_strategy(10, 3), class in 1u8..=3) {
        let d = g.dims();
        let ours: Vec<Vec<usize>> = connected_components(&g, class)
            .iter()
            .map(|c| c.to_frame(d).iter_ones().collect())
            .collect();
        prop_assert_eq!(ours, components_oracle(g.data(), d, class));
    }

    #[test]
    fn components_partition_the_class(g in grid_strategy(10, 2)) {
        let d = g.dims();
        let comps = connected_components(&g, 1);
        let total: usize = comps.iter().map(|c| c.voxels).sum();
        prop_assert_eq!(total, g.histogram()[1]);
        let mut seen = BinaryMask::new(d);
        for c in &comps {
            let f = c.to_frame(d);
            prop_assert_eq!(f.count(), c.voxels);
            prop_assert_eq!(seen.intersection_count(&f).unwrap(), 0);
            seen.union_with(&f).unwrap();
        }
    }

    #[test]
    fn iou_matches_oracle_and_is_symmetric(a in mask_strategy(8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_blob(&mut rng, a.dims(), 2);
        let v = iou(&a, &b).unwrap();
        prop_assert_eq!(v, iou_oracle(&dense(&a), &dense(&b)));
        prop_assert_eq!(v, iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn boundary_matches_oracle(m in mask_strategy(9)) {
        let b = boundary_voxels(&m);
        prop_assert_eq!(dense(&b), boundary_oracle(&dense(&m), m.dims()));
        // boundary ⊆ m and boundary ∪ erode(m) = m
        let mut rebuilt = erode(&m);
        prop_assert_eq!(rebuilt.intersection_count(&b).unwrap(), 0);
        rebuilt.union_with(&b).unwrap();
        prop_assert_eq!(rebuilt, m);
    }

    #[test]
    fn shell_is_nested_in_thickness(m in mask_strategy(9), t in 1usize..4) {
        let thin = shell(&m, t);
        let thick = shell(&m, t + 1);
        prop_assert_eq!(thin.intersection_count(&thick).unwrap(), thin.count());
        prop_assert_eq!(thick.intersection_count(&m).unwrap(), thick.count());
    }

    #[test]
    fn overlay_clips_silently(m in mask_strategy(6), ox in -8i64..12, oy in -8i64..12, oz in -8i64..12) {
        let d = [10, 10, 10];
        let mut g = LabelGrid::new(d);
        let written = overlay(&mut g, &m, [ox, oy, oz], 4);
        let mut expected = 0;
        for [x, y, z] in m.iter_coords() {
            let p = [x as i64 + ox, y as i64 + oy, z as i64 + oz];
            if p.iter().all(|&v| (0..10).contains(&v)) {
                expected += 1;
            }
        }
        prop_assert_eq!(written, expected);
        prop_assert_eq!(g.histogram()[4], expected);
    }
}

#[test]
fn components_on_32_cube_random_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let d = random_dims(&mut rng, 16, 32);
        let g = random_labels(&mut rng, d, 3);
        for class in 1..=3 {
            let ours: Vec<Vec<usize>> = connected_components(&g, class)
                .iter()
                .map(|c| c.to_frame(d).iter_ones().collect())
                .collect();
            assert_eq!(ours, components_oracle(g.data(), d, class));
        }
    }
}

#[test]
fn diagonal_corner_touch_is_one_component() {
    let mut g = LabelGrid::new([4, 4, 4]);
    g.set(0, 0, 0, 1);
    g.set(1, 1, 1, 1);
    g.set(3, 3, 3, 1);
    let comps = connected_components(&g, 1);
    assert_eq!(comps.iter().map(|c| c.voxels).collect::<Vec<_>>(), vec![2, 1]);
}
