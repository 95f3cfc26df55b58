use proptest::prelude::*;

use tsr::annealing::{Configuration, CostContext};
use tsr::descriptors::{self, ed_triplet, lineal_path, two_point_s2, OccupancyCache, ScaleSet};
use tsr::grid::{self, BinaryImage, ClusterShape};

fn image(side: usize) -> impl Strategy<Value = BinaryImage> {
    prop::collection::vec(any::<bool>(), side * side)
        .prop_map(move |cells| BinaryImage::from_cells(side, cells).unwrap())
}

fn any_image() -> impl Strategy<Value = BinaryImage> {
    (2usize..=12).prop_flat_map(image)
}

/// A connected shape grown from random steps of a walk.
fn shape() -> impl Strategy<Value = ClusterShape> {
    prop::collection::vec(0u8..4, 0..40).prop_map(|steps| {
        let mut p = (0isize, 0isize);
        let mut pts = vec![p];
        for s in steps {
            p = match s {
                0 => (p.0 + 1, p.1),
                1 => (p.0 - 1, p.1),
                2 => (p.0, p.1 + 1),
                _ => (p.0, p.1 - 1),
            };
            pts.push(p);
        }
        ClusterShape::from_pixels(pts).unwrap()
    })
}

fn shared_sides(shape: &ClusterShape) -> usize {
    let set: std::collections::HashSet<_> = shape.offsets().iter().copied().collect();
    shape
        .offsets()
        .iter()
        .map(|&(r, c)| set.contains(&(r + 1, c)) as usize + set.contains(&(r, c + 1)) as usize)
        .sum()
}

fn placed(shape: &ClusterShape, side: usize, anchor: (usize, usize)) -> BinaryImage {
    let mut img = BinaryImage::new(side).unwrap();
    img.stamp(shape, anchor);
    img
}

fn naive_s2(img: &BinaryImage, k: usize) -> f64 {
    let n = img.side();
    let mut hits = 0usize;
    for r in 0..n {
        for c in 0..n {
            if img.get(r, c) {
                hits += img.get(r, (c + k) % n) as usize + img.get((r + k) % n, c) as usize;
            }
        }
    }
    hits as f64 / (2 * n * n) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn interface_counts_exposed_sides(s in shape()) {
        prop_assert_eq!(s.interface(), 4 * s.area() - 2 * shared_sides(&s));
    }

    #[test]
    fn interface_invariant_under_rigid_motions(s in shape(), dr in 0usize..5, dc in 0usize..5) {
        let side = 48;
        let img = placed(&s, side, (dr, dc));
        for variant in [img.clone(), img.rotate90(), img.rotate90().rotate90(), img.mirror()] {
            let labels = grid::label_clusters(&variant);
            prop_assert_eq!(labels.len(), 1);
            prop_assert_eq!(labels[0].0.interface(), s.interface());
            prop_assert_eq!(labels[0].0.area(), s.area());
        }
    }

    #[test]
    fn labelling_then_restamping_reproduces_the_image(img in any_image()) {
        let mut rebuilt = BinaryImage::new(img.side()).unwrap();
        for (shape, anchor) in grid::label_clusters(&img) {
            rebuilt.stamp(&shape, anchor);
        }
        prop_assert_eq!(rebuilt, img);
    }

    #[test]
    fn wall_count_is_even(img in any_image(), r in 0usize..12, c in 0usize..12) {
        let n = img.side();
        prop_assert_eq!(grid::wall_count(&img, (r % n, c % n)) % 2, 0);
    }

    #[test]
    fn ed_triplet_invariant_under_rotation_and_mirror(img in (4usize..=10).prop_flat_map(image)) {
        let scales = ScaleSet::with_stride(img.side(), 1).unwrap();
        let base = ed_triplet(&img, &scales).unwrap();
        for variant in [img.rotate90(), img.mirror()] {
            let other = ed_triplet(&variant, &scales).unwrap();
            for (a, b) in base.iter().zip(&other) {
                for (x, y) in a.values().zip(b.values()) {
                    prop_assert!((x - y).abs() < 1e-12, "{} vs {}", x, y);
                }
            }
        }
    }

    #[test]
    fn entropy_bounds_hold(img in (2usize..=10).prop_flat_map(image), k in 2usize..=10) {
        prop_assume!(k <= img.side());
        let p = descriptors::entropy_profile(&img, k).unwrap();
        prop_assert!(p.s_min <= p.s + 1e-9 && p.s <= p.s_max + 1e-9);
        prop_assert!(p.s_delta >= 0.0);
        prop_assert!((0.0..=1.0).contains(&p.gamma));
    }

    #[test]
    fn s2_matches_naive_double_loop(img in (1usize..=16).prop_flat_map(image)) {
        let n = img.side();
        let curve = two_point_s2(&img, n - 1).unwrap();
        for &(k, v) in &curve.points {
            prop_assert!((v - naive_s2(&img, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn lineal_path_invariant_under_translation(s in shape(), a in 0usize..6, b in 0usize..6) {
        let side = 48;
        let l1 = lineal_path(&placed(&s, side, (0, 0)), side).unwrap();
        let l2 = lineal_path(&placed(&s, side, (a, b)), side).unwrap();
        prop_assert_eq!(l1, l2);
    }

    #[test]
    fn cache_tracks_cluster_moves(s in shape(), moves in prop::collection::vec((0usize..8, 0usize..8), 1..6)) {
        let side = 56;
        let mut config = Configuration::from_placements(side, vec![s], vec![(0, 0)]).unwrap();
        let scales = ScaleSet::with_stride(side, 3).unwrap();
        let mut cache = OccupancyCache::new(config.image(), &scales).unwrap();
        for anchor in moves {
            let changes = config.relocate(0, anchor);
            cache.apply(&changes);
            let fresh = OccupancyCache::new(config.image(), &scales).unwrap();
            for i in 0..scales.len() {
                prop_assert_eq!(cache.occupancies(i), fresh.occupancies(i));
            }
            prop_assert_eq!(cache.triplets(), fresh.triplets());
        }
    }
}

#[test]
fn energy_is_zero_on_the_target_itself() {
    let img = BinaryImage::from_ascii(&["##......", "##...#..", ".....#..", "........", "..##....", "........", "......#.", "........"])
        .unwrap();
    let ctx = CostContext::new(&img, ScaleSet::with_stride(8, 1).unwrap()).unwrap();
    assert_eq!(ctx.energy_of_image(&img).unwrap(), 0.0);
}
