// SPDX-License-Identifier: Apache-2.0 OR MIT

use proptest::prelude::*;
use uatg::formation::{enforce_min_separation, lit_cells, random_cloud, rasterize_text};
use uatg::{Plane, Point3, PointCloud};

proptest! {
    #[test]
    fn glyph_clouds_scale_linearly(a in 0.5f64..5.0, b in 0.5f64..5.0, text in "[0-9A-Z]{1,4}") {
        let small = rasterize_text(&text, a, Point3::origin(), Plane::Xz).unwrap();
        let large = rasterize_text(&text, b, Point3::origin(), Plane::Xz).unwrap();
        prop_assert_eq!(small.len(), large.len());
        let expected: usize = text.chars().map(|c| lit_cells(c).unwrap()).sum();
        prop_assert_eq!(small.len(), expected);
        for (p, q) in small.points.iter().zip(&large.points) {
            prop_assert!((p.coords() * (b / a) - q.coords()).amax() < 1e-9);
        }
        prop_assert!((small.min_pairwise_distance() - a).abs() < 1e-9);
    }

    #[test]
    fn thinning_leaves_a_separated_subset(seed in any::<u64>(), d in 0.5f64..3.0) {
        let cloud = random_cloud(60, Point3::origin(), Point3::new(10.0, 10.0, 3.0), 0.2, seed).unwrap();
        let thinned = enforce_min_separation(&cloud, d).unwrap();
        prop_assert!(thinned.cloud.len() + thinned.removed.len() == cloud.len());
        prop_assert!(thinned.cloud.len() < 2 || thinned.cloud.min_pairwise_distance() >= d - 1e-9);
        for p in &thinned.cloud.points {
            prop_assert!(cloud.points.contains(p));
        }
    }
}

#[test]
fn random_clouds_are_reproducible_and_separated() {
    let lo = Point3::new(0.0, 0.0, 10.0);
    let hi = Point3::new(30.0, 30.0, 40.0);
    let a = random_cloud(300, lo, hi, 2.25, 11).unwrap();
    let b = random_cloud(300, lo, hi, 2.25, 11).unwrap();
    assert_eq!(a, b);
    assert!(a.min_pairwise_distance() >= 2.25);
    assert!(a.points.iter().all(|p| p.z >= 10.0 && p.z <= 40.0));
    let crowded = random_cloud(1000, Point3::origin(), Point3::new(5.0, 5.0, 0.0), 2.25, 1);
    assert!(matches!(crowded, Err(uatg::Error::GenerationFailed(_))));
}

#[test]
fn tsag_letters_fit_sixteen_drones() {
    for c in ['T', 'S', 'A', 'G', '1', '2', '3'] {
        assert!(lit_cells(c).unwrap() <= 16, "{c}");
    }
    let cloud: PointCloud = rasterize_text("TSAG", 2.25, Point3::origin(), Plane::Xz).unwrap();
    assert_eq!(cloud.len(), 11 + 15 + 16 + 16);
    assert!(cloud.points.iter().all(|p| p.y == 0.0));
}
