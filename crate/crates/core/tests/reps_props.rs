use segplan::reps::{self, PatchParams};
use segplan::volumes::{synth, MaskVolume, Shape, SyntheticSpec};

const EXTENTS: [usize; 6] = [1, 63, 64, 65, 100, 200];

fn cuboid(dims: [usize; 3], corner: [usize; 3], extent: [usize; 3]) -> MaskVolume {
    synth(&SyntheticSpec::new(dims, Shape::Cuboid { corner, edges: extent })).unwrap()
}

fn expected_per_axis(extent: usize) -> usize {
    if extent <= 64 {
        1
    } else {
        ((extent - 64) as f64 / 48.0).ceil() as usize + 1
    }
}

#[test]
fn every_extent_is_covered_with_closed_form_counts() {
    let params = PatchParams::default();
    assert_eq!(reps::patches_per_axis(100, &params), 2);
    for (i, &e) in EXTENTS.iter().enumerate() {
        for offset in [0usize, 5] {
            let extent = [e, EXTENTS[(i + 2) % EXTENTS.len()], EXTENTS[(i + 4) % EXTENTS.len()]];
            let dim = *extent.iter().max().unwrap().max(&64) + 2 * offset + 3;
            let mask = cuboid([dim; 3], [offset; 3], extent);
            let plan = reps::plan_patches(&mask, &params).unwrap();
            let want: usize = extent.iter().map(|&x| expected_per_axis(x)).product();
            assert_eq!(plan.patch_count(), want, "extent {extent:?}");
            assert!(plan.covers(&mask), "extent {extent:?} offset {offset}");
            for (c, x) in plan.core_boxes.iter().zip(&plan.expanded_boxes) {
                assert!(x.contains_box(c));
                assert!((0..3).all(|a| c.max[a] <= dim && x.max[a] <= dim));
            }
        }
    }
}

#[test]
fn blobs_are_covered_by_both_tiling_modes() {
    for seed in 0..4 {
        let spec = SyntheticSpec::new(
            [140, 120, 100],
            Shape::BlobSet { count: 4, radius_min: 4.0, radius_max: 12.0, min_separation: 3.0 },
        )
        .seeded(seed);
        let mask = synth(&spec).unwrap();
        for mode in [reps::TilingMode::Union, reps::TilingMode::PerComponent] {
            let plan = reps::plan_patches_with_mode(&mask, &PatchParams::default(), mode).unwrap();
            assert!(plan.covers(&mask), "seed {seed} {mode:?}");
        }
    }
}

/// Interior ROI of extent 96: two cores per axis, each expanded box has
/// 32 voxels of slack, so 33 equally likely offsets.
#[test]
fn epoch_offsets_are_uniform_and_reproducible() {
    let mask = cuboid([200; 3], [52; 3], [96; 3]);
    let plan = reps::plan_patches(&mask, &PatchParams::default()).unwrap();
    assert_eq!(plan.patch_count(), 8);
    let epochs = 10_000u64;
    let bins = 33;
    let mut counts = vec![vec![0u64; bins]; 3];
    for epoch in 0..epochs {
        let a = reps::sample_epoch(&plan, 2024, epoch);
        let b = reps::sample_epoch(&plan, 2024, epoch);
        assert_eq!(a, b);
        let (core, exp) = (&a.boxes[0], &plan.expanded_boxes[0]);
        assert!(exp.contains_box(core));
        for axis in 0..3 {
            counts[axis][core.min[axis] - exp.min[axis]] += 1;
        }
    }
    let expected = epochs as f64 / bins as f64;
    let df = (bins - 1) as f64;
    for (axis, c) in counts.iter().enumerate() {
        let chi2: f64 = c.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < df + 3.0 * (2.0 * df).sqrt(), "axis {axis} chi2 {chi2}");
    }
}

#[test]
fn epoch_seeds_change_samples() {
    let mask = cuboid([200; 3], [52; 3], [96; 3]);
    let plan = reps::plan_patches(&mask, &PatchParams::default()).unwrap();
    assert_ne!(reps::sample_epoch(&plan, 1, 0), reps::sample_epoch(&plan, 1, 1));
    assert_ne!(reps::sample_epoch(&plan, 1, 0).boxes, reps::sample_epoch(&plan, 2, 0).boxes);
}

#[test]
fn baseline_patches_all_touch_foreground() {
    let spec = SyntheticSpec::new([160, 160, 160], Shape::BlobSet { count: 3, radius_min: 3.0, radius_max: 6.0, min_separation: 2.0 })
        .seeded(7);
    let mask = synth(&spec).unwrap();
    let boxes = reps::baseline_random_positive(&mask, 50, 64, 3).unwrap();
    assert_eq!(boxes.len(), 50);
    for b in &boxes {
        assert!((0..3).all(|a| b.max[a] <= 160 && b.extents()[a] == 64));
        let hit = mask.foreground_indices().any(|i| b.contains_point(mask.coords(i)));
        assert!(hit, "{b:?}");
    }
    assert_eq!(boxes, reps::baseline_random_positive(&mask, 50, 64, 3).unwrap());
}

#[test]
fn census_of_large_cube() {
    let mask = cuboid([170; 3], [10; 3], [150; 3]);
    assert_eq!(reps::patch_census(&[mask], &PatchParams::default()).unwrap(), vec![27]);
}
