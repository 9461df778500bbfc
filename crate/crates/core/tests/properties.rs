mod common;

use std::collections::HashSet;

use ndmls::handles::{
    displaced_target, displacement_length, level_size, nine_dot_points, pattern_at, ImageDims,
};
use ndmls::labels::bbox_from_mask;
use ndmls::mask::{barycenter, connected_components, largest_region, trace_contour};
use ndmls::mls::{precompute_basis, transform_direct, transform_point};
use ndmls::warp::{build_inverse_warp_field, build_warp_field, warp_image};
use ndmls::{Fill, HandleSet, Point2, Raster, Sampling};
use proptest::prelude::*;

fn handle_set(max: usize, extent: f64) -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((0.0..extent, 0.0..extent), 3..=max)
        .prop_map(|v| v.into_iter().map(Point2::from).collect::<Vec<_>>())
        .prop_filter("handles too close", |pts| {
            pts.iter()
                .enumerate()
                .all(|(i, a)| pts[i + 1..].iter().all(|b| a.dist(*b) > 0.5))
        })
}

fn binary_mask(w: u32, h: u32) -> impl Strategy<Value = Raster> {
    prop::collection::vec(prop::bool::weighted(0.45), (w * h) as usize).prop_map(move |bits| {
        let px = bits.into_iter().map(|b| if b { 255 } else { 0 }).collect();
        Raster::new(w, h, 1, px).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cached_basis_matches_uncached_oracle(
        p in handle_set(10, 32.0),
        shift in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 10),
        alpha in 1.2..3.0f64,
    ) {
        let q: Vec<Point2> = p.iter().zip(&shift).map(|(a, s)| *a + Point2::from(*s)).collect();
        let basis = precompute_basis(&p, alpha, 32, 32, 1).unwrap();
        let (cols, rows) = basis.lattice_dims();
        for j in 0..rows {
            for i in 0..cols {
                let v = basis.vertex(i, j);
                let got = transform_point(&basis, &q, v).unwrap();
                let want = common::rigid_mls(&p, &q, alpha, v);
                prop_assert!(got.dist(want) <= 1e-12 * want.norm().max(1.0), "{got:?} vs {want:?} at {v:?}");
            }
        }
    }

    #[test]
    fn lattice_with_few_moved_handles_matches_oracle(
        p in handle_set(10, 24.0),
        moved in prop::collection::vec((0usize..10, -4.0..4.0f64, -4.0..4.0f64), 1..4),
        g in 1u32..4,
    ) {
        let mut q = p.clone();
        for (h, dx, dy) in moved {
            let h = h % p.len();
            q[h] = q[h] + Point2::new(dx, dy);
        }
        let basis = precompute_basis(&p, 2.0, 24, 24, g).unwrap();
        let lattice = basis.transform_lattice(&q).unwrap();
        let (cols, rows) = basis.lattice_dims();
        for j in 0..rows {
            for i in 0..cols {
                let v = basis.vertex(i, j);
                let want = common::rigid_mls(&p, &q, 2.0, v);
                prop_assert!(lattice[j * cols + i].dist(want) <= 1e-12 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn direct_transform_matches_complex_form(
        p in handle_set(8, 50.0),
        shift in prop::collection::vec((-8.0..8.0f64, -8.0..8.0f64), 8),
        v in (0.0..50.0f64, 0.0..50.0f64),
    ) {
        let v = Point2::from(v);
        prop_assume!(p.iter().all(|a| a.dist(v) > 1e-3));
        let q: Vec<Point2> = p.iter().zip(&shift).map(|(a, s)| *a + Point2::from(*s)).collect();
        let got = transform_direct(&HandleSet::new(p.clone(), q.clone(), 2.0).unwrap(), v).unwrap();
        let want = common::rigid_mls_complex(&p, &q, 2.0, v);
        prop_assert!((got.x - want.re).abs() < 1e-9 && (got.y - want.im).abs() < 1e-9);
    }

    #[test]
    fn global_rigid_motion_is_reproduced(
        p in handle_set(8, 40.0),
        angle in 0.0..360.0f64,
        t in (-10.0..10.0f64, -10.0..10.0f64),
    ) {
        let t = Point2::from(t);
        let q: Vec<Point2> = p.iter().map(|a| common::rotate(*a, angle, t)).collect();
        let basis = precompute_basis(&p, 2.0, 40, 40, 4).unwrap();
        let (cols, rows) = basis.lattice_dims();
        for j in 0..rows {
            for i in 0..cols {
                let v = basis.vertex(i, j);
                let got = transform_point(&basis, &q, v).unwrap();
                prop_assert!(got.dist(common::rotate(v, angle, t)) < 1e-6);
            }
        }
    }

    #[test]
    fn identity_handles_leave_images_untouched(
        seed in any::<u64>(),
        w in 4u32..40, h in 4u32..40, g in 1u32..6,
        channels in prop::sample::select(vec![1u8, 3]),
    ) {
        let mut rng = common::rng(seed);
        let img = common::noise_image(&mut rng, w, h, channels);
        let p = nine_dot_points(ImageDims::new(w, h), 0.23).unwrap();
        let basis = precompute_basis(&p, 2.0, w, h, g).unwrap();
        let inverse = build_inverse_warp_field(&basis, &p).unwrap();
        let swapped = build_warp_field(&basis, &HandleSet::identity(p.clone(), 2.0).unwrap(), w, h).unwrap();
        for field in [inverse, swapped] {
            prop_assert_eq!(&warp_image(&img, &field, Sampling::Bilinear, Fill::ReplicateEdge).unwrap(), &img);
        }
    }

    #[test]
    fn markers_follow_their_handles(index in 0u64..2004, seed in any::<u64>()) {
        let (w, h) = (64u32, 64u32);
        let dims = ImageDims::new(w, h);
        let p = nine_dot_points(dims, 0.23).unwrap();
        let len = displacement_length(dims, 0.23, 0.14);
        let pattern = pattern_at(9, 4, index).unwrap();
        let q = pattern.apply(&p, |a, j| displaced_target(a, len, 45.0, 0.25, j));
        let color = |k: usize| [20 + 25 * k as u8, 255 - 25 * k as u8, 7 * k as u8];
        let mut rng = common::rng(seed);
        let background: u8 = rand::RngExt::random_range(&mut rng, 100..140);
        let img = Raster::from_fn(w, h, 3, |x, y| {
            p.iter()
                .position(|a| (x as f64 - a.x).abs() <= 1.5 && (y as f64 - a.y).abs() <= 1.5)
                .map_or([background; 3], color)
        })
        .unwrap();
        let basis = precompute_basis(&p, 2.0, w, h, 1).unwrap();
        let field = build_inverse_warp_field(&basis, &q).unwrap();
        let out = warp_image(&img, &field, Sampling::Bilinear, Fill::ReplicateEdge).unwrap();
        for (k, qk) in q.iter().enumerate() {
            let found = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).any(|(x, y)| {
                (x as f64 - qk.x).abs() <= 1.0 && (y as f64 - qk.y).abs() <= 1.0 && out.pixel(x, y) == color(k)
            });
            prop_assert!(found, "marker {k} not found near {qk:?}");
        }
    }

    #[test]
    fn contour_is_closed_and_on_the_boundary(mask in binary_mask(14, 11)) {
        prop_assume!(mask.count_nonzero() > 0);
        let region = largest_region(&mask).unwrap();
        let members: HashSet<(i64, i64)> = region.pixels.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
        let contour = trace_contour(&region).unwrap();
        prop_assert!(!contour.is_empty());
        let pts: Vec<(i64, i64)> = contour.iter().map(|c| (c.x as i64, c.y as i64)).collect();
        for (k, &(x, y)) in pts.iter().enumerate() {
            prop_assert!(members.contains(&(x, y)));
            let open = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| !members.contains(&(x + dx, y + dy)));
            prop_assert!(open, "contour pixel ({x},{y}) is interior");
            let (nx, ny) = pts[(k + 1) % pts.len()];
            prop_assert!((nx - x).abs() <= 1 && (ny - y).abs() <= 1);
        }
    }

    #[test]
    fn components_partition_the_foreground(mask in binary_mask(12, 12)) {
        let comps = connected_components(&mask).unwrap();
        let total: usize = comps.iter().map(|c| c.area()).sum();
        prop_assert_eq!(total, mask.count_nonzero());
        for pair in comps.windows(2) {
            prop_assert!(pair[0].area() >= pair[1].area());
        }
    }

    #[test]
    fn barycenter_is_weighted_pixel_mean(values in prop::collection::vec(0u8..=255, 13 * 9)) {
        let mask = Raster::new(13, 9, 1, values.iter().map(|&v| if v > 90 { v } else { 0 }).collect()).unwrap();
        prop_assume!(mask.count_nonzero() > 0);
        let region = largest_region(&mask).unwrap();
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for &(x, y) in &region.pixels {
            let f = mask.value(x, y) as f64;
            sx += f * x as f64;
            sy += f * y as f64;
            sw += f;
        }
        let b = barycenter(&region, &mask).unwrap();
        prop_assert!((b.x - sx / sw).abs() < 1e-9 && (b.y - sy / sw).abs() < 1e-9);
    }

    #[test]
    fn mask_box_is_tight_and_contains_foreground(mask in binary_mask(16, 10)) {
        match common::foreground_extent(&mask) {
            None => prop_assert!(bbox_from_mask(&mask).is_err()),
            Some((x0, y0, x1, y1)) => {
                let b = bbox_from_mask(&mask).unwrap();
                prop_assert_eq!((b.x, b.y, b.max_x(), b.max_y()), (x0 as f64, y0 as f64, x1 as f64, y1 as f64));
            }
        }
    }

    #[test]
    fn warping_is_deterministic(seed in any::<u64>(), index in 0u64..2004) {
        let mut rng = common::rng(seed);
        let img = common::noise_image(&mut rng, 24, 20, 3);
        let dims = ImageDims::new(24, 20);
        let p = nine_dot_points(dims, 0.23).unwrap();
        let len = displacement_length(dims, 0.23, 0.14);
        let q = pattern_at(9, 4, index).unwrap().apply(&p, |a, j| displaced_target(a, len, 45.0, 0.25, j));
        let run = || {
            let basis = precompute_basis(&p, 2.0, 24, 20, 2).unwrap();
            let field = build_inverse_warp_field(&basis, &q).unwrap();
            (warp_image(&img, &field, Sampling::Bilinear, Fill::ReplicateEdge).unwrap(), field)
        };
        let (a, fa) = run();
        let (b, fb) = run();
        prop_assert_eq!(a, b);
        prop_assert_eq!(fa, fb);
    }
}

#[test]
fn enumeration_is_a_bijection_with_binomial_levels() {
    for d in 1..=4usize {
        let total = 9 * d + 36 * d * d + 84 * d * d * d;
        let mut seen = HashSet::new();
        let mut per_level = [0u128; 4];
        for i in 0..total as u64 {
            let pat = pattern_at(9, d, i).unwrap();
            assert!(pat.directions.iter().all(|&j| j < d));
            assert!(pat.moved.windows(2).all(|w| w[0] < w[1]));
            per_level[pat.moved.len()] += 1;
            assert!(seen.insert(pat.clone()), "pattern {i} repeats");
            assert_eq!(pattern_at(9, d, i).unwrap(), pat);
        }
        for m in 1..=3 {
            assert_eq!(per_level[m], level_size(9, d, m));
            let binom = [0, 9, 36, 84][m] as u128;
            assert_eq!(per_level[m], binom * (d as u128).pow(m as u32));
        }
    }
}

#[test]
fn displaced_targets_stay_inside_the_image() {
    for (w, h) in [(28, 28), (100, 100), (100, 50), (7, 300)] {
        let dims = ImageDims::new(w, h);
        for kp in [0.05, 0.23, 0.4, 0.49] {
            let p = nine_dot_points(dims, kp).unwrap();
            let len = displacement_length(dims, kp, 0.99);
            for a in &p {
                let border = a.x.min(a.y).min(w as f64 - a.x).min(h as f64 - a.y);
                for j in 0..4 {
                    let t = displaced_target(*a, len, 45.0, 0.25, j);
                    assert!(t.dist(*a) < border, "{w}x{h} kp={kp} {a:?} -> {t:?}");
                }
            }
        }
    }
}
