//! Property tests for the numeric core: oracle equivalences and algebraic
//! identities over randomized inputs.

use bldnet::check::{brute_force_sdt, point_in_polygon_reference};
use bldnet::datapipe::{rasterize, Polygon};
use bldnet::evaluation::connected_components;
use bldnet::grid::Grid;
use bldnet::labels::{expectation_decode, quantize, signed_distance_transform};
use bldnet::ops::{conv2d, maxpool2};
use bldnet::tensor::{ConvParams, Padding, Tensor};
use bldnet::upsample::{upsample_bilinear, upsample_vjp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn random_mask(h: usize, w: usize, seed: u64, density: f64) -> Grid<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grid::from_vec(h, w, (0..h * w).map(|_| rng.gen_bool(density)).collect()).unwrap()
}

/// Star-shaped polygons around a fixed center are always simple.
fn star_polygon(n: usize, seed: u64) -> Polygon {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = gaps.iter().sum();
    let mut angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut verts = Vec::with_capacity(n);
    for g in gaps {
        angle += g / total * std::f64::consts::TAU;
        let radius = rng.gen_range(2.0..9.5);
        verts.push((10.0 + radius * angle.cos(), 10.0 + radius * angle.sin()));
    }
    Polygon::new(verts).expect("star polygons are simple")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn same_zero_conv_preserves_extents(
        h in 1usize..11,
        w in 1usize..11,
        kh in 0usize..3,
        kw in 0usize..3,
        count in 1usize..4,
        cin in 1usize..4,
        seed in 0u64..1_000_000,
    ) {
        let (kh, kw) = (2 * kh + 1, 2 * kw + 1);
        let input = random_tensor(&[h, w, cin], seed, -1.0, 1.0);
        let p = ConvParams::new(
            random_tensor(&[count, kh, kw, cin], seed + 1, -1.0, 1.0),
            random_tensor(&[count], seed + 2, -1.0, 1.0),
            Padding::SameZero,
        ).unwrap();
        let out = conv2d(&input, &p).unwrap();
        prop_assert_eq!(out.shape(), &[h, w, count]);
    }

    #[test]
    fn conv_is_linear_in_the_input(
        h in 2usize..8,
        w in 2usize..8,
        seed in 0u64..1_000_000,
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let x = random_tensor(&[h, w, 2], seed, -1.0, 1.0);
        let y = random_tensor(&[h, w, 2], seed + 7, -1.0, 1.0);
        let p = ConvParams::new(
            random_tensor(&[3, 3, 3, 2], seed + 13, -1.0, 1.0),
            Tensor::zeros(&[3]),
            Padding::SameZero,
        ).unwrap();
        let mut combo = x.clone();
        combo.scale(a);
        combo.axpy(b, &y).unwrap();
        let lhs = conv2d(&combo, &p).unwrap();
        let mut rhs = conv2d(&x, &p).unwrap();
        rhs.scale(a);
        rhs.axpy(b, &conv2d(&y, &p).unwrap()).unwrap();
        for (u, v) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn maxpool_equals_bruteforce_window_max(
        h in 2usize..9,
        w in 2usize..9,
        c in 1usize..3,
        seed in 0u64..1_000_000,
    ) {
        let input = random_tensor(&[h, w, c], seed, -5.0, 5.0);
        let (out, _) = maxpool2(&input).unwrap();
        for r in 0..h / 2 {
            for cc in 0..w / 2 {
                for ch in 0..c {
                    let mut m = f64::NEG_INFINITY;
                    for dr in 0..2 {
                        for dc in 0..2 {
                            m = m.max(input.data()[((2 * r + dr) * w + 2 * cc + dc) * c + ch]);
                        }
                    }
                    prop_assert_eq!(out.data()[(r * (w / 2) + cc) * c + ch], m);
                }
            }
        }
    }

    #[test]
    fn sdt_matches_bruteforce_search(
        h in 3usize..64,
        w in 3usize..64,
        seed in 0u64..1_000_000,
        density in 0.05f64..0.6,
    ) {
        let mask = random_mask(h, w, seed, density);
        let got = signed_distance_transform(&mask.map(|b| if b { 1.0 } else { 0.0 })).unwrap();
        let want = brute_force_sdt(&mask);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn rasterize_matches_reference_point_test(
        n in 3usize..13,
        seed in 0u64..1_000_000,
    ) {
        let poly = star_polygon(n, seed);
        let mask = rasterize(std::slice::from_ref(&poly), 20, 20).unwrap();
        for r in 0..20 {
            for c in 0..20 {
                let want = point_in_polygon_reference(
                    c as f64 + 0.5,
                    r as f64 + 0.5,
                    poly.vertices(),
                );
                prop_assert_eq!(mask.get(r, c), want, "pixel ({}, {})", r, c);
            }
        }
    }

    #[test]
    fn upsample_adjoint_identity(
        h in 2usize..6,
        w in 2usize..6,
        c in 1usize..3,
        factor in prop::sample::select(vec![2usize, 4]),
        seed in 0u64..1_000_000,
    ) {
        let x = random_tensor(&[h, w, c], seed, -3.0, 3.0);
        let u = random_tensor(&[h * factor, w * factor, c], seed + 3, -3.0, 3.0);
        let ux = upsample_bilinear(&x, factor).unwrap();
        let vu = upsample_vjp(&u, factor).unwrap();
        let lhs: f64 = u.data().iter().zip(ux.data()).map(|(p, q)| p * q).sum();
        let rhs: f64 = vu.data().iter().zip(x.data()).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn upsample_keeps_original_samples(
        h in 1usize..5,
        w in 1usize..5,
        factor in prop::sample::select(vec![2usize, 3, 4, 8]),
        seed in 0u64..1_000_000,
    ) {
        let x = random_tensor(&[h, w, 1], seed, -10.0, 10.0);
        let up = upsample_bilinear(&x, factor).unwrap();
        for r in 0..h {
            for c in 0..w {
                prop_assert_eq!(
                    up.data()[(r * factor) * (w * factor) + c * factor],
                    x.data()[r * w + c]
                );
            }
        }
    }

    #[test]
    fn quantize_then_one_hot_then_decode_is_identity(
        h in 1usize..6,
        w in 1usize..6,
        seed in 0u64..1_000_000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = Grid::from_vec(
            h,
            w,
            (0..h * w).map(|_| rng.gen_range(-64i32..=63) as f64).collect(),
        ).unwrap();
        let classes = quantize(&field);
        let mut probs = Tensor::<f64>::zeros(&[h, w, 128]);
        for (r, c, cls) in classes.iter() {
            probs.data_mut()[(r * w + c) * 128 + (cls as i32 + 64) as usize] = 1.0;
        }
        let decoded = expectation_decode(&probs).unwrap();
        prop_assert_eq!(decoded, field);
    }

    #[test]
    fn connected_components_match_flood_fill(
        h in 1usize..32,
        w in 1usize..32,
        seed in 0u64..1_000_000,
        density in 0.1f64..0.7,
    ) {
        let mask = random_mask(h, w, seed, density);
        let got = connected_components(&mask);

        // independent 8-connected flood fill
        let mut label = Grid::filled(h, w, usize::MAX);
        let mut count = 0usize;
        for r0 in 0..h {
            for c0 in 0..w {
                if !mask.get(r0, c0) || label.get(r0, c0) != usize::MAX {
                    continue;
                }
                let mut queue = std::collections::VecDeque::new();
                queue.push_back((r0, c0));
                label.set(r0, c0, count);
                while let Some((r, c)) = queue.pop_front() {
                    for dr in -1i64..=1 {
                        for dc in -1i64..=1 {
                            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                                continue;
                            }
                            let (nr, nc) = (nr as usize, nc as usize);
                            if mask.get(nr, nc) && label.get(nr, nc) == usize::MAX {
                                label.set(nr, nc, count);
                                queue.push_back((nr, nc));
                            }
                        }
                    }
                }
                count += 1;
            }
        }
        prop_assert_eq!(got.len(), count);
        // areas per label match
        let mut areas = vec![0usize; count];
        for (_, _, l) in label.iter() {
            if l != usize::MAX {
                areas[l] += 1;
            }
        }
        let mut got_areas: Vec<usize> = got.iter().map(|component| component.area).collect();
        got_areas.sort_unstable();
        areas.sort_unstable();
        prop_assert_eq!(got_areas, areas);
    }
}
