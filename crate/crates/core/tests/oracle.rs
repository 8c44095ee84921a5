//! Packed evaluation and booleanizers against from-first-principles
//! reference implementations.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tm_composite::booleanize::{adaptive_gaussian_threshold, gaussian_kernel, hog_booleanize, HogParams};
use tm_composite::datasets::ImageView;
use tm_composite::tm::{Mode, PatchSet};

#[test]
fn dense_class_sums_match_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.gen_range(1..150);
        let m = random_model(&mut rng, (1, 1, n), 1, None, 3, 8);
        for _ in 0..50 {
            let density = rng.gen_range(0.1..0.9);
            let x = random_tensor(&mut rng, (1, 1, n), density);
            assert_eq!(m.class_sums(&x).unwrap(), naive_class_sums(&m, &x));
        }
    }
}

#[test]
fn conv_class_sums_match_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let side = rng.gen_range(3..9);
        let win = rng.gen_range(1..=side);
        let m = random_model(&mut rng, (side, side, 1), 2, Some(win), 2, 10);
        for _ in 0..30 {
            let x = random_tensor(&mut rng, (side, side, 2), 0.5);
            assert_eq!(m.class_sums(&x).unwrap(), naive_class_sums(&m, &x));
        }
    }
}

#[test]
fn conv_clause_output_is_or_over_patches() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let m = random_model(&mut rng, (7, 9, 1), 3, Some(3), 2, 12);
        for _ in 0..20 {
            let x = random_tensor(&mut rng, (7, 9, 3), 0.6);
            let ps = PatchSet::build(m.geometry(), &x).unwrap();
            let patches = naive_patch_literals(&m, &x);
            let bank = m.bank();
            for c in 0..bank.clause_count() {
                let any = naive_clause_output(&m, c, &patches);
                assert_eq!(bank.conv_clause_output(c, &ps, Mode::Infer), any);
                let empty = bank.included_count(c) == 0;
                assert_eq!(bank.conv_clause_output(c, &ps, Mode::Train), any || empty);
            }
        }
    }
}

#[test]
fn kernel_matches_closed_form() {
    for size in [3, 5, 7, 11, 15, 31] {
        let a = gaussian_kernel(size);
        let b = gaussian_weights(size);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15, "size {size}: {x} vs {y}");
        }
    }
}

/// Direct 2D weighted sum with mirrored borders.
fn adaptive_oracle(px: &[u8], h: usize, w: usize, block: usize, c: f64) -> Vec<bool> {
    let k = gaussian_weights(block);
    let half = (block / 2) as isize;
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut mean = 0.0;
            for i in 0..block {
                let yy = mirror(y as isize + i as isize - half, h);
                let mut row = 0.0;
                for j in 0..block {
                    let xx = mirror(x as isize + j as isize - half, w);
                    row += k[j] * px[yy * w + xx] as f64;
                }
                mean += k[i] * row;
            }
            out.push(px[y * w + x] as f64 > mean - c);
        }
    }
    out
}

#[test]
fn adaptive_threshold_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for (block, c) in [(15, 2.0), (3, 0.0), (7, -5.0), (31, 2.0)] {
        for _ in 0..5 {
            let (h, w) = (rng.gen_range(1..40), rng.gen_range(1..40));
            let px = random_pixels(&mut rng, h * w);
            let img = ImageView { height: h, width: w, channels: 1, pixels: &px };
            let got = adaptive_gaussian_threshold(img, block, c);
            let want = adaptive_oracle(&px, h, w, block, c);
            for (i, &v) in want.iter().enumerate() {
                assert_eq!(got.get_flat(i), v, "block {block} c {c} at {i} of {h}x{w}");
            }
        }
    }
}

#[test]
fn mirror_border_cases() {
    assert_eq!(mirror(-1, 5), 1);
    assert_eq!(mirror(-4, 5), 4);
    assert_eq!(mirror(5, 5), 3);
    assert_eq!(mirror(-6, 5), 2);
    assert_eq!(mirror(-3, 1), 0);
}

fn edge_image(vertical: bool) -> Vec<u8> {
    let mut px = vec![0u8; 32 * 32];
    for y in 0..32 {
        for x in 0..32 {
            if (vertical && x >= 16) || (!vertical && y >= 16) {
                px[y * 32 + x] = 255;
            }
        }
    }
    px
}

/// A step edge puts all gradient energy in one bin of the two cells that
/// straddle it; each of those cells holds half of its block's L2 mass.
#[test]
fn hog_step_edge() {
    let p = HogParams::default();
    for (vertical, bin) in [(true, 0), (false, 4)] {
        let px = edge_image(vertical);
        let t = hog_booleanize(ImageView { height: 32, width: 32, channels: 1, pixels: &px }, &p);
        assert_eq!(t.shape(), (8, 8, 72));
        for cy in 0..8 {
            for cx in 0..8 {
                let on_edge = if vertical { cx == 3 || cx == 4 } else { cy == 3 || cy == 4 };
                for b in 0..9 {
                    for k in 0..8 {
                        let want = on_edge && b == bin;
                        assert_eq!(t.get(cy, cx, b * 8 + k), want, "cell ({cy},{cx}) bin {b} level {k}");
                    }
                }
            }
        }
    }
}

#[test]
fn hog_colour_takes_strongest_channel() {
    let edge = edge_image(true);
    let mut px = vec![0u8; 32 * 32 * 3];
    for i in 0..32 * 32 {
        px[i * 3 + 1] = edge[i] / 5;
        px[i * 3 + 2] = edge[i];
    }
    let p = HogParams::default();
    let colour = hog_booleanize(ImageView { height: 32, width: 32, channels: 3, pixels: &px }, &p);
    let gray = hog_booleanize(ImageView { height: 32, width: 32, channels: 1, pixels: &edge }, &p);
    assert_eq!(colour, gray);
}
