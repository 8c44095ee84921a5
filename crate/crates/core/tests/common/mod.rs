//! Reference implementations shared by the integration tests. They read the
//! model only through per-literal automaton states and never touch the
//! packed include masks or patch bitsets.

#![allow(dead_code)]

use rand::Rng;
use tm_composite::{BooleanTensor, BooleanizerSpec, Hyperparams, TmModel, Window};

/// Literal vectors of every stride-1 patch, spelled out bit by bit.
pub fn naive_patch_literals(model: &TmModel, x: &BooleanTensor) -> Vec<Vec<bool>> {
    let (h, w, b) = x.shape();
    let (wh, ww) = match model.hyperparams().window {
        Some(win) => (win.height, win.width),
        None => (h, w),
    };
    let dense = model.hyperparams().window.is_none();
    let (rows, cols) = (h - wh + 1, w - ww + 1);
    let mut out = Vec::new();
    for py in 0..rows {
        for px in 0..cols {
            let mut f = Vec::new();
            for dy in 0..wh {
                for dx in 0..ww {
                    for k in 0..b {
                        f.push(x.get(py + dy, px + dx, k));
                    }
                }
            }
            if !dense {
                f.extend((0..rows - 1).map(|r| py > r));
                f.extend((0..cols - 1).map(|c| px > c));
            }
            let neg: Vec<bool> = f.iter().map(|v| !v).collect();
            f.extend(neg);
            out.push(f);
        }
    }
    out
}

fn include(model: &TmModel, clause: usize, literal: usize) -> bool {
    let bank = model.bank();
    bank.state(clause, literal) > 1 << (bank.state_bits() - 1)
}

/// Inference-mode clause output: some patch satisfies every included
/// literal, and at least one literal is included.
pub fn naive_clause_output(model: &TmModel, clause: usize, patches: &[Vec<bool>]) -> bool {
    let lits = model.bank().literals();
    let inc: Vec<usize> = (0..lits).filter(|&l| include(model, clause, l)).collect();
    !inc.is_empty() && patches.iter().any(|p| inc.iter().all(|&l| p[l]))
}

pub fn naive_class_sums(model: &TmModel, x: &BooleanTensor) -> Vec<i32> {
    let patches = naive_patch_literals(model, x);
    let bank = model.bank();
    let n = bank.clauses_per_class();
    (0..model.classes())
        .map(|class| {
            (0..n)
                .map(|j| {
                    let c = class * n + j;
                    let sign = if j < n / 2 { 1 } else { -1 };
                    if naive_clause_output(model, c, &patches) {
                        sign * bank.weight(c) as i32
                    } else {
                        0
                    }
                })
                .sum()
        })
        .collect()
}

/// A model whose clauses include a handful of random literals each, with
/// random states on both sides of the boundary and random weights.
pub fn random_model(
    rng: &mut impl Rng,
    image: (usize, usize, usize),
    levels: usize,
    window: Option<usize>,
    classes: usize,
    clauses: usize,
) -> TmModel {
    let hyper = Hyperparams {
        clauses,
        weighted: true,
        window: window.map(Window::square),
        ..Default::default()
    };
    let mut m = TmModel::new(hyper, BooleanizerSpec::thermometer(levels), image, classes).unwrap();
    let bank = m.bank_mut();
    let lits = bank.literals();
    let half = 1u32 << (bank.state_bits() - 1);
    let max = bank.max_state();
    for c in 0..bank.clause_count() {
        let k = rng.gen_range(0..=4);
        for _ in 0..k {
            let l = rng.gen_range(0..lits);
            bank.set_state(c, l, rng.gen_range(half + 1..=max));
        }
        for _ in 0..3 {
            let l = rng.gen_range(0..lits);
            if bank.state(c, l) <= half {
                bank.set_state(c, l, rng.gen_range(1..=half));
            }
        }
        bank.set_weight(c, rng.gen_range(1..=6));
    }
    m
}

pub fn random_tensor(rng: &mut impl Rng, shape: (usize, usize, usize), density: f64) -> BooleanTensor {
    let mut t = BooleanTensor::zeros(shape.0, shape.1, shape.2);
    for i in 0..t.len() {
        t.set_flat(i, rng.gen_bool(density));
    }
    t
}

pub fn random_pixels(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.gen()).collect()
}

/// OpenCV-style Gaussian weights for odd `size`, normalised, computed
/// directly from the closed form.
pub fn gaussian_weights(size: usize) -> Vec<f64> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Mirror index without repeating the edge pixel: `-1 -> 1`, `n -> n - 2`.
pub fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}
