//! Clause learning with Type I / Type II feedback.
//!
//! Per example of class `y` the target class `y` and one uniformly sampled
//! other class receive feedback. A clause of the target class is selected
//! with probability `(T - clamp(c_y)) / 2T`; positive clauses then get
//! Type I and negative ones Type II. The sampled class is handled
//! symmetrically with probability `(T + clamp(c_other)) / 2T` and swapped
//! feedback types.
//!
//! Type I: if the clause fired, literals that are 1 in the recorded patch are
//! reinforced towards include with probability `(s-1)/s`, and literals that
//! are 0 drift towards exclude with probability `1/s`; otherwise every
//! literal drifts towards exclude with probability `1/s`.
//! Type II: if the clause fired, every excluded literal that is 0 in the
//! recorded patch moves one step towards include.
//! Weighted clauses gain 1 on fired Type I and lose 1 (floor 1) on fired
//! Type II.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::booleanize::BooleanTensor;
use crate::error::{usage, Result};

use super::patches::PatchSet;
use super::TmModel;

/// Probability that a clause of a class with sum `class_sum` is selected for
/// feedback. `target` is true for the example's own class.
pub fn feedback_probability(class_sum: i32, threshold: i32, target: bool) -> f64 {
    let c = class_sum.clamp(-threshold, threshold) as f64;
    let t = threshold as f64;
    if target {
        (t - c) / (2.0 * t)
    } else {
        (t + c) / (2.0 * t)
    }
}

struct Scratch {
    acc: Vec<u64>,
    lits: Vec<u64>,
    rand: Vec<u64>,
    inc: Vec<u64>,
    dec: Vec<u64>,
    cross: Vec<u64>,
    outputs: Vec<Option<usize>>,
    picks: Vec<u32>,
}

impl Scratch {
    fn new(literal_words: usize, patch_words: usize) -> Self {
        Self {
            acc: vec![0; patch_words],
            lits: vec![0; literal_words],
            rand: vec![0; literal_words],
            inc: vec![0; literal_words],
            dec: vec![0; literal_words],
            cross: vec![0; literal_words],
            outputs: Vec::new(),
            picks: Vec::new(),
        }
    }
}

/// Sets each of the first `n` bits independently with probability `p`,
/// jumping between hits with geometric skips.
fn random_mask(rng: &mut ChaCha8Rng, p: f64, n: usize, out: &mut [u64]) {
    out.fill(0);
    if p <= 0.0 {
        return;
    }
    let ln_q = (1.0 - p).ln();
    let mut i = 0usize;
    while i < n {
        let u = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / ln_q).floor();
        if skip >= (n - i) as f64 {
            break;
        }
        i += skip as usize;
        out[i / 64] |= 1 << (i % 64);
        i += 1;
    }
}

/// Uniformly random set bit of a non-empty bitset.
fn pick_bit(bits: &[u64], rng: &mut ChaCha8Rng) -> usize {
    let total: u32 = bits.iter().map(|w| w.count_ones()).sum();
    if total == 1 {
        return first_bit(bits);
    }
    let mut k = rng.gen_range(0..total);
    for (w, &word) in bits.iter().enumerate() {
        let n = word.count_ones();
        if k < n {
            let mut v = word;
            for _ in 0..k {
                v &= v - 1;
            }
            return w * 64 + v.trailing_zeros() as usize;
        }
        k -= n;
    }
    unreachable!("bitset was empty")
}

fn first_bit(bits: &[u64]) -> usize {
    for (w, &word) in bits.iter().enumerate() {
        if word != 0 {
            return w * 64 + word.trailing_zeros() as usize;
        }
    }
    unreachable!("bitset was empty")
}

impl TmModel {
    /// One shuffled pass over `inputs`. All randomness comes from `seed`.
    pub fn train_epoch(&mut self, inputs: &[BooleanTensor], labels: &[u8], seed: u64) -> Result<()> {
        if !self.resumable {
            return usage("model was restored without automaton states and cannot be trained");
        }
        if inputs.is_empty() {
            return usage("empty training set");
        }
        if inputs.len() != labels.len() {
            return usage(format!("{} inputs but {} labels", inputs.len(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= self.classes()) {
            return usage(format!("label {bad} outside [0, {})", self.classes()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut rng);
        let mut scratch = Scratch::new(self.bank.words(), self.geometry.patch_count().div_ceil(64));
        for d in order {
            let ps = self.patches(&inputs[d])?;
            self.train_example(&ps, labels[d] as usize, &mut rng, &mut scratch);
        }
        Ok(())
    }

    fn train_example(&mut self, ps: &PatchSet, y: usize, rng: &mut ChaCha8Rng, s: &mut Scratch) {
        self.update_class(y, true, ps, rng, s);
        let m = self.classes();
        if m > 1 {
            let mut other = rng.gen_range(0..m - 1);
            if other >= y {
                other += 1;
            }
            self.update_class(other, false, ps, rng, s);
        }
    }

    fn update_class(&mut self, class: usize, target: bool, ps: &PatchSet, rng: &mut ChaCha8Rng, s: &mut Scratch) {
        let per = self.bank.clauses_per_class();
        s.outputs.clear();
        let mut sum = 0i32;
        for j in 0..per {
            let c = self.bank.clause_id(class, j);
            let out = if self.bank.match_patches(c, ps, &mut s.acc) {
                sum += self.bank.polarity(c) * self.bank.weight(c) as i32;
                Some(if ps.patch_count() == 1 { 0 } else { pick_bit(&s.acc, rng) })
            } else {
                None
            };
            s.outputs.push(out);
        }
        let p = feedback_probability(sum, self.hyper.threshold, target);
        for j in 0..per {
            if rng.gen::<f64>() >= p {
                continue;
            }
            let c = self.bank.clause_id(class, j);
            let positive = self.bank.polarity(c) > 0;
            let out = s.outputs[j];
            if positive == target {
                self.type_i(c, out, ps, rng, s);
            } else if let Some(patch) = out {
                self.type_ii(c, patch, ps, rng, s);
            }
        }
    }

    fn type_i(&mut self, c: usize, out: Option<usize>, ps: &PatchSet, rng: &mut ChaCha8Rng, s: &mut Scratch) {
        let n = self.bank.literals();
        random_mask(rng, 1.0 / self.hyper.specificity, n, &mut s.rand);
        match out {
            Some(patch) => {
                ps.patch_literals(patch, &mut s.lits);
                for w in 0..s.lits.len() {
                    s.inc[w] = s.lits[w] & !s.rand[w];
                    s.dec[w] = !s.lits[w] & s.rand[w];
                }
                self.limit_inclusions(c, rng, s);
                self.bank.increment(c, &s.inc);
                self.bank.decrement(c, &s.dec);
                if self.hyper.weighted {
                    let w = self.bank.weight(c);
                    self.bank.set_weight(c, w.saturating_add(1));
                }
            }
            None => self.bank.decrement(c, &s.rand),
        }
    }

    fn type_ii(&mut self, c: usize, patch: usize, ps: &PatchSet, rng: &mut ChaCha8Rng, s: &mut Scratch) {
        ps.patch_literals(patch, &mut s.lits);
        let tail = self.bank.tail_mask();
        let words = s.lits.len();
        let include = self.bank.include_mask(c);
        for w in 0..words {
            s.inc[w] = !s.lits[w] & !include[w];
        }
        s.inc[words - 1] &= tail;
        self.limit_inclusions(c, rng, s);
        self.bank.increment(c, &s.inc);
        if self.hyper.weighted {
            let w = self.bank.weight(c);
            self.bank.set_weight(c, w.saturating_sub(1).max(1));
        }
    }

    /// Drops increments in `s.inc` that would push the clause past its
    /// literal budget. When only some may cross, a uniformly random subset
    /// of the candidates is kept.
    fn limit_inclusions(&self, c: usize, rng: &mut ChaCha8Rng, s: &mut Scratch) {
        self.bank.below_boundary(c, &mut s.cross);
        let mut crossing = 0usize;
        for (x, &i) in s.cross.iter_mut().zip(&s.inc) {
            *x &= i;
            crossing += x.count_ones() as usize;
        }
        let allowed = self.hyper.literal_budget.saturating_sub(self.bank.included_count(c));
        if crossing <= allowed {
            return;
        }
        s.picks.clear();
        for (w, &word) in s.cross.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                s.picks.push((w * 64 + bits.trailing_zeros() as usize) as u32);
                bits &= bits - 1;
            }
        }
        let (keep, _) = s.picks.partial_shuffle(rng, allowed);
        for (i, x) in s.inc.iter_mut().zip(&s.cross) {
            *i &= !x;
        }
        for &l in keep.iter() {
            s.inc[l as usize / 64] |= 1 << (l % 64);
        }
    }
}

/// Two-feature XOR data with a fraction of flipped labels.
pub fn noisy_xor(n: usize, noise: f64, seed: u64) -> (Vec<BooleanTensor>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.gen_bool(0.5);
        let b = rng.gen_bool(0.5);
        let mut y = a ^ b;
        if rng.gen_bool(noise) {
            y = !y;
        }
        xs.push(BooleanTensor::from_bools(&[a, b]));
        ys.push(y as u8);
    }
    (xs, ys)
}
