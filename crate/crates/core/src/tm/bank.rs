//! Clause bank with bit-sliced Tsetlin automaton states.
//!
//! Each clause stores `state_bits` bit planes of `ceil(literals / 64)` words.
//! Plane `k` holds bit `k` of every automaton's internal counter
//! (`state - 1`), so the top plane is exactly the include mask and whole
//! words of automata are incremented or decremented with ripple-carry logic.

use super::patches::PatchSet;
use super::Mode;

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseBank {
    classes: usize,
    per_class: usize,
    literals: usize,
    words: usize,
    state_bits: usize,
    planes: Vec<u64>,
    weights: Vec<u32>,
    included: Vec<Vec<u32>>,
}

impl ClauseBank {
    /// Every automaton starts one step below the include boundary.
    pub fn new(classes: usize, per_class: usize, literals: usize, state_bits: usize) -> Self {
        assert!((1..=16).contains(&state_bits));
        let words = literals.div_ceil(64);
        let clauses = classes * per_class;
        let mut bank = Self {
            classes,
            per_class,
            literals,
            words,
            state_bits,
            planes: vec![0; clauses * state_bits * words],
            weights: vec![1; clauses],
            included: vec![Vec::new(); clauses],
        };
        let tail = bank.tail_mask();
        for c in 0..clauses {
            for k in 0..state_bits - 1 {
                let plane = bank.plane_mut(c, k);
                plane.fill(!0);
                plane[words - 1] = tail;
            }
        }
        bank
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn clauses_per_class(&self) -> usize {
        self.per_class
    }

    pub fn clause_count(&self) -> usize {
        self.classes * self.per_class
    }

    pub fn literals(&self) -> usize {
        self.literals
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn state_bits(&self) -> usize {
        self.state_bits
    }

    /// Largest automaton state, `2^state_bits`.
    pub fn max_state(&self) -> u32 {
        1 << self.state_bits
    }

    /// Global clause index of clause `j` of class `class`.
    #[inline]
    pub fn clause_id(&self, class: usize, j: usize) -> usize {
        class * self.per_class + j
    }

    /// First half of every class votes for it, second half against.
    #[inline]
    pub fn polarity(&self, clause: usize) -> i32 {
        if clause % self.per_class < self.per_class / 2 {
            1
        } else {
            -1
        }
    }

    pub(crate) fn tail_mask(&self) -> u64 {
        match self.literals % 64 {
            0 => !0,
            r => (1u64 << r) - 1,
        }
    }

    #[inline]
    fn plane(&self, clause: usize, k: usize) -> &[u64] {
        let at = (clause * self.state_bits + k) * self.words;
        &self.planes[at..at + self.words]
    }

    #[inline]
    fn plane_mut(&mut self, clause: usize, k: usize) -> &mut [u64] {
        let at = (clause * self.state_bits + k) * self.words;
        &mut self.planes[at..at + self.words]
    }

    fn clause_planes_mut(&mut self, clause: usize) -> &mut [u64] {
        let n = self.state_bits * self.words;
        &mut self.planes[clause * n..(clause + 1) * n]
    }

    /// The include mask: literals whose state exceeds `2^(state_bits-1)`.
    pub fn include_mask(&self, clause: usize) -> &[u64] {
        self.plane(clause, self.state_bits - 1)
    }

    /// Included literal indices in ascending order.
    pub fn included(&self, clause: usize) -> &[u32] {
        &self.included[clause]
    }

    pub fn included_count(&self, clause: usize) -> usize {
        self.included[clause].len()
    }

    pub fn weight(&self, clause: usize) -> u32 {
        self.weights[clause]
    }

    pub fn set_weight(&mut self, clause: usize, w: u32) {
        assert!(w >= 1, "clause weights are positive");
        self.weights[clause] = w;
    }

    /// Automaton state in `[1, 2^state_bits]`.
    pub fn state(&self, clause: usize, literal: usize) -> u32 {
        let (w, b) = (literal / 64, literal % 64);
        (0..self.state_bits)
            .map(|k| (((self.plane(clause, k)[w] >> b) & 1) as u32) << k)
            .sum::<u32>()
            + 1
    }

    pub fn set_state(&mut self, clause: usize, literal: usize, state: u32) {
        assert!(state >= 1 && state <= self.max_state(), "state {state} out of range");
        let v = state - 1;
        let (w, b) = (literal / 64, literal % 64);
        for k in 0..self.state_bits {
            let word = &mut self.plane_mut(clause, k)[w];
            if (v >> k) & 1 == 1 {
                *word |= 1 << b;
            } else {
                *word &= !(1 << b);
            }
        }
        self.refresh(clause);
    }

    /// Sets a clause's states from an include mask: included literals sit on
    /// the first include state, the rest one step below it.
    pub fn set_include_mask(&mut self, clause: usize, mask: &[u64]) {
        assert_eq!(mask.len(), self.words);
        let tail = self.tail_mask();
        let top = self.state_bits - 1;
        let words = self.words;
        for k in 0..self.state_bits {
            let plane = self.plane_mut(clause, k);
            for w in 0..words {
                let valid = if w + 1 == words { tail } else { !0 };
                plane[w] = if k == top { mask[w] & valid } else { !mask[w] & valid };
            }
        }
        self.refresh(clause);
    }

    /// Raw plane words of one clause, `state_bits * words` long, low plane first.
    pub fn clause_planes(&self, clause: usize) -> &[u64] {
        let n = self.state_bits * self.words;
        &self.planes[clause * n..(clause + 1) * n]
    }

    pub fn set_clause_planes(&mut self, clause: usize, planes: &[u64]) {
        let tail = self.tail_mask();
        let words = self.words;
        let dst = self.clause_planes_mut(clause);
        dst.copy_from_slice(planes);
        for chunk in dst.chunks_mut(words) {
            chunk[words - 1] &= tail;
        }
        self.refresh(clause);
    }

    /// Rebuilds the cached included-literal list of `clause`.
    pub(crate) fn refresh(&mut self, clause: usize) {
        let mut list = std::mem::take(&mut self.included[clause]);
        list.clear();
        for (w, &word) in self.include_mask(clause).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                list.push((w * 64 + bits.trailing_zeros() as usize) as u32);
                bits &= bits - 1;
            }
        }
        self.included[clause] = list;
    }

    /// Saturating +1 on every automaton selected by `mask`.
    pub(crate) fn increment(&mut self, clause: usize, mask: &[u64]) {
        if mask.iter().all(|&w| w == 0) {
            return;
        }
        let words = self.words;
        let bits = self.state_bits;
        let planes = self.clause_planes_mut(clause);
        for w in 0..words {
            let mut carry = mask[w];
            for k in 0..bits {
                if carry == 0 {
                    break;
                }
                let p = &mut planes[k * words + w];
                let next = *p & carry;
                *p ^= carry;
                carry = next;
            }
            if carry != 0 {
                // wrapped past the maximum: pin those automata back to it
                for k in 0..bits {
                    planes[k * words + w] |= carry;
                }
            }
        }
        self.refresh(clause);
    }

    /// Saturating -1 on every automaton selected by `mask`.
    pub(crate) fn decrement(&mut self, clause: usize, mask: &[u64]) {
        if mask.iter().all(|&w| w == 0) {
            return;
        }
        let words = self.words;
        let bits = self.state_bits;
        let planes = self.clause_planes_mut(clause);
        for w in 0..words {
            let mut borrow = mask[w];
            for k in 0..bits {
                if borrow == 0 {
                    break;
                }
                let p = &mut planes[k * words + w];
                let next = !*p & borrow;
                *p ^= borrow;
                borrow = next;
            }
            if borrow != 0 {
                for k in 0..bits {
                    planes[k * words + w] &= !borrow;
                }
            }
        }
        self.refresh(clause);
    }

    /// Literals exactly one step below the include boundary.
    pub(crate) fn below_boundary(&self, clause: usize, out: &mut [u64]) {
        let top = self.state_bits - 1;
        let tail = self.tail_mask();
        for (w, o) in out.iter_mut().enumerate() {
            let mut v = !self.plane(clause, top)[w];
            for k in 0..top {
                v &= self.plane(clause, k)[w];
            }
            if w + 1 == self.words {
                v &= tail;
            }
            *o = v;
        }
    }

    /// Clause output on one explicit literal vector.
    pub fn clause_output(&self, clause: usize, literals: &[u64], mode: Mode) -> bool {
        if self.included[clause].is_empty() {
            return mode == Mode::Train;
        }
        self.include_mask(clause)
            .iter()
            .zip(literals)
            .all(|(inc, lit)| inc & !lit == 0)
    }

    /// Writes the bitset of patches the clause matches into `acc` and returns
    /// whether any patch matched. Empty clauses match every patch; the caller
    /// applies the inference convention.
    #[inline]
    pub(crate) fn match_patches(&self, clause: usize, ps: &PatchSet, acc: &mut [u64]) -> bool {
        let lits = &self.included[clause];
        if ps.patch_words() == 1 {
            let mut a = ps.full()[0];
            for &l in lits {
                a &= ps.literal_word(l as usize, 0);
                if a == 0 {
                    break;
                }
            }
            acc[0] = a;
            return a != 0;
        }
        acc.copy_from_slice(ps.full());
        for &l in lits {
            let mut any = 0;
            for (w, a) in acc.iter_mut().enumerate() {
                *a &= ps.literal_word(l as usize, w);
                any |= *a;
            }
            if any == 0 {
                return false;
            }
        }
        acc.iter().any(|&a| a != 0)
    }

    /// Convolutional clause output: 1 iff the clause matches some patch.
    pub fn conv_clause_output(&self, clause: usize, ps: &PatchSet, mode: Mode) -> bool {
        if mode == Mode::Infer && self.included[clause].is_empty() {
            return false;
        }
        let mut acc = vec![0u64; ps.patch_words()];
        self.match_patches(clause, ps, &mut acc)
    }

    /// Weighted vote sum of one class in inference mode.
    pub fn class_sum(&self, class: usize, ps: &PatchSet, acc: &mut [u64]) -> i32 {
        let mut sum = 0i32;
        for j in 0..self.per_class {
            let c = self.clause_id(class, j);
            if self.included[c].is_empty() {
                continue;
            }
            if self.match_patches(c, ps, acc) {
                sum += self.polarity(c) * self.weights[c] as i32;
            }
        }
        sum
    }
}
