//! Patch geometry and the literal-major patch representation used for
//! convolutional clause evaluation.
//!
//! A patch literal vector is `content ++ row position ++ column position`
//! followed by the negation of all of it. Position bits are thermometer
//! encoded: row bit `r` is set iff the patch's row offset is greater than `r`.

use crate::booleanize::BooleanTensor;
use crate::error::{usage, Result};

use super::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    pub height: usize,
    pub width: usize,
    pub planes: usize,
    /// `None` evaluates clauses on the whole tensor as one flat vector.
    pub window: Option<Window>,
}

impl PatchGeometry {
    pub fn new(
        (height, width, planes): (usize, usize, usize),
        window: Option<Window>,
    ) -> Result<Self> {
        if let Some(w) = window {
            if w.height == 0 || w.width == 0 {
                return usage("convolution window must be non-empty");
            }
            if w.height > height || w.width > width {
                return usage(format!(
                    "window {w} does not fit a {height}x{width} input"
                ));
            }
        }
        Ok(Self {
            height,
            width,
            planes,
            window,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.planes)
    }

    fn window_dims(&self) -> (usize, usize) {
        self.window
            .map(|w| (w.height, w.width))
            .unwrap_or((self.height, self.width))
    }

    pub fn patch_rows(&self) -> usize {
        self.height - self.window_dims().0 + 1
    }

    pub fn patch_cols(&self) -> usize {
        self.width - self.window_dims().1 + 1
    }

    pub fn patch_count(&self) -> usize {
        self.patch_rows() * self.patch_cols()
    }

    pub fn content_features(&self) -> usize {
        let (wh, ww) = self.window_dims();
        wh * ww * self.planes
    }

    pub fn position_features(&self) -> usize {
        (self.patch_rows() - 1) + (self.patch_cols() - 1)
    }

    /// Boolean features per patch (o').
    pub fn features(&self) -> usize {
        self.content_features() + self.position_features()
    }

    /// Literals per patch, features followed by their negations (2o').
    pub fn literals(&self) -> usize {
        2 * self.features()
    }

    fn check(&self, x: &BooleanTensor) -> Result<()> {
        if x.shape() != self.shape() {
            return usage(format!(
                "input tensor {:?} does not match model geometry {:?}",
                x.shape(),
                self.shape()
            ));
        }
        Ok(())
    }

    /// Explicit patch-major literal vectors, one per stride-1 offset, in
    /// row-major offset order.
    pub fn extract_patches(&self, x: &BooleanTensor) -> Result<Vec<Vec<u64>>> {
        self.check(x)?;
        let (wh, ww) = self.window_dims();
        let f = self.features();
        let words = self.literals().div_ceil(64);
        let mut out = Vec::with_capacity(self.patch_count());
        for py in 0..self.patch_rows() {
            for px in 0..self.patch_cols() {
                let mut bits = vec![false; f];
                let mut k = 0;
                for dy in 0..wh {
                    for dx in 0..ww {
                        for b in 0..self.planes {
                            bits[k] = x.get(py + dy, px + dx, b);
                            k += 1;
                        }
                    }
                }
                for r in 0..self.patch_rows() - 1 {
                    bits[k] = py > r;
                    k += 1;
                }
                for c in 0..self.patch_cols() - 1 {
                    bits[k] = px > c;
                    k += 1;
                }
                let mut lits = vec![0u64; words];
                for (i, &v) in bits.iter().enumerate() {
                    let l = if v { i } else { i + f };
                    lits[l / 64] |= 1 << (l % 64);
                }
                out.push(lits);
            }
        }
        Ok(out)
    }
}

/// One input, transposed so every feature owns a bitset over patches.
///
/// A clause's matching patches are then the AND of its included literals'
/// bitsets, which costs `|included| * ceil(patches / 64)` word operations.
#[derive(Debug, Clone)]
pub struct PatchSet {
    features: usize,
    patches: usize,
    patch_words: usize,
    positive: Vec<u64>,
    full: Vec<u64>,
    /// Patch-major literal words, cached for the single-patch case.
    dense: Option<Vec<u64>>,
}

impl PatchSet {
    pub fn build(geom: &PatchGeometry, x: &BooleanTensor) -> Result<Self> {
        geom.check(x)?;
        let features = geom.features();
        let patches = geom.patch_count();
        let pw = patches.div_ceil(64);
        let mut positive = vec![0u64; features * pw];
        let mut full = vec![!0u64; pw];
        if !patches.is_multiple_of(64) {
            full[pw - 1] = (1u64 << (patches % 64)) - 1;
        }

        if geom.window.is_none() {
            for (f, w) in positive.iter_mut().enumerate() {
                *w = x.get_flat(f) as u64;
            }
            let words = geom.literals().div_ceil(64);
            let mut lits = vec![0u64; words];
            for f in 0..features {
                let l = if x.get_flat(f) { f } else { f + features };
                lits[l / 64] |= 1 << (l % 64);
            }
            return Ok(Self {
                features,
                patches,
                patch_words: pw,
                positive,
                full,
                dense: Some(lits),
            });
        }

        let (rows, cols) = (geom.patch_rows(), geom.patch_cols());
        let (wh, ww) = geom.window_dims();
        let mut f = 0;
        for dy in 0..wh {
            for dx in 0..ww {
                for b in 0..geom.planes {
                    let set = &mut positive[f * pw..(f + 1) * pw];
                    for py in 0..rows {
                        for px in 0..cols {
                            if x.get(py + dy, px + dx, b) {
                                let p = py * cols + px;
                                set[p / 64] |= 1 << (p % 64);
                            }
                        }
                    }
                    f += 1;
                }
            }
        }
        for r in 0..rows - 1 {
            let set = &mut positive[f * pw..(f + 1) * pw];
            for py in (r + 1)..rows {
                for px in 0..cols {
                    let p = py * cols + px;
                    set[p / 64] |= 1 << (p % 64);
                }
            }
            f += 1;
        }
        for c in 0..cols - 1 {
            let set = &mut positive[f * pw..(f + 1) * pw];
            for py in 0..rows {
                for px in (c + 1)..cols {
                    let p = py * cols + px;
                    set[p / 64] |= 1 << (p % 64);
                }
            }
            f += 1;
        }
        Ok(Self {
            features,
            patches,
            patch_words: pw,
            positive,
            full,
            dense: None,
        })
    }

    pub fn patch_count(&self) -> usize {
        self.patches
    }

    pub fn patch_words(&self) -> usize {
        self.patch_words
    }

    /// Mask of valid patch bits.
    pub fn full(&self) -> &[u64] {
        &self.full
    }

    /// Word `w` of the patch bitset of literal `l`.
    #[inline]
    pub fn literal_word(&self, l: usize, w: usize) -> u64 {
        if l < self.features {
            self.positive[l * self.patch_words + w]
        } else {
            !self.positive[(l - self.features) * self.patch_words + w] & self.full[w]
        }
    }

    /// Writes the literal vector of patch `p` into `out`.
    pub fn patch_literals(&self, p: usize, out: &mut [u64]) {
        if let Some(dense) = &self.dense {
            out.copy_from_slice(dense);
            return;
        }
        out.fill(0);
        let (w, bit) = (p / 64, p % 64);
        for f in 0..self.features {
            let v = (self.positive[f * self.patch_words + w] >> bit) & 1 == 1;
            let l = if v { f } else { f + self.features };
            out[l / 64] |= 1 << (l % 64);
        }
    }
}
