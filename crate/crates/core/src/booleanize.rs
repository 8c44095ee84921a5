//! Booleanizers: pixel images in, bit-packed Boolean feature planes out.
//!
//! Each booleanizer defines one member "specialization". All of them are pure
//! functions of a single image, so they can run data-parallel over a set.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::datasets::{ImageView, LabeledImageSet};
use crate::error::{usage, Error, Result};
use crate::kv::KvMap;

/// Bit-packed H×W×B Boolean planes. Bit `(y, x, b)` lives at flat index
/// `(y * W + x) * B + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanTensor {
    height: usize,
    width: usize,
    planes: usize,
    bits: Vec<u64>,
}

impl BooleanTensor {
    pub fn zeros(height: usize, width: usize, planes: usize) -> Self {
        let n = height * width * planes;
        Self {
            height,
            width,
            planes,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    /// A 1×1×n tensor holding a flat feature vector.
    pub fn from_bools(features: &[bool]) -> Self {
        let mut t = Self::zeros(1, 1, features.len());
        for (i, &f) in features.iter().enumerate() {
            t.set_flat(i, f);
        }
        t
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.planes)
    }

    /// Total number of Boolean features.
    pub fn len(&self) -> usize {
        self.height * self.width * self.planes
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    #[inline]
    pub fn get_flat(&self, i: usize) -> bool {
        (self.bits[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set_flat(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i % 64);
        if v {
            self.bits[i / 64] |= mask;
        } else {
            self.bits[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, b: usize) -> bool {
        self.get_flat((y * self.width + x) * self.planes + b)
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, b: usize, v: bool) {
        let i = (y * self.width + x) * self.planes + b;
        self.set_flat(i, v)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogParams {
    /// Square cell edge in pixels.
    pub cell: usize,
    /// Unsigned orientation bins over [0, π).
    pub bins: usize,
    /// Thermometer planes per normalised bin value.
    pub encode_levels: usize,
    /// Normalised value mapped to the top of the thermometer range.
    pub clip: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            cell: 4,
            bins: 9,
            encode_levels: 8,
            clip: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BooleanizerSpec {
    Thermometer { levels: usize },
    AdaptiveThreshold { block_size: usize, offset_c: f64 },
    Hog(HogParams),
}

pub const DEFAULT_BLOCK_SIZE: usize = 15;
pub const DEFAULT_OFFSET_C: f64 = 2.0;

impl BooleanizerSpec {
    pub fn thermometer(levels: usize) -> Self {
        BooleanizerSpec::Thermometer { levels }
    }

    pub fn adaptive_threshold() -> Self {
        BooleanizerSpec::AdaptiveThreshold {
            block_size: DEFAULT_BLOCK_SIZE,
            offset_c: DEFAULT_OFFSET_C,
        }
    }

    pub fn hog() -> Self {
        BooleanizerSpec::Hog(HogParams::default())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BooleanizerSpec::Thermometer { .. } => "thermometer",
            BooleanizerSpec::AdaptiveThreshold { .. } => "adaptive_threshold",
            BooleanizerSpec::Hog(_) => "hog",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BooleanizerSpec::Thermometer { levels } if levels < 1 => {
                usage("thermometer levels must be >= 1")
            }
            BooleanizerSpec::AdaptiveThreshold { block_size, offset_c } => {
                if block_size < 3 || block_size % 2 == 0 {
                    return usage(format!("block_size must be odd and >= 3, got {block_size}"));
                }
                if !offset_c.is_finite() {
                    return usage("offset_c must be finite");
                }
                Ok(())
            }
            BooleanizerSpec::Hog(p) => {
                if p.cell == 0 || p.bins == 0 || p.encode_levels == 0 {
                    return usage("hog cell, bins and encode_levels must be >= 1");
                }
                if !(p.clip > 0.0 && p.clip.is_finite()) {
                    return usage("hog clip must be a positive number");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Output planes for an input of the given shape.
    pub fn output_shape(&self, (h, w, c): (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        self.validate()?;
        match *self {
            BooleanizerSpec::Thermometer { levels } => Ok((h, w, c * levels)),
            BooleanizerSpec::AdaptiveThreshold { .. } => Ok((h, w, c)),
            BooleanizerSpec::Hog(p) => {
                if h % p.cell != 0 || w % p.cell != 0 {
                    return usage(format!(
                        "image {h}x{w} is not divisible into {}x{} cells",
                        p.cell, p.cell
                    ));
                }
                Ok((h / p.cell, w / p.cell, p.bins * p.encode_levels))
            }
        }
    }

    pub fn apply(&self, img: ImageView<'_>) -> Result<BooleanTensor> {
        self.output_shape((img.height, img.width, img.channels))?;
        Ok(match *self {
            BooleanizerSpec::Thermometer { levels } => thermometer_encode(img, levels),
            BooleanizerSpec::AdaptiveThreshold { block_size, offset_c } => {
                adaptive_gaussian_threshold(img, block_size, offset_c)
            }
            BooleanizerSpec::Hog(p) => hog_booleanize(img, &p),
        })
    }

    /// Booleanizes every image of a set in parallel, preserving order.
    pub fn apply_all(&self, set: &LabeledImageSet) -> Result<Vec<BooleanTensor>> {
        self.output_shape(set.shape())?;
        (0..set.len())
            .into_par_iter()
            .map(|d| self.apply(set.image(d)))
            .collect()
    }

    pub(crate) fn write_kv(&self, kv: &mut KvMap) {
        kv.insert("booleanizer.kind", self.kind());
        match *self {
            BooleanizerSpec::Thermometer { levels } => kv.insert("booleanizer.levels", levels),
            BooleanizerSpec::AdaptiveThreshold { block_size, offset_c } => {
                kv.insert("booleanizer.block_size", block_size);
                kv.insert("booleanizer.offset_c", offset_c);
            }
            BooleanizerSpec::Hog(p) => {
                kv.insert("booleanizer.cell", p.cell);
                kv.insert("booleanizer.bins", p.bins);
                kv.insert("booleanizer.encode_levels", p.encode_levels);
                kv.insert("booleanizer.clip", p.clip);
            }
        }
    }

    pub(crate) fn read_kv(kv: &KvMap) -> Result<Self> {
        let spec = match kv.get_str("booleanizer.kind")? {
            "thermometer" => BooleanizerSpec::Thermometer {
                levels: kv.get("booleanizer.levels")?,
            },
            "adaptive_threshold" => BooleanizerSpec::AdaptiveThreshold {
                block_size: kv.get("booleanizer.block_size")?,
                offset_c: kv.get("booleanizer.offset_c")?,
            },
            "hog" => BooleanizerSpec::Hog(HogParams {
                cell: kv.get("booleanizer.cell")?,
                bins: kv.get("booleanizer.bins")?,
                encode_levels: kv.get("booleanizer.encode_levels")?,
                clip: kv.get("booleanizer.clip")?,
            }),
            other => return Err(Error::Format(format!("unknown booleanizer kind {other:?}"))),
        };
        spec.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(spec)
    }
}

/// Threshold for plane `k` (1-based): `ceil(k * 256 / (levels + 1))`.
pub fn thermometer_thresholds(levels: usize) -> Vec<u32> {
    let l = levels as u32;
    (1..=l).map(|k| (k * 256).div_ceil(l + 1)).collect()
}

/// Per channel, plane `k` is set iff the pixel reaches the k-th uniform
/// threshold. Planes are laid out channel-major: `b = c * levels + (k - 1)`.
pub fn thermometer_encode(img: ImageView<'_>, levels: usize) -> BooleanTensor {
    let thresholds = thermometer_thresholds(levels);
    let mut out = BooleanTensor::zeros(img.height, img.width, img.channels * levels);
    for y in 0..img.height {
        for x in 0..img.width {
            for c in 0..img.channels {
                let v = img.at(y, x, c) as u32;
                for (k, &t) in thresholds.iter().enumerate() {
                    if v < t {
                        break;
                    }
                    out.set(y, x, c * levels + k, true);
                }
            }
        }
    }
    out
}

/// Normalised 1-D Gaussian weights with the conventional sigma for a kernel
/// of this size: `0.3 * ((size - 1) * 0.5 - 1) + 0.8`.
pub fn gaussian_kernel(size: usize) -> Vec<f64> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Mirror index without repeating the edge sample (`dcb|abcd|cba`).
#[inline]
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Per channel: bit set iff `pixel > gaussian_mean(block) - offset_c`.
pub fn adaptive_gaussian_threshold(
    img: ImageView<'_>,
    block_size: usize,
    offset_c: f64,
) -> BooleanTensor {
    let (h, w, ch) = (img.height, img.width, img.channels);
    let kernel = gaussian_kernel(block_size);
    let half = (block_size / 2) as isize;
    let mut out = BooleanTensor::zeros(h, w, ch);
    let mut rows = vec![0.0f64; h * w];
    for c in 0..ch {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, wt) in kernel.iter().enumerate() {
                    let xx = reflect101(x as isize + k as isize - half, w);
                    acc += wt * img.at(y, xx, c) as f64;
                }
                rows[y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut mean = 0.0;
                for (k, wt) in kernel.iter().enumerate() {
                    let yy = reflect101(y as isize + k as isize - half, h);
                    mean += wt * rows[yy * w + x];
                }
                out.set(y, x, c, img.at(y, x, c) as f64 > mean - offset_c);
            }
        }
    }
    out
}

/// Per-cell orientation histograms of gradient magnitude, L2-normalised over
/// a 2×2 block of cells, each bin thermometer-encoded.
///
/// Gradients are centred differences with replicated borders; for colour
/// input the channel with the largest magnitude wins. Cell `(cy, cx)` is
/// normalised by the 2×2 block whose top-left cell is
/// `(min(cy, ny-2), min(cx, nx-2))`, shrinking to 1 cell on degenerate grids.
pub fn hog_booleanize(img: ImageView<'_>, p: &HogParams) -> BooleanTensor {
    let (h, w) = (img.height, img.width);
    let (ny, nx) = (h / p.cell, w / p.cell);
    let mut hist = vec![0.0f64; ny * nx * p.bins];
    for y in 0..h {
        for x in 0..w {
            let (mut gx, mut gy, mut mag2) = (0.0f64, 0.0f64, -1.0f64);
            for c in 0..img.channels {
                let dx = img.at(y, (x + 1).min(w - 1), c) as f64
                    - img.at(y, x.saturating_sub(1), c) as f64;
                let dy = img.at((y + 1).min(h - 1), x, c) as f64
                    - img.at(y.saturating_sub(1), x, c) as f64;
                let m2 = dx * dx + dy * dy;
                if m2 > mag2 {
                    (gx, gy, mag2) = (dx, dy, m2);
                }
            }
            if mag2 <= 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx);
            if angle < 0.0 {
                angle += PI;
            }
            if angle >= PI {
                angle -= PI;
            }
            let bin = ((angle / PI * p.bins as f64) as usize).min(p.bins - 1);
            hist[((y / p.cell) * nx + x / p.cell) * p.bins + bin] += mag2.sqrt();
        }
    }

    let thresholds: Vec<f64> = (1..=p.encode_levels)
        .map(|k| p.clip * k as f64 / (p.encode_levels + 1) as f64)
        .collect();
    let mut out = BooleanTensor::zeros(ny, nx, p.bins * p.encode_levels);
    for cy in 0..ny {
        for cx in 0..nx {
            let by = cy.min(ny.saturating_sub(2));
            let bx = cx.min(nx.saturating_sub(2));
            let mut norm2 = 0.0;
            for yy in by..(by + 2).min(ny) {
                for xx in bx..(bx + 2).min(nx) {
                    let cell = &hist[(yy * nx + xx) * p.bins..(yy * nx + xx + 1) * p.bins];
                    norm2 += cell.iter().map(|v| v * v).sum::<f64>();
                }
            }
            if norm2 == 0.0 {
                continue;
            }
            let norm = norm2.sqrt();
            for b in 0..p.bins {
                let v = hist[(cy * nx + cx) * p.bins + b] / norm;
                for (k, &t) in thresholds.iter().enumerate() {
                    if v < t {
                        break;
                    }
                    out.set(cy, cx, b * p.encode_levels + k, true);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize, px: &[u8]) -> ImageView<'_> {
        ImageView {
            height: h,
            width: w,
            channels: 1,
            pixels: px,
        }
    }

    fn planes_at(t: &BooleanTensor, y: usize, x: usize) -> Vec<bool> {
        (0..t.planes()).map(|b| t.get(y, x, b)).collect()
    }

    #[test]
    fn thermometer_threshold_table() {
        assert_eq!(
            thermometer_thresholds(8),
            vec![29, 57, 86, 114, 143, 171, 200, 228]
        );
        assert_eq!(thermometer_thresholds(1), vec![128]);
    }

    #[test]
    fn thermometer_examples() {
        let px = [0u8, 255, 100];
        let t = thermometer_encode(gray(1, 3, &px), 8);
        assert_eq!(t.shape(), (1, 3, 8));
        assert_eq!(planes_at(&t, 0, 0), vec![false; 8]);
        assert_eq!(planes_at(&t, 0, 1), vec![true; 8]);
        // brute force against the threshold list
        let expect: Vec<bool> = thermometer_thresholds(8).iter().map(|&th| 100 >= th).collect();
        assert_eq!(planes_at(&t, 0, 2), expect);
        assert_eq!(expect, [true, true, true, false, false, false, false, false]);
    }

    #[test]
    fn thermometer_rgb_shape() {
        let px = vec![7u8; 32 * 32 * 3];
        let img = ImageView {
            height: 32,
            width: 32,
            channels: 3,
            pixels: &px,
        };
        assert_eq!(thermometer_encode(img, 8).shape(), (32, 32, 24));
        assert!(BooleanizerSpec::thermometer(0).apply(img).is_err());
    }

    #[test]
    fn reflect_indices() {
        let idx: Vec<usize> = (-3..8).map(|i| reflect101(i, 5)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(reflect101(-4, 1), 0);
        // kernel wider than the image
        assert_eq!(reflect101(-7, 3), 1);
    }

    #[test]
    fn kernel_is_normalised_and_symmetric() {
        let k = gaussian_kernel(15);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..15 {
            assert_eq!(k[i], k[14 - i]);
        }
    }

    #[test]
    fn adaptive_constant_image_both_signs() {
        let px = vec![90u8; 16 * 16];
        let pos = adaptive_gaussian_threshold(gray(16, 16, &px), 15, 2.0);
        assert_eq!(pos.count_ones(), 256);
        let neg = adaptive_gaussian_threshold(gray(16, 16, &px), 15, -2.0);
        assert_eq!(neg.count_ones(), 0);
    }

    #[test]
    fn adaptive_impulse() {
        let mut px = vec![0u8; 21 * 21];
        px[10 * 21 + 10] = 255;
        let t = adaptive_gaussian_threshold(gray(21, 21, &px), 5, -2.0);
        assert!(t.get(10, 10, 0));
        assert!(!t.get(0, 0, 0));
        assert!(!t.get(20, 3, 0));
    }

    #[test]
    fn adaptive_rejects_even_block() {
        let px = vec![0u8; 9];
        assert!(matches!(
            BooleanizerSpec::AdaptiveThreshold { block_size: 4, offset_c: 2.0 }.apply(gray(3, 3, &px)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn hog_uniform_image_is_all_zero() {
        let px = vec![128u8; 28 * 28];
        let t = hog_booleanize(gray(28, 28, &px), &HogParams::default());
        assert_eq!(t.len(), 7 * 7 * 9 * 8);
        assert_eq!(t.count_ones(), 0);
    }

    #[test]
    fn hog_vertical_edge_votes_horizontal_gradient_bin() {
        let mut px = vec![0u8; 28 * 28];
        for y in 0..28 {
            for x in 14..28 {
                px[y * 28 + x] = 200;
            }
        }
        let p = HogParams::default();
        let t = hog_booleanize(gray(28, 28, &px), &p);
        // the edge runs through cells with cx = 3 (x = 13, 14)
        for cy in 0..7 {
            let lit: Vec<usize> = (0..p.bins)
                .map(|b| (0..p.encode_levels).filter(|&k| t.get(cy, 3, b * p.encode_levels + k)).count())
                .collect();
            assert!(lit[0] > 0);
            assert!(lit[1..].iter().all(|&n| n == 0), "cell {cy}: {lit:?}");
        }
    }

    #[test]
    fn hog_rejects_indivisible_geometry() {
        let px = vec![0u8; 30 * 30];
        assert!(matches!(
            BooleanizerSpec::hog().apply(gray(30, 30, &px)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn kv_roundtrip_all_kinds() {
        for spec in [
            BooleanizerSpec::thermometer(8),
            BooleanizerSpec::AdaptiveThreshold { block_size: 11, offset_c: -0.1 },
            BooleanizerSpec::hog(),
        ] {
            let mut kv = KvMap::new();
            spec.write_kv(&mut kv);
            let back = BooleanizerSpec::read_kv(&KvMap::parse(&kv.render()).unwrap()).unwrap();
            assert_eq!(back, spec);
        }
    }
}
