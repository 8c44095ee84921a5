//! Loaders for the image classification datasets used by the experiments.
//!
//! Everything is memory resident. Pixels are kept as raw bytes in
//! row-major, per-pixel interleaved (H×W×C) order and are never rescaled.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_PIXELS: usize = 32 * 32 * 3;

/// Borrowed view of a single H×W×C image.
#[derive(Debug, Clone, Copy)]
pub struct ImageView<'a> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: &'a [u8],
}

impl ImageView<'_> {
    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }
}

/// A set of equally sized images with class labels in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    name: String,
    height: usize,
    width: usize,
    channels: usize,
    classes: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn new(
        name: impl Into<String>,
        (height, width, channels): (usize, usize, usize),
        classes: usize,
        pixels: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let per_image = height * width * channels;
        if per_image == 0 {
            return Err(Error::Consistency("image dimensions must be non-zero".into()));
        }
        if pixels.len() != per_image * labels.len() {
            return Err(Error::Consistency(format!(
                "{} pixel bytes do not hold {} images of {height}x{width}x{channels}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Consistency(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        Ok(Self {
            name: name.into(),
            height,
            width,
            channels,
            classes,
            pixels,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, d: usize) -> usize {
        self.labels[d] as usize
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn image(&self, d: usize) -> ImageView<'_> {
        let n = self.height * self.width * self.channels;
        ImageView {
            height: self.height,
            width: self.width,
            channels: self.channels,
            pixels: &self.pixels[d * n..(d + 1) * n],
        }
    }

    /// Deterministic prefix slice of at most `n` images.
    pub fn subset(&self, n: usize) -> Self {
        let q = n.min(self.len());
        let per = self.height * self.width * self.channels;
        Self {
            name: self.name.clone(),
            height: self.height,
            width: self.width,
            channels: self.channels,
            classes: self.classes,
            pixels: self.pixels[..q * per].to_vec(),
            labels: self.labels[..q].to_vec(),
        }
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| truncated(what))
}

fn truncated(what: &str) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::UnexpectedEof,
        format!("{what}: file is truncated"),
    ))
}

/// Parses an IDX image/label pair from memory.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8], name: &str) -> Result<LabeledImageSet> {
    let magic = be_u32(image_bytes, 0, "idx images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "idx images: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
        )));
    }
    let magic = be_u32(label_bytes, 0, "idx labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "idx labels: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
        )));
    }
    let count = be_u32(image_bytes, 4, "idx images")? as usize;
    let rows = be_u32(image_bytes, 8, "idx images")? as usize;
    let cols = be_u32(image_bytes, 12, "idx images")? as usize;
    let label_count = be_u32(label_bytes, 4, "idx labels")? as usize;
    if count != label_count {
        return Err(Error::Consistency(format!(
            "{count} images but {label_count} labels"
        )));
    }
    let pixels = image_bytes
        .get(16..16 + count * rows * cols)
        .ok_or_else(|| truncated("idx images"))?;
    let labels = label_bytes
        .get(8..8 + count)
        .ok_or_else(|| truncated("idx labels"))?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::Format(format!("idx labels: label {bad} outside [0, 10)")));
    }
    LabeledImageSet::new(name, (rows, cols, 1), 10, pixels.to_vec(), labels.to_vec())
}

/// Loads an IDX image file and its label file (MNIST, Fashion-MNIST).
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<LabeledImageSet> {
    let images = fs::read(image_path)?;
    let labels = fs::read(label_path)?;
    let name = image_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_idx(&images, &labels, &name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

impl CifarVariant {
    fn record_len(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1 + CIFAR_PIXELS,
            CifarVariant::Cifar100 => 2 + CIFAR_PIXELS,
        }
    }

    fn classes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }
}

impl FromStr for CifarVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cifar10" => Ok(CifarVariant::Cifar10),
            "cifar100" => Ok(CifarVariant::Cifar100),
            other => Err(Error::Usage(format!("unknown cifar variant {other:?}"))),
        }
    }
}

/// Parses concatenated CIFAR binary records. Channel-planar bytes are
/// reordered to per-pixel RGB; CIFAR-100 keeps the fine label.
pub fn parse_cifar(bytes: &[u8], variant: CifarVariant, name: &str) -> Result<LabeledImageSet> {
    let rec = variant.record_len();
    if !bytes.len().is_multiple_of(rec) {
        return Err(Error::Format(format!(
            "{name}: {} bytes is not a multiple of the {rec}-byte record size",
            bytes.len()
        )));
    }
    let q = bytes.len() / rec;
    let mut pixels = vec![0u8; q * CIFAR_PIXELS];
    let mut labels = Vec::with_capacity(q);
    for (d, record) in bytes.chunks_exact(rec).enumerate() {
        let (label, planar) = match variant {
            CifarVariant::Cifar10 => (record[0], &record[1..]),
            // byte 0 is the coarse label
            CifarVariant::Cifar100 => (record[1], &record[2..]),
        };
        labels.push(label);
        let out = &mut pixels[d * CIFAR_PIXELS..(d + 1) * CIFAR_PIXELS];
        for c in 0..3 {
            for p in 0..1024 {
                out[p * 3 + c] = planar[c * 1024 + p];
            }
        }
    }
    LabeledImageSet::new(name, (32, 32, 3), variant.classes(), pixels, labels)
        .map_err(|e| match e {
            Error::Consistency(m) => Error::Format(format!("{name}: {m}")),
            e => e,
        })
}

pub fn load_cifar_file(path: &Path, variant: CifarVariant) -> Result<LabeledImageSet> {
    let bytes = fs::read(path)?;
    parse_cifar(&bytes, variant, &path.display().to_string())
}

/// Loads one split of CIFAR from the standard binary distribution layout.
pub fn load_cifar(dir: &Path, variant: CifarVariant, split: Split) -> Result<LabeledImageSet> {
    let files: Vec<&str> = match (variant, split) {
        (CifarVariant::Cifar10, Split::Train) => vec![
            "data_batch_1.bin",
            "data_batch_2.bin",
            "data_batch_3.bin",
            "data_batch_4.bin",
            "data_batch_5.bin",
        ],
        (CifarVariant::Cifar10, Split::Test) => vec!["test_batch.bin"],
        (CifarVariant::Cifar100, Split::Train) => vec!["train.bin"],
        (CifarVariant::Cifar100, Split::Test) => vec!["test.bin"],
    };
    let mut bytes = Vec::new();
    for f in &files {
        bytes.extend_from_slice(&fs::read(dir.join(f))?);
    }
    let name = match variant {
        CifarVariant::Cifar10 => "cifar10",
        CifarVariant::Cifar100 => "cifar100",
    };
    parse_cifar(&bytes, variant, &format!("{name}-{split}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Usage(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Mnist,
    FashionMnist,
    Cifar10,
    Cifar100,
}

impl Dataset {
    /// Loads one split from `dir`, which holds the files exactly as distributed
    /// (uncompressed).
    pub fn load(self, dir: &Path, split: Split) -> Result<LabeledImageSet> {
        match self {
            Dataset::Mnist | Dataset::FashionMnist => {
                let prefix = match split {
                    Split::Train => "train",
                    Split::Test => "t10k",
                };
                let mut set = load_idx(
                    &dir.join(format!("{prefix}-images-idx3-ubyte")),
                    &dir.join(format!("{prefix}-labels-idx1-ubyte")),
                )?;
                set.name = format!("{self}-{split}");
                Ok(set)
            }
            Dataset::Cifar10 => load_cifar(dir, CifarVariant::Cifar10, split),
            Dataset::Cifar100 => load_cifar(dir, CifarVariant::Cifar100, split),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Mnist => "mnist",
            Dataset::FashionMnist => "fashion-mnist",
            Dataset::Cifar10 => "cifar10",
            Dataset::Cifar100 => "cifar100",
        })
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(Dataset::Mnist),
            "fashion-mnist" => Ok(Dataset::FashionMnist),
            "cifar10" => Ok(Dataset::Cifar10),
            "cifar100" => Ok(Dataset::Cifar100),
            other => Err(Error::Usage(format!("unknown dataset {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(count: u32, rows: u32, cols: u32, body: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for w in [IDX_IMAGES_MAGIC, count, rows, cols] {
            v.extend_from_slice(&w.to_be_bytes());
        }
        v.extend_from_slice(body);
        v
    }

    fn idx_labels(count: u32, body: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        v.extend_from_slice(&count.to_be_bytes());
        v.extend_from_slice(body);
        v
    }

    #[test]
    fn idx_small_pair() {
        let imgs = idx_images(2, 2, 3, &[0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255]);
        let lbls = idx_labels(2, &[7, 3]);
        let set = parse_idx(&imgs, &lbls, "t").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.shape(), (2, 3, 1));
        assert_eq!(set.classes(), 10);
        assert_eq!(set.label(0), 7);
        assert_eq!(set.image(1).at(1, 2, 0), 255);
    }

    #[test]
    fn idx_empty_set() {
        let set = parse_idx(&idx_images(0, 28, 28, &[]), &idx_labels(0, &[]), "e").unwrap();
        assert!(set.is_empty());
        assert_eq!(set.shape(), (28, 28, 1));
    }

    #[test]
    fn idx_count_mismatch() {
        let imgs = idx_images(100, 1, 1, &[0u8; 100]);
        let lbls = idx_labels(99, &[0u8; 99]);
        assert!(matches!(parse_idx(&imgs, &lbls, "m"), Err(Error::Consistency(_))));
    }

    #[test]
    fn idx_bad_magic_and_truncation() {
        let mut imgs = idx_images(1, 2, 2, &[0; 4]);
        let lbls = idx_labels(1, &[1]);
        imgs[3] = 0x02;
        assert!(matches!(parse_idx(&imgs, &lbls, "b"), Err(Error::Format(_))));
        let imgs = idx_images(1, 2, 2, &[0; 3]);
        assert!(matches!(parse_idx(&imgs, &lbls, "t"), Err(Error::Io(_))));
        assert!(matches!(parse_idx(&imgs[..10], &lbls, "t"), Err(Error::Io(_))));
    }

    #[test]
    fn cifar_reorders_planes() {
        let mut rec = vec![4u8];
        for c in 0..3u8 {
            rec.extend(std::iter::repeat_n(c * 100, 1024));
        }
        rec[1 + 1024 + 5] = 77; // green at pixel 5
        let set = parse_cifar(&rec, CifarVariant::Cifar10, "c").unwrap();
        assert_eq!(set.shape(), (32, 32, 3));
        assert_eq!(set.label(0), 4);
        let img = set.image(0);
        assert_eq!(img.pixels[0..3], [0, 100, 200]);
        assert_eq!(img.at(0, 5, 1), 77);
    }

    #[test]
    fn cifar100_uses_fine_label() {
        let mut rec = vec![3u8, 42];
        rec.extend(std::iter::repeat_n(9, CIFAR_PIXELS));
        let set = parse_cifar(&rec, CifarVariant::Cifar100, "c").unwrap();
        assert_eq!(set.classes(), 100);
        assert_eq!(set.label(0), 42);
    }

    #[test]
    fn cifar_truncated_record() {
        let bytes = vec![0u8; CIFAR_PIXELS];
        assert!(matches!(
            parse_cifar(&bytes, CifarVariant::Cifar10, "c"),
            Err(Error::Format(_))
        ));
        assert!(matches!("cifar5".parse::<CifarVariant>(), Err(Error::Usage(_))));
    }

    #[test]
    fn subset_is_prefix() {
        let set = LabeledImageSet::new("s", (1, 1, 1), 3, vec![5, 6, 7], vec![0, 1, 2]).unwrap();
        let sub = set.subset(2);
        assert_eq!(sub.labels(), &[0, 1]);
        assert_eq!(sub.pixels(), &[5, 6]);
        assert_eq!(set.subset(10), set);
    }

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(LabeledImageSet::new("s", (1, 1, 1), 2, vec![0], vec![2]).is_err());
    }
}
