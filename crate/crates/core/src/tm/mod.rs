//! Conjunctive-clause Tsetlin Machine: clause evaluation, class sums,
//! classification with max-class-sum confidence, convolution over patches
//! and training feedback.

mod bank;
mod patches;
mod train;

use std::fmt;
use std::str::FromStr;

use crate::booleanize::{BooleanTensor, BooleanizerSpec};
use crate::datasets::ImageView;
use crate::error::{usage, Error, Result};
use crate::kv::KvMap;

pub use bank::ClauseBank;
pub use patches::{PatchGeometry, PatchSet};
pub use train::{feedback_probability, noisy_xor};

/// Clause evaluation convention for empty clauses: they output 1 while
/// training and 0 at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Convolution window in Boolean-tensor positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub height: usize,
    pub width: usize,
}

impl Window {
    pub fn square(size: usize) -> Self {
        Self {
            height: size,
            width: size,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("window must look like 4x4, got {s:?}"));
        let (h, w) = s.split_once('x').ok_or_else(bad)?;
        Ok(Self {
            height: h.trim().parse().map_err(|_| bad())?,
            width: w.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Clauses per class; half vote for the class, half against.
    pub clauses: usize,
    /// Voting margin T.
    pub threshold: i32,
    /// Specificity s.
    pub specificity: f64,
    pub weighted: bool,
    pub window: Option<Window>,
    /// Maximum number of included literals per clause.
    pub literal_budget: usize,
    pub state_bits: usize,
    pub epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            clauses: 200,
            threshold: 200,
            specificity: 10.0,
            weighted: false,
            window: None,
            literal_budget: 32,
            state_bits: 8,
            epochs: 10,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.clauses < 2 || !self.clauses.is_multiple_of(2) {
            return usage(format!("clauses per class must be even and >= 2, got {}", self.clauses));
        }
        if self.threshold < 1 {
            return usage("voting margin T must be >= 1");
        }
        if !(self.specificity > 1.0 && self.specificity.is_finite()) {
            return usage("specificity s must be > 1");
        }
        if self.literal_budget < 1 {
            return usage("literal budget must be >= 1");
        }
        if !(1..=16).contains(&self.state_bits) {
            return usage("state_bits must be in 1..=16");
        }
        Ok(())
    }

    pub(crate) fn write_kv(&self, kv: &mut KvMap) {
        kv.insert("tm.clauses", self.clauses);
        kv.insert("tm.threshold", self.threshold);
        kv.insert("tm.specificity", self.specificity);
        kv.insert("tm.weighted", self.weighted);
        kv.insert(
            "tm.window",
            self.window.map(|w| w.to_string()).unwrap_or_else(|| "none".into()),
        );
        kv.insert("tm.literal_budget", self.literal_budget);
        kv.insert("tm.state_bits", self.state_bits);
        kv.insert("tm.epochs", self.epochs);
    }

    pub(crate) fn read_kv(kv: &KvMap) -> Result<Self> {
        let window = match kv.get_str("tm.window")? {
            "none" => None,
            w => Some(w.parse().map_err(|e: Error| Error::Format(e.to_string()))?),
        };
        let h = Self {
            clauses: kv.get("tm.clauses")?,
            threshold: kv.get("tm.threshold")?,
            specificity: kv.get("tm.specificity")?,
            weighted: kv.get("tm.weighted")?,
            window,
            literal_budget: kv.get("tm.literal_budget")?,
            state_bits: kv.get("tm.state_bits")?,
            epochs: kv.get("tm.epochs")?,
        };
        h.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(h)
    }
}

/// Predicted label and its max-class-sum confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub label: usize,
    pub confidence: i32,
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// One trained (or trainable) member.
#[derive(Debug, Clone, PartialEq)]
pub struct TmModel {
    pub(crate) hyper: Hyperparams,
    pub(crate) booleanizer: BooleanizerSpec,
    pub(crate) image_shape: (usize, usize, usize),
    pub(crate) geometry: PatchGeometry,
    pub(crate) bank: ClauseBank,
    pub(crate) resumable: bool,
}

impl TmModel {
    /// Fresh model for images of `image_shape` (H, W, C) and `classes` classes.
    pub fn new(
        hyper: Hyperparams,
        booleanizer: BooleanizerSpec,
        image_shape: (usize, usize, usize),
        classes: usize,
    ) -> Result<Self> {
        hyper.validate()?;
        if classes < 1 {
            return usage("need at least one class");
        }
        let tensor_shape = booleanizer.output_shape(image_shape)?;
        let geometry = PatchGeometry::new(tensor_shape, hyper.window)?;
        let bank = ClauseBank::new(classes, hyper.clauses, geometry.literals(), hyper.state_bits);
        Ok(Self {
            hyper,
            booleanizer,
            image_shape,
            geometry,
            bank,
            resumable: true,
        })
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn booleanizer(&self) -> &BooleanizerSpec {
        &self.booleanizer
    }

    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.image_shape
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geometry
    }

    pub fn bank(&self) -> &ClauseBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut ClauseBank {
        &mut self.bank
    }

    pub fn classes(&self) -> usize {
        self.bank.classes()
    }

    /// False for models restored from inference-only files.
    pub fn is_resumable(&self) -> bool {
        self.resumable
    }

    pub fn booleanize(&self, img: ImageView<'_>) -> Result<BooleanTensor> {
        if (img.height, img.width, img.channels) != self.image_shape {
            return usage(format!(
                "image {}x{}x{} does not match model input {:?}",
                img.height, img.width, img.channels, self.image_shape
            ));
        }
        self.booleanizer.apply(img)
    }

    pub fn patches(&self, x: &BooleanTensor) -> Result<PatchSet> {
        PatchSet::build(&self.geometry, x)
    }

    /// All class sums for a booleanized input. Not clamped.
    pub fn class_sums(&self, x: &BooleanTensor) -> Result<Vec<i32>> {
        let ps = self.patches(x)?;
        Ok(self.class_sums_patches(&ps))
    }

    pub fn class_sums_patches(&self, ps: &PatchSet) -> Vec<i32> {
        let mut acc = vec![0u64; ps.patch_words()];
        (0..self.classes())
            .map(|i| self.bank.class_sum(i, ps, &mut acc))
            .collect()
    }

    pub fn class_sum(&self, x: &BooleanTensor, class: usize) -> Result<i32> {
        if class >= self.classes() {
            return usage(format!("class {class} outside [0, {})", self.classes()));
        }
        let ps = self.patches(x)?;
        let mut acc = vec![0u64; ps.patch_words()];
        Ok(self.bank.class_sum(class, &ps, &mut acc))
    }

    pub fn classify(&self, x: &BooleanTensor) -> Result<Prediction> {
        let sums = self.class_sums(x)?;
        let (label, confidence) = argmax(&sums).expect("at least one class");
        Ok(Prediction { label, confidence })
    }

    /// Booleanizes then evaluates a raw image.
    pub fn class_sums_image(&self, img: ImageView<'_>) -> Result<Vec<i32>> {
        self.class_sums(&self.booleanize(img)?)
    }

    pub fn classify_image(&self, img: ImageView<'_>) -> Result<Prediction> {
        self.classify(&self.booleanize(img)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[5, -2, 5]), Some((0, 5)));
        assert_eq!(argmax(&[0, 0, 0]), Some((0, 0)));
        assert_eq!(argmax(&[-3, -1, -2]), Some((1, -1)));
        assert_eq!(argmax::<i32>(&[]), None);
    }

    #[test]
    fn window_parse() {
        assert_eq!("10x10".parse::<Window>().unwrap(), Window::square(10));
        assert!("10".parse::<Window>().is_err());
    }

    #[test]
    fn hyperparams_validation() {
        let mut h = Hyperparams::default();
        assert!(h.validate().is_ok());
        h.clauses = 3;
        assert!(h.validate().is_err());
        h = Hyperparams { specificity: 1.0, ..Default::default() };
        assert!(h.validate().is_err());
        h = Hyperparams { literal_budget: 0, ..Default::default() };
        assert!(h.validate().is_err());
    }

    #[test]
    fn untrained_model_is_neutral() {
        let px = vec![200u8; 28 * 28];
        let img = ImageView { height: 28, width: 28, channels: 1, pixels: &px };
        let model = TmModel::new(
            Hyperparams { window: Some(Window::square(10)), ..Default::default() },
            BooleanizerSpec::adaptive_threshold(),
            (28, 28, 1),
            10,
        )
        .unwrap();
        assert_eq!(model.class_sums_image(img).unwrap(), vec![0; 10]);
        assert_eq!(model.classify_image(img).unwrap(), Prediction { label: 0, confidence: 0 });
    }

    #[test]
    fn weighted_vote_arithmetic() {
        let model_h = Hyperparams { clauses: 2, ..Default::default() };
        let mut m = TmModel::new(model_h, BooleanizerSpec::thermometer(1), (1, 1, 1), 1).unwrap();
        // feature 0 set: positive clause includes x0 (weight 3), negative includes x0 (weight 1)
        m.bank_mut().set_include_mask(0, &[0b01]);
        m.bank_mut().set_weight(0, 3);
        m.bank_mut().set_include_mask(1, &[0b01]);
        let x = BooleanTensor::from_bools(&[true]);
        assert_eq!(m.class_sum(&x, 0).unwrap(), 2);
        assert!(m.class_sum(&x, 1).is_err());
        let wrong = BooleanTensor::from_bools(&[true, false]);
        assert!(matches!(m.class_sums(&wrong), Err(Error::Usage(_))));
    }
}
