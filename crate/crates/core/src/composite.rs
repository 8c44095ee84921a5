//! Plug-and-play composites.
//!
//! Each member reports raw class sums over an input set. A member's sums are
//! divided by its spread `alpha = max - min` over the whole set, the
//! normalised sums of all members are added, and the largest total wins.
//! Members are never modified, so any combination can be formed at any time.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

use crate::datasets::LabeledImageSet;
use crate::error::{usage, Error, Result};
use crate::tm::{argmax, TmModel};

/// q×m integer class sums of one member over an input set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSumMatrix {
    member: String,
    classes: usize,
    sums: Vec<i32>,
}

impl ClassSumMatrix {
    pub fn new(member: impl Into<String>, classes: usize, sums: Vec<i32>) -> Result<Self> {
        if classes == 0 || !sums.len().is_multiple_of(classes) {
            return Err(Error::Consistency(format!(
                "{} sums do not form rows of {classes} classes",
                sums.len()
            )));
        }
        Ok(Self {
            member: member.into(),
            classes,
            sums,
        })
    }

    pub fn from_rows(member: impl Into<String>, classes: usize, rows: &[Vec<i32>]) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != classes) {
            return Err(Error::Consistency(format!(
                "row of {} sums in a {classes}-class matrix",
                r.len()
            )));
        }
        Self::new(member, classes, rows.concat())
    }

    pub fn member(&self) -> &str {
        &self.member
    }

    pub fn rows(&self) -> usize {
        self.sums.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, d: usize) -> &[i32] {
        &self.sums[d * self.classes..(d + 1) * self.classes]
    }

    pub fn get(&self, d: usize, i: usize) -> i32 {
        self.sums[d * self.classes + i]
    }

    pub fn values(&self) -> &[i32] {
        &self.sums
    }

    /// Row-wise argmax, i.e. the member's standalone predictions.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.rows()).map(|d| argmax(self.row(d)).unwrap().0).collect()
    }

    /// Max class sum per row.
    pub fn confidences(&self) -> Vec<i32> {
        (0..self.rows()).map(|d| argmax(self.row(d)).unwrap().1).collect()
    }

    /// Copy with every sum multiplied by `factor`.
    pub fn scaled(&self, factor: i32) -> Self {
        Self {
            member: self.member.clone(),
            classes: self.classes,
            sums: self.sums.iter().map(|&s| s * factor).collect(),
        }
    }

    /// CSV with one row per input and one column per class.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.classes).map(|i| format!("class_{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for d in 0..self.rows() {
            let row: Vec<String> = self.row(d).iter().map(i32::to_string).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(member: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("class-sum csv has no header".into()))?;
        let classes = header.split(',').count();
        let mut sums = Vec::new();
        for (n, line) in lines.enumerate() {
            let row: Vec<&str> = line.split(',').collect();
            if row.len() != classes {
                return Err(Error::Format(format!(
                    "class-sum csv row {} has {} columns, expected {classes}",
                    n + 1,
                    row.len()
                )));
            }
            for v in row {
                sums.push(v.trim().parse().map_err(|_| {
                    Error::Format(format!("class-sum csv: bad integer {v:?}"))
                })?);
            }
        }
        Self::new(member, classes, sums)
    }
}

/// Class sums of `model` on every image of `inputs`, in input order.
pub fn member_class_sums(
    model: &TmModel,
    inputs: &LabeledImageSet,
    member: impl Into<String>,
) -> Result<ClassSumMatrix> {
    let rows: Vec<Vec<i32>> = (0..inputs.len())
        .into_par_iter()
        .map(|d| model.class_sums_image(inputs.image(d)))
        .collect::<Result<_>>()?;
    ClassSumMatrix::from_rows(member, model.classes(), &rows)
}

/// Spread of a member's sums over the set; 1 when all sums are equal.
pub fn compute_alpha(matrix: &ClassSumMatrix) -> Result<f64> {
    let values = matrix.values();
    let (Some(&max), Some(&min)) = (values.iter().max(), values.iter().min()) else {
        return usage("cannot normalise an empty class-sum matrix");
    };
    let spread = max as i64 - min as i64;
    Ok(if spread == 0 { 1.0 } else { spread as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// Alpha from the evaluated set itself.
    Batch,
    /// Alpha fixed in advance, one per member.
    Frozen(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositePrediction {
    pub labels: Vec<usize>,
    /// Row-major q×m normalised score sums.
    pub scores: Vec<f64>,
    pub classes: usize,
    /// Divisor used for each member, in member order.
    pub alphas: Vec<f64>,
}

impl CompositePrediction {
    pub fn score_row(&self, d: usize) -> &[f64] {
        &self.scores[d * self.classes..(d + 1) * self.classes]
    }

    /// Team confidence: the largest normalised score of input `d`.
    pub fn confidence(&self, d: usize) -> f64 {
        confidence(self.score_row(d))
    }

    pub fn confidences(&self) -> Vec<f64> {
        (0..self.labels.len()).map(|d| self.confidence(d)).collect()
    }
}

pub fn confidence(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Alphas for frozen-mode serving, measured on a calibration set.
pub fn calibrate(matrices: &[ClassSumMatrix]) -> Result<Vec<f64>> {
    matrices.iter().map(compute_alpha).collect()
}

/// Normalises, adds and argmaxes the members' sums. Members are accumulated
/// in the given order.
pub fn compose_predict(
    matrices: &[ClassSumMatrix],
    normalization: &Normalization,
) -> Result<CompositePrediction> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Composition("a composite needs at least one member".into()))?;
    let (q, m) = (first.rows(), first.classes());
    for mat in matrices {
        if mat.classes() != m {
            return Err(Error::Composition(format!(
                "member {:?} has {} classes, member {:?} has {m}",
                mat.member(),
                mat.classes(),
                first.member()
            )));
        }
        if mat.rows() != q {
            return Err(Error::Composition(format!(
                "member {:?} scored {} inputs, member {:?} scored {q}",
                mat.member(),
                mat.rows(),
                first.member()
            )));
        }
    }
    let alphas = match normalization {
        Normalization::Batch => calibrate(matrices)?,
        Normalization::Frozen(a) => {
            if a.len() != matrices.len() {
                return Err(Error::Composition(format!(
                    "{} frozen alphas for {} members",
                    a.len(),
                    matrices.len()
                )));
            }
            if let Some(bad) = a.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Composition(format!("frozen alpha {bad} is not positive")));
            }
            a.clone()
        }
    };
    let mut scores = vec![0.0f64; q * m];
    for (mat, &alpha) in matrices.iter().zip(&alphas) {
        for (s, &c) in scores.iter_mut().zip(mat.values()) {
            *s += c as f64 / alpha;
        }
    }
    let labels = scores
        .chunks(m.max(1))
        .map(|row| argmax(row).map(|(i, _)| i).unwrap_or(0))
        .collect();
    Ok(CompositePrediction {
        labels,
        scores,
        classes: m,
        alphas,
    })
}

/// Ordered member model references plus the normalisation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeManifest {
    pub members: Vec<PathBuf>,
    pub normalization: Normalization,
}

impl CompositeManifest {
    pub fn batch(members: Vec<PathBuf>) -> Self {
        Self {
            members,
            normalization: Normalization::Batch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Composition("manifest lists no members".into()));
        }
        if let Normalization::Frozen(a) = &self.normalization {
            if a.len() != self.members.len() {
                return Err(Error::Composition("frozen manifest needs one alpha per member".into()));
            }
            if a.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Composition("frozen alphas must be positive".into()));
            }
        }
        Ok(())
    }

    /// `.tmc` text: a `normalization` line and one `member <path> [alpha]`
    /// line per member.
    pub fn render(&self) -> String {
        let mut out = String::from("# tm composite manifest\n");
        match &self.normalization {
            Normalization::Batch => {
                out.push_str("normalization batch\n");
                for p in &self.members {
                    let _ = writeln!(out, "member {}", p.display());
                }
            }
            Normalization::Frozen(alphas) => {
                out.push_str("normalization frozen\n");
                for (p, a) in self.members.iter().zip(alphas) {
                    let _ = writeln!(out, "member {} {a}", p.display());
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut frozen = None;
        let mut members = Vec::new();
        let mut alphas = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Format(format!("manifest line {}: {raw:?}", n + 1));
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("normalization") => {
                    frozen = Some(match parts.next() {
                        Some("batch") => false,
                        Some("frozen") => true,
                        _ => return Err(bad()),
                    });
                }
                Some("member") => {
                    members.push(PathBuf::from(parts.next().ok_or_else(bad)?));
                    if let Some(a) = parts.next() {
                        alphas.push(a.parse::<f64>().map_err(|_| bad())?);
                    }
                }
                _ => return Err(bad()),
            }
            if parts.next().is_some() {
                return Err(bad());
            }
        }
        let normalization = match frozen {
            Some(true) => Normalization::Frozen(alphas),
            _ if !alphas.is_empty() => {
                return Err(Error::Format("alphas given for a batch-normalised manifest".into()))
            }
            _ => Normalization::Batch,
        };
        let manifest = Self {
            members,
            normalization,
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

/// Loaded members ready to score image sets.
#[derive(Debug, Clone)]
pub struct Composite {
    pub members: Vec<(String, Arc<TmModel>)>,
    pub normalization: Normalization,
}

impl Composite {
    pub fn new(members: Vec<(String, Arc<TmModel>)>, normalization: Normalization) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::Composition("a composite needs at least one member".into()));
        };
        let m = first.classes();
        if let Some((name, bad)) = members.iter().find(|(_, t)| t.classes() != m) {
            return Err(Error::Composition(format!(
                "member {name:?} has {} classes, expected {m}",
                bad.classes()
            )));
        }
        Ok(Self {
            members,
            normalization,
        })
    }

    pub fn member_sums(&self, inputs: &LabeledImageSet) -> Result<Vec<ClassSumMatrix>> {
        self.members
            .iter()
            .map(|(name, model)| member_class_sums(model, inputs, name.clone()))
            .collect()
    }

    pub fn predict(&self, inputs: &LabeledImageSet) -> Result<CompositePrediction> {
        compose_predict(&self.member_sums(inputs)?, &self.normalization)
    }
}
