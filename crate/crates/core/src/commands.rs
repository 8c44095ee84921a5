//! The work behind each `tmc` subcommand, kept in the library so it can be
//! driven from tests as well as from the binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::booleanize::{BooleanTensor, BooleanizerSpec, HogParams};
use crate::composite::{compose_predict, member_class_sums, ClassSumMatrix, CompositePrediction, Normalization};
use crate::datasets::{Dataset, LabeledImageSet, Split};
use crate::error::{usage, Result};
use crate::eval::{accuracy, confidence_curve, inspect, CurveRow, InspectEntry};
use crate::kv::KvMap;
use crate::persist::{load_composite, load_manifest, load_model, member_name, save_model, Tier};
use crate::tm::{Hyperparams, TmModel, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub dataset: Dataset,
    pub data_dir: PathBuf,
    /// Deterministic prefix of the training split.
    pub train_subset: Option<usize>,
    /// Deterministic prefix of the test split.
    pub test_subset: Option<usize>,
}

impl DataConfig {
    pub fn load(&self, split: Split) -> Result<LabeledImageSet> {
        let set = self.dataset.load(&self.data_dir, split)?;
        let limit = match split {
            Split::Train => self.train_subset,
            Split::Test => self.test_subset,
        };
        Ok(match limit {
            Some(n) => set.subset(n),
            None => set,
        })
    }
}

/// Everything that determines one member's training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataConfig,
    pub booleanizer: BooleanizerSpec,
    pub hyper: Hyperparams,
    pub seed: u64,
    /// Training-set prefix used for the per-epoch train accuracy; 0 skips it
    /// and reports NaN.
    pub train_eval: Option<usize>,
    pub model_out: PathBuf,
    pub csv_out: Option<PathBuf>,
}

impl RunConfig {
    fn kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("data.dataset", self.data.dataset);
        kv.insert("data.train_subset", opt(self.data.train_subset));
        kv.insert("data.test_subset", opt(self.data.test_subset));
        kv.insert("run.seed", self.seed);
        kv.insert("run.train_eval", opt(self.train_eval));
        self.hyper.write_kv(&mut kv);
        self.booleanizer.write_kv(&mut kv);
        kv
    }

    /// CRC-32 of the canonical config text, output paths excluded.
    pub fn config_hash(&self) -> String {
        format!("{:08x}", crc32fast::hash(self.kv().render().as_bytes()))
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_else(|| "all".into())
}

/// Named hyperparameter sets. The `*-desk` presets are sized for a single
/// core; the others mirror the full-scale configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub dataset: Dataset,
    pub booleanizer: BooleanizerSpec,
    pub hyper: Hyperparams,
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
}

pub const PRESET_NAMES: &[&str] = &[
    "fmnist-thermometer-desk",
    "fmnist-threshold-desk",
    "fmnist-hog-desk",
    "fmnist-threshold",
    "fmnist-thermometer-3x3",
    "fmnist-thermometer-4x4",
    "fmnist-hog",
    "cifar10-threshold",
    "cifar10-thermometer-3x3",
    "cifar10-thermometer-4x4",
    "cifar10-hog",
    "cifar100-threshold",
    "cifar100-thermometer-3x3",
    "cifar100-thermometer-4x4",
    "cifar100-hog",
];

pub fn preset(name: &str) -> Result<Preset> {
    let full = |dataset, booleanizer, clauses, threshold, specificity, weighted, window: Option<usize>| Preset {
        name: PRESET_NAMES.iter().find(|n| **n == name).copied().unwrap_or("custom"),
        dataset,
        booleanizer,
        hyper: Hyperparams {
            clauses,
            threshold,
            specificity,
            weighted,
            window: window.map(Window::square),
            literal_budget: 32,
            state_bits: 8,
            epochs: 100,
        },
        train_subset: None,
        test_subset: None,
    };
    let desk = |p: Preset| Preset {
        train_subset: Some(10_000),
        test_subset: Some(2_000),
        hyper: Hyperparams { epochs: 10, ..p.hyper },
        ..p
    };
    let therm = BooleanizerSpec::thermometer(8);
    let thresh = BooleanizerSpec::adaptive_threshold();
    let hog = BooleanizerSpec::hog();
    let cifar_hog = BooleanizerSpec::Hog(HogParams { cell: 4, ..HogParams::default() });
    use Dataset::*;
    Ok(match name {
        "fmnist-thermometer-desk" => desk(full(FashionMnist, therm, 200, DESK_THERMOMETER.0, DESK_THERMOMETER.1, true, Some(4))),
        "fmnist-threshold-desk" => desk(full(FashionMnist, thresh, 200, DESK_THRESHOLD.0, DESK_THRESHOLD.1, true, Some(10))),
        "fmnist-hog-desk" => desk(full(FashionMnist, hog, 200, DESK_HOG.0, DESK_HOG.1, true, None)),
        "fmnist-threshold" => full(FashionMnist, thresh, 8000, 2000, 10.0, true, Some(10)),
        "fmnist-thermometer-3x3" => full(FashionMnist, therm, 8000, 6000, 2.5, true, Some(3)),
        "fmnist-thermometer-4x4" => full(FashionMnist, therm, 8000, 6000, 2.5, true, Some(4)),
        "fmnist-hog" => full(FashionMnist, hog, 8000, 200, 10.0, false, None),
        "cifar10-threshold" => full(Cifar10, thresh, 2000, 500, 10.0, true, Some(10)),
        "cifar10-thermometer-3x3" => full(Cifar10, therm, 2000, 1500, 2.5, true, Some(3)),
        "cifar10-thermometer-4x4" => full(Cifar10, therm, 2000, 1500, 2.5, true, Some(4)),
        "cifar10-hog" => full(Cifar10, cifar_hog, 2000, 50, 10.0, false, None),
        "cifar100-threshold" => full(Cifar100, thresh, 16000, 4000, 10.0, true, Some(10)),
        "cifar100-thermometer-3x3" => full(Cifar100, therm, 16000, 12000, 2.5, true, Some(3)),
        "cifar100-thermometer-4x4" => full(Cifar100, therm, 16000, 12000, 2.5, true, Some(4)),
        "cifar100-hog" => full(Cifar100, cifar_hog, 16000, 400, 10.0, false, None),
        other => {
            return usage(format!(
                "unknown preset {other:?}; known presets: {}",
                PRESET_NAMES.join(", ")
            ))
        }
    })
}

/// (T, s) of the desk-scale Fashion-MNIST members, n = 200 per class, all
/// weighted. At this clause count the unweighted HoG member stalls near 77 %.
pub const DESK_THERMOMETER: (i32, f64) = (1000, 3.9);
pub const DESK_THRESHOLD: (i32, f64) = (1000, 5.0);
pub const DESK_HOG: (i32, f64) = (400, 10.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub wall_seconds: f64,
}

pub struct TrainOutcome {
    pub last: TmModel,
    pub best: TmModel,
    pub best_epoch: usize,
    pub rows: Vec<EpochRow>,
}

/// Labels predicted for booleanized inputs, evaluated in parallel.
pub fn predict_tensors(model: &TmModel, xs: &[BooleanTensor]) -> Result<Vec<usize>> {
    xs.par_iter()
        .map(|x| model.classify(x).map(|p| p.label))
        .collect()
}

/// Per-epoch RNG seed derived from the run seed.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64)
}

/// Trains one member on in-memory sets. Row 0 is the untrained model.
pub fn train_member(
    booleanizer: BooleanizerSpec,
    hyper: &Hyperparams,
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    seed: u64,
    train_eval: Option<usize>,
    mut progress: impl FnMut(&EpochRow),
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return usage("empty training set");
    }
    let mut model = TmModel::new(hyper.clone(), booleanizer, train.shape(), train.classes())?;
    let xs_train = booleanizer.apply_all(train)?;
    let xs_test = booleanizer.apply_all(test)?;
    let n_eval = train_eval.unwrap_or(train.len()).min(train.len());
    let evaluate = |m: &TmModel| -> Result<(f64, f64)> {
        let tr = predict_tensors(m, &xs_train[..n_eval])?;
        let te = predict_tensors(m, &xs_test)?;
        let train_acc = if n_eval == 0 { f64::NAN } else { accuracy(&tr, &train.labels()[..n_eval]) };
        Ok((train_acc, accuracy(&te, test.labels())))
    };

    let (train_acc, test_acc) = evaluate(&model)?;
    let first = EpochRow { epoch: 0, train_acc, test_acc, wall_seconds: 0.0 };
    progress(&first);
    let mut rows = vec![first];
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_acc = test_acc;
    for epoch in 1..=hyper.epochs {
        let t0 = Instant::now();
        model.train_epoch(&xs_train, train.labels(), epoch_seed(seed, epoch))?;
        let wall_seconds = t0.elapsed().as_secs_f64();
        let (train_acc, test_acc) = evaluate(&model)?;
        let row = EpochRow { epoch, train_acc, test_acc, wall_seconds };
        progress(&row);
        rows.push(row);
        if test_acc > best_acc {
            best_acc = test_acc;
            best_epoch = epoch;
            best = model.clone();
        }
    }
    Ok(TrainOutcome { last: model, best, best_epoch, rows })
}

pub fn epoch_csv(rows: &[EpochRow], seed: u64, config_hash: &str) -> String {
    let mut out = format!("# seed={seed}\n# config_hash={config_hash}\nepoch,train_acc,test_acc,wall_seconds\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.3}", r.epoch, r.train_acc, r.test_acc, r.wall_seconds);
    }
    out
}

/// `model.tmmodel` -> `model.best.tmmodel`.
pub fn best_model_path(model_out: &Path) -> PathBuf {
    let stem = model_out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = model_out.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "tmmodel".into());
    model_out.with_file_name(format!("{stem}.best.{ext}"))
}

pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    pub best_epoch: usize,
    pub config_hash: String,
}

/// Trains one member, writes final and best-epoch models (full tier) and the
/// per-epoch CSV.
pub fn cmd_train(config: &RunConfig, progress: impl FnMut(&EpochRow)) -> Result<TrainReport> {
    let train = config.data.load(Split::Train)?;
    let test = config.data.load(Split::Test)?;
    let outcome = train_member(config.booleanizer, &config.hyper, &train, &test, config.seed, config.train_eval, progress)?;
    let hash = config.config_hash();
    save_model(&outcome.last, &config.model_out, Tier::Full)?;
    save_model(&outcome.best, &best_model_path(&config.model_out), Tier::Full)?;
    if let Some(csv) = &config.csv_out {
        fs::write(csv, epoch_csv(&outcome.rows, config.seed, &hash))?;
    }
    Ok(TrainReport { rows: outcome.rows, best_epoch: outcome.best_epoch, config_hash: hash })
}

/// Where composite members come from.
#[derive(Debug, Clone, PartialEq)]
pub enum MemberSource {
    Manifest(PathBuf),
    /// Class sums exported earlier with `class-sums-export`.
    SumsCsv(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberReport {
    pub name: String,
    pub accuracy: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposeReport {
    pub members: Vec<MemberReport>,
    pub composite_accuracy: f64,
    pub prediction: CompositePrediction,
}

pub fn member_matrices(source: &MemberSource, set: &LabeledImageSet) -> Result<(Vec<ClassSumMatrix>, Normalization)> {
    match source {
        MemberSource::Manifest(path) => {
            let composite = load_composite(&load_manifest(path)?)?;
            Ok((composite.member_sums(set)?, composite.normalization.clone()))
        }
        MemberSource::SumsCsv(paths) => {
            let mats = paths
                .iter()
                .map(|p| ClassSumMatrix::from_csv(member_name(p), &fs::read_to_string(p)?))
                .collect::<Result<Vec<_>>>()?;
            Ok((mats, Normalization::Batch))
        }
    }
}

pub fn compose_report(mats: &[ClassSumMatrix], normalization: &Normalization, labels: &[u8]) -> Result<ComposeReport> {
    let prediction = compose_predict(mats, normalization)?;
    if prediction.labels.len() != labels.len() {
        return Err(crate::Error::Composition(format!(
            "members scored {} inputs but the split has {} labels",
            prediction.labels.len(),
            labels.len()
        )));
    }
    let members = mats
        .iter()
        .zip(&prediction.alphas)
        .map(|(m, &alpha)| MemberReport {
            name: m.member().to_string(),
            accuracy: accuracy(&m.labels(), labels),
            alpha,
        })
        .collect();
    Ok(ComposeReport {
        members,
        composite_accuracy: accuracy(&prediction.labels, labels),
        prediction,
    })
}

pub fn labels_csv(prediction: &CompositePrediction, labels: &[u8]) -> String {
    let mut out = String::from("input,label,prediction,confidence\n");
    for (d, (&p, &l)) in prediction.labels.iter().zip(labels).enumerate() {
        let _ = writeln!(out, "{d},{l},{p},{}", prediction.confidence(d));
    }
    out
}

pub fn cmd_compose(source: &MemberSource, data: &DataConfig, split: Split, labels_out: Option<&Path>) -> Result<ComposeReport> {
    let set = data.load(split)?;
    let (mats, normalization) = member_matrices(source, &set)?;
    let report = compose_report(&mats, &normalization, set.labels())?;
    if let Some(path) = labels_out {
        fs::write(path, labels_csv(&report.prediction, set.labels()))?;
    }
    Ok(report)
}

/// A single model or a composite manifest.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Model(PathBuf),
    Manifest(PathBuf),
}

pub struct Evaluated {
    pub predictions: Vec<usize>,
    pub confidence: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Evaluated {
    pub fn correct(&self) -> Vec<bool> {
        self.predictions.iter().zip(&self.labels).map(|(&p, &l)| p == l as usize).collect()
    }
}

pub fn evaluate_target(target: &Target, set: &LabeledImageSet) -> Result<Evaluated> {
    let (predictions, confidence) = match target {
        Target::Model(path) => {
            let model = load_model(path)?;
            let sums = member_class_sums(&model, set, member_name(path))?;
            (sums.labels(), sums.confidences().into_iter().map(f64::from).collect())
        }
        Target::Manifest(path) => {
            let p = load_composite(&load_manifest(path)?)?.predict(set)?;
            let conf = p.confidences();
            (p.labels, conf)
        }
    };
    Ok(Evaluated { predictions, confidence, labels: set.labels().to_vec() })
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("rank,c_max,accuracy_above\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.6}", r.rank, r.confidence, r.accuracy_above);
    }
    out
}

pub fn cmd_confidence_curve(target: &Target, data: &DataConfig, split: Split, out: Option<&Path>) -> Result<Vec<CurveRow>> {
    let set = data.load(split)?;
    if set.is_empty() {
        return usage("evaluated split is empty");
    }
    let ev = evaluate_target(target, &set)?;
    let rows = confidence_curve(&ev.confidence, &ev.correct());
    if let Some(path) = out {
        fs::write(path, curve_csv(&rows))?;
    }
    Ok(rows)
}

pub fn cmd_inspect(target: &Target, data: &DataConfig, split: Split, k: usize) -> Result<(Vec<InspectEntry>, Vec<InspectEntry>)> {
    let set = data.load(split)?;
    let ev = evaluate_target(target, &set)?;
    inspect(&ev.confidence, &ev.predictions, &ev.labels, k)
}

pub fn cmd_class_sums_export(model_path: &Path, data: &DataConfig, split: Split, out: &Path) -> Result<ClassSumMatrix> {
    let set = data.load(split)?;
    let model = load_model(model_path)?;
    let sums = member_class_sums(&model, &set, member_name(model_path))?;
    fs::write(out, sums.to_csv())?;
    Ok(sums)
}
