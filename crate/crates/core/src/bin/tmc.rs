use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tm_composite::booleanize::HogParams;
use tm_composite::commands::{self, DataConfig, MemberSource, RunConfig, Target};
use tm_composite::{BooleanizerSpec, Dataset, Error, Hyperparams, Result, Split, Window};

#[derive(Parser)]
#[command(name = "tmc", version, about = "Tsetlin machine training and composite evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one member and write its model and per-epoch CSV.
    Train(TrainArgs),
    /// Fuse members by normalized class-sum addition.
    Compose(ComposeArgs),
    /// Write the accuracy-above-rank curve of a model or composite.
    ConfidenceCurve(CurveArgs),
    /// Print the least and most confident inputs.
    Inspect(InspectArgs),
    /// Write a member's per-input class sums as CSV.
    ClassSumsExport(ExportArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    dataset: Option<Dataset>,
    /// Use only the first N training images.
    #[arg(long)]
    subset: Option<usize>,
    /// Use only the first N test images.
    #[arg(long)]
    test_subset: Option<usize>,
}

impl DataArgs {
    fn config(&self, fallback: Option<Dataset>) -> Result<DataConfig> {
        let dataset = match self.dataset.or(fallback) {
            Some(d) => d,
            None => return Err(Error::Usage("--dataset is required".into())),
        };
        Ok(DataConfig {
            dataset,
            data_dir: self.data_dir.clone(),
            train_subset: self.subset,
            test_subset: self.test_subset,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Thermometer,
    Threshold,
    Hog,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Start from a named hyperparameter set; explicit flags override it.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    booleanizer: Option<Kind>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    offset_c: Option<f64>,
    #[arg(long)]
    hog_cell: Option<usize>,
    #[arg(long)]
    hog_bins: Option<usize>,
    /// Clauses per class.
    #[arg(long)]
    clauses: Option<usize>,
    #[arg(long)]
    threshold: Option<i32>,
    #[arg(long)]
    specificity: Option<f64>,
    #[arg(long)]
    weighted: Option<bool>,
    /// Patch window such as 10x10, or "none" for a dense machine.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    literal_budget: Option<usize>,
    #[arg(long)]
    state_bits: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training images scored for the per-epoch train accuracy.
    #[arg(long)]
    train_eval: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl TrainArgs {
    fn config(&self) -> Result<RunConfig> {
        let base = self.preset.as_deref().map(commands::preset).transpose()?;
        let mut data = self.data.config(base.as_ref().map(|p| p.dataset))?;
        if let Some(p) = &base {
            data.train_subset = data.train_subset.or(p.train_subset);
            data.test_subset = data.test_subset.or(p.test_subset);
        }
        let mut booleanizer = base.as_ref().map(|p| p.booleanizer).unwrap_or(BooleanizerSpec::thermometer(8));
        if let Some(kind) = self.booleanizer {
            booleanizer = match kind {
                Kind::Thermometer => BooleanizerSpec::thermometer(8),
                Kind::Threshold => BooleanizerSpec::adaptive_threshold(),
                Kind::Hog => BooleanizerSpec::hog(),
            };
        }
        match &mut booleanizer {
            BooleanizerSpec::Thermometer { levels } => {
                *levels = self.levels.unwrap_or(*levels);
            }
            BooleanizerSpec::AdaptiveThreshold { block_size, offset_c } => {
                *block_size = self.block_size.unwrap_or(*block_size);
                *offset_c = self.offset_c.unwrap_or(*offset_c);
            }
            BooleanizerSpec::Hog(HogParams { cell, bins, encode_levels, .. }) => {
                *cell = self.hog_cell.unwrap_or(*cell);
                *bins = self.hog_bins.unwrap_or(*bins);
                *encode_levels = self.levels.unwrap_or(*encode_levels);
            }
        }
        let mut hyper = base.map(|p| p.hyper).unwrap_or_else(Hyperparams::default);
        hyper.clauses = self.clauses.unwrap_or(hyper.clauses);
        hyper.threshold = self.threshold.unwrap_or(hyper.threshold);
        hyper.specificity = self.specificity.unwrap_or(hyper.specificity);
        hyper.weighted = self.weighted.unwrap_or(hyper.weighted);
        hyper.literal_budget = self.literal_budget.unwrap_or(hyper.literal_budget);
        hyper.state_bits = self.state_bits.unwrap_or(hyper.state_bits);
        hyper.epochs = self.epochs.unwrap_or(hyper.epochs);
        if let Some(w) = &self.window {
            hyper.window = if w == "none" {
                None
            } else {
                Some(w.parse::<Window>()?)
            };
        }
        booleanizer.validate()?;
        hyper.validate()?;
        Ok(RunConfig {
            data,
            booleanizer,
            hyper,
            seed: self.seed,
            train_eval: self.train_eval,
            model_out: self.out.clone(),
            csv_out: self.csv.clone(),
        })
    }
}

#[derive(Args)]
struct ComposeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// A .tmc manifest.
    #[arg(long, conflicts_with = "sums", required_unless_present = "sums")]
    manifest: Option<PathBuf>,
    /// Class-sum CSVs, one per member; batch normalization.
    #[arg(long, num_args = 1..)]
    sums: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Write per-input composite labels here.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args)]
struct TargetArgs {
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    model: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl TargetArgs {
    fn target(&self) -> Target {
        match (&self.model, &self.manifest) {
            (Some(m), _) => Target::Model(m.clone()),
            (None, Some(m)) => Target::Manifest(m.clone()),
            (None, None) => unreachable!("clap requires one of --model or --manifest"),
        }
    }
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let config = args.config()?;
            println!("config_hash={} seed={}", config.config_hash(), config.seed);
            let report = commands::cmd_train(&config, |r| {
                println!(
                    "epoch {:>3}  train {:.4}  test {:.4}  {:.1}s",
                    r.epoch, r.train_acc, r.test_acc, r.wall_seconds
                )
            })?;
            let best = &report.rows[report.best_epoch];
            println!("best epoch {} test {:.4}", best.epoch, best.test_acc);
        }
        Command::Compose(args) => {
            let source = match args.manifest {
                Some(m) => MemberSource::Manifest(m),
                None => MemberSource::SumsCsv(args.sums),
            };
            let data = args.data.config(None)?;
            let report = commands::cmd_compose(&source, &data, args.split.into(), args.labels_out.as_deref())?;
            for m in &report.members {
                println!("member {}  accuracy {:.4}  alpha {}", m.name, m.accuracy, m.alpha);
            }
            println!("composite accuracy {:.4}", report.composite_accuracy);
        }
        Command::ConfidenceCurve(args) => {
            let data = args.data.config(None)?;
            let rows = commands::cmd_confidence_curve(&args.target.target(), &data, args.split.into(), args.out.as_deref())?;
            if args.out.is_none() {
                print!("{}", commands::curve_csv(&rows));
            }
        }
        Command::Inspect(args) => {
            let data = args.data.config(None)?;
            let (low, high) = commands::cmd_inspect(&args.target.target(), &data, args.split.into(), args.k)?;
            for (title, list) in [("least confident", low), ("most confident", high)] {
                println!("{title}:");
                for e in list {
                    println!(
                        "  input {:>6}  label {:>3}  predicted {:>3}  c_max {}",
                        e.input, e.label, e.prediction, e.confidence
                    );
                }
            }
        }
        Command::ClassSumsExport(args) => {
            let data = args.data.config(None)?;
            let sums = commands::cmd_class_sums_export(&args.model, &data, args.split.into(), &args.out)?;
            println!("wrote {} rows x {} classes to {}", sums.rows(), sums.classes(), args.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tmc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
