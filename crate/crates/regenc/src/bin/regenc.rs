//! Command-line front end: prepare datasets, run single fits, hyperparameter
//! sweeps, full benchmarks, and encoder-visualization grids.
//!
//! Every behavior here is a thin shell over the library; all randomness
//! flows from `--seed`. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 training failure.

use clap::{Args, Parser, Subcommand};
use regenc::codec::BinStyle;
use regenc::container;
use regenc::data::{self, DatasetSpec, PreparedDataset, Split, SynthKind};
use regenc::losses::LossWeights;
use regenc::nn::MlpSpec;
use regenc::optim::{Schedule, TrainConfig};
use regenc::pipeline::{self, MethodKind};
use regenc::{Error, Rng};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "REGENC_OUT";

#[derive(Parser)]
#[command(
    name = "regenc",
    version,
    about = "Regression through learned target encodings: fits, sweeps, benchmarks"
)]
struct Cli {
    /// Output directory (default: $REGENC_OUT, then ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for benchmark/sweep cells (0 = all cores). The output
    /// is identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a dataset config and its CSV, report split shapes, and
    /// optionally write the scaled splits.
    Prepare {
        /// Dataset config file.
        #[arg(long)]
        spec: PathBuf,
        /// Also write <name>.{train,val,test}.csv with scaled values.
        #[arg(long)]
        write_splits: bool,
    },
    /// Train one method once; writes result JSON, a model container, and a
    /// per-epoch curve CSV.
    Fit(FitArgs),
    /// Grid-sweep hyperparameters for one method on one dataset.
    Sweep(SweepArgs),
    /// Train every (dataset, method, k, seed) cell and emit the normalized
    /// benchmark tables.
    Bench(BenchArgs),
    /// Evaluate a saved 2-D codec on a lattice and write all encoder
    /// coordinates per point.
    EncodeGrid {
        /// Codec container file (kind "codec", m = 2).
        #[arg(long)]
        codec: PathBuf,
        /// Lattice lower corner, "y1,y2".
        #[arg(long, default_value = "-0.25,-0.25")]
        min: String,
        /// Lattice upper corner, "y1,y2".
        #[arg(long, default_value = "1.25,1.25")]
        max: String,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 50)]
        res: usize,
        /// Output CSV path (default <out>/encode-grid.csv).
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset config file (mutually exclusive with --synth).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Synthetic dataset: piecewise, sinusoid, or two-blob-2d.
    #[arg(long)]
    synth: Option<String>,
    /// Rows for synthetic data.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Noise level for synthetic data.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
}

#[derive(Args, Clone)]
struct MethodArgs {
    /// ls, ls-softmax, hard-bin, soft-bin, pretrain, or e2e.
    #[arg(long)]
    method: String,
    /// Number of encoder classes.
    #[arg(long, default_value_t = 25)]
    k: usize,
    /// Encoder temperature multiplier sigma = lambda_sigma * spacing.
    #[arg(long, default_value_t = 1.0)]
    lambda_sigma: f64,
    /// Bin placement for hard-bin: equal-width or quantile.
    #[arg(long, default_value = "equal-width")]
    bin_style: String,
    /// Autoencoding weight (e2e).
    #[arg(long, default_value_t = 1.0)]
    lambda_auto: f64,
    /// KL weight (e2e).
    #[arg(long, default_value_t = 0.068)]
    lambda_kl: f64,
    /// Decoded-prediction weight (e2e).
    #[arg(long, default_value_t = 1.0)]
    lambda_pred: f64,
    /// Entropy coefficient (pretraining and e2e autoencoding term).
    #[arg(long, default_value_t = 1e-6)]
    alpha: f64,
    /// Keep the codec at its initialization during e2e training.
    #[arg(long)]
    freeze_codec: bool,
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Override the dataset's batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Hidden layer widths, comma-separated.
    #[arg(long, default_value = "128,128")]
    hidden: String,
    #[arg(long, default_value_t = 0.3)]
    dropout: f64,
    /// constant or cosine.
    #[arg(long, default_value = "cosine")]
    schedule: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Grid string, e.g. "lr=1e-3,3e-3;lambda_kl=@log10".
    #[arg(long)]
    grid: String,
    /// Seeds, comma-separated.
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset config files, comma-separated.
    #[arg(long)]
    specs: Option<String>,
    /// Synthetic datasets, comma-separated kinds.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Methods, comma-separated.
    #[arg(long, default_value = "ls,ls-softmax,hard-bin,soft-bin,pretrain,e2e")]
    methods: String,
    /// Encoder sizes, comma-separated.
    #[arg(long, default_value = "25")]
    ks: String,
    /// Seeds, comma-separated.
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    #[command(flatten)]
    method_defaults: MethodArgs,
    #[command(flatten)]
    train: TrainArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print and succeed; real usage errors exit 1
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("regenc: cannot configure {} jobs: {e}", cli.jobs);
            return ExitCode::from(1);
        }
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match run(cli, &out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("regenc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Shape { .. } => 1,
        Error::Data(_) | Error::Io(_) | Error::Container(_) => 2,
        Error::Training(_) => 3,
    }
}

fn run(cli: Cli, out_dir: &Path) -> Result<(), Error> {
    match cli.command {
        Cmd::Prepare { spec, write_splits } => cmd_prepare(&spec, write_splits, out_dir),
        Cmd::Fit(args) => cmd_fit(&args, out_dir),
        Cmd::Sweep(args) => cmd_sweep(&args, out_dir),
        Cmd::Bench(args) => cmd_bench(&args, out_dir),
        Cmd::EncodeGrid { codec, min, max, res, file } => {
            cmd_encode_grid(&codec, &min, &max, res, file.as_deref(), out_dir)
        }
    }
}

// ── shared parsing helpers ───────────────────────────────────────────

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    let items: Result<Vec<T>, _> = s.split(',').map(|v| v.trim().parse::<T>()).collect();
    items.map_err(|_| Error::Config(format!("cannot parse {what} list {s:?}")))
}

fn parse_schedule(s: &str) -> Result<Schedule, Error> {
    match s {
        "constant" => Ok(Schedule::Constant),
        "cosine" => Ok(Schedule::Cosine),
        other => Err(Error::Config(format!("unknown schedule {other:?}"))),
    }
}

fn parse_bin_style(s: &str) -> Result<BinStyle, Error> {
    match s {
        "equal-width" => Ok(BinStyle::EqualWidth),
        "quantile" => Ok(BinStyle::Quantile),
        other => Err(Error::Config(format!("unknown bin style {other:?}"))),
    }
}

fn build_method(args: &MethodArgs, k: usize) -> Result<MethodKind, Error> {
    Ok(match args.method.as_str() {
        "ls" => MethodKind::Ls,
        "ls-softmax" => MethodKind::LsSoftmax { k },
        "hard-bin" => MethodKind::HardBin { k, bin_style: parse_bin_style(&args.bin_style)? },
        "soft-bin" => MethodKind::SoftBin { k, lambda_sigma: args.lambda_sigma },
        "pretrain" => {
            MethodKind::PretrainEnc { k, lambda_sigma: args.lambda_sigma, alpha: args.alpha }
        }
        "e2e" => MethodKind::EndToEnd {
            k,
            lambda_sigma: args.lambda_sigma,
            weights: LossWeights {
                lambda_auto: args.lambda_auto,
                lambda_kl: args.lambda_kl,
                lambda_pred: args.lambda_pred,
                alpha: args.alpha,
            },
            freeze_codec: args.freeze_codec,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown method {other:?} (ls, ls-softmax, hard-bin, soft-bin, pretrain, e2e)"
            )))
        }
    })
}

fn load_dataset(args: &DataArgs) -> Result<PreparedDataset, Error> {
    match (&args.spec, &args.synth) {
        (Some(_), Some(_)) => {
            Err(Error::Config("--spec and --synth are mutually exclusive".into()))
        }
        (None, None) => Err(Error::Config("one of --spec or --synth is required".into())),
        (Some(path), None) => {
            let spec = DatasetSpec::from_file(path)?;
            let table = data::load_csv(&spec)?;
            data::prepare(&spec, &table)
        }
        (None, Some(kind)) => {
            let kind = SynthKind::parse(kind)?;
            data::synth_dataset(kind, args.n, args.noise, &mut Rng::from_seed(0))
        }
    }
}

fn build_train_config(args: &TrainArgs, ds: &PreparedDataset) -> Result<TrainConfig, Error> {
    Ok(TrainConfig {
        max_lr: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size.unwrap_or(ds.batch_size),
        schedule: parse_schedule(&args.schedule)?,
        seed: args.seed,
        ..TrainConfig::default()
    })
}

fn build_mlp_spec(
    args: &TrainArgs,
    ds: &PreparedDataset,
    method: &MethodKind,
) -> Result<MlpSpec, Error> {
    let hidden: Vec<usize> = parse_list(&args.hidden, "hidden widths")?;
    let mut spec = MlpSpec::new(ds.feature_dim(), hidden, method.output_dim(ds.target_dim()));
    spec.dropout_rate = args.dropout;
    Ok(spec)
}

fn ensure_out_dir(out_dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

// ── subcommands ──────────────────────────────────────────────────────

fn cmd_prepare(spec_path: &Path, write_splits: bool, out_dir: &Path) -> Result<(), Error> {
    let spec = DatasetSpec::from_file(spec_path)?;
    let table = data::load_csv(&spec)?;
    let ds = data::prepare(&spec, &table)?;
    println!(
        "{}: {} features, {} target dim(s); splits {}/{}/{} rows, batch {}",
        ds.name,
        ds.feature_dim(),
        ds.target_dim(),
        ds.x_train.rows(),
        ds.x_val.rows(),
        ds.x_test.rows(),
        ds.batch_size
    );
    if write_splits {
        ensure_out_dir(out_dir)?;
        for (split, tag) in [(Split::Train, "train"), (Split::Val, "val"), (Split::Test, "test")] {
            let (x, y) = ds.split(split);
            let mut csv = String::new();
            for name in ds.feature_names.iter().chain(ds.target_names.iter()) {
                if !csv.is_empty() {
                    csv.push(',');
                }
                csv.push_str(name);
            }
            csv.push('\n');
            for r in 0..x.rows() {
                let row: Vec<String> =
                    x.row(r).iter().chain(y.row(r)).map(|v| format!("{v}")).collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            write_text(&out_dir.join(format!("{}.{tag}.csv", ds.name)), &csv)?;
        }
    }
    Ok(())
}

fn cmd_fit(args: &FitArgs, out_dir: &Path) -> Result<(), Error> {
    let ds = load_dataset(&args.data)?;
    let method = build_method(&args.method, args.method.k)?;
    let cfg = build_train_config(&args.train, &ds)?;
    let spec = build_mlp_spec(&args.train, &ds, &method)?;

    let out = pipeline::train_method(&method, &ds, &spec, &cfg)?;
    ensure_out_dir(out_dir)?;
    let stem = match method.k() {
        Some(k) => format!("{}-{}-k{}-seed{}", ds.name, method.name(), k, cfg.seed),
        None => format!("{}-{}-seed{}", ds.name, method.name(), cfg.seed),
    };

    let json = serde_json::to_string_pretty(&out.result)
        .map_err(|e| Error::Config(format!("result encode: {e}")))?;
    write_text(&out_dir.join(format!("{stem}.result.json")), &json)?;

    let mut curve = String::from("epoch,mean_train_loss,val_rmse,lr\n");
    for e in &out.epochs {
        curve.push_str(&format!("{},{},{},{}\n", e.epoch, e.mean_train_loss, e.val_rmse, e.lr_last));
    }
    write_text(&out_dir.join(format!("{stem}.curve.csv")), &curve)?;

    let model_path = out_dir.join(format!("{stem}.model.rgnc"));
    container::save_bundle(&model_path, &out.bundle)?;
    println!("wrote {}", model_path.display());
    if let Some(codec) = &out.bundle.codec {
        let codec_path = out_dir.join(format!("{stem}.codec.rgnc"));
        container::save_codec(&codec_path, codec)?;
        println!("wrote {}", codec_path.display());
    }
    println!(
        "{}: val RMSE {:.6} (epoch {}), test RMSE {:.6}",
        stem, out.result.best_val_rmse, out.result.best_epoch, out.result.test_rmse
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, out_dir: &Path) -> Result<(), Error> {
    let ds = load_dataset(&args.data)?;
    let method = build_method(&args.method, args.method.k)?;
    let cfg = build_train_config(&args.train, &ds)?;
    let grid = pipeline::parse_grid(&args.grid)?;
    let seeds: Vec<u64> = parse_list(&args.seeds, "seeds")?;
    let hidden: Vec<usize> = parse_list(&args.train.hidden, "hidden widths")?;

    let outcome = pipeline::sweep(&ds, &method, &grid, &seeds, &cfg, &hidden, args.train.dropout)?;
    ensure_out_dir(out_dir)?;
    let json = serde_json::to_string_pretty(&outcome)
        .map_err(|e| Error::Config(format!("sweep encode: {e}")))?;
    write_text(&out_dir.join(format!("{}-{}-sweep.json", ds.name, method.name())), &json)?;

    let mut csv = String::from("assignment,mean_val_rmse,mean_test_rmse\n");
    for cell in &outcome.cells {
        let assign: Vec<String> = cell.assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
        csv.push_str(&format!(
            "{},{},{}\n",
            assign.join(" "),
            cell.mean_val_rmse,
            cell.mean_test_rmse
        ));
    }
    write_text(&out_dir.join(format!("{}-{}-sweep.csv", ds.name, method.name())), &csv)?;
    let best: Vec<String> = outcome.best.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("best: {} (mean val RMSE {:.6})", best.join(" "), outcome.best_mean_val_rmse);
    Ok(())
}

fn cmd_bench(args: &BenchArgs, out_dir: &Path) -> Result<(), Error> {
    let mut datasets: Vec<PreparedDataset> = Vec::new();
    match (&args.specs, &args.synth) {
        (None, None) => return Err(Error::Config("one of --specs or --synth is required".into())),
        (Some(paths), None) => {
            for p in paths.split(',') {
                let spec = DatasetSpec::from_file(Path::new(p.trim()))?;
                let table = data::load_csv(&spec)?;
                datasets.push(data::prepare(&spec, &table)?);
            }
        }
        (None, Some(kinds)) => {
            for kind in kinds.split(',') {
                let kind = SynthKind::parse(kind.trim())?;
                datasets.push(data::synth_dataset(kind, args.n, args.noise, &mut Rng::from_seed(0))?);
            }
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config("--specs and --synth are mutually exclusive".into()))
        }
    }

    let ks: Vec<usize> = parse_list(&args.ks, "k values")?;
    let seeds: Vec<u64> = parse_list(&args.seeds, "seeds")?;
    let mut methods = Vec::new();
    for name in args.methods.split(',') {
        let mut margs = args.method_defaults.clone();
        margs.method = name.trim().to_string();
        if margs.method == "ls" {
            methods.push(MethodKind::Ls);
        } else {
            for &k in &ks {
                methods.push(build_method(&margs, k)?);
            }
        }
    }

    let cfg = TrainConfig {
        max_lr: args.train.lr,
        epochs: args.train.epochs,
        schedule: parse_schedule(&args.train.schedule)?,
        seed: args.train.seed,
        ..TrainConfig::default()
    };
    let hidden: Vec<usize> = parse_list(&args.train.hidden, "hidden widths")?;
    let refs: Vec<&PreparedDataset> = datasets.iter().collect();
    let table = pipeline::run_benchmark(&refs, &methods, &seeds, &cfg, &hidden, args.train.dropout)?;

    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("bench-rows.csv"), &table.rows_csv())?;
    write_text(&out_dir.join("bench-summary.csv"), &table.summary_csv())?;
    let json = serde_json::to_string_pretty(&table)
        .map_err(|e| Error::Config(format!("bench encode: {e}")))?;
    write_text(&out_dir.join("bench.json"), &json)?;

    print!("{}", table.summary_csv());
    if !table.failures.is_empty() {
        eprintln!("{} cell(s) failed; see bench-rows.csv", table.failures.len());
        return Err(Error::Training(format!(
            "{} benchmark cell(s) failed",
            table.failures.len()
        )));
    }
    Ok(())
}

fn cmd_encode_grid(
    codec_path: &Path,
    min: &str,
    max: &str,
    res: usize,
    file: Option<&Path>,
    out_dir: &Path,
) -> Result<(), Error> {
    let codec = container::load_codec(codec_path)?;
    if codec.m() != 2 {
        return Err(Error::InvalidArgument(format!(
            "encode-grid requires a 2-D codec, this one has m = {}",
            codec.m()
        )));
    }
    if res < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    let lo: Vec<f64> = parse_list(min, "grid minimum")?;
    let hi: Vec<f64> = parse_list(max, "grid maximum")?;
    if lo.len() != 2 || hi.len() != 2 || lo[0] >= hi[0] || lo[1] >= hi[1] {
        return Err(Error::InvalidArgument(
            "grid bounds must be two comma-separated values with min < max".into(),
        ));
    }

    let k = codec.k();
    let mut csv = String::from("y1,y2");
    for i in 0..k {
        csv.push_str(&format!(",psi{i}"));
    }
    csv.push('\n');
    for r in 0..res {
        let y2 = lo[1] + (hi[1] - lo[1]) * r as f64 / (res - 1) as f64;
        for c in 0..res {
            let y1 = lo[0] + (hi[0] - lo[0]) * c as f64 / (res - 1) as f64;
            let y = regenc::Tensor::new(vec![1, 2], vec![y1, y2])?;
            let psi = codec.encode_soft_eval(&y)?;
            csv.push_str(&format!("{y1},{y2}"));
            for v in psi.data() {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
    }
    let path = match file {
        Some(p) => p.to_path_buf(),
        None => {
            ensure_out_dir(out_dir)?;
            out_dir.join("encode-grid.csv")
        }
    };
    write_text(&path, &csv)?;
    Ok(())
}
