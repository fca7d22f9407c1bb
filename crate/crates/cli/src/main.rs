mod settings;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use era_core::dataset::{synth_generate, synth_recording, split, EpochSet, SynthConfig, TaskId, TaskSpec};
use era_core::era::{Checkpoint, ModelKind};
use era_core::fbcsp::FbcspModel;
use era_core::harness::{
    evaluate_set, fit_method, psd_report, run_experiment, EpochRecord, Evaluation, ExperimentSpec, Method, MethodConfig,
    Predictor, TaskFbcsp, TrainConfig,
};
use era_core::sigproc::{PreprocessConfig, Recording};
use era_core::{Error, Precision};

use settings::Settings;

#[derive(Parser)]
#[command(name = "era", version, about = "Hierarchical motor-imagery EEG decoding")]
struct Cli {
    /// Flat `key = value` settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic subjects as epoch files (or raw recordings).
    Synth(SynthArgs),
    /// Turn a raw recording into an epoch file.
    Preprocess(PreprocessArgs),
    /// Train one method and write a checkpoint plus a JSON report.
    Train(TrainArgs),
    /// Evaluate a checkpoint on an epoch file.
    Eval(EvalArgs),
    /// Compare methods across subjects and write CSV/JSON reports.
    Compare(CompareArgs),
    /// Per-class power spectral density table and chart.
    Psd(PsdArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    trials_per_class: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write continuous 1000 Hz recordings with cue events instead of epochs.
    #[arg(long)]
    raw: bool,
    /// 60 Hz line-noise amplitude added to raw recordings.
    #[arg(long)]
    line_noise: Option<f64>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pass band as `low:high` in Hz.
    #[arg(long)]
    bandpass: Option<String>,
    /// Notch frequency in Hz, or `none`.
    #[arg(long)]
    notch: Option<String>,
    #[arg(long)]
    resample: Option<f64>,
    #[arg(long)]
    montage: Option<String>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long)]
    subject: Option<String>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// 3, 5, 7hor or 7ver.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// era, flat or fbcsp.
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// JSON report path (defaults to the checkpoint path with `.json` appended).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write `<out>.epochN` every N epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// One epoch file per subject.
    #[arg(long, num_args = 1.., required = true)]
    data: Vec<PathBuf>,
    /// Comma-separated list of era, flat, fbcsp.
    #[arg(long)]
    methods: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PsdArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Core(Error::Config(_)) => 1,
            Failure::Core(e) if e.is_numeric() => 3,
            Failure::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(&settings, a),
        Command::Preprocess(a) => preprocess(&settings, a),
        Command::Train(a) => train(&settings, a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(&settings, a),
        Command::Psd(a) => psd(a),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Failure {
    Failure::Core(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let body = serde_json::to_string_pretty(value).map_err(|e| Failure::Core(Error::Data(e.to_string())))?;
    fs::write(path, body + "\n").map_err(|e| io_err(path, e))
}

fn synth(s: &Settings, a: SynthArgs) -> CliResult {
    let subjects = s.value("subjects", a.subjects, 1)?;
    let base = SynthConfig {
        trials_per_class: s.value("trials_per_class", a.trials_per_class, 50)?,
        snr: s.value("snr", a.snr, 5.0)?,
        ..SynthConfig::default()
    };
    let seed = s.value("seed", a.seed, 0u64)?;
    let line_noise = s.value("line_noise", a.line_noise, 0.0)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    for i in 0..subjects {
        let name = format!("subject{:02}", i + 1);
        let cfg = SynthConfig {
            seed: seed + i as u64,
            subject: name.clone(),
            ..base.clone()
        };
        let path = if a.raw {
            let p = a.out.join(format!("{name}.rec"));
            synth_recording(&cfg, 1000.0, line_noise)?.write(&p)?;
            p
        } else {
            let p = a.out.join(format!("{name}.epochs"));
            synth_generate(&cfg)?.write(&p)?;
            p
        };
        println!("{}", path.display());
    }
    Ok(())
}

fn parse_band(text: &str) -> CliResult<(f64, f64)> {
    let bad = || Failure::Usage(format!("band-pass must look like low:high, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn preprocess(s: &Settings, a: PreprocessArgs) -> CliResult {
    let d = PreprocessConfig::default();
    let band = s.text("bandpass", a.bandpass.clone());
    let notch = s.text("notch", a.notch.clone());
    let cfg = PreprocessConfig {
        bandpass: band.as_deref().map(parse_band).transpose()?.unwrap_or(d.bandpass),
        notch: match notch.as_deref() {
            None => d.notch,
            Some("none") | Some("off") => None,
            Some(f) => Some(f.parse().map_err(|_| Failure::Usage(format!("notch must be a frequency or none, got {f:?}")))?),
        },
        resample: s.value("resample", a.resample, d.resample)?,
        montage: s.value("montage", a.montage.clone(), d.montage.clone())?,
        window: s.value("window", a.window, d.window)?,
        offset: s.value("offset", a.offset, d.offset)?,
        ..d
    };
    let rec = Recording::read(&a.input)?;
    let subject = s.value(
        "subject",
        a.subject.clone(),
        a.input.file_stem().map_or("subject".into(), |n| n.to_string_lossy().into_owned()),
    )?;
    let set = era_core::sigproc::preprocess(&rec, &cfg, &subject)?;
    set.write(&a.out)?;
    println!("{} epochs of {} channels x {} samples -> {}", set.len(), set.channels(), set.samples(), a.out.display());
    Ok(())
}

struct Resolved {
    task: TaskSpec,
    train: TrainConfig,
    test_fraction: f64,
    split_seed: u64,
}

fn resolve_model(s: &Settings, m: &ModelArgs) -> CliResult<Resolved> {
    let task: TaskId = s.parsed("task", m.task.clone(), TaskId::FiveClass)?;
    let d = TrainConfig::default();
    let precision: Precision = s.parsed("precision", m.precision.clone(), d.precision)?;
    let mut adam = d.adam;
    adam.learning_rate = s.value("learning_rate", m.learning_rate, adam.learning_rate)?;
    let train = TrainConfig {
        batch_size: s.value("batch", m.batch, d.batch_size)?,
        epochs: s.value("epochs", m.epochs, d.epochs)?,
        seed: s.value("seed", m.seed, d.seed)?,
        adam,
        precision,
        checkpoint_every: 0,
    };
    train.validate()?;
    let test_fraction = s.value("test_fraction", m.test_fraction, 0.2)?;
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Failure::Usage(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    Ok(Resolved {
        task: TaskSpec::new(task),
        train,
        test_fraction,
        split_seed: s.value("split_seed", m.split_seed, 0u64)?,
    })
}

#[derive(Serialize)]
struct TrainReport {
    method: Method,
    task: TaskId,
    config: TrainConfig,
    train_trials: usize,
    test_trials: usize,
    train_hash: String,
    test_hash: Option<String>,
    history: Vec<EpochRecord>,
    evaluation: Option<Evaluation>,
}

fn train(s: &Settings, a: TrainArgs) -> CliResult {
    let r = resolve_model(s, &a.model)?;
    let method: Method = s.parsed("method", a.method.clone(), Method::Era)?;
    let every = s.value("checkpoint_every", a.checkpoint_every, 0usize)?;
    let data = EpochSet::read(&a.data)?.restrict(&r.task)?;
    let (train_set, test_set) = if r.test_fraction > 0.0 {
        let (tr, te) = split(&data, r.test_fraction, r.split_seed)?;
        (tr, Some(te))
    } else {
        (data, None)
    };
    let models = MethodConfig::default();
    let seed = r.train.seed;
    let out = a.out.clone();
    let mut hook = |rec: &EpochRecord, m: &dyn Predictor| -> era_core::Result<()> {
        eprintln!("epoch {:>4}  loss {:.6}  shared {:.6}  arm {:.6}  hand {:.6}", rec.epoch, rec.total, rec.shared, rec.arm, rec.hand);
        if every > 0 && rec.epoch % every == 0 {
            let mut ck = m.checkpoint(seed)?;
            ck.manifest.epoch = rec.epoch;
            ck.write(&PathBuf::from(format!("{}.epoch{}", out.display(), rec.epoch)))?;
        }
        Ok(())
    };
    let fitted = fit_method(method, &train_set, &r.task, &r.train, &models, &mut hook)?;
    let evaluation = test_set
        .as_ref()
        .map(|t| evaluate_set(fitted.model.as_ref(), t, &r.task))
        .transpose()?;

    let mut ck = fitted.model.checkpoint(seed)?;
    ck.manifest.epoch = fitted.history.len();
    if let Some(e) = &evaluation {
        ck.manifest.metrics.insert("test_accuracy".into(), e.accuracy);
    }
    if let Some(last) = fitted.history.last() {
        ck.manifest.metrics.insert("train_loss".into(), last.total);
    }
    ck.write(&a.out)?;

    let report = TrainReport {
        method,
        task: r.task.id,
        config: r.train.clone(),
        train_trials: train_set.len(),
        test_trials: test_set.as_ref().map_or(0, EpochSet::len),
        train_hash: train_set.content_hash(),
        test_hash: test_set.as_ref().map(EpochSet::content_hash),
        history: fitted.history,
        evaluation,
    };
    let report_path = a.report.unwrap_or_else(|| PathBuf::from(format!("{}.json", a.out.display())));
    write_json(&report_path, &report)?;
    match &report.evaluation {
        Some(e) => println!("{method} on {}: test accuracy {:.4} over {} trials", r.task.id, e.accuracy, report.test_trials),
        None => println!("{method} on {}: trained on {} trials", r.task.id, report.train_trials),
    }
    Ok(())
}

fn load_predictor(ck: &Checkpoint) -> CliResult<Box<dyn Predictor>> {
    let p = ck.manifest.precision;
    Ok(match (ck.manifest.kind, p) {
        (ModelKind::Era, Precision::F32) => Box::new(ck.era_model::<f32>()?),
        (ModelKind::Era, Precision::F64) => Box::new(ck.era_model::<f64>()?),
        (ModelKind::Flat, Precision::F32) => Box::new(ck.flat_model::<f32>()?),
        (ModelKind::Flat, Precision::F64) => Box::new(ck.flat_model::<f64>()?),
        (ModelKind::Fbcsp, _) => Box::new(TaskFbcsp {
            task: ck.manifest.task.clone(),
            model: FbcspModel::from_checkpoint(ck)?,
        }),
    })
}

fn eval(a: EvalArgs) -> CliResult {
    let ck = Checkpoint::read(&a.model)?;
    let task = ck.manifest.task.clone();
    let model = load_predictor(&ck)?;
    let data = EpochSet::read(&a.data)?.restrict(&task)?;
    let e = evaluate_set(model.as_ref(), &data, &task)?;
    println!("accuracy {:.4} over {} trials", e.accuracy, data.len());
    println!("confusion (rows true, columns predicted): {}", task.class_names().join(" "));
    for row in &e.confusion {
        println!("  {}", row.iter().map(|v| format!("{v:>4}")).collect::<String>());
    }
    if let Some(path) = a.report {
        write_json(&path, &e)?;
    }
    Ok(())
}

fn compare(s: &Settings, a: CompareArgs) -> CliResult {
    let r = resolve_model(s, &a.model)?;
    let methods: Vec<Method> = s
        .text("methods", a.methods.clone())
        .unwrap_or_else(|| "era,flat,fbcsp".into())
        .split(',')
        .map(|m| m.trim().parse::<Method>())
        .collect::<Result<_, _>>()?;
    if r.test_fraction == 0.0 {
        return Err(Failure::Usage("compare needs a held-out test set (test fraction > 0)".into()));
    }
    let subjects = a.data.iter().map(|p| EpochSet::read(p)).collect::<Result<Vec<_>, _>>()?;
    let spec = ExperimentSpec {
        task: r.task,
        methods,
        train: r.train,
        models: MethodConfig::default(),
        test_fraction: r.test_fraction,
        split_seed: r.split_seed,
    };
    let report = run_experiment(&spec, &subjects)?;
    for p in report.write(&a.out)? {
        println!("{}", p.display());
    }
    print!("{}", report.accuracy_csv());
    Ok(())
}

fn psd(a: PsdArgs) -> CliResult {
    let set = EpochSet::read(&a.data)?;
    let table = psd_report(&set, None, &a.out)?;
    println!(
        "{} classes x {} bins -> {}",
        table.classes.len(),
        table.frequencies.len(),
        a.out.display()
    );
    Ok(())
}
