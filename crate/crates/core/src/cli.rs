//! Command-line front end: argument parsing, run configuration and report writing.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::checkpoint::{Checkpoint, CHECKPOINT_SCHEMA};
use crate::config::TrainConfig;
use crate::data::{
    chrono_split, dump_tasks, gen_synthetic, load_csv, median_step_seconds, Family, SplitSpec, SyntheticSpec, TargetMode,
    TimeSeries,
};
use crate::error::{Error, ErrorClass, Result};
use crate::eval::protocol::{datetime_matrix, synthetic_train_config};
use crate::eval::{
    evaluate, evaluate_tasks, fit_series, fit_synthetic, forecast_series, profile, run_ablation, scale_comparison,
    sweep_mu, AblationOptions, AblationSource, AblationVariant, EvalOptions, LastValue, LocalOptions, PreparedSeries,
    ProfileOptions, SweepOptions, WindowForecaster, MU_GRID,
};
use crate::forecaster::{forecast_many, Task};
use crate::numkit::Matrix;

/// Version of every JSON report layout written by the CLI.
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "deeptime", version, about = "Meta-learned time-index forecasting")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "DEEPTIME_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "DEEPTIME_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic family, meta-train on it and score the held-out tasks.
    Synth(SynthArgs),
    /// Meta-train on a CSV and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on the validation or test split of a CSV.
    Eval(EvalArgs),
    /// Select the lookback multiplier on validation loss, then score once on test.
    Sweep(TrainArgs),
    /// Run one ablation variant (or the scale comparison) under the benchmark protocol.
    Ablate(AblateArgs),
    /// Forecast the steps following the end of a CSV.
    Forecast(ForecastArgs),
    /// Time one training step across lookback and horizon grids.
    Profile,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub family: Family,
    /// Write every test forecast to `predictions.csv`.
    #[arg(long)]
    pub dump_predictions: bool,
    /// Write each generated task to `tasks/`.
    #[arg(long)]
    pub dump_tasks: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Lookback multiplier (`L = mu * H`).
    #[arg(long)]
    pub mu: Option<usize>,
    /// Append calendar features to the time-index.
    #[arg(long)]
    pub datetime: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitChoice,
    /// Write every window forecast to `forecasts.csv`.
    #[arg(long)]
    pub dump_forecasts: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, required_unless_present = "scales", conflicts_with = "scales")]
    pub variant: Option<AblationVariant>,
    /// Compare the concatenated features against each single scale.
    #[arg(long)]
    pub scales: bool,
    #[arg(long, conflicts_with = "family")]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub mu: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub target: TargetMode,
    pub split: SplitSpec,
    pub datetime: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            csv: None,
            target: TargetMode::Multivariate,
            split: SplitSpec::default(),
            datetime: false,
        }
    }
}

/// Synthetic task generation plus the training setup used on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_train_tasks: usize,
    pub n_test_tasks: usize,
    pub points: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub train: TrainConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        Self {
            n_train_tasks: spec.n_train_tasks,
            n_test_tasks: spec.n_test_tasks,
            points: spec.points,
            lookback: spec.lookback,
            horizon: spec.horizon,
            train: synthetic_train_config(),
        }
    }
}

impl SynthConfig {
    pub fn spec(&self, family: Family) -> SyntheticSpec {
        SyntheticSpec {
            family,
            n_train_tasks: self.n_train_tasks,
            n_test_tasks: self.n_test_tasks,
            points: self.points,
            lookback: self.lookback,
            horizon: self.horizon,
            seed: self.train.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub mus: Vec<usize>,
    /// Also score every candidate on test (diagnostic only).
    pub full_table: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mus: MU_GRID.to_vec(),
            full_table: false,
        }
    }
}

/// Everything a run reads from its TOML file; every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub eval: EvalOptions,
    pub sweep: SweepConfig,
    pub local: LocalOptions,
    pub profile: ProfileOptions,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.synth.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.synth.train.validate()?;
        self.data.split.validate()?;
        self.local.validate()
    }
}

/// Parses `args` and runs the command, returning the process exit code.
///
/// Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            report_error(&e);
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numeric => 3,
    }
}

fn report_error(e: &Error) {
    let class = match e.class() {
        ErrorClass::Usage => "usage",
        ErrorClass::Data => "data",
        ErrorClass::Numeric => "numeric",
    };
    let line = json!({"error": {"class": class, "kind": e.kind(), "message": e.to_string()}});
    eprintln!("{line}");
    eprintln!("error: {e}");
}

fn execute(cli: &Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be >= 1".into()));
        }
        // A pool already built by an earlier call in this process is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut run = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        run = run.with_seed(seed);
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("deeptime-out"));
    match &cli.command {
        Command::Synth(a) => cmd_synth(run, a, &out),
        Command::Train(a) => cmd_train(run, a, &out),
        Command::Eval(a) => cmd_eval(run, a, &out),
        Command::Sweep(a) => cmd_sweep(run, a, &out),
        Command::Ablate(a) => cmd_ablate(run, a, &out),
        Command::Forecast(a) => cmd_forecast(run, a, &out),
        Command::Profile => cmd_profile(run, &out),
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn write_report(out: &Path, command: &str, run: &RunConfig, result: Value, timing: Value) -> Result<PathBuf> {
    create_dir(out)?;
    let path = out.join("report.json");
    let report = json!({
        "schema_version": REPORT_SCHEMA,
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": to_value(run),
        "result": result,
        "timing": timing,
    });
    write_json(&path, &report)?;
    Ok(path)
}

fn csv_path(flag: &Option<PathBuf>, run: &RunConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| run.data.csv.clone())
        .ok_or_else(|| Error::InvalidConfig("no input series: pass --csv or set data.csv".into()))
}

fn apply_train_flags(run: &mut RunConfig, horizon: Option<usize>, mu: Option<usize>) -> Result<()> {
    if let Some(h) = horizon {
        run.train.horizon = h;
    }
    if let Some(m) = mu {
        run.train.lookback_multiplier = m;
    }
    run.validate()
}

fn cmd_synth(run: RunConfig, a: &SynthArgs, out: &Path) -> Result<String> {
    run.validate()?;
    let started = Instant::now();
    let spec = run.synth.spec(a.family);
    let data = gen_synthetic(&spec)?;
    let (model, report) = fit_synthetic(&run.synth.train, &data)?;
    let test = data.test_tasks();
    let preds = forecast_many(&model, &test)?;
    let metrics = evaluate_tasks(&Precomputed(&preds), &test, true)?;
    let baseline = evaluate_tasks(&LastValue, &test, true)?;
    create_dir(out)?;
    if a.dump_predictions {
        dump_task_predictions(&out.join("predictions.csv"), &test, &preds)?;
    }
    if a.dump_tasks {
        let dir = out.join("tasks");
        create_dir(&dir)?;
        dump_tasks(&dir, "train", &data.train)?;
        dump_tasks(&dir, "test", &data.test)?;
    }
    let ratio = baseline.mse / metrics.mse;
    let result = json!({
        "family": a.family.name(),
        "spec": to_value(&spec),
        "frequencies": data.frequencies,
        "metrics": to_value(&metrics),
        "baseline": to_value(&baseline),
        "baseline_ratio": ratio,
        "lambda": model.lambda(),
        "train_report": to_value(&report.without_timing()),
    });
    let timing = json!({"epoch_seconds": report.epoch_seconds, "total_seconds": started.elapsed().as_secs_f64()});
    let path = write_report(out, "synth", &run, result, timing)?;
    Ok(format!(
        "synth {}: mse {:.6e} baseline {:.6e} ratio {:.2} -> {}",
        a.family.name(),
        metrics.mse,
        baseline.mse,
        ratio,
        path.display()
    ))
}

/// Forecasts already computed, served back in task order.
struct Precomputed<'a>(&'a [Matrix]);

impl WindowForecaster for Precomputed<'_> {
    fn forecast_windows(&self, tasks: &[Task]) -> Result<Vec<Matrix>> {
        if tasks.len() != self.0.len() {
            return Err(Error::ShapeMismatch("precomputed forecasts do not match the tasks".into()));
        }
        Ok(self.0.to_vec())
    }
}

fn dump_task_predictions(path: &Path, tasks: &[Task], preds: &[Matrix]) -> Result<()> {
    let mut s = String::from("task,step,y_true,y_pred\n");
    for (i, (t, p)) in tasks.iter().zip(preds).enumerate() {
        for step in 0..p.rows() {
            writeln!(s, "{i},{step},{},{}", t.horizon[(step, 0)], p[(step, 0)]).expect("string write");
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn cmd_train(mut run: RunConfig, a: &TrainArgs, out: &Path) -> Result<String> {
    apply_train_flags(&mut run, a.horizon, a.mu)?;
    let started = Instant::now();
    let path = csv_path(&a.csv, &run)?;
    let ts = load_csv(&path, run.data.target)?;
    let data = PreparedSeries::new(&ts, &run.data.split, run.data.datetime || a.datetime)?;
    let (model, report) = fit_series(&run.train, &data)?;
    create_dir(out)?;
    let ck = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA,
        config: run.train.clone(),
        lookback: run.train.lookback(),
        horizon: run.train.horizon,
        target: run.data.target,
        split: run.data.split.clone(),
        normalization: data.standardizer.clone(),
        datetime_features: data.extras.as_ref().map(|e| e.features.clone()),
        report: Some(report.without_timing()),
        model,
    };
    let ck_path = out.join("checkpoint.json");
    ck.save(&ck_path)?;
    let result = json!({
        "csv": path,
        "checkpoint": ck_path,
        "checkpoint_schema": CHECKPOINT_SCHEMA,
        "lookback": ck.lookback,
        "horizon": ck.horizon,
        "channels": data.channels(),
        "lambda": ck.model.lambda(),
        "train_report": to_value(&report.without_timing()),
    });
    let timing = json!({"epoch_seconds": report.epoch_seconds, "total_seconds": started.elapsed().as_secs_f64()});
    write_report(out, "train", &run, result, timing)?;
    Ok(format!(
        "train: best epoch {} val loss {:.6e} -> {}",
        report.best_epoch,
        report.best_val_loss,
        ck_path.display()
    ))
}

/// The requested split of `ts` standardized with the checkpoint's statistics.
fn checkpoint_split(ck: &Checkpoint, ts: &TimeSeries, which: SplitChoice) -> Result<(TimeSeries, Option<Matrix>)> {
    let (_, val, test) = chrono_split(ts, &ck.split)?;
    let part = match which {
        SplitChoice::Val => val,
        SplitChoice::Test => test,
    };
    let extra = match &ck.datetime_features {
        Some(f) => Some(datetime_matrix(&part, f)?),
        None => None,
    };
    Ok((ck.normalization.apply(&part)?, extra))
}

fn cmd_eval(run: RunConfig, a: &EvalArgs, out: &Path) -> Result<String> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let path = csv_path(&a.csv, &run)?;
    let ts = load_csv(&path, ck.target)?;
    let (part, extra) = checkpoint_split(&ck, &ts, a.split)?;
    let (l, h) = (ck.lookback, ck.horizon);
    let metrics = evaluate(&ck.model, &part, extra.as_ref(), l, h, &run.eval)?;
    let baseline = evaluate(&LastValue, &part, None, l, h, &run.eval)?;
    create_dir(out)?;
    if a.dump_forecasts {
        let (tasks, preds) = forecast_series(&ck.model, &part, extra.as_ref(), l, h)?;
        crate::eval::dump_forecasts(&out.join("forecasts.csv"), &tasks, &preds)?;
    }
    let split = match a.split {
        SplitChoice::Val => "val",
        SplitChoice::Test => "test",
    };
    let result = json!({
        "csv": path,
        "checkpoint": a.checkpoint,
        "split": split,
        "lookback": l,
        "horizon": h,
        "metrics": to_value(&metrics),
        "baseline": to_value(&baseline),
    });
    write_report(out, "eval", &run, result, Value::Null)?;
    Ok(format!(
        "eval {split}: mse {:.6e} mae {:.6e} over {} windows",
        metrics.mse, metrics.mae, metrics.n_windows
    ))
}

fn cmd_sweep(mut run: RunConfig, a: &TrainArgs, out: &Path) -> Result<String> {
    apply_train_flags(&mut run, a.horizon, a.mu)?;
    let started = Instant::now();
    let path = csv_path(&a.csv, &run)?;
    let ts = load_csv(&path, run.data.target)?;
    let data = PreparedSeries::new(&ts, &run.data.split, run.data.datetime || a.datetime)?;
    let opts = SweepOptions {
        mus: run.sweep.mus.clone(),
        full_table: run.sweep.full_table,
        eval: run.eval,
    };
    let (result, model) = sweep_mu(&run.train, &data, &opts)?;
    create_dir(out)?;
    let config = TrainConfig {
        lookback_multiplier: result.chosen_mu,
        ..run.train.clone()
    };
    let ck = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA,
        lookback: config.lookback(),
        horizon: config.horizon,
        config,
        target: run.data.target,
        split: run.data.split.clone(),
        normalization: data.standardizer.clone(),
        datetime_features: data.extras.as_ref().map(|e| e.features.clone()),
        report: None,
        model,
    };
    let ck_path = out.join("checkpoint.json");
    ck.save(&ck_path)?;
    let summary = format!(
        "sweep: chose mu {} test mse {:.6e} -> {}",
        result.chosen_mu,
        result.test.mse,
        ck_path.display()
    );
    let result = json!({"csv": path, "checkpoint": ck_path, "sweep": to_value(&result)});
    write_report(out, "sweep", &run, result, json!({"total_seconds": started.elapsed().as_secs_f64()}))?;
    Ok(summary)
}

fn cmd_ablate(mut run: RunConfig, a: &AblateArgs, out: &Path) -> Result<String> {
    let opts = AblationOptions {
        eval: run.eval,
        local: run.local.clone(),
    };
    let started = Instant::now();
    let series;
    let synthetic;
    let (source, cfg) = match a.family {
        Some(family) => {
            if let Some(h) = a.horizon {
                run.synth.horizon = h;
            }
            run.validate()?;
            synthetic = gen_synthetic(&run.synth.spec(family))?;
            (AblationSource::Synthetic(&synthetic), run.synth.train.clone())
        }
        None => {
            apply_train_flags(&mut run, a.horizon, a.mu)?;
            let path = csv_path(&a.csv, &run)?;
            let ts = load_csv(&path, run.data.target)?;
            let datetime = a.variant == Some(AblationVariant::PlusDatetime);
            series = PreparedSeries::new(&ts, &run.data.split, datetime)?;
            (AblationSource::Series(&series), run.train.clone())
        }
    };
    let (label, result, summary) = if a.scales {
        let cmp = scale_comparison(&cfg, &source, &opts)?;
        let summary = format!(
            "ablate scales: cff mse {:.6e}, change vs best {:+.3}, vs worst {:+.3}",
            cmp.cff.mse, cmp.change_vs_best, cmp.change_vs_worst
        );
        ("scales".to_string(), to_value(&cmp), summary)
    } else {
        let variant = a.variant.expect("clap requires a variant without --scales");
        let (r, _) = run_ablation(variant, &cfg, &source, &opts)?;
        let summary = format!("ablate {}: mse {:.6e} mae {:.6e}", variant.name(), r.metrics.mse, r.metrics.mae);
        (variant.name().to_string(), to_value(&r), summary)
    };
    let result = json!({"variant": label, "ablation": result});
    write_report(out, "ablate", &run, result, json!({"total_seconds": started.elapsed().as_secs_f64()}))?;
    Ok(summary)
}

fn cmd_forecast(run: RunConfig, a: &ForecastArgs, out: &Path) -> Result<String> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let ts = load_csv(&a.csv, ck.target)?;
    let (l, h) = (ck.lookback, ck.horizon);
    if ts.len() < l {
        return Err(Error::SplitTooSmall(format!("{}: {} rows, the lookback needs {l}", ts.name, ts.len())));
    }
    let scaled = ck.normalization.apply(&ts)?;
    let start = ts.len() - l;
    let lookback = scaled.values.slice_rows(start, ts.len());
    let future = future_stamps(&ts, h)?;
    let extra = match (&ck.datetime_features, &ts.timestamps, &future) {
        (Some(f), Some(stamps), Some(next)) => {
            let mut all: Vec<_> = stamps[start..].to_vec();
            all.extend_from_slice(next);
            Some(crate::data::datetime_features_selected(&all, f))
        }
        (Some(_), _, _) => {
            return Err(Error::InvalidConfig(
                "checkpoint uses calendar features but the CSV has no timestamps".into(),
            ))
        }
        _ => None,
    };
    let task = Task::with_extra_features(lookback, Matrix::zeros(h, ts.channels()), extra, ts.len())?;
    let pred = ck.normalization.invert_values(&forecast_many(&ck.model, std::slice::from_ref(&task))?[0]);
    create_dir(out)?;
    let csv = out.join("forecast.csv");
    let mut s = String::from("step");
    if future.is_some() {
        s.push_str(",date");
    }
    for c in &ts.columns {
        write!(s, ",{c}").expect("string write");
    }
    s.push('\n');
    for step in 0..h {
        write!(s, "{}", step + 1).expect("string write");
        if let Some(next) = &future {
            write!(s, ",{}", next[step].format("%Y-%m-%d %H:%M:%S")).expect("string write");
        }
        for c in 0..pred.cols() {
            write!(s, ",{}", pred[(step, c)]).expect("string write");
        }
        s.push('\n');
    }
    std::fs::write(&csv, s).map_err(|e| Error::io(&csv, e))?;
    let result = json!({"csv": a.csv, "checkpoint": a.checkpoint, "forecast": csv, "lookback": l, "horizon": h});
    write_report(out, "forecast", &run, result, Value::Null)?;
    Ok(format!("forecast: {h} steps after row {} -> {}", ts.len(), csv.display()))
}

/// Timestamps continuing `ts` at its median sampling step.
fn future_stamps(ts: &TimeSeries, h: usize) -> Result<Option<Vec<chrono::NaiveDateTime>>> {
    let Some(stamps) = &ts.timestamps else {
        return Ok(None);
    };
    let Some(step) = median_step_seconds(stamps).filter(|s| *s > 0) else {
        return Ok(None);
    };
    let last = *stamps.last().expect("non-empty series");
    Ok(Some(
        (1..=h as i64).map(|k| last + chrono::Duration::seconds(step * k)).collect(),
    ))
}

fn cmd_profile(run: RunConfig, out: &Path) -> Result<String> {
    run.validate()?;
    let table = profile(&run.train, &run.profile)?;
    let summary = format!(
        "profile: lookback slope low {} high {}",
        fmt_slope(table.lookback_slope_low),
        fmt_slope(table.lookback_slope_high)
    );
    write_report(out, "profile", &run, to_value(&table), Value::Null)?;
    Ok(summary)
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}
