use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use telescope::benchmark::{self, Clock, EvalProtocol, FakeClock, ForecastMethod, SystemClock};
use telescope::config::TelescopeConfig;
use telescope::decomposition::{smooth_trend, stl};
use telescope::pipeline::{self, ForecastRequest, Mode, NONSEASONAL_TREND_WINDOW};
use telescope::recommender::{self, RecommenderModel};
use telescope::series::{read_csv, to_csv, TimeSeries};
use telescope::spectral::{dominant_frequencies, periodogram, periodogram_csv};
use telescope::synthetic;

/// Duration reported for every timed step under `--fake-clock`.
const FAKE_TICK: Duration = Duration::from_millis(1);

#[derive(Parser)]
#[command(name = "telescope", version, about = "Hybrid time-series forecasting")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key = value overrides for detector and learner settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for training and benchmarking (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Report a fixed duration for every timing so outputs are reproducible.
    #[arg(long, global = true)]
    fake_clock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forecast a single-column CSV series.
    Forecast(ForecastArgs),
    /// Write trend, season and irregular components.
    Decompose(DecomposeArgs),
    /// Train the learner recommender on a directory of CSV series.
    TrainRecommender(TrainArgs),
    /// Evaluate methods on a directory of CSV series.
    Benchmark(BenchmarkArgs),
    /// Write a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    TimeCritical,
    Recommended,
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    horizon: usize,
    #[arg(long, value_enum, default_value = "time-critical")]
    mode: ModeArg,
    /// Recommender model, required in recommended mode.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Forecast CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON diagnostics file.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Period to decompose at; detected when omitted.
    #[arg(long)]
    period: Option<usize>,
    /// Components CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the periodogram as CSV.
    #[arg(long)]
    spectrum: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    augment_to: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "telescope,naive,seasonal-naive")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Recommender model for telescope-star.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Bad flag combinations detected after parsing (exit 1).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => TelescopeConfig::load(path).with_context(|| format!("config {}", path.display()))?,
        None => TelescopeConfig::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("worker pool")?;
    pool.install(|| match &cli.command {
        Command::Forecast(a) => forecast(&cli, &config, a),
        Command::Decompose(a) => decompose(&config, a),
        Command::TrainRecommender(a) => train(&cli, &config, a),
        Command::Benchmark(a) => bench(&cli, &config, a),
        Command::Synth(a) => synth(&cli, a),
    })
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    read_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<RecommenderModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RecommenderModel::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

/// CSV files of a corpus directory, sorted by file name.
fn read_corpus(dir: &Path) -> Result<Vec<(String, TimeSeries)>> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading corpus {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("corpus {} has no .csv files", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, read_series(p)?))
        })
        .collect()
}

fn forecast(cli: &Cli, config: &TelescopeConfig, a: &ForecastArgs) -> Result<()> {
    if a.horizon == 0 {
        return Err(usage("--horizon must be at least 1"));
    }
    let mode = match a.mode {
        ModeArg::TimeCritical => Mode::TimeCritical,
        ModeArg::Recommended => Mode::Recommended,
    };
    if mode == Mode::Recommended && a.model.is_none() {
        return Err(usage("--mode recommended needs --model"));
    }
    let series = read_series(&a.input)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let request = ForecastRequest {
        series,
        horizon: a.horizon,
        mode,
        seed: cli.seed,
    };
    let mut result = pipeline::forecast(&request, config, model.as_ref())
        .with_context(|| format!("forecasting {}", a.input.display()))?;
    if cli.fake_clock {
        result.diagnostics.elapsed_seconds = FAKE_TICK.as_secs_f64();
    }
    emit(a.output.as_deref(), &to_csv(result.forecast.values()))?;
    if let Some(path) = &a.diagnostics {
        write(path, &(serde_json::to_string_pretty(&result.diagnostics)? + "\n"))?;
    }
    Ok(())
}

fn decompose(config: &TelescopeConfig, a: &DecomposeArgs) -> Result<()> {
    let series = read_series(&a.input)?;
    let period = match a.period {
        Some(p) => p,
        None => dominant_frequencies(&series, &config.spectral).dominant(),
    };
    let (trend, season, irregular) = if period > 1 {
        let d = stl(&series, period).with_context(|| format!("decomposing {}", a.input.display()))?;
        (d.trend, d.season, d.irregular)
    } else {
        let trend = smooth_trend(series.values(), NONSEASONAL_TREND_WINDOW);
        let irregular = series.values().iter().zip(&trend).map(|(y, t)| y - t).collect();
        (trend, vec![0.0; series.len()], irregular)
    };
    let mut out = format!("# period={period}\nt,value,trend,season,irregular\n");
    for t in 0..series.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            series.start_index() + t as i64,
            series.values()[t],
            trend[t],
            season[t],
            irregular[t]
        ));
    }
    emit(a.output.as_deref(), &out)?;
    if let Some(path) = &a.spectrum {
        let pg = periodogram(&series).with_context(|| format!("periodogram of {}", a.input.display()))?;
        write(path, &periodogram_csv(&pg))?;
    }
    Ok(())
}

fn train(cli: &Cli, config: &TelescopeConfig, a: &TrainArgs) -> Result<()> {
    let corpus: Vec<TimeSeries> = read_corpus(&a.corpus)?.into_iter().map(|(_, s)| s).collect();
    let model = recommender::train(&corpus, a.augment_to, cli.seed, config).context("training recommender")?;
    write(&a.out, &(model.to_json() + "\n"))
}

fn bench(cli: &Cli, config: &TelescopeConfig, a: &BenchmarkArgs) -> Result<()> {
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let model = a.model.as_deref().map(load_model).transpose()?.map(Arc::new);
    let methods: Vec<Box<dyn ForecastMethod>> = a
        .methods
        .iter()
        .map(|name| benchmark::builtin_method(name, config, model.clone()).map_err(|e| usage(e.to_string())))
        .collect::<Result<_>>()?;
    let corpus = read_corpus(&a.corpus)?;
    let protocol = EvalProtocol {
        repetitions: a.reps,
        seed: cli.seed,
        ..Default::default()
    };
    let clock: Box<dyn Clock> = if cli.fake_clock {
        Box::new(FakeClock(FAKE_TICK))
    } else {
        Box::new(SystemClock)
    };
    let report = benchmark::run(&corpus, &methods, &protocol, clock.as_ref())?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write(&a.out.join("cells.csv"), &report.cells_csv())?;
    write(&a.out.join("summary.csv"), &report.summary_csv())?;
    write(&a.out.join("quadrants.csv"), &report.quadrant_csv())?;
    write(&a.out.join("friedman.csv"), &report.friedman_csv())?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (i, s) in synthetic::corpus(a.count, cli.seed).iter().enumerate() {
        let spec = &s.spec;
        let header = format!(
            "# period={} level={} slope={} amplitude={} noise_ratio={}\nvalue\n",
            spec.period, spec.level, spec.slope, spec.amplitude, spec.noise_ratio
        );
        write(
            &a.out.join(format!("series_{i:03}.csv")),
            &(header + &to_csv(s.noisy.values())),
        )?;
    }
    Ok(())
}
