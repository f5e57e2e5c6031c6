//! The batch pipeline behind the `edgan` binary.
//!
//! Every command reads and writes under one output root (`--out`, else
//! `$EDGAN_OUT`, else `runs`):
//!
//! ```text
//! <out>/data/<ticker>.csv, data/manifest.txt    synth
//! <out>/dataset.bin, dataset.sha256             ingest
//! <out>/<variant>/run.toml                      train: resolved config and digests
//! <out>/<variant>/train.log, timing.log         train: one line per epoch
//! <out>/<variant>/checkpoint.bin                train: final weights and optimiser state
//! <out>/<variant>/abort.txt                     train: written on a numeric abort
//! <out>/<variant>/metrics.csv                   evaluate
//! <out>/comparison.{txt,csv,svg}                compare
//! <out>/<variant>/{convergence,forecast_<ticker>}.{csv,svg}   plot
//! ```
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 numeric abort.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::codec::sha256_hex;
use crate::dataset::{
    parse_csv, parse_manifest, render_manifest, synthesize, Dataset, DatasetConfig, ManifestEntry, Split,
    SynthKind, SynthParams,
};
use crate::error::{Error, Result};
use crate::indicators::IndicatorConfig;
use crate::models::{decode_checkpoint, DataShape, ModelConfig};
use crate::report::{
    comparison_table, emit_plot_data, evaluate_run, forecast_points, metrics_to_csv, parse_metrics_csv,
    PlotSource,
};
use crate::training::{EpochRecord, TrainConfig, Trainer, Variant};

pub const OUT_ENV: &str = "EDGAN_OUT";
pub const DATASET_FILE: &str = "dataset.bin";
pub const RUN_FILE: &str = "run.toml";
pub const LOG_FILE: &str = "train.log";
pub const TIMING_FILE: &str = "timing.log";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const ABORT_FILE: &str = "abort.txt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Parser)]
#[command(name = "edgan", version, about = "Encoder-decoder GAN stock forecasting pipeline")]
pub struct Cli {
    /// TOML run configuration with optional [dataset], [indicators], [model], [train] and [synth] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides train.seed (also seeds `synth`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides train.variant; selects the run directory for evaluate and plot.
    #[arg(long, global = true)]
    pub variant: Option<Variant>,
    /// Overrides train.epochs.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Output root.
    #[arg(long, global = true, env = OUT_ENV, default_value = "runs")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Forecast,
    Convergence,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic OHLCV series and register it in <out>/data/manifest.txt.
    Synth {
        #[arg(long, value_parser = parse_kind)]
        kind: SynthKind,
        #[arg(long, default_value_t = 400)]
        length: usize,
        /// Defaults to the upper-cased kind.
        #[arg(long)]
        ticker: Option<String>,
        #[arg(long, default_value = "synthetic")]
        sector: String,
        #[arg(long, default_value = "SYN")]
        exchange: String,
    },
    /// Parse, engineer features, scale, window and split; cache the dataset.
    Ingest {
        /// Stock manifest; defaults to `manifest` in the config, then <out>/data/manifest.txt.
        manifest: Option<PathBuf>,
    },
    /// Train one variant on the cached dataset.
    Train,
    /// Score a trained run on both splits and scales.
    Evaluate {
        /// Defaults to <out>/<variant>.
        run: Option<PathBuf>,
    },
    /// Merge evaluated runs over the same dataset into one comparison table.
    Compare {
        /// Defaults to every evaluated variant directory under <out>.
        runs: Vec<PathBuf>,
    },
    /// Emit plot CSV and SVG for a run.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Defaults to <out>/<variant>.
        run: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<SynthKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Declarative run configuration; command-line flags win over it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub indicators: IndicatorConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        if let (Some(m), Some(dir)) = (&cfg.manifest, path.parent()) {
            if m.is_relative() {
                cfg.manifest = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    fn apply(&mut self, cli: &Cli) {
        if let Some(s) = cli.seed {
            self.train.seed = s;
        }
        if let Some(v) = cli.variant {
            self.train.variant = v;
        }
        if let Some(e) = cli.epochs {
            self.train.epochs = e;
        }
    }
}

/// Contents of `run.toml`: everything needed to rebuild and audit a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub variant: Variant,
    pub dataset_path: PathBuf,
    /// SHA-256 of the cached dataset bytes.
    pub dataset_digest: String,
    /// SHA-256 over the train and model sections plus the dataset digest.
    pub run_digest: String,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl RunManifest {
    fn new(train: &TrainConfig, model: &ModelConfig, dataset_path: PathBuf, dataset_digest: String) -> Self {
        let json = serde_json::to_vec(&(train, model, &dataset_digest)).expect("configs serialise");
        RunManifest {
            variant: train.variant,
            dataset_path,
            dataset_digest,
            run_digest: sha256_hex(&json),
            train: train.clone(),
            model: model.clone(),
        }
    }

    pub fn load(run: &Path) -> Result<Self> {
        let path = run.join(RUN_FILE);
        toml::from_str(&read_text(&path)?).map_err(|e| Error::Format(format!("{}: {}", path.display(), e)))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("configuration serialises to TOML")
}

fn load_dataset(path: &Path) -> Result<(Dataset, String)> {
    let bytes = read_bytes(path)?;
    let ds = Dataset::decode(&bytes).map_err(|e| Error::Format(format!("{}: {}", path.display(), e)))?;
    Ok((ds, sha256_hex(&bytes)))
}

/// Loads a run's dataset and refuses it when its digest differs from the recorded one.
fn load_run(run: &Path) -> Result<(RunManifest, Dataset)> {
    let m = RunManifest::load(run)?;
    let (ds, digest) = load_dataset(&m.dataset_path)?;
    if digest != m.dataset_digest {
        return Err(Error::DigestMismatch {
            expected: m.dataset_digest,
            found: format!("{} ({})", digest, m.dataset_path.display()),
        });
    }
    Ok((m, ds))
}

fn load_trained(run: &Path) -> Result<(RunManifest, Dataset, crate::models::Generator)> {
    let (m, ds) = load_run(run)?;
    let shape = DataShape::of(&ds);
    let gen_cfg = m.model.generator(shape, m.variant.uses_noise());
    let disc_cfg = m.model.discriminator(shape);
    let ckp = decode_checkpoint(&read_bytes(&run.join(CHECKPOINT_FILE))?, &gen_cfg, &disc_cfg)?;
    Ok((m, ds, ckp.generator))
}

pub struct Context {
    pub out: PathBuf,
    pub config: RunConfig,
}

impl Context {
    fn run_dir(&self, given: &Option<PathBuf>) -> PathBuf {
        given
            .clone()
            .unwrap_or_else(|| self.out.join(self.config.train.variant.name()))
    }
}

fn cmd_synth(ctx: &Context, kind: SynthKind, length: usize, ticker: Option<String>, sector: String, exchange: String) -> Result<()> {
    let ticker = ticker.unwrap_or_else(|| kind.name().to_uppercase());
    let series = synthesize(kind, &ctx.config.synth, length, ctx.config.train.seed)?;
    let data = ctx.out.join("data");
    let csv = data.join(format!("{}.csv", ticker));
    write(&csv, series.to_csv())?;

    let manifest = data.join("manifest.txt");
    let mut entries = if manifest.exists() {
        parse_manifest(&read_text(&manifest)?, &data)?
    } else {
        Vec::new()
    };
    entries.retain(|e| e.ticker != ticker);
    entries.push(ManifestEntry {
        ticker: ticker.clone(),
        sector,
        exchange,
        csv: PathBuf::from(format!("{}.csv", ticker)),
    });
    for e in &mut entries {
        if let Ok(rel) = e.csv.strip_prefix(&data) {
            e.csv = rel.to_path_buf();
        }
    }
    write(&manifest, render_manifest(&entries))?;
    println!("wrote {} ({} rows) and registered {} in {}", csv.display(), length, ticker, manifest.display());
    Ok(())
}

fn cmd_ingest(ctx: &Context, manifest: Option<PathBuf>) -> Result<()> {
    let path = manifest
        .or_else(|| ctx.config.manifest.clone())
        .unwrap_or_else(|| ctx.out.join("data").join("manifest.txt"));
    let base = path.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&read_text(&path)?, base)?;
    let mut series = Vec::with_capacity(entries.len());
    for e in &entries {
        let parsed = parse_csv(&read_bytes(&e.csv)?, ctx.config.dataset.strict)
            .map_err(|err| Error::Input(format!("{}: {}", e.csv.display(), err)))?;
        if parsed.skipped + parsed.rejected > 0 {
            log::warn!(
                "{}: {} rows skipped, {} rejected",
                e.csv.display(),
                parsed.skipped,
                parsed.rejected
            );
        }
        series.push(parsed.into_series(&e.ticker, &e.sector, &e.exchange));
    }
    let ds = Dataset::build(&series, &ctx.config.indicators, &ctx.config.dataset)?;
    let bytes = ds.encode();
    let digest = sha256_hex(&bytes);
    write(&ctx.out.join(DATASET_FILE), &bytes)?;
    write(&ctx.out.join("dataset.sha256"), format!("{}  {}\n", digest, DATASET_FILE))?;
    for s in &ds.stocks {
        println!(
            "{}: {} train, {} validation, {} test windows",
            s.ticker,
            s.train.len(),
            s.validation.len(),
            s.test.len()
        );
    }
    println!("dataset {}", digest);
    Ok(())
}

fn cmd_train(ctx: &Context) -> Result<()> {
    let dataset_path = ctx.out.join(DATASET_FILE);
    let (ds, digest) = load_dataset(&dataset_path)?;
    let cfg = &ctx.config;
    let manifest = RunManifest::new(&cfg.train, &cfg.model, dataset_path, digest);
    let dir = ctx.out.join(cfg.train.variant.name());
    write(&dir.join(RUN_FILE), to_toml(&manifest))?;
    let _ = fs::remove_file(dir.join(ABORT_FILE));

    let mut trainer = Trainer::for_dataset(&ds, &cfg.model, cfg.train.clone())?;
    let train_set = ds.samples(Split::Train);
    let val_set = ds.samples(Split::Validation);
    let (mut log, mut timing) = (String::new(), String::new());
    let every = cfg.train.checkpoint_every;
    let result = trainer.fit(&train_set, &val_set, |rec, t| {
        log.push_str(&rec.log_line());
        log.push('\n');
        timing.push_str(&rec.timing_line());
        timing.push('\n');
        log::info!("{}", rec.log_line());
        if every > 0 && rec.epoch % every == 0 {
            write(&dir.join(format!("checkpoint_{:05}.bin", rec.epoch)), t.checkpoint(true))?;
        }
        Ok(())
    });
    write(&dir.join(LOG_FILE), &log)?;
    write(&dir.join(TIMING_FILE), &timing)?;
    let records = match result {
        Ok(r) => r,
        Err(e) => {
            let last = log.lines().last().unwrap_or("none");
            write(
                &dir.join(ABORT_FILE),
                format!("{}\nlast completed epoch: {}\nrun digest: {}\n", e, last, manifest.run_digest),
            )?;
            return Err(e);
        }
    };
    write(&dir.join(CHECKPOINT_FILE), trainer.checkpoint(true))?;
    write_convergence(&dir, &records)?;
    let last = records.last().expect("at least one epoch");
    println!("{} {}", cfg.train.variant, last.log_line());
    println!("run {}", dir.display());
    Ok(())
}

fn write_convergence(dir: &Path, records: &[EpochRecord]) -> Result<()> {
    let plot = emit_plot_data(PlotSource::Convergence(records))?;
    write(&dir.join("convergence.csv"), plot.csv)?;
    write(&dir.join("convergence.svg"), plot.svg)
}

fn cmd_evaluate(ctx: &Context, run: Option<PathBuf>) -> Result<()> {
    let dir = ctx.run_dir(&run);
    let (m, ds, generator) = load_trained(&dir)?;
    let rows = evaluate_run(&generator, &ds, m.variant)?;
    let csv = metrics_to_csv(&rows);
    write(&dir.join(METRICS_FILE), &csv)?;
    print!("{}", csv);
    Ok(())
}

fn default_runs(out: &Path) -> Vec<PathBuf> {
    Variant::ALL
        .iter()
        .map(|v| out.join(v.name()))
        .filter(|d| d.join(METRICS_FILE).exists())
        .collect()
}

fn cmd_compare(ctx: &Context, runs: Vec<PathBuf>) -> Result<()> {
    let runs = if runs.is_empty() { default_runs(&ctx.out) } else { runs };
    if runs.is_empty() {
        return Err(Error::Input(format!(
            "no evaluated runs under {}; run `edgan evaluate` first",
            ctx.out.display()
        )));
    }
    let mut rows = Vec::new();
    let mut reference: Option<(String, PathBuf)> = None;
    for dir in &runs {
        let m = RunManifest::load(dir)?;
        match &reference {
            None => reference = Some((m.dataset_digest.clone(), dir.clone())),
            Some((d, first)) if *d != m.dataset_digest => {
                return Err(Error::DigestMismatch {
                    expected: format!("{} ({})", d, first.display()),
                    found: format!("{} ({})", m.dataset_digest, dir.display()),
                })
            }
            _ => {}
        }
        let path = dir.join(METRICS_FILE);
        rows.extend(parse_metrics_csv(&read_text(&path)?).map_err(|e| Error::Format(format!("{}: {}", path.display(), e)))?);
    }
    let table = comparison_table(&rows)?;
    let text = table.to_text();
    write(&ctx.out.join("comparison.txt"), &text)?;
    write(&ctx.out.join("comparison.csv"), table.to_csv())?;
    write(&ctx.out.join("comparison.svg"), table.to_svg())?;
    print!("{}", text);
    Ok(())
}

fn cmd_plot(ctx: &Context, kind: PlotKind, run: Option<PathBuf>) -> Result<()> {
    let dir = ctx.run_dir(&run);
    match kind {
        PlotKind::Convergence => {
            let path = dir.join(LOG_FILE);
            let records = read_text(&path)?
                .lines()
                .filter(|l| !l.is_empty())
                .map(EpochRecord::parse_log_line)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Format(format!("{}: {}", path.display(), e)))?;
            write_convergence(&dir, &records)?;
            println!("wrote {}", dir.join("convergence.svg").display());
        }
        PlotKind::Forecast => {
            let (m, ds, generator) = load_trained(&dir)?;
            for stock in &ds.stocks {
                let points = forecast_points(&generator, stock, ds.config.target_column)?;
                let plot = emit_plot_data(PlotSource::ForecastOverlay(&points))?;
                let stem = format!("forecast_{}", stock.ticker);
                let svg = dir.join(format!("{}.svg", stem));
                write(&dir.join(format!("{}.csv", stem)), plot.csv)?;
                write(&svg, plot.svg)?;
                println!("wrote {} ({} {} points)", svg.display(), points.len(), m.variant);
            }
        }
    }
    Ok(())
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    config.apply(&cli);
    let ctx = Context {
        out: cli.out.clone(),
        config,
    };
    match cli.command {
        Command::Synth {
            kind,
            length,
            ticker,
            sector,
            exchange,
        } => cmd_synth(&ctx, kind, length, ticker, sector, exchange),
        Command::Ingest { manifest } => cmd_ingest(&ctx, manifest),
        Command::Train => cmd_train(&ctx),
        Command::Evaluate { run } => cmd_evaluate(&ctx, run),
        Command::Compare { runs } => cmd_compare(&ctx, runs),
        Command::Plot { kind, run } => cmd_plot(&ctx, kind, run),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}
