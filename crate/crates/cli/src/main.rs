mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use modesift::eval::Protocol;
use modesift::sampling::Strategy;

use crate::config::{ClassifierKind, ProfileKind, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "modesift", version, about = "DMD-based analysis and frame selection for high-frame-rate clips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args, Debug)]
struct Shared {
    /// Input sequences (raw tensor files or image directories).
    #[arg(long, short, global = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Output directory; tabular results go to stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Run configuration JSON; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; MODESIFT_THREADS overrides this flag.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert image directories or raw tensors to raw tensors.
    Ingest {
        /// Resize every frame to ROWS,COLS.
        #[arg(long, value_parser = parse_pair)]
        resize: Option<(usize, usize)>,
    },
    /// Exact DMD: eigenvalues, amplitudes and mode frequencies.
    Dmd {
        #[arg(long)]
        rank_tol: Option<f64>,
    },
    /// Sparsity-promoting amplitude sweep over a log-spaced gamma grid.
    DmdspSweep(GridArgs),
    /// Temporal interpolation to a new frame count.
    Tim {
        /// Output frame count; defaults to the input length.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Frame selection with one of the sampling strategies.
    Sample(SampleArgs),
    /// Amplitude histogram over mode frequency for a set of sequences.
    Spectrum {
        #[arg(long)]
        bin_width: Option<f64>,
    },
    /// Amplitude magnitude against original frame index.
    Temporal {
        #[arg(long, value_enum)]
        profile: Option<ProfileKind>,
        #[arg(long)]
        percent: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Percentage of preserved modes against gamma.
    GammaCurve(GridArgs),
    /// LBP-TOP feature vectors.
    Lbptop(LbpArgs),
    /// Cross-validated classification over a corpus manifest.
    Evaluate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
        #[arg(long, value_enum)]
        classifier: Option<ClassifierKind>,
        /// CSV `sample_id,predicted_label` for `--classifier import`.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, value_parser = parse_pair)]
        resize: Option<(usize, usize)>,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        lbp: LbpArgs,
    },
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    #[arg(long)]
    gamma_min: Option<f64>,
    #[arg(long)]
    gamma_max: Option<f64>,
    #[arg(long)]
    gamma_count: Option<usize>,
    /// Divisor applied to the grid for [0, 1] intensities (255 for a grid in
    /// 8-bit units, 1 to use it as is).
    #[arg(long)]
    intensity_scale: Option<f64>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    percent: Option<f64>,
    #[arg(long)]
    fixed_length: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    keep_original_frames: Option<bool>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct LbpArgs {
    #[arg(long)]
    blocks: Option<usize>,
    /// RX,RY,RT.
    #[arg(long, value_parser = parse_triple)]
    radii: Option<(usize, usize, usize)>,
    /// L1-normalize each block histogram.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize: Option<bool>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum StrategyArg {
    Ss,
    Us,
    UsStar,
    Ra,
    Bl,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ProtocolArg {
    Loso,
    Lovo,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let v = parse_list(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    let v = parse_list(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

fn parse_list(s: &str, n: usize) -> Result<Vec<usize>, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated integers, got {}", v.len()));
    }
    Ok(v)
}

impl GridArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let g = &mut cfg.sampling.gamma_grid;
        set(&mut g.min, self.gamma_min);
        set(&mut g.max, self.gamma_max);
        set(&mut g.count, self.gamma_count);
        set(&mut g.intensity_scale, self.intensity_scale);
    }
}

impl SampleArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.sampling;
        if let Some(st) = self.strategy {
            s.strategy = match st {
                StrategyArg::Ss => Strategy::Ss,
                StrategyArg::Us => Strategy::Us,
                StrategyArg::UsStar => Strategy::UsStar,
                StrategyArg::Ra => Strategy::Ra,
                StrategyArg::Bl => Strategy::Bl,
            };
        }
        set(&mut s.percent, self.percent);
        set(&mut s.fixed_length, self.fixed_length);
        set(&mut s.keep_original_frames, self.keep_original_frames);
        self.grid.apply(cfg);
    }
}

impl LbpArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.lbp.blocks, self.blocks);
        set(&mut cfg.lbp.radii, self.radii);
        set(&mut cfg.lbp.normalize, self.normalize);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Dmd { .. } => "dmd",
            Command::DmdspSweep(_) => "dmdsp-sweep",
            Command::Tim { .. } => "tim",
            Command::Sample(_) => "sample",
            Command::Spectrum { .. } => "spectrum",
            Command::Temporal { .. } => "temporal",
            Command::GammaCurve(_) => "gamma-curve",
            Command::Lbptop(_) => "lbptop",
            Command::Evaluate { .. } => "evaluate",
        }
    }

    fn apply(&self, cfg: &mut RunConfig) {
        match self {
            Command::Ingest { resize } => set(&mut cfg.resize, resize.map(Some)),
            Command::Dmd { rank_tol } => set(&mut cfg.rank_tol, *rank_tol),
            Command::DmdspSweep(grid) | Command::GammaCurve(grid) => grid.apply(cfg),
            Command::Tim { frames } => set(&mut cfg.tim_frames, frames.map(Some)),
            Command::Sample(args) => args.apply(cfg),
            Command::Spectrum { bin_width } => set(&mut cfg.bin_width, *bin_width),
            Command::Temporal { profile, percent, grid } => {
                set(&mut cfg.profile, *profile);
                set(&mut cfg.sampling.percent, *percent);
                grid.apply(cfg);
            }
            Command::Lbptop(args) => args.apply(cfg),
            Command::Evaluate {
                manifest,
                protocol,
                classifier,
                predictions,
                resize,
                sample,
                lbp,
            } => {
                set(&mut cfg.manifest, manifest.clone().map(Some));
                if let Some(p) = protocol {
                    cfg.protocol = match p {
                        ProtocolArg::Loso => Protocol::Loso,
                        ProtocolArg::Lovo => Protocol::Lovo,
                    };
                }
                set(&mut cfg.classifier, *classifier);
                set(&mut cfg.predictions, predictions.clone().map(Some));
                set(&mut cfg.resize, resize.map(Some));
                sample.apply(cfg);
                lbp.apply(cfg);
            }
        }
    }
}

/// Failure classes mapped to exit codes.
pub enum CliError {
    /// Exit 2, with the subcommand synopsis.
    Usage(String),
    /// Exit 1.
    Domain(String),
}

impl From<modesift::Error> for CliError {
    fn from(e: modesift::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.shared.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    cfg.subcommand = cli.command.name().to_string();
    if !cli.shared.input.is_empty() {
        cfg.inputs = cli.shared.input.clone();
    }
    set(&mut cfg.output, cli.shared.output.clone().map(Some));
    set(&mut cfg.seed, cli.shared.seed);
    set(&mut cfg.threads, cli.shared.threads.map(Some));
    set(&mut cfg.log_level, cli.shared.log_level.clone());
    if let Ok(v) = std::env::var("MODESIFT_THREADS") {
        let n = v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("MODESIFT_THREADS must be a positive integer, got {v:?}")))?;
        cfg.threads = Some(n);
    }
    cli.command.apply(&mut cfg);
    cfg.sampling.seed = cfg.seed;
    Ok(cfg)
}

fn usage_exit(subcommand: Option<&str>, message: &str) -> ExitCode {
    let mut cmd = Cli::command();
    cmd.build();
    let target = match subcommand.and_then(|s| cmd.find_subcommand_mut(s)) {
        Some(sub) => sub,
        None => &mut cmd,
    };
    let usage = target.render_usage();
    eprintln!("error: {message}\n\n{usage}\n\nFor more information, try '--help'.");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let name = cli.command.name();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(CliError::Usage(m)) | Err(CliError::Domain(m)) => return usage_exit(Some(name), &m),
    };

    env_logger::Builder::new()
        .parse_filters(&cfg.log_level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    if let Some(n) = cfg.threads {
        if n == 0 {
            return usage_exit(Some(name), "--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }

    match commands::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => usage_exit(Some(name), &m),
        Err(CliError::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
