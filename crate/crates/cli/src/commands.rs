//! One adapter per subcommand. Tabular results go to a file in the output
//! directory when one is given, to stdout otherwise.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use modesift::analysis::{
    gamma_percentage_curve, mode_frequencies, profile_from_amplitudes, spectral_histogram, temporal_profile,
    ProfileMapping,
};
use modesift::dmdsp::{gamma_sweep, select_percentage, write_sweep_csv};
use modesift::eval::{evaluate_predictions, read_predictions_csv, run_experiment, write_predictions_csv, CorpusManifest};
use modesift::features::{lbptop, write_feature_csv, FeatureRow};
use modesift::sampling;
use modesift::seqio::{load_sequence, resize, to_snapshots, write_sequence, SequenceFormat};
use modesift::tim;
use modesift::{decompose, DmdDecomposition, FrameSequence};
use rayon::prelude::*;

use crate::config::{ClassifierKind, ProfileKind, RunConfig, RUN_CONFIG_FILE};
use crate::CliError;

type CmdResult = Result<(), CliError>;

pub fn run(cfg: &RunConfig) -> CmdResult {
    match cfg.subcommand.as_str() {
        "ingest" => ingest(cfg),
        "dmd" => dmd(cfg),
        "dmdsp-sweep" => dmdsp_sweep(cfg),
        "tim" => tim_cmd(cfg),
        "sample" => sample(cfg),
        "spectrum" => spectrum(cfg),
        "temporal" => temporal(cfg),
        "gamma-curve" => gamma_curve(cfg),
        "lbptop" => lbptop_cmd(cfg),
        "evaluate" => evaluate(cfg),
        other => Err(CliError::Usage(format!("unknown subcommand {other:?}"))),
    }?;
    if let Some(dir) = &cfg.output {
        write_text(&dir.join(RUN_CONFIG_FILE), &cfg.to_json())?;
    }
    Ok(())
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Domain(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn output_dir(cfg: &RunConfig) -> Result<Option<&Path>, CliError> {
    match &cfg.output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn required_output(cfg: &RunConfig) -> Result<&Path, CliError> {
    output_dir(cfg)?.ok_or_else(|| CliError::Usage("--output is required for this subcommand".into()))
}

/// Writes through `f` into `dir/name`, or to stdout without a directory.
fn emit<F>(dir: Option<&Path>, name: &str, f: F) -> CmdResult
where
    F: FnOnce(&mut dyn Write) -> modesift::Result<()>,
{
    match dir {
        Some(dir) => {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| io_err(&path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush().map_err(|e| CliError::Domain(format!("stdout: {e}")))
        }
    }
}

fn inputs(cfg: &RunConfig) -> Result<&[PathBuf], CliError> {
    if cfg.inputs.is_empty() {
        return Err(CliError::Usage("--input is required".into()));
    }
    Ok(&cfg.inputs)
}

fn single_input(cfg: &RunConfig) -> Result<&Path, CliError> {
    match inputs(cfg)? {
        [one] => Ok(one),
        many => Err(CliError::Usage(format!("--input takes exactly one sequence here, got {}", many.len()))),
    }
}

fn load(path: &Path) -> Result<FrameSequence, CliError> {
    Ok(load_sequence(path, SequenceFormat::infer(path))?)
}

/// Loads every input in parallel, keeping input order. Duplicate stems
/// would overwrite each other's outputs and are rejected.
fn load_all(cfg: &RunConfig) -> Result<Vec<FrameSequence>, CliError> {
    let paths = inputs(cfg)?;
    let seqs: Vec<FrameSequence> = paths.par_iter().map(|p| load(p)).collect::<Result<_, _>>()?;
    let mut ids: Vec<&str> = seqs.iter().map(|s| s.source_id()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Usage(format!("two inputs share the name {:?}", w[0])));
    }
    Ok(seqs)
}

fn decompose_seq(seq: &FrameSequence, cfg: &RunConfig) -> Result<DmdDecomposition, CliError> {
    Ok(decompose(&to_snapshots(seq)?, cfg.rank_tol)?)
}

fn ingest(cfg: &RunConfig) -> CmdResult {
    let dir = required_output(cfg)?;
    load_all(cfg)?.par_iter().try_for_each(|seq| {
        let seq = match cfg.resize {
            Some((r, c)) => resize(seq, r, c)?,
            None => seq.clone(),
        };
        write_sequence(&seq, &dir.join(format!("{}.msq", seq.source_id())), SequenceFormat::RawTensor)?;
        log::info!("ingested {} ({} frames)", seq.source_id(), seq.n_frames());
        Ok(())
    })
}

fn dmd(cfg: &RunConfig) -> CmdResult {
    let seq = load(single_input(cfg)?)?;
    let d = decompose_seq(&seq, cfg)?;
    let dir = output_dir(cfg)?;
    if let Some(dir) = dir {
        let json = serde_json::to_string_pretty(&d.manifest()).map_err(|e| CliError::Domain(e.to_string()))?;
        write_text(&dir.join("dmd.json"), &json)?;
    }
    emit(dir, "modes.csv", |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "mode",
            "mu_re",
            "mu_im",
            "alpha_re",
            "alpha_im",
            "alpha_abs",
            "frequency_hz",
            "growth_rate",
        ])?;
        for (i, (f, (mu, a))) in mode_frequencies(&d)
            .iter()
            .zip(d.eigenvalues().iter().zip(d.amplitudes()))
            .enumerate()
        {
            w.write_record([
                i.to_string(),
                mu.re.to_string(),
                mu.im.to_string(),
                a.re.to_string(),
                a.im.to_string(),
                a.norm().to_string(),
                f.frequency_hz.to_string(),
                f.growth_rate.to_string(),
            ])?;
        }
        w.flush().map_err(|source| modesift::Error::Io { path: "modes.csv".into(), source })
    })
}

fn sweep(cfg: &RunConfig, seq: &FrameSequence) -> Result<(DmdDecomposition, Vec<modesift::dmdsp::SparsityRecord>), CliError> {
    let d = decompose_seq(seq, cfg)?;
    let grid = cfg.sampling.gamma_grid.values()?;
    let records = gamma_sweep(&d, &grid, &cfg.sampling.sweep)?;
    let unconverged = records.iter().filter(|r| !r.admm_converged).count();
    if unconverged > 0 {
        log::warn!("ADMM hit the iteration cap at {unconverged} of {} gamma values", records.len());
    }
    Ok((d, records))
}

fn dmdsp_sweep(cfg: &RunConfig) -> CmdResult {
    let seq = load(single_input(cfg)?)?;
    let (_, records) = sweep(cfg, &seq)?;
    emit(output_dir(cfg)?, "sweep.csv", |out| write_sweep_csv(&records, out))
}

fn gamma_curve(cfg: &RunConfig) -> CmdResult {
    let seq = load(single_input(cfg)?)?;
    let (_, records) = sweep(cfg, &seq)?;
    let curve = gamma_percentage_curve(&records)?;
    if !curve.monotonicity_violations.is_empty() {
        log::warn!(
            "preserved percentage increases with gamma at {} grid point(s)",
            curve.monotonicity_violations.len()
        );
    }
    emit(output_dir(cfg)?, "gamma_curve.csv", |out| curve.write_csv(out))
}

fn tim_cmd(cfg: &RunConfig) -> CmdResult {
    let dir = required_output(cfg)?;
    load_all(cfg)?.par_iter().try_for_each(|seq| {
        let n_out = cfg.tim_frames.unwrap_or(seq.n_frames());
        let out = tim::synthesize(&tim::fit(seq)?, n_out)?;
        write_sequence(&out, &dir.join(format!("{}.msq", seq.source_id())), SequenceFormat::RawTensor)?;
        Ok(())
    })
}

fn sample(cfg: &RunConfig) -> CmdResult {
    let dir = required_output(cfg)?;
    let seqs = load_all(cfg)?;
    seqs.par_iter().enumerate().try_for_each(|(i, seq)| {
        let mut scfg = cfg.sampling.clone();
        scfg.seed = scfg.seed.wrapping_add(i as u64);
        let out = sampling::apply(seq, &scfg)?;
        let id = seq.source_id();
        write_sequence(&out.sequence, &dir.join(format!("{id}.msq")), SequenceFormat::RawTensor)?;
        out.report.write_json(&dir.join(format!("{id}.json")))?;
        log::info!("{id}: {} -> {} frames", out.report.n_in, out.report.n_out);
        Ok(())
    })
}

fn spectrum(cfg: &RunConfig) -> CmdResult {
    let seqs = load_all(cfg)?;
    let decomps: Vec<DmdDecomposition> = seqs
        .par_iter()
        .map(|s| decompose_seq(s, cfg))
        .collect::<Result<_, _>>()?;
    let hist = spectral_histogram(&decomps, cfg.bin_width)?;
    emit(output_dir(cfg)?, "spectrum.csv", |out| hist.write_csv(out))
}

fn temporal(cfg: &RunConfig) -> CmdResult {
    let seq = load(single_input(cfg)?)?;
    let n_f = seq.n_frames();
    let profile = match cfg.profile {
        ProfileKind::Sparse => {
            let (_, records) = sweep(cfg, &seq)?;
            let rec = select_percentage(&records, cfg.sampling.percent)?;
            profile_from_amplitudes(
                &rec.alpha_polished,
                n_f,
                n_f,
                &ProfileMapping::SparseMask(rec.structure.clone()),
            )?
        }
        ProfileKind::Uniform => {
            let out = sampling::uniform_sample(&seq, cfg.sampling.percent)?;
            let d = decompose_seq(&out.sequence, cfg)?;
            temporal_profile(&d, n_f, &ProfileMapping::UniformGrid)?
        }
    };
    emit(output_dir(cfg)?, "temporal.csv", |out| profile.write_csv(out))
}

fn lbptop_cmd(cfg: &RunConfig) -> CmdResult {
    let seqs = load_all(cfg)?;
    let rows: Vec<FeatureRow> = seqs
        .par_iter()
        .map(|seq| {
            Ok(FeatureRow {
                sample_id: seq.source_id().to_string(),
                label: String::new(),
                subject_id: String::new(),
                values: lbptop(seq, &cfg.lbp)?.vector,
            })
        })
        .collect::<Result<_, CliError>>()?;
    emit(output_dir(cfg)?, "features.csv", |out| write_feature_csv(&rows, out))
}

fn evaluate(cfg: &RunConfig) -> CmdResult {
    let manifest_path = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| CliError::Usage("--manifest is required".into()))?;
    let manifest = CorpusManifest::read_csv(manifest_path)?;
    let report = match cfg.classifier {
        ClassifierKind::Reference => {
            let exp = modesift::eval::ExperimentConfig {
                sampling: cfg.sampling.clone(),
                resize: cfg.resize,
                lbp: cfg.lbp,
                protocol: cfg.protocol,
                classifier: cfg.kernel,
            };
            run_experiment(&manifest, &exp)?
        }
        ClassifierKind::Import => {
            let path = cfg
                .predictions
                .as_ref()
                .ok_or_else(|| CliError::Usage("--classifier import needs --predictions FILE".into()))?;
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            evaluate_predictions(&manifest, &read_predictions_csv(file)?, cfg.protocol)?
        }
    };
    for f in &report.failures {
        log::warn!("sample {} failed at {}: {}", f.sample_id, f.stage, f.message);
    }
    let json = report.to_json()?;
    match output_dir(cfg)? {
        Some(dir) => {
            write_text(&dir.join("report.json"), &json)?;
            write_text(&dir.join("report.md"), &report.to_markdown())?;
            emit(Some(dir), "predictions.csv", |out| write_predictions_csv(&report.predictions, out))
        }
        None => {
            println!("{json}");
            Ok(())
        }
    }
}
