//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use tubetopo::flowgen::{
    load_checkpoint, refine_eval, synth_triples, train, triples_from_manifest, TrainConfig, Triple,
};
use tubetopo::metrics::{metric_report, pooled_report, render_csv, MetricReport};
use tubetopo::rng;
use tubetopo::synth::{apply_perturbation, generate_vessel, write_sample, PerturbationKind, VesselParams};
use tubetopo::taskgen::{build_dataset, verify_answers, DatasetConfig};
use tubetopo::{betti_numbers, load_mask, save_mask, Error};

use crate::config::{self, FileConfig};
use crate::{
    Cli, Command, MetricsArgs, PerturbArg, RefineArgs, SynthArgs, TaskgenArgs, TopologyArgs, TrainArgs, TripleSource,
};

pub const SYNTH_MANIFEST: &str = "synth.jsonl";

#[derive(Debug)]
pub enum CliError {
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (CliError::Data(m) | CliError::Internal(m)) = self;
        // Keep diagnostics on one line.
        write!(f, "{}", m.replace('\n', " "))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::GenerationFailed { .. } | Error::NonFiniteLoss { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type CmdResult = Result<(), CliError>;

pub fn run(cli: &Cli) -> CmdResult {
    let file = config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, &file),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Taskgen(a) => cmd_taskgen(a, &file),
        Command::Train(a) => cmd_train(a, &file),
        Command::Refine(a) => cmd_refine(a, &file),
        Command::Topology(a) => cmd_topology(a),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn perturbation_kind(p: PerturbArg) -> PerturbationKind {
    match p {
        PerturbArg::Disconnect => PerturbationKind::Disconnect,
        PerturbArg::Merge => PerturbationKind::Merge,
        PerturbArg::Hole => PerturbationKind::Hole,
        PerturbArg::DilateNoise => PerturbationKind::DilateNoise,
    }
}

fn cmd_synth(a: &SynthArgs, file: &FileConfig) -> CmdResult {
    let base = a.vessel.apply(file.synth.clone().unwrap_or_default());
    let seed = a.seed.or(file.seed).unwrap_or(base.seed);
    create_dir(&a.out)?;
    let mut manifest = String::new();
    for i in 0..a.count {
        let sample_seed = rng::split(seed, i as u64);
        let params = VesselParams {
            seed: sample_seed,
            ..base.clone()
        };
        let vessel = generate_vessel(&params)?;
        let bad = a
            .perturb
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                apply_perturbation(
                    perturbation_kind(p),
                    &vessel.mask,
                    a.k,
                    rng::split(sample_seed, j as u64),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let record = write_sample(&a.out, &format!("{i:04}"), &params, &vessel, &bad)?;
        manifest.push_str(&serde_json::to_string(&record).map_err(|e| CliError::Internal(e.to_string()))?);
        manifest.push('\n');
    }
    write_file(&a.out.join(SYNTH_MANIFEST), manifest.as_bytes())
}

/// `(name, pred, gt)` triples of file paths.
fn metric_pairs(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>, CliError> {
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    match (pred.is_dir(), gt.is_dir()) {
        (false, false) => Ok(vec![(stem(gt), pred.to_path_buf(), gt.to_path_buf())]),
        (true, true) => {
            let mut names: Vec<_> = fs::read_dir(gt)
                .map_err(|e| CliError::Data(format!("{}: {e}", gt.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
                .collect();
            names.sort();
            if names.is_empty() {
                return Err(CliError::Data(format!("{}: no .pgm masks", gt.display())));
            }
            Ok(names
                .into_iter()
                .map(|g| {
                    let name = g.file_name().expect("file path");
                    (stem(&g), pred.join(name), g.clone())
                })
                .collect())
        }
        _ => Err(CliError::Data(
            "--pred and --gt must both be files or both be directories".into(),
        )),
    }
}

fn cmd_metrics(a: &MetricsArgs) -> CmdResult {
    let mut rows: Vec<(String, MetricReport)> = Vec::new();
    let mut masks = Vec::new();
    for (name, p, g) in metric_pairs(&a.pred, &a.gt)? {
        let pred = load_mask(&p)?;
        let gt = load_mask(&g)?;
        rows.push((name, metric_report(&pred, &gt)?));
        masks.push((pred, gt));
    }
    let pairs: Vec<_> = masks.iter().map(|(p, g)| (p, g)).collect();
    let csv = render_csv(&rows, Some(&pooled_report(&pairs)?))?;
    emit(a.out.as_deref(), &csv)
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Data(format!("stdout: {e}")))
        }
    }
}

fn cmd_taskgen(a: &TaskgenArgs, file: &FileConfig) -> CmdResult {
    if let Some(manifest) = &a.verify {
        let report = verify_answers(manifest)?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        println!("{json}");
        if !report.is_clean() {
            return Err(CliError::Data(format!(
                "{} answer mismatches, {} malformed prompts",
                report.mismatches.len(),
                report.malformed_prompts.len()
            )));
        }
        return Ok(());
    }
    let mut cfg = file.dataset.clone().unwrap_or_default();
    if let Some(out) = &a.out {
        cfg.out_dir = out.clone();
    }
    if let Some(n) = a.train_per_kind {
        cfg.train_per_kind = n;
    }
    if let Some(n) = a.test_per_kind {
        cfg.test_per_kind = n;
    }
    if let Some(s) = a.seed.or(file.seed) {
        cfg.seed = s;
    }
    cfg.synth = a.vessel.apply(file.synth.clone().unwrap_or(cfg.synth));
    let manifest = build_dataset(&DatasetConfig { ..cfg })?;
    println!("{} records -> {}", manifest.records.len(), manifest.path.display());
    Ok(())
}

fn load_triples(src: &TripleSource, base: VesselParams, seed: u64) -> Result<Vec<Triple>, CliError> {
    match (&src.manifest, src.synth) {
        (Some(path), _) => {
            let triples = triples_from_manifest(path)?;
            if triples.is_empty() {
                return Err(CliError::Data(format!("{}: no refinement records", path.display())));
            }
            Ok(triples)
        }
        (None, Some(n)) => Ok(synth_triples(&base, n, seed)?),
        (None, None) => unreachable!("clap enforces one triple source"),
    }
}

fn flow_base(file: &FileConfig, args: &crate::VesselArgs) -> VesselParams {
    args.apply(file.synth.clone().unwrap_or_else(|| VesselParams::small(0)))
}

fn cmd_train(a: &TrainArgs, file: &FileConfig) -> CmdResult {
    let mut cfg = file.train.clone().unwrap_or_default();
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if a.no_adaptive {
        cfg.lambda = 0.0;
    }
    if let Some(v) = a.patch_size {
        cfg.patch_size = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.seed.or(file.seed) {
        cfg.seed = v;
    }
    cfg.checkpoint_path = Some(a.out.clone());
    let triples = load_triples(
        &a.source,
        flow_base(file, &a.vessel),
        rng::split_label(cfg.seed, "triples"),
    )?;
    let outcome = train(&TrainConfig { ..cfg }, &triples)?;
    println!(
        "trained {} steps on {} triples, final loss {}",
        outcome.losses.len(),
        triples.len(),
        outcome.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_refine(a: &RefineArgs, file: &FileConfig) -> CmdResult {
    let model = load_checkpoint(&a.checkpoint)?.model()?;
    let steps = a.steps.unwrap_or(file.refine.steps);
    let seed = a.seed.or(file.seed).unwrap_or(file.refine.seed);
    let triples = load_triples(&a.source, flow_base(file, &a.vessel), rng::split_label(seed, "triples"))?;
    let report = refine_eval(&model, &triples, steps, seed)?;
    if let Some(dir) = &a.masks {
        create_dir(dir)?;
        for (i, m) in report.refined_masks.iter().enumerate() {
            save_mask(m, dir.join(format!("refined_{i:04}.pgm")))?;
        }
    }
    if let Some(out) = &a.out {
        write_file(out, report.refined_csv().as_bytes())?;
    }
    emit(None, &report.summary_csv())
}

fn cmd_topology(a: &TopologyArgs) -> CmdResult {
    let mask = load_mask(&a.mask)?;
    println!("{}", betti_numbers(&mask));
    Ok(())
}
