//! Dataset assembly (images + JSONL manifest) and the answer audit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::prompts::{self, CHOICE_CRITERION, COMPONENT_DEFINITION, LOOP_DEFINITION, QUALITY_CRITERION};
use super::*;
use crate::mask::{load_image, save_image, save_mask, threshold};
use crate::rng;
use crate::synth::{generate_vessel, perturb_disconnect, perturb_holes, perturb_merge, Vessel};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const RECORD_ATTEMPTS: u64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub out_dir: PathBuf,
    pub train_per_kind: usize,
    pub test_per_kind: usize,
    pub seed: u64,
    /// Base generator settings. Tree and loop counts and the noise level are
    /// drawn per record; the test split draws noise from a disjoint range.
    pub synth: VesselParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("dataset"),
            train_per_kind: 10,
            test_per_kind: 0,
            seed: 0,
            synth: VesselParams::default(),
        }
    }
}

impl DatasetConfig {
    fn validate(&self) -> Result<()> {
        if self.train_per_kind + self.test_per_kind == 0 {
            return Err(Error::InvalidConfig("no records requested".into()));
        }
        // Records use up to three trees.
        let probe = VesselParams {
            n_trees: 3,
            ..self.synth.clone()
        };
        probe
            .validate()
            .map_err(|e| Error::InvalidConfig(format!("synth params: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub path: PathBuf,
    pub records: Vec<TaskRecord>,
}

struct Draft {
    record: TaskRecord,
    vessel: Vessel,
    bad: Vec<BinaryMask>,
}

#[derive(Clone, Copy)]
struct SplitRange {
    name: &'static str,
    sigma_lo: f64,
    sigma_hi: f64,
}

fn params_for(
    cfg: &DatasetConfig,
    split: SplitRange,
    rng: &mut rng::Rng,
    trees: std::ops::RangeInclusive<usize>,
    loops: std::ops::RangeInclusive<usize>,
) -> VesselParams {
    let n_trees = rng.random_range(trees);
    let n_loops = rng.random_range(loops);
    VesselParams {
        n_trees,
        n_loops,
        background_noise_sigma: if split.sigma_hi > split.sigma_lo {
            rng.random_range(split.sigma_lo..split.sigma_hi)
        } else {
            split.sigma_lo
        },
        seed: rng.random(),
        ..cfg.synth.clone()
    }
}

fn relabel(record: &mut TaskRecord, from: &str, to: &str) {
    for p in &mut record.images {
        if p == from {
            *p = to.to_string();
        }
    }
    if record.target.as_deref() == Some(from) {
        record.target = Some(to.to_string());
    }
    if record.answer == from {
        record.answer = to.to_string();
    }
}

/// Attempts one record of `kind` whose binary answer (if any) is `want`.
fn draft_record(cfg: &DatasetConfig, split: SplitRange, kind: TaskKind, want: bool, seed: u64) -> Result<Option<Draft>> {
    let mut r = rng::stream(seed);
    let (img, gt, bad0, bad1) = ("img", "gt", "bad0", "bad1");
    let draft = match kind {
        TaskKind::StructureJudgement => {
            let structure = if r.random_bool(0.5) {
                JudgedStructure::Loop
            } else {
                JudgedStructure::MultipleComponents
            };
            let (trees, loops) = match (structure, want) {
                (JudgedStructure::Loop, true) => (1..=2, 1..=2),
                (JudgedStructure::Loop, false) => (1..=2, 0..=0),
                (JudgedStructure::MultipleComponents, true) => (2..=3, 0..=1),
                (JudgedStructure::MultipleComponents, false) => (1..=1, 0..=1),
            };
            let params = params_for(cfg, split, &mut r, trees, loops);
            let vessel = generate_vessel(&params)?;
            let mut record = gen_judgement(
                Asset::new(img, &vessel.image),
                Asset::new(gt, &vessel.mask),
                structure,
                seed,
            )?;
            if record.answer != yes_no(want) {
                return Ok(None);
            }
            record.provenance.params = Some(params);
            Draft {
                record,
                vessel,
                bad: vec![],
            }
        }
        TaskKind::StructureCounting => {
            let structure = if r.random_bool(0.5) {
                CountedStructure::Loops
            } else {
                CountedStructure::Components
            };
            let params = params_for(cfg, split, &mut r, 1..=3, 0..=2);
            let vessel = generate_vessel(&params)?;
            let mut record = gen_counting(
                Asset::new(img, &vessel.image),
                Asset::new(gt, &vessel.mask),
                structure,
                seed,
            )?;
            record.provenance.params = Some(params);
            Draft {
                record,
                vessel,
                bad: vec![],
            }
        }
        TaskKind::QualityJudgement => {
            let params = params_for(cfg, split, &mut r, 1..=2, 0..=1);
            let vessel = generate_vessel(&params)?;
            let pseed = r.random();
            let (candidate, logs) = if want {
                let shifts = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
                let (dx, dy) = shifts[r.random_range(0..shifts.len())];
                (vessel.mask.translated(dx, dy), vec![])
            } else {
                let (m, log) = match r.random_range(0..3) {
                    0 => perturb_merge(&vessel.mask, 1, pseed),
                    1 => perturb_holes(&vessel.mask, 1, pseed),
                    _ => perturb_disconnect(&vessel.mask, r.random_range(1..=2), pseed),
                }?;
                (m, vec![log])
            };
            let mut record = gen_quality(
                Asset::new(img, &vessel.image),
                Asset::new(gt, &vessel.mask),
                Asset::new(bad0, &candidate),
                seed,
            )?;
            if (record.answer == "good") != want {
                return Ok(None);
            }
            record.provenance.params = Some(params);
            record.provenance.perturbations = logs;
            Draft {
                record,
                vessel,
                bad: vec![candidate],
            }
        }
        TaskKind::BetterChoice => {
            let params = params_for(cfg, split, &mut r, 1..=2, 0..=1);
            let vessel = generate_vessel(&params)?;
            let k_better = r.random_range(0..=1);
            let (better, better_log) = perturb_disconnect(&vessel.mask, k_better, r.random())?;
            let (worse, worse_log) = if k_better == 0 && r.random_bool(0.5) {
                perturb_merge(&vessel.mask, 1, r.random())?
            } else {
                perturb_disconnect(&vessel.mask, k_better + r.random_range(1..=2), r.random())?
            };
            // `want` = better mask in slot A.
            let swapped = !want;
            let (a, b, logs) = if swapped {
                (&worse, &better, vec![worse_log, better_log])
            } else {
                (&better, &worse, vec![better_log, worse_log])
            };
            let mut record = match gen_choice(
                Asset::new(img, &vessel.image),
                Asset::new(bad0, a),
                Asset::new(bad1, b),
                Asset::new(gt, &vessel.mask),
                seed,
            ) {
                Ok(rec) => rec,
                Err(Error::RejectedTie { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            if (record.answer == "A") != want {
                return Ok(None);
            }
            record.provenance.params = Some(params);
            record.provenance.swapped = Some(swapped);
            record.provenance.perturbations = logs;
            let bad = vec![a.clone(), b.clone()];
            Draft { record, vessel, bad }
        }
        TaskKind::Refinement => {
            let params = params_for(cfg, split, &mut r, 1..=2, 0..=1);
            let vessel = generate_vessel(&params)?;
            let (imperfect, log) = if r.random_bool(0.7) {
                perturb_disconnect(&vessel.mask, r.random_range(1..=2), r.random())?
            } else {
                perturb_merge(&vessel.mask, 1, r.random())?
            };
            let mut record = gen_refinement(
                Asset::new(img, &vessel.image),
                Asset::new(bad0, &imperfect),
                Asset::new(gt, &vessel.mask),
                seed,
            )?;
            record.provenance.params = Some(params);
            record.provenance.perturbations = vec![log];
            Draft {
                record,
                vessel,
                bad: vec![imperfect],
            }
        }
    };
    Ok(Some(draft))
}

fn write_draft(dir: &Path, id: &str, mut draft: Draft) -> Result<TaskRecord> {
    let img = format!("{id}_img.pgm");
    let gt = format!("{id}_gt.pgm");
    save_image(&draft.vessel.image, dir.join(&img))?;
    save_mask(&draft.vessel.mask, dir.join(&gt))?;
    relabel(&mut draft.record, "img", &img);
    relabel(&mut draft.record, "gt", &gt);
    for (j, mask) in draft.bad.iter().enumerate() {
        let name = format!("{id}_bad{j}.pgm");
        save_mask(mask, dir.join(&name))?;
        relabel(&mut draft.record, &format!("bad{j}"), &name);
    }
    draft.record.provenance.id = id.to_string();
    Ok(draft.record)
}

/// Generates every record, writes its images into `cfg.out_dir` and the
/// manifest to `cfg.out_dir/manifest.jsonl`.
///
/// Binary-answer kinds get an exactly balanced, seed-shuffled label list.
/// Train and test draw from disjoint seed streams and disjoint noise ranges.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sigma = cfg.synth.background_noise_sigma;
    let splits = [
        (
            SplitRange {
                name: "train",
                sigma_lo: sigma,
                sigma_hi: 1.5 * sigma,
            },
            cfg.train_per_kind,
        ),
        (
            SplitRange {
                name: "test",
                sigma_lo: 1.5 * sigma,
                sigma_hi: 2.0 * sigma,
            },
            cfg.test_per_kind,
        ),
    ];
    let mut records = Vec::new();
    for (split, n) in splits {
        let split_seed = rng::split_label(cfg.seed, split.name);
        for kind in TaskKind::ALL {
            let kind_seed = rng::split_label(split_seed, kind.name());
            let mut labels: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
            labels.shuffle(&mut rng::stream(rng::split_label(kind_seed, "labels")));
            for (i, &want) in labels.iter().enumerate() {
                let record_seed = rng::split(kind_seed, i as u64);
                let id = format!("{}_{}_{i:04}", split.name, kind.name());
                let mut draft = None;
                let mut last_err = None;
                for attempt in 0..RECORD_ATTEMPTS {
                    match draft_record(cfg, split, kind, want, rng::split(record_seed, attempt)) {
                        Ok(Some(d)) => {
                            draft = Some(d);
                            break;
                        }
                        Ok(None) => {}
                        Err(e @ (Error::InvalidParams(_) | Error::Io { .. })) => return Err(e),
                        Err(e) => last_err = Some(e.to_string()),
                    }
                }
                let draft = draft.ok_or_else(|| Error::GenerationFailed {
                    attempts: RECORD_ATTEMPTS as usize,
                    reason: format!("{id}: {}", last_err.unwrap_or_else(|| "answer never matched".into())),
                })?;
                let mut record = write_draft(dir, &id, draft)?;
                record.provenance.split = split.name.to_string();
                records.push(record);
            }
        }
    }
    let path = dir.join(MANIFEST_FILE);
    write_manifest(&path, &records)?;
    Ok(Manifest { path, records })
}

fn write_manifest(path: &Path, records: &[TaskRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialise");
        out.write_all(b"\n").expect("vec write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::format(format!("{}:{}", path.display(), i + 1), e.to_string()))
        })
        .collect::<Result<Vec<TaskRecord>>>()?;
    Ok(Manifest {
        path: path.to_path_buf(),
        records,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KindTally {
    pub total: usize,
    pub mismatches: usize,
    pub answers: BTreeMap<String, usize>,
}

impl KindTally {
    /// Share of the most frequent answer.
    pub fn majority_share(&self) -> f64 {
        let max = self.answers.values().copied().max().unwrap_or(0);
        if self.total == 0 {
            0.0
        } else {
            max as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub total: usize,
    /// Indices of records whose stored answer disagrees with the rules.
    pub mismatches: Vec<usize>,
    /// Indices of records whose prompt lacks a required definition or still
    /// holds a placeholder.
    pub malformed_prompts: Vec<usize>,
    pub per_kind: BTreeMap<TaskKind, KindTally>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty() && self.malformed_prompts.is_empty()
    }
}

fn required_sentences(record: &TaskRecord) -> Vec<&'static str> {
    match record.task_kind {
        TaskKind::StructureJudgement => match record.provenance.structure {
            Some(Structure::Judged(JudgedStructure::Loop)) => vec![LOOP_DEFINITION],
            _ => vec![COMPONENT_DEFINITION],
        },
        TaskKind::StructureCounting => match record.provenance.structure {
            Some(Structure::Counted(CountedStructure::Loops)) => vec![LOOP_DEFINITION],
            _ => vec![COMPONENT_DEFINITION],
        },
        TaskKind::QualityJudgement => vec![COMPONENT_DEFINITION, LOOP_DEFINITION, QUALITY_CRITERION],
        TaskKind::BetterChoice => vec![COMPONENT_DEFINITION, LOOP_DEFINITION, CHOICE_CRITERION],
        TaskKind::Refinement => vec![COMPONENT_DEFINITION, LOOP_DEFINITION],
    }
}

fn load_record_mask(dir: &Path, index: usize, rel: &str) -> Result<BinaryMask> {
    let path = dir.join(rel);
    match load_image(&path) {
        Ok(img) => Ok(threshold(&img, 0.5)),
        Err(Error::Io { path, source }) => Err(Error::RecordIo {
            record: index,
            path,
            source,
        }),
        Err(e) => Err(e),
    }
}

fn field<'a>(v: Option<&'a String>, what: &str, index: usize) -> Result<&'a str> {
    v.map(String::as_str)
        .ok_or_else(|| Error::format(format!("record {index}"), format!("missing {what}")))
}

/// Recomputes the answer of `record` from its stored pixels.
fn recompute(dir: &Path, index: usize, record: &TaskRecord) -> Result<String> {
    let target = field(record.target.as_ref(), "target", index)?;
    let image = load_record_mask(dir, index, field(record.images.first(), "image", index)?)?;
    let gt = load_record_mask(dir, index, target)?;
    ensure_same_dims(image.dims(), gt.dims())?;
    let image_at =
        |k: usize| -> Result<BinaryMask> { load_record_mask(dir, index, field(record.images.get(k), "image", index)?) };
    let missing_structure = || Error::format(format!("record {index}"), "missing structure");
    Ok(match record.task_kind {
        TaskKind::StructureJudgement => match record.provenance.structure {
            Some(Structure::Judged(s)) => yes_no(judge(&gt, s)).to_string(),
            _ => return Err(missing_structure()),
        },
        TaskKind::StructureCounting => match record.provenance.structure {
            Some(Structure::Counted(s)) => count(&gt, s).to_string(),
            _ => return Err(missing_structure()),
        },
        TaskKind::QualityJudgement => {
            let good = quality_is_good(&image_at(1)?, &gt)?;
            if good { "good" } else { "poor" }.to_string()
        }
        TaskKind::BetterChoice => match better_mask(&image_at(1)?, &image_at(2)?, &gt) {
            Ok(a) => a.to_string(),
            Err(Error::RejectedTie { .. }) => "tie".to_string(),
            Err(e) => return Err(e),
        },
        TaskKind::Refinement => {
            let imperfect = image_at(1)?;
            let t = betti_numbers(&gt);
            let constraint = prompts::topology_constraint(t.beta0, t.beta1);
            if imperfect != gt && record.prompt.contains(&constraint) {
                target.to_string()
            } else {
                "invalid refinement pair".to_string()
            }
        }
    })
}

/// Re-derives every answer in the manifest from the image files it names.
pub fn verify_answers(manifest_path: impl AsRef<Path>) -> Result<VerifyReport> {
    let manifest = read_manifest(&manifest_path)?;
    let dir = manifest.path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut report = VerifyReport {
        total: manifest.records.len(),
        ..VerifyReport::default()
    };
    for (index, record) in manifest.records.iter().enumerate() {
        let expected = recompute(&dir, index, record)?;
        let tally = report.per_kind.entry(record.task_kind).or_default();
        tally.total += 1;
        *tally.answers.entry(record.answer.clone()).or_default() += 1;
        if expected != record.answer {
            tally.mismatches += 1;
            report.mismatches.push(index);
        }
        if !prompts::is_well_formed(&record.prompt, &required_sentences(record)) {
            report.malformed_prompts.push(index);
        }
    }
    Ok(report)
}
