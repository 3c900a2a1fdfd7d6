//! Topology-centric question/answer records whose answers are derived by
//! rules over mask pixels.

mod dataset;
pub mod prompts;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, BinaryMask, GrayImage};
use crate::synth::{PerturbationLog, VesselParams};
use crate::topology::{beta0_matching_error, beta0_number_error, betti_numbers, count_loops};

pub use dataset::{
    build_dataset, read_manifest, verify_answers, DatasetConfig, KindTally, Manifest, VerifyReport, MANIFEST_FILE,
};

use prompts::{Fill, CHOICE_CRITERION, COMPONENT_DEFINITION, LOOP_DEFINITION, QUALITY_CRITERION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Refinement,
    StructureJudgement,
    StructureCounting,
    QualityJudgement,
    BetterChoice,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Refinement,
        TaskKind::StructureJudgement,
        TaskKind::StructureCounting,
        TaskKind::QualityJudgement,
        TaskKind::BetterChoice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Refinement => "refinement",
            TaskKind::StructureJudgement => "structure_judgement",
            TaskKind::StructureCounting => "structure_counting",
            TaskKind::QualityJudgement => "quality_judgement",
            TaskKind::BetterChoice => "better_choice",
        }
    }

    /// Kinds whose answers are one of two labels.
    pub fn is_binary(self) -> bool {
        matches!(
            self,
            TaskKind::StructureJudgement | TaskKind::QualityJudgement | TaskKind::BetterChoice
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgedStructure {
    /// More than one connected component.
    MultipleComponents,
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountedStructure {
    Components,
    Loops,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Judged(JudgedStructure),
    Counted(CountedStructure),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub id: String,
    pub split: String,
    pub seed: u64,
    pub template: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub structure: Option<Structure>,
    /// For better-choice records: whether the candidates were swapped when
    /// assigned to slots A and B.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub swapped: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<VesselParams>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub perturbations: Vec<PerturbationLog>,
}

/// One manifest line. Paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_kind: TaskKind,
    pub images: Vec<String>,
    pub prompt: String,
    pub answer: String,
    pub target: Option<String>,
    pub provenance: Provenance,
}

/// A value paired with the path it is stored under.
#[derive(Debug, Clone)]
pub struct Asset<'a, T> {
    pub path: &'a str,
    pub data: &'a T,
}

impl<'a, T> Asset<'a, T> {
    pub fn new(path: &'a str, data: &'a T) -> Self {
        Self { path, data }
    }
}

fn template_index(seed: u64) -> usize {
    (crate::rng::split_label(seed, "template") % prompts::TEMPLATE_COUNT as u64) as usize
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

// Rule engine. These are the single source of truth for answers, shared by
// generation and verification.

pub fn judge(mask: &BinaryMask, structure: JudgedStructure) -> bool {
    let t = betti_numbers(mask);
    match structure {
        JudgedStructure::MultipleComponents => t.beta0 > 1,
        JudgedStructure::Loop => t.beta1 > 0,
    }
}

pub fn count(mask: &BinaryMask, structure: CountedStructure) -> usize {
    let t = betti_numbers(mask);
    match structure {
        CountedStructure::Components => t.beta0,
        CountedStructure::Loops => t.beta1,
    }
}

/// Good iff the candidate matches the reference in component and loop count.
pub fn quality_is_good(candidate: &BinaryMask, gt: &BinaryMask) -> Result<bool> {
    Ok(beta0_number_error(candidate, gt)? == 0 && count_loops(candidate) == count_loops(gt))
}

/// `beta0_matching_error(m, gt) + |loops(m) - loops(gt)|`.
pub fn choice_score(mask: &BinaryMask, gt: &BinaryMask) -> Result<usize> {
    Ok(beta0_matching_error(mask, gt)? + count_loops(mask).abs_diff(count_loops(gt)))
}

/// `"A"` or `"B"` for the strictly better mask.
pub fn better_mask(a: &BinaryMask, b: &BinaryMask, gt: &BinaryMask) -> Result<&'static str> {
    let (sa, sb) = (choice_score(a, gt)?, choice_score(b, gt)?);
    match sa.cmp(&sb) {
        std::cmp::Ordering::Less => Ok("A"),
        std::cmp::Ordering::Greater => Ok("B"),
        std::cmp::Ordering::Equal => Err(Error::RejectedTie { score: sa }),
    }
}

fn check_dims(reference: (usize, usize), others: &[(usize, usize)]) -> Result<()> {
    others.iter().try_for_each(|d| ensure_same_dims(reference, *d))
}

pub fn gen_judgement(
    image: Asset<'_, GrayImage>,
    mask: Asset<'_, BinaryMask>,
    structure: JudgedStructure,
    seed: u64,
) -> Result<TaskRecord> {
    check_dims(image.data.dims(), &[mask.data.dims()])?;
    let template = template_index(seed);
    let definitions = match structure {
        JudgedStructure::MultipleComponents => vec![COMPONENT_DEFINITION],
        JudgedStructure::Loop => vec![LOOP_DEFINITION],
    };
    let prompt = prompts::render(
        TaskKind::StructureJudgement,
        template,
        &Fill {
            definitions,
            structure: Some(prompts::judged_phrase(structure)),
            ..Fill::default()
        },
    );
    Ok(TaskRecord {
        task_kind: TaskKind::StructureJudgement,
        images: vec![image.path.to_string()],
        prompt,
        answer: yes_no(judge(mask.data, structure)).to_string(),
        target: Some(mask.path.to_string()),
        provenance: Provenance {
            seed,
            template,
            structure: Some(Structure::Judged(structure)),
            ..Provenance::default()
        },
    })
}

pub fn gen_counting(
    image: Asset<'_, GrayImage>,
    mask: Asset<'_, BinaryMask>,
    structure: CountedStructure,
    seed: u64,
) -> Result<TaskRecord> {
    check_dims(image.data.dims(), &[mask.data.dims()])?;
    let template = template_index(seed);
    let definitions = match structure {
        CountedStructure::Components => vec![COMPONENT_DEFINITION],
        CountedStructure::Loops => vec![LOOP_DEFINITION],
    };
    let prompt = prompts::render(
        TaskKind::StructureCounting,
        template,
        &Fill {
            definitions,
            structure: Some(prompts::counted_phrase(structure)),
            ..Fill::default()
        },
    );
    Ok(TaskRecord {
        task_kind: TaskKind::StructureCounting,
        images: vec![image.path.to_string()],
        prompt,
        answer: count(mask.data, structure).to_string(),
        target: Some(mask.path.to_string()),
        provenance: Provenance {
            seed,
            template,
            structure: Some(Structure::Counted(structure)),
            ..Provenance::default()
        },
    })
}

pub fn gen_quality(
    image: Asset<'_, GrayImage>,
    gt: Asset<'_, BinaryMask>,
    candidate: Asset<'_, BinaryMask>,
    seed: u64,
) -> Result<TaskRecord> {
    check_dims(image.data.dims(), &[gt.data.dims(), candidate.data.dims()])?;
    let template = template_index(seed);
    let prompt = prompts::render(
        TaskKind::QualityJudgement,
        template,
        &Fill {
            definitions: vec![COMPONENT_DEFINITION, LOOP_DEFINITION],
            criterion: Some(QUALITY_CRITERION),
            ..Fill::default()
        },
    );
    let good = quality_is_good(candidate.data, gt.data)?;
    Ok(TaskRecord {
        task_kind: TaskKind::QualityJudgement,
        images: vec![image.path.to_string(), candidate.path.to_string()],
        prompt,
        answer: if good { "good" } else { "poor" }.to_string(),
        target: Some(gt.path.to_string()),
        provenance: Provenance {
            seed,
            template,
            ..Provenance::default()
        },
    })
}

pub fn gen_choice(
    image: Asset<'_, GrayImage>,
    mask_a: Asset<'_, BinaryMask>,
    mask_b: Asset<'_, BinaryMask>,
    gt: Asset<'_, BinaryMask>,
    seed: u64,
) -> Result<TaskRecord> {
    check_dims(
        image.data.dims(),
        &[mask_a.data.dims(), mask_b.data.dims(), gt.data.dims()],
    )?;
    let answer = better_mask(mask_a.data, mask_b.data, gt.data)?;
    let template = template_index(seed);
    let prompt = prompts::render(
        TaskKind::BetterChoice,
        template,
        &Fill {
            definitions: vec![COMPONENT_DEFINITION, LOOP_DEFINITION],
            criterion: Some(CHOICE_CRITERION),
            ..Fill::default()
        },
    );
    Ok(TaskRecord {
        task_kind: TaskKind::BetterChoice,
        images: vec![image.path.to_string(), mask_a.path.to_string(), mask_b.path.to_string()],
        prompt,
        answer: answer.to_string(),
        target: Some(gt.path.to_string()),
        provenance: Provenance {
            seed,
            template,
            ..Provenance::default()
        },
    })
}

pub fn gen_refinement(
    image: Asset<'_, GrayImage>,
    imperfect: Asset<'_, BinaryMask>,
    gt: Asset<'_, BinaryMask>,
    seed: u64,
) -> Result<TaskRecord> {
    check_dims(image.data.dims(), &[imperfect.data.dims(), gt.data.dims()])?;
    if imperfect.data == gt.data {
        return Err(Error::DegenerateInput("imperfect mask equals the ground truth".into()));
    }
    let template = template_index(seed);
    let t = betti_numbers(gt.data);
    let prompt = prompts::render(
        TaskKind::Refinement,
        template,
        &Fill {
            definitions: vec![COMPONENT_DEFINITION, LOOP_DEFINITION],
            constraint: Some(prompts::topology_constraint(t.beta0, t.beta1)),
            ..Fill::default()
        },
    );
    Ok(TaskRecord {
        task_kind: TaskKind::Refinement,
        images: vec![image.path.to_string(), imperfect.path.to_string()],
        prompt,
        answer: gt.path.to_string(),
        target: Some(gt.path.to_string()),
        provenance: Provenance {
            seed,
            template,
            ..Provenance::default()
        },
    })
}
