//! Prompt templates. Each task kind has several paraphrases; the seed picks
//! one. Definitions of every queried term are spliced in verbatim.

use super::{CountedStructure, JudgedStructure, TaskKind};

pub const MODALITY: &str = "synthetic color fundus photography (CFP) vessel image";

pub const COMPONENT_DEFINITION: &str = "A connected component is a maximal set of vessel pixels in which \
every pair of pixels is joined by a path of vessel pixels, where pixels sharing an edge or a corner are adjacent.";

pub const LOOP_DEFINITION: &str = "A loop is a closed vessel cycle that completely encloses a background region; \
background pixels are adjacent only when they share an edge.";

pub const QUALITY_CRITERION: &str = "A mask has good topology if and only if it has exactly as many connected \
components and exactly as many loops as the true vessel structure; otherwise its topology is poor.";

pub const CHOICE_CRITERION: &str = "The topology error of a mask is the number of its connected components and \
of the true vessel components that cannot be paired one-to-one with an overlapping component of the other, \
plus the absolute difference between its loop count and the true loop count. The better mask has the smaller \
topology error.";

const JUDGEMENT: [&str; 3] = [
    "This is a {modality}. {definitions} Does the vessel structure in the image contain {structure}? Answer yes or no.",
    "You are given a {modality}. {definitions} Determine whether {structure} is present in the vessel tree. Reply with yes or no.",
    "Image modality: {modality}. {definitions} Question: is there {structure} in the depicted vessels? Respond yes or no.",
];

const COUNTING: [&str; 3] = [
    "This is a {modality}. {definitions} How many {structure} does the vessel structure contain? Answer with a single integer.",
    "You are given a {modality}. {definitions} Count the {structure} in the vessel tree and reply with one integer.",
    "Image modality: {modality}. {definitions} Question: what is the number of {structure} in the depicted vessels? Respond with an integer.",
];

const QUALITY: [&str; 3] = [
    "The first image is a {modality} and the second is a candidate vessel mask. {definitions} {criterion} Is the topology of the mask good or poor?",
    "You are given a {modality} together with a predicted segmentation mask. {definitions} {criterion} Judge the mask's topology: answer good or poor.",
    "Image modality: {modality}; a vessel mask follows it. {definitions} {criterion} Reply with good or poor.",
];

const CHOICE: [&str; 3] = [
    "The first image is a {modality}; mask A and mask B follow. {definitions} {criterion} Which mask has better topology? Answer A or B.",
    "You are given a {modality} and two candidate vessel masks, A then B. {definitions} {criterion} Select the mask with better topology (A or B).",
    "Image modality: {modality}. Two masks are shown after it: A and B. {definitions} {criterion} Reply with the letter of the better mask.",
];

const REFINEMENT: [&str; 3] = [
    "The first image is a {modality} and the second is a preliminary vessel mask with imperfect topology. {definitions} Refine the mask so that it has {constraint}.",
    "You are given a {modality} and an imperfect segmentation of its vessels. {definitions} Generate a corrected vessel mask with {constraint}.",
    "Image modality: {modality}; a coarse vessel mask follows it. {definitions} Produce a refined mask that preserves topology: {constraint}.",
];

pub const TEMPLATE_COUNT: usize = 3;

pub fn template(kind: TaskKind, index: usize) -> &'static str {
    let pool = match kind {
        TaskKind::StructureJudgement => &JUDGEMENT,
        TaskKind::StructureCounting => &COUNTING,
        TaskKind::QualityJudgement => &QUALITY,
        TaskKind::BetterChoice => &CHOICE,
        TaskKind::Refinement => &REFINEMENT,
    };
    pool[index % TEMPLATE_COUNT]
}

pub fn judged_phrase(s: JudgedStructure) -> &'static str {
    match s {
        JudgedStructure::MultipleComponents => "more than one connected component",
        JudgedStructure::Loop => "at least one loop",
    }
}

pub fn counted_phrase(s: CountedStructure) -> &'static str {
    match s {
        CountedStructure::Components => "connected components",
        CountedStructure::Loops => "loops",
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// `"1 connected component, 0 loops"`.
pub fn topology_constraint(components: usize, loops: usize) -> String {
    format!(
        "{}, {}",
        plural(components, "connected component"),
        plural(loops, "loop")
    )
}

#[derive(Default)]
pub struct Fill<'a> {
    pub definitions: Vec<&'a str>,
    pub structure: Option<&'a str>,
    pub criterion: Option<&'a str>,
    pub constraint: Option<String>,
}

pub fn render(kind: TaskKind, template_index: usize, fill: &Fill<'_>) -> String {
    let mut out = template(kind, template_index)
        .replace("{modality}", MODALITY)
        .replace("{definitions}", &fill.definitions.join(" "));
    if let Some(s) = fill.structure {
        out = out.replace("{structure}", s);
    }
    if let Some(c) = fill.criterion {
        out = out.replace("{criterion}", c);
    }
    if let Some(c) = &fill.constraint {
        out = out.replace("{constraint}", c);
    }
    out
}

/// A prompt is well formed when no placeholder survived and every required
/// definition or criterion sentence appears verbatim.
pub fn is_well_formed(prompt: &str, required: &[&str]) -> bool {
    !prompt.contains('{')
        && !prompt.contains('}')
        && prompt.contains(MODALITY)
        && required.iter().all(|r| prompt.contains(r))
}
