//! Synthetic vessel-like trees and controlled topological perturbations.
//!
//! Every generator verifies its topological claims with
//! [`betti_numbers`](crate::topology::betti_numbers) and resamples until they
//! hold, so logged deltas are facts about the emitted pixels.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{save_image, save_mask, BinaryMask, GrayImage};
use crate::rng::{self, Rng};
use crate::topology::{betti_numbers, skeletonize, TopologySummary};

const FOREGROUND_LEVEL: f64 = 0.8;
const BACKGROUND_LEVEL: f64 = 0.15;
const GENERATION_ATTEMPTS: u64 = 100;
const PERTURBATION_TRIES: usize = 1000;
const MIN_FOREGROUND_FRACTION: f64 = 0.02;
const MAX_FOREGROUND_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VesselParams {
    pub width: usize,
    pub height: usize,
    pub n_trees: usize,
    pub branch_depth: usize,
    pub branch_prob: f64,
    pub radius_root: f64,
    pub radius_min: f64,
    pub n_loops: usize,
    pub background_noise_sigma: f64,
    pub seed: u64,
}

impl Default for VesselParams {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            n_trees: 1,
            branch_depth: 4,
            branch_prob: 0.8,
            radius_root: 2.5,
            radius_min: 1.0,
            n_loops: 0,
            background_noise_sigma: 0.08,
            seed: 0,
        }
    }
}

impl VesselParams {
    /// A 32x32 configuration used for fast training experiments.
    pub fn small(seed: u64) -> Self {
        Self {
            width: 32,
            height: 32,
            branch_depth: 3,
            radius_root: 1.5,
            radius_min: 1.0,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.radius_min < 1.0 {
            return bad("radius_min must be >= 1");
        }
        if self.radius_root < self.radius_min {
            return bad("radius_root must be >= radius_min");
        }
        if self.branch_depth < 1 {
            return bad("branch_depth must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.branch_prob) {
            return bad("branch_prob must lie in [0, 1]");
        }
        if self.background_noise_sigma.is_nan() || self.background_noise_sigma < 0.0 {
            return bad("background_noise_sigma must be >= 0");
        }
        if self.n_trees == 0 && self.n_loops > 0 {
            return bad("loops need at least one tree");
        }
        let strip = self.width as f64 / self.n_trees.max(1) as f64;
        if strip.min(self.height as f64) < 8.0 * self.radius_root + 8.0 {
            return bad("canvas too small for radius_root");
        }
        Ok(())
    }
}

/// A rendered sample: noisy image, ground-truth mask and its topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Vessel {
    pub image: GrayImage,
    pub mask: BinaryMask,
    pub topology: TopologySummary,
}

#[derive(Debug, Clone, Copy)]
struct CenterPoint {
    x: f64,
    y: f64,
    branch: usize,
}

struct TreeSketch {
    mask: BinaryMask,
    centerline: Vec<CenterPoint>,
}

fn stamp_disk(mask: &mut BinaryMask, cx: f64, cy: f64, r: f64) {
    let (w, h) = mask.dims();
    let x0 = (cx - r).floor().max(0.0) as usize;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil() as isize).min(w as isize - 1);
    let y1 = ((cy + r).ceil() as isize).min(h as isize - 1);
    if x1 < 0 || y1 < 0 {
        return;
    }
    for y in y0..=y1 as usize {
        for x in x0..=x1 as usize {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                mask.set(x, y, true);
            }
        }
    }
}

fn stamp_tube(mask: &mut BinaryMask, a: (f64, f64), b: (f64, f64), r: f64) {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    let steps = (len * 2.0).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        stamp_disk(mask, a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), r);
    }
}

struct Branch {
    x: f64,
    y: f64,
    angle: f64,
    radius: f64,
    length: f64,
    level: usize,
}

/// Sketches one tree confined to the vertical strip `strip` of
/// `params.n_trees` equal strips, so distinct trees never touch.
fn sketch_tree(params: &VesselParams, strip: usize, rng: &mut Rng) -> TreeSketch {
    let strip_w = params.width as f64 / params.n_trees.max(1) as f64;
    let (x_lo, h) = (strip as f64 * strip_w, params.height as f64);
    let w = strip_w;
    let margin = params.radius_root + 2.0;
    let mut mask = BinaryMask::empty(params.width, params.height);
    let mut centerline = Vec::new();
    let turn = Normal::new(0.0, 0.12).expect("valid sigma");

    let sx = rng.random_range(margin..w - margin);
    let sy = rng.random_range(margin..h - margin);
    let toward_center = (h / 2.0 - sy).atan2(w / 2.0 - sx);
    let mut stack = vec![Branch {
        x: sx,
        y: sy,
        angle: toward_center + rng.random_range(-0.5..0.5),
        radius: params.radius_root,
        length: 0.45 * w.min(h),
        level: 0,
    }];
    let mut branch_id = 0;
    while let Some(b) = stack.pop() {
        let id = branch_id;
        branch_id += 1;
        let (mut x, mut y, mut angle) = (b.x, b.y, b.angle);
        let steps = (b.length * 2.0) as usize;
        for _ in 0..steps {
            angle += turn.sample(rng) * 0.5;
            let (nx, ny) = (x + 0.5 * angle.cos(), y + 0.5 * angle.sin());
            if nx < margin || ny < margin || nx > w - margin || ny > h - margin {
                break;
            }
            x = nx;
            y = ny;
            stamp_disk(&mut mask, x_lo + x, y, b.radius);
            centerline.push(CenterPoint {
                x: x_lo + x,
                y,
                branch: id,
            });
        }
        if b.level + 1 < params.branch_depth && rng.random_bool(params.branch_prob) {
            let radius = (b.radius * 0.75).max(params.radius_min);
            for side in [-1.0, 1.0] {
                stack.push(Branch {
                    x,
                    y,
                    angle: angle + side * rng.random_range(0.35..0.8),
                    radius,
                    length: b.length * 0.7,
                    level: b.level + 1,
                });
            }
        }
    }
    TreeSketch { mask, centerline }
}

fn union_into(dst: &mut BinaryMask, src: &BinaryMask) {
    let (w, h) = src.dims();
    for y in 0..h {
        for x in 0..w {
            if src.get(x, y) {
                dst.set(x, y, true);
            }
        }
    }
}

fn add_loops(mask: &mut BinaryMask, trees: &[TreeSketch], params: &VesselParams, rng: &mut Rng) -> bool {
    let mut loops = 0;
    let mut tries = 0;
    while loops < params.n_loops {
        tries += 1;
        if tries > 100 * (params.n_loops + 1) {
            return false;
        }
        let tree = &trees[rng.random_range(0..trees.len())];
        if tree.centerline.len() < 2 {
            continue;
        }
        let p = tree.centerline[rng.random_range(0..tree.centerline.len())];
        let q = tree.centerline[rng.random_range(0..tree.centerline.len())];
        let dist = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
        if p.branch == q.branch || !(4.0..=0.6 * params.width.min(params.height) as f64).contains(&dist) {
            continue;
        }
        let mut candidate = mask.clone();
        stamp_tube(&mut candidate, (p.x, p.y), (q.x, q.y), params.radius_min);
        let t = betti_numbers(&candidate);
        if t.beta0 == params.n_trees && t.beta1 == loops + 1 {
            *mask = candidate;
            loops += 1;
        }
    }
    true
}

fn render_image(mask: &BinaryMask, sigma: f64, rng: &mut Rng) -> GrayImage {
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("valid sigma");
    let data = mask
        .data()
        .iter()
        .map(|&fg| {
            let base = if fg { FOREGROUND_LEVEL } else { BACKGROUND_LEVEL };
            base + if sigma > 0.0 { noise.sample(rng) } else { 0.0 }
        })
        .collect();
    GrayImage::new(mask.width(), mask.height(), data).expect("dims match")
}

/// Renders `n_trees` disjoint branching trees, then joins branch pairs
/// within trees to form `n_loops` loops.
pub fn generate_vessel(params: &VesselParams) -> Result<Vessel> {
    params.validate()?;
    let canvas = (params.width * params.height) as f64;
    let mut last_reason = String::from("no attempt made");
    for attempt in 0..GENERATION_ATTEMPTS {
        let sub = rng::split(params.seed, attempt);
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut union = BinaryMask::empty(params.width, params.height);
        let mut ok = true;
        for t in 0..params.n_trees {
            let mut tree_rng = rng::stream(rng::split(sub, t as u64));
            let tree = sketch_tree(params, t, &mut tree_rng);
            let topo = betti_numbers(&tree.mask);
            if (topo.beta0, topo.beta1) != (1, 0) {
                ok = false;
                last_reason = format!("tree {t} is not a single acyclic component");
                break;
            }
            union_into(&mut union, &tree.mask);
            trees.push(tree);
        }
        if !ok {
            continue;
        }
        let topo = betti_numbers(&union);
        if (topo.beta0, topo.beta1) != (params.n_trees, 0) {
            last_reason = "trees overlap".into();
            continue;
        }
        let mut loop_rng = rng::stream(rng::split_label(sub, "loops"));
        if !add_loops(&mut union, &trees, params, &mut loop_rng) {
            last_reason = "could not insert the requested loops".into();
            continue;
        }
        let frac = union.count() as f64 / canvas;
        if params.n_trees > 0 && !(MIN_FOREGROUND_FRACTION..=MAX_FOREGROUND_FRACTION).contains(&frac) {
            last_reason = format!("foreground fraction {frac:.3} outside sanity band");
            continue;
        }
        let topology = betti_numbers(&union);
        if (topology.beta0, topology.beta1) != (params.n_trees, params.n_loops) {
            last_reason = "final topology check failed".into();
            continue;
        }
        let mut image_rng = rng::stream(rng::split_label(sub, "image"));
        let image = render_image(&union, params.background_noise_sigma, &mut image_rng);
        return Ok(Vessel {
            image,
            mask: union,
            topology,
        });
    }
    Err(Error::GenerationFailed {
        attempts: GENERATION_ATTEMPTS as usize,
        reason: last_reason,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    Disconnect,
    Merge,
    Hole,
    DilateNoise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationLog {
    pub kind: PerturbationKind,
    pub sites: Vec<[usize; 2]>,
    pub expected_beta0_delta: Option<i64>,
    pub expected_beta1_delta: Option<i64>,
}

impl PerturbationLog {
    fn identity(kind: PerturbationKind) -> Self {
        Self {
            kind,
            sites: Vec::new(),
            expected_beta0_delta: Some(0),
            expected_beta1_delta: Some(0),
        }
    }

    /// Whether the logged deltas match the Betti difference between the two
    /// masks. Unknown deltas are not checked.
    pub fn is_consistent(&self, before: &BinaryMask, after: &BinaryMask) -> bool {
        let (b, a) = (betti_numbers(before), betti_numbers(after));
        let d0 = a.beta0 as i64 - b.beta0 as i64;
        let d1 = a.beta1 as i64 - b.beta1 as i64;
        self.expected_beta0_delta.is_none_or(|e| e == d0) && self.expected_beta1_delta.is_none_or(|e| e == d1)
    }
}

fn betti_delta(before: &TopologySummary, after: &TopologySummary) -> (i64, i64) {
    (
        after.beta0 as i64 - before.beta0 as i64,
        after.beta1 as i64 - before.beta1 as i64,
    )
}

fn skeleton_neighbours(skel: &BinaryMask, x: usize, y: usize) -> Vec<(isize, isize)> {
    let mut out = Vec::new();
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            if (dx, dy) != (0, 0) && skel.get_signed(x as isize + dx, y as isize + dy) {
                out.push((x as isize + dx, y as isize + dy));
            }
        }
    }
    out
}

/// Distance from `(x, y)` to the nearest background pixel, searched up to
/// `limit` pixels away.
fn distance_to_background(mask: &BinaryMask, x: usize, y: usize, limit: isize) -> f64 {
    let mut best = limit as f64;
    for dy in -limit..=limit {
        for dx in -limit..=limit {
            if !mask.get_signed(x as isize + dx, y as isize + dy) {
                best = best.min(((dx * dx + dy * dy) as f64).sqrt());
            }
        }
    }
    best
}

fn erase_cut(mask: &mut BinaryMask, cx: usize, cy: usize, tangent: (f64, f64), half_len: f64, half_width: f64) {
    let reach = (half_len + half_width).ceil() as isize + 1;
    let (tx, ty) = tangent;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (x, y) = (cx as isize + dx, cy as isize + dy);
            if !mask.get_signed(x, y) {
                continue;
            }
            let along = dx as f64 * tx + dy as f64 * ty;
            let across = -(dx as f64) * ty + dy as f64 * tx;
            if along.abs() <= half_len && across.abs() <= half_width {
                mask.set(x as usize, y as usize, false);
            }
        }
    }
}

fn far_from(sites: &[[usize; 2]], x: usize, y: usize, min_dist: f64) -> bool {
    sites.iter().all(|s| {
        let (dx, dy) = (s[0] as f64 - x as f64, s[1] as f64 - y as f64);
        (dx * dx + dy * dy).sqrt() >= min_dist
    })
}

/// Erases `k` short vessel segments (2 to 5 px long, full local width), each
/// verified to split one component into two without touching loops.
pub fn perturb_disconnect(mask: &BinaryMask, k: usize, seed: u64) -> Result<(BinaryMask, PerturbationLog)> {
    if k == 0 {
        return Ok((mask.clone(), PerturbationLog::identity(PerturbationKind::Disconnect)));
    }
    let skel = skeletonize(mask);
    let (w, h) = mask.dims();
    let candidates: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| skel.get(x, y) && skeleton_neighbours(&skel, x, y).len() == 2)
        .collect();
    if candidates.len() < k {
        return Err(Error::InsufficientStructure(format!(
            "{} skeleton interior points for {k} cuts",
            candidates.len()
        )));
    }
    let mut rng = rng::stream(seed);
    let mut cur = mask.clone();
    let mut cur_topo = betti_numbers(&cur);
    let mut sites = Vec::with_capacity(k);
    for _ in 0..PERTURBATION_TRIES {
        if sites.len() == k {
            break;
        }
        let (x, y) = candidates[rng.random_range(0..candidates.len())];
        let half_len = rng.random_range(2..=5) as f64 / 2.0;
        if !cur.get(x, y) || !far_from(&sites, x, y, 8.0) {
            continue;
        }
        let nb = skeleton_neighbours(&skel, x, y);
        let (tx, ty) = ((nb[1].0 - nb[0].0) as f64, (nb[1].1 - nb[0].1) as f64);
        let norm = (tx * tx + ty * ty).sqrt();
        if norm == 0.0 {
            continue;
        }
        let half_width = distance_to_background(&cur, x, y, 8) + 1.5;
        let mut candidate = cur.clone();
        erase_cut(&mut candidate, x, y, (tx / norm, ty / norm), half_len, half_width);
        let topo = betti_numbers(&candidate);
        if betti_delta(&cur_topo, &topo) == (1, 0) {
            cur = candidate;
            cur_topo = topo;
            sites.push([x, y]);
        }
    }
    if sites.len() < k {
        return Err(Error::InsufficientStructure(format!(
            "placed {} of {k} verified cuts in {PERTURBATION_TRIES} tries",
            sites.len()
        )));
    }
    let log = PerturbationLog {
        kind: PerturbationKind::Disconnect,
        sites,
        expected_beta0_delta: Some(k as i64),
        expected_beta1_delta: Some(0),
    };
    debug_assert!(log.is_consistent(mask, &cur));
    Ok((cur, log))
}

/// Bresenham line between two pixels, endpoints included.
fn line_pixels(a: (isize, isize), b: (isize, isize)) -> Vec<(isize, isize)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = vec![(x, y)];
    while (x, y) != b {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        out.push((x, y));
    }
    out
}

fn boundary_pixels(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = mask.dims();
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| {
            mask.get(x, y)
                && [(0, -1), (-1, 0), (1, 0), (0, 1)]
                    .iter()
                    .any(|&(dx, dy)| !mask.get_signed(x as isize + dx, y as isize + dy))
        })
        .collect()
}

/// Draws `k` one-pixel bridges of length at most 6 px across background gaps.
/// Each bridge is kept only if it either merges two components or closes one
/// loop; the log records the realised totals.
pub fn perturb_merge(mask: &BinaryMask, k: usize, seed: u64) -> Result<(BinaryMask, PerturbationLog)> {
    if k == 0 {
        return Ok((mask.clone(), PerturbationLog::identity(PerturbationKind::Merge)));
    }
    let boundary = boundary_pixels(mask);
    if boundary.is_empty() {
        return Err(Error::InsufficientStructure("mask has no boundary".into()));
    }
    let mut rng = rng::stream(seed);
    let mut cur = mask.clone();
    let start = betti_numbers(mask);
    let mut cur_topo = start;
    let mut sites = Vec::with_capacity(k);
    for _ in 0..PERTURBATION_TRIES {
        if sites.len() == k {
            break;
        }
        let (px, py) = boundary[rng.random_range(0..boundary.len())];
        let angle = rng.random_range(0.0..2.0 * PI);
        let len = rng.random_range(2.0..=6.0f64);
        let qx = (px as f64 + len * angle.cos()).round() as isize;
        let qy = (py as f64 + len * angle.sin()).round() as isize;
        if !cur.get_signed(qx, qy) {
            continue;
        }
        let line = line_pixels((px as isize, py as isize), (qx, qy));
        let gap: Vec<_> = line.iter().filter(|&&(x, y)| !cur.get_signed(x, y)).collect();
        if gap.is_empty() {
            continue;
        }
        let mut candidate = cur.clone();
        for &&(x, y) in &gap {
            candidate.set(x as usize, y as usize, true);
        }
        let topo = betti_numbers(&candidate);
        let delta = betti_delta(&cur_topo, &topo);
        if delta == (-1, 0) || delta == (0, 1) {
            let mid = line[line.len() / 2];
            cur = candidate;
            cur_topo = topo;
            sites.push([mid.0 as usize, mid.1 as usize]);
        }
    }
    if sites.len() < k {
        return Err(Error::InsufficientStructure(format!(
            "placed {} of {k} verified bridges in {PERTURBATION_TRIES} tries",
            sites.len()
        )));
    }
    let (d0, d1) = betti_delta(&start, &cur_topo);
    Ok((
        cur,
        PerturbationLog {
            kind: PerturbationKind::Merge,
            sites,
            expected_beta0_delta: Some(d0),
            expected_beta1_delta: Some(d1),
        },
    ))
}

/// Deletes `k` interior pixels (all eight neighbours foreground), each
/// opening one hole.
pub fn perturb_holes(mask: &BinaryMask, k: usize, seed: u64) -> Result<(BinaryMask, PerturbationLog)> {
    if k == 0 {
        return Ok((mask.clone(), PerturbationLog::identity(PerturbationKind::Hole)));
    }
    let (w, h) = mask.dims();
    let interior = |m: &BinaryMask, x: usize, y: usize| {
        m.get(x, y) && (-1..=1isize).all(|dy| (-1..=1isize).all(|dx| m.get_signed(x as isize + dx, y as isize + dy)))
    };
    let mut candidates: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| interior(mask, x, y))
        .collect();
    if candidates.len() < k {
        return Err(Error::InsufficientStructure(format!(
            "{} interior pixels for {k} holes",
            candidates.len()
        )));
    }
    let mut rng = rng::stream(seed);
    candidates.shuffle(&mut rng);
    let mut cur = mask.clone();
    let mut cur_topo = betti_numbers(&cur);
    let mut sites = Vec::with_capacity(k);
    for &(x, y) in candidates.iter().take(PERTURBATION_TRIES) {
        if sites.len() == k {
            break;
        }
        if !interior(&cur, x, y) {
            continue;
        }
        let mut candidate = cur.clone();
        candidate.set(x, y, false);
        let topo = betti_numbers(&candidate);
        if betti_delta(&cur_topo, &topo) == (0, 1) {
            cur = candidate;
            cur_topo = topo;
            sites.push([x, y]);
        }
    }
    if sites.len() < k {
        return Err(Error::InsufficientStructure(format!(
            "placed {} of {k} verified holes",
            sites.len()
        )));
    }
    Ok((
        cur,
        PerturbationLog {
            kind: PerturbationKind::Hole,
            sites,
            expected_beta0_delta: Some(0),
            expected_beta1_delta: Some(k as i64),
        },
    ))
}

/// Grows `k` radius-1 blobs on random boundary pixels. Topology may or may
/// not change; the realised deltas are logged.
pub fn perturb_dilate_noise(mask: &BinaryMask, k: usize, seed: u64) -> Result<(BinaryMask, PerturbationLog)> {
    if k == 0 {
        return Ok((mask.clone(), PerturbationLog::identity(PerturbationKind::DilateNoise)));
    }
    let boundary = boundary_pixels(mask);
    if boundary.is_empty() {
        return Err(Error::InsufficientStructure("mask has no boundary".into()));
    }
    let mut rng = rng::stream(seed);
    let mut cur = mask.clone();
    let mut sites = Vec::with_capacity(k);
    for _ in 0..k {
        let (x, y) = boundary[rng.random_range(0..boundary.len())];
        stamp_disk(&mut cur, x as f64, y as f64, 1.0);
        sites.push([x, y]);
    }
    let (d0, d1) = betti_delta(&betti_numbers(mask), &betti_numbers(&cur));
    Ok((
        cur,
        PerturbationLog {
            kind: PerturbationKind::DilateNoise,
            sites,
            expected_beta0_delta: Some(d0),
            expected_beta1_delta: Some(d1),
        },
    ))
}

pub fn apply_perturbation(
    kind: PerturbationKind,
    mask: &BinaryMask,
    k: usize,
    seed: u64,
) -> Result<(BinaryMask, PerturbationLog)> {
    match kind {
        PerturbationKind::Disconnect => perturb_disconnect(mask, k, seed),
        PerturbationKind::Merge => perturb_merge(mask, k, seed),
        PerturbationKind::Hole => perturb_holes(mask, k, seed),
        PerturbationKind::DilateNoise => perturb_dilate_noise(mask, k, seed),
    }
}

/// One manifest line for `tubetopo synth` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub id: String,
    pub image: String,
    pub gt: String,
    pub topology: TopologySummary,
    pub params: VesselParams,
    pub bad: Vec<BadMaskRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadMaskRecord {
    pub path: String,
    pub log: PerturbationLog,
}

/// Writes `<id>_img.pgm`, `<id>_gt.pgm` and `<id>_bad<j>.pgm` into `dir`
/// and returns the manifest record with paths relative to `dir`.
pub fn write_sample(
    dir: &Path,
    id: &str,
    params: &VesselParams,
    vessel: &Vessel,
    bad: &[(BinaryMask, PerturbationLog)],
) -> Result<SynthRecord> {
    let image = format!("{id}_img.pgm");
    let gt = format!("{id}_gt.pgm");
    save_image(&vessel.image, dir.join(&image))?;
    save_mask(&vessel.mask, dir.join(&gt))?;
    let mut records = Vec::with_capacity(bad.len());
    for (j, (mask, log)) in bad.iter().enumerate() {
        let path = format!("{id}_bad{j}.pgm");
        save_mask(mask, dir.join(&path))?;
        records.push(BadMaskRecord { path, log: log.clone() });
    }
    Ok(SynthRecord {
        id: id.to_string(),
        image,
        gt,
        topology: vessel.topology,
        params: params.clone(),
        bad: records,
    })
}
