//! Training triples, Euler sampling and refinement evaluation.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::model::{Condition, VelocityModel};
use super::LatentGrid;
use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, load_image, load_mask, threshold, BinaryMask, GrayImage};
use crate::metrics::{aggregate_reports, csv_row, metric_report, pooled_report, render_csv, MetricReport, CSV_HEADER};
use crate::rng;
use crate::synth::{generate_vessel, perturb_disconnect, perturb_holes, perturb_merge, VesselParams};
use crate::taskgen::{read_manifest, TaskKind};
use crate::topology::{betti_numbers, TopologySummary};

/// An (image, imperfect mask, ground truth) refinement example.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub image: GrayImage,
    pub imperfect: BinaryMask,
    pub gt: BinaryMask,
    /// Topology of `gt`, fed to the model as the requested structure.
    pub target: TopologySummary,
}

impl Triple {
    pub fn new(image: GrayImage, imperfect: BinaryMask, gt: BinaryMask) -> Result<Self> {
        let target = betti_numbers(&gt);
        let t = Self {
            image,
            imperfect,
            gt,
            target,
        };
        t.check_dims()?;
        Ok(t)
    }

    pub(crate) fn check_dims(&self) -> Result<()> {
        ensure_same_dims(self.image.dims(), self.gt.dims())?;
        ensure_same_dims(self.imperfect.dims(), self.gt.dims())
    }

    pub fn condition(&self) -> Condition<'_> {
        Condition {
            image: &self.image,
            imperfect: &self.imperfect,
            target: self.target,
        }
    }
}

/// `n` synthetic triples: each ground truth is a fresh vessel and the
/// imperfect mask a verified disconnection, bridge or hole.
pub fn synth_triples(base: &VesselParams, n: usize, seed: u64) -> Result<Vec<Triple>> {
    (0..n)
        .map(|i| {
            let s = rng::split(seed, i as u64);
            let mut r = rng::stream(rng::split_label(s, "perturb"));
            let vessel = generate_vessel(&VesselParams {
                seed: rng::split_label(s, "vessel"),
                ..base.clone()
            })?;
            let pseed: u64 = r.random();
            let imperfect = match r.random_range(0..10) {
                0..6 => perturb_disconnect(&vessel.mask, r.random_range(1..=2), pseed),
                6..8 => perturb_merge(&vessel.mask, 1, pseed),
                _ => perturb_holes(&vessel.mask, 1, pseed),
            }
            .or_else(|_| perturb_disconnect(&vessel.mask, 1, pseed))?
            .0;
            Triple::new(vessel.image, imperfect, vessel.mask)
        })
        .collect()
}

/// Refinement records of a task manifest as triples.
pub fn triples_from_manifest(path: impl AsRef<Path>) -> Result<Vec<Triple>> {
    let manifest = read_manifest(&path)?;
    let dir = manifest.path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.task_kind == TaskKind::Refinement)
        .map(|(i, r)| {
            let missing = || Error::format(format!("record {i}"), "refinement record needs image, mask and target");
            let (img, bad) = match r.images.as_slice() {
                [img, bad, ..] => (img, bad),
                _ => return Err(missing()),
            };
            let gt = r.target.as_ref().ok_or_else(missing)?;
            Triple::new(
                load_image(dir.join(img))?,
                load_mask(dir.join(bad))?,
                load_mask(dir.join(gt))?,
            )
        })
        .collect()
}

/// Euler integration of the learned flow from noise (`tau = 0`) to data.
pub fn sample(model: &VelocityModel, cond: &Condition<'_>, steps: usize, seed: u64) -> Result<GrayImage> {
    if steps == 0 {
        return Err(Error::InvalidParams("sampling needs at least one step".into()));
    }
    let (w, h) = cond.dims();
    let mut r = rng::stream(seed);
    let mut z = LatentGrid::new(w, h, 1, (0..w * h).map(|_| r.sample(StandardNormal)).collect())?;
    let dt = 1.0 / steps as f64;
    for k in 0..steps {
        let v = model.velocity(&z, k as f64 * dt, cond)?;
        for (zi, vi) in z.values_mut().iter_mut().zip(v.values()) {
            *zi += dt * vi;
        }
    }
    Ok(z.decode())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    /// Imperfect input versus ground truth, averaged per image.
    pub input: MetricReport,
    /// Thresholded model output versus ground truth, averaged per image.
    pub refined: MetricReport,
    pub input_pooled: MetricReport,
    pub refined_pooled: MetricReport,
    pub per_sample: Vec<(MetricReport, MetricReport)>,
    pub refined_masks: Vec<BinaryMask>,
}

impl RefineReport {
    /// Header plus `input` and `refined` mean rows.
    pub fn summary_csv(&self) -> String {
        format!(
            "{CSV_HEADER}\n{}\n{}\n",
            csv_row("input", &self.input),
            csv_row("refined", &self.refined)
        )
    }

    /// Per-sample rows of the refined masks with mean and pooled rows.
    pub fn refined_csv(&self) -> String {
        let rows: Vec<(String, MetricReport)> = self
            .per_sample
            .iter()
            .enumerate()
            .map(|(i, (_, r))| (i.to_string(), *r))
            .collect();
        render_csv(&rows, Some(&self.refined_pooled)).expect("report is non-empty")
    }
}

/// Refines every triple (sample, then threshold at 0.5) and scores input and
/// output against ground truth.
pub fn refine_eval(model: &VelocityModel, triples: &[Triple], steps: usize, seed: u64) -> Result<RefineReport> {
    if triples.is_empty() {
        return Err(Error::EmptyInput("no triples to refine"));
    }
    let mut per_sample = Vec::with_capacity(triples.len());
    let mut refined_masks = Vec::with_capacity(triples.len());
    for (i, t) in triples.iter().enumerate() {
        let out = sample(model, &t.condition(), steps, rng::split(seed, i as u64))?;
        let refined = threshold(&out, 0.5);
        per_sample.push((metric_report(&t.imperfect, &t.gt)?, metric_report(&refined, &t.gt)?));
        refined_masks.push(refined);
    }
    let inputs: Vec<MetricReport> = per_sample.iter().map(|p| p.0).collect();
    let outputs: Vec<MetricReport> = per_sample.iter().map(|p| p.1).collect();
    let in_pairs: Vec<_> = triples.iter().map(|t| (&t.imperfect, &t.gt)).collect();
    let out_pairs: Vec<_> = refined_masks.iter().zip(triples).map(|(m, t)| (m, &t.gt)).collect();
    Ok(RefineReport {
        input: aggregate_reports(&inputs)?,
        refined: aggregate_reports(&outputs)?,
        input_pooled: pooled_report(&in_pairs)?,
        refined_pooled: pooled_report(&out_pairs)?,
        per_sample,
        refined_masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowgen::Architecture;

    #[test]
    fn triples_are_imperfect_and_consistent() {
        let triples = synth_triples(&VesselParams::small(0), 6, 2).unwrap();
        for t in &triples {
            assert_ne!(t.imperfect, t.gt);
            assert_eq!(t.target, betti_numbers(&t.gt));
        }
        assert_eq!(triples, synth_triples(&VesselParams::small(0), 6, 2).unwrap());
    }

    #[test]
    fn single_step_is_one_euler_update() {
        let t = &synth_triples(&VesselParams::small(0), 1, 0).unwrap()[0];
        let model = VelocityModel::new(Architecture::new(4), 1).unwrap();
        let cond = t.condition();
        let out = sample(&model, &cond, 1, 7).unwrap();
        let mut r = rng::stream(7);
        let (w, h) = cond.dims();
        let eps = LatentGrid::new(w, h, 1, (0..w * h).map(|_| r.sample(StandardNormal)).collect()).unwrap();
        let v = model.velocity(&eps, 0.0, &cond).unwrap();
        let want: Vec<f64> = eps
            .values()
            .iter()
            .zip(v.values())
            .map(|(e, v)| (e + v).clamp(0.0, 1.0))
            .collect();
        assert_eq!(out.data(), &want[..]);
        assert_eq!(out, sample(&model, &cond, 1, 7).unwrap());
        assert!(sample(&model, &cond, 0, 7).is_err());
    }

    #[test]
    fn untrained_model_still_reports() {
        let triples = synth_triples(&VesselParams::small(0), 3, 4).unwrap();
        let model = VelocityModel::new(Architecture::new(4), 1).unwrap();
        let rep = refine_eval(&model, &triples, 4, 0).unwrap();
        for r in [rep.input, rep.refined, rep.input_pooled, rep.refined_pooled] {
            assert!([r.dice, r.cl_dice, r.beta0_num, r.beta0_mat]
                .iter()
                .all(|v| v.is_finite()));
        }
        assert_eq!(rep.refined_csv().lines().count(), 1 + 3 + 2);
        assert!(rep.summary_csv().contains("\ninput,"));
        assert!(refine_eval(&model, &[], 4, 0).is_err());
    }
}
