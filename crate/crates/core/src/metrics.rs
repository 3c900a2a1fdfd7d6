//! Overlap and topology metrics for predicted versus reference masks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, BinaryMask};
use crate::topology::{beta0_matching_error, beta0_number_error, skeletonize};

/// Per-pair (or averaged) evaluation row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dice: f64,
    pub cl_dice: f64,
    pub beta0_num: f64,
    pub beta0_mat: f64,
}

/// `2|P∩G| / (|P| + |G|)`, with two empty masks scoring 1.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let inter = pred.intersection_count(gt)?;
    let total = pred.count() + gt.count();
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    })
}

/// Topology precision and sensitivity: the fraction of each mask's skeleton
/// lying inside the other mask. `None` for an empty skeleton.
pub fn topology_precision_sensitivity(pred: &BinaryMask, gt: &BinaryMask) -> Result<(Option<f64>, Option<f64>)> {
    ensure_same_dims(pred.dims(), gt.dims())?;
    let ratio = |skel: &BinaryMask, other: &BinaryMask| {
        let n = skel.count();
        (n > 0).then(|| skel.intersection_count(other).expect("same dims") as f64 / n as f64)
    };
    let sp = skeletonize(pred);
    let sg = skeletonize(gt);
    Ok((ratio(&sp, gt), ratio(&sg, pred)))
}

/// Harmonic mean of topology precision and sensitivity.
///
/// Both inputs empty scores 1; an empty skeleton on only one side scores 0.
pub fn cl_dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let (prec, sens) = topology_precision_sensitivity(pred, gt)?;
    Ok(match (prec, sens) {
        (None, None) => 1.0,
        (Some(p), Some(s)) if p + s > 0.0 => 2.0 * p * s / (p + s),
        _ => 0.0,
    })
}

pub fn metric_report(pred: &BinaryMask, gt: &BinaryMask) -> Result<MetricReport> {
    Ok(MetricReport {
        dice: dice(pred, gt)?,
        cl_dice: cl_dice(pred, gt)?,
        beta0_num: beta0_number_error(pred, gt)? as f64,
        beta0_mat: beta0_matching_error(pred, gt)? as f64,
    })
}

/// Unweighted mean of every field.
pub fn aggregate_reports(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no metric reports to aggregate"));
    }
    let n = reports.len() as f64;
    let sum = reports.iter().fold([0.0; 4], |acc, r| {
        [
            acc[0] + r.dice,
            acc[1] + r.cl_dice,
            acc[2] + r.beta0_num,
            acc[3] + r.beta0_mat,
        ]
    });
    Ok(MetricReport {
        dice: sum[0] / n,
        cl_dice: sum[1] / n,
        beta0_num: sum[2] / n,
        beta0_mat: sum[3] / n,
    })
}

/// Dice and clDice computed from pixel totals pooled over all pairs, with
/// the beta0 errors averaged per pair. Complements the per-image mean.
pub fn pooled_report(pairs: &[(&BinaryMask, &BinaryMask)]) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no mask pairs to pool"));
    }
    let (mut inter, mut total) = (0usize, 0usize);
    let (mut sp_in, mut sp_n, mut sg_in, mut sg_n) = (0usize, 0usize, 0usize, 0usize);
    let (mut num, mut mat) = (0.0, 0.0);
    for (pred, gt) in pairs {
        inter += pred.intersection_count(gt)?;
        total += pred.count() + gt.count();
        let sp = skeletonize(pred);
        let sg = skeletonize(gt);
        sp_in += sp.intersection_count(gt)?;
        sp_n += sp.count();
        sg_in += sg.intersection_count(pred)?;
        sg_n += sg.count();
        num += beta0_number_error(pred, gt)? as f64;
        mat += beta0_matching_error(pred, gt)? as f64;
    }
    let dice = if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    };
    let cl_dice = match (sp_n, sg_n) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => {
            let p = sp_in as f64 / sp_n as f64;
            let s = sg_in as f64 / sg_n as f64;
            if p + s > 0.0 {
                2.0 * p * s / (p + s)
            } else {
                0.0
            }
        }
    };
    let n = pairs.len() as f64;
    Ok(MetricReport {
        dice,
        cl_dice,
        beta0_num: num / n,
        beta0_mat: mat / n,
    })
}

pub const CSV_HEADER: &str = "sample,dice,cldice,beta0_num,beta0_mat";

/// One CSV row; ratios as percentages, all values with two decimals.
pub fn csv_row(sample: &str, r: &MetricReport) -> String {
    format!(
        "{sample},{:.2},{:.2},{:.2},{:.2}",
        100.0 * r.dice,
        100.0 * r.cl_dice,
        r.beta0_num,
        r.beta0_mat
    )
}

/// Per-sample rows followed by a `mean(per-image)` row and, if supplied, a
/// `pooled` row.
pub fn render_csv(rows: &[(String, MetricReport)], pooled: Option<&MetricReport>) -> Result<String> {
    let reports: Vec<MetricReport> = rows.iter().map(|(_, r)| *r).collect();
    let mean = aggregate_reports(&reports)?;
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    for (name, r) in rows {
        writeln!(out, "{}", csv_row(name, r)).unwrap();
    }
    writeln!(out, "{}", csv_row("mean(per-image)", &mean)).unwrap();
    if let Some(p) = pooled {
        writeln!(out, "{}", csv_row("pooled", p)).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(s: &str) -> BinaryMask {
        BinaryMask::from_ascii(s).unwrap()
    }

    fn random_mask(w: usize, h: usize, seed: u64, density: u64) -> BinaryMask {
        let bits = (0..w * h)
            .map(|i| crate::rng::split(seed, i as u64) % 100 < density)
            .collect();
        BinaryMask::new(w, h, bits).unwrap()
    }

    #[test]
    fn dice_cases() {
        let a = mask("##..\n##..");
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = mask("..##\n..##");
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let e = BinaryMask::empty(4, 2);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(dice(&a, &e).unwrap(), 0.0);
        // |P| = |G| = 100 with 50 shared pixels.
        let mut p = BinaryMask::empty(150, 1);
        let mut g = BinaryMask::empty(150, 1);
        for x in 0..100 {
            p.set(x, 0, true);
            g.set(x + 50, 0, true);
        }
        assert_eq!(dice(&p, &g).unwrap(), 0.5);
        assert!(dice(&a, &BinaryMask::empty(3, 3)).is_err());
    }

    #[test]
    fn cl_dice_two_thirds() {
        // gt: a 1-px horizontal line of 10 pixels (its own skeleton).
        // pred: the left half of that line, so the pred skeleton lies inside
        // gt (Tprec = 1) and half the gt skeleton lies inside pred
        // (Tsens = 0.5).
        let gt = mask(
            "............
             .##########.
             ............",
        );
        let pred = mask(
            "............
             .#####......
             ............",
        );
        let (p, s) = topology_precision_sensitivity(&pred, &gt).unwrap();
        // Brute-force pixel counts.
        let sp = skeletonize(&pred);
        let sg = skeletonize(&gt);
        assert_eq!(
            p.unwrap(),
            sp.intersection_count(&gt).unwrap() as f64 / sp.count() as f64
        );
        assert_eq!(p.unwrap(), 1.0);
        assert_eq!(
            s.unwrap(),
            sg.intersection_count(&pred).unwrap() as f64 / sg.count() as f64
        );
        assert_eq!(s.unwrap(), 0.5);
        assert!((cl_dice(&pred, &gt).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cl_dice_conventions() {
        let a = mask("....\n.##.\n....");
        let e = BinaryMask::empty(4, 3);
        assert_eq!(cl_dice(&a, &a).unwrap(), 1.0);
        assert_eq!(cl_dice(&e, &e).unwrap(), 1.0);
        assert_eq!(cl_dice(&a, &e).unwrap(), 0.0);
        assert_eq!(cl_dice(&e, &a).unwrap(), 0.0);
        let b = mask("#...\n....\n...#");
        assert_eq!(cl_dice(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn report_cases() {
        let gt = mask("#####.\n......\n.#####");
        let r = metric_report(&gt, &gt).unwrap();
        assert_eq!((r.dice, r.cl_dice, r.beta0_num, r.beta0_mat), (1.0, 1.0, 0.0, 0.0));
        let a = mask("##....");
        let b = mask("....##");
        let r = metric_report(&a, &b).unwrap();
        assert_eq!((r.dice, r.cl_dice, r.beta0_num, r.beta0_mat), (0.0, 0.0, 0.0, 2.0));
        let cut = mask("##.##.\n......\n.#####");
        let r = metric_report(&cut, &gt).unwrap();
        assert_eq!(r.beta0_num, 1.0);
        assert!(r.dice < 1.0);
    }

    #[test]
    fn aggregation() {
        assert!(aggregate_reports(&[]).is_err());
        let r0 = MetricReport {
            dice: 0.0,
            cl_dice: 0.25,
            beta0_num: 1.0,
            beta0_mat: 3.0,
        };
        let r1 = MetricReport {
            dice: 1.0,
            cl_dice: 0.5,
            beta0_num: 3.0,
            beta0_mat: 5.0,
        };
        assert_eq!(aggregate_reports(&[r0]).unwrap(), r0);
        let m = aggregate_reports(&[r0, r1]).unwrap();
        assert_eq!(m.dice, 0.5);
        assert_eq!(m.beta0_num, 2.0);
        assert_eq!(aggregate_reports(&[r1; 7]).unwrap(), r1);
    }

    #[test]
    fn csv_layout() {
        let r = MetricReport {
            dice: 1.0,
            cl_dice: 0.5,
            beta0_num: 0.0,
            beta0_mat: 2.0,
        };
        let csv = render_csv(&[("a".into(), r)], Some(&r)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "a,100.00,50.00,0.00,2.00");
        assert_eq!(lines[2], "mean(per-image),100.00,50.00,0.00,2.00");
        assert_eq!(lines[3], "pooled,100.00,50.00,0.00,2.00");
    }

    proptest! {
        #[test]
        fn metric_invariants(seed in any::<u64>(), w in 2usize..12, h in 2usize..12, da in 5u64..60, db in 5u64..60) {
            let a = random_mask(w, h, seed, da);
            let b = random_mask(w, h, seed ^ 0xABCD, db);
            let d = dice(&a, &b).unwrap();
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
            let c = cl_dice(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!((c - cl_dice(&b, &a).unwrap()).abs() < 1e-12);
            if !a.is_empty() {
                prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
                prop_assert_eq!(cl_dice(&a, &a).unwrap(), 1.0);
            }
            // Dropping pred pixels outside gt never lowers Dice.
            let mut trimmed = a.clone();
            for y in 0..h {
                for x in 0..w {
                    if a.get(x, y) && !b.get(x, y) && (x + y) % 2 == 0 {
                        trimmed.set(x, y, false);
                    }
                }
            }
            prop_assert!(dice(&trimmed, &b).unwrap() >= d);
            let num = beta0_number_error(&a, &b).unwrap();
            let mat = beta0_matching_error(&a, &b).unwrap();
            prop_assert_eq!(num, beta0_number_error(&b, &a).unwrap());
            prop_assert_eq!(mat, beta0_matching_error(&b, &a).unwrap());
            if mat == 0 {
                prop_assert_eq!(num, 0);
            }
        }
    }
}
