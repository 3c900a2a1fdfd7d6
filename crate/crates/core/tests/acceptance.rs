//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng as _;
use rand_distr::StandardNormal;
use tubetopo::flowgen::{
    interpolate, predict_clean, refine_eval, synth_triples, target_velocity, token_weights, train, weighted_flow_loss,
    weighted_flow_loss_grad, LatentGrid, TokenWeightMap, TrainConfig,
};
use tubetopo::rng;
use tubetopo::synth::{generate_vessel, perturb_disconnect, perturb_holes, perturb_merge, VesselParams};
use tubetopo::taskgen::{build_dataset, verify_answers, DatasetConfig, TaskKind};
use tubetopo::{
    beta0_matching_error, beta0_number_error, betti_numbers, cl_dice, dice, label_components, skeletonize, BinaryMask,
    Connectivity, GrayImage,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- oracles

/// Union-find over 8-neighbour foreground pairs; returns a root per pixel.
fn union_find_labels(m: &BinaryMask) -> Vec<Option<usize>> {
    let (w, h) = m.dims();
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            for (dx, dy) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if m.get_signed(nx, ny) {
                    let a = find(&mut parent, y * w + x);
                    let b = find(&mut parent, ny as usize * w + nx as usize);
                    parent[a] = b;
                }
            }
        }
    }
    (0..w * h).map(|i| m.data()[i].then(|| find(&mut parent, i))).collect()
}

/// Background components (4-connected) that do not reach the border.
fn bounded_background_components(m: &BinaryMask) -> usize {
    let (w, h) = m.dims();
    let mut seen = vec![false; w * h];
    let mut bounded = 0;
    for start in 0..w * h {
        if m.data()[start] || seen[start] {
            continue;
        }
        let mut touches_border = false;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                touches_border = true;
            }
            let mut push = |j: usize| {
                if !m.data()[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
        if !touches_border {
            bounded += 1;
        }
    }
    bounded
}

/// Euler number from 2x2 bit-quad counts (8-connected foreground).
fn bit_quad_euler(m: &BinaryMask) -> i64 {
    let (w, h) = m.dims();
    let (mut q1, mut q3, mut qd) = (0i64, 0i64, 0i64);
    for y in -1..h as isize {
        for x in -1..w as isize {
            let a = m.get_signed(x, y);
            let b = m.get_signed(x + 1, y);
            let c = m.get_signed(x, y + 1);
            let d = m.get_signed(x + 1, y + 1);
            match [a, b, c, d].iter().filter(|&&v| v).count() {
                1 => q1 += 1,
                3 => q3 += 1,
                2 if a == d => qd += 1,
                _ => {}
            }
        }
    }
    (q1 - q3 - 2 * qd) / 4
}

fn same_partition(m: &BinaryMask) -> Option<String> {
    let lab = label_components(m, Connectivity::Eight);
    let oracle = union_find_labels(m);
    let roots: std::collections::HashSet<_> = oracle.iter().flatten().collect();
    if roots.len() != lab.count() {
        return Some(format!("count {} vs oracle {}", lab.count(), roots.len()));
    }
    let mut map = std::collections::HashMap::new();
    for (i, o) in oracle.iter().enumerate() {
        let l = lab.labels()[i];
        match o {
            None if l != 0 => return Some("background pixel labelled".into()),
            Some(root) if l == 0 || *map.entry(*root).or_insert(l) != l => {
                return Some("partition differs".into());
            }
            _ => {}
        }
    }
    let t = betti_numbers(m);
    let chi = bit_quad_euler(m);
    let holes = bounded_background_components(m);
    if t.beta0 as i64 - t.beta1 as i64 != chi || t.euler != chi {
        return Some(format!("beta0-beta1 != chi ({t} vs {chi})"));
    }
    if t.beta1 != holes {
        return Some(format!("beta1 {} vs bounded background {holes}", t.beta1));
    }
    None
}

fn random_mask(r: &mut rng::Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::new(w, h, (0..w * h).map(|_| r.random_bool(density)).collect()).unwrap()
}

fn random_vessel_params(r: &mut rng::Rng, seed: u64) -> VesselParams {
    VesselParams {
        width: 96,
        height: 96,
        n_trees: r.random_range(1..=3),
        n_loops: r.random_range(0..=2),
        radius_root: 2.0,
        seed,
        ..VesselParams::default()
    }
}

// ------------------------------------------------------------ criteria

fn c1_topology_oracle() -> Outcome {
    for bits in 0u32..1 << 16 {
        let m = BinaryMask::new(4, 4, (0..16).map(|i| bits >> i & 1 == 1).collect()).unwrap();
        if let Some(why) = same_partition(&m) {
            return outcome(false, format!("4x4 mask {bits:#06x}: {why}"));
        }
    }
    let mut r = rng::stream(1);
    for i in 0..10_000 {
        let density = r.random_range(0.2..0.8);
        let m = random_mask(&mut r, 16, 16, density);
        if let Some(why) = same_partition(&m) {
            return outcome(false, format!("16x16 mask #{i}: {why}"));
        }
    }
    outcome(
        true,
        "65536 exhaustive 4x4 + 10000 random 16x16 masks agree with union-find, bit-quad Euler and duality",
    )
}

fn c2_skeleton() -> Outcome {
    let mut r = rng::stream(2);
    for i in 0..1000u64 {
        let params = random_vessel_params(&mut r, i);
        let v = match generate_vessel(&params) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("vessel {i}: {e}")),
        };
        let s = skeletonize(&v.mask);
        if !s.is_subset_of(&v.mask) {
            return outcome(false, format!("vessel {i}: skeleton leaves the mask"));
        }
        if betti_numbers(&s) != v.topology {
            return outcome(
                false,
                format!("vessel {i}: {} became {}", v.topology, betti_numbers(&s)),
            );
        }
    }
    outcome(true, "1000 vessels keep (beta0, beta1) and stay inside the mask")
}

fn c3_metric_identities() -> Outcome {
    let mut r = rng::stream(3);
    let mut pairs = Vec::new();
    for i in 0..40u64 {
        let v = generate_vessel(&random_vessel_params(&mut r, 100 + i)).unwrap();
        let other = match i % 3 {
            0 => perturb_disconnect(&v.mask, 1, i).map(|p| p.0),
            1 => perturb_merge(&v.mask, 1, i).map(|p| p.0),
            _ => perturb_holes(&v.mask, 1, i).map(|p| p.0),
        }
        .unwrap_or_else(|_| v.mask.translated(2, 1));
        pairs.push((v.mask, other));
    }
    for _ in 0..40 {
        let a = random_mask(&mut r, 24, 24, 0.4);
        let b = random_mask(&mut r, 24, 24, 0.4);
        pairs.push((a, b));
    }
    for (k, (a, b)) in pairs.iter().enumerate() {
        let checks = [
            ("dice(a,a)=1", dice(a, a).unwrap() == 1.0),
            ("cldice(a,a)=1", cl_dice(a, a).unwrap() == 1.0),
            ("b0num(a,a)=0", beta0_number_error(a, a).unwrap() == 0),
            ("b0mat(a,a)=0", beta0_matching_error(a, a).unwrap() == 0),
            ("dice symmetric", dice(a, b).unwrap() == dice(b, a).unwrap()),
            ("cldice symmetric", cl_dice(a, b).unwrap() == cl_dice(b, a).unwrap()),
            (
                "b0num symmetric",
                beta0_number_error(a, b).unwrap() == beta0_number_error(b, a).unwrap(),
            ),
            (
                "b0mat symmetric",
                beta0_matching_error(a, b).unwrap() == beta0_matching_error(b, a).unwrap(),
            ),
        ];
        if let Some((name, _)) = checks.iter().find(|c| !c.1) {
            return outcome(false, format!("pair {k}: {name}"));
        }
        let empty = BinaryMask::empty(a.width(), a.height());
        let b0 = betti_numbers(a).beta0;
        let empty_checks = [
            ("dice(0,0)=1", dice(&empty, &empty).unwrap() == 1.0),
            ("cldice(0,0)=1", cl_dice(&empty, &empty).unwrap() == 1.0),
            ("dice(0,a)=0", a.is_empty() || dice(&empty, a).unwrap() == 0.0),
            ("cldice(0,a)=0", a.is_empty() || cl_dice(&empty, a).unwrap() == 0.0),
            ("b0num(0,a)=b0(a)", beta0_number_error(&empty, a).unwrap() == b0),
            ("b0mat(0,a)=b0(a)", beta0_matching_error(&empty, a).unwrap() == b0),
        ];
        if let Some((name, _)) = empty_checks.iter().find(|c| !c.1) {
            return outcome(false, format!("pair {k}: {name}"));
        }
    }
    outcome(
        true,
        format!(
            "{} pairs satisfy self, symmetry and empty-mask identities exactly",
            pairs.len()
        ),
    )
}

fn c4_disconnect_contract() -> Outcome {
    let mut emitted = 0;
    let mut declined = 0;
    for seed in 0..100u64 {
        let gt = generate_vessel(&VesselParams {
            seed,
            ..VesselParams::default()
        })
        .unwrap()
        .mask;
        for k in 1..=3 {
            match perturb_disconnect(&gt, k, rng::split(seed, k as u64)) {
                Ok((bad, _)) => {
                    let err = beta0_number_error(&bad, &gt).unwrap();
                    if err != k {
                        return outcome(false, format!("seed {seed} k={k}: beta0 error {err}"));
                    }
                    emitted += 1;
                }
                Err(_) => declined += 1,
            }
        }
    }
    outcome(
        emitted > 0,
        format!("{emitted}/300 emitted samples have beta0 error exactly k ({declined} declined)"),
    )
}

fn c5_taskgen_audit() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        out_dir: dir.path().to_path_buf(),
        train_per_kind: 100,
        test_per_kind: 0,
        seed: 5,
        synth: VesselParams {
            width: 64,
            height: 64,
            radius_root: 1.5,
            branch_depth: 3,
            ..VesselParams::default()
        },
    };
    let manifest = match build_dataset(&cfg) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("build failed: {e}")),
    };
    let report = verify_answers(&manifest.path).unwrap();
    let mut worst: f64 = 0.0;
    for kind in TaskKind::ALL.iter().filter(|k| k.is_binary()) {
        worst = worst.max(report.per_kind[kind].majority_share());
    }
    let pass =
        report.total == 500 && report.mismatches.is_empty() && report.malformed_prompts.is_empty() && worst <= 0.6;
    outcome(
        pass,
        format!(
            "{} records, {} mismatches, {} malformed prompts, max majority share {:.0}%",
            report.total,
            report.mismatches.len(),
            report.malformed_prompts.len(),
            100.0 * worst
        ),
    )
}

fn c6_flow_algebra() -> Outcome {
    let mut r = rng::stream(6);
    let normal = |r: &mut rng::Rng, n: usize| -> Vec<f64> { (0..n).map(|_| r.sample(StandardNormal)).collect() };
    let mut worst_identity: f64 = 0.0;
    let mut worst_lambda: f64 = 0.0;
    for _ in 0..200 {
        let x = LatentGrid::new(16, 16, 8, normal(&mut r, 256)).unwrap();
        let eps = LatentGrid::new(16, 16, 8, normal(&mut r, 256)).unwrap();
        let tau: f64 = r.random();
        let z = interpolate(&x, &eps, tau).unwrap();
        let back = predict_clean(&z, tau, &target_velocity(&x, &eps).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(x.values()) {
            worst_identity = worst_identity.max((a - b).abs());
        }
        let e = GrayImage::new(16, 16, (0..256).map(|_| r.random::<f64>()).collect()).unwrap();
        let w0 = token_weights(&e, 8, 0.0).unwrap();
        let plain = TokenWeightMap::uniform(16, 16, 8).unwrap();
        let v = LatentGrid::new(16, 16, 8, normal(&mut r, 256)).unwrap();
        let d = (weighted_flow_loss(&v, &z, &w0).unwrap() - weighted_flow_loss(&v, &z, &plain).unwrap()).abs();
        worst_lambda = worst_lambda.max(d);
    }
    let mut worst_grad: f64 = 0.0;
    for _ in 0..20 {
        let v = LatentGrid::new(4, 4, 2, normal(&mut r, 16)).unwrap();
        let t = LatentGrid::new(4, 4, 2, normal(&mut r, 16)).unwrap();
        let e = GrayImage::new(4, 4, (0..16).map(|_| r.random::<f64>()).collect()).unwrap();
        let w = token_weights(&e, 2, 10.0).unwrap();
        let (_, grad) = weighted_flow_loss_grad(&v, &t, &w).unwrap();
        for (i, &g) in grad.iter().enumerate() {
            let h = 1e-5;
            let mut up = v.clone();
            up.values_mut()[i] += h;
            let mut dn = v.clone();
            dn.values_mut()[i] -= h;
            let fd = (weighted_flow_loss(&up, &t, &w).unwrap() - weighted_flow_loss(&dn, &t, &w).unwrap()) / (2.0 * h);
            worst_grad = worst_grad.max((fd - g).abs() / fd.abs().max(1e-12));
        }
    }
    outcome(
        worst_identity <= 1e-6 && worst_lambda <= 1e-6 && worst_grad <= 1e-4,
        format!(
            "clean-latent identity err {worst_identity:.1e}, lambda=0 gap {worst_lambda:.1e}, grad rel err {worst_grad:.1e}"
        ),
    )
}

fn c7_overfit() -> Outcome {
    let start = Instant::now();
    let base = VesselParams::small(0);
    let triple = synth_triples(&base, 20, 7)
        .unwrap()
        .into_iter()
        .find(|t| beta0_number_error(&t.imperfect, &t.gt).unwrap() > 0)
        .expect("a disconnected triple");
    let cfg = TrainConfig {
        steps: 2000,
        batch_size: 1,
        seed: 7,
        ..TrainConfig::default()
    };
    let out = train(&cfg, std::slice::from_ref(&triple)).unwrap();
    let rep = refine_eval(&out.model, std::slice::from_ref(&triple), 10, 7).unwrap();
    let elapsed = start.elapsed();
    outcome(
        rep.refined.dice >= 0.95 && elapsed < Duration::from_secs(300),
        format!(
            "dice {:.4} (input {:.4}), beta0 error {} -> {}, {:.1} s",
            rep.refined.dice,
            rep.input.dice,
            rep.input.beta0_num,
            rep.refined.beta0_num,
            elapsed.as_secs_f64()
        ),
    )
}

fn c8_adaptive_weighting() -> Outcome {
    let base = VesselParams::small(0);
    let (mut input, mut adaptive, mut plain) = (0.0, 0.0, 0.0);
    let (mut dice_adaptive, mut dice_plain) = (0.0, 0.0);
    let seeds = 5;
    for s in 0..seeds as u64 {
        let train_set = synth_triples(&base, 200, rng::split_label(s, "train")).unwrap();
        let test_set = synth_triples(&base, 50, rng::split_label(s, "test")).unwrap();
        for (lambda, acc, acc_dice) in [
            (10.0, &mut adaptive, &mut dice_adaptive),
            (0.0, &mut plain, &mut dice_plain),
        ] {
            let cfg = TrainConfig {
                steps: 1500,
                batch_size: 4,
                hidden: 12,
                lambda,
                seed: s,
                ..TrainConfig::default()
            };
            let model = train(&cfg, &train_set).unwrap().model;
            let rep = refine_eval(&model, &test_set, 10, rng::split_label(s, "sample")).unwrap();
            *acc += rep.refined.beta0_num / seeds as f64;
            *acc_dice += rep.refined.dice / seeds as f64;
            if lambda > 0.0 {
                input += rep.input.beta0_num / seeds as f64;
            }
        }
    }
    let verdict = if adaptive < plain {
        "adaptive lower"
    } else if adaptive == plain {
        "tie"
    } else {
        "adaptive not lower (logged, not a failure)"
    };
    outcome(
        adaptive < input && plain < input,
        format!(
            "mean beta0 error: input {input:.3}, lambda=10 {adaptive:.3}, lambda=0 {plain:.3} [{verdict}]; dice lambda=10 {:.4}, lambda=0 {:.4}",
            dice_adaptive, dice_plain
        ),
    )
}

fn main() -> ExitCode {
    // (name, check, time budget in seconds)
    type Criterion = (&'static str, fn() -> Outcome, Option<u64>);
    let criteria: [Criterion; 8] = [
        ("1 topology oracle", c1_topology_oracle, Some(30)),
        ("2 skeleton preserves topology", c2_skeleton, Some(60)),
        ("3 metric identities", c3_metric_identities, None),
        ("4 disconnect contract", c4_disconnect_contract, None),
        ("5 taskgen audit", c5_taskgen_audit, None),
        ("6 flow algebra", c6_flow_algebra, None),
        ("7 overfit sanity", c7_overfit, Some(300)),
        ("8 adaptive weighting experiment", c8_adaptive_weighting, Some(1800)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut o = run();
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = budget {
            if secs >= limit as f64 {
                o.pass = false;
                o.detail.push_str(&format!(" [over {limit} s budget]"));
            }
        }
        println!(
            "{} criterion {name}: {} ({secs:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
