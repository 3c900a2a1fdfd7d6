//! Training loop, Adam updates, checkpoints and loss curves.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{remaining_time, Architecture, VelocityModel};
use super::refine::Triple;
use super::{
    error_map, interpolate, predict_clean, target_velocity, token_weights, weighted_flow_loss_grad, LatentGrid,
    TokenWeightMap, DEFAULT_LAMBDA, DEFAULT_PATCH_SIZE,
};
use crate::error::{Error, Result};
use crate::mask::GrayImage;
use crate::rng;

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "tubetopo-velocity-model";
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub patch_size: usize,
    /// When false every token weight is 1.
    pub adaptive_weighting: bool,
    pub hidden: usize,
    pub seed: u64,
    /// Where to write the checkpoint; the loss curve goes alongside it.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 4,
            learning_rate: 1e-3,
            lambda: DEFAULT_LAMBDA,
            patch_size: DEFAULT_PATCH_SIZE,
            adaptive_weighting: true,
            hidden: 16,
            seed: 0,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.patch_size == 0 || self.hidden == 0 {
            return bad("patch_size and hidden must be >= 1".into());
        }
        Ok(())
    }

    /// `<checkpoint stem>.loss.csv` next to the checkpoint.
    pub fn loss_curve_path(&self) -> Option<PathBuf> {
        self.checkpoint_path.as_ref().map(|p| p.with_extension("loss.csv"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: VelocityModel,
    /// Mean batch loss per step.
    pub losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Loss for one training example; adds its parameter gradient (scaled by
/// `scale`) into `grad`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn example_loss(
    model: &VelocityModel,
    cfg: &TrainConfig,
    triple: &Triple,
    gt_image: &GrayImage,
    tau: f64,
    eps: &LatentGrid,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let p = cfg.patch_size;
    let (w, h) = triple.gt.dims();
    let x = LatentGrid::from_mask(&triple.gt, p)?;
    let z = interpolate(&x, eps, tau)?;
    let v_target = target_velocity(&x, eps)?;
    let cond = triple.condition();
    let fwd = model.forward(VelocityModel::input_planes(&z, tau, &cond)?, w, h);
    let s = remaining_time(tau);
    let v_pred = LatentGrid::new(
        w,
        h,
        p,
        fwd.out.iter().zip(z.values()).map(|(d, zi)| (d - zi) / s).collect(),
    )?;
    let weights = if cfg.adaptive_weighting {
        let clean = predict_clean(&z, tau, &v_pred)?;
        token_weights(&error_map(gt_image, &clean.decode())?, p, cfg.lambda)?
    } else {
        TokenWeightMap::uniform(w, h, p)?
    };
    let (loss, d_v) = weighted_flow_loss_grad(&v_pred, &v_target, &weights)?;
    let d_out: Vec<f64> = d_v.iter().map(|g| g * scale / s).collect();
    model.backward(&fwd, &d_out, w, h, grad);
    Ok(loss)
}

fn check_triples(cfg: &TrainConfig, triples: &[Triple]) -> Result<()> {
    if triples.is_empty() {
        return Err(Error::EmptyInput("training needs at least one triple"));
    }
    for t in triples {
        let (w, h) = t.gt.dims();
        if !w.is_multiple_of(cfg.patch_size) || !h.is_multiple_of(cfg.patch_size) {
            return Err(Error::InvalidConfig(format!(
                "{w}x{h} masks are not divisible into {}-pixel patches",
                cfg.patch_size
            )));
        }
        t.check_dims()?;
    }
    Ok(())
}

/// Trains a fresh model on `triples`. Writes the checkpoint and loss curve
/// when `cfg.checkpoint_path` is set.
pub fn train(cfg: &TrainConfig, triples: &[Triple]) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_triples(cfg, triples)?;
    let arch = Architecture::new(cfg.hidden);
    let mut model = VelocityModel::new(arch, rng::split_label(cfg.seed, "init"))?;
    let mut r = rng::stream(rng::split_label(cfg.seed, "train"));
    let gt_images: Vec<GrayImage> = triples.iter().map(|t| GrayImage::from(&t.gt)).collect();
    let mut adam = Adam::new(arch.param_count());
    let mut grad = vec![0.0; arch.param_count()];
    let mut losses = Vec::with_capacity(cfg.steps);
    let scale = 1.0 / cfg.batch_size as f64;
    for step in 0..cfg.steps {
        grad.fill(0.0);
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            let idx = r.random_range(0..triples.len());
            let tau: f64 = r.random();
            let (w, h) = triples[idx].gt.dims();
            let eps = LatentGrid::new(
                w,
                h,
                cfg.patch_size,
                (0..w * h).map(|_| r.sample(StandardNormal)).collect(),
            )?;
            loss += scale * example_loss(&model, cfg, &triples[idx], &gt_images[idx], tau, &eps, scale, &mut grad)?;
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step, loss });
        }
        adam.step(model.params_mut(), &grad, cfg.learning_rate);
        losses.push(loss);
    }
    let outcome = TrainOutcome { model, losses };
    if let Some(path) = &cfg.checkpoint_path {
        save_checkpoint(path, &Checkpoint::new(cfg, &outcome.model))?;
        let curve = cfg.loss_curve_path().expect("checkpoint path is set");
        write_atomic(&curve, loss_curve_csv(&outcome.losses).as_bytes())?;
    }
    Ok(outcome)
}

/// `step,loss` rows.
pub fn loss_curve_csv(losses: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in losses.iter().enumerate() {
        writeln!(out, "{i},{l}").unwrap();
    }
    out
}

/// Serialised model. The stored config omits the checkpoint path so the
/// file does not depend on where it was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, model: &VelocityModel) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: TrainConfig {
                checkpoint_path: None,
                ..config.clone()
            },
            architecture: model.architecture(),
            params: model.params().to_vec(),
        }
    }

    pub fn model(&self) -> Result<VelocityModel> {
        VelocityModel::from_params(self.architecture, self.params.clone())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes JSON to a temporary sibling, then renames it into place.
pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let json = serde_json::to_vec(ckpt).expect("checkpoint serialises");
    write_atomic(path.as_ref(), &json)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ctx = || path.display().to_string();
    let ckpt: Checkpoint = serde_json::from_slice(&bytes).map_err(|e| Error::format(ctx(), e.to_string()))?;
    if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::format(
            ctx(),
            format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version),
        ));
    }
    ckpt.model()?;
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowgen::synth_triples;
    use crate::synth::VesselParams;

    fn tiny() -> TrainConfig {
        TrainConfig {
            steps: 5,
            batch_size: 2,
            hidden: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn one_step_gives_finite_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let triples = synth_triples(&VesselParams::small(0), 2, 1).unwrap();
        let cfg = TrainConfig {
            steps: 1,
            checkpoint_path: Some(dir.path().join("model.json")),
            ..tiny()
        };
        let out = train(&cfg, &triples).unwrap();
        assert_eq!(out.losses.len(), 1);
        assert!(out.losses[0].is_finite());
        let ckpt = load_checkpoint(dir.path().join("model.json")).unwrap();
        assert_eq!(ckpt.model().unwrap(), out.model);
        assert_eq!(
            ckpt.config,
            TrainConfig {
                checkpoint_path: None,
                ..cfg
            }
        );
        let curve = fs::read_to_string(dir.path().join("model.loss.csv")).unwrap();
        assert!(curve.starts_with("step,loss\n0,"));
    }

    #[test]
    fn zero_lambda_matches_unweighted_run() {
        let triples = synth_triples(&VesselParams::small(0), 2, 3).unwrap();
        let a = train(&TrainConfig { lambda: 0.0, ..tiny() }, &triples).unwrap();
        let b = train(
            &TrainConfig {
                adaptive_weighting: false,
                ..tiny()
            },
            &triples,
        )
        .unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.losses), bits(&b.losses));
        assert_eq!(bits(a.model.params()), bits(b.model.params()));
        let c = train(&tiny(), &triples).unwrap();
        assert_ne!(bits(&a.losses), bits(&c.losses));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let triples = synth_triples(&VesselParams::small(0), 1, 0).unwrap();
        for cfg in [
            TrainConfig { steps: 0, ..tiny() },
            TrainConfig { lambda: -1.0, ..tiny() },
            TrainConfig {
                patch_size: 5,
                ..tiny()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..tiny()
            },
        ] {
            assert!(matches!(train(&cfg, &triples), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
        assert!(matches!(train(&tiny(), &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let triples = synth_triples(&VesselParams::small(0), 1, 0).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            steps: 50,
            ..tiny()
        };
        assert!(matches!(train(&cfg, &triples), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn checkpoint_round_trip_is_exact_and_validated() {
        let dir = tempfile::tempdir().unwrap();
        let model = VelocityModel::new(Architecture::new(3), 5).unwrap();
        let path = dir.path().join("c.json");
        save_checkpoint(&path, &Checkpoint::new(&tiny(), &model)).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap().model().unwrap(), model);
        assert!(!dir.path().join("c.json.tmp").exists());
        fs::write(&path, "{\"format\":\"x\"}").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
        assert!(matches!(
            load_checkpoint(dir.path().join("none.json")),
            Err(Error::Io { .. })
        ));
    }
}
