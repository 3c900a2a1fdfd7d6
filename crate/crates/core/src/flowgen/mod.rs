//! Conditional rectified flow over pixel-space latents with error-adaptive
//! token weighting.
//!
//! Flow convention: `z_tau = tau * x + (1 - tau) * eps`, so `tau = 0` is pure
//! noise and `tau = 1` is clean data; the target velocity is `x - eps`.

mod model;
mod refine;
mod train;

pub use model::{Architecture, Condition, VelocityModel, MIN_REMAINING_TIME};
pub use refine::{refine_eval, sample, synth_triples, triples_from_manifest, RefineReport, Triple};
pub use train::{
    load_checkpoint, loss_curve_csv, save_checkpoint, train, Checkpoint, TrainConfig, TrainOutcome, CHECKPOINT_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, BinaryMask, GrayImage};

pub const DEFAULT_PATCH_SIZE: usize = 8;
pub const DEFAULT_LAMBDA: f64 = 10.0;
/// Largest possible per-pixel error for intensities in `[0, 1]`.
pub const MAX_ERROR: f64 = 1.0;

/// Row-major real grid in pixel resolution, tokenised into `p x p` patches.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    width: usize,
    height: usize,
    patch_size: usize,
    values: Vec<f64>,
}

impl LatentGrid {
    pub fn new(width: usize, height: usize, patch_size: usize, values: Vec<f64>) -> Result<Self> {
        if patch_size == 0 || !width.is_multiple_of(patch_size) || !height.is_multiple_of(patch_size) {
            return Err(Error::InvalidParams(format!(
                "{width}x{height} grid is not divisible into {patch_size}-pixel patches"
            )));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                left: (width, height),
                right: (values.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            patch_size,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, patch_size: usize, value: f64) -> Result<Self> {
        Self::new(width, height, patch_size, vec![value; width * height])
    }

    /// Encodes an image with the identity map.
    pub fn encode(img: &GrayImage, patch_size: usize) -> Result<Self> {
        Self::new(img.width(), img.height(), patch_size, img.data().to_vec())
    }

    pub fn from_mask(mask: &BinaryMask, patch_size: usize) -> Result<Self> {
        Self::encode(&GrayImage::from(mask), patch_size)
    }

    /// Decodes with the identity map; values are clamped into `[0, 1]`.
    pub fn decode(&self) -> GrayImage {
        GrayImage::new(self.width, self.height, self.values.clone()).expect("dims are consistent")
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn token_count(&self) -> usize {
        (self.width / self.patch_size) * (self.height / self.patch_size)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn zip(&self, other: &LatentGrid, f: impl Fn(f64, f64) -> f64) -> Result<LatentGrid> {
        ensure_same_dims(self.dims(), other.dims())?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(LatentGrid {
            values,
            ..self.clone_shape()
        })
    }

    fn clone_shape(&self) -> LatentGrid {
        LatentGrid {
            width: self.width,
            height: self.height,
            patch_size: self.patch_size,
            values: Vec::new(),
        }
    }
}

/// `tau * x + (1 - tau) * eps`.
pub fn interpolate(x: &LatentGrid, eps: &LatentGrid, tau: f64) -> Result<LatentGrid> {
    x.zip(eps, |a, e| tau * a + (1.0 - tau) * e)
}

/// `x - eps`.
pub fn target_velocity(x: &LatentGrid, eps: &LatentGrid) -> Result<LatentGrid> {
    x.zip(eps, |a, e| a - e)
}

/// One-shot clean estimate `z_tau + (1 - tau) * v`.
pub fn predict_clean(z_tau: &LatentGrid, tau: f64, v_pred: &LatentGrid) -> Result<LatentGrid> {
    z_tau.zip(v_pred, |z, v| z + (1.0 - tau) * v)
}

/// Per-pixel error magnitude `|y - y_img|`.
pub fn error_map(y: &GrayImage, y_img: &GrayImage) -> Result<GrayImage> {
    ensure_same_dims(y.dims(), y_img.dims())?;
    let data = y.data().iter().zip(y_img.data()).map(|(a, b)| (a - b).abs()).collect();
    GrayImage::new(y.width(), y.height(), data)
}

/// One weight per patch token, `w_i = 1 + lambda * e_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWeightMap {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub patch_size: usize,
    pub tokens_x: usize,
    pub tokens_y: usize,
}

impl TokenWeightMap {
    pub fn uniform(width: usize, height: usize, patch_size: usize) -> Result<Self> {
        token_weights(&GrayImage::filled(width, height, 0.0), patch_size, 0.0)
    }

    pub fn get(&self, tx: usize, ty: usize) -> f64 {
        self.weights[ty * self.tokens_x + tx]
    }

    /// Weight of the token containing pixel `(x, y)`.
    pub fn at_pixel(&self, x: usize, y: usize) -> f64 {
        self.get(x / self.patch_size, y / self.patch_size)
    }

    pub fn pixel_dims(&self) -> (usize, usize) {
        (self.tokens_x * self.patch_size, self.tokens_y * self.patch_size)
    }
}

/// Normalised mean patch error `e_i` turned into token weights.
pub fn token_weights(error: &GrayImage, patch_size: usize, lambda: f64) -> Result<TokenWeightMap> {
    let (w, h) = error.dims();
    if patch_size == 0 || !w.is_multiple_of(patch_size) || !h.is_multiple_of(patch_size) {
        return Err(Error::DimensionMismatch {
            left: (w, h),
            right: (patch_size, patch_size),
        });
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidParams(format!("lambda must be >= 0, got {lambda}")));
    }
    let (tx, ty) = (w / patch_size, h / patch_size);
    let area = (patch_size * patch_size) as f64;
    let mut sums = vec![0.0; tx * ty];
    for y in 0..h {
        for x in 0..w {
            sums[(y / patch_size) * tx + x / patch_size] += error.get(x, y) / MAX_ERROR;
        }
    }
    let weights = sums.into_iter().map(|s| 1.0 + lambda * (s / area)).collect();
    Ok(TokenWeightMap {
        weights,
        lambda,
        patch_size,
        tokens_x: tx,
        tokens_y: ty,
    })
}

fn check_loss_shapes(v_pred: &LatentGrid, v_target: &LatentGrid, w: &TokenWeightMap) -> Result<()> {
    ensure_same_dims(v_pred.dims(), v_target.dims())?;
    ensure_same_dims(v_pred.dims(), w.pixel_dims())
}

/// `mean_j (w_token(j) * (v_pred_j - v_target_j))^2`.
pub fn weighted_flow_loss(v_pred: &LatentGrid, v_target: &LatentGrid, w: &TokenWeightMap) -> Result<f64> {
    Ok(weighted_flow_loss_grad(v_pred, v_target, w)?.0)
}

/// Loss together with its gradient with respect to `v_pred`.
pub fn weighted_flow_loss_grad(
    v_pred: &LatentGrid,
    v_target: &LatentGrid,
    w: &TokenWeightMap,
) -> Result<(f64, Vec<f64>)> {
    check_loss_shapes(v_pred, v_target, w)?;
    let (width, height) = v_pred.dims();
    let n = (width * height) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let wt = w.at_pixel(x, y);
            let r = v_pred.values[i] - v_target.values[i];
            let wr = wt * r;
            loss += wr * wr;
            grad[i] = 2.0 * wt * wr / n;
        }
    }
    Ok((loss / n, grad))
}
