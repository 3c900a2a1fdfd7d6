//! Small convolutional velocity field.
//!
//! Three layers (3x3 conv, tanh, 3x3 conv, tanh, 1x1 conv) map the input
//! planes to a clean-sample estimate `D`; the velocity is
//! `(D - z) / max(1 - tau, MIN_REMAINING_TIME)`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::LatentGrid;
use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, BinaryMask, GrayImage};
use crate::rng;
use crate::topology::TopologySummary;

/// Floor on `1 - tau` in the velocity parameterisation.
pub const MIN_REMAINING_TIME: f64 = 0.05;
/// z, tau, image, imperfect mask, target beta0, target beta1.
pub const INPUT_CHANNELS: usize = 6;
const COUNT_SCALE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_channels: usize,
    pub hidden: usize,
}

impl Architecture {
    pub fn new(hidden: usize) -> Self {
        Self {
            input_channels: INPUT_CHANNELS,
            hidden,
        }
    }

    fn layout(&self) -> Layout {
        let (c, h) = (self.input_channels, self.hidden);
        let w1 = 0;
        let b1 = w1 + h * c * 9;
        let w2 = b1 + h;
        let b2 = w2 + h * h * 9;
        let w3 = b2 + h;
        let b3 = w3 + h;
        Layout {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            total: b3 + 1,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    total: usize,
}

/// Conditioning for one sample: the image, the mask to refine and the
/// topology the output should have.
#[derive(Debug, Clone, Copy)]
pub struct Condition<'a> {
    pub image: &'a GrayImage,
    pub imperfect: &'a BinaryMask,
    pub target: TopologySummary,
}

impl Condition<'_> {
    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    arch: Architecture,
    params: Vec<f64>,
}

/// Activations kept for the backward pass.
pub(crate) struct Forward {
    pub input: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    pub out: Vec<f64>,
}

impl VelocityModel {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        if arch.hidden == 0 || arch.input_channels != INPUT_CHANNELS {
            return Err(Error::InvalidConfig(format!("unsupported architecture {arch:?}")));
        }
        let l = arch.layout();
        let mut params = vec![0.0; l.total];
        let mut r = rng::stream(seed);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, gain: f64| {
            let a = gain * (3.0 / fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = r.random_range(-a..a);
            }
        };
        fill(l.w1..l.b1, arch.input_channels * 9, 1.0);
        fill(l.w2..l.b2, arch.hidden * 9, 1.0);
        fill(l.w3..l.b3, arch.hidden, 0.5);
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        Self::new(arch, 0).map(|_| Self { arch, params })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn input_planes(z: &LatentGrid, tau: f64, cond: &Condition<'_>) -> Result<Vec<f64>> {
        ensure_same_dims(z.dims(), cond.image.dims())?;
        ensure_same_dims(z.dims(), cond.imperfect.dims())?;
        let n = z.values().len();
        let mut planes = Vec::with_capacity(INPUT_CHANNELS * n);
        planes.extend_from_slice(z.values());
        planes.extend(std::iter::repeat_n(tau, n));
        planes.extend_from_slice(cond.image.data());
        planes.extend(cond.imperfect.data().iter().map(|&b| if b { 1.0 } else { 0.0 }));
        planes.extend(std::iter::repeat_n(cond.target.beta0 as f64 / COUNT_SCALE, n));
        planes.extend(std::iter::repeat_n(cond.target.beta1 as f64 / COUNT_SCALE, n));
        Ok(planes)
    }

    pub(crate) fn forward(&self, input: Vec<f64>, w: usize, h: usize) -> Forward {
        let l = self.arch.layout();
        let (c, hid) = (self.arch.input_channels, self.arch.hidden);
        let p = &self.params;
        let n = w * h;
        let mut a1 = vec![0.0; hid * n];
        conv3x3(&input, c, w, h, &p[l.w1..l.b1], &p[l.b1..l.w2], hid, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        let mut a2 = vec![0.0; hid * n];
        conv3x3(&a1, hid, w, h, &p[l.w2..l.b2], &p[l.b2..l.w3], hid, &mut a2);
        a2.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = vec![p[l.b3]; n];
        for (k, plane) in a2.chunks_exact(n).enumerate() {
            let wk = p[l.w3 + k];
            for (o, &a) in out.iter_mut().zip(plane) {
                *o += wk * a;
            }
        }
        Forward { input, a1, a2, out }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d out`.
    pub(crate) fn backward(&self, fwd: &Forward, d_out: &[f64], w: usize, h: usize, grad: &mut [f64]) {
        let l = self.arch.layout();
        let (c, hid) = (self.arch.input_channels, self.arch.hidden);
        let p = &self.params;
        let n = w * h;
        grad[l.b3] += d_out.iter().sum::<f64>();
        let mut d2 = vec![0.0; hid * n];
        for k in 0..hid {
            let plane = &fwd.a2[k * n..(k + 1) * n];
            grad[l.w3 + k] += plane.iter().zip(d_out).map(|(a, d)| a * d).sum::<f64>();
            let wk = p[l.w3 + k];
            for ((g, &a), &d) in d2[k * n..(k + 1) * n].iter_mut().zip(plane).zip(d_out) {
                *g = wk * d * (1.0 - a * a);
            }
        }
        let mut d1 = vec![0.0; hid * n];
        {
            let (gw, rest) = grad[l.w2..l.w3].split_at_mut(l.b2 - l.w2);
            conv3x3_backward(&fwd.a1, hid, w, h, &p[l.w2..l.b2], hid, &d2, gw, rest, Some(&mut d1));
        }
        for (g, &a) in d1.iter_mut().zip(&fwd.a1) {
            *g *= 1.0 - a * a;
        }
        let (gw, rest) = grad[l.w1..l.w2].split_at_mut(l.b1 - l.w1);
        conv3x3_backward(&fwd.input, c, w, h, &p[l.w1..l.b1], hid, &d1, gw, rest, None);
    }

    /// Clean-sample estimate `D(z, tau, X)`.
    pub fn denoise(&self, z: &LatentGrid, tau: f64, cond: &Condition<'_>) -> Result<LatentGrid> {
        let (w, h) = z.dims();
        let fwd = self.forward(Self::input_planes(z, tau, cond)?, w, h);
        LatentGrid::new(w, h, z.patch_size(), fwd.out)
    }

    /// Velocity `G(z, tau, X)`.
    pub fn velocity(&self, z: &LatentGrid, tau: f64, cond: &Condition<'_>) -> Result<LatentGrid> {
        let mut v = self.denoise(z, tau, cond)?;
        let s = remaining_time(tau);
        for (vi, zi) in v.values_mut().iter_mut().zip(z.values()) {
            *vi = (*vi - zi) / s;
        }
        Ok(v)
    }
}

pub(crate) fn remaining_time(tau: f64) -> f64 {
    (1.0 - tau).max(MIN_REMAINING_TIME)
}

/// Valid index range of `t + d` inside `0..len`, expressed over `t`.
fn shifted_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d.max(0)).max(0) as usize;
    (lo.min(hi), hi)
}

/// Zero-padded "same" 3x3 convolution over channel-major planes.
#[allow(clippy::too_many_arguments)]
fn conv3x3(input: &[f64], cin: usize, w: usize, h: usize, weights: &[f64], bias: &[f64], cout: usize, out: &mut [f64]) {
    let n = w * h;
    for o in 0..cout {
        let dst = &mut out[o * n..(o + 1) * n];
        dst.fill(bias[o]);
        for i in 0..cin {
            let src = &input[i * n..(i + 1) * n];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (ylo, yhi) = shifted_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (xlo, xhi) = shifted_range(w, dx);
                    let k = weights[((o * cin + i) * 3 + ky) * 3 + kx];
                    for y in ylo..yhi {
                        let sy = (y as isize + dy) as usize;
                        let row = &mut dst[y * w + xlo..y * w + xhi];
                        let srow = &src[sy * w + (xlo as isize + dx) as usize..];
                        for (d, s) in row.iter_mut().zip(srow) {
                            *d += k * s;
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    cin: usize,
    w: usize,
    h: usize,
    weights: &[f64],
    cout: usize,
    d_out: &[f64],
    d_weights: &mut [f64],
    d_bias: &mut [f64],
    mut d_input: Option<&mut [f64]>,
) {
    let n = w * h;
    for o in 0..cout {
        let g = &d_out[o * n..(o + 1) * n];
        d_bias[o] += g.iter().sum::<f64>();
        for i in 0..cin {
            let src = &input[i * n..(i + 1) * n];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (ylo, yhi) = shifted_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (xlo, xhi) = shifted_range(w, dx);
                    let idx = ((o * cin + i) * 3 + ky) * 3 + kx;
                    let k = weights[idx];
                    let mut acc = 0.0;
                    for y in ylo..yhi {
                        let sy = (y as isize + dy) as usize;
                        let start = sy * w + (xlo as isize + dx) as usize;
                        let grow = &g[y * w + xlo..y * w + xhi];
                        let srow = &src[start..start + (xhi - xlo)];
                        acc += grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(di) = d_input.as_deref_mut() {
                            let drow = &mut di[i * n + start..i * n + start + (xhi - xlo)];
                            for (d, &gv) in drow.iter_mut().zip(grow) {
                                *d += k * gv;
                            }
                        }
                    }
                    d_weights[idx] += acc;
                }
            }
        }
    }
}
