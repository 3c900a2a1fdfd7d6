//! Digital topology on binary masks.
//!
//! Foreground uses 8-connectivity and background 4-connectivity. Under that
//! pairing the mask behaves like the closed cubical complex formed by its
//! unit squares, so `beta0 - beta1` equals `V - E + F` of that complex.

mod matching;
mod skeleton;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mask::{ensure_same_dims, BinaryMask};

pub use matching::maximum_bipartite_matching;
pub use skeleton::{is_simple_point, skeletonize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Connected-component labels for a mask; label 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count of each component; index `i` holds label `i + 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Labels connected components of the foreground. Labels are assigned in the
/// order a row-major scan first touches each component.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    label_where(mask, true, connectivity)
}

/// Labels connected components of the pixels equal to `value`.
fn label_where(mask: &BinaryMask, value: bool, connectivity: Connectivity) -> ComponentLabeling {
    let (w, h) = mask.dims();
    let data = mask.data();
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if data[start] != value || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let (x, y) = ((idx % w) as isize, (idx / w) as isize);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if data[n] == value && labels[n] == 0 {
                    labels[n] = label;
                    queue.push_back(n);
                }
            }
        }
        sizes.push(size);
    }
    ComponentLabeling {
        width: w,
        height: h,
        labels,
        sizes,
    }
}

/// Betti numbers and Euler characteristic of a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopologySummary {
    pub beta0: usize,
    pub beta1: usize,
    pub euler: i64,
}

impl std::fmt::Display for TopologySummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "beta0={} beta1={} euler={}", self.beta0, self.beta1, self.euler)
    }
}

/// Cell counts `(V, E, F)` of the closed cubical complex spanned by the
/// foreground pixels.
pub fn cubical_cell_counts(mask: &BinaryMask) -> (usize, usize, usize) {
    let (w, h) = mask.dims();
    let at = |x: isize, y: isize| mask.get_signed(x, y);
    let mut vertices = 0;
    let mut edges = 0;
    // Lattice point (x, y) is the top-left corner of pixel (x, y).
    for y in 0..=h as isize {
        for x in 0..=w as isize {
            if at(x - 1, y - 1) || at(x, y - 1) || at(x - 1, y) || at(x, y) {
                vertices += 1;
            }
            // Horizontal edge from (x, y) to (x + 1, y).
            if x < w as isize && (at(x, y - 1) || at(x, y)) {
                edges += 1;
            }
            // Vertical edge from (x, y) to (x, y + 1).
            if y < h as isize && (at(x - 1, y) || at(x, y)) {
                edges += 1;
            }
        }
    }
    (vertices, edges, mask.count())
}

pub fn euler_characteristic(mask: &BinaryMask) -> i64 {
    let (v, e, f) = cubical_cell_counts(mask);
    v as i64 - e as i64 + f as i64
}

/// `beta0` from 8-connected labeling, `euler` from the cubical complex, and
/// `beta1 = beta0 - euler`.
pub fn betti_numbers(mask: &BinaryMask) -> TopologySummary {
    let beta0 = label_components(mask, Connectivity::Eight).count();
    let euler = euler_characteristic(mask);
    let beta1 = beta0 as i64 - euler;
    debug_assert!(beta1 >= 0, "negative beta1 for a planar complex");
    TopologySummary {
        beta0,
        beta1: beta1.max(0) as usize,
        euler,
    }
}

pub fn count_loops(mask: &BinaryMask) -> usize {
    betti_numbers(mask).beta1
}

/// Number of 4-connected background components that do not touch the image
/// border. Equals `beta1` by Alexander duality.
pub fn count_enclosed_background(mask: &BinaryMask) -> usize {
    let (w, h) = mask.dims();
    let bg = label_where(mask, false, Connectivity::Four);
    let mut touches = vec![false; bg.count() + 1];
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                touches[bg.label_at(x, y) as usize] = true;
            }
        }
    }
    touches[1..].iter().filter(|t| !**t).count()
}

pub fn beta0_number_error(pred: &BinaryMask, gt: &BinaryMask) -> Result<usize> {
    ensure_same_dims(pred.dims(), gt.dims())?;
    let a = label_components(pred, Connectivity::Eight).count();
    let b = label_components(gt, Connectivity::Eight).count();
    Ok(a.abs_diff(b))
}

/// Components of `pred` and `gt` left unmatched by a maximum one-to-one
/// matching in which two components may be paired only if they overlap.
pub fn beta0_matching_error(pred: &BinaryMask, gt: &BinaryMask) -> Result<usize> {
    ensure_same_dims(pred.dims(), gt.dims())?;
    let lp = label_components(pred, Connectivity::Eight);
    let lg = label_components(gt, Connectivity::Eight);
    let adjacency = overlap_graph(&lp, &lg);
    let matched = maximum_bipartite_matching(&adjacency, lg.count());
    Ok(lp.count() + lg.count() - 2 * matched)
}

/// For every left component, the sorted right components it overlaps.
fn overlap_graph(left: &ComponentLabeling, right: &ComponentLabeling) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); left.count()];
    for (&a, &b) in left.labels().iter().zip(right.labels()) {
        if a != 0 && b != 0 {
            adjacency[a as usize - 1].push(b as usize - 1);
        }
    }
    for row in &mut adjacency {
        row.sort_unstable();
        row.dedup();
    }
    adjacency
}
