//! Topology-preserving thinning by sequential deletion of simple points.

use crate::mask::BinaryMask;

/// Clockwise 8-neighbourhood starting north. Even indices are 4-neighbours.
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Border directions visited in order within one thinning pass.
const DIRECTIONS: [(isize, isize); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];

fn ring_bits(mask: &BinaryMask, x: isize, y: isize) -> [bool; 8] {
    let mut bits = [false; 8];
    for (bit, (dx, dy)) in bits.iter_mut().zip(RING) {
        *bit = mask.get_signed(x + dx, y + dy);
    }
    bits
}

/// Components among ring positions whose value equals `value`, where two
/// positions connect if `adjacent(i, j)`. Only components containing an
/// index accepted by `counted` are tallied.
fn ring_components(
    bits: &[bool; 8],
    value: bool,
    adjacent: impl Fn(usize, usize) -> bool,
    counted: impl Fn(usize) -> bool,
) -> usize {
    let mut comp = [usize::MAX; 8];
    let mut n = 0;
    for start in 0..8 {
        if bits[start] != value || comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = n;
        while let Some(i) = stack.pop() {
            for j in 0..8 {
                if bits[j] == value && comp[j] == usize::MAX && adjacent(i, j) {
                    comp[j] = n;
                    stack.push(j);
                }
            }
        }
        n += 1;
    }
    let mut hit = vec![false; n];
    for i in 0..8 {
        if comp[i] != usize::MAX && counted(i) {
            hit[comp[i]] = true;
        }
    }
    hit.into_iter().filter(|h| *h).count()
}

/// Whether deleting the foreground pixel at `(x, y)` preserves 8-connected
/// foreground and 4-connected background topology.
pub fn is_simple_point(mask: &BinaryMask, x: usize, y: usize) -> bool {
    if !mask.get(x, y) {
        return false;
    }
    let bits = ring_bits(mask, x as isize, y as isize);
    let cyclic = |i: usize, j: usize| (i + 1) % 8 == j || (j + 1) % 8 == i;
    // 8-adjacency inside the ring: cyclic neighbours, plus pairs of
    // 4-neighbours two steps apart (e.g. north and east touch diagonally).
    let eight = |i: usize, j: usize| {
        cyclic(i, j) || (i.is_multiple_of(2) && j.is_multiple_of(2) && ((i + 2) % 8 == j || (j + 2) % 8 == i))
    };
    let fg = ring_components(&bits, true, eight, |_| true);
    if fg != 1 {
        return false;
    }
    let bg = ring_components(&bits, false, cyclic, |i| i % 2 == 0);
    bg == 1
}

fn neighbour_count(mask: &BinaryMask, x: usize, y: usize) -> usize {
    ring_bits(mask, x as isize, y as isize).iter().filter(|b| **b).count()
}

/// Thins the mask to a one-pixel-wide skeleton with identical Betti numbers.
///
/// Each pass runs four directional sub-iterations (north, south, east, west).
/// A sub-iteration considers pixels that were border points in that direction
/// when it started and deletes them in row-major order if they are simple and
/// not curve endpoints at the time they are visited. Passes repeat until
/// nothing changes.
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut cur = mask.clone();
    loop {
        let mut changed = false;
        for (dx, dy) in DIRECTIONS {
            let candidates: Vec<(usize, usize)> = (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .filter(|&(x, y)| cur.get(x, y) && !cur.get_signed(x as isize + dx, y as isize + dy))
                .collect();
            for (x, y) in candidates {
                if neighbour_count(&cur, x, y) > 1 && is_simple_point(&cur, x, y) {
                    cur.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}
