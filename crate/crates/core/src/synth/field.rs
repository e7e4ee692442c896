//! Smooth unit-variance Gaussian fields from iterated box blurs.
//!
//! Three passes of a box of half-width `r` approximate a Gaussian kernel with
//! standard deviation `sqrt(r (r + 1))` cells. The radius for a target kernel
//! standard deviation `l` (in cells) is `r = round((sqrt(4 l² + 1) - 1) / 2)`.
//! White noise is drawn on a grid padded by `3 r` on every side, blurred
//! periodically and cropped, so no wrap-around reaches the output. Dividing by
//! the sum of squared composite-kernel weights restores unit variance.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Rng;

pub fn blur_radius(length_cells: f64) -> usize {
    if !(length_cells > 0.0) {
        return 0;
    }
    libm::round((libm::sqrt(4.0 * length_cells * length_cells + 1.0) - 1.0) / 2.0) as usize
}

/// Sum of squares of the 1-D three-pass box kernel.
fn kernel_energy(r: usize) -> f64 {
    let w = 2 * r + 1;
    let mut k = vec![1.0];
    for _ in 0..3 {
        let mut next = vec![0.0; k.len() + w - 1];
        for (i, a) in k.iter().enumerate() {
            for j in 0..w {
                next[i + j] += a / w as f64;
            }
        }
        k = next;
    }
    k.iter().map(|v| v * v).sum()
}

fn box_pass(
    data: &mut [f64],
    scratch: &mut [f64],
    n: usize,
    stride: usize,
    count: usize,
    outer: usize,
    r: usize,
) {
    let w = (2 * r + 1) as f64;
    for o in 0..count {
        let base = o * outer;
        let at = |i: usize| base + (i % n) * stride;
        let mut s = 0.0;
        for j in 0..=2 * r {
            s += data[at(n + j - r)];
        }
        for i in 0..n {
            scratch[i] = s / w;
            s += data[at(i + r + 1)] - data[at(n + i - r)];
        }
        for i in 0..n {
            data[at(i)] = scratch[i];
        }
    }
}

/// Unit-variance field of `nrows × ncols` with kernel standard deviation
/// `length_cells`.
pub fn gaussian_field(nrows: usize, ncols: usize, length_cells: f64, rng: &mut Rng) -> Vec<f64> {
    let r = blur_radius(length_cells);
    let pad = 3 * r;
    let (pr, pc) = (nrows + 2 * pad, ncols + 2 * pad);
    let mut data: Vec<f64> = (0..pr * pc).map(|_| rng.normal()).collect();
    if r > 0 {
        let mut scratch = vec![0.0; pr.max(pc)];
        for _ in 0..3 {
            box_pass(&mut data, &mut scratch, pc, 1, pr, pc, r);
        }
        for _ in 0..3 {
            box_pass(&mut data, &mut scratch, pr, pc, pc, 1, r);
        }
    }
    let scale = 1.0 / kernel_energy(r);
    let mut out = Vec::with_capacity(nrows * ncols);
    for row in 0..nrows {
        let start = (row + pad) * pc + pad;
        out.extend(data[start..start + ncols].iter().map(|v| v * scale));
    }
    out
}
