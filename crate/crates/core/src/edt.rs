//! Exact Euclidean distance transform.
//!
//! Separable two-pass algorithm: a per-column 1D scan followed by a per-row
//! lower envelope of parabolas (Felzenszwalb & Huttenlocher). Squared
//! distances are kept as integers and envelope breakpoints as exact
//! rationals, so the result equals a brute-force nearest-pixel search
//! bit for bit.

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

/// Squared distance value used where no source pixel exists.
pub const UNREACHABLE: u64 = u64::MAX;

/// Per-pixel Euclidean distance in pixels; `f32::INFINITY` where the source
/// set is empty.
pub type DistanceField = Raster<f32>;

/// Which pixels of a mask the distance is measured to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceFrom {
    /// Distance to the nearest unset pixel (zero on background).
    Background,
    /// Distance to the nearest set pixel (zero on foreground).
    Foreground,
}

pub fn distance_transform(mask: &Mask, from: DistanceFrom) -> Result<DistanceField> {
    if mask.is_empty() {
        return Err(Error::InvalidInput(
            "distance transform of an empty raster".into(),
        ));
    }
    let want = from == DistanceFrom::Foreground;
    let source: Vec<bool> = mask.as_slice().iter().map(|&b| b == want).collect();
    let sq = squared_edt(mask.height(), mask.width(), &source);
    Ok(Raster::from_vec(
        mask.height(),
        mask.width(),
        sq.into_iter().map(sqrt_distance).collect(),
    )
    .expect("shape preserved"))
}

/// Converts an exact squared distance to its `f32` distance.
#[inline]
pub fn sqrt_distance(sq: u64) -> f32 {
    if sq == UNREACHABLE {
        f32::INFINITY
    } else {
        (sq as f64).sqrt() as f32
    }
}

/// Squared distance from each pixel of a `height` x `width` grid to the
/// nearest pixel flagged in `source`; [`UNREACHABLE`] if none is flagged.
pub fn squared_edt(height: usize, width: usize, source: &[bool]) -> Vec<u64> {
    assert_eq!(
        source.len(),
        height * width,
        "source length must match grid"
    );
    let mut out = vec![UNREACHABLE; height * width];

    // columns: squared distance to the nearest source in the same column
    let mut last: Option<usize>;
    for c in 0..width {
        last = None;
        for r in 0..height {
            if source[r * width + c] {
                last = Some(r);
            }
            if let Some(l) = last {
                let d = (r - l) as u64;
                out[r * width + c] = d * d;
            }
        }
        last = None;
        for r in (0..height).rev() {
            if source[r * width + c] {
                last = Some(r);
            }
            if let Some(l) = last {
                let d = (l - r) as u64;
                let i = r * width + c;
                out[i] = out[i].min(d * d);
            }
        }
    }

    // rows: lower envelope over the column distances
    let mut env = Envelope::with_capacity(width);
    let mut row = vec![0u64; width];
    for r in 0..height {
        let span = &mut out[r * width..(r + 1) * width];
        row.copy_from_slice(span);
        env.transform(&row, span);
    }
    out
}

struct Envelope {
    sites: Vec<usize>,
    // left breakpoint of each parabola as numerator / positive denominator
    bounds: Vec<(i128, i128)>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n),
        }
    }

    fn transform(&mut self, f: &[u64], out: &mut [u64]) {
        self.sites.clear();
        self.bounds.clear();
        let height = |q: usize| f[q] as i128 + (q * q) as i128;

        for q in (0..f.len()).filter(|&q| f[q] != UNREACHABLE) {
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push((0, 0));
                    break;
                };
                let s = (height(q) - height(p), 2 * (q - p) as i128);
                let k = self.sites.len() - 1;
                if k > 0 && rational_le(s, self.bounds[k]) {
                    self.sites.pop();
                    self.bounds.pop();
                    continue;
                }
                self.sites.push(q);
                self.bounds.push(s);
                break;
            }
        }

        if self.sites.is_empty() {
            out.fill(UNREACHABLE);
            return;
        }
        let mut k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            while k + 1 < self.sites.len() && rational_lt(self.bounds[k + 1], (q as i128, 1)) {
                k += 1;
            }
            let p = self.sites[k];
            let d = q.abs_diff(p) as u64;
            *slot = d * d + f[p];
        }
    }
}

#[inline]
fn rational_le(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 <= b.0 * a.1
}

#[inline]
fn rational_lt(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}
