use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Mask;

/// Row-major `height x width x channels` feature grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidInput(
                "feature map dimensions must be positive".into(),
            ));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidInput(format!(
                "expected {} values, found {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// How a building mask is combined with a coarser feature grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingMode {
    /// Upsample features to the mask resolution, then pool under the mask.
    #[default]
    Upsample,
    /// Nearest-neighbour downsample the mask to the feature grid.
    DownsampleMask,
    /// Plain global average, ignoring the mask.
    NoMask,
}

/// Source coordinate and weights along one axis, half-pixel centres.
fn axis_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f32)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n_in - 1);
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}

pub fn bilinear_upsample(f: &FeatureMap, out_h: usize, out_w: usize) -> Result<FeatureMap> {
    if out_h < f.height || out_w < f.width {
        return Err(Error::InvalidInput(format!(
            "cannot upsample {}x{} to smaller {out_h}x{out_w}",
            f.height, f.width
        )));
    }
    let rows = axis_taps(f.height, out_h);
    let cols = axis_taps(f.width, out_w);
    let c = f.channels;
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for &(r0, r1, ly) in &rows {
        for &(c0, c1, lx) in &cols {
            let (a, b) = (f.pixel(r0, c0), f.pixel(r0, c1));
            let (p, q) = (f.pixel(r1, c0), f.pixel(r1, c1));
            for k in 0..c {
                let top = a[k] + (b[k] - a[k]) * lx;
                let bottom = p[k] + (q[k] - p[k]) * lx;
                data.push(top + (bottom - top) * ly);
            }
        }
    }
    Ok(FeatureMap {
        height: out_h,
        width: out_w,
        channels: c,
        data,
    })
}

/// Per-channel mean of the features under `mask`.
pub fn masked_pool(f: &FeatureMap, mask: &Mask) -> Result<Vec<f64>> {
    if mask.shape() != (f.height, f.width) {
        return Err(Error::ShapeMismatch {
            expected: (f.height, f.width),
            found: mask.shape(),
        });
    }
    let mut sum = vec![0f64; f.channels];
    let mut n = 0usize;
    for (i, &m) in mask.as_slice().iter().enumerate() {
        if m {
            n += 1;
            for (s, &v) in sum
                .iter_mut()
                .zip(&f.data[i * f.channels..(i + 1) * f.channels])
            {
                *s += v as f64;
            }
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty pooling mask".into()));
    }
    Ok(sum.into_iter().map(|s| s / n as f64).collect())
}

/// Nearest-neighbour resampling of `mask` onto an `h x w` grid.
pub fn downsample_mask(mask: &Mask, h: usize, w: usize) -> Mask {
    let pick =
        |i: usize, n_out: usize, n_in: usize| ((i * 2 + 1) * n_in / (2 * n_out)).min(n_in - 1);
    Mask::from_fn(h, w, |r, c| {
        *mask.get(pick(r, h, mask.height()), pick(c, w, mask.width()))
    })
}

/// Feature vector of one building under the chosen pooling mode. A mask too
/// small to survive nearest downsampling falls back to every feature cell
/// it touches.
pub fn pool_building(f: &FeatureMap, mask: &Mask, mode: PoolingMode) -> Result<Vec<f64>> {
    match mode {
        PoolingMode::NoMask => masked_pool(f, &Mask::filled(f.height, f.width, true)),
        PoolingMode::Upsample => {
            let up = bilinear_upsample(f, mask.height(), mask.width())?;
            masked_pool(&up, mask)
        }
        PoolingMode::DownsampleMask => {
            if mask.count() == 0 {
                return Err(Error::InvalidInput("empty pooling mask".into()));
            }
            let mut small = downsample_mask(mask, f.height, f.width);
            if small.count() == 0 {
                small = Mask::filled(f.height, f.width, false);
                for r in 0..mask.height() {
                    for c in 0..mask.width() {
                        if *mask.get(r, c) {
                            small.set(
                                r * f.height / mask.height(),
                                c * f.width / mask.width(),
                                true,
                            );
                        }
                    }
                }
            }
            masked_pool(f, &small)
        }
    }
}
