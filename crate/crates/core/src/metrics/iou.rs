use std::collections::BTreeMap;

use crate::error::Result;
use crate::raster::{Mask, Raster};

/// |pred ∩ gt| / |pred ∪ gt|, defined as 1 when both masks are empty.
pub fn pixel_iou(pred: &Mask, gt: &Mask) -> Result<f64> {
    pred.check_same_shape(gt)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        inter += (p && g) as u64;
        union += (p || g) as u64;
    }
    Ok(ratio(inter, union))
}

pub(crate) fn ratio(inter: u64, union: u64) -> f64 {
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Per-class pixel counts accumulated over one or more class rasters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassPixelCounts {
    /// class -> (intersection, predicted, ground truth)
    counts: BTreeMap<u32, (u64, u64, u64)>,
}

impl ClassPixelCounts {
    pub fn add(&mut self, pred: &Raster<u32>, gt: &Raster<u32>) -> Result<()> {
        pred.check_same_shape(gt)?;
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            if p != 0 {
                self.counts.entry(p).or_default().1 += 1;
            }
            if g != 0 {
                self.counts.entry(g).or_default().2 += 1;
            }
            if p != 0 && p == g {
                self.counts.entry(p).or_default().0 += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ClassPixelCounts) {
        for (&c, &(i, p, g)) in &other.counts {
            let e = self.counts.entry(c).or_default();
            e.0 += i;
            e.1 += p;
            e.2 += g;
        }
    }

    /// IoU of `class`, or `None` if it occurs in neither raster.
    pub fn iou(&self, class: u32) -> Option<f64> {
        match self.counts.get(&class) {
            Some(&(i, p, g)) if p + g > 0 => Some(ratio(i, p + g - i)),
            _ => None,
        }
    }

    pub fn summarize(&self, subset: &[u32]) -> ClassIous {
        let per_class: BTreeMap<u32, Option<f64>> =
            subset.iter().map(|&c| (c, self.iou(c))).collect();
        let mean = macro_mean(per_class.values().copied());
        ClassIous { per_class, mean }
    }
}

/// Mean of the present values; `None` if all are absent.
pub(crate) fn macro_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassIous {
    pub per_class: BTreeMap<u32, Option<f64>>,
    /// Macro mean over the classes present in prediction or ground truth.
    pub mean: Option<f64>,
}

/// Per-class IoU between two class-id rasters (0 = background) and their
/// macro mean over `subset`.
pub fn class_ious(pred: &Raster<u32>, gt: &Raster<u32>, subset: &[u32]) -> Result<ClassIous> {
    let mut counts = ClassPixelCounts::default();
    counts.add(pred, gt)?;
    Ok(counts.summarize(subset))
}
