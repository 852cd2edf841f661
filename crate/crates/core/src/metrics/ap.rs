use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::InstanceSet;
use crate::metrics::matching::{greedy_match, MatchMode, Overlaps};

/// How the precision-recall curve is summarized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Exact area under the monotone precision envelope.
    #[default]
    AllPoints,
    /// Mean envelope precision at recall 0, 0.01, ..., 1.
    Coco101,
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Average precision of a ranked detection list, `true` marking a true
/// positive. `None` when there is no ground truth.
pub fn ap_from_ranked(
    hits: &[bool],
    n_ground_truth: usize,
    interpolation: Interpolation,
) -> Option<f64> {
    if n_ground_truth == 0 {
        return None;
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(hits.len());
    for (k, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        points.push((
            tp as f64 / n_ground_truth as f64,
            tp as f64 / (k + 1) as f64,
        ));
    }
    // precision envelope: running max from the right
    for k in (0..points.len().saturating_sub(1)).rev() {
        points[k].1 = points[k].1.max(points[k + 1].1);
    }
    Some(match interpolation {
        Interpolation::AllPoints => {
            let mut area = 0.0;
            let mut prev_recall = 0.0;
            for &(recall, precision) in &points {
                if recall > prev_recall {
                    area += (recall - prev_recall) * precision;
                    prev_recall = recall;
                }
            }
            area
        }
        Interpolation::Coco101 => {
            let mut sum = 0.0;
            let mut k = 0;
            for step in 0..=100 {
                let r = step as f64 / 100.0;
                while k < points.len() && points[k].0 < r {
                    k += 1;
                }
                if k < points.len() {
                    sum += points[k].1;
                }
            }
            sum / 101.0
        }
    })
}

pub(crate) fn check_confidences(preds: &InstanceSet) -> Result<()> {
    match preds.records().iter().find(|r| r.confidence.is_none()) {
        Some(r) => Err(Error::InvalidInput(format!(
            "prediction {} has no confidence score",
            r.id
        ))),
        None => Ok(()),
    }
}

/// AP of `preds` against `gts` at one IoU threshold. In class-aware mode a
/// detection only counts when its class matches; all classes share one
/// ranking.
pub fn average_precision(
    preds: &InstanceSet,
    gts: &InstanceSet,
    iou_threshold: f64,
    mode: MatchMode,
    interpolation: Interpolation,
) -> Result<Option<f64>> {
    check_confidences(preds)?;
    let overlaps = Overlaps::compute(preds, gts)?;
    Ok(ap_with(
        preds,
        gts,
        &overlaps,
        iou_threshold,
        mode,
        interpolation,
    ))
}

fn ap_with(
    preds: &InstanceSet,
    gts: &InstanceSet,
    overlaps: &Overlaps,
    iou_threshold: f64,
    mode: MatchMode,
    interpolation: Interpolation,
) -> Option<f64> {
    let m = greedy_match(
        preds,
        gts,
        overlaps,
        iou_threshold,
        mode,
        |_| true,
        |_| true,
    );
    let hits = ranked_hits(preds, &m.pairs);
    ap_from_ranked(&hits, gts.len(), interpolation)
}

pub(crate) fn ranked_hits(preds: &InstanceSet, pairs: &[(u32, u32, f64)]) -> Vec<bool> {
    let matched: std::collections::HashSet<u32> = pairs.iter().map(|p| p.0).collect();
    let mut order: Vec<_> = preds.records().iter().collect();
    order.sort_by(|a, b| crate::metrics::matching::ranking_order(a, b));
    order.iter().map(|r| matched.contains(&r.id)).collect()
}

/// Mean AP over the IoU thresholds 0.50 to 0.95 in steps of 0.05.
pub fn ap_range(
    preds: &InstanceSet,
    gts: &InstanceSet,
    mode: MatchMode,
    interpolation: Interpolation,
) -> Result<Option<f64>> {
    check_confidences(preds)?;
    let overlaps = Overlaps::compute(preds, gts)?;
    let aps: Option<Vec<f64>> = iou_thresholds()
        .iter()
        .map(|&t| ap_with(preds, gts, &overlaps, t, mode, interpolation))
        .collect();
    Ok(aps.map(|v| v.iter().sum::<f64>() / v.len() as f64))
}

/// Number of predictions matched at IoU ≥ 0.5.
pub fn count_tps(preds: &InstanceSet, gts: &InstanceSet, mode: MatchMode) -> Result<usize> {
    let overlaps = Overlaps::compute(preds, gts)?;
    Ok(
        greedy_match(preds, gts, &overlaps, 0.5, mode, |_| true, |_| true)
            .pairs
            .len(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_curves() {
        assert_eq!(
            ap_from_ranked(&[true], 1, Interpolation::AllPoints),
            Some(1.0)
        );
        assert_eq!(
            ap_from_ranked(&[false, true], 1, Interpolation::AllPoints),
            Some(0.5)
        );
        let ap = ap_from_ranked(&[true, false, true], 2, Interpolation::AllPoints).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(ap_from_ranked(&[], 3, Interpolation::AllPoints), Some(0.0));
        assert_eq!(ap_from_ranked(&[true], 0, Interpolation::AllPoints), None);
    }

    #[test]
    fn coco_sampling() {
        assert_eq!(
            ap_from_ranked(&[true], 1, Interpolation::Coco101),
            Some(1.0)
        );
        // precision 1 up to recall .5, 2/3 above
        let ap = ap_from_ranked(&[true, false, true], 2, Interpolation::Coco101).unwrap();
        let expected = (51.0 * 1.0 + 50.0 * 2.0 / 3.0) / 101.0;
        assert!((ap - expected).abs() < 1e-12);
    }

    #[test]
    fn thresholds() {
        let t = iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[1], 0.55);
        assert_eq!(t[9], 0.95);
    }
}
