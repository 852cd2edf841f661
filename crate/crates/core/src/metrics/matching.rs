use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{InstanceRecord, InstanceSet};

/// Whether a prediction may only match ground truth of its own class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    #[default]
    ClassAgnostic,
    ClassAware,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// (prediction id, ground-truth id, IoU) in processing order.
    pub pairs: Vec<(u32, u32, f64)>,
    /// Prediction ids in processing order.
    pub unmatched_predictions: Vec<u32>,
    /// Ground-truth ids ascending.
    pub unmatched_ground_truths: Vec<u32>,
    pub threshold: f64,
}

/// Pairwise IoUs between overlapping predicted and ground-truth instances.
#[derive(Clone, Debug)]
pub(crate) struct Overlaps {
    iou: HashMap<(u32, u32), f64>,
    by_pred: HashMap<u32, Vec<u32>>,
}

impl Overlaps {
    pub fn compute(preds: &InstanceSet, gts: &InstanceSet) -> Result<Self> {
        if preds.shape() != gts.shape() {
            return Err(Error::ShapeMismatch {
                expected: gts.shape(),
                found: preds.shape(),
            });
        }
        let mut inter: HashMap<(u32, u32), u64> = HashMap::new();
        for (&p, &g) in preds.map().as_slice().iter().zip(gts.map().as_slice()) {
            if p != 0 && g != 0 {
                *inter.entry((p, g)).or_default() += 1;
            }
        }
        let mut iou = HashMap::with_capacity(inter.len());
        let mut by_pred: HashMap<u32, Vec<u32>> = HashMap::new();
        for ((p, g), i) in inter {
            let pa = preds.record(p).expect("map ids have records").pixels as u64;
            let ga = gts.record(g).expect("map ids have records").pixels as u64;
            iou.insert((p, g), i as f64 / (pa + ga - i) as f64);
            by_pred.entry(p).or_default().push(g);
        }
        for gs in by_pred.values_mut() {
            gs.sort_unstable();
        }
        Ok(Self { iou, by_pred })
    }

    pub fn candidates(&self, pred: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.by_pred
            .get(&pred)
            .into_iter()
            .flatten()
            .map(move |&g| (g, self.iou[&(pred, g)]))
    }
}

/// Descending confidence, then ascending id; missing confidences rank last.
pub(crate) fn ranking_order(a: &InstanceRecord, b: &InstanceRecord) -> Ordering {
    let key = |r: &InstanceRecord| r.confidence.unwrap_or(f64::NEG_INFINITY);
    key(b).total_cmp(&key(a)).then(a.id.cmp(&b.id))
}

pub fn match_instances(
    preds: &InstanceSet,
    gts: &InstanceSet,
    iou_threshold: f64,
    mode: MatchMode,
) -> Result<MatchResult> {
    let overlaps = Overlaps::compute(preds, gts)?;
    Ok(greedy_match(
        preds,
        gts,
        &overlaps,
        iou_threshold,
        mode,
        |_| true,
        |_| true,
    ))
}

/// Greedy confidence-ordered matching restricted to the predictions and
/// ground truths accepted by the filters.
pub(crate) fn greedy_match(
    preds: &InstanceSet,
    gts: &InstanceSet,
    overlaps: &Overlaps,
    iou_threshold: f64,
    mode: MatchMode,
    pred_filter: impl Fn(&InstanceRecord) -> bool,
    gt_filter: impl Fn(&InstanceRecord) -> bool,
) -> MatchResult {
    let mut order: Vec<&InstanceRecord> =
        preds.records().iter().filter(|r| pred_filter(r)).collect();
    order.sort_by(|a, b| ranking_order(a, b));
    let eligible: HashMap<u32, Option<u32>> = gts
        .records()
        .iter()
        .filter(|r| gt_filter(r))
        .map(|r| (r.id, r.class))
        .collect();
    let mut taken: HashMap<u32, bool> = HashMap::new();

    let mut result = MatchResult {
        pairs: Vec::new(),
        unmatched_predictions: Vec::new(),
        unmatched_ground_truths: Vec::new(),
        threshold: iou_threshold,
    };
    for pred in order {
        let mut best: Option<(u32, f64)> = None;
        for (g, iou) in overlaps.candidates(pred.id) {
            let Some(&g_class) = eligible.get(&g) else {
                continue;
            };
            if taken.contains_key(&g) || iou < iou_threshold {
                continue;
            }
            if mode == MatchMode::ClassAware && (pred.class.is_none() || pred.class != g_class) {
                continue;
            }
            // candidates ascend by id, so strict comparison keeps the lower id on ties
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        match best {
            Some((g, iou)) => {
                taken.insert(g, true);
                result.pairs.push((pred.id, g, iou));
            }
            None => result.unmatched_predictions.push(pred.id),
        }
    }
    let mut unmatched: Vec<u32> = eligible
        .keys()
        .copied()
        .filter(|g| !taken.contains_key(g))
        .collect();
    unmatched.sort_unstable();
    result.unmatched_ground_truths = unmatched;
    result
}
