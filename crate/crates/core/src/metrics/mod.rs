//! Pixel-level IoU metrics and object-level average precision.
//!
//! Evaluation over several images accumulates pixel counts and ranked
//! detection events per image and reduces them once in [`Evaluator::finish`],
//! so the result does not depend on the order images are added in.

mod ap;
mod iou;
mod matching;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ap::{
    ap_from_ranked, ap_range, average_precision, count_tps, iou_thresholds, Interpolation,
};
pub use iou::{class_ious, pixel_iou, ClassIous, ClassPixelCounts};
pub use matching::{match_instances, MatchMode, MatchResult};

use crate::error::{Error, Result};
use crate::instances::{InstanceRecord, InstanceSet};
use ap::check_confidences;
use iou::{macro_mean, ratio};
use matching::{greedy_match, Overlaps};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Building versus background only.
    #[default]
    Binary,
    /// Building versus background plus per-class scores.
    Multiclass,
}

/// Roof classes: 1 metal sheet, 2 thatch, 3 asbestos, 4 concrete, 5 no roof.
pub const ALL_CLASSES: [u32; 5] = [1, 2, 3, 4, 5];
/// The three frequent classes: metal sheet, thatch, no roof.
pub const MAJOR_CLASSES: [u32; 3] = [1, 2, 5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub major_classes: Vec<u32>,
    pub all_classes: Vec<u32>,
    pub interpolation: Interpolation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: EvalMode::Binary,
            major_classes: MAJOR_CLASSES.to_vec(),
            all_classes: ALL_CLASSES.to_vec(),
            interpolation: Interpolation::AllPoints,
        }
    }
}

/// Evaluation summary. Absent values (a class missing from prediction and
/// ground truth, or AP without ground truth) are `None`, never zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `None` for an empty report.
    pub mode: Option<EvalMode>,
    pub images: usize,
    pub iou_binary: Option<f64>,
    pub per_class_iou: BTreeMap<u32, Option<f64>>,
    pub miou3: Option<f64>,
    pub miou5: Option<f64>,
    pub ap50: Option<f64>,
    pub ap50_95: Option<f64>,
    pub per_class_ap50: BTreeMap<u32, Option<f64>>,
    pub per_class_ap50_95: BTreeMap<u32, Option<f64>>,
    pub map50_3: Option<f64>,
    pub map50_5: Option<f64>,
    pub map50_95: Option<f64>,
    pub tps: Option<u64>,
}

/// Ranked detections of one scope (binary, or one class) at every threshold.
#[derive(Clone, Debug, Default)]
struct DetectionLog {
    /// (confidence, image, prediction id, hit at threshold i)
    events: Vec<(f64, usize, u32, [bool; 10])>,
    ground_truths: usize,
}

impl DetectionLog {
    fn ap(&self, threshold: usize, interpolation: Interpolation) -> Option<f64> {
        let mut events: Vec<_> = self.events.iter().collect();
        events.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let hits: Vec<bool> = events.iter().map(|e| e.3[threshold]).collect();
        ap_from_ranked(&hits, self.ground_truths, interpolation)
    }

    fn ap_range(&self, interpolation: Interpolation) -> Option<f64> {
        let aps: Option<Vec<f64>> = (0..10).map(|t| self.ap(t, interpolation)).collect();
        aps.map(|v| v.iter().sum::<f64>() / 10.0)
    }

    fn hits_at(&self, threshold: usize) -> u64 {
        self.events.iter().filter(|e| e.3[threshold]).count() as u64
    }
}

/// Accumulates per-image results; see the module docs.
#[derive(Clone, Debug)]
pub struct Evaluator {
    config: EvalConfig,
    images: usize,
    binary_pixels: (u64, u64),
    class_pixels: ClassPixelCounts,
    binary: DetectionLog,
    per_class: BTreeMap<u32, DetectionLog>,
}

impl Evaluator {
    pub fn new(config: EvalConfig) -> Self {
        Self {
            config,
            images: 0,
            binary_pixels: (0, 0),
            class_pixels: ClassPixelCounts::default(),
            binary: DetectionLog::default(),
            per_class: BTreeMap::new(),
        }
    }

    /// Add one image. `image` orders detections with equal confidence across
    /// images, so give every image a distinct index.
    pub fn add(&mut self, image: usize, preds: &InstanceSet, gts: &InstanceSet) -> Result<()> {
        check_confidences(preds)?;
        let overlaps = Overlaps::compute(preds, gts)?;
        self.images += 1;

        for (&p, &g) in preds.map().as_slice().iter().zip(gts.map().as_slice()) {
            self.binary_pixels.0 += (p != 0 && g != 0) as u64;
            self.binary_pixels.1 += (p != 0 || g != 0) as u64;
        }
        log_scope(&mut self.binary, image, preds, gts, &overlaps, |_| true);

        if self.config.mode == EvalMode::Multiclass {
            if let Some(r) = preds
                .records()
                .iter()
                .chain(gts.records())
                .find(|r| r.class.is_none())
            {
                return Err(Error::InvalidInput(format!(
                    "instance {} has no class in multiclass evaluation",
                    r.id
                )));
            }
            self.class_pixels
                .add(&preds.class_raster(), &gts.class_raster())?;
            let classes: std::collections::BTreeSet<u32> = preds
                .records()
                .iter()
                .chain(gts.records())
                .filter_map(|r| r.class)
                .chain(self.config.all_classes.iter().copied())
                .collect();
            for class in classes {
                let log = self.per_class.entry(class).or_default();
                log_scope(log, image, preds, gts, &overlaps, |r| {
                    r.class == Some(class)
                });
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> MetricsReport {
        let interp = self.config.interpolation;
        let mut report = MetricsReport {
            mode: Some(self.config.mode),
            images: self.images,
            iou_binary: Some(ratio(self.binary_pixels.0, self.binary_pixels.1)),
            ap50: self.binary.ap(0, interp),
            ap50_95: self.binary.ap_range(interp),
            tps: Some(self.binary.hits_at(0)),
            ..Default::default()
        };
        if self.config.mode == EvalMode::Binary {
            return report;
        }

        let major = self.class_pixels.summarize(&self.config.major_classes);
        let all = self.class_pixels.summarize(&self.config.all_classes);
        report.miou3 = major.mean;
        report.miou5 = all.mean;
        report.per_class_iou = all.per_class;
        let empty = DetectionLog::default();
        let log = |c: &u32| self.per_class.get(c).unwrap_or(&empty);
        for c in &self.config.all_classes {
            report.per_class_ap50.insert(*c, log(c).ap(0, interp));
            report.per_class_ap50_95.insert(*c, log(c).ap_range(interp));
        }
        report.map50_3 = macro_mean(
            self.config
                .major_classes
                .iter()
                .map(|c| log(c).ap(0, interp)),
        );
        report.map50_5 = macro_mean(self.config.all_classes.iter().map(|c| log(c).ap(0, interp)));
        report.map50_95 = macro_mean(
            self.config
                .all_classes
                .iter()
                .map(|c| log(c).ap_range(interp)),
        );
        // class-aware matches are exactly the union of the per-class matches
        report.tps = Some(self.per_class.values().map(|l| l.hits_at(0)).sum());
        report
    }
}

fn log_scope(
    log: &mut DetectionLog,
    image: usize,
    preds: &InstanceSet,
    gts: &InstanceSet,
    overlaps: &Overlaps,
    keep: impl Fn(&InstanceRecord) -> bool + Copy,
) {
    let thresholds = iou_thresholds();
    let mut hits: BTreeMap<u32, [bool; 10]> = preds
        .records()
        .iter()
        .filter(|r| keep(r))
        .map(|r| (r.id, [false; 10]))
        .collect();
    for (t, &thr) in thresholds.iter().enumerate() {
        let m = greedy_match(
            preds,
            gts,
            overlaps,
            thr,
            MatchMode::ClassAgnostic,
            keep,
            keep,
        );
        for (p, _, _) in m.pairs {
            hits.get_mut(&p)
                .expect("matched predictions pass the filter")[t] = true;
        }
    }
    for (id, h) in hits {
        let conf = preds.record(id).and_then(|r| r.confidence).unwrap_or(0.0);
        log.events.push((conf, image, id, h));
    }
    log.ground_truths += gts.records().iter().filter(|r| keep(r)).count();
}

/// Evaluate a single image.
pub fn evaluate(
    preds: &InstanceSet,
    gts: &InstanceSet,
    config: &EvalConfig,
) -> Result<MetricsReport> {
    let mut ev = Evaluator::new(config.clone());
    ev.add(0, preds, gts)?;
    Ok(ev.finish())
}
