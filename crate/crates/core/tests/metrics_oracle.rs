mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{instance_set, oracle_ap, oracle_iou, oracle_ranked_hits, random_scene, rng};
use dowseg::instances::InstanceSet;
use dowseg::metrics::{
    ap_from_ranked, ap_range, average_precision, class_ious, count_tps, evaluate, iou_thresholds,
    match_instances, pixel_iou, EvalConfig, EvalMode, Interpolation, MatchMode,
};
use dowseg::{Mask, Raster};
use proptest::prelude::*;
use rand::Rng;

const AP: Interpolation = Interpolation::AllPoints;

#[test]
fn average_precision_matches_enumerator() {
    let mut rng = rng(31);
    for _ in 0..50 {
        let (preds, gts) = random_scene(&mut rng, 20);
        for (mode, aware) in [
            (MatchMode::ClassAgnostic, false),
            (MatchMode::ClassAware, true),
        ] {
            let mut per_threshold = Vec::new();
            for thr in iou_thresholds() {
                let hits = oracle_ranked_hits(&preds, &gts, thr, aware);
                let want = oracle_ap(&hits, gts.len());
                let got = average_precision(&preds, &gts, thr, mode, AP).unwrap();
                match (got, want) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
                    (a, b) => assert_eq!(a, b),
                }
                per_threshold.push(want);
            }
            let range = ap_range(&preds, &gts, mode, AP).unwrap();
            let want: Option<Vec<f64>> = per_threshold.into_iter().collect();
            match (range, want) {
                (Some(a), Some(v)) => assert!((a - v.iter().sum::<f64>() / 10.0).abs() < 1e-9),
                (a, v) => assert_eq!(a.is_none(), v.is_none()),
            }
            let tps = oracle_ranked_hits(&preds, &gts, 0.5, aware)
                .iter()
                .filter(|&&h| h)
                .count();
            assert_eq!(count_tps(&preds, &gts, mode).unwrap(), tps);
        }
    }
}

#[test]
fn hand_computed_curves() {
    assert_eq!(ap_from_ranked(&[false, true], 1, AP), Some(0.5));
    let ap = ap_from_ranked(&[true, false, true], 2, AP).unwrap();
    assert!((ap - (0.5 * 1.0 + 0.5 * (2.0 / 3.0))).abs() < 1e-15);
    assert_eq!(ap_from_ranked(&[true], 1, AP), Some(1.0));
    assert_eq!(ap_from_ranked(&[true], 0, AP), None);
    assert_eq!(oracle_ap(&[false, true], 1), Some(0.5));
    assert!((oracle_ap(&[true, false, true], 2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
}

/// Two rows of `w`-wide strips; instance `k` occupies columns of block `k`.
fn blocks(ids: &[u32], w: usize) -> Raster<u32> {
    Raster::from_fn(4, ids.len() * w, |_, c| ids[c / w])
}

#[test]
fn hand_computed_scene() {
    // one ground truth; the higher ranked prediction misses it
    let gts = instance_set(blocks(&[0, 1], 4), &BTreeMap::from([(1, (1, None))]));
    let preds = instance_set(
        blocks(&[1, 2], 4),
        &BTreeMap::from([(1, (1, Some(0.9))), (2, (1, Some(0.8)))]),
    );
    assert_eq!(
        average_precision(&preds, &gts, 0.5, MatchMode::ClassAgnostic, AP).unwrap(),
        Some(0.5)
    );
}

#[test]
fn greedy_rule_example() {
    // gt covers 10 columns; pred 1 covers 8 of them, pred 2 covers 6
    let gts = instance_set(
        Raster::from_fn(1, 10, |_, _| 1),
        &BTreeMap::from([(1, (1, None))]),
    );
    let mut map = Raster::filled(1, 10, 0u32);
    for c in 0..8 {
        map.set(0, c, 1);
    }
    let preds_a = instance_set(map, &BTreeMap::from([(1, (1, Some(0.9)))]));
    assert!((oracle_iou(&preds_a, 1, &gts, 1) - 0.8).abs() < 1e-12);
    let m = match_instances(&preds_a, &gts, 0.5, MatchMode::ClassAgnostic).unwrap();
    assert_eq!(m.pairs.len(), 1);
}

#[test]
fn matching_is_injective_and_above_threshold() {
    let mut rng = rng(32);
    for _ in 0..30 {
        let (preds, gts) = random_scene(&mut rng, 15);
        let thr = rng.gen_range(0.3..0.9);
        let m = match_instances(&preds, &gts, thr, MatchMode::ClassAgnostic).unwrap();
        let p: BTreeSet<u32> = m.pairs.iter().map(|x| x.0).collect();
        let g: BTreeSet<u32> = m.pairs.iter().map(|x| x.1).collect();
        assert_eq!(p.len(), m.pairs.len());
        assert_eq!(g.len(), m.pairs.len());
        for &(pi, gi, iou) in &m.pairs {
            assert!(iou >= thr);
            assert!((iou - oracle_iou(&preds, pi, &gts, gi)).abs() < 1e-12);
        }
        assert_eq!(m.pairs.len() + m.unmatched_predictions.len(), preds.len());
        assert_eq!(m.pairs.len() + m.unmatched_ground_truths.len(), gts.len());
    }
}

fn with_confidences(set: &InstanceSet, f: impl Fn(f64) -> f64) -> InstanceSet {
    let attrs = set
        .records()
        .iter()
        .map(|r| (r.id, (r.class.unwrap(), r.confidence.map(&f))))
        .collect();
    instance_set(set.map().clone(), &attrs)
}

#[test]
fn ap_depends_only_on_ranking() {
    let mut rng = rng(33);
    for _ in 0..20 {
        let (preds, gts) = random_scene(&mut rng, 12);
        let squashed = with_confidences(&preds, |c| (c * c + 0.01) / 1.02);
        for thr in [0.5, 0.75] {
            assert_eq!(
                average_precision(&preds, &gts, thr, MatchMode::ClassAgnostic, AP).unwrap(),
                average_precision(&squashed, &gts, thr, MatchMode::ClassAgnostic, AP).unwrap()
            );
        }
    }
}

#[test]
fn strict_range_never_exceeds_ap50() {
    let mut rng = rng(34);
    for _ in 0..50 {
        let (preds, gts) = random_scene(&mut rng, 20);
        if let (Some(a50), Some(range)) = (
            average_precision(&preds, &gts, 0.5, MatchMode::ClassAgnostic, AP).unwrap(),
            ap_range(&preds, &gts, MatchMode::ClassAgnostic, AP).unwrap(),
        ) {
            assert!(range <= a50 + 1e-12);
            assert!((0.0..=1.0).contains(&a50) && (0.0..=1.0).contains(&range));
        }
    }
}

#[test]
fn perfect_predictions_score_one() {
    let mut rng = rng(35);
    for _ in 0..10 {
        let (_, gts) = random_scene(&mut rng, 12);
        if gts.is_empty() {
            continue;
        }
        let attrs: BTreeMap<u32, (u32, Option<f64>)> = gts
            .records()
            .iter()
            .map(|r| (r.id, (r.class.unwrap(), Some(0.9))))
            .collect();
        let preds = instance_set(gts.map().clone(), &attrs);
        let cfg = EvalConfig {
            mode: EvalMode::Multiclass,
            ..Default::default()
        };
        let r = evaluate(&preds, &gts, &cfg).unwrap();
        assert_eq!(r.iou_binary, Some(1.0));
        assert_eq!(r.ap50, Some(1.0));
        assert_eq!(r.ap50_95, Some(1.0));
        assert_eq!(r.tps, Some(gts.len() as u64));
        for v in r.per_class_iou.values().flatten() {
            assert_eq!(*v, 1.0);
        }
        assert!(r.miou3.is_none_or(|v| v == 1.0));
    }
}

#[test]
fn empty_predictions_score_zero() {
    let gts = instance_set(
        blocks(&[1, 0, 2], 3),
        &BTreeMap::from([(1, (1, None)), (2, (2, None))]),
    );
    let preds = InstanceSet::from_map(Raster::filled(4, 9, 0));
    let r = evaluate(&preds, &gts, &EvalConfig::default()).unwrap();
    assert_eq!(
        (r.iou_binary, r.ap50, r.ap50_95, r.tps),
        (Some(0.0), Some(0.0), Some(0.0), Some(0))
    );
}

#[test]
fn zero_padding_does_not_change_scores() {
    let mut rng = rng(36);
    for _ in 0..10 {
        let (preds, gts) = random_scene(&mut rng, 10);
        let pad = |s: &InstanceSet| {
            let (h, w) = s.shape();
            let map = Raster::from_fn(h + 7, w + 5, |r, c| {
                if (3..h + 3).contains(&r) && (2..w + 2).contains(&c) {
                    *s.map().get(r - 3, c - 2)
                } else {
                    0
                }
            });
            let attrs = s
                .records()
                .iter()
                .map(|r| (r.id, (r.class.unwrap(), r.confidence)))
                .collect();
            instance_set(map, &attrs)
        };
        let cfg = EvalConfig {
            mode: EvalMode::Multiclass,
            all_classes: vec![1, 2, 3],
            major_classes: vec![1, 2],
            ..Default::default()
        };
        let a = evaluate(&preds, &gts, &cfg).unwrap();
        let b = evaluate(&pad(&preds), &pad(&gts), &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn pixel_iou_examples() {
    let sq = |c0: usize| Mask::from_fn(10, 20, move |_, c| (c0..c0 + 10).contains(&c));
    assert_eq!(pixel_iou(&sq(0), &sq(0)).unwrap(), 1.0);
    assert!((pixel_iou(&sq(0), &sq(5)).unwrap() - 50.0 / 150.0).abs() < 1e-15);
    assert_eq!(pixel_iou(&sq(0), &sq(10)).unwrap(), 0.0);
    let empty = Mask::filled(10, 20, false);
    assert_eq!(pixel_iou(&empty, &empty).unwrap(), 1.0);
    assert!(pixel_iou(&empty, &Mask::filled(2, 2, false)).is_err());
}

#[test]
fn class_ious_match_confusion_counts() {
    let mut rng = rng(37);
    for _ in 0..20 {
        let pred = Raster::from_fn(9, 11, |_, _| rng.gen_range(0..5u32));
        let gt = Raster::from_fn(9, 11, |_, _| rng.gen_range(0..4u32));
        let subset = [1, 2, 3, 4];
        let got = class_ious(&pred, &gt, &subset).unwrap();
        let mut present = Vec::new();
        for &c in &subset {
            let inter = pred
                .as_slice()
                .iter()
                .zip(gt.as_slice())
                .filter(|&(&p, &g)| p == c && g == c)
                .count();
            let union = pred
                .as_slice()
                .iter()
                .zip(gt.as_slice())
                .filter(|&(&p, &g)| p == c || g == c)
                .count();
            let want = (union > 0).then(|| inter as f64 / union as f64);
            assert_eq!(got.per_class[&c], want);
            present.extend(want);
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        assert!((got.mean.unwrap() - mean).abs() < 1e-12);
    }
}

#[test]
fn class_iou_examples() {
    let gt = Raster::from_fn(3, 3, |r, _| r as u32 + 1);
    assert_eq!(class_ious(&gt, &gt, &[1, 2, 3]).unwrap().mean, Some(1.0));
    let pred = Raster::from_fn(3, 3, |r, _| if r == 2 { 1 } else { r as u32 + 1 });
    let ious = class_ious(&pred, &gt, &[2, 3]).unwrap();
    assert_eq!(ious.per_class[&3], Some(0.0));
    assert_eq!(ious.mean, Some(0.5));
    let all_wrong = class_ious(&pred, &gt, &[1, 2, 3]).unwrap();
    assert!((all_wrong.mean.unwrap() - (0.5 + 1.0 + 0.0) / 3.0).abs() < 1e-15);
}

#[test]
fn class_aware_equals_agnostic_with_one_class() {
    let mut rng = rng(38);
    for _ in 0..20 {
        let (preds, gts) = random_scene(&mut rng, 15);
        let one = |s: &InstanceSet| {
            let attrs = s
                .records()
                .iter()
                .map(|r| (r.id, (1, r.confidence)))
                .collect();
            instance_set(s.map().clone(), &attrs)
        };
        let (p, g) = (one(&preds), one(&gts));
        assert_eq!(
            ap_range(&p, &g, MatchMode::ClassAware, AP).unwrap(),
            ap_range(&p, &g, MatchMode::ClassAgnostic, AP).unwrap()
        );
    }
}

#[test]
fn class_aware_never_beats_agnostic() {
    // disjoint masks leave each prediction at most one candidate above 0.5,
    // so class-aware hits are a subset of agnostic hits
    let mut rng = rng(39);
    for _ in 0..50 {
        let (preds, gts) = random_scene(&mut rng, 20);
        for thr in iou_thresholds() {
            let aware = average_precision(&preds, &gts, thr, MatchMode::ClassAware, AP).unwrap();
            let agnostic =
                average_precision(&preds, &gts, thr, MatchMode::ClassAgnostic, AP).unwrap();
            if let (Some(a), Some(b)) = (aware, agnostic) {
                assert!(a <= b + 1e-12, "{a} > {b}");
            }
        }
        assert!(
            count_tps(&preds, &gts, MatchMode::ClassAware).unwrap()
                <= count_tps(&preds, &gts, MatchMode::ClassAgnostic).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ap_is_bounded(hits in prop::collection::vec(any::<bool>(), 0..30), extra in 0usize..5) {
        let n_gt = hits.iter().filter(|&&h| h).count() + extra;
        if let Some(ap) = ap_from_ranked(&hits, n_gt, AP) {
            prop_assert!((0.0..=1.0).contains(&ap));
            prop_assert!((ap - oracle_ap(&hits, n_gt).unwrap()).abs() < 1e-12);
        }
        if let Some(ap) = ap_from_ranked(&hits, n_gt, Interpolation::Coco101) {
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }
}
