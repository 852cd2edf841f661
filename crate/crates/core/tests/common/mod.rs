//! Brute-force oracles and random scene generators shared by the
//! integration tests. Everything here is deliberately naive.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dowseg::instances::{InstanceRecord, InstanceSet};
use dowseg::probe::FeatureMap;
use dowseg::{Connectivity, Mask, Raster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mask(rng: &mut impl Rng, h: usize, w: usize, density: f64) -> Mask {
    Mask::from_fn(h, w, |_, _| rng.gen_bool(density))
}

/// Paints `n` random rectangles with ids 1..=n (later ones overwrite).
pub fn random_rects(
    rng: &mut impl Rng,
    h: usize,
    w: usize,
    n: u32,
    max_side: usize,
) -> Raster<u32> {
    let mut ids = Raster::filled(h, w, 0u32);
    for id in 1..=n {
        let rh = rng.gen_range(1..=max_side.min(h));
        let rw = rng.gen_range(1..=max_side.min(w));
        let r0 = rng.gen_range(0..=h - rh);
        let c0 = rng.gen_range(0..=w - rw);
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                ids.set(r, c, id);
            }
        }
    }
    ids
}

/// Squared distance from every pixel to the nearest `source` pixel.
pub fn brute_squared(source: &Mask) -> Vec<Option<u64>> {
    let (h, w) = source.shape();
    let pts: Vec<(i64, i64)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| *source.get(r, c))
        .map(|(r, c)| (r as i64, c as i64))
        .collect();
    (0..h * w)
        .map(|i| {
            let (r, c) = ((i / w) as i64, (i % w) as i64);
            pts.iter()
                .map(|&(pr, pc)| ((pr - r).pow(2) + (pc - c).pow(2)) as u64)
                .min()
        })
        .collect()
}

/// Euclidean distance oracle, infinity where no source pixel exists.
pub fn brute_edt(source: &Mask) -> Vec<f32> {
    brute_squared(source)
        .into_iter()
        .map(|d| d.map_or(f32::INFINITY, |d| (d as f64).sqrt() as f32))
        .collect()
}

/// Smallest squared distance between pixels of two different instances.
pub fn min_cross_instance_sq(ids: &Raster<u32>) -> Option<u64> {
    let (h, w) = ids.shape();
    let px: Vec<(i64, i64, u32)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter_map(|(r, c)| {
            let id = *ids.get(r, c);
            (id != 0).then_some((r as i64, c as i64, id))
        })
        .collect();
    let mut best = None;
    for (i, a) in px.iter().enumerate() {
        for b in &px[i + 1..] {
            if a.2 != b.2 {
                let d = ((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as u64;
                best = Some(best.map_or(d, |x: u64| x.min(d)));
            }
        }
    }
    best
}

/// Component labels by repeated stack flood fill, first-encounter order.
pub fn brute_components(mask: &Mask, conn: Connectivity) -> Raster<u32> {
    let (h, w) = mask.shape();
    let mut out = Raster::filled(h, w, 0u32);
    let mut next = 0;
    for r in 0..h {
        for c in 0..w {
            if !*mask.get(r, c) || *out.get(r, c) != 0 {
                continue;
            }
            next += 1;
            let mut stack = vec![(r, c)];
            out.set(r, c, next);
            while let Some((y, x)) = stack.pop() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dy, dx) == (0, 0) || (conn == Connectivity::Four && dy != 0 && dx != 0)
                        {
                            continue;
                        }
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if *mask.get(ny, nx) && *out.get(ny, nx) == 0 {
                            out.set(ny, nx, next);
                            stack.push((ny, nx));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Instance set with the given (class, confidence) for every id in the map.
pub fn instance_set(map: Raster<u32>, attrs: &BTreeMap<u32, (u32, Option<f64>)>) -> InstanceSet {
    let present: std::collections::BTreeSet<u32> =
        map.as_slice().iter().copied().filter(|&v| v != 0).collect();
    let records = present
        .into_iter()
        .map(|id| InstanceRecord {
            id,
            class: Some(attrs[&id].0),
            confidence: attrs[&id].1,
            pixels: 0,
        })
        .collect();
    InstanceSet::with_records(map, records).unwrap()
}

/// Random ground truth plus jittered, partly spurious predictions with
/// coarse confidences (so ties occur) and random classes.
pub fn random_scene(rng: &mut impl Rng, max_objects: u32) -> (InstanceSet, InstanceSet) {
    let (h, w) = (48, 48);
    let n = rng.gen_range(0..=max_objects);
    let gt_map = random_rects(rng, h, w, n, 14);
    let mut pred_map = Raster::filled(h, w, 0u32);
    let mut next = 0;
    for id in 1..=n {
        let cells: Vec<(usize, usize)> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .filter(|&(r, c)| *gt_map.get(r, c) == id)
            .collect();
        if cells.is_empty() || rng.gen_bool(0.2) {
            continue;
        }
        next += 1;
        let (dr, dc) = (rng.gen_range(-3i64..=3), rng.gen_range(-3i64..=3));
        for (r, c) in cells {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                pred_map.set(nr as usize, nc as usize, next);
            }
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        next += 1;
        let (r0, c0) = (rng.gen_range(0..h - 4), rng.gen_range(0..w - 4));
        for r in r0..r0 + 4 {
            for c in c0..c0 + 4 {
                pred_map.set(r, c, next);
            }
        }
    }
    let gt_attrs = (1..=n.max(1))
        .map(|id| (id, (rng.gen_range(1..=3), None)))
        .collect();
    let pred_attrs = (1..=next.max(1))
        .map(|id| {
            (
                id,
                (
                    rng.gen_range(1..=3),
                    Some(rng.gen_range(0..=10) as f64 / 10.0),
                ),
            )
        })
        .collect();
    (
        instance_set(pred_map, &pred_attrs),
        instance_set(gt_map, &gt_attrs),
    )
}

/// IoU of two instances by a direct pixel scan.
pub fn oracle_iou(preds: &InstanceSet, p: u32, gts: &InstanceSet, g: u32) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    for (&a, &b) in preds.map().as_slice().iter().zip(gts.map().as_slice()) {
        let (x, y) = (a == p, b == g);
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    inter as f64 / union as f64
}

/// TP/FP flags of predictions ranked by confidence (descending, ties by
/// id), each greedily taking the best free ground truth at or above `thr`.
pub fn oracle_ranked_hits(
    preds: &InstanceSet,
    gts: &InstanceSet,
    thr: f64,
    class_aware: bool,
) -> Vec<bool> {
    let mut order: Vec<&InstanceRecord> = preds.records().iter().collect();
    order.sort_by(|a, b| {
        b.confidence
            .unwrap()
            .partial_cmp(&a.confidence.unwrap())
            .unwrap()
            .then(a.id.cmp(&b.id))
    });
    let mut taken = std::collections::BTreeSet::new();
    order
        .iter()
        .map(|p| {
            let mut best: Option<(f64, u32)> = None;
            for g in gts.records() {
                if taken.contains(&g.id) || (class_aware && g.class != p.class) {
                    continue;
                }
                let iou = oracle_iou(preds, p.id, gts, g.id);
                if iou >= thr && best.is_none_or(|(b, _)| iou > b) {
                    best = Some((iou, g.id));
                }
            }
            if let Some((_, g)) = best {
                taken.insert(g);
            }
            best.is_some()
        })
        .collect()
}

/// Area under the all-points precision envelope, enumerating every prefix
/// of the ranking.
pub fn oracle_ap(hits: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut points = Vec::new();
    let mut tp = 0;
    for (i, &h) in hits.iter().enumerate() {
        tp += h as usize;
        points.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (i, &(r, _)) in points.iter().enumerate() {
        if r > prev_recall {
            let envelope = points[i..].iter().map(|p| p.1).fold(0.0, f64::max);
            ap += (r - prev_recall) * envelope;
            prev_recall = r;
        }
    }
    Some(ap)
}

/// Buildings whose class shows only inside their footprint; the rest of the
/// tile carries strong class-independent clutter.
pub fn localized_dataset(rng: &mut ChaCha8Rng, n: usize) -> (Vec<FeatureMap>, Vec<Mask>, Vec<u32>) {
    let (fh, fw, ch) = (8, 8, 4);
    let mut maps = Vec::new();
    let mut masks = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let class = (i % 3) as u32;
        let r0 = rng.gen_range(0..6);
        let c0 = rng.gen_range(0..6);
        let mut data = Vec::with_capacity(fh * fw * ch);
        for r in 0..fh {
            for c in 0..fw {
                let inside = (r0..r0 + 2).contains(&r) && (c0..c0 + 2).contains(&c);
                for k in 0..ch {
                    let v = if inside {
                        let signal = if k == class as usize { 1.0 } else { 0.0 };
                        signal + rng.gen_range(-0.3..0.3)
                    } else {
                        rng.gen_range(-4.0..4.0)
                    };
                    data.push(v as f32);
                }
            }
        }
        maps.push(FeatureMap::new(fh, fw, ch, data).unwrap());
        masks.push(Mask::from_fn(32, 32, |r, c| {
            (r0 * 4..r0 * 4 + 8).contains(&r) && (c0 * 4..c0 * 4 + 8).contains(&c)
        }));
        labels.push(class);
    }
    (maps, masks, labels)
}
