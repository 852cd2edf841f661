//! Marker-based watershed over ordinal level masks.
//!
//! Pixel elevation is the number of level masks marking it. Each level-1
//! component is seeded from the components of its deepest non-empty level
//! and flooded outward, deepest pixels first. Within one elevation pixels
//! are taken in arrival order, so basins grow as breadth-first fronts and
//! meet halfway between markers. Components without any level-2 pixel
//! become single instances unchanged.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::components::{label_components, relabel_sequential};
use crate::error::{Error, Result};
use crate::instances::InstanceSet;
use crate::raster::{Connectivity, Mask, Raster};

/// Number of level masks marking each pixel. Fails unless the masks share a
/// shape and every level is contained in the one below it.
pub fn elevation_map(levels: &[Mask]) -> Result<Raster<u8>> {
    let first = levels
        .first()
        .ok_or_else(|| Error::InvalidInput("no level masks".into()))?;
    if levels.len() > u8::MAX as usize {
        return Err(Error::InvalidInput(format!(
            "{} levels exceed 255",
            levels.len()
        )));
    }
    for (m, pair) in levels.windows(2).enumerate() {
        first.check_same_shape(&pair[1])?;
        if !pair[1].is_subset_of(&pair[0]) {
            return Err(Error::Contract(format!(
                "level {} is not contained in level {}",
                m + 2,
                m + 1
            )));
        }
    }
    let mut out = Raster::filled(first.height(), first.width(), 0u8);
    for level in levels {
        for (o, &b) in out.as_mut_slice().iter_mut().zip(level.as_slice()) {
            *o += b as u8;
        }
    }
    Ok(out)
}

/// Threshold level probabilities at `t` and re-nest: a pixel survives at
/// level `m` only if it also survives at every level below.
pub fn threshold_levels(layers: &[Raster<f32>], t: f32) -> Result<Vec<Mask>> {
    let first = layers
        .first()
        .ok_or_else(|| Error::InvalidInput("no level layers".into()))?;
    let mut out: Vec<Mask> = Vec::with_capacity(layers.len());
    for layer in layers {
        first.check_same_shape(layer)?;
        let mut mask = layer.map(|&p| p >= t);
        if let Some(below) = out.last() {
            for (m, &b) in mask.as_mut_slice().iter_mut().zip(below.as_slice()) {
                *m &= b;
            }
        }
        out.push(mask);
    }
    Ok(out)
}

pub fn dow_watershed(levels: &[Mask], connectivity: Connectivity) -> Result<InstanceSet> {
    let elevation = elevation_map(levels)?;
    let n_lev = levels.len() as u8;
    let (h, w) = elevation.shape();
    let (objects, n_objects) = label_components(&levels[0], connectivity);

    let mut depth = vec![0u8; n_objects as usize + 1];
    for (&obj, &e) in objects.as_slice().iter().zip(elevation.as_slice()) {
        depth[obj as usize] = depth[obj as usize].max(e);
    }

    let markers = elevation
        .as_slice()
        .iter()
        .zip(objects.as_slice())
        .map(|(&e, &obj)| {
            let d = depth[obj as usize];
            obj != 0 && d >= 2 && e == d
        });
    let marker_mask = Raster::from_vec(h, w, markers.collect()).expect("shape preserved");
    let (mut labels, n_markers) = label_components(&marker_mask, connectivity);

    // components that never reach level 2 stay whole
    let mut fallback = vec![0u32; n_objects as usize + 1];
    let mut next = n_markers;
    for (label, &obj) in labels.as_mut_slice().iter_mut().zip(objects.as_slice()) {
        if obj != 0 && depth[obj as usize] < 2 {
            if fallback[obj as usize] == 0 {
                next += 1;
                fallback[obj as usize] = next;
            }
            *label = fallback[obj as usize];
        }
    }

    flood(
        &mut labels,
        &marker_mask,
        &levels[0],
        &elevation,
        n_lev,
        connectivity,
    );
    debug_assert!(labels
        .as_slice()
        .iter()
        .zip(levels[0].as_slice())
        .all(|(&l, &m)| (l != 0) == m));
    relabel_sequential(&mut labels);
    Ok(InstanceSet::from_map(labels))
}

/// Grow marker labels over `region`, lowest elevation (deepest level) first,
/// first-come first-served within an elevation.
fn flood(
    labels: &mut Raster<u32>,
    markers: &Mask,
    region: &Mask,
    elevation: &Raster<u8>,
    n_lev: u8,
    connectivity: Connectivity,
) {
    let (h, w) = labels.shape();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<_>, i: usize| {
        heap.push(Reverse((n_lev - elevation.as_slice()[i], seq, i)));
        seq += 1;
    };
    for i in (0..labels.len()).filter(|&i| markers.as_slice()[i]) {
        push(&mut heap, i);
    }
    while let Some(Reverse((_, _, i))) = heap.pop() {
        let label = labels.as_slice()[i];
        for (r, c) in connectivity.neighbors(i / w, i % w, h, w) {
            let j = r * w + c;
            if region.as_slice()[j] && labels.as_slice()[j] == 0 {
                labels.as_mut_slice()[j] = label;
                push(&mut heap, j);
            }
        }
    }
}
