use std::collections::VecDeque;

use crate::instances::InstanceSet;
use crate::raster::{Connectivity, Mask, Raster};

/// Label maximal connected regions of `mask` as 1..N in the order their
/// first pixel appears in a row-major scan.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> InstanceSet {
    InstanceSet::from_map(label_components(mask, connectivity).0)
}

pub(crate) fn label_components(mask: &Mask, connectivity: Connectivity) -> (Raster<u32>, u32) {
    let (h, w) = mask.shape();
    let mut labels = Raster::filled(h, w, 0u32);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask.as_slice()[start] || labels.as_slice()[start] != 0 {
            continue;
        }
        next += 1;
        labels.as_mut_slice()[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for (r, c) in connectivity.neighbors(i / w, i % w, h, w) {
                let j = r * w + c;
                if mask.as_slice()[j] && labels.as_slice()[j] == 0 {
                    labels.as_mut_slice()[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, next)
}

/// Renumber nonzero labels densely in row-major first-encounter order.
pub(crate) fn relabel_sequential(labels: &mut Raster<u32>) -> u32 {
    let mut mapping = std::collections::HashMap::new();
    let mut next = 0u32;
    for v in labels.as_mut_slice() {
        if *v == 0 {
            continue;
        }
        *v = *mapping.entry(*v).or_insert_with(|| {
            next += 1;
            next
        });
    }
    next
}
