use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::instances::{InstanceSet, ProbabilityStack, StackKind};

/// Pick each instance's class and confidence score.
///
/// The class is the argmax of the mean per-class probability, taken over the
/// instance's interior pixels from `interior` when that stack is given and
/// marks at least one pixel of the instance as foreground (background
/// probability at most `1 - threshold`); otherwise over all instance pixels
/// from `probs`. The confidence is the mean probability of the chosen class
/// under `probs` over all instance pixels. Ties go to the lowest class id.
pub fn assign_class_and_confidence(
    instances: &InstanceSet,
    probs: &ProbabilityStack,
    interior: Option<&ProbabilityStack>,
    threshold: f32,
) -> Result<InstanceSet> {
    for stack in std::iter::once(probs).chain(interior) {
        if stack.kind() != StackKind::ClassProbs {
            return Err(Error::InvalidInput(
                "class assignment needs class probabilities".into(),
            ));
        }
        if stack.shape() != instances.shape() {
            return Err(Error::ShapeMismatch {
                expected: instances.shape(),
                found: stack.shape(),
            });
        }
    }
    if let Some(inner) = interior {
        if inner.num_classes() != probs.num_classes() {
            return Err(Error::InvalidInput(format!(
                "interior stack has {} classes, full stack {}",
                inner.num_classes(),
                probs.num_classes()
            )));
        }
    }
    if let Some(r) = instances.records().iter().find(|r| r.pixels == 0) {
        return Err(Error::InvalidInput(format!("instance {} is empty", r.id)));
    }

    let classes = probs.num_classes();
    let slot: HashMap<u32, usize> = instances
        .records()
        .iter()
        .enumerate()
        .map(|(k, r)| (r.id, k))
        .collect();
    let n = instances.len();
    let mut full_sums = vec![vec![0f64; classes]; n];
    let mut inner_sums = vec![vec![0f64; classes]; n];
    let mut inner_count = vec![0usize; n];

    for (i, &id) in instances.map().as_slice().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let k = slot[&id];
        for (c, sum) in full_sums[k].iter_mut().enumerate() {
            *sum += probs.layers()[c + 1].as_slice()[i] as f64;
        }
        if let Some(inner) = interior {
            if inner.layers()[0].as_slice()[i] <= 1.0 - threshold {
                inner_count[k] += 1;
                for (c, sum) in inner_sums[k].iter_mut().enumerate() {
                    *sum += inner.layers()[c + 1].as_slice()[i] as f64;
                }
            }
        }
    }

    let mut out = instances.clone();
    for (k, rec) in out.records_mut().iter_mut().enumerate() {
        let votes = if inner_count[k] > 0 {
            &inner_sums[k]
        } else {
            &full_sums[k]
        };
        let best = argmax(votes);
        rec.class = Some(best as u32 + 1);
        rec.confidence = Some((full_sums[k][best] / rec.pixels as f64).clamp(0.0, 1.0));
    }
    Ok(out)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
