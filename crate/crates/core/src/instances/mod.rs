//! Turning predicted masks into separated, classified object instances.

mod classify;
mod components;
mod polygon;
mod watershed;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use classify::assign_class_and_confidence;
pub use components::connected_components;
pub use polygon::polygonize;
pub use watershed::{dow_watershed, elevation_map, threshold_levels};

use crate::error::{Error, Result};
use crate::labels::LabelRaster;
use crate::raster::Raster;

/// One extracted object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: u32,
    pub class: Option<u32>,
    pub confidence: Option<f64>,
    pub pixels: usize,
}

/// Instance-id raster plus one record per id, records ordered by id.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSet {
    map: Raster<u32>,
    records: Vec<InstanceRecord>,
}

impl InstanceSet {
    /// Unclassified instances for every nonzero id of `map`.
    pub fn from_map(map: Raster<u32>) -> Self {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &id in map.as_slice().iter().filter(|&&id| id != 0) {
            *counts.entry(id).or_default() += 1;
        }
        let records = counts
            .into_iter()
            .map(|(id, pixels)| InstanceRecord {
                id,
                class: None,
                confidence: None,
                pixels,
            })
            .collect();
        Self { map, records }
    }

    /// Ground-truth instances carrying the classes of a label raster.
    pub fn from_labels(labels: &LabelRaster) -> Self {
        let mut set = Self::from_map(labels.ids().clone());
        for rec in &mut set.records {
            rec.class = labels.class_of().get(&rec.id).copied();
        }
        set
    }

    /// Attach externally supplied attributes; pixel counts are recomputed
    /// from the map and every id in the map must have a record.
    pub fn with_records(map: Raster<u32>, records: Vec<InstanceRecord>) -> Result<Self> {
        let mut set = Self::from_map(map);
        let mut given: BTreeMap<u32, InstanceRecord> = BTreeMap::new();
        for rec in records {
            if given.insert(rec.id, rec).is_some() {
                return Err(Error::InvalidInput("duplicate instance record".into()));
            }
        }
        for rec in &mut set.records {
            let src = given
                .remove(&rec.id)
                .ok_or_else(|| Error::InvalidInput(format!("instance {} has no record", rec.id)))?;
            if let Some(c) = src.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidInput(format!(
                        "confidence {c} of instance {} outside [0, 1]",
                        rec.id
                    )));
                }
            }
            rec.class = src.class;
            rec.confidence = src.confidence;
        }
        if let Some(id) = given.keys().next() {
            return Err(Error::InvalidInput(format!(
                "record for instance {id} which is absent from the map"
            )));
        }
        Ok(set)
    }

    pub fn map(&self) -> &Raster<u32> {
        &self.map
    }

    pub fn records(&self) -> &[InstanceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.map.shape()
    }

    pub fn record(&self, id: u32) -> Option<&InstanceRecord> {
        self.records
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Per-pixel class id (0 on background and unclassified instances).
    pub fn class_raster(&self) -> Raster<u32> {
        let classes: BTreeMap<u32, u32> = self
            .records
            .iter()
            .map(|r| (r.id, r.class.unwrap_or(0)))
            .collect();
        self.map.map(|id| if *id == 0 { 0 } else { classes[id] })
    }

    pub(crate) fn records_mut(&mut self) -> &mut [InstanceRecord] {
        &mut self.records
    }
}

/// Whether the stack holds per-class or per-level probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StackKind {
    /// Layer `k` is the probability of class `k`; layer 0 is background.
    ClassProbs,
    /// Layer `m` is the probability of being at level `m + 1` or deeper.
    LevelProbs,
}

/// Per-pixel probability maps produced by an external model.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityStack {
    kind: StackKind,
    layers: Vec<Raster<f32>>,
}

/// Allowed deviation of class probabilities from summing to one.
pub const CLASS_SUM_TOLERANCE: f32 = 1e-4;

impl ProbabilityStack {
    pub fn new(kind: StackKind, layers: Vec<Raster<f32>>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidInput("probability stack without layers".into()))?;
        for layer in &layers {
            first.check_same_shape(layer)?;
            if let Some(v) = layer.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidInput(format!(
                    "probability {v} outside [0, 1]"
                )));
            }
        }
        if kind == StackKind::ClassProbs {
            if layers.len() < 2 {
                return Err(Error::InvalidInput(
                    "class probabilities need a background and at least one class layer".into(),
                ));
            }
            for i in 0..first.len() {
                let sum: f32 = layers.iter().map(|l| l.as_slice()[i]).sum();
                if (sum - 1.0).abs() > CLASS_SUM_TOLERANCE {
                    return Err(Error::InvalidInput(format!(
                        "class probabilities at pixel {i} sum to {sum}"
                    )));
                }
            }
        }
        Ok(Self { kind, layers })
    }

    /// Background/foreground stack from a single foreground probability map.
    pub fn binary(foreground: &Raster<f32>) -> Result<Self> {
        let bg = foreground.map(|p| 1.0 - p);
        Self::new(StackKind::ClassProbs, vec![bg, foreground.clone()])
    }

    pub fn kind(&self) -> StackKind {
        self.kind
    }

    pub fn layers(&self) -> &[Raster<f32>] {
        &self.layers
    }

    pub fn shape(&self) -> (usize, usize) {
        self.layers[0].shape()
    }

    /// Number of non-background classes of a class stack.
    pub fn num_classes(&self) -> usize {
        self.layers.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_follow_map() {
        let map = Raster::from_vec(2, 3, vec![0, 4, 4, 9, 0, 4]).unwrap();
        let set = InstanceSet::from_map(map);
        let ids: Vec<_> = set.records().iter().map(|r| (r.id, r.pixels)).collect();
        assert_eq!(ids, vec![(4, 3), (9, 1)]);
        assert_eq!(set.record(9).unwrap().pixels, 1);
        assert!(set.record(5).is_none());
    }

    #[test]
    fn with_records_validates() {
        let map = Raster::from_vec(1, 2, vec![1, 2]).unwrap();
        let rec = |id, confidence| InstanceRecord {
            id,
            class: Some(1),
            confidence: Some(confidence),
            pixels: 0,
        };
        assert!(InstanceSet::with_records(map.clone(), vec![rec(1, 0.5)]).is_err());
        assert!(InstanceSet::with_records(map.clone(), vec![rec(1, 0.5), rec(2, 1.5)]).is_err());
        assert!(InstanceSet::with_records(
            map.clone(),
            vec![rec(1, 0.5), rec(2, 0.5), rec(3, 0.1)]
        )
        .is_err());
        let set = InstanceSet::with_records(map, vec![rec(2, 0.2), rec(1, 0.5)]).unwrap();
        assert_eq!(set.records()[1].pixels, 1);
        assert_eq!(set.records()[1].confidence, Some(0.2));
    }

    #[test]
    fn class_stack_validation() {
        let half = Raster::filled(2, 2, 0.5f32);
        assert!(
            ProbabilityStack::new(StackKind::ClassProbs, vec![half.clone(), half.clone()]).is_ok()
        );
        assert!(ProbabilityStack::new(StackKind::ClassProbs, vec![half.clone()]).is_err());
        let bad = Raster::filled(2, 2, 0.7f32);
        assert!(
            ProbabilityStack::new(StackKind::ClassProbs, vec![half.clone(), bad.clone()]).is_err()
        );
        assert!(ProbabilityStack::new(StackKind::LevelProbs, vec![half, bad]).is_ok());
        let out_of_range = Raster::filled(1, 1, 1.5f32);
        assert!(ProbabilityStack::new(StackKind::LevelProbs, vec![out_of_range]).is_err());
    }
}
