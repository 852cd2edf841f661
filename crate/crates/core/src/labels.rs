//! Training-target construction from ground-truth instance rasters: gap
//! enforcement between neighboring objects, boundary-emphasis loss weights,
//! and nested ordinal level masks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::edt::{self, squared_edt, DistanceField, UNREACHABLE};
use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

/// Instance-id raster (0 = background) with a class for every instance.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelRaster {
    ids: Raster<u32>,
    class_of: BTreeMap<u32, u32>,
}

impl LabelRaster {
    pub fn new(ids: Raster<u32>, class_of: BTreeMap<u32, u32>) -> Result<Self> {
        if let Some((&id, _)) = class_of.iter().find(|(&id, &class)| id == 0 || class == 0) {
            return Err(Error::InvalidInput(format!(
                "class map entry for instance {id} is invalid (ids and classes start at 1)"
            )));
        }
        if let Some(id) = ids
            .as_slice()
            .iter()
            .find(|&&id| id != 0 && !class_of.contains_key(&id))
        {
            return Err(Error::InvalidInput(format!("instance {id} has no class")));
        }
        Ok(Self { ids, class_of })
    }

    /// Every instance gets the same class.
    pub fn with_class(ids: Raster<u32>, class: u32) -> Result<Self> {
        let class_of = distinct_ids(&ids)
            .into_iter()
            .map(|id| (id, class))
            .collect();
        Self::new(ids, class_of)
    }

    pub fn ids(&self) -> &Raster<u32> {
        &self.ids
    }

    pub fn class_of(&self) -> &BTreeMap<u32, u32> {
        &self.class_of
    }

    pub fn shape(&self) -> (usize, usize) {
        self.ids.shape()
    }

    /// Ids present in the raster, ascending.
    pub fn instance_ids(&self) -> Vec<u32> {
        distinct_ids(&self.ids)
    }

    /// Per-pixel class id (0 on background).
    pub fn class_raster(&self) -> Raster<u32> {
        self.ids
            .map(|id| if *id == 0 { 0 } else { self.class_of[id] })
    }

    pub fn foreground(&self) -> Mask {
        self.ids.map(|&id| id != 0)
    }
}

fn distinct_ids(ids: &Raster<u32>) -> Vec<u32> {
    let mut v: Vec<u32> = ids
        .as_slice()
        .iter()
        .copied()
        .filter(|&id| id != 0)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Pixel list and bounding box of one instance.
#[derive(Clone, Debug)]
pub(crate) struct Segment {
    pub pixels: Vec<usize>,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl Segment {
    /// Bounding box grown by `margin` pixels, clipped to the grid:
    /// (row0, row1, col0, col1), half-open.
    pub fn window(
        &self,
        margin: usize,
        height: usize,
        width: usize,
    ) -> (usize, usize, usize, usize) {
        (
            self.rows.0.saturating_sub(margin),
            (self.rows.1 + 1 + margin).min(height),
            self.cols.0.saturating_sub(margin),
            (self.cols.1 + 1 + margin).min(width),
        )
    }
}

pub(crate) fn segments(ids: &Raster<u32>) -> BTreeMap<u32, Segment> {
    let mut out: BTreeMap<u32, Segment> = BTreeMap::new();
    let w = ids.width();
    for (i, &id) in ids.as_slice().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let (r, c) = (i / w, i % w);
        out.entry(id)
            .and_modify(|s| {
                s.pixels.push(i);
                s.rows = (s.rows.0.min(r), s.rows.1.max(r));
                s.cols = (s.cols.0.min(c), s.cols.1.max(c));
            })
            .or_insert(Segment {
                pixels: vec![i],
                rows: (r, r),
                cols: (c, c),
            });
    }
    out
}

/// Squared distance inside a window from each window pixel to the nearest
/// pixel satisfying `is_source(global_index)`.
fn window_edt(
    ids: &Raster<u32>,
    window: (usize, usize, usize, usize),
    is_source: impl Fn(u32) -> bool,
) -> (Vec<u64>, usize) {
    let (r0, r1, c0, c1) = window;
    let ww = c1 - c0;
    let mut source = Vec::with_capacity((r1 - r0) * ww);
    for r in r0..r1 {
        for c in c0..c1 {
            source.push(is_source(*ids.get(r, c)));
        }
    }
    (squared_edt(r1 - r0, ww, &source), ww)
}

/// Per pixel: squared distance and segment id.
type Nearest = Vec<(u64, u32)>;

/// Exact squared distances to the nearest and second-nearest distinct
/// segments, paired with the segment ids. Ties go to the lower id.
fn two_nearest_squared(ids: &Raster<u32>) -> (Nearest, Nearest) {
    let n = ids.len();
    let mut first = vec![(UNREACHABLE, 0u32); n];
    let mut second = vec![(UNREACHABLE, 0u32); n];
    let mut source = vec![false; n];
    for (id, seg) in segments(ids) {
        source.fill(false);
        for &i in &seg.pixels {
            source[i] = true;
        }
        let sq = squared_edt(ids.height(), ids.width(), &source);
        for (i, &d) in sq.iter().enumerate() {
            if d < first[i].0 {
                second[i] = first[i];
                first[i] = (d, id);
            } else if d < second[i].0 {
                second[i] = (d, id);
            }
        }
    }
    (first, second)
}

/// Distances from every pixel to the nearest (`d1`) and second-nearest
/// (`d2`) segments. Object pixels have `d1 = 0`; with fewer than two
/// segments the missing distances are `+inf`.
pub fn two_nearest_segment_distances(labels: &LabelRaster) -> (DistanceField, DistanceField) {
    let ids = labels.ids();
    let (first, second) = two_nearest_squared(ids);
    let to_field = |v: Vec<(u64, u32)>| {
        Raster::from_vec(
            ids.height(),
            ids.width(),
            v.into_iter().map(|(d, _)| edt::sqrt_distance(d)).collect(),
        )
        .expect("shape preserved")
    };
    (to_field(first), to_field(second))
}

/// What [`enforce_gap`] changed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapEdits {
    pub removed_instances: Vec<u32>,
    pub relabeled_pixels: usize,
}

/// Relabel as background every object pixel closer than `n_gap` pixels to a
/// pixel of a different instance. Both members of a close pair are eroded,
/// so afterwards any two remaining pixels of distinct instances are at least
/// `n_gap` apart.
pub fn enforce_gap(labels: &LabelRaster, n_gap: u32) -> (LabelRaster, GapEdits) {
    let ids = labels.ids();
    let (h, w) = ids.shape();
    let limit = n_gap as u64 * n_gap as u64;
    let mut out = ids.clone();
    let mut edits = GapEdits::default();
    if n_gap == 0 {
        return (labels.clone(), edits);
    }

    // pixels within n_gap of the segment all lie inside its grown bbox
    for (id, seg) in segments(ids) {
        let window = seg.window(n_gap as usize, h, w);
        let (sq, ww) = window_edt(ids, window, |other| other != 0 && other != id);
        let mut removed = 0;
        for &i in &seg.pixels {
            let (r, c) = (i / w - window.0, i % w - window.2);
            if sq[r * ww + c] < limit {
                out.as_mut_slice()[i] = 0;
                removed += 1;
            }
        }
        edits.relabeled_pixels += removed;
        if removed == seg.pixels.len() {
            edits.removed_instances.push(id);
        }
    }

    let mut class_of = labels.class_of().clone();
    for id in &edits.removed_instances {
        class_of.remove(id);
    }
    let gapped = LabelRaster::new(out, class_of).expect("ids only removed");
    (gapped, edits)
}

/// How background weights combine with the base loss weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Background pixels weighted by `w(x)` alone.
    Literal,
    /// Background pixels weighted by `1 + w(x)`.
    #[default]
    Additive,
}

/// `w0 * exp(-(d1 + d2)^2 / (2 sigma^2))`; zero when either distance is infinite.
pub fn boundary_weight(d1: f64, d2: f64, w0: f64, sigma: f64) -> f64 {
    let s = d1 + d2;
    if !s.is_finite() {
        return 0.0;
    }
    w0 * (-(s * s) / (2.0 * sigma * sigma)).exp()
}

pub type WeightMap = Raster<f32>;

/// Per-pixel loss weights emphasizing narrow background gaps between
/// objects. Foreground pixels always weigh 1.
pub fn weight_map(
    labels: &LabelRaster,
    w0: f64,
    sigma: f64,
    mode: WeightMode,
) -> Result<WeightMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(w0 >= 0.0 && w0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "w0 must be non-negative, got {w0}"
        )));
    }
    let ids = labels.ids();
    let (first, second) = two_nearest_squared(ids);
    let dist = |sq: u64| {
        if sq == UNREACHABLE {
            f64::INFINITY
        } else {
            (sq as f64).sqrt()
        }
    };
    let weights = ids
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            if id != 0 {
                return 1.0;
            }
            let w = boundary_weight(dist(first[i].0), dist(second[i].0), w0, sigma);
            match mode {
                WeightMode::Literal => w as f32,
                WeightMode::Additive => (1.0 + w) as f32,
            }
        })
        .collect();
    Ok(Raster::from_vec(ids.height(), ids.width(), weights).expect("shape preserved"))
}

/// Nested binary level masks: level 1 is every object pixel, level `m`
/// keeps pixels farther than `(m - 1) * n_pix` from their own instance's
/// border.
#[derive(Clone, Debug, PartialEq)]
pub struct OrdinalTargets {
    masks: Vec<Mask>,
    n_pix: u32,
}

impl OrdinalTargets {
    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn n_pix(&self) -> u32 {
        self.n_pix
    }

    pub fn into_masks(self) -> Vec<Mask> {
        self.masks
    }

    /// Number of levels marking each pixel.
    pub fn elevation(&self) -> Raster<u8> {
        let (h, w) = self.masks[0].shape();
        let mut out = Raster::filled(h, w, 0u8);
        for m in &self.masks {
            for (o, &b) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                *o += b as u8;
            }
        }
        out
    }
}

pub fn ordinal_targets(labels: &LabelRaster, n_lev: u32, n_pix: u32) -> Result<OrdinalTargets> {
    if n_lev == 0 || n_lev > u8::MAX as u32 {
        return Err(Error::InvalidInput(format!(
            "n_lev must be in 1..=255, got {n_lev}"
        )));
    }
    if n_pix == 0 {
        return Err(Error::InvalidInput("n_pix must be at least 1".into()));
    }
    let ids = labels.ids();
    let (h, w) = ids.shape();
    let mut masks = vec![Raster::filled(h, w, false); n_lev as usize];

    // the nearest non-member pixel of a segment lies in its bbox grown by one
    for (id, seg) in segments(ids) {
        let window = seg.window(1, h, w);
        let (sq, ww) = window_edt(ids, window, |other| other != id);
        for &i in &seg.pixels {
            let d = sq[(i / w - window.0) * ww + (i % w - window.2)];
            masks[0].as_mut_slice()[i] = true;
            for m in 1..n_lev as u64 {
                let threshold = m * n_pix as u64;
                if d <= threshold * threshold {
                    break;
                }
                masks[m as usize].as_mut_slice()[i] = true;
            }
        }
    }
    Ok(OrdinalTargets { masks, n_pix })
}
