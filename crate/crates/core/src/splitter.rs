//! Stratified spatial train/val/test split over a square grid.
//!
//! Buildings belong to the grid cell containing their centroid. Cells are
//! dealt to subsets greedily, rarest classes first, each cell going to the
//! subset furthest below its target class counts; a deterministic local
//! search then moves or swaps cells while that lowers the deviation from
//! the targets. Footprint parts lying in a cell of another subset are
//! emitted as mask regions for that subset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip_ring_to_rect, Point, Polygon, PolygonAttributes};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Val, Subset::Test];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

/// Axis-aligned square cells anchored at the extent's min corner. Cell
/// `row * cols + col` covers `[x0, x0 + size) x [y0, y0 + size)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point,
    pub cell_size: f64,
    pub cols: usize,
    pub rows: usize,
}

pub type CellId = usize;

pub fn build_grid(extent: Extent, cell_size: f64) -> Result<Grid> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    let w = extent.max_x - extent.min_x;
    let h = extent.max_y - extent.min_y;
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::InvalidInput(
            "extent must have positive width and height".into(),
        ));
    }
    Ok(Grid {
        origin: [extent.min_x, extent.min_y],
        cell_size,
        cols: (w / cell_size).ceil() as usize,
        rows: (h / cell_size).ceil() as usize,
    })
}

impl Grid {
    pub fn num_cells(&self) -> usize {
        self.cols * self.rows
    }

    /// The unique cell containing `p` under half-open boundaries.
    pub fn cell_of(&self, p: Point) -> Option<CellId> {
        let fx = ((p[0] - self.origin[0]) / self.cell_size).floor();
        let fy = ((p[1] - self.origin[1]) / self.cell_size).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.cols as f64 || fy >= self.rows as f64 {
            return None;
        }
        Some(fy as usize * self.cols + fx as usize)
    }

    /// (col, row) of a cell.
    pub fn position(&self, cell: CellId) -> (usize, usize) {
        (cell % self.cols, cell / self.cols)
    }

    /// [min_x, min_y, max_x, max_y] of a cell.
    pub fn cell_rect(&self, cell: CellId) -> [f64; 4] {
        let (c, r) = self.position(cell);
        let x0 = self.origin[0] + c as f64 * self.cell_size;
        let y0 = self.origin[1] + r as f64 * self.cell_size;
        [x0, y0, x0 + self.cell_size, y0 + self.cell_size]
    }

    /// Cells whose closed rectangle meets the given bounds.
    fn cells_overlapping(&self, b: [f64; 4]) -> Vec<CellId> {
        let to_col = |x: f64| ((x - self.origin[0]) / self.cell_size).floor();
        let to_row = |y: f64| ((y - self.origin[1]) / self.cell_size).floor();
        let clamp = |v: f64, n: usize| v.clamp(0.0, n as f64 - 1.0) as usize;
        let (c0, c1) = (
            clamp(to_col(b[0]), self.cols),
            clamp(to_col(b[2]), self.cols),
        );
        let (r0, r1) = (
            clamp(to_row(b[1]), self.rows),
            clamp(to_row(b[3]), self.rows),
        );
        (r0..=r1)
            .flat_map(|r| (c0..=c1).map(move |c| r * self.cols + c))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildingRecord {
    pub id: u32,
    pub centroid: Point,
    pub footprint: Polygon,
    pub class: u32,
}

impl BuildingRecord {
    /// Record whose centroid is the footprint's area centroid.
    pub fn new(id: u32, footprint: Polygon, class: u32) -> Self {
        Self {
            id,
            centroid: footprint.centroid(),
            footprint,
            class,
        }
    }
}

/// Per-cell class histograms.
#[derive(Clone, Debug, PartialEq)]
pub struct CellCounts {
    pub grid: Grid,
    /// Class ids, ascending; the column order of `counts`.
    pub classes: Vec<u32>,
    /// One row per cell.
    pub counts: Vec<Vec<u64>>,
}

impl CellCounts {
    pub fn totals(&self) -> Vec<u64> {
        let mut t = vec![0; self.classes.len()];
        for row in &self.counts {
            for (a, b) in t.iter_mut().zip(row) {
                *a += b;
            }
        }
        t
    }

    fn class_index(&self, class: u32) -> Option<usize> {
        self.classes.binary_search(&class).ok()
    }
}

pub fn cell_class_counts(buildings: &[BuildingRecord], grid: &Grid) -> Result<CellCounts> {
    let mut classes: Vec<u32> = buildings.iter().map(|b| b.class).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut counts = vec![vec![0u64; classes.len()]; grid.num_cells()];
    for b in buildings {
        let cell = grid.cell_of(b.centroid).ok_or_else(|| {
            Error::InvalidInput(format!(
                "centroid ({}, {}) of building {} lies outside the grid",
                b.centroid[0], b.centroid[1], b.id
            ))
        })?;
        let k = classes
            .binary_search(&b.class)
            .expect("class collected above");
        counts[cell][k] += 1;
    }
    Ok(CellCounts {
        grid: grid.clone(),
        classes,
        counts,
    })
}

/// Target shares of train, val and test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fractions(pub [f64; 3]);

impl Fractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = [train, val, test];
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) || ((train + val + test) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "fractions must be in [0, 1] and sum to 1, got {f:?}"
            )));
        }
        Ok(Self(f))
    }
}

/// Classes ordered by ascending global frequency, ties by class id.
pub fn default_priority(counts: &CellCounts) -> Vec<u32> {
    let totals = counts.totals();
    let mut order: Vec<(u64, u32)> = counts
        .classes
        .iter()
        .zip(&totals)
        .map(|(&c, &t)| (t, c))
        .collect();
    order.sort_unstable();
    order.into_iter().map(|(_, c)| c).collect()
}

/// A piece of a building footprint to be masked out of `subset`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskRegion {
    pub building: u32,
    pub subset: Subset,
    pub cell: CellId,
    pub polygon: Polygon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSplit {
    pub grid: Grid,
    pub classes: Vec<u32>,
    /// Subset of every cell.
    pub assignment: Vec<Subset>,
    /// Per subset, per class (in `classes` order) building counts.
    pub subset_counts: [Vec<u64>; 3],
    pub masks: Vec<MaskRegion>,
}

impl GridSplit {
    pub fn subset_of(&self, cell: CellId) -> Subset {
        self.assignment[cell]
    }
}

/// (one-cell bound excess, class chi-square, cell-count chi-square), compared
/// lexicographically.
type Score = (f64, f64, f64);

/// Objective of the assignment relative to the targets.
struct Targets {
    class: Vec<[f64; 3]>,
    cells: [f64; 3],
    /// Largest single-cell count of each class.
    cell_max: Vec<f64>,
}

impl Targets {
    fn new(counts: &CellCounts, fractions: &Fractions) -> Self {
        let totals = counts.totals();
        let n = counts.counts.len() as f64;
        let cell_max = (0..counts.classes.len())
            .map(|k| counts.counts.iter().map(|row| row[k]).max().unwrap_or(0) as f64)
            .collect();
        Self {
            class: totals
                .iter()
                .map(|&t| fractions.0.map(|f| f * t as f64))
                .collect(),
            cells: fractions.0.map(|f| f * n),
            cell_max,
        }
    }

    fn score(&self, class_counts: &[[u64; 3]], cell_counts: &[u64; 3]) -> Score {
        let mut excess = 0.0;
        let mut chi = 0.0;
        for (k, targets) in self.class.iter().enumerate() {
            for s in 0..3 {
                let dev = class_counts[k][s] as f64 - targets[s];
                excess += (dev.abs() - self.cell_max[k]).max(0.0);
                if targets[s] > 0.0 {
                    chi += dev * dev / targets[s];
                }
            }
        }
        let mut cells = 0.0;
        for (&n, &t) in cell_counts.iter().zip(&self.cells) {
            if t > 0.0 {
                let dev = n as f64 - t;
                cells += dev * dev / t;
            }
        }
        (excess, chi, cells)
    }
}

/// Chi-square distance of per-subset class counts to their targets.
pub fn chi_square_to_target(
    counts: &CellCounts,
    fractions: &Fractions,
    assignment: &[Subset],
) -> f64 {
    let targets = Targets::new(counts, fractions);
    let (class_counts, cells) = tally(counts, assignment);
    targets.score(&class_counts, &cells).1
}

fn tally(counts: &CellCounts, assignment: &[Subset]) -> (Vec<[u64; 3]>, [u64; 3]) {
    let mut class_counts = vec![[0u64; 3]; counts.classes.len()];
    let mut cells = [0u64; 3];
    for (row, s) in counts.counts.iter().zip(assignment) {
        cells[s.index()] += 1;
        for (k, &n) in row.iter().enumerate() {
            class_counts[k][s.index()] += n;
        }
    }
    (class_counts, cells)
}

const MAX_REFINE_PASSES: usize = 10_000;

pub fn partition_cells(
    counts: &CellCounts,
    fractions: &Fractions,
    priority: &[u32],
) -> Result<GridSplit> {
    let priority: Vec<usize> = priority
        .iter()
        .map(|&c| {
            counts
                .class_index(c)
                .ok_or_else(|| Error::InvalidInput(format!("priority class {c} has no buildings")))
        })
        .collect::<Result<_>>()?;
    // classes left out of the priority list follow in ascending id order
    let mut order = priority.clone();
    order.extend((0..counts.classes.len()).filter(|k| !priority.contains(k)));

    let targets = Targets::new(counts, fractions);
    let total_target: [f64; 3] = {
        let t: u64 = counts.totals().iter().sum();
        fractions.0.map(|f| f * t as f64)
    };
    let open: Vec<usize> = (0..3).filter(|&s| fractions.0[s] > 0.0).collect();

    let mut cells: Vec<usize> = (0..counts.counts.len()).collect();
    cells.sort_by(|&a, &b| {
        let ka = order.iter().map(|&k| counts.counts[a][k]);
        let kb = order.iter().map(|&k| counts.counts[b][k]);
        kb.cmp(ka).then(a.cmp(&b))
    });

    let mut assignment = vec![Subset::Train; counts.counts.len()];
    let mut current = vec![[0u64; 3]; counts.classes.len()];
    let mut totals = [0u64; 3];
    let mut n_cells = [0u64; 3];
    for &cell in &cells {
        let row = &counts.counts[cell];
        let key = |s: usize| -> Vec<f64> {
            let mut v: Vec<f64> = order
                .iter()
                .filter(|&&k| row[k] > 0)
                .map(|&k| targets.class[k][s] - current[k][s] as f64)
                .collect();
            v.push(total_target[s] - totals[s] as f64);
            v.push(targets.cells[s] - n_cells[s] as f64);
            v
        };
        let mut best = open[0];
        let mut best_key = key(best);
        for &s in &open[1..] {
            let k = key(s);
            if k.partial_cmp(&best_key) == Some(std::cmp::Ordering::Greater) {
                best = s;
                best_key = k;
            }
        }
        assignment[cell] = Subset::ALL[best];
        for (k, &n) in row.iter().enumerate() {
            current[k][best] += n;
            totals[best] += n;
        }
        n_cells[best] += 1;
    }

    refine(counts, &targets, &open, &mut assignment);

    let (class_counts, _) = tally(counts, &assignment);
    let subset_counts = [0, 1, 2].map(|s| class_counts.iter().map(|c| c[s]).collect());
    Ok(GridSplit {
        grid: counts.grid.clone(),
        classes: counts.classes.clone(),
        assignment,
        subset_counts,
        masks: Vec::new(),
    })
}

/// Steepest-descent over single-cell moves and pairwise swaps.
fn refine(counts: &CellCounts, targets: &Targets, open: &[usize], assignment: &mut [Subset]) {
    let (mut class_counts, mut cells) = tally(counts, assignment);
    let apply =
        |cc: &mut Vec<[u64; 3]>, cells: &mut [u64; 3], cell: usize, from: usize, to: usize| {
            for (k, &n) in counts.counts[cell].iter().enumerate() {
                cc[k][from] -= n;
                cc[k][to] += n;
            }
            cells[from] -= 1;
            cells[to] += 1;
        };
    let better = |a: Score, b: Score| {
        const EPS: f64 = 1e-12;
        if a.0 < b.0 - EPS {
            return true;
        }
        if a.0 > b.0 + EPS {
            return false;
        }
        if a.1 < b.1 - EPS {
            return true;
        }
        if a.1 > b.1 + EPS {
            return false;
        }
        a.2 < b.2 - EPS
    };

    for _ in 0..MAX_REFINE_PASSES {
        let base = targets.score(&class_counts, &cells);
        let mut best: Option<(Score, Vec<(usize, usize)>)> = None;
        let mut consider = |score: Score, moves: Vec<(usize, usize)>| {
            if better(score, best.as_ref().map_or(base, |b| b.0)) {
                best = Some((score, moves));
            }
        };
        for (cell, subset) in assignment.iter().enumerate() {
            let from = subset.index();
            for &to in open.iter().filter(|&&s| s != from) {
                apply(&mut class_counts, &mut cells, cell, from, to);
                consider(targets.score(&class_counts, &cells), vec![(cell, to)]);
                apply(&mut class_counts, &mut cells, cell, to, from);
            }
        }
        for a in 0..assignment.len() {
            for b in a + 1..assignment.len() {
                let (sa, sb) = (assignment[a].index(), assignment[b].index());
                if sa == sb || counts.counts[a] == counts.counts[b] {
                    continue;
                }
                apply(&mut class_counts, &mut cells, a, sa, sb);
                apply(&mut class_counts, &mut cells, b, sb, sa);
                consider(targets.score(&class_counts, &cells), vec![(a, sb), (b, sa)]);
                apply(&mut class_counts, &mut cells, b, sa, sb);
                apply(&mut class_counts, &mut cells, a, sb, sa);
            }
        }
        let Some((_, moves)) = best else { break };
        for (cell, to) in moves {
            let from = assignment[cell].index();
            apply(&mut class_counts, &mut cells, cell, from, to);
            assignment[cell] = Subset::ALL[to];
        }
    }
}

/// Per class: (largest deviation of a subset's count from its target,
/// largest single-cell count of that class).
pub fn class_deviations(
    counts: &CellCounts,
    fractions: &Fractions,
    split: &GridSplit,
) -> Vec<(f64, f64)> {
    let targets = Targets::new(counts, fractions);
    (0..counts.classes.len())
        .map(|k| {
            let dev = (0..3)
                .map(|s| (split.subset_counts[s][k] as f64 - targets.class[k][s]).abs())
                .fold(0.0, f64::max);
            (dev, targets.cell_max[k])
        })
        .collect()
}

/// Fill `split.masks` with the footprint parts of every building that lie
/// in cells of a subset other than the one holding its centroid.
pub fn leakage_masks(buildings: &[BuildingRecord], split: &mut GridSplit) -> Result<()> {
    let grid = &split.grid;
    let mut masks = Vec::new();
    for b in buildings {
        let home = grid.cell_of(b.centroid).ok_or_else(|| {
            Error::InvalidInput(format!(
                "centroid of building {} lies outside the grid",
                b.id
            ))
        })?;
        let own = split.assignment[home];
        for cell in grid.cells_overlapping(b.footprint.bounds()) {
            let subset = split.assignment[cell];
            if subset == own {
                continue;
            }
            let rect = grid.cell_rect(cell);
            let Some(exterior) = clip_ring_to_rect(&b.footprint.exterior, rect) else {
                continue;
            };
            let holes = b
                .footprint
                .holes
                .iter()
                .filter_map(|h| clip_ring_to_rect(h, rect))
                .collect();
            masks.push(MaskRegion {
                building: b.id,
                subset,
                cell,
                polygon: Polygon {
                    exterior,
                    holes,
                    attributes: PolygonAttributes {
                        instance: Some(b.id),
                        class: Some(b.class),
                        confidence: None,
                    },
                },
            });
        }
    }
    split.masks = masks;
    Ok(())
}

/// Cell id to subset, keyed for JSON output.
pub fn assignment_table(split: &GridSplit) -> BTreeMap<CellId, Subset> {
    split.assignment.iter().copied().enumerate().collect()
}
