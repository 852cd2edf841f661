use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use dowseg::geojson::{read_features, write_geojson};
use dowseg::geometry::PolygonSet;
use dowseg::splitter::{
    build_grid, cell_class_counts, default_priority, leakage_masks, partition_cells,
    BuildingRecord, Extent, Fractions, Subset,
};
use serde_json::{json, Value};

use crate::common::{create_dir, write_text, CliResult, Failure, Outcome};
use crate::config::{pick, require, PipelineConfig};

/// Stratified spatial train/val/test split of building footprints.
#[derive(Args, Debug)]
pub struct SplitArgs {
    /// GeoJSON FeatureCollection of footprints with an integer `class`
    /// property and optional integer `id`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Train, val and test shares, e.g. `0.7,0.15,0.15`.
    #[arg(long, value_parser = parse_fractions)]
    fractions: Option<[f64; 3]>,
    #[arg(long)]
    cell_size: Option<f64>,
    /// Class priority, rarest first, e.g. `4,3`. Defaults to ascending
    /// global frequency.
    #[arg(long, value_delimiter = ',')]
    priority: Option<Vec<u32>>,
}

fn parse_fractions(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected three values, found {}", v.len()))
}

pub fn run(args: SplitArgs, config: &PipelineConfig) -> Outcome {
    match split(args, config) {
        Ok(logs) => Outcome {
            logs,
            failures: Vec::new(),
        },
        Err(f) => Outcome::fail(f),
    }
}

fn int_property(props: &serde_json::Map<String, Value>, name: &str) -> Option<Option<u32>> {
    props
        .get(name)
        .map(|v| v.as_u64().and_then(|n| u32::try_from(n).ok()))
}

fn split(args: SplitArgs, config: &PipelineConfig) -> CliResult<Vec<String>> {
    let f = require(args.fractions, config.fractions, "fractions")?;
    let fractions = Fractions::new(f[0], f[1], f[2])?;
    let cell_size = pick(args.cell_size, config.cell_size, 225.0);
    let input = require(args.input, config.input.clone(), "input")?;
    let output = require(args.output, config.output.clone(), "output")?;

    let mut buildings = Vec::new();
    for (i, feature) in read_features(&input)?.into_iter().enumerate() {
        let bad = |msg: String| Failure::invalid(msg).at(&input);
        let class = int_property(&feature.properties, "class")
            .flatten()
            .ok_or_else(|| bad(format!("feature {i} lacks an integer 'class' property")))?;
        let id = match int_property(&feature.properties, "id") {
            Some(Some(id)) => id,
            Some(None) => return Err(bad(format!("feature {i} has a non-integer 'id'"))),
            None => i as u32,
        };
        buildings.push(BuildingRecord::new(id, feature.polygon, class));
    }
    if buildings.is_empty() {
        return Err(Failure::invalid("no buildings").at(&input));
    }
    let extent = buildings.iter().fold(
        Extent {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        },
        |e, b| {
            let [x0, y0, x1, y1] = b.footprint.bounds();
            Extent {
                min_x: e.min_x.min(x0),
                min_y: e.min_y.min(y0),
                max_x: e.max_x.max(x1),
                max_y: e.max_y.max(y1),
            }
        },
    );
    let grid = build_grid(extent, cell_size)?;
    let counts = cell_class_counts(&buildings, &grid)?;
    let priority = args
        .priority
        .or(config.priority.clone())
        .unwrap_or_else(|| default_priority(&counts));
    let mut split = partition_cells(&counts, &fractions, &priority)?;
    leakage_masks(&buildings, &mut split)?;

    create_dir(&output)?;
    let cells: Vec<Value> = split
        .assignment
        .iter()
        .enumerate()
        .map(|(cell, subset)| {
            let (col, row) = grid.position(cell);
            let hist: BTreeMap<String, u64> = counts
                .classes
                .iter()
                .zip(&counts.counts[cell])
                .filter(|(_, &n)| n > 0)
                .map(|(c, &n)| (c.to_string(), n))
                .collect();
            json!({"cell": cell, "col": col, "row": row, "set": subset.name(), "counts": hist})
        })
        .collect();
    let doc = json!({
        "cell_size": grid.cell_size,
        "origin": grid.origin,
        "cols": grid.cols,
        "rows": grid.rows,
        "fractions": fractions.0,
        "priority": priority,
        "cells": cells,
    });
    write_text(
        &output.join("split.json"),
        &(serde_json::to_string_pretty(&doc).expect("json") + "\n"),
    )?;

    let mut csv = String::from("set,class,count\n");
    let mut logs = vec![format!(
        "split: buildings={} cells={}",
        buildings.len(),
        grid.num_cells()
    )];
    for subset in Subset::ALL {
        let masks = PolygonSet {
            polygons: split
                .masks
                .iter()
                .filter(|m| m.subset == subset)
                .map(|m| m.polygon.clone())
                .collect(),
        };
        write_geojson(
            &masks,
            output.join(format!("masks_{}.geojson", subset.name())),
            None,
        )?;
        let counts_here = &split.subset_counts[subset.index()];
        for (class, n) in split.classes.iter().zip(counts_here) {
            let _ = writeln!(csv, "{},{class},{n}", subset.name());
        }
        logs.push(format!(
            "split {}: cells={} buildings={} masks={}",
            subset.name(),
            split.assignment.iter().filter(|&&s| s == subset).count(),
            counts_here.iter().sum::<u64>(),
            masks.polygons.len()
        ));
    }
    write_text(&output.join("class_counts.csv"), &csv)?;
    Ok(logs)
}
