//! Synthetic input trees and a runner for the `dowseg` binary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dowseg::labels::{ordinal_targets, LabelRaster};
use dowseg::npy::write_array;
use dowseg::raster::stack_rasters;
use dowseg::{NdArray, Raster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dowseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dowseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Non-overlapping rectangles on a coarse lattice, ids 1..=n.
pub fn lattice_rects(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Raster<u32> {
    let mut map = Raster::filled(h, w, 0u32);
    let mut id = 0;
    for r0 in (2..h.saturating_sub(14)).step_by(16) {
        for c0 in (2..w.saturating_sub(14)).step_by(16) {
            if rng.gen_bool(0.25) {
                continue;
            }
            id += 1;
            let (hh, ww) = (rng.gen_range(6..14), rng.gen_range(6..14));
            for r in r0..r0 + hh {
                for c in c0..c0 + ww {
                    map.set(r, c, id);
                }
            }
        }
    }
    map
}

pub fn touching_squares() -> Raster<u32> {
    Raster::from_fn(25, 46, |r, c| match (r, c) {
        (2..=22, 2..=22) => 1,
        (2..=22, 23..=43) => 2,
        _ => 0,
    })
}

fn class_csv(classes: &BTreeMap<u32, u32>) -> String {
    let mut s = String::from("id,class\n");
    for (id, c) in classes {
        let _ = writeln!(s, "{id},{c}");
    }
    s
}

/// Every input kind the commands read, under `root`.
pub struct Inputs {
    pub labels: PathBuf,
    pub levels: PathBuf,
    pub buildings: PathBuf,
    pub features: PathBuf,
    pub feature_labels: PathBuf,
    pub maps: PathBuf,
    pub map_labels: PathBuf,
}

pub fn write_inputs(root: &Path, seed: u64) -> Inputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = root.join("labels");
    let levels = root.join("levels");
    let maps = root.join("maps");
    for d in [&labels, &levels, &maps] {
        fs::create_dir_all(d).unwrap();
    }

    let mut tiles = vec![
        ("tile_a", lattice_rects(&mut rng, 64, 80)),
        ("tile_b", lattice_rects(&mut rng, 48, 48)),
    ];
    tiles.push(("tile_c", touching_squares()));
    for (stem, ids) in &tiles {
        let n = ids.as_slice().iter().copied().max().unwrap_or(0);
        let classes: BTreeMap<u32, u32> = (1..=n).map(|id| (id, rng.gen_range(1..=3))).collect();
        write_array(
            &NdArray::from(ids.clone()),
            labels.join(format!("{stem}.npy")),
        )
        .unwrap();
        fs::write(labels.join(format!("{stem}.csv")), class_csv(&classes)).unwrap();

        let lr = LabelRaster::new(ids.clone(), classes.clone()).unwrap();
        let masks = ordinal_targets(&lr, 3, 3).unwrap().into_masks();
        let probs: Vec<Raster<f32>> = masks
            .iter()
            .map(|m| {
                m.map(|&b| {
                    if b {
                        rng.gen_range(0.6f32..1.0)
                    } else {
                        rng.gen_range(0.0f32..0.4)
                    }
                })
            })
            .collect();
        write_array(
            &stack_rasters(&probs).unwrap(),
            levels.join(format!("{stem}.npy")),
        )
        .unwrap();
        // background plus three class layers, the labelled class most likely
        let (h, w) = ids.shape();
        let mut class_layers = vec![Raster::filled(h, w, 0f32); 4];
        for r in 0..h {
            for c in 0..w {
                let id = *ids.get(r, c);
                let truth = if id == 0 { 0 } else { classes[&id] as usize };
                let mut p: Vec<f32> = (0..4).map(|_| rng.gen_range(0.0f32..0.3)).collect();
                p[truth] += 1.0;
                let s: f32 = p.iter().sum();
                for (k, layer) in class_layers.iter_mut().enumerate() {
                    layer.set(r, c, p[k] / s);
                }
            }
        }
        write_array(
            &stack_rasters(&class_layers).unwrap(),
            levels.join(format!("{stem}.classes.npy")),
        )
        .unwrap();
    }

    // buildings over a 4 x 4 grid of 225 m cells
    let mut features = Vec::new();
    for i in 0..200 {
        let (w, h) = (rng.gen_range(8.0..60.0), rng.gen_range(8.0..60.0));
        let x0 = rng.gen_range(0.0..900.0 - w);
        let y0 = rng.gen_range(0.0..900.0 - h);
        let class = match rng.gen_range(0..10) {
            0..=5 => 1,
            6..=7 => 2,
            8 => 3,
            _ => 4,
        };
        features.push(serde_json::json!({
            "type": "Feature",
            "properties": {"id": i, "class": class},
            "geometry": {"type": "Polygon", "coordinates": [[[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h], [x0, y0]]]}
        }));
    }
    let buildings = root.join("buildings.geojson");
    let fc = serde_json::json!({"type": "FeatureCollection", "features": features});
    fs::write(&buildings, serde_json::to_string(&fc).unwrap()).unwrap();

    // pooled vectors: three noisy clusters
    let (n, c) = (60, 5);
    let mut data = Vec::new();
    let mut lab = String::from("class\n");
    for i in 0..n {
        let class = (i % 3) as u32;
        for k in 0..c {
            let centre = if k == class as usize { 2.0 } else { 0.0 };
            data.push(centre + rng.gen_range(-1.0f32..1.0));
        }
        let _ = writeln!(lab, "{}", class + 1);
    }
    let features_path = root.join("features.npy");
    write_array(
        &NdArray::new(vec![n, c], dowseg::raster::ArrayData::F32(data)).unwrap(),
        &features_path,
    )
    .unwrap();
    let feature_labels = root.join("features.csv");
    fs::write(&feature_labels, lab).unwrap();

    // feature maps with building masks
    let mut map_lab = String::from("stem,class\n");
    for i in 0..30 {
        let class = i % 3;
        let (r0, c0) = (rng.gen_range(0..4), rng.gen_range(0..4));
        let mut d = Vec::new();
        for r in 0..6 {
            for col in 0..6 {
                let inside = (r0..r0 + 2).contains(&r) && (c0..c0 + 2).contains(&col);
                for k in 0..3 {
                    d.push(if inside {
                        (k == class) as u8 as f32 + rng.gen_range(-0.2f32..0.2)
                    } else {
                        rng.gen_range(-3.0f32..3.0)
                    });
                }
            }
        }
        let stem = format!("b{i:02}");
        write_array(
            &NdArray::new(vec![6, 6, 3], dowseg::raster::ArrayData::F32(d)).unwrap(),
            maps.join(format!("{stem}.npy")),
        )
        .unwrap();
        let mask = Raster::from_fn(24, 24, |r, col| {
            (r0 * 4..r0 * 4 + 8).contains(&r) && (c0 * 4..c0 * 4 + 8).contains(&col)
        });
        write_array(&NdArray::from(&mask), maps.join(format!("{stem}.mask.npy"))).unwrap();
        let _ = writeln!(map_lab, "{stem},{}", class + 1);
    }
    let map_labels = root.join("maps.csv");
    fs::write(&map_labels, map_lab).unwrap();

    Inputs {
        labels,
        levels,
        buildings,
        features: features_path,
        feature_labels,
        maps,
        map_labels,
    }
}

/// Relative path to file contents for every file below `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// Runs every command with `workers` threads into `out`; returns stdout of each.
pub fn run_pipeline(
    inputs: &Inputs,
    out: &Path,
    workers: usize,
    seed: u64,
) -> Vec<(String, Output)> {
    let w = workers.to_string();
    let s = seed.to_string();
    let o = |name: &str| out.join(name);
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "targets",
            vec![
                "targets".into(),
                "--input".into(),
                path(&inputs.labels).into(),
                "--output".into(),
                path(&o("targets")).into(),
            ],
        ),
        (
            "instances",
            vec![
                "instances".into(),
                "--input".into(),
                path(&inputs.levels).into(),
                "--output".into(),
                path(&o("instances")).into(),
            ],
        ),
        (
            "eval",
            vec![
                "eval".into(),
                "--pred".into(),
                path(&o("instances")).into(),
                "--gt".into(),
                path(&inputs.labels).into(),
                "--output".into(),
                path(&o("eval")).into(),
                "--mode".into(),
                "multiclass".into(),
            ],
        ),
        (
            "split",
            vec![
                "split".into(),
                "--input".into(),
                path(&inputs.buildings).into(),
                "--output".into(),
                path(&o("split")).into(),
                "--fractions".into(),
                "0.6,0.2,0.2".into(),
            ],
        ),
        (
            "probe",
            vec![
                "probe".into(),
                "--input".into(),
                path(&inputs.features).into(),
                "--labels".into(),
                path(&inputs.feature_labels).into(),
                "--output".into(),
                path(&o("probe")).into(),
                "--folds".into(),
                "5".into(),
            ],
        ),
        (
            "probe-maps",
            vec![
                "probe".into(),
                "--input".into(),
                path(&inputs.maps).into(),
                "--labels".into(),
                path(&inputs.map_labels).into(),
                "--output".into(),
                path(&o("probe_maps")).into(),
                "--folds".into(),
                "3".into(),
            ],
        ),
    ];
    runs.into_iter()
        .map(|(name, mut args)| {
            args.extend([
                "--workers".to_string(),
                w.clone(),
                "--seed".to_string(),
                s.clone(),
            ]);
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            (name.to_string(), dowseg(&refs))
        })
        .collect()
}
