use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use dowseg::npy::read_array;
use dowseg::probe::{
    check_cv_args, evaluate_hyper, fit_logreg, pool_building, select_best, stratified_folds,
    CvResult, FeatureMap, Hyper, PoolingMode,
};
use dowseg::raster::DType;
use dowseg::Mask;
use rayon::prelude::*;
use serde_json::json;

use crate::common::{
    create_dir, group_by_stem, parse_choice, read_csv, required, write_text, CliResult, Failure,
    Outcome,
};
use crate::config::{pick, require, PipelineConfig};

/// Cross-validate and fit the roof-material probe.
#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Either an `N x C` float32 NPY of pooled features, or a directory of
    /// `<stem>.npy` (H x W x C) feature maps with `<stem>.mask.npy` masks.
    #[arg(long)]
    input: Option<PathBuf>,
    /// CSV with a `class` column: one row per feature row, or `stem,class`
    /// pairs for a feature directory.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// `upsample`, `downsample-mask` or `no-mask`.
    #[arg(long, value_parser = parse_choice::<PoolingMode>)]
    pooling: Option<PoolingMode>,
}

pub fn run(args: ProbeArgs, config: &PipelineConfig, seed: u64) -> Outcome {
    match probe(args, config, seed) {
        Ok(logs) => Outcome {
            logs,
            failures: Vec::new(),
        },
        Err(f) => Outcome::fail(f),
    }
}

fn f32_array(path: &Path) -> CliResult<(Vec<usize>, Vec<f32>)> {
    let array = read_array(path)?;
    if array.dtype() != DType::F32 {
        return Err(Failure::invalid("features must be float32").at(path));
    }
    let data = array.to_f32();
    Ok((array.shape().to_vec(), data))
}

fn pooled_table(features: &Path, labels: &Path) -> CliResult<(Vec<Vec<f64>>, Vec<u32>)> {
    let (shape, data) = f32_array(features)?;
    if shape.len() != 2 || shape[1] == 0 {
        return Err(
            Failure::invalid(format!("expected N x C features, found shape {shape:?}"))
                .at(features),
        );
    }
    let x: Vec<Vec<f64>> = data
        .chunks(shape[1])
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    let y = read_csv(labels)?
        .iter()
        .map(|row| required(row, "class", labels))
        .collect::<CliResult<Vec<u32>>>()?;
    if y.len() != x.len() {
        return Err(
            Failure::invalid(format!("{} feature rows but {} labels", x.len(), y.len())).at(labels),
        );
    }
    Ok((x, y))
}

fn pooled_maps(
    dir: &Path,
    labels: &Path,
    mode: PoolingMode,
) -> CliResult<(Vec<Vec<f64>>, Vec<u32>)> {
    let groups = group_by_stem(dir, &["npy", "mask.npy"])?;
    let mut classes = BTreeMap::new();
    for row in read_csv(labels)? {
        let stem: String = required(&row, "stem", labels)?;
        let class: u32 = required(&row, "class", labels)?;
        if classes.insert(stem.clone(), class).is_some() {
            return Err(Failure::invalid(format!("duplicate stem '{stem}'")).at(labels));
        }
    }
    for (stem, files) in &groups {
        if !(files.contains_key("npy") && files.contains_key("mask.npy")) {
            let path = files.values().next().expect("non-empty").clone();
            return Err(
                Failure::invalid(format!("'{stem}' needs both a feature map and a mask")).at(path),
            );
        }
        if !classes.contains_key(stem) {
            return Err(Failure::invalid(format!("'{stem}' has no label")).at(labels));
        }
    }
    if let Some(stem) = classes.keys().find(|s| !groups.contains_key(*s)) {
        return Err(Failure::invalid(format!("label for missing sample '{stem}'")).at(labels));
    }
    let samples: Vec<(&String, &BTreeMap<String, PathBuf>)> = groups.iter().collect();
    let x = samples
        .par_iter()
        .map(|(_, files)| {
            let (shape, data) = f32_array(&files["npy"])?;
            if shape.len() != 3 {
                return Err(
                    Failure::invalid(format!("expected H x W x C, found {shape:?}"))
                        .at(&files["npy"]),
                );
            }
            let map = FeatureMap::new(shape[0], shape[1], shape[2], data)
                .map_err(|e| Failure::from(e).at(&files["npy"]))?;
            let mask_path = &files["mask.npy"];
            let mask = Mask::from_nonzero(
                &read_array(mask_path)?
                    .into_raster::<u8>()
                    .map_err(|e| Failure::from(e).at(mask_path))?,
            );
            pool_building(&map, &mask, mode).map_err(|e| Failure::from(e).at(mask_path))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let y = samples.iter().map(|(stem, _)| classes[*stem]).collect();
    Ok((x, y))
}

fn describe(h: &Hyper) -> String {
    match h {
        Hyper::Logreg { lambda } => format!("logreg lambda={lambda}"),
        Hyper::Knn { k } => format!("knn k={k}"),
    }
}

fn probe(args: ProbeArgs, config: &PipelineConfig, seed: u64) -> CliResult<Vec<String>> {
    let folds = pick(args.folds, config.folds, 10);
    let lambdas = pick(
        args.lambdas,
        config.lambdas.clone(),
        (-4..=2).map(|e| 10f64.powi(e)).collect(),
    );
    let ks = pick(args.ks, config.ks.clone(), vec![1, 3, 5, 7, 11]);
    let pooling = pick(args.pooling, config.pooling, PoolingMode::Upsample);
    let input = require(args.input, config.input.clone(), "input")?;
    let labels = require(args.labels, config.labels.clone(), "labels")?;
    let output = require(args.output, config.output.clone(), "output")?;

    let (x, y) = if input.is_dir() {
        pooled_maps(&input, &labels, pooling)?
    } else {
        pooled_table(&input, &labels)?
    };
    let grid: Vec<Hyper> = lambdas
        .iter()
        .map(|&lambda| Hyper::Logreg { lambda })
        .chain(ks.iter().map(|&k| Hyper::Knn { k }))
        .collect();
    check_cv_args(&x, &y, folds, &grid)?;

    let assignment = stratified_folds(&y, folds, seed);
    let results: Vec<CvResult> = grid
        .par_iter()
        .map(|&h| evaluate_hyper(&x, &y, &assignment, folds, h))
        .collect::<Result<_, _>>()?;
    let best = select_best(&results);

    let mut logs = vec![format!(
        "probe: samples={} channels={} folds={folds} seed={seed}",
        x.len(),
        x[0].len()
    )];
    for r in &results {
        logs.push(format!(
            "probe {}: mean_f1={:.6}",
            describe(&r.hyper),
            r.mean_f1
        ));
    }
    logs.push(format!("probe best: {}", describe(&results[best].hyper)));

    create_dir(&output)?;
    let logreg: Vec<CvResult> = results
        .iter()
        .filter(|r| matches!(r.hyper, Hyper::Logreg { .. }))
        .cloned()
        .collect();
    let mut model_info = serde_json::Value::Null;
    if !logreg.is_empty() {
        let Hyper::Logreg { lambda } = logreg[select_best(&logreg)].hyper else {
            unreachable!()
        };
        let (model, fit) = fit_logreg(&x, &y, lambda)?;
        write_text(&output.join("model.json"), &(model.to_json() + "\n"))?;
        model_info = json!({
            "lambda": lambda,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "gradient_norm": fit.gradient_norm,
            "objective": fit.objective_history.last(),
        });
        logs.push(format!(
            "probe model: lambda={lambda} iterations={} converged={}",
            fit.iterations, fit.converged
        ));
    }
    let report = json!({
        "samples": x.len(),
        "channels": x[0].len(),
        "folds": folds,
        "seed": seed,
        "pooling": pooling,
        "results": results,
        "best": results[best],
        "model": model_info,
    });
    write_text(
        &output.join("cv_report.json"),
        &(serde_json::to_string_pretty(&report).expect("json") + "\n"),
    )?;
    Ok(logs)
}
