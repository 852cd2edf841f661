use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use dowseg::instances::{InstanceRecord, InstanceSet};
use dowseg::metrics::{EvalConfig, EvalMode, Evaluator, Interpolation};
use dowseg::npy::read_array;
use dowseg::report::{report_to_csv, report_to_json};
use rayon::prelude::*;

use crate::common::{
    create_dir, field, group_by_stem, id_raster, parse_choice, read_csv, required, write_text,
    CliResult, Failure, Outcome,
};
use crate::config::{pick, require, PipelineConfig};

/// Score predicted instances against ground truth.
#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted `<stem>.npy` id maps with `<stem>.csv`
    /// (id,class,confidence).
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Directory of ground-truth `<stem>.npy` id maps, optional `<stem>.csv` (id,class).
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// `binary` or `multiclass`.
    #[arg(long, value_parser = parse_choice::<EvalMode>)]
    mode: Option<EvalMode>,
    /// `all-points` or `coco101`.
    #[arg(long, value_parser = parse_choice::<Interpolation>)]
    interpolation: Option<Interpolation>,
}

pub fn run(args: EvalArgs, config: &PipelineConfig) -> Outcome {
    match evaluate(args, config) {
        Ok(logs) => Outcome {
            logs,
            failures: Vec::new(),
        },
        Err(f) => Outcome::fail(f),
    }
}

fn read_instances(
    files: &BTreeMap<String, PathBuf>,
    need_confidence: bool,
) -> CliResult<InstanceSet> {
    let npy = &files["npy"];
    let map = id_raster(read_array(npy)?).map_err(|f| f.at(npy))?;
    let Some(csv) = files.get("csv") else {
        if need_confidence {
            return Err(Failure::invalid("predictions need a csv with confidences").at(npy));
        }
        return Ok(InstanceSet::from_map(map));
    };
    let mut records = Vec::new();
    for row in read_csv(csv)? {
        let confidence = if row.contains_key("confidence") {
            field(&row, "confidence", csv)?
        } else {
            None
        };
        let class = if row.contains_key("class") {
            field(&row, "class", csv)?
        } else {
            None
        };
        records.push(InstanceRecord {
            id: required(&row, "id", csv)?,
            class,
            confidence,
            pixels: 0,
        });
    }
    InstanceSet::with_records(map, records).map_err(|e| Failure::from(e).at(csv))
}

type Files = BTreeMap<String, PathBuf>;

fn pair(pred: &Path, gt: &Path) -> CliResult<Vec<(String, Files, Files)>> {
    let mut preds = group_by_stem(pred, &["npy", "csv"])?;
    let mut gts = group_by_stem(gt, &["npy", "csv"])?;
    let mut pairs = Vec::new();
    let stems: Vec<String> = preds
        .keys()
        .chain(gts.keys())
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    for stem in stems {
        match (preds.remove(&stem), gts.remove(&stem)) {
            (Some(p), Some(g)) if p.contains_key("npy") && g.contains_key("npy") => {
                pairs.push((stem, p, g))
            }
            (Some(p), Some(g)) => {
                let orphan = if p.contains_key("npy") { g } else { p };
                return Err(Failure::invalid(format!("'{stem}' has a csv but no npy"))
                    .at(orphan["csv"].clone()));
            }
            (Some(p), None) => {
                let path = p.into_values().next().expect("non-empty");
                return Err(
                    Failure::invalid(format!("prediction '{stem}' has no ground truth")).at(path),
                );
            }
            (None, Some(g)) => {
                let path = g.into_values().next().expect("non-empty");
                return Err(
                    Failure::invalid(format!("ground truth '{stem}' has no prediction")).at(path),
                );
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(pairs)
}

fn evaluate(args: EvalArgs, config: &PipelineConfig) -> CliResult<Vec<String>> {
    let defaults = EvalConfig::default();
    let eval_config = EvalConfig {
        mode: pick(args.mode, config.mode, defaults.mode),
        major_classes: config
            .major_classes
            .clone()
            .unwrap_or(defaults.major_classes),
        all_classes: config.all_classes.clone().unwrap_or(defaults.all_classes),
        interpolation: pick(
            args.interpolation,
            config.interpolation,
            defaults.interpolation,
        ),
    };
    let pred = require(args.pred, config.pred.clone(), "pred")?;
    let gt = require(args.gt, config.gt.clone(), "gt")?;
    let output = require(args.output, config.output.clone(), "output")?;
    let pairs = pair(&pred, &gt)?;

    let loaded: Vec<(InstanceSet, InstanceSet)> = pairs
        .par_iter()
        .map(|(_, p, g)| Ok((read_instances(p, true)?, read_instances(g, false)?)))
        .collect::<CliResult<_>>()?;

    let mut evaluator = Evaluator::new(eval_config);
    let mut logs = Vec::new();
    for (i, ((stem, p, _), (preds, gts))) in pairs.iter().zip(&loaded).enumerate() {
        evaluator
            .add(i, preds, gts)
            .map_err(|e| Failure::from(e).at(p["npy"].clone()))?;
        logs.push(format!(
            "eval {stem}: predictions={} ground_truths={}",
            preds.len(),
            gts.len()
        ));
    }
    let report = evaluator.finish();
    create_dir(&output)?;
    write_text(&output.join("report.json"), &report_to_json(&report))?;
    write_text(&output.join("report.csv"), &report_to_csv(&report))?;
    let show = |v: Option<f64>| v.map_or("null".to_string(), |x| format!("{x:.6}"));
    logs.push(format!(
        "eval: images={} iou={} ap50={} ap50_95={}",
        report.images,
        show(report.iou_binary),
        show(report.ap50),
        show(report.ap50_95)
    ));
    Ok(logs)
}
