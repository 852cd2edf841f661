use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use dowseg::labels::{enforce_gap, ordinal_targets, weight_map, LabelRaster, WeightMode};
use dowseg::npy::{read_array, write_array};
use dowseg::raster::stack_rasters;
use dowseg::NdArray;

use crate::common::{
    create_dir, group_by_stem, id_raster, parse_choice, read_csv, required, run_jobs, write_text,
    CliResult, Failure, Outcome,
};
use crate::config::{pick, require, PipelineConfig};

/// Build gap-enforced labels, weight maps and ordinal level masks.
#[derive(Args, Debug)]
pub struct TargetsArgs {
    /// Directory of `<stem>.npy` instance rasters with optional `<stem>.csv` (id,class).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    n_lev: Option<u32>,
    #[arg(long)]
    n_pix: Option<u32>,
    #[arg(long)]
    n_gap: Option<u32>,
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// `additive` or `literal`.
    #[arg(long, value_parser = parse_choice::<WeightMode>)]
    weight_mode: Option<WeightMode>,
}

struct Settings {
    output: PathBuf,
    n_lev: u32,
    n_pix: u32,
    n_gap: u32,
    w0: f64,
    sigma: f64,
    mode: WeightMode,
}

pub fn run(args: TargetsArgs, config: &PipelineConfig) -> Outcome {
    match prepare(args, config) {
        Ok((settings, stems)) => run_jobs(&stems, |(stem, files)| process(&settings, stem, files)),
        Err(f) => Outcome::fail(f),
    }
}

type Stems = Vec<(String, BTreeMap<String, PathBuf>)>;

fn prepare(args: TargetsArgs, config: &PipelineConfig) -> CliResult<(Settings, Stems)> {
    let settings = Settings {
        output: require(args.output, config.output.clone(), "output")?,
        n_lev: pick(args.n_lev, config.n_lev, 2),
        n_pix: pick(args.n_pix, config.n_pix, 10),
        n_gap: pick(args.n_gap, config.n_gap, 7),
        w0: pick(args.w0, config.w0, 10.0),
        sigma: pick(args.sigma, config.sigma, 5.0),
        mode: pick(args.weight_mode, config.weight_mode, WeightMode::Additive),
    };
    if settings.n_lev == 0 || settings.n_lev > u8::MAX as u32 {
        return Err(Failure::invalid("n_lev must be in 1..=255"));
    }
    if settings.n_pix == 0 {
        return Err(Failure::invalid("n_pix must be positive"));
    }
    if !(settings.w0 >= 0.0 && settings.w0.is_finite())
        || !(settings.sigma > 0.0 && settings.sigma.is_finite())
    {
        return Err(Failure::invalid("w0 must be >= 0 and sigma > 0"));
    }
    let input = require(args.input, config.input.clone(), "input")?;
    let groups = group_by_stem(&input, &["npy", "csv"])?;
    let mut stems = Vec::new();
    let mut unpaired = None;
    for (stem, files) in groups {
        if !files.contains_key("npy") {
            unpaired.get_or_insert_with(|| files["csv"].clone());
            continue;
        }
        stems.push((stem, files));
    }
    if let Some(path) = unpaired {
        return Err(Failure::invalid("class table without a label raster").at(path));
    }
    create_dir(&settings.output)?;
    Ok((settings, stems))
}

fn class_table(path: &Path) -> CliResult<BTreeMap<u32, u32>> {
    let mut map = BTreeMap::new();
    for row in read_csv(path)? {
        let id: u32 = required(&row, "id", path)?;
        let class: u32 = required(&row, "class", path)?;
        if map.insert(id, class).is_some() {
            return Err(Failure::invalid(format!("duplicate id {id}")).at(path));
        }
    }
    Ok(map)
}

fn process(s: &Settings, stem: &str, files: &BTreeMap<String, PathBuf>) -> CliResult<Vec<String>> {
    let npy = &files["npy"];
    let ids = id_raster(read_array(npy)?).map_err(|f| f.at(npy))?;
    let labels = match files.get("csv") {
        Some(csv) => {
            LabelRaster::new(ids, class_table(csv)?).map_err(|e| Failure::from(e).at(csv))?
        }
        None => LabelRaster::with_class(ids, 1)?,
    };
    let (gapped, edits) = enforce_gap(&labels, s.n_gap);
    let weights = weight_map(&gapped, s.w0, s.sigma, s.mode)?;
    let levels = ordinal_targets(&gapped, s.n_lev, s.n_pix)?;
    let level_bytes: Vec<_> = levels.masks().iter().map(|m| m.map(|&b| b as u8)).collect();

    let out = |suffix: &str| s.output.join(format!("{stem}{suffix}"));
    write_array(&NdArray::from(gapped.ids().clone()), out("_gapped.npy"))?;
    write_array(&NdArray::from(weights), out("_weights.npy"))?;
    write_array(&stack_rasters(&level_bytes)?, out("_levels.npy"))?;
    let gap_json = serde_json::to_string_pretty(&edits).expect("gap edits serialize");
    write_text(&out("_gap.json"), &(gap_json + "\n"))?;

    Ok(vec![format!(
        "targets {stem}: instances={} removed={} relabeled_pixels={}",
        gapped.instance_ids().len(),
        edits.removed_instances.len(),
        edits.relabeled_pixels
    )])
}
