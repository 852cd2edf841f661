use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use dowseg::geojson::{write_geojson, GeoReference};
use dowseg::instances::{
    assign_class_and_confidence, dow_watershed, elevation_map, polygonize, threshold_levels,
    InstanceSet, ProbabilityStack, StackKind,
};
use dowseg::npy::{read_array, write_array};
use dowseg::raster::DType;
use dowseg::{Connectivity, Mask, NdArray, Raster};

use crate::common::{
    create_dir, group_by_stem, opt_num, run_jobs, write_text, CliResult, Failure, Outcome,
};
use crate::config::{pick, require, PipelineConfig};

/// Separate instances from level probabilities and vectorize them.
#[derive(Args, Debug)]
pub struct InstancesArgs {
    /// Directory of `<stem>.npy` level stacks (uint8 masks or float32
    /// probabilities), optional `<stem>.classes.npy` and `<stem>.interior.npy`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Probability threshold for float level stacks and interiors.
    #[arg(long)]
    threshold: Option<f32>,
    /// 4 or 8.
    #[arg(long)]
    connectivity: Option<u32>,
    /// JSON sidecar {origin_x, origin_y, pixel_size} for world coordinates.
    #[arg(long)]
    georef: Option<PathBuf>,
}

struct Settings {
    output: PathBuf,
    threshold: f32,
    connectivity: Connectivity,
    georef: Option<GeoReference>,
}

type Stems = Vec<(String, BTreeMap<String, PathBuf>)>;

pub fn run(args: InstancesArgs, config: &PipelineConfig) -> Outcome {
    match prepare(args, config) {
        Ok((settings, stems)) => run_jobs(&stems, |(stem, files)| process(&settings, stem, files)),
        Err(f) => Outcome::fail(f),
    }
}

fn prepare(args: InstancesArgs, config: &PipelineConfig) -> CliResult<(Settings, Stems)> {
    let threshold = pick(args.threshold, config.threshold, 0.5);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::invalid("threshold must be in [0, 1]"));
    }
    let connectivity = Connectivity::from_count(pick(args.connectivity, config.connectivity, 8))?;
    let georef = match args.georef.or(config.georef.clone()) {
        Some(p) => Some(GeoReference::read(p)?),
        None => None,
    };
    let input = require(args.input, config.input.clone(), "input")?;
    let output = require(args.output, config.output.clone(), "output")?;
    if input == output {
        return Err(Failure::invalid(
            "output directory must differ from the input directory",
        ));
    }
    let groups = group_by_stem(&input, &["npy", "classes.npy", "interior.npy"])?;
    let mut stems = Vec::new();
    for (stem, files) in groups {
        if !files.contains_key("npy") {
            let orphan = files.values().next().expect("group is non-empty").clone();
            return Err(Failure::invalid("probability stack without a level stack").at(orphan));
        }
        if files.contains_key("interior.npy") && !files.contains_key("classes.npy") {
            return Err(
                Failure::invalid("interior stack without a class stack").at(&files["interior.npy"])
            );
        }
        stems.push((stem, files));
    }
    create_dir(&output)?;
    Ok((
        Settings {
            output,
            threshold,
            connectivity,
            georef,
        },
        stems,
    ))
}

fn class_stack(path: &Path) -> CliResult<ProbabilityStack> {
    let layers = read_array(path)?
        .into_stack::<f32>()
        .map_err(|e| Failure::from(e).at(path))?;
    ProbabilityStack::new(StackKind::ClassProbs, layers).map_err(|e| Failure::from(e).at(path))
}

fn process(s: &Settings, stem: &str, files: &BTreeMap<String, PathBuf>) -> CliResult<Vec<String>> {
    let level_path = &files["npy"];
    let array = read_array(level_path)?;
    let (levels, first_prob): (Vec<Mask>, Option<Raster<f32>>) = match array.dtype() {
        DType::U8 => {
            let masks: Vec<Mask> = array
                .into_stack::<u8>()?
                .iter()
                .map(Mask::from_nonzero)
                .collect();
            elevation_map(&masks).map_err(|e| Failure::from(e).at(level_path))?;
            (masks, None)
        }
        DType::F32 => {
            let layers = array.into_stack::<f32>()?;
            ProbabilityStack::new(StackKind::LevelProbs, layers.clone())
                .map_err(|e| Failure::from(e).at(level_path))?;
            (
                threshold_levels(&layers, s.threshold)?,
                Some(layers[0].clone()),
            )
        }
        other => {
            return Err(Failure::invalid(format!(
                "level stacks must be uint8 or float32, not {}",
                other.descr()
            ))
            .at(level_path))
        }
    };
    let separated = dow_watershed(&levels, s.connectivity)?;

    let instances = match (files.get("classes.npy"), first_prob) {
        (Some(path), _) => {
            let probs = class_stack(path)?;
            let interior = files
                .get("interior.npy")
                .map(|p| class_stack(p))
                .transpose()?;
            assign_class_and_confidence(&separated, &probs, interior.as_ref(), s.threshold)
                .map_err(|e| Failure::from(e).at(path))?
        }
        // a single foreground class scored by the outermost level
        (None, Some(fg)) => assign_class_and_confidence(
            &separated,
            &ProbabilityStack::binary(&fg)?,
            None,
            s.threshold,
        )?,
        (None, None) => separated,
    };

    let out = |suffix: &str| s.output.join(format!("{stem}{suffix}"));
    write_array(&NdArray::from(instances.map().clone()), out(".npy"))?;
    write_text(&out(".csv"), &instance_csv(&instances))?;
    write_geojson(&polygonize(&instances), out(".geojson"), s.georef.as_ref())?;
    Ok(vec![format!(
        "instances {stem}: instances={}",
        instances.len()
    )])
}

fn instance_csv(set: &InstanceSet) -> String {
    let mut text = String::from("id,class,confidence,pixels\n");
    for r in set.records() {
        let class = r.class.map_or(String::new(), |c| c.to_string());
        let _ = writeln!(
            text,
            "{},{},{},{}",
            r.id,
            class,
            opt_num(r.confidence),
            r.pixels
        );
    }
    text
}
