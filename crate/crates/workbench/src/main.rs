use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use pollen_core::features::{DescriptorKind, FeatureConfig};
use pollen_core::filters::Polarity;
use pollen_core::learn::{
    evaluate_candidate, stratified_split, BoostParams, ForestParams, GridSearchReport, Kernel, LabeledSet, MlpParams,
    ModelParams, SvmParams,
};
use pollen_core::pipeline::{GraySource, PipelineConfig};
use pollen_core::Rgb;

use pollen_workbench::batch::segment_images;
use pollen_workbench::dataset::{export_dataset, read_features, write_features, FeatureTable};
use pollen_workbench::gridfile::parse_grid;
use pollen_workbench::imageio::{save_mask, save_rgb};
use pollen_workbench::manifest::read_manifest;
use pollen_workbench::modelfile::ModelFile;
use pollen_workbench::report::{render_details, render_table, EvalRow};
use pollen_workbench::synthetic::{generate_scene, SyntheticSpec};

#[derive(Parser)]
#[command(name = "pollen", version, about = "Pollen slide segmentation, labeling and classification workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment slides into 84x84 object crops and merge them into a manifest.
    Segment(SegmentArgs),
    /// Render seeded synthetic slides with ground truth.
    Synth(SynthArgs),
    /// Extract HOG or LBP descriptors of the labeled objects in a manifest.
    Features(FeaturesArgs),
    /// Train a classifier on the training part of a split.
    Train(TrainArgs),
    /// Score a trained model on the held-out part of its split.
    Eval(EvalArgs),
    /// Repeated-split grid search over a parameter grid.
    Gridsearch(GridArgs),
    /// Run the labeling service.
    Serve(ServeArgs),
}

fn parse_rgb(s: &str) -> Result<Rgb, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected R,G,B".into());
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("bad channel {p:?}"))?;
    }
    Ok(out)
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarityArg {
    Darker,
    Brighter,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::Darker => Polarity::ObjectsDarker,
            PolarityArg::Brighter => Polarity::ObjectsBrighter,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GrayArg {
    Luma,
    HsvValue,
}

/// Overrides for every pipeline setting; unset flags keep the config file
/// value or the default.
#[derive(Args, Default)]
struct PipelineFlags {
    #[arg(long)]
    ms_spatial_radius: Option<usize>,
    #[arg(long)]
    ms_color_radius: Option<f32>,
    #[arg(long)]
    ms_max_iterations: Option<usize>,
    #[arg(long)]
    ms_epsilon: Option<f32>,
    #[arg(long)]
    otsu_fallback: Option<u8>,
    #[arg(long)]
    min_area_pre: Option<usize>,
    #[arg(long)]
    blur_kernel: Option<usize>,
    #[arg(long, value_parser = parse_rgb, value_name = "R,G,B")]
    contour_color: Option<Rgb>,
    #[arg(long)]
    morph_kernel: Option<usize>,
    #[arg(long)]
    min_area_seg: Option<usize>,
    #[arg(long)]
    adaptive_block: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    adaptive_c: Option<i32>,
    #[arg(long, value_enum)]
    adaptive_polarity: Option<PolarityArg>,
    #[arg(long)]
    min_area_refine: Option<usize>,
    #[arg(long)]
    dilate_iterations: Option<usize>,
    #[arg(long)]
    crop_size: Option<usize>,
    #[arg(long, value_parser = parse_rgb, value_name = "R,G,B")]
    background_color: Option<Rgb>,
    #[arg(long, value_enum)]
    gray_source: Option<GrayArg>,
    #[arg(long, value_enum)]
    threshold_polarity: Option<PolarityArg>,
    #[arg(long)]
    refine_margin: Option<usize>,
}

impl PipelineFlags {
    fn apply(&self, c: &mut PipelineConfig) {
        fn set<T: Copy>(dst: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *dst = v;
            }
        }
        set(&mut c.mean_shift.spatial_radius, self.ms_spatial_radius);
        set(&mut c.mean_shift.color_radius, self.ms_color_radius);
        set(&mut c.mean_shift.max_iterations, self.ms_max_iterations);
        set(&mut c.mean_shift.convergence_eps, self.ms_epsilon);
        set(&mut c.otsu_fallback, self.otsu_fallback);
        set(&mut c.min_area_pre, self.min_area_pre);
        set(&mut c.blur_kernel, self.blur_kernel);
        set(&mut c.contour_color, self.contour_color);
        set(&mut c.morph_kernel, self.morph_kernel);
        set(&mut c.min_area_seg, self.min_area_seg);
        set(&mut c.adaptive.block_size, self.adaptive_block);
        set(&mut c.adaptive.c, self.adaptive_c);
        set(&mut c.adaptive.polarity, self.adaptive_polarity.map(Into::into));
        set(&mut c.min_area_refine, self.min_area_refine);
        set(&mut c.dilate_iterations, self.dilate_iterations);
        set(&mut c.crop_size, self.crop_size);
        set(&mut c.background_color, self.background_color);
        set(
            &mut c.gray_source,
            self.gray_source.map(|g| match g {
                GrayArg::Luma => GraySource::Luma,
                GrayArg::HsvValue => GraySource::HsvValue,
            }),
        );
        set(&mut c.threshold_polarity, self.threshold_polarity.map(Into::into));
        set(&mut c.refine_margin, self.refine_margin);
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(required_unless_present = "print_config")]
    images: Vec<PathBuf>,
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    /// Write the intermediate stage rasters to <out>/trace.
    #[arg(long)]
    trace: bool,
    /// TOML pipeline config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML scene spec; missing fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes; scene i uses seed spec.seed + i.
    #[arg(long, default_value_t = 1)]
    count: u64,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    kind: DescriptorKind,
    /// TOML with `[hog]`/`[lbp]` descriptor parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Defaults to features_<kind>.txt next to the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<DescriptorKind, String> {
    s.parse().map_err(|e: pollen_core::Error| e.to_string())
}

#[derive(Args)]
struct SplitArgs {
    /// Feature file written by `features`.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.15)]
    test_fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Svm,
    Mlp,
    Forest,
    Boost,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// JSON or TOML parameter file (with a `family` key); flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Turn off inverse-frequency class weights (SVM, forest).
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    estimators: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Defaults to the seed the model was trained with.
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Also write the evaluation record as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    grid: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.15)]
    validation_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Directory of static UI files served at `/`.
    #[arg(long)]
    ui: Option<PathBuf>,
}

fn read_text(p: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn write_text(p: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
}

fn load_split(a: &SplitArgs) -> anyhow::Result<(FeatureTable, LabeledSet, LabeledSet)> {
    let table = read_features(&a.features)?;
    if a.test_fraction == 0.0 {
        let all = table.set.clone();
        return Ok((table, all, LabeledSet::new(Vec::new(), Vec::new())?));
    }
    let (train, test) = stratified_split(&table.set, a.test_fraction, a.split_seed)?;
    Ok((table, train, test))
}

fn segment(a: SegmentArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => toml::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    a.pipeline.apply(&mut cfg);
    cfg.validate()?;
    if a.print_config {
        print!("{}", toml::to_string(&cfg)?);
        return Ok(());
    }
    let out = a.out.as_deref().context("--out is required")?;
    let s = segment_images(&a.images, out, &cfg, a.trace)?;
    println!(
        "{} slides, {} objects ({} new) -> {}",
        s.images,
        s.objects,
        s.added,
        s.manifest.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let spec: SyntheticSpec = match &a.spec {
        Some(p) => toml::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => SyntheticSpec::default(),
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    (0..a.count).into_par_iter().try_for_each(|i| -> anyhow::Result<()> {
        let seed = spec.seed.wrapping_add(i);
        let scene = generate_scene(&SyntheticSpec { seed, ..spec.clone() })?;
        let stem = format!("scene_{seed:04}");
        save_rgb(&scene.image, &a.out.join(format!("{stem}.png")))?;
        let mut truth = pollen_core::BinaryMask::filled(scene.image.width(), scene.image.height(), false);
        for p in scene.grains() {
            p.mask.paint(&mut truth);
        }
        save_mask(&truth, &a.out.join(format!("{stem}_truth.png")))?;
        let records: Vec<serde_json::Value> = scene
            .planted
            .iter()
            .map(|p| {
                serde_json::json!({
                    "kind": p.kind, "center": p.center, "radius": p.radius,
                    "area": p.area, "centroid": p.centroid,
                })
            })
            .collect();
        write_text(&a.out.join(format!("{stem}.json")), &serde_json::to_string_pretty(&records)?)?;
        Ok(())
    })?;
    println!("{} scenes -> {}", a.count, a.out.display());
    Ok(())
}

fn features(a: FeaturesArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.params {
        Some(p) => {
            #[derive(serde::Deserialize)]
            struct Params {
                #[serde(default)]
                hog: pollen_core::features::HogParams,
                #[serde(default)]
                lbp: pollen_core::features::LbpParams,
            }
            let p: Params = toml::from_str(&read_text(p)?)?;
            FeatureConfig {
                kind: a.kind,
                hog: p.hog,
                lbp: p.lbp,
            }
        }
        None => FeatureConfig::new(a.kind),
    };
    cfg.kind = a.kind;
    let records = read_manifest(&a.manifest)?;
    let root = a.manifest.parent().unwrap_or(Path::new("."));
    let table = export_dataset(&records, root, &cfg)?;
    let out = a
        .out
        .unwrap_or_else(|| root.join(format!("features_{}.txt", a.kind.name())));
    write_features(&out, &table)?;
    let counts = table.set.class_counts();
    println!(
        "{} objects x {} values, per class {:?} -> {}",
        table.set.len(),
        table.set.dimension(),
        counts,
        out.display()
    );
    Ok(())
}

fn params_from_file(p: &Path) -> anyhow::Result<ModelParams> {
    let text = read_text(p)?;
    Ok(if p.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    })
}

fn build_params(a: &TrainArgs) -> anyhow::Result<ModelParams> {
    let mut params = match &a.params {
        Some(p) => params_from_file(p)?,
        None => match a.family {
            FamilyArg::Svm => ModelParams::Svm(SvmParams::default()),
            FamilyArg::Mlp => ModelParams::Mlp(MlpParams::default()),
            FamilyArg::Forest => ModelParams::Forest(ForestParams::default()),
            FamilyArg::Boost => ModelParams::Boost(BoostParams::default()),
        },
    };
    match (&mut params, a.family) {
        (ModelParams::Svm(p), FamilyArg::Svm) => {
            match (a.kernel, a.gamma) {
                (Some(KernelArg::Linear), None) => p.kernel = Kernel::Linear,
                (Some(KernelArg::Linear), Some(_)) => bail!("--gamma only applies to the rbf kernel"),
                (Some(KernelArg::Rbf), g) => {
                    let gamma = match (g, p.kernel) {
                        (Some(g), _) => g,
                        (None, Kernel::Rbf { gamma }) => gamma,
                        (None, Kernel::Linear) => 0.1,
                    };
                    p.kernel = Kernel::Rbf { gamma };
                }
                (None, Some(g)) => match &mut p.kernel {
                    Kernel::Rbf { gamma } => *gamma = g,
                    Kernel::Linear => bail!("--gamma only applies to the rbf kernel"),
                },
                (None, None) => {}
            }
            if let Some(c) = a.c {
                p.c = c;
            }
            if a.unweighted {
                p.class_weighted = false;
            }
        }
        (ModelParams::Mlp(p), FamilyArg::Mlp) => {
            p.alpha = a.alpha.unwrap_or(p.alpha);
            p.hidden_units = a.hidden_units.unwrap_or(p.hidden_units);
            p.epochs = a.epochs.or(a.estimators).unwrap_or(p.epochs);
            p.learning_rate = a.learning_rate.unwrap_or(p.learning_rate);
            p.seed = a.seed.unwrap_or(p.seed);
        }
        (ModelParams::Forest(p), FamilyArg::Forest) => {
            p.n_estimators = a.estimators.unwrap_or(p.n_estimators);
            p.max_depth = a.max_depth.or(p.max_depth);
            p.seed = a.seed.unwrap_or(p.seed);
            if a.unweighted {
                p.class_weighted = false;
            }
        }
        (ModelParams::Boost(p), FamilyArg::Boost) => {
            p.learning_rate = a.learning_rate.unwrap_or(p.learning_rate);
            p.n_estimators = a.estimators.unwrap_or(p.n_estimators);
            p.seed = a.seed.unwrap_or(p.seed);
        }
        (p, _) => bail!("parameter file is for family {}", p.family().name()),
    }
    Ok(params)
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let params = build_params(&a)?;
    let (table, train, _) = load_split(&a.split)?;
    let model = params.train(&train)?;
    let mut file = ModelFile::new(FeatureConfig::new(table.kind), params, model);
    if a.split.test_fraction > 0.0 {
        file.split_seed = Some(a.split.split_seed);
        file.test_fraction = Some(a.split.test_fraction);
    }
    file.save(&a.out)?;
    println!("trained on {} objects -> {}", train.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let file = ModelFile::load(&a.model)?;
    let split = SplitArgs {
        features: a.features.clone(),
        split_seed: a.split_seed.or(file.split_seed).unwrap_or(0),
        test_fraction: a.test_fraction.or(file.test_fraction).unwrap_or(0.15),
    };
    let (table, train, test) = load_split(&split)?;
    if table.kind != file.features.kind {
        bail!(
            "model expects {} features, file has {}",
            file.features.kind.name(),
            table.kind.name()
        );
    }
    let test = if test.is_empty() { train.clone() } else { test };
    let pred = file.model.predict_all(test.rows());
    let row = EvalRow::compute(
        &file.params,
        table.kind,
        test.labels(),
        &pred,
        train.len(),
        Some(split.split_seed),
    )?;
    print!("{}", render_table(std::slice::from_ref(&row)));
    print!("{}", render_details(&row));
    if let Some(p) = &a.json {
        write_text(p, &serde_json::to_string_pretty(&row)?)?;
    }
    Ok(())
}

fn gridsearch(a: GridArgs) -> anyhow::Result<()> {
    let grid = parse_grid(&read_text(&a.grid)?)?;
    let family = grid[0].family();
    if grid.iter().any(|p| p.family() != family) {
        bail!("grid mixes model families");
    }
    let (_, train, _) = load_split(&a.split)?;
    let results = grid
        .par_iter()
        .map(|p| evaluate_candidate(&train, p, a.trials, a.validation_fraction, a.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let report = GridSearchReport::from_results(a.trials, a.validation_fraction, a.seed, results)?;
    for c in &report.candidates {
        println!(
            "{:<14} {:<24} mean accuracy {:.4}",
            pollen_workbench::report::method_name(&c.params),
            pollen_workbench::report::parameter_summary(&c.params),
            c.mean
        );
    }
    let best = report.best();
    println!(
        "winner: {} {} ({:.4}); {}",
        pollen_workbench::report::method_name(&best.params),
        pollen_workbench::report::parameter_summary(&best.params),
        best.mean,
        report.protocol
    );
    if let Some(p) = &a.out {
        write_text(p, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    let addr = SocketAddr::new(a.host, a.port);
    rt.block_on(pollen_workbench::server::serve(&a.manifest, addr, a.ui.as_deref()))?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Segment(a) => segment(a),
        Command::Synth(a) => synth(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gridsearch(a) => gridsearch(a),
        Command::Serve(a) => serve(a),
    }
}
