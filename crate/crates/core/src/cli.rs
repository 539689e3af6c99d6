//! Command-line front end. Each subcommand reads documented files, writes
//! its outputs plus a `run_config.json` into `--out-dir`, and maps errors
//! to stable exit codes: 0 success, 2 usage, 3 IO/parse, 4 data shape,
//! 5 model schema.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{box_summaries, extract_cohort, FeatureDataset, WindowSpec, FEATURE_NAMES};
use crate::fmt::sig9;
use crate::fsio::write_atomic;
use crate::heatmap::{density_csv, gaze_points, render_pgm, Heatmap, DEFAULT_BANDWIDTH, DEFAULT_BINS};
use crate::stats::{significance_table, Alternative};
use crate::synthgen::{generate_cohort, CohortSpec};
use crate::telemetry::{GazeScale, Manifest, SessionTimeline, SkillClass, DEFAULT_TICK_MS};
use crate::trees::{
    deserialize_model, evaluate, lopo_cv, serialize_model, train, Samples, TreeParams,
};

#[derive(Debug, Parser, Serialize)]
#[command(name = "skilltrace", version, about = "Player skill analytics from input and gaze telemetry")]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving all outputs (required).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Suppress console tables and summaries.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic cohort: manifest plus per-player logs.
    Synth(SynthArgs),
    /// Extract rolling-window features from a cohort manifest.
    Features(FeaturesArgs),
    /// Mann-Whitney tests of every feature, PRO vs. NONPRO.
    Stats(StatsArgs),
    /// Leave-one-player-out grid search and out-of-fold evaluation.
    Cv(CvArgs),
    /// Train one ensemble and write the model file.
    Train(TrainArgs),
    /// Score a feature CSV with a trained model.
    Eval(EvalArgs),
    /// Gaze heatmaps with highest-density-region bands.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Players per class: PRO,HIGH_AMATEUR,LOW_AMATEUR,NEWBIE.
    #[arg(long, value_delimiter = ',', default_value = "4,11,7,6")]
    pub counts: Vec<usize>,
    #[arg(long, default_value_t = 1800.0)]
    pub duration_s: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SessionInput {
    /// Cohort manifest CSV.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TICK_MS)]
    pub tick_ms: u64,
    /// Gaze logs are in pixels of a WIDTHxHEIGHT screen.
    #[arg(long)]
    pub screen: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: SessionInput,
    #[arg(long, default_value_t = 300.0)]
    pub width_s: f64,
    #[arg(long, default_value_t = 30.0)]
    pub step_s: f64,
    #[arg(long, default_value_t = 0.5)]
    pub min_gaze_coverage: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Feature CSV written by `features`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// two-sided, greater or less (NONPRO relative to PRO).
    #[arg(long, default_value = "two-sided")]
    pub alternative: String,
    /// Window width used to extract the features; windows starting on a
    /// multiple of it form the non-overlapping subsample.
    #[arg(long, default_value_t = 300.0)]
    pub width_s: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,500,1000")]
    pub n_trees: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    pub max_depth: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "false,true")]
    pub bootstrap: Vec<bool>,
    #[arg(long = "k", default_value_t = 1)]
    pub k_attributes: usize,
    #[arg(long, default_value_t = 2)]
    pub min_split: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Hyperparameters as JSON (e.g. `cv_best.json`); overrides the flags
    /// below, including the seed.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 1)]
    pub max_depth: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub bootstrap: bool,
    #[arg(long = "k", default_value_t = 1)]
    pub k_attributes: usize,
    #[arg(long, default_value_t = 2)]
    pub min_split: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Player,
    /// PRO vs. NONPRO.
    Class,
    /// The four skill groups.
    Group,
}

#[derive(Debug, Args, Serialize)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub input: SessionInput,
    #[arg(long, value_enum, default_value_t = GroupBy::Class)]
    pub by: GroupBy,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Smoothing bandwidth in cells.
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    pub bandwidth: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,0.9")]
    pub levels: Vec<f64>,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let Some(out_dir) = cli.out_dir.clone() else {
        let _ = Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, "--out-dir <OUT_DIR> is required")
            .print();
        return 2;
    };
    match dispatch(&cli, &out_dir) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("skilltrace: error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx<'a> {
    out_dir: &'a Path,
    seed: u64,
    quiet: bool,
}

impl Ctx<'_> {
    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        write_atomic(&self.out_dir.join(name), bytes.as_ref())
    }

    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref().trim_end());
        }
    }
}

fn dispatch(cli: &Cli, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ctx = Ctx { out_dir, seed: cli.seed, quiet: cli.quiet };
    let resolved = match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a)?,
        Command::Features(a) => cmd_features(&ctx, a)?,
        Command::Stats(a) => cmd_stats(&ctx, a)?,
        Command::Cv(a) => cmd_cv(&ctx, a)?,
        Command::Train(a) => cmd_train(&ctx, a)?,
        Command::Eval(a) => cmd_eval(&ctx, a)?,
        Command::Heatmap(a) => cmd_heatmap(&ctx, a)?,
    };
    let config = serde_json::json!({
        "tool": "skilltrace",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cli.seed,
        "out_dir": out_dir,
        "quiet": cli.quiet,
        "command": &cli.command,
        "resolved": resolved,
    });
    ctx.write("run_config.json", serde_json::to_string_pretty(&config).expect("json") + "\n")
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_features(path: &Path) -> Result<FeatureDataset> {
    FeatureDataset::from_csv(&read_text(path)?).map_err(|e| Error::in_file(path, e))
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Result<serde_json::Value> {
    let counts: [usize; 4] = a
        .counts
        .as_slice()
        .try_into()
        .map_err(|_| usage(format!("--counts needs 4 values, got {}", a.counts.len())))?;
    let spec = CohortSpec { counts, duration_s: a.duration_s, seed: ctx.seed };
    let manifest = generate_cohort(&spec, ctx.out_dir)?;
    ctx.say(format!(
        "{} sessions written to {}",
        manifest.entries.len(),
        ctx.out_dir.join("manifest.csv").display()
    ));
    Ok(serde_json::to_value(spec).expect("json"))
}

fn gaze_scale(screen: &Option<String>) -> Result<GazeScale> {
    let Some(s) = screen else {
        return Ok(GazeScale::Normalized);
    };
    let parsed = s
        .split_once(['x', 'X'])
        .and_then(|(w, h)| Some((w.trim().parse::<f64>().ok()?, h.trim().parse::<f64>().ok()?)))
        .filter(|(w, h)| *w > 0.0 && *h > 0.0);
    match parsed {
        Some((width, height)) => Ok(GazeScale::Pixels { width, height }),
        None => Err(usage(format!("--screen expects WIDTHxHEIGHT, got `{s}`"))),
    }
}

fn load_cohort(input: &SessionInput) -> Result<(Manifest, Vec<SessionTimeline>)> {
    if input.tick_ms == 0 {
        return Err(usage("--tick-ms must be positive"));
    }
    let scale = gaze_scale(&input.screen)?;
    let manifest = Manifest::read(&input.manifest)?;
    let timelines = manifest
        .entries
        .par_iter()
        .map(|e| manifest.load_session(e, input.tick_ms, scale))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, timelines))
}

fn cmd_features(ctx: &Ctx, a: &FeaturesArgs) -> Result<serde_json::Value> {
    let spec = WindowSpec { width_s: a.width_s, step_s: a.step_s, min_gaze_coverage: a.min_gaze_coverage };
    spec.validate()?;
    let (manifest, timelines) = load_cohort(&a.input)?;
    let ds = extract_cohort(&timelines, &spec)?;
    ctx.write("features.csv", ds.to_csv())?;

    let class_of: BTreeMap<&str, SkillClass> =
        manifest.entries.iter().map(|e| (e.player_id.as_str(), e.class)).collect();
    let mut boxes = String::from(crate::features::BoxSummary::csv_header());
    boxes.push('\n');
    for b in box_summaries(&ds.rows, |r| class_of[r.player_id.as_str()].token().to_string()) {
        boxes.push_str(&b.csv_row());
        boxes.push('\n');
    }
    ctx.write("feature_boxes.csv", boxes)?;

    match ds.feature_correlations() {
        Ok(corr) => {
            let mut out = format!("feature,{}\n", FEATURE_NAMES.join(","));
            for (name, row) in FEATURE_NAMES.iter().zip(corr) {
                let cells: Vec<String> = row.iter().map(|&v| sig9(v)).collect();
                let _ = writeln!(out, "{name},{}", cells.join(","));
            }
            ctx.write("feature_correlations.csv", out)?;
        }
        Err(e @ (Error::ConstantColumn(_) | Error::TooFewRows)) => {
            eprintln!("skilltrace: warning: correlations skipped: {e}");
        }
        Err(e) => return Err(e),
    }

    let (pro, nonpro) = ds.class_counts();
    let dropped: usize = timelines.iter().map(|t| t.warnings.total()).sum();
    ctx.say(format!(
        "{} valid samples ({pro} from PRO players, {nonpro} from NONPRO players) from {} sessions",
        ds.len(),
        timelines.len()
    ));
    if dropped > 0 {
        eprintln!("skilltrace: warning: {dropped} duplicate or orphan input edges ignored");
    }
    Ok(serde_json::to_value(spec).expect("json"))
}

fn cmd_stats(ctx: &Ctx, a: &StatsArgs) -> Result<serde_json::Value> {
    let alternative: Alternative = a.alternative.parse().map_err(Error::InvalidParams)?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage(format!("--alpha {} outside (0,1)", a.alpha)));
    }
    let ds = read_features(&a.features)?;
    let spec = WindowSpec { width_s: a.width_s, step_s: a.width_s, ..Default::default() };
    spec.validate()?;
    let table = significance_table(&ds, &spec, a.alpha, alternative)?;
    ctx.write("significance.csv", table.to_csv())?;
    ctx.say(table.console_table());
    Ok(serde_json::json!({ "alpha": a.alpha, "alternative": a.alternative, "subsample_width_s": a.width_s }))
}

fn grid_from(a: &CvArgs) -> Vec<TreeParams> {
    let mut grid = Vec::new();
    for &n_trees in &a.n_trees {
        for &max_depth in &a.max_depth {
            for &bootstrap in &a.bootstrap {
                grid.push(TreeParams {
                    n_trees,
                    max_depth,
                    bootstrap,
                    k_attributes: a.k_attributes,
                    min_split: a.min_split,
                    seed: 0,
                });
            }
        }
    }
    grid
}

fn cmd_cv(ctx: &Ctx, a: &CvArgs) -> Result<serde_json::Value> {
    let ds = read_features(&a.features)?;
    let samples = Samples::from_dataset(&ds);
    let grid = grid_from(a);
    let out = lopo_cv(&samples, &grid, ctx.seed)?;

    // importances come from the selected configuration refit on all rows
    let full = train(&samples, &out.best)?;
    let report = evaluate(&samples.labels, &out.oof_proba, a.threshold)?;
    let report = match full.feature_importances() {
        Ok(imp) => report.with_importances(&samples.feature_names, &imp),
        Err(Error::NoSplits) => report,
        Err(e) => return Err(e),
    };

    ctx.write("cv_best.json", serde_json::to_string_pretty(&out.best).expect("json") + "\n")?;
    ctx.write("cv_report.csv", report.to_csv())?;
    let mut oof = String::from("player_id,window_start_s,label,p_pro\n");
    for (r, p) in ds.rows.iter().zip(&out.oof_proba) {
        let _ = writeln!(oof, "{},{},{},{}", r.player_id, sig9(r.window_start_s), r.label.token(), sig9(*p));
    }
    ctx.write("cv_oof.csv", oof)?;
    let mut scores = String::from("n_trees,max_depth,bootstrap,k_attributes,min_split,accuracy\n");
    for s in &out.scores {
        let p = &s.params;
        let _ = writeln!(
            scores,
            "{},{},{},{},{},{}",
            p.n_trees, p.max_depth, p.bootstrap, p.k_attributes, p.min_split, sig9(s.accuracy)
        );
    }
    ctx.write("cv_scores.csv", scores)?;
    let mut folds = String::from("player_id,seed,held_out,train_rows\n");
    for f in &out.folds {
        let _ = writeln!(folds, "{},{},{},{}", f.player_id, f.seed, f.held_out.len(), f.train_rows.len());
    }
    ctx.write("cv_folds.csv", folds)?;

    let b = &out.best;
    ctx.say(format!(
        "best: n_trees={} max_depth={} bootstrap={} k={} (out-of-fold accuracy {:.3}, {} folds)\n",
        b.n_trees, b.max_depth, b.bootstrap, b.k_attributes, out.best_accuracy, out.folds.len()
    ));
    ctx.say(report.console_table());
    Ok(serde_json::json!({ "grid_size": grid.len(), "best": out.best, "threshold": a.threshold }))
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<serde_json::Value> {
    let params = match &a.params {
        Some(path) => serde_json::from_str::<TreeParams>(&read_text(path)?)
            .map_err(|e| Error::in_file(path, Error::SchemaViolation(e.to_string())))?,
        None => TreeParams {
            n_trees: a.n_trees,
            max_depth: a.max_depth,
            bootstrap: a.bootstrap,
            k_attributes: a.k_attributes,
            min_split: a.min_split,
            seed: ctx.seed,
        },
    };
    let ds = read_features(&a.features)?;
    let model = train(&Samples::from_dataset(&ds), &params)?;
    ctx.write("model.json", serialize_model(&model))?;
    ctx.say(format!("trained {} trees on {} rows (max depth {})", model.trees.len(), ds.len(), model.max_tree_depth()));
    Ok(serde_json::to_value(params).expect("json"))
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> Result<serde_json::Value> {
    let model = deserialize_model(&read_text(&a.model)?).map_err(|e| Error::in_file(&a.model, e))?;
    if model.feature_names.iter().map(String::as_str).ne(FEATURE_NAMES) {
        return Err(Error::in_file(
            &a.model,
            Error::SchemaViolation(format!("model features {:?} do not match the feature CSV", model.feature_names)),
        ));
    }
    let ds = read_features(&a.features)?;
    let samples = Samples::from_dataset(&ds);
    let scores = (0..samples.len())
        .map(|i| model.predict_proba(samples.row(i)))
        .collect::<Result<Vec<f64>>>()?;
    let mut report = evaluate(&samples.labels, &scores, a.threshold)?;
    if let Ok(imp) = model.feature_importances() {
        report = report.with_importances(&model.feature_names, &imp);
    }
    ctx.write("eval_report.csv", report.to_csv())?;
    let mut preds = String::from("player_id,window_start_s,label,p_pro,predicted\n");
    for (r, p) in ds.rows.iter().zip(&scores) {
        let predicted = if *p >= a.threshold { "PRO" } else { "NONPRO" };
        let _ = writeln!(preds, "{},{},{},{},{predicted}", r.player_id, sig9(r.window_start_s), r.label.token(), sig9(*p));
    }
    ctx.write("predictions.csv", preds)?;
    ctx.say(report.console_table());
    Ok(serde_json::json!({ "threshold": a.threshold, "model_params": model.params }))
}

fn cmd_heatmap(ctx: &Ctx, a: &HeatmapArgs) -> Result<serde_json::Value> {
    if a.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    if a.levels.is_empty() || a.levels.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(usage("--levels must be fractions in (0,1]"));
    }
    let mut levels = a.levels.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (manifest, timelines) = load_cohort(&a.input)?;

    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (entry, tl) in manifest.entries.iter().zip(&timelines) {
        let name = match a.by {
            GroupBy::Player => entry.player_id.clone(),
            GroupBy::Class => entry.class.binary().token().to_string(),
            GroupBy::Group => entry.class.token().to_string(),
        };
        groups.entry(name).or_default().extend(gaze_points(tl));
    }
    let maps = groups
        .into_par_iter()
        .map(|(name, points)| {
            Heatmap::build(&points, a.bins, a.bandwidth, &levels).map(|h| (name, h))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = String::from("name,level,threshold,cells\n");
    for (name, h) in &maps {
        ctx.write(&format!("heatmap_{name}.pgm"), render_pgm(&h.grid, &h.thresholds))?;
        ctx.write(&format!("heatmap_{name}.csv"), density_csv(&h.grid))?;
        for (i, (&p, &t)) in h.levels.iter().zip(&h.thresholds).enumerate() {
            let _ = writeln!(summary, "{name},{},{},{}", sig9(p), sig9(t), h.region_cells(i));
        }
    }
    ctx.write("heatmap_hdr.csv", &summary)?;
    ctx.say(format!("{} heatmaps written", maps.len()));
    ctx.say(summary);
    Ok(serde_json::json!({ "levels": levels }))
}
