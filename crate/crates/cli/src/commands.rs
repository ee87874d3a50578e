use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use lssfind::evaluation::{grid_cells, run_grid, write_results_csv, GridCell};
use lssfind::explain::{rank_features, rank_interactions, Explainer, FeatureExplanation, InteractionExplanation, RankScore};
use lssfind::rf::default_mtry;
use lssfind::sim::{benchmark_tau, build_benchmark_spec_with_p, GroundTruth, LssModelSpec, SimGrid};
use lssfind::{fit_forest, Dataset, Forest, LabelColumn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigFile, EvaluateConfig, ExplainCmdConfig, Mode, SimulateConfig, TrainConfig};
use crate::error::CliError;
use crate::format::sig6;
use crate::manifest::{Clock, RunManifest};
use crate::{Context, EvaluateArgs, ExplainArgs, SimulateArgs, TrainArgs};

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn finish(
    ctx: &Context,
    clock: Clock,
    subcommand: &str,
    inputs: BTreeMap<String, PathBuf>,
    outputs: BTreeMap<String, PathBuf>,
    config: ConfigFile,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        subcommand: subcommand.into(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        seed: ctx.seed,
        threads: ctx.threads,
        out_dir: ctx.out_dir.clone(),
        inputs,
        outputs,
        config: ConfigFile {
            seed: Some(ctx.seed),
            ..config
        },
        started_unix_seconds: clock.started_unix_seconds(),
        wall_seconds: clock.elapsed_seconds(),
    };
    let path = manifest.write(&ctx.out_dir)?;
    writeln!(out, "manifest: {}", path.display())?;
    Ok(())
}

pub fn train(ctx: &Context, args: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let clock = Clock::start();
    let mut cfg: TrainConfig = ctx.file.train.clone().unwrap_or_default();
    if args.data.is_some() {
        cfg.data = args.data;
    }
    if let Some(v) = args.label {
        cfg.label = v;
    }
    if let Some(v) = args.output {
        cfg.output = v;
    }
    let f = &mut cfg.forest;
    f.seed = ctx.seed;
    f.n_trees = args.n_trees.unwrap_or(f.n_trees);
    f.mtry = args.mtry.or(f.mtry);
    f.min_node_size = args.min_node_size.unwrap_or(f.min_node_size);
    f.constraints.balanced_split |= args.balanced;
    f.constraints.c_gamma = args.c_gamma.unwrap_or(f.constraints.c_gamma);

    let data_path = cfg.data.clone().ok_or_else(|| CliError::Input("train needs --data".into()))?;
    let data = Dataset::read_csv(open(&data_path)?, &LabelColumn::parse(&cfg.label))?;
    let forest = fit_forest(&data, &cfg.forest)?;
    cfg.forest.mtry = Some(forest.mtry);

    let out_path = ctx.out_dir.join(&cfg.output);
    let mut w = create(&out_path)?;
    forest.write_json(&mut w)?;
    w.flush()?;

    let depths: Vec<usize> = forest.trees.iter().map(|t| t.max_depth()).collect();
    let mean = depths.iter().sum::<usize>() as f64 / depths.len() as f64;
    writeln!(
        out,
        "trained {} trees on n = {}, p = {} (mtry {})",
        forest.n_trees(),
        forest.n_samples,
        forest.n_features,
        forest.mtry
    )?;
    writeln!(
        out,
        "tree depth: min {}, mean {}, max {}",
        depths.iter().min().unwrap_or(&0),
        sig6(mean),
        depths.iter().max().unwrap_or(&0)
    )?;
    writeln!(out, "forest: {}", out_path.display())?;
    let inputs = BTreeMap::from([("data".to_string(), data_path)]);
    let outputs = BTreeMap::from([("forest".to_string(), cfg.output.clone())]);
    let config = ConfigFile {
        train: Some(cfg),
        ..Default::default()
    };
    finish(ctx, clock, "train", inputs, outputs, config, out)
}

/// Reads test points, picking the forest's feature columns by name when
/// the header has all of them and taking columns in order otherwise.
fn read_points<R: Read>(reader: R, forest: &Forest) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let by_name: Option<Vec<usize>> = forest
        .feature_names
        .iter()
        .map(|name| header.iter().position(|h| h.trim() == name))
        .collect();
    let columns = match by_name {
        Some(cols) => cols,
        None if header.len() == forest.n_features => (0..header.len()).collect(),
        None => {
            return Err(CliError::Input(format!(
                "points file has {} columns and lacks the forest's feature names; expected {} columns",
                header.len(),
                forest.n_features
            )))
        }
    };
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = columns
            .iter()
            .map(|&c| {
                let raw = rec.get(c).unwrap_or("").trim();
                raw.parse::<f64>().map_err(|_| {
                    CliError::Input(format!("row {}, column {}: cannot parse {raw:?} as a number", i + 2, &header[c]))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        points.push(row);
    }
    if points.is_empty() {
        return Err(CliError::Input("points file has no rows".into()));
    }
    Ok(points)
}

#[derive(Serialize)]
struct Record<'a, T> {
    /// 1-based position of the test point.
    point: usize,
    #[serde(flatten)]
    explanation: &'a T,
}

pub fn explain(ctx: &Context, args: ExplainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let clock = Clock::start();
    let mut cfg: ExplainCmdConfig = ctx.file.explain.clone().unwrap_or_default();
    if args.forest.is_some() {
        cfg.forest = args.forest;
    }
    if args.point.is_some() {
        cfg.point = args.point;
        cfg.points = None;
    }
    if args.points.is_some() {
        cfg.points = args.points;
        cfg.point = None;
    }
    cfg.mode = args.mode.unwrap_or(cfg.mode);
    cfg.top_k = args.top_k.unwrap_or(cfg.top_k);
    let t = &mut cfg.thresholds;
    t.epsilon = args.epsilon.unwrap_or(t.epsilon);
    t.eta_dwp = args.eta_dwp.unwrap_or(t.eta_dwp);
    t.eta_pp = args.eta_pp.unwrap_or(t.eta_pp);
    t.s_max = args.s_max.unwrap_or(t.s_max);

    let forest_path = cfg.forest.clone().ok_or_else(|| CliError::Input("explain needs --forest".into()))?;
    let forest = Forest::read_json(open(&forest_path)?)?;
    let mut inputs = BTreeMap::from([("forest".to_string(), forest_path)]);
    let points = match (&cfg.point, &cfg.points) {
        (Some(x), None) => vec![x.clone()],
        (None, Some(path)) => {
            inputs.insert("points".into(), path.clone());
            read_points(open(path)?, &forest)?
        }
        _ => return Err(CliError::Input("explain needs exactly one of --point or --points".into())),
    };
    for x in &points {
        forest.check_dimension(x)?;
    }
    let explainer = Explainer::new(&forest, cfg.thresholds)?;
    let mut outputs = BTreeMap::new();
    match cfg.mode {
        Mode::Interactions => {
            let found: Vec<InteractionExplanation> = points
                .par_iter()
                .map(|x| explainer.interactions(x, cfg.top_k))
                .collect::<Result<_, _>>()?;
            let records: Vec<_> = found.iter().enumerate().map(|(i, e)| Record { point: i + 1, explanation: e }).collect();
            write_json(&ctx.out_dir.join("explanation.json"), &records)?;
            let mut w = csv::Writer::from_writer(create(&ctx.out_dir.join("ranking.csv"))?);
            w.write_record(["point", "rank", "interaction", "size", "dwp", "scaled_dwp", "pp", "pii"])?;
            for (i, e) in found.iter().enumerate() {
                for (r, s) in e.ranking.iter().enumerate() {
                    w.write_record(score_row(i + 1, r + 1, s))?;
                }
            }
            w.flush()?;
            outputs.insert("explanation".into(), "explanation.json".into());
            outputs.insert("ranking".into(), "ranking.csv".into());
            for (i, e) in found.iter().enumerate().take(SHOWN) {
                let shown: Vec<String> = e
                    .selected
                    .iter()
                    .map(|s| format!("{{{}}} (DWP*2^|S| {}, PP {})", s.interaction, sig6(s.scaled_dwp), sig6(s.pp)))
                    .collect();
                writeln!(out, "point {}: {}", i + 1, list_or_none(&shown))?;
            }
        }
        Mode::Features => {
            let found: Vec<FeatureExplanation> =
                points.par_iter().map(|x| explainer.features(x)).collect::<Result<_, _>>()?;
            let records: Vec<_> = found.iter().enumerate().map(|(i, e)| Record { point: i + 1, explanation: e }).collect();
            write_json(&ctx.out_dir.join("explanation.json"), &records)?;
            let mut w = csv::Writer::from_writer(create(&ctx.out_dir.join("features.csv"))?);
            w.write_record(["point", "feature", "fdwp", "pp", "pfi"])?;
            for (i, e) in found.iter().enumerate() {
                for s in &e.selected {
                    w.write_record([
                        (i + 1).to_string(),
                        s.feature.to_string(),
                        s.fdwp.to_string(),
                        s.pp.to_string(),
                        s.pfi.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            outputs.insert("explanation".into(), "explanation.json".into());
            outputs.insert("features".into(), "features.csv".into());
            for (i, e) in found.iter().enumerate().take(SHOWN) {
                let shown: Vec<String> = e
                    .selected
                    .iter()
                    .map(|s| format!("{} (fDWP {}, PP {})", s.feature, sig6(s.fdwp), sig6(s.pp)))
                    .collect();
                writeln!(out, "point {}: {}", i + 1, list_or_none(&shown))?;
            }
        }
        Mode::ScoresOnly => {
            let tables = points
                .par_iter()
                .map(|x| {
                    let pp = explainer.pp(x)?;
                    Ok((
                        rank_interactions(explainer.dwp(), &pp, RankScore::Pii),
                        rank_features(explainer.dwp(), &pp, cfg.thresholds.s_max),
                    ))
                })
                .collect::<Result<Vec<_>, lssfind::Error>>()?;
            let mut w = create(&ctx.out_dir.join("dwp.csv"))?;
            explainer.dwp().write_csv(&mut w)?;
            w.flush()?;
            let mut pii = csv::Writer::from_writer(create(&ctx.out_dir.join("pii.csv"))?);
            pii.write_record(["point", "rank", "interaction", "size", "dwp", "scaled_dwp", "pp", "pii"])?;
            let mut pfi = csv::Writer::from_writer(create(&ctx.out_dir.join("pfi.csv"))?);
            pfi.write_record(["point", "rank", "feature", "fdwp", "pp", "pfi"])?;
            for (i, (ints, feats)) in tables.iter().enumerate() {
                for (r, s) in ints.iter().enumerate() {
                    pii.write_record(score_row(i + 1, r + 1, s))?;
                }
                for (r, s) in feats.iter().enumerate() {
                    pfi.write_record([
                        (i + 1).to_string(),
                        (r + 1).to_string(),
                        s.feature.to_string(),
                        s.fdwp.to_string(),
                        s.pp.to_string(),
                        s.pfi.to_string(),
                    ])?;
                }
            }
            pii.flush()?;
            pfi.flush()?;
            for name in ["dwp", "pii", "pfi"] {
                outputs.insert(name.to_string(), format!("{name}.csv").into());
            }
            for (i, (ints, feats)) in tables.iter().enumerate().take(SHOWN) {
                let top_i = ints.first().map_or("none".to_string(), |s| format!("{{{}}} {}", s.interaction, sig6(s.pii)));
                let top_f = feats.first().map_or("none".to_string(), |s| format!("{} {}", s.feature, sig6(s.pfi)));
                writeln!(out, "point {}: top PII {top_i}; top PFI {top_f}", i + 1)?;
            }
        }
    }
    if points.len() > SHOWN {
        writeln!(out, "... {} points in total", points.len())?;
    }
    let config = ConfigFile {
        explain: Some(cfg),
        ..Default::default()
    };
    finish(ctx, clock, "explain", inputs, outputs, config, out)
}

/// Points echoed to the terminal; files hold all of them.
const SHOWN: usize = 5;

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none selected".into()
    } else {
        items.join(", ")
    }
}

fn score_row(point: usize, rank: usize, s: &lssfind::explain::InteractionScores) -> [String; 8] {
    [
        point.to_string(),
        rank.to_string(),
        s.interaction.to_string(),
        s.size.to_string(),
        s.dwp.to_string(),
        s.scaled_dwp.to_string(),
        s.pp.to_string(),
        s.pii.to_string(),
    ]
}

pub fn simulate(ctx: &Context, args: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let clock = Clock::start();
    let mut cfg: SimulateConfig = ctx.file.simulate.clone().unwrap_or_default();
    cfg.j = args.j.unwrap_or(cfg.j);
    cfg.l = args.l.unwrap_or(cfg.l);
    cfg.snr = args.snr.unwrap_or(cfg.snr);
    cfg.n = args.n.unwrap_or(cfg.n);
    cfg.p = args.p.unwrap_or(cfg.p);
    if args.spec.is_some() {
        cfg.spec = args.spec;
    }
    if cfg.n < 1 {
        return Err(CliError::Input("n must be at least 1".into()));
    }
    let mut inputs = BTreeMap::new();
    let (spec, tau) = match &cfg.spec {
        Some(path) => {
            inputs.insert("spec".to_string(), path.clone());
            let spec: LssModelSpec = serde_json::from_reader(open(path)?)
                .map_err(|e| CliError::Input(format!("spec {}: {e}", path.display())))?;
            spec.validate()?;
            (spec, None)
        }
        None => (build_benchmark_spec_with_p(cfg.j, cfg.l, cfg.snr, cfg.p)?, Some(benchmark_tau(cfg.l))),
    };
    let data = spec.generate(cfg.n, &mut ChaCha8Rng::seed_from_u64(ctx.seed))?;
    let mut w = create(&ctx.out_dir.join(&cfg.data_output))?;
    data.write_csv(&mut w, "y")?;
    w.flush()?;
    let truth = GroundTruth::new(&spec, tau);
    write_json(&ctx.out_dir.join(&cfg.truth_output), &truth)?;

    writeln!(out, "simulated n = {}, p = {}", cfg.n, spec.p)?;
    if let Some(tau) = tau {
        writeln!(out, "tau = {}", sig6(tau))?;
    }
    writeln!(
        out,
        "signal variance = {}, sigma^2 = {}",
        sig6(truth.signal_variance),
        sig6(truth.sigma2)
    )?;
    let bsis: Vec<String> = truth.model_bsis.iter().map(|s| format!("{{{s}}}")).collect();
    writeln!(out, "model BSIs: {}", list_or_none(&bsis))?;
    let outputs = BTreeMap::from([
        ("data".to_string(), cfg.data_output.clone()),
        ("truth".to_string(), cfg.truth_output.clone()),
    ]);
    let config = ConfigFile {
        simulate: Some(cfg),
        ..Default::default()
    };
    finish(ctx, clock, "simulate", inputs, outputs, config, out)
}

/// Grid file contents: a list of cells, `{"cells": [...]}`, or grid axes.
/// Returns the cells and the feature count fixed by the file, if any.
pub fn load_grid(text: &str) -> Result<(Vec<GridCell>, Option<usize>), CliError> {
    if text.trim().is_empty() {
        return Ok((Vec::new(), None));
    }
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.is_array() {
        return Ok((serde_json::from_value(value)?, None));
    }
    if let Some(cells) = value.get("cells") {
        let p = value.get("p").and_then(|v| v.as_u64()).map(|p| p as usize);
        return Ok((serde_json::from_value(cells.clone())?, p));
    }
    let grid: SimGrid = serde_json::from_value(value)?;
    Ok((grid_cells(&grid), Some(grid.p)))
}

pub fn evaluate(ctx: &Context, args: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let clock = Clock::start();
    let mut cfg: EvaluateConfig = ctx.file.evaluate.clone().unwrap_or_default();
    if args.grid.is_some() {
        cfg.grid = args.grid;
    }
    if let Some(scale) = args.scale {
        cfg.scale = scale;
        cfg.settings = None;
    }
    if let Some(v) = args.output {
        cfg.output = v;
    }
    let mut settings = cfg.settings.unwrap_or_else(|| cfg.scale.settings());
    settings.replicates = args.replicates.unwrap_or(settings.replicates);
    settings.n_trees = args.n_trees.unwrap_or(settings.n_trees);
    settings.n_test = args.n_test.unwrap_or(settings.n_test);

    let mut inputs = BTreeMap::new();
    let (cells, p) = match &cfg.grid {
        Some(path) => {
            inputs.insert("grid".to_string(), path.clone());
            let mut text = String::new();
            open(path)?.read_to_string(&mut text)?;
            load_grid(&text).map_err(|e| CliError::Input(format!("grid {}: {e}", path.display())))?
        }
        None => {
            let grid = SimGrid::default();
            (grid_cells(&grid), Some(grid.p))
        }
    };
    if let Some(p) = p {
        settings.p = p;
    }
    settings.mtry = Some(settings.mtry.unwrap_or_else(|| default_mtry(settings.p)));
    cfg.settings = Some(settings);

    let results = run_grid(&cells, &settings, ctx.seed)?;
    let out_path = ctx.out_dir.join(&cfg.output);
    let mut w = create(&out_path)?;
    write_results_csv(&mut w, &results)?;
    w.flush()?;

    writeln!(
        out,
        "{} cells, {} trees, {} test points, {} replicates",
        cells.len(),
        settings.n_trees,
        settings.n_test,
        settings.replicates
    )?;
    writeln!(out, "n\tJ\tL\tSNR\tdwp_incl\tpii_incl\troc_dwp\troc_pii\tqualifying")?;
    let opt = |v: Option<f64>| v.map_or("NA".to_string(), sig6);
    for r in &results {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.n,
            r.j,
            r.l,
            sig6(r.snr),
            opt(r.dwp_inclusion),
            opt(r.pii_inclusion),
            opt(r.roc_dwp),
            opt(r.roc_pii),
            r.n_qualifying
        )?;
    }
    writeln!(out, "results: {}", out_path.display())?;
    let outputs = BTreeMap::from([("results".to_string(), cfg.output.clone())]);
    let config = ConfigFile {
        evaluate: Some(cfg),
        ..Default::default()
    };
    finish(ctx, clock, "evaluate", inputs, outputs, config, out)
}
