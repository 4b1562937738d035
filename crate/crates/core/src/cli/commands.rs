use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{parse_values, RunConfig};
use super::manifest::Invocation;
use crate::dataset::{
    generate_synthetic, load_dataset_dir, read_matrix, save_dataset, write_matrix, DatasetFormat, SplitDataset,
};
use crate::error::{Error, Result};
use crate::eval::{cs_sweep, prototype_similarity, CsSweep, EvalReport, SimilarityMatrix};
use crate::numerics::{Activation, MappingNet, Matrix};
use crate::prototype::{project_with_net, train_prototypes, TrainMode};
use crate::sof::{refine_features, train_sof, RefinerParams};

/// Files and numbers a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub fingerprint: Option<String>,
}

impl Outcome {
    fn write(&mut self, dir: &Path, name: &str, text: &str) -> Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_matrix(&mut self, dir: &Path, name: &str, m: &Matrix) -> Result<()> {
        write_matrix(&dir.join(name), m)?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

pub fn execute(inv: &Invocation, cfg: &RunConfig) -> Result<Outcome> {
    let out = inv.out();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    match inv {
        Invocation::Synth { format, .. } => synth(cfg, out, *format),
        Invocation::Train { data, mode, sof, .. } => train(cfg, data, out, *mode, *sof),
        Invocation::Eval { model, data, compare, .. } => eval(cfg, model, data, compare.as_deref(), out),
        Invocation::Ablate { data, seeds, .. } => ablate(cfg, data, out, *seeds),
        Invocation::Sweep { data, param, values, .. } => sweep(cfg, data, out, param, values),
    }
}

fn synth(cfg: &RunConfig, out: &Path, format: DatasetFormat) -> Result<Outcome> {
    for w in cfg.synth.warnings() {
        eprintln!("warning: {w}");
    }
    let ds = generate_synthetic(&cfg.synth)?;
    let paths = save_dataset(&ds, out, format)?;
    let mut outcome = Outcome::default();
    for p in [Some(&paths.features), paths.labels.as_ref(), Some(&paths.attributes), Some(&paths.split)]
        .into_iter()
        .flatten()
    {
        outcome.outputs.push(p.file_name().unwrap().to_string_lossy().into_owned());
    }
    outcome.metrics.insert("samples".into(), ds.num_samples() as f64);
    outcome.metrics.insert("classes".into(), ds.num_classes() as f64);
    outcome.fingerprint = Some(ds.fingerprint());
    println!(
        "wrote {} samples of {} classes ({} seen, {} unseen) to {}",
        ds.num_samples(),
        ds.num_classes(),
        ds.split().seen.len(),
        ds.split().unseen.len(),
        out.display()
    );
    Ok(outcome)
}

/// Metadata stored beside the model weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub mode: TrainMode,
    pub refined: bool,
    pub attr_dim: usize,
    pub feat_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
}

/// A model directory read back from disk.
pub struct SavedModel {
    pub meta: ModelMeta,
    pub net: MappingNet,
    pub refiner: Option<RefinerParams>,
}

fn trace_csv(trace: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, v) in trace.iter().enumerate() {
        writeln!(s, "{},{v}", i + 1).unwrap();
    }
    s
}

/// Runs semantic fine-tuning and returns the refined dataset together with
/// the `f32`-rounded parameters that produced it.
fn fine_tune(ds: &SplitDataset, cfg: &RunConfig) -> Result<(SplitDataset, RefinerParams, Vec<f64>)> {
    let outcome = train_sof(ds, &cfg.sof)?;
    let params = outcome.params.round_to_f32();
    Ok((refine_features(ds, &params)?, params, outcome.loss_trace))
}

fn train(cfg: &RunConfig, data: &Path, out: &Path, mode: TrainMode, force_sof: bool) -> Result<Outcome> {
    let ds = load_dataset_dir(data)?;
    let mut outcome = Outcome {
        fingerprint: Some(ds.fingerprint()),
        ..Outcome::default()
    };
    let use_sof = mode == TrainMode::Full || force_sof;
    let features = if use_sof {
        let (refined, params, trace) = fine_tune(&ds, cfg)?;
        outcome.write_matrix(out, "sof_refiner.lplf", &params.refiner)?;
        outcome.write_matrix(out, "sof_projection.lplf", &params.projection)?;
        outcome.write(out, "sof_loss.csv", &trace_csv(&trace))?;
        if let Some(last) = trace.last() {
            outcome.metrics.insert("sof_final_loss".into(), *last);
        }
        refined
    } else {
        ds
    };
    let train_cfg = crate::prototype::TrainConfig {
        mode,
        ..cfg.train.clone()
    };
    let model = train_prototypes(&features, &train_cfg)?;
    let net = model.net.round_to_f32();
    outcome.write_matrix(out, "model_w1.lplf", net.w1())?;
    outcome.write_matrix(out, "model_b1.lplf", &Matrix::from_vec(1, net.b1().len(), net.b1().to_vec())?)?;
    outcome.write_matrix(out, "model_w2.lplf", net.w2())?;
    outcome.write_matrix(out, "model_b2.lplf", &Matrix::from_vec(1, net.b2().len(), net.b2().to_vec())?)?;
    let meta = ModelMeta {
        mode,
        refined: use_sof,
        attr_dim: net.input_dim(),
        feat_dim: net.output_dim(),
        hidden: net.hidden_dim(),
        activation: net.activation(),
    };
    outcome.write(out, "model.toml", &toml::to_string(&meta).expect("meta serializes"))?;
    outcome.write(out, "loss.csv", &trace_csv(&model.loss_trace))?;
    if let Some(last) = model.loss_trace.last() {
        outcome.metrics.insert("final_loss".into(), *last);
    }
    println!(
        "trained mode {} ({} epochs{}) into {}",
        mode.name(),
        model.loss_trace.len(),
        if use_sof { ", with fine-tuned features" } else { "" },
        out.display()
    );
    Ok(outcome)
}

pub fn load_model(dir: &Path) -> Result<SavedModel> {
    if !dir.is_dir() {
        return Err(Error::MissingInput(dir.to_path_buf()));
    }
    let meta_path = dir.join("model.toml");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ModelMeta = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {}", meta_path.display(), e.message().trim())))?;
    let row = |name: &str| -> Result<Vec<f64>> { Ok(read_matrix(&dir.join(name))?.into_vec()) };
    let net = MappingNet::new(
        read_matrix(&dir.join("model_w1.lplf"))?,
        row("model_b1.lplf")?,
        read_matrix(&dir.join("model_w2.lplf"))?,
        row("model_b2.lplf")?,
        meta.activation,
    )?;
    let refiner = if meta.refined {
        Some(RefinerParams {
            refiner: read_matrix(&dir.join("sof_refiner.lplf"))?,
            projection: read_matrix(&dir.join("sof_projection.lplf"))?,
        })
    } else {
        None
    };
    Ok(SavedModel { meta, net, refiner })
}

/// The dataset as the model sees it: refined when the model was trained on
/// refined features.
fn features_for(model: &SavedModel, ds: &SplitDataset) -> Result<SplitDataset> {
    match &model.refiner {
        Some(p) => refine_features(ds, p),
        None => Ok(ds.clone()),
    }
}

fn similarity_pair(net: &MappingNet, ds: &SplitDataset) -> Result<(SimilarityMatrix, SimilarityMatrix)> {
    let split = ds.split();
    let seen = prototype_similarity(&project_with_net(net, ds.attributes(), &split.seen)?, &split.seen)?;
    let unseen = prototype_similarity(&project_with_net(net, ds.attributes(), &split.unseen)?, &split.unseen)?;
    Ok((seen, unseen))
}

fn report_csv(r: &EvalReport) -> String {
    format!("{}\n{}\n", EvalReport::CSV_HEADER, r.csv_row())
}

fn per_class_csv(r: &EvalReport, ds: &SplitDataset) -> String {
    let mut s = String::from("class_id,split,zsl,gzsl\n");
    let f = |v: Option<&f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
    for &k in &ds.split().seen {
        writeln!(s, "{k},seen,,{}", f(r.per_class_gzsl.get(&k))).unwrap();
    }
    for &k in &ds.split().unseen {
        writeln!(s, "{k},unseen,{},{}", f(r.per_class_zsl.get(&k)), f(r.per_class_gzsl.get(&k))).unwrap();
    }
    s
}

fn evaluate_model(model: &SavedModel, ds: &SplitDataset, grid: &[f64]) -> Result<(CsSweep, SplitDataset)> {
    if model.net.input_dim() != ds.attribute_dim() || model.net.output_dim() != ds.feature_dim() {
        return Err(Error::Shape(format!(
            "model maps {} -> {}, dataset has attributes of width {} and features of width {}",
            model.net.input_dim(),
            model.net.output_dim(),
            ds.attribute_dim(),
            ds.feature_dim()
        )));
    }
    let view = features_for(model, ds)?;
    Ok((cs_sweep(&model.net, &view, grid)?, view))
}

fn eval(cfg: &RunConfig, model_dir: &Path, data: &Path, compare: Option<&Path>, out: &Path) -> Result<Outcome> {
    let grid = cfg.delta_grid()?;
    let model = load_model(model_dir)?;
    let other = compare.map(load_model).transpose()?;
    let ds = load_dataset_dir(data)?;
    let mut outcome = Outcome {
        fingerprint: Some(ds.fingerprint()),
        ..Outcome::default()
    };

    let (sweep, view) = evaluate_model(&model, &ds, &grid)?;
    let best = sweep.best();
    outcome.write(out, "report.csv", &report_csv(best))?;
    outcome.write(out, "sweep.csv", &sweep.to_csv())?;
    outcome.write(out, "per_class.csv", &per_class_csv(best, &ds))?;
    let (seen_sim, unseen_sim) = similarity_pair(&model.net, &view)?;
    outcome.write(out, "similarity_seen.csv", &seen_sim.to_csv())?;
    outcome.write(out, "similarity_unseen.csv", &unseen_sim.to_csv())?;
    for (k, v) in [("T", best.t), ("U", best.u), ("S", best.s), ("H", best.h)] {
        if let Some(v) = v {
            outcome.metrics.insert(k.into(), v);
        }
    }
    outcome.metrics.insert("delta".into(), best.delta);
    outcome.metrics.insert("unseen_similarity".into(), unseen_sim.mean_off_diagonal());
    println!("{}", best.summary());

    if let Some(other) = other {
        let (sweep2, view2) = evaluate_model(&other, &ds, &grid)?;
        outcome.write(out, "compare_report.csv", &report_csv(sweep2.best()))?;
        let (seen2, unseen2) = similarity_pair(&other.net, &view2)?;
        outcome.write(out, "compare_similarity_seen.csv", &seen2.to_csv())?;
        outcome.write(out, "compare_similarity_unseen.csv", &unseen2.to_csv())?;
        let summary = format!(
            "model,seen_mean_similarity,unseen_mean_similarity\nprimary,{:.6},{:.6}\ncompare,{:.6},{:.6}\n",
            seen_sim.mean_off_diagonal(),
            unseen_sim.mean_off_diagonal(),
            seen2.mean_off_diagonal(),
            unseen2.mean_off_diagonal()
        );
        outcome.write(out, "similarity_summary.csv", &summary)?;
        outcome.metrics.insert("compare_unseen_similarity".into(), unseen2.mean_off_diagonal());
        println!("compare: {}", sweep2.best().summary());
    }
    Ok(outcome)
}

/// The five rungs of the ablation ladder: (label, mode, fine-tuned).
pub const ABLATION_LADDER: [(&str, TrainMode, bool); 5] = [
    ("s2v", TrainMode::S2vBaseline, false),
    ("s2v+ep+ei", TrainMode::EpEi, false),
    ("s2v+sof", TrainMode::S2vBaseline, true),
    ("s2v+sof+ep", TrainMode::EpOnly, true),
    ("s2v+sof+ep+ei", TrainMode::Full, true),
];

/// `[T, U, S, H]` at the best calibration value.
type Metrics = [f64; 4];

fn metrics_of(r: &EvalReport) -> Metrics {
    let g = |v: Option<f64>| v.unwrap_or(f64::NAN);
    [g(r.t), g(r.u), g(r.s), g(r.h)]
}

/// Trains and scores one configuration.
fn run_once(ds: &SplitDataset, cfg: &RunConfig, mode: TrainMode, grid: &[f64]) -> Result<CsSweep> {
    let train_cfg = crate::prototype::TrainConfig {
        mode,
        ..cfg.train.clone()
    };
    let model = train_prototypes(ds, &train_cfg)?;
    cs_sweep(&model.net.round_to_f32(), ds, grid)
}

fn mean_and_spread(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn ablate(cfg: &RunConfig, data: &Path, out: &Path, seeds: usize) -> Result<Outcome> {
    if seeds == 0 {
        return Err(Error::Parameter("--seeds must be at least 1".into()));
    }
    let grid = cfg.delta_grid()?;
    let ds = load_dataset_dir(data)?;
    let runs: Vec<Vec<CsSweep>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let run_cfg = cfg.reseeded(cfg.seed.wrapping_add(s as u64));
            let (refined, _, _) = fine_tune(&ds, &run_cfg)?;
            ABLATION_LADDER
                .iter()
                .map(|&(_, mode, sof)| run_once(if sof { &refined } else { &ds }, &run_cfg, mode, &grid))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = Outcome {
        fingerprint: Some(ds.fingerprint()),
        ..Outcome::default()
    };
    let mut runs_csv = String::from("config,seed,delta,T,U,S,H\n");
    for (s, per_seed) in runs.iter().enumerate() {
        for ((label, _, _), sweep) in ABLATION_LADDER.iter().zip(per_seed) {
            let best = sweep.best();
            let m = metrics_of(best);
            writeln!(runs_csv, "{label},{s},{:.4},{:.6},{:.6},{:.6},{:.6}", best.delta, m[0], m[1], m[2], m[3]).unwrap();
            outcome.write(out, &format!("runs/seed{s}/{label}/report.csv"), &report_csv(best))?;
        }
    }

    let mut mean_csv = String::from("config,T,U,S,H\n");
    let mut spread_csv = String::from("config,T,U,S,H\n");
    let mut text = format!("{:<16}{:>16}{:>16}{:>16}{:>16}\n", "config", "T", "U", "S", "H");
    for (i, (label, _, _)) in ABLATION_LADDER.iter().enumerate() {
        let stats: Vec<(f64, f64)> = (0..4)
            .map(|j| mean_and_spread(&runs.iter().map(|r| metrics_of(r[i].best())[j]).collect::<Vec<_>>()))
            .collect();
        writeln!(mean_csv, "{label},{}", stats.iter().map(|(m, _)| format!("{m:.6}")).collect::<Vec<_>>().join(","))
            .unwrap();
        writeln!(spread_csv, "{label},{}", stats.iter().map(|(_, s)| format!("{s:.6}")).collect::<Vec<_>>().join(","))
            .unwrap();
        write!(text, "{label:<16}").unwrap();
        for (m, s) in &stats {
            write!(text, "{:>16}", format!("{:.1} ± {:.1}", 100.0 * m, 100.0 * s)).unwrap();
        }
        text.push('\n');
        for (k, (m, _)) in ["T", "U", "S", "H"].iter().zip(&stats) {
            outcome.metrics.insert(format!("{label}.{k}"), *m);
        }
    }
    outcome.write(out, "ablation.csv", &mean_csv)?;
    outcome.write(out, "ablation_spread.csv", &spread_csv)?;
    outcome.write(out, "ablation_runs.csv", &runs_csv)?;
    outcome.write(out, "ablation.txt", &text)?;
    print!("{text}");
    Ok(outcome)
}

/// Hyper-parameters `sweep` can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    N,
    Sigma,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "n" => Ok(SweepParam::N),
            "sigma" => Ok(SweepParam::Sigma),
            other => Err(Error::Config(format!("unknown sweep parameter `{other}` (expected n or sigma)"))),
        }
    }

    fn apply(self, cfg: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = cfg.clone();
        match self {
            SweepParam::N => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("n must be a non-negative integer, got {value}")));
                }
                cfg.hallucination.n = value as usize;
            }
            SweepParam::Sigma => cfg.hallucination.sigma = value,
        }
        cfg.train.hallucination = cfg.hallucination.clone();
        cfg.train.validate()?;
        Ok(cfg)
    }
}

fn sweep(cfg: &RunConfig, data: &Path, out: &Path, param: &str, values: &str) -> Result<Outcome> {
    let param = SweepParam::parse(param)?;
    let values = parse_values(values)?;
    let configs = values.iter().map(|&v| param.apply(cfg, v)).collect::<Result<Vec<_>>>()?;
    let grid = cfg.delta_grid()?;
    let ds = load_dataset_dir(data)?;
    let mode = cfg.train.mode;
    let features = if mode == TrainMode::Full { fine_tune(&ds, cfg)?.0 } else { ds.clone() };
    let results = configs
        .par_iter()
        .map(|c| run_once(&features, c, mode, &grid))
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = Outcome {
        fingerprint: Some(ds.fingerprint()),
        ..Outcome::default()
    };
    let mut csv = String::from("value,T,H\n");
    for (v, sweep) in values.iter().zip(&results) {
        let m = metrics_of(sweep.best());
        writeln!(csv, "{v},{:.6},{:.6}", m[0], m[3]).unwrap();
        outcome.write(out, &format!("runs/value={v}/report.csv"), &report_csv(sweep.best()))?;
        println!("{v:>8}  T={:.1} H={:.1}", 100.0 * m[0], 100.0 * m[3]);
    }
    outcome.write(out, "sweep.csv", &csv)?;
    Ok(outcome)
}

/// `relative` under the output root when one is set.
pub fn resolve_out(out: Option<PathBuf>, default: &str) -> PathBuf {
    let out = out.unwrap_or_else(|| PathBuf::from(default));
    match std::env::var_os("PZSL_OUTPUT_ROOT") {
        Some(root) if out.is_relative() && !root.is_empty() => PathBuf::from(root).join(out),
        _ => out,
    }
}
