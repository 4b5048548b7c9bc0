use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use magseq::compare::compare;
use magseq::filter::{baseline_error_curve, write_baseline_csv};
use magseq::metrics::write_error_csv;
use magseq::nn::{checksum, load_checkpoint, save_checkpoint};
use magseq::sim::{generate_dataset, header_digest, load_dataset, save_dataset, write_record_csv};
use magseq::train::{
    evaluate_error_curve, predict_dataset, train_with_progress, write_loss_csv, write_samples_csv,
    ModelSidecar,
};
use magseq::{Dataset, Error, PhysicsParams, Seq2SeqModel};

use crate::config::RunConfig;

/// `path` with `suffix` appended to the full file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| anyhow!("no {what} path: pass it as a flag or set it under `paths` in the config"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn with_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> magseq::Result<()>,
{
    let mut w = create(path)?;
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn open_dataset(path: &Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

/// Loads a checkpoint and, when present, its `.json` sidecar carrying the
/// input normalization and training physics.
pub fn open_model(path: &Path) -> Result<(Seq2SeqModel, Option<ModelSidecar>)> {
    let mut model =
        load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let side_path = sibling(path, ".json");
    if !side_path.exists() {
        warn!("no sidecar at {}; assuming raw inputs", side_path.display());
        return Ok((model, None));
    }
    let text =
        std::fs::read_to_string(&side_path).with_context(|| format!("reading {}", side_path.display()))?;
    let side: ModelSidecar =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", side_path.display()))?;
    let sum = checksum(&model);
    if side.checkpoint_sha256 != sum {
        bail!(
            "sidecar {} describes checkpoint {}, found {}",
            side_path.display(),
            side.checkpoint_sha256,
            sum
        );
    }
    model.input_norm = side.input_norm;
    Ok((model, Some(side)))
}

fn check_lengths(side: Option<&ModelSidecar>, data: &Dataset) -> Result<()> {
    if let Some(side) = side {
        if side.physics.n_steps != data.params.n_steps {
            return Err(Error::LengthMismatch {
                expected: side.physics.n_steps,
                got: data.params.n_steps,
            }
            .into());
        }
        if side.physics != data.params {
            warn!("dataset physics differ from the training physics");
        }
    }
    Ok(())
}

/// Physics to evaluate against: the config's when it sets them, else the dataset's.
fn physics_for(cfg: &RunConfig, data: &Dataset) -> PhysicsParams {
    if cfg.physics_explicit {
        cfg.physics
    } else {
        data.params
    }
}

pub struct GenerateArgs {
    pub count: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub record_csv: Option<PathBuf>,
}

pub fn generate(cfg: &RunConfig, args: GenerateArgs) -> Result<()> {
    let out = required(args.out, &cfg.paths.dataset, "output dataset")?;
    let data = generate_dataset(&cfg.physics, args.count, args.seed)?;
    save_dataset(&data, &out).with_context(|| format!("writing {}", out.display()))?;
    if let Some(csv) = args.record_csv {
        with_file(&csv, |w| write_record_csv(&data.params, &data.records[0], w))?;
    }
    let p = &data.params;
    println!("dataset      {}", out.display());
    println!("records      {}", data.len());
    println!("n_steps      {}", p.n_steps);
    println!("tau          {}", p.tau);
    println!("kappa        {}", p.kappa);
    println!("mu           {}", p.mu);
    println!("gamma_b      {}", p.gamma_b);
    println!("sigma_b      {}", p.sigma_b);
    println!("seed         {}", data.seed);
    println!("header_sha256 {}", header_digest(&data));
    Ok(())
}

pub struct TrainArgs {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub loss_csv: Option<PathBuf>,
}

pub fn train(cfg: &RunConfig, args: TrainArgs) -> Result<()> {
    let data_path = required(args.dataset, &cfg.paths.dataset, "dataset")?;
    let out = required(args.out, &cfg.paths.model, "model")?;
    let data = open_dataset(&data_path)?;
    if cfg.physics_explicit && cfg.physics != data.params {
        return Err(Error::HeaderMismatch.into());
    }
    let t = &cfg.train;
    info!(
        "training m={} M={} epochs={} eta={} on {} records",
        t.hidden,
        t.batch_size,
        t.epochs,
        t.eta,
        data.len()
    );
    let (model, report) = train_with_progress(&data, t, |epoch, loss| {
        info!("epoch {:>3} loss {:.6e}", epoch + 1, loss);
    })?;

    save_checkpoint(&model, &out).with_context(|| format!("writing {}", out.display()))?;
    let side = ModelSidecar {
        train: t.clone(),
        physics: data.params,
        dataset_header_sha256: header_digest(&data),
        checkpoint_sha256: report.checksum.clone(),
        input_norm: model.input_norm,
        report: Some(report.clone()),
    };
    let side_path = sibling(&out, ".json");
    let mut w = create(&side_path)?;
    serde_json::to_writer_pretty(&mut w, &side)?;
    writeln!(w)?;
    w.flush()?;
    let loss_path = args.loss_csv.unwrap_or_else(|| sibling(&out, ".loss.csv"));
    with_file(&loss_path, |w| write_loss_csv(&report, w))?;

    println!("checkpoint   {}", out.display());
    println!("sha256       {}", report.checksum);
    println!("loss_csv     {}", loss_path.display());
    if let (Some(first), Some(last)) = (report.epoch_losses.first(), report.epoch_losses.last()) {
        println!("loss         {first:.6e} -> {last:.6e}");
    }
    println!("wall_time_s  {:.1}", report.wall_time_secs);
    Ok(())
}

pub struct EvaluateArgs {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub samples: usize,
    pub samples_out: Option<PathBuf>,
}

pub fn evaluate(cfg: &RunConfig, args: EvaluateArgs) -> Result<()> {
    let model_path = required(args.model, &cfg.paths.model, "model")?;
    let data_path = required(args.dataset, &cfg.paths.dataset, "dataset")?;
    let out = required(args.out, &cfg.paths.output, "output")?;
    let (model, side) = open_model(&model_path)?;
    let data = open_dataset(&data_path)?;
    check_lengths(side.as_ref(), &data)?;

    let curve = evaluate_error_curve(&model, &data)?;
    with_file(&out, |w| write_error_csv(&curve, w))?;

    let n = args.samples.min(data.len());
    let samples_path = args.samples_out.unwrap_or_else(|| sibling(&out, ".samples.csv"));
    if n > 0 {
        let subset = data.subset(0..n);
        let estimates: Vec<(usize, Vec<f64>)> = predict_dataset(&model, &subset)?
            .into_iter()
            .enumerate()
            .collect();
        with_file(&samples_path, |w| {
            write_samples_csv(&data.params, &subset, &estimates, w)
        })?;
    }

    println!("error_csv    {}", out.display());
    if n > 0 {
        println!("samples_csv  {}", samples_path.display());
    }
    println!("records      {}", curve.records());
    println!("mid_error    {:.6}", curve.mid_mean());
    let (s, e) = curve.edge_ratios();
    println!("edge_ratios  {s:.3} {e:.3}");
    Ok(())
}

pub struct BaselineArgs {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn baseline(cfg: &RunConfig, args: BaselineArgs) -> Result<()> {
    let data_path = required(args.dataset, &cfg.paths.dataset, "dataset")?;
    let out = required(args.out, &cfg.paths.output, "output")?;
    let data = open_dataset(&data_path)?;
    let curves = baseline_error_curve(&physics_for(cfg, &data), &data)?;
    with_file(&out, |w| write_baseline_csv(&curves, w))?;
    println!("baseline_csv {}", out.display());
    println!("records      {}", curves.smoothed.records());
    println!("mid_smoothed {:.6}", curves.smoothed.mid_mean());
    println!("mid_filtered {:.6}", curves.filtered.mid_mean());
    let (s, e) = curves.smoothed.edge_ratios();
    println!("edge_ratios  {s:.3} {e:.3}");
    Ok(())
}

pub struct CompareArgs {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

pub fn compare_cmd(cfg: &RunConfig, args: CompareArgs) -> Result<()> {
    let model_path = required(args.model, &cfg.paths.model, "model")?;
    let data_path = required(args.dataset, &cfg.paths.dataset, "dataset")?;
    let out = required(args.out, &cfg.paths.output, "output")?;
    let (model, side) = open_model(&model_path)?;
    let data = open_dataset(&data_path)?;
    check_lengths(side.as_ref(), &data)?;
    if data.params != physics_for(cfg, &data) {
        return Err(Error::HeaderMismatch.into());
    }

    let cmp = compare(&model, &data)?;
    let summary = cmp.summary();
    with_file(&out, |w| cmp.write_csv(w))?;
    let summary_path = args.summary.unwrap_or_else(|| sibling(&out, ".summary.csv"));
    with_file(&summary_path, |w| summary.write_csv(w))?;
    println!("compare_csv  {}", out.display());
    println!("summary_csv  {}", summary_path.display());
    print!("{}", summary.table());
    Ok(())
}
