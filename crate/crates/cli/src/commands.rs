//! Command implementations. Each writes its artifacts only after all
//! computation has finished.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use image::{GrayImage, ImageFormat, Luma};
use kspace_core::data::{decode_gray, export_png_tree, load_dataset, resize_bilinear, synth_dataset};
use kspace_core::model::{load_checkpoint, save_checkpoint};
use kspace_core::spectral::{fft2, log_magnitude};
use kspace_core::train::{evaluate, multi_seed_with, EpochRecord, Evaluation};
use kspace_core::umap::embed_latents;
use kspace_core::{Dataset, DiagnosticClass, InputMode, ModelParams, Tensor, UmapConfig};
use serde::{Deserialize, Serialize};

use crate::config::{ModeSelection, RunConfig};
use crate::output::{csv_bytes, dec3, sig6, write_atomic};
use crate::svg::{class_scatter, confusion_heatmap, line_chart, Series};

const HISTORY_HEADER: [&str; 7] = [
    "epoch",
    "train_loss",
    "train_acc",
    "val_loss",
    "val_acc",
    "specificity",
    "auc",
];
const AVERAGED_HEADER: [&str; 4] = ["epoch", "val_acc", "specificity", "auc"];
const REPORT_HEADER: [&str; 5] = ["model", "epoch", "val_acc", "specificity", "auc"];
const MANIFEST: &str = "run.json";

/// Provenance of a training output directory: enough to rebuild the exact
/// dataset split and architecture.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub data: PathBuf,
    pub mode: InputMode,
    /// Present in per-seed directories only.
    pub seed: Option<u64>,
    pub config: RunConfig,
}

impl RunManifest {
    fn write(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&dir.join(MANIFEST), &bytes)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("{} is not a run directory (no {MANIFEST})", dir.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
    }
}

fn load_split(data: &Path, config: &RunConfig) -> Result<Dataset> {
    ensure!(data.is_dir(), "data root {} is not a directory", data.display());
    let dataset = load_dataset(data, config.image_size)
        .with_context(|| format!("cannot load dataset from {}", data.display()))?;
    Ok(dataset.split(config.val_fraction, config.split_seed)?)
}

pub fn synth_data(out: &Path, n: usize, size: usize, noise: f64, seed: u64) -> Result<()> {
    let dataset = synth_dataset(n, size, noise, seed)?;
    let written = export_png_tree(&dataset, out)
        .with_context(|| format!("cannot write images under {}", out.display()))?;
    eprintln!("wrote {} images under {}", written.len(), out.display());
    Ok(())
}

fn history_csv(records: &[EpochRecord]) -> Result<Vec<u8>> {
    csv_bytes(
        &HISTORY_HEADER,
        records.iter().map(|r| {
            [
                r.epoch.to_string(),
                sig6(r.train_loss),
                sig6(r.train_acc),
                sig6(r.val_loss),
                sig6(r.val_acc),
                sig6(r.specificity),
                sig6(r.auc),
            ]
        }),
    )
}

fn averaged_csv(records: &[EpochRecord]) -> Result<Vec<u8>> {
    csv_bytes(
        &AVERAGED_HEADER,
        records.iter().map(|r| {
            [r.epoch.to_string(), sig6(r.val_acc), sig6(r.specificity), sig6(r.auc)]
        }),
    )
}

fn curves(mode: InputMode, records: &[EpochRecord]) -> (String, String) {
    let pts = |f: fn(&EpochRecord) -> f64| -> Vec<(f64, f64)> {
        records.iter().map(|r| (r.epoch as f64, f(r))).collect()
    };
    let loss = line_chart(
        &format!("{mode}: loss"),
        "epoch",
        "cross-entropy",
        &[
            Series { name: "train", color: "#1f77b4", dashed: false, points: pts(|r| r.train_loss) },
            Series { name: "validation", color: "#ff7f0e", dashed: true, points: pts(|r| r.val_loss) },
        ],
    );
    let acc = line_chart(
        &format!("{mode}: accuracy"),
        "epoch",
        "accuracy",
        &[
            Series { name: "train", color: "#1f77b4", dashed: false, points: pts(|r| r.train_acc) },
            Series { name: "validation", color: "#ff7f0e", dashed: true, points: pts(|r| r.val_acc) },
        ],
    );
    (loss, acc)
}

pub fn train(config_path: Option<&Path>, data: &Path, mode: Option<ModeSelection>, out: &Path) -> Result<()> {
    let config = RunConfig::resolve(config_path)?;
    let data = data
        .canonicalize()
        .with_context(|| format!("data root {} does not exist", data.display()))?;
    let dataset = load_split(&data, &config)?;
    let train_config = config.train_config();
    let modes = mode.unwrap_or(config.mode).modes();
    let [train_counts, val_counts] = [
        dataset.class_counts(Some(kspace_core::SplitTag::Train)),
        dataset.class_counts(Some(kspace_core::SplitTag::Validation)),
    ];
    eprintln!(
        "dataset: {} images of {s}x{s}; train per class {train_counts:?}, validation per class {val_counts:?}",
        dataset.len(),
        s = dataset.image_size()
    );

    for mode in modes {
        let report = |m: InputMode, seed: u64, r: &EpochRecord| {
            eprintln!(
                "{m} seed {seed} epoch {}: train_loss {:.4} val_acc {:.4} auc {:.4}",
                r.epoch, r.train_loss, r.val_acc, r.auc
            );
        };
        let result = multi_seed_with(&train_config, &dataset, mode, &config.seeds, &report)?;
        let mode_dir = out.join(mode.as_str());
        for run in &result.runs {
            let dir = mode_dir.join(format!("seed{}", run.seed));
            write_atomic(&dir.join("history.csv"), &history_csv(&run.records)?)?;
            for (epoch, params) in &run.checkpoints {
                save_checkpoint(params, &dir.join(format!("checkpoint_ep{epoch}.bin")))?;
            }
            RunManifest { data: data.clone(), mode, seed: Some(run.seed), config: config.clone() }
                .write(&dir)?;
        }
        write_atomic(&mode_dir.join("averaged.csv"), &averaged_csv(&result.averaged)?)?;
        let (loss, acc) = curves(mode, &result.averaged);
        write_atomic(&mode_dir.join("curves_loss.svg"), loss.as_bytes())?;
        write_atomic(&mode_dir.join("curves_accuracy.svg"), acc.as_bytes())?;
        RunManifest { data: data.clone(), mode, seed: None, config: config.clone() }.write(&mode_dir)?;
        if let Some(last) = result.averaged.last() {
            eprintln!(
                "{mode}: averaged over {} seeds, epoch {} val_acc {:.4}",
                result.runs.len(),
                last.epoch,
                last.val_acc
            );
        }
    }
    Ok(())
}

fn available_epochs(run: &Path) -> Vec<usize> {
    let mut epochs: Vec<usize> = fs::read_dir(run)
        .into_iter()
        .flatten()
        .filter_map(|e| {
            let name = e.ok()?.file_name().into_string().ok()?;
            name.strip_prefix("checkpoint_ep")?.strip_suffix(".bin")?.parse().ok()
        })
        .collect();
    epochs.sort_unstable();
    epochs
}

/// Reload a checkpoint and evaluate it on the run's validation split.
fn reload(run: &Path, epoch: usize) -> Result<(RunManifest, Dataset, Evaluation)> {
    let manifest = RunManifest::read(run)?;
    ensure!(
        manifest.seed.is_some(),
        "{} is a mode directory; pass one of its seed<k> subdirectories",
        run.display()
    );
    let path = run.join(format!("checkpoint_ep{epoch}.bin"));
    if !path.is_file() {
        bail!(
            "no checkpoint for epoch {epoch} in {}; available epochs: {:?}",
            run.display(),
            available_epochs(run)
        );
    }
    let params: ModelParams = load_checkpoint(&path)?;
    ensure!(
        params.mode == manifest.mode,
        "checkpoint mode {} does not match run mode {}",
        params.mode,
        manifest.mode
    );
    let dataset = load_split(&manifest.data, &manifest.config)?;
    let eval = evaluate(&params, &dataset, manifest.config.batch_size)?;
    Ok((manifest, dataset, eval))
}

#[derive(Serialize)]
struct Metrics {
    mode: InputMode,
    seed: u64,
    epoch: usize,
    samples: usize,
    val_loss: f64,
    val_acc: f64,
    specificity: f64,
    auc: f64,
}

pub fn evaluate_cmd(run: &Path, epoch: usize, out: &Path) -> Result<()> {
    let (manifest, _, eval) = reload(run, epoch)?;
    let cm = eval.confusion;
    let mut header = vec!["true\\predicted"];
    header.extend(DiagnosticClass::ALL.iter().map(|c| c.name()));
    let rows = DiagnosticClass::ALL.iter().map(|c| {
        std::iter::once(c.name().to_string())
            .chain(cm.counts[c.code()].iter().map(|v| v.to_string()))
            .collect::<Vec<_>>()
    });
    let confusion_csv = csv_bytes(&header, rows)?;
    let metrics = Metrics {
        mode: manifest.mode,
        seed: manifest.seed.unwrap_or_default(),
        epoch,
        samples: eval.labels.len(),
        val_loss: eval.loss,
        val_acc: eval.accuracy,
        specificity: eval.specificity,
        auc: eval.auc,
    };
    let mut metrics_json = serde_json::to_vec_pretty(&metrics)?;
    metrics_json.push(b'\n');
    let heatmap = confusion_heatmap(
        &format!("{} seed {} epoch {epoch}", manifest.mode, metrics.seed),
        &cm,
    );
    write_atomic(&out.join("confusion.csv"), &confusion_csv)?;
    write_atomic(&out.join("metrics.json"), &metrics_json)?;
    write_atomic(&out.join("confusion.svg"), heatmap.as_bytes())?;
    eprintln!(
        "{} seed {} epoch {epoch}: val_acc {:.4} specificity {:.4} auc {:.4}",
        manifest.mode, metrics.seed, eval.accuracy, eval.specificity, eval.auc
    );
    Ok(())
}

pub fn embed(run: &Path, epoch: usize, umap_config: Option<&Path>, out: &Path) -> Result<()> {
    let (manifest, dataset, eval) = reload(run, epoch)?;
    let config: UmapConfig = match umap_config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid UMAP config {}", p.display()))?
        }
        None => manifest.config.umap.clone(),
    };
    config.validate()?;
    let n = eval.labels.len();
    ensure!(
        n > config.n_neighbors,
        "{n} validation points; UMAP with n_neighbors = {} needs at least {}",
        config.n_neighbors,
        config.n_neighbors + 1
    );
    let labels: Vec<DiagnosticClass> = eval
        .labels
        .iter()
        .map(|&l| DiagnosticClass::from_code(l).ok_or_else(|| anyhow!("bad label {l}")))
        .collect::<Result<_>>()?;
    let embedding = embed_latents(&eval.latent, &labels, epoch, &config)?;
    let coords: Vec<(f64, f64)> =
        (0..n).map(|i| (embedding.coords.at2(i, 0), embedding.coords.at2(i, 1))).collect();

    let rows = eval.indices.iter().zip(&coords).zip(&labels).map(|((&idx, &(x, y)), label)| {
        [
            dataset.samples()[idx].id.clone(),
            sig6(x),
            sig6(y),
            label.name().to_string(),
            dataset.tag(idx).as_str().to_string(),
            epoch.to_string(),
        ]
    });
    let csv = csv_bytes(&["sample_id", "x", "y", "label", "split", "epoch"], rows)?;
    let svg = class_scatter(
        &format!("{} latent space, epoch {epoch}", manifest.mode),
        &coords,
        &labels,
    );
    write_atomic(&out.join("embedding.csv"), &csv)?;
    write_atomic(&out.join("embedding.svg"), svg.as_bytes())?;
    eprintln!("embedded {n} validation latents into {}", out.display());
    Ok(())
}

#[derive(Deserialize)]
struct AveragedRow {
    epoch: usize,
    val_acc: f64,
    specificity: f64,
    auc: f64,
}

pub fn report(runs: &Path, out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    let mut found = 0;
    for mode in InputMode::ALL {
        let dir = runs.join(mode.as_str());
        let path = dir.join("averaged.csv");
        if !path.is_file() {
            eprintln!("warning: no {mode} runs under {} (missing {})", runs.display(), path.display());
            continue;
        }
        found += 1;
        let checkpoints = match RunManifest::read(&dir) {
            Ok(m) => m.config.checkpoint_epochs,
            Err(_) => RunConfig::default().checkpoint_epochs,
        };
        let mut reader = csv::Reader::from_path(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let averaged: Vec<AveragedRow> = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("malformed {}", path.display()))?;
        for epoch in checkpoints {
            let row = averaged
                .iter()
                .find(|r| r.epoch == epoch)
                .ok_or_else(|| anyhow!("{} has no row for checkpoint epoch {epoch}", path.display()))?;
            rows.push([
                mode.as_str().to_string(),
                epoch.to_string(),
                dec3(row.val_acc),
                dec3(row.specificity),
                dec3(row.auc),
            ]);
        }
    }
    ensure!(found > 0, "no runs found under {}", runs.display());
    write_atomic(&out.join("report.csv"), &csv_bytes(&REPORT_HEADER, rows)?)?;
    Ok(())
}

fn gray_png(plane: &Tensor) -> Result<Vec<u8>> {
    let (h, w) = (plane.shape()[0], plane.shape()[1]);
    let (lo, hi) = plane
        .data()
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = (plane.at2(y as usize, x as usize) - lo) / span;
        Luma([(v * 255.0).round() as u8])
    });
    let mut bytes = Vec::new();
    img.write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)?;
    Ok(bytes)
}

/// Side-by-side preview of one image and its k-space: the resized image,
/// the centered log-magnitude spectrum and the centered signed-log real and
/// imaginary planes, each min-max scaled to 8 bits.
pub fn spectrum(image: &Path, size: usize, out: &Path) -> Result<()> {
    ensure!(size.is_power_of_two(), "size must be a power of two, got {size}");
    let img = resize_bilinear(&decode_gray(image)?, size, size)?;
    let planes = fft2(&img)?;
    let centered = planes.centered()?;
    let magnitude = log_magnitude(&centered)?;
    let features = centered.signed_log();
    write_atomic(&out.join("image.png"), &gray_png(&img)?)?;
    write_atomic(&out.join("kspace_magnitude.png"), &gray_png(&magnitude)?)?;
    write_atomic(&out.join("kspace_real.png"), &gray_png(&features.real)?)?;
    write_atomic(&out.join("kspace_imag.png"), &gray_png(&features.imag)?)?;
    Ok(())
}
