//! `detect`: separate every input frame and export the results.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dwmgipt_core::{detect, Detection, DetectionReport};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::csvio;
use crate::io::{read_frame, rescale_to_byte, write_pgm, write_text, Frame};

pub const CONFIG_FILE: &str = "config.txt";
pub const DETECTIONS_FILE: &str = "detections.csv";
pub const FRAMES_FILE: &str = "frames.csv";
pub const TRACE_FILE: &str = "trace.csv";

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "pnm", "png"];

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub config: PathBuf,
    pub input: PathBuf,
    pub out: PathBuf,
    pub trace: bool,
}

/// What one successfully processed frame contributes to the aggregates.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub id: String,
    pub source: PathBuf,
    pub width: usize,
    pub height: usize,
    pub iterations: usize,
    pub converged: bool,
    pub threshold: f64,
    pub detections: Vec<Detection>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct DetectSummary {
    pub frames: Vec<FrameResult>,
    /// Frames that could not be read or processed, with the reason.
    pub failures: Vec<(PathBuf, anyhow::Error)>,
}

impl DetectSummary {
    pub fn line(&self) -> String {
        let n = self.frames.len();
        let detections: usize = self.frames.iter().map(|f| f.detections.len()).sum();
        let mean = |f: fn(&FrameResult) -> f64| {
            if n == 0 {
                0.0
            } else {
                self.frames.iter().map(f).sum::<f64>() / n as f64
            }
        };
        format!(
            "frames={n} failed={} detections={detections} mean_iterations={:.1} mean_seconds_per_frame={:.3}",
            self.failures.len(),
            mean(|f| f.iterations as f64),
            mean(|f| f.seconds),
        )
    }
}

/// Frames named by an input path: the file itself, or every image file
/// directly inside a directory, sorted by name.
pub fn collect_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(input).with_context(|| format!("cannot read {}", input.display()))?;
    if !meta.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(input).with_context(|| format!("cannot list {}", input.display()))? {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image && path.is_file() {
            files.push(path);
        }
    }
    if files.is_empty() {
        bail!("no image files in {}", input.display());
    }
    files.sort();
    Ok(files)
}

pub fn frame_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("cannot derive a frame name from {}", path.display()))
}

/// Worker pool sized by `DWMGIPT_THREADS` (unset or 0 = all cores).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("DWMGIPT_THREADS") {
        Ok(v) => v.trim().parse::<usize>().with_context(|| {
            format!("DWMGIPT_THREADS must be a non-negative integer, found {v:?}")
        })?,
        Err(_) => 0,
    };
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?)
}

pub fn run(opts: &DetectOptions) -> Result<DetectSummary> {
    // Everything that can be checked up front is, so a bad config or input
    // list fails before any frame is touched.
    let cfg = RunConfig::load(&opts.config)?;
    let inputs = collect_inputs(&opts.input)?;
    let mut ids = BTreeSet::new();
    let mut jobs = Vec::with_capacity(inputs.len());
    for path in inputs {
        let id = frame_id(&path)?;
        if !ids.insert(id.clone()) {
            bail!("two input frames share the name {id}");
        }
        jobs.push((path, id));
    }
    let pool = thread_pool()?;
    fs::create_dir_all(&opts.out)
        .with_context(|| format!("cannot create {}", opts.out.display()))?;
    write_text(&opts.out.join(CONFIG_FILE), &cfg.to_text())?;

    let outcomes: Vec<Result<FrameResult>> = pool.install(|| {
        jobs.par_iter()
            .map(|(path, id)| process_frame(path, id, &cfg, &opts.out, opts.trace))
            .collect()
    });

    let mut summary = DetectSummary {
        frames: Vec::new(),
        failures: Vec::new(),
    };
    for ((path, _), outcome) in jobs.into_iter().zip(outcomes) {
        match outcome {
            Ok(f) => summary.frames.push(f),
            Err(e) => summary.failures.push((path, e)),
        }
    }
    write_aggregates(&opts.out, &summary.frames)?;
    Ok(summary)
}

fn process_frame(
    path: &Path,
    id: &str,
    cfg: &RunConfig,
    out: &Path,
    trace: bool,
) -> Result<FrameResult> {
    let start = Instant::now();
    let frame = read_frame(path)?;
    let report = detect(&frame.image, &cfg.detect)
        .with_context(|| format!("detection failed on {}", path.display()))?;
    let seconds = start.elapsed().as_secs_f64();

    // The frame's files are assembled in a scratch directory and moved into
    // place in one rename, so a failure leaves nothing behind.
    let scratch = tempfile::Builder::new()
        .prefix(".partial-")
        .tempdir_in(out)
        .with_context(|| format!("cannot write into {}", out.display()))?;
    write_frame_files(scratch.path(), id, &frame, &report, cfg, trace)
        .with_context(|| format!("cannot write outputs for {}", path.display()))?;
    let dest = out.join(id);
    if dest.exists() {
        fs::remove_dir_all(&dest).with_context(|| format!("cannot replace {}", dest.display()))?;
    }
    let kept = scratch.keep();
    if let Err(e) = fs::rename(&kept, &dest) {
        let _ = fs::remove_dir_all(&kept);
        return Err(e).with_context(|| format!("cannot create {}", dest.display()));
    }

    Ok(FrameResult {
        id: id.to_string(),
        source: fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()),
        width: frame.image.width(),
        height: frame.image.height(),
        iterations: report.iterations(),
        converged: report.converged,
        threshold: report.segmentation.threshold,
        detections: report.detections().to_vec(),
        seconds,
    })
}

fn write_frame_files(
    dir: &Path,
    id: &str,
    frame: &Frame,
    report: &DetectionReport,
    cfg: &RunConfig,
    trace: bool,
) -> Result<()> {
    // Outputs are 8-bit; 16-bit sources are scaled down to match.
    let to_byte = 255.0 / f64::from(frame.maxval);
    write_pgm(&dir.join("target.pgm"), &report.target.map(|p| p * to_byte))?;
    write_pgm(
        &dir.join("background.pgm"),
        &report.background.map(|p| p * to_byte),
    )?;
    write_pgm(
        &dir.join("mask.pgm"),
        &report
            .segmentation
            .mask
            .map(|m| if m > 0.0 { 255.0 } else { 0.0 }),
    )?;
    csvio::write_detections(&dir.join(DETECTIONS_FILE), [(id, report.detections())])?;
    if trace {
        csvio::write_trace(&dir.join(TRACE_FILE), &report.trace)?;
    }
    if cfg.dump_prior {
        let p = &report.prior;
        write_pgm(&dir.join("prior_target.pgm"), &rescale_to_byte(&p.target))?;
        write_pgm(
            &dir.join("prior_background.pgm"),
            &rescale_to_byte(&p.background),
        )?;
        write_pgm(
            &dir.join("prior_combined.pgm"),
            &rescale_to_byte(&p.combined),
        )?;
    }
    Ok(())
}

fn write_aggregates(out: &Path, frames: &[FrameResult]) -> Result<()> {
    csvio::write_detections(
        &out.join(DETECTIONS_FILE),
        frames
            .iter()
            .map(|f| (f.id.as_str(), f.detections.as_slice())),
    )?;
    csvio::write_frames(&out.join(FRAMES_FILE), frames)
}
