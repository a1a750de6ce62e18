//! `eval`: score a `detect` output directory against annotations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dwmgipt_core::metrics::{
    bsf, pd_fa, roc, scrg, FrameOutcome, PdFa, RocCurve, TargetAnnotation,
};
use dwmgipt_core::{Detection, Image};

use crate::config::RunConfig;
use crate::csvio::{read_annotations, read_detections, read_frames, write_csv};
use crate::detect::{CONFIG_FILE, DETECTIONS_FILE, FRAMES_FILE};
use crate::io::read_frame;

pub const METRICS_FILE: &str = "metrics.csv";
pub const ROC_FILE: &str = "roc.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub frames: usize,
    pub totals: PdFa,
    pub roc: RocCurve,
    pub mean_scrg: Option<f64>,
    pub mean_bsf: Option<f64>,
}

impl EvalSummary {
    pub fn line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        format!(
            "frames={} targets={} pd={:.4} fa={:.3e} auc={:.4} mean_scrg={} mean_bsf={}",
            self.frames,
            self.totals.targets,
            self.totals.pd,
            self.totals.fa,
            self.roc.auc,
            opt(self.mean_scrg),
            opt(self.mean_bsf),
        )
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// SCRG and BSF of every target whose neighbourhood fits in the frame.
fn gains(
    input: &Image,
    output: &Image,
    truth: &[TargetAnnotation],
    cfg: &RunConfig,
) -> (Vec<f64>, Vec<f64>) {
    let mut g = Vec::new();
    let mut b = Vec::new();
    for t in truth {
        if let (Ok(s), Ok(f)) = (
            scrg(input, output, t, cfg.margin, cfg.phi),
            bsf(input, output, t, cfg.margin, cfg.phi),
        ) {
            g.push(s);
            b.push(f);
        }
    }
    (g, b)
}

pub fn run(opts: &EvalOptions) -> Result<EvalSummary> {
    let config_path = opts.pred.join(CONFIG_FILE);
    let cfg = if config_path.exists() {
        RunConfig::load(&config_path)?
    } else {
        RunConfig::default()
    };
    let frames = read_frames(&opts.pred.join(FRAMES_FILE))?;
    let mut detections = read_detections(&opts.pred.join(DETECTIONS_FILE))?;
    let mut truth = read_annotations(&opts.gt)?;
    let missing: Vec<&String> = truth
        .keys()
        .filter(|k| !frames.iter().any(|f| &f.id == *k))
        .collect();
    if !missing.is_empty() {
        bail!(
            "annotated frames without predictions in {}: {missing:?}",
            opts.pred.display()
        );
    }

    let mut targets = Vec::with_capacity(frames.len());
    let mut frame_truth = Vec::with_capacity(frames.len());
    let mut frame_dets: Vec<Vec<Detection>> = Vec::with_capacity(frames.len());
    let mut rows = Vec::with_capacity(frames.len());
    let (mut all_scrg, mut all_bsf) = (Vec::new(), Vec::new());
    for f in &frames {
        let target_path = opts.pred.join(&f.id).join("target.pgm");
        let target = read_frame(&target_path)?.image;
        if (target.height(), target.width()) != (f.height, f.width) {
            bail!(
                "{} does not match the recorded frame size",
                target_path.display()
            );
        }
        let t = truth.remove(&f.id).unwrap_or_default();
        let d = detections.remove(&f.id).unwrap_or_default();
        let one = pd_fa(
            &[FrameOutcome {
                detections: &d,
                truth: &t,
                pixels: f.width * f.height,
            }],
            cfg.match_radius,
        )?;
        // Gains need the original frame; runs whose inputs moved still get
        // detection metrics.
        let (g, b) = match read_frame(&f.source) {
            Ok(input) if input.image.height() == f.height && input.image.width() == f.width => {
                gains(&input.image, &target, &t, &cfg)
            }
            _ => {
                eprintln!(
                    "warning: source {} unavailable, skipping SCRG/BSF",
                    f.source.display()
                );
                (Vec::new(), Vec::new())
            }
        };
        rows.push(vec![
            f.id.clone(),
            one.targets.to_string(),
            d.len().to_string(),
            one.true_detections.to_string(),
            one.false_detections.to_string(),
            one.pd.to_string(),
            one.fa.to_string(),
            cell(mean(&g)),
            cell(mean(&b)),
        ]);
        all_scrg.extend(g);
        all_bsf.extend(b);
        targets.push(target);
        frame_truth.push(t);
        frame_dets.push(d);
    }
    if !detections.is_empty() {
        let extra: Vec<&String> = detections.keys().collect();
        bail!("detections for unknown frames: {extra:?}");
    }

    let outcomes: Vec<FrameOutcome<'_>> = frames
        .iter()
        .zip(&frame_dets)
        .zip(&frame_truth)
        .map(|((f, d), t)| FrameOutcome {
            detections: d,
            truth: t,
            pixels: f.width * f.height,
        })
        .collect();
    let totals = pd_fa(&outcomes, cfg.match_radius)?;
    let curve = roc(&targets, &frame_truth, cfg.roc)?;
    let summary = EvalSummary {
        frames: frames.len(),
        totals,
        roc: curve,
        mean_scrg: mean(&all_scrg),
        mean_bsf: mean(&all_bsf),
    };

    fs::create_dir_all(&opts.out)
        .with_context(|| format!("cannot create {}", opts.out.display()))?;
    write_outputs(&opts.out, rows, &summary)?;
    Ok(summary)
}

fn write_outputs(out: &Path, rows: Vec<Vec<String>>, s: &EvalSummary) -> Result<()> {
    write_csv(
        &out.join(METRICS_FILE),
        &[
            "frame_id",
            "targets",
            "detections",
            "true_detections",
            "false_detections",
            "pd",
            "fa",
            "mean_scrg",
            "mean_bsf",
        ],
        rows,
    )?;
    write_csv(
        &out.join(ROC_FILE),
        &["threshold", "fa", "pd"],
        s.roc
            .points
            .iter()
            .map(|p| vec![p.threshold.to_string(), p.fa.to_string(), p.pd.to_string()]),
    )?;
    let t = &s.totals;
    write_csv(
        &out.join(SUMMARY_FILE),
        &[
            "frames",
            "targets",
            "true_detections",
            "false_detections",
            "pd",
            "fa",
            "auc",
            "fa_max",
            "mean_scrg",
            "mean_bsf",
        ],
        [vec![
            s.frames.to_string(),
            t.targets.to_string(),
            t.true_detections.to_string(),
            t.false_detections.to_string(),
            t.pd.to_string(),
            t.fa.to_string(),
            s.roc.auc.to_string(),
            s.roc.fa_max.to_string(),
            cell(s.mean_scrg),
            cell(s.mean_bsf),
        ]],
    )
}
