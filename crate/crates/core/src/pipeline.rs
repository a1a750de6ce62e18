//! End-to-end detection: prior, patch tensor, separation, reconstruction
//! and adaptive-threshold segmentation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::image::Image;
use crate::mgipt::PatchModel;
use crate::prior::{inverse_prior_tensor, PriorMaps, SteeringConfig};
use crate::solver::{Admm, IterationRecord, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Multiplier of the target-image standard deviation.
    pub k_sigma: f64,
    /// Absolute lower bound on the threshold.
    pub v_min: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            k_sigma: 3.0,
            v_min: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectConfig {
    pub patch_h: usize,
    pub patch_w: usize,
    pub step: usize,
    pub steering: SteeringConfig,
    pub solver: SolverConfig,
    pub segment: SegmentConfig,
    /// Divide the frame by its peak magnitude before separation and scale
    /// the outputs back, so the solver constants act on `[0, 1]` data.
    pub normalize: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            patch_h: 50,
            patch_w: 50,
            step: 40,
            steering: SteeringConfig::default(),
            solver: SolverConfig::default(),
            segment: SegmentConfig::default(),
            normalize: true,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_h == 0 || self.patch_w == 0 {
            return Err(param("patch", "must be at least 1"));
        }
        if self.step == 0 {
            return Err(param("step", "must be at least 1"));
        }
        self.steering.validate()?;
        self.solver.validate()?;
        if !(self.segment.k_sigma >= 0.0) || !self.segment.k_sigma.is_finite() {
            return Err(param("k_sigma", "must be non-negative"));
        }
        if !self.segment.v_min.is_finite() {
            return Err(param("v_min", "must be finite"));
        }
        Ok(())
    }
}

/// One connected component of the binarized target image.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Intensity-weighted centroid, `x` along the width.
    pub cx: f64,
    pub cy: f64,
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
    pub peak: f64,
    pub area: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub threshold: f64,
    pub mask: Image,
    pub detections: Vec<Detection>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// 8-connected components of `pixels > threshold`, in raster order of
/// their first pixel.
pub fn components_above(img: &Image, threshold: f64) -> (Image, Vec<Detection>) {
    let (h, w) = (img.height(), img.width());
    let on: Vec<bool> = img.pixels().iter().map(|&p| p > threshold).collect();
    let mut seen = vec![false; h * w];
    let mut detections = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !on[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (usize::MAX, 0, usize::MAX, 0);
        let (mut sum, mut sx, mut sy, mut peak, mut area) = (0.0, 0.0, 0.0, f64::NEG_INFINITY, 0);
        while let Some(idx) = stack.pop() {
            let (y, x) = (idx / w, idx % w);
            let v = img.pixels()[idx];
            area += 1;
            sum += v;
            sx += v * x as f64;
            sy += v * y as f64;
            peak = peak.max(v);
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let n = ny * w + nx;
                    if on[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        let (cx, cy) = if sum > 0.0 {
            (sx / sum, sy / sum)
        } else {
            (0.5 * (x_lo + x_hi) as f64, 0.5 * (y_lo + y_hi) as f64)
        };
        detections.push(Detection {
            cx,
            cy,
            x0: x_lo,
            y0: y_lo,
            w: x_hi - x_lo + 1,
            h: y_hi - y_lo + 1,
            peak,
            area,
        });
    }
    let mask = Image::new(
        h,
        w,
        on.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )
    .expect("mask has image dimensions");
    (mask, detections)
}

/// Adaptive threshold `max(v_min, μ + k·σ)` followed by 8-connected labelling.
pub fn segment(target: &Image, cfg: &SegmentConfig) -> Segmentation {
    let (mean, std) = mean_std(target.pixels());
    let threshold = cfg.v_min.max(mean + cfg.k_sigma * std);
    let (mask, detections) = components_above(target, threshold);
    Segmentation {
        threshold,
        mask,
        detections,
    }
}

#[derive(Debug, Clone)]
pub struct DetectionReport {
    pub target: Image,
    pub background: Image,
    pub prior: PriorMaps,
    pub segmentation: Segmentation,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

impl DetectionReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn detections(&self) -> &[Detection] {
        &self.segmentation.detections
    }
}

/// Runs the full detection procedure on one grayscale frame.
pub fn detect(img: &Image, cfg: &DetectConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let pm = PatchModel::plan(
        img.height(),
        img.width(),
        cfg.patch_h,
        cfg.patch_w,
        cfg.step,
    )?;
    let peak = img.pixels().iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if peak == 0.0 {
        // Nothing to separate; the solver needs a nonzero observation.
        let zero = img.map(|_| 0.0);
        return Ok(DetectionReport {
            prior: PriorMaps::compute(img, &cfg.steering)?,
            segmentation: segment(&zero, &cfg.segment),
            target: zero,
            background: img.clone(),
            trace: Vec::new(),
            converged: true,
        });
    }
    let scale = if cfg.normalize { peak } else { 1.0 };
    let scaled = img.map(|p| p / scale);
    let prior = PriorMaps::compute(&scaled, &cfg.steering)?;
    let d = pm.image_to_tensor(&scaled)?;
    let inv_prior = inverse_prior_tensor(&prior.combined, &pm)?;
    let solution = Admm::new(
        d,
        inv_prior,
        pm.lambda(cfg.solver.lambda_scale),
        &cfg.solver,
    )?
    .run()?;
    let background = pm.tensor_to_image(&solution.background)?.map(|v| v * scale);
    let target = pm
        .tensor_to_image(&solution.target)?
        .map(|v| v.max(0.0) * scale);
    let segmentation = segment(&target, &cfg.segment);
    Ok(DetectionReport {
        target,
        background,
        prior,
        segmentation,
        trace: solution.trace,
        converged: solution.converged,
    })
}
