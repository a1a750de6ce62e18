//! Detection quality metrics: SCR, SCR gain, background suppression
//! factor, detection probability / false-alarm rate and the ROC curve.

use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::image::Image;
use crate::pipeline::Detection;

/// Default neighborhood margin `c` around a target box.
pub const DEFAULT_MARGIN: usize = 65;
/// Default stabilizer φ added to vanishing denominators.
pub const DEFAULT_PHI: f64 = 0.01;
/// Default centroid matching radius in pixels.
pub const DEFAULT_MATCH_RADIUS: f64 = 4.0;

/// Ground-truth target: centroid plus an `a × b` box centred on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetAnnotation {
    pub cx: f64,
    pub cy: f64,
    /// Box width.
    pub a: usize,
    /// Box height.
    pub b: usize,
}

/// Inclusive-exclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelBox {
    pub fn contains(&self, y: usize, x: usize) -> bool {
        (self.y0..self.y1).contains(&y) && (self.x0..self.x1).contains(&x)
    }
}

impl TargetAnnotation {
    /// Target box in pixel coordinates; errors if any part leaves the image.
    pub fn pixel_box(&self, height: usize, width: usize) -> Result<PixelBox> {
        let start = |c: f64, len: usize| libm::floor(c - (len as f64 - 1.0) / 2.0 + 0.5);
        let x0 = start(self.cx, self.a);
        let y0 = start(self.cy, self.b);
        if self.a == 0 || self.b == 0 || !x0.is_finite() || !y0.is_finite() || x0 < 0.0 || y0 < 0.0
        {
            return Err(Error::AnnotationOutOfBounds);
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        let (x1, y1) = (x0 + self.a, y0 + self.b);
        if x1 > width || y1 > height {
            return Err(Error::AnnotationOutOfBounds);
        }
        Ok(PixelBox { x0, y0, x1, y1 })
    }

    /// The `(a + 2c) × (b + 2c)` neighborhood clipped to the image.
    pub fn neighborhood(&self, height: usize, width: usize, margin: usize) -> Result<PixelBox> {
        let t = self.pixel_box(height, width)?;
        Ok(PixelBox {
            x0: t.x0.saturating_sub(margin),
            y0: t.y0.saturating_sub(margin),
            x1: (t.x1 + margin).min(width),
            y1: (t.y1 + margin).min(height),
        })
    }
}

/// Mean over the target box, mean and standard deviation over the ring
/// (neighborhood minus target box).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub target_mean: f64,
    pub ring_mean: f64,
    pub ring_std: f64,
}

pub fn region_stats(img: &Image, ann: &TargetAnnotation, margin: usize) -> Result<RegionStats> {
    let tb = ann.pixel_box(img.height(), img.width())?;
    let nb = ann.neighborhood(img.height(), img.width(), margin)?;
    let (mut t_sum, mut t_n) = (0.0, 0usize);
    let mut ring = Vec::new();
    for y in nb.y0..nb.y1 {
        for x in nb.x0..nb.x1 {
            let v = img.get(y, x);
            if tb.contains(y, x) {
                t_sum += v;
                t_n += 1;
            } else {
                ring.push(v);
            }
        }
    }
    if ring.is_empty() {
        return Err(param("margin", "neighborhood ring is empty"));
    }
    let n = ring.len() as f64;
    let ring_mean = ring.iter().sum::<f64>() / n;
    let ring_var = ring
        .iter()
        .map(|v| (v - ring_mean) * (v - ring_mean))
        .sum::<f64>()
        / n;
    Ok(RegionStats {
        target_mean: t_sum / t_n as f64,
        ring_mean,
        ring_std: libm::sqrt(ring_var),
    })
}

/// Signal-to-clutter ratio `|μ_t − μ_b| / (σ_b + φ)`.
pub fn scr(img: &Image, ann: &TargetAnnotation, margin: usize, phi: f64) -> Result<f64> {
    let s = region_stats(img, ann, margin)?;
    Ok((s.target_mean - s.ring_mean).abs() / (s.ring_std + phi))
}

/// SCR gain `SCR_out / (SCR_in + φ)`.
pub fn scrg(
    input: &Image,
    output: &Image,
    ann: &TargetAnnotation,
    margin: usize,
    phi: f64,
) -> Result<f64> {
    let before = scr(input, ann, margin, phi)?;
    let after = scr(output, ann, margin, phi)?;
    Ok(after / (before + phi))
}

/// Background suppression factor `σ_in / (σ_out + φ)` over the ring.
pub fn bsf(
    input: &Image,
    output: &Image,
    ann: &TargetAnnotation,
    margin: usize,
    phi: f64,
) -> Result<f64> {
    let before = region_stats(input, ann, margin)?;
    let after = region_stats(output, ann, margin)?;
    Ok(before.ring_std / (after.ring_std + phi))
}

/// Detections and ground truth of one frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameOutcome<'a> {
    pub detections: &'a [Detection],
    pub truth: &'a [TargetAnnotation],
    pub pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdFa {
    pub true_detections: usize,
    pub false_detections: usize,
    pub targets: usize,
    pub pixels: usize,
    /// True detections over actual targets (0 when there are no targets).
    pub pd: f64,
    /// False detections over image pixels.
    pub fa: f64,
}

/// One-to-one greedy matching, nearest pairs first, within `radius`.
/// Returns the number of matched pairs.
pub fn match_detections(
    detections: &[Detection],
    truth: &[TargetAnnotation],
    radius: f64,
) -> usize {
    let mut pairs = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let dist = libm::hypot(d.cx - t.cx, d.cy - t.cy);
            if dist <= radius {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = alloc::vec![false; detections.len()];
    let mut gt_used = alloc::vec![false; truth.len()];
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !det_used[i] && !gt_used[j] {
            det_used[i] = true;
            gt_used[j] = true;
            matched += 1;
        }
    }
    matched
}

pub fn pd_fa(frames: &[FrameOutcome<'_>], radius: f64) -> Result<PdFa> {
    if !(radius > 0.0) {
        return Err(param("match_radius", "must be positive"));
    }
    let mut out = PdFa::default();
    for f in frames {
        let matched = match_detections(f.detections, f.truth, radius);
        out.true_detections += matched;
        out.false_detections += f.detections.len() - matched;
        out.targets += f.truth.len();
        out.pixels += f.pixels;
    }
    out.pd = if out.targets > 0 {
        out.true_detections as f64 / out.targets as f64
    } else {
        0.0
    };
    out.fa = if out.pixels > 0 {
        out.false_detections as f64 / out.pixels as f64
    } else {
        0.0
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSweep {
    /// Every distinct intensity present in the target images.
    UniqueValues,
    /// `n ≥ 2` evenly spaced thresholds from the global minimum to maximum.
    Grid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fa: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Sorted by ascending `fa`, then ascending `pd`.
    pub points: Vec<RocPoint>,
    /// Largest observed false-alarm rate; the AUC abscissa is `fa / fa_max`.
    pub fa_max: f64,
    pub auc: f64,
}

/// Pixel-level ROC over segmentation thresholds.
///
/// At threshold `t` a target counts as detected when any pixel of its box
/// exceeds `t`; every pixel above `t` outside all target boxes counts as a
/// false detection. AUC is the trapezoid area under `Pd` against
/// `Fa / fa_max`, anchored at `(0, Pd_min)` and `(1, Pd_max)`.
pub fn roc(
    targets: &[Image],
    truth: &[Vec<TargetAnnotation>],
    sweep: ThresholdSweep,
) -> Result<RocCurve> {
    if targets.len() != truth.len() {
        return Err(param(
            "truth",
            "one annotation list per target image is required",
        ));
    }
    let mut target_peaks = Vec::new();
    let mut clutter = Vec::new();
    let mut pixels = 0usize;
    let mut all_values = Vec::new();
    for (img, anns) in targets.iter().zip(truth) {
        let boxes = anns
            .iter()
            .map(|a| a.pixel_box(img.height(), img.width()))
            .collect::<Result<Vec<_>>>()?;
        for b in &boxes {
            let mut peak = f64::NEG_INFINITY;
            for y in b.y0..b.y1 {
                for x in b.x0..b.x1 {
                    peak = peak.max(img.get(y, x));
                }
            }
            target_peaks.push(peak);
        }
        for y in 0..img.height() {
            for x in 0..img.width() {
                let v = img.get(y, x);
                if !boxes.iter().any(|b| b.contains(y, x)) {
                    clutter.push(v);
                }
            }
        }
        pixels += img.height() * img.width();
        if matches!(sweep, ThresholdSweep::UniqueValues) {
            all_values.extend_from_slice(img.pixels());
        }
    }
    if pixels == 0 {
        return Err(param("targets", "at least one image is required"));
    }
    target_peaks.sort_unstable_by(f64::total_cmp);
    clutter.sort_unstable_by(f64::total_cmp);

    let thresholds: Vec<f64> = match sweep {
        ThresholdSweep::UniqueValues => {
            all_values.sort_unstable_by(f64::total_cmp);
            all_values.dedup();
            all_values
        }
        ThresholdSweep::Grid(n) => {
            if n < 2 {
                return Err(param("grid", "needs at least two thresholds"));
            }
            let (lo, hi) = targets
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, img| {
                    let (l, h) = img.min_max();
                    (acc.0.min(l), acc.1.max(h))
                });
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
    };

    let above = |sorted: &[f64], t: f64| sorted.len() - sorted.partition_point(|&v| v <= t);
    let n_targets = target_peaks.len();
    let mut points: Vec<RocPoint> = thresholds
        .iter()
        .map(|&t| RocPoint {
            threshold: t,
            pd: if n_targets > 0 {
                above(&target_peaks, t) as f64 / n_targets as f64
            } else {
                0.0
            },
            fa: above(&clutter, t) as f64 / pixels as f64,
        })
        .collect();
    points.sort_by(|a, b| a.fa.total_cmp(&b.fa).then(a.pd.total_cmp(&b.pd)));

    let fa_max = points.iter().fold(0.0f64, |m, p| m.max(p.fa));
    let pd_min = points.iter().fold(1.0f64, |m, p| m.min(p.pd));
    let pd_max = points.iter().fold(0.0f64, |m, p| m.max(p.pd));
    let auc = if fa_max > 0.0 {
        let mut prev = (0.0, pd_min);
        let mut area = 0.0;
        for p in points
            .iter()
            .map(|p| (p.fa / fa_max, p.pd))
            .chain([(1.0, pd_max)])
        {
            area += (p.0 - prev.0) * 0.5 * (p.1 + prev.1);
            prev = p;
        }
        area
    } else {
        pd_max
    };
    Ok(RocCurve {
        points,
        fa_max,
        auc: auc.clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn det(cx: f64, cy: f64) -> Detection {
        Detection {
            cx,
            cy,
            x0: cx as usize,
            y0: cy as usize,
            w: 1,
            h: 1,
            peak: 1.0,
            area: 1,
        }
    }

    fn ann(cx: f64, cy: f64) -> TargetAnnotation {
        TargetAnnotation { cx, cy, a: 3, b: 3 }
    }

    #[test]
    fn scr_arithmetic() {
        // Target box 3x3 at value 200; ring alternates 50 / 150 → μ_b = 100, σ_b = 50.
        let a = ann(10.0, 10.0);
        let tb = a.pixel_box(21, 21).unwrap();
        let mut flip = false;
        let img = Image::from_fn(21, 21, |y, x| {
            if tb.contains(y, x) {
                200.0
            } else {
                flip = !flip;
                if flip {
                    50.0
                } else {
                    150.0
                }
            }
        })
        .unwrap();
        let s = region_stats(&img, &a, 65).unwrap();
        assert!((s.ring_mean - 100.0).abs() < 1e-12);
        assert!((s.ring_std - 50.0).abs() < 1e-12);
        let v = scr(&img, &a, 65, 0.01).unwrap();
        assert!((v - 100.0 / 50.01).abs() < 1e-12);
        assert!((v - 1.9996).abs() < 1e-4);
    }

    #[test]
    fn scr_degenerate_cases() {
        let a = ann(5.0, 5.0);
        let flat = Image::filled(11, 11, 7.0).unwrap();
        assert_eq!(scr(&flat, &a, 3, 0.01).unwrap(), 0.0);
        let tb = a.pixel_box(11, 11).unwrap();
        let bump =
            Image::from_fn(11, 11, |y, x| if tb.contains(y, x) { 9.0 } else { 7.0 }).unwrap();
        assert!((scr(&bump, &a, 3, 0.01).unwrap() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn annotation_bounds() {
        assert!(ann(0.0, 5.0).pixel_box(10, 10).is_err());
        assert!(ann(9.0, 5.0).pixel_box(10, 10).is_err());
        let b = ann(1.0, 8.0).pixel_box(10, 10).unwrap();
        assert_eq!(
            b,
            PixelBox {
                x0: 0,
                y0: 7,
                x1: 3,
                y1: 10
            }
        );
        let even = TargetAnnotation {
            cx: 4.5,
            cy: 4.5,
            a: 4,
            b: 2,
        };
        assert_eq!(
            even.pixel_box(10, 10).unwrap(),
            PixelBox {
                x0: 3,
                y0: 4,
                x1: 7,
                y1: 6
            }
        );
    }

    #[test]
    fn identity_processing() {
        let a = ann(8.0, 8.0);
        let img = Image::from_fn(17, 17, |y, x| {
            ((y * 7 + x * 3) % 13) as f64 + if y == 8 && x == 8 { 60.0 } else { 0.0 }
        })
        .unwrap();
        let b = bsf(&img, &img, &a, 65, 0.01).unwrap();
        let g = scrg(&img, &img, &a, 65, 0.01).unwrap();
        assert!(b < 1.0 && b > 0.99);
        assert!(g < 1.0 && g > 0.99);
    }

    #[test]
    fn zeroed_ring() {
        let a = ann(8.0, 8.0);
        let tb = a.pixel_box(17, 17).unwrap();
        let input = Image::from_fn(17, 17, |y, x| {
            if tb.contains(y, x) {
                90.0
            } else {
                ((y + x) % 2) as f64 * 10.0
            }
        })
        .unwrap();
        let output =
            Image::from_fn(17, 17, |y, x| if tb.contains(y, x) { 90.0 } else { 0.0 }).unwrap();
        let sigma_in = region_stats(&input, &a, 65).unwrap().ring_std;
        let b = bsf(&input, &output, &a, 65, 0.01).unwrap();
        assert!((b - sigma_in / 0.01).abs() < 1e-9);
    }

    #[test]
    fn pd_fa_cases() {
        let truth = [ann(100.0, 100.0)];
        let all = [det(101.0, 100.0)];
        let r = pd_fa(
            &[FrameOutcome {
                detections: &all,
                truth: &truth,
                pixels: 65536,
            }],
            4.0,
        )
        .unwrap();
        assert_eq!((r.pd, r.fa), (1.0, 0.0));

        let r = pd_fa(
            &[FrameOutcome {
                detections: &[],
                truth: &truth,
                pixels: 65536,
            }],
            4.0,
        )
        .unwrap();
        assert_eq!((r.pd, r.fa), (0.0, 0.0));

        let extra = [det(101.0, 100.0), det(10.0, 10.0), det(200.0, 30.0)];
        let r = pd_fa(
            &[FrameOutcome {
                detections: &extra,
                truth: &truth,
                pixels: 65536,
            }],
            4.0,
        )
        .unwrap();
        assert_eq!(r.pd, 1.0);
        assert_eq!(r.fa, 2.0 / 65536.0);

        assert!(pd_fa(&[], 0.0).is_err());
    }

    #[test]
    fn matching_is_one_to_one() {
        let truth = [ann(10.0, 10.0), ann(12.0, 10.0)];
        let dets = [det(11.0, 10.0)];
        assert_eq!(match_detections(&dets, &truth, 4.0), 1);
        let dets = [det(10.2, 10.0), det(10.4, 10.0), det(10.6, 10.0)];
        assert_eq!(match_detections(&dets, &truth[..1], 4.0), 1);
    }

    #[test]
    fn roc_perfect_and_empty() {
        let a = TargetAnnotation {
            cx: 5.0,
            cy: 5.0,
            a: 1,
            b: 1,
        };
        let img = Image::from_fn(11, 11, |y, x| {
            if (y, x) == (5, 5) {
                50.0
            } else {
                ((y * 11 + x) % 7) as f64
            }
        })
        .unwrap();
        let curve = roc(&[img], &[vec![a]], ThresholdSweep::UniqueValues).unwrap();
        assert_eq!(curve.auc, 1.0);
        let zero = Image::filled(11, 11, 0.0).unwrap();
        let curve = roc(&[zero], &[vec![a]], ThresholdSweep::UniqueValues).unwrap();
        assert!(curve.points.iter().all(|p| p.pd == 0.0));
        assert_eq!(curve.auc, 0.0);
    }
}
