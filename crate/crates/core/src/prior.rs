//! Steering-kernel local structure prior.
//!
//! Each pixel gets a 2×2 steering covariance estimated from the image
//! gradients in a small window. Its two eigenvalues separate flat regions
//! (isotropic, both small), one-dimensional structure such as straight
//! edges (strongly elongated, small product) and compact bright spots
//! (both large). The eigenvalue maps are turned into a target prior, a
//! background prior and their product, which scales the sparse penalty.

use alloc::vec::Vec;

use crate::error::{param, Result};
use crate::image::Image;
use crate::mgipt::PatchModel;
use crate::tensor::Tensor;

/// Lower bound applied to the combined prior before it is inverted.
pub const PRIOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringConfig {
    /// Odd side of the gradient window (M = window²).
    pub window: usize,
    /// Elongation regularizer λ′.
    pub elongation_reg: f64,
    /// Scaling regularizer λ″.
    pub scaling_reg: f64,
    /// Exponent applied to `(s1·s2 + λ″) / M` to form the scaling γ.
    pub gamma_exponent: f64,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        Self {
            window: 5,
            elongation_reg: 1.0,
            scaling_reg: 1e-7,
            gamma_exponent: 0.5,
        }
    }
}

impl SteeringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(param("sk_window", "must be odd and at least 3"));
        }
        if !(self.elongation_reg > 0.0) || !(self.scaling_reg > 0.0) {
            return Err(param("sk_regularizer", "must be positive"));
        }
        if !(self.gamma_exponent > 0.0) || !self.gamma_exponent.is_finite() {
            return Err(param("sk_gamma_exponent", "must be positive"));
        }
        Ok(())
    }
}

/// Symmetric 2×2 steering covariance `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Covariance {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Steering kernel weight for a displacement `(dx, dy)`.
    pub fn kernel(&self, dx: f64, dy: f64) -> f64 {
        let q = self.xx * dx * dx + 2.0 * self.xy * dx * dy + self.yy * dy * dy;
        libm::sqrt(self.det().max(0.0)) * libm::exp(-q)
    }
}

/// Per-pixel steering covariances and their eigenvalues `λ1 ≥ λ2 ≥ 0`.
#[derive(Debug, Clone)]
pub struct SteeringStats {
    pub covariance: Vec<Covariance>,
    pub l1: Image,
    pub l2: Image,
}

/// Central-difference gradients `(Gx, Gy)` with replicated borders;
/// `x` runs along the width.
pub fn gradients(img: &Image) -> (Image, Image) {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let mut gx = img.clone();
    let mut gy = img.clone();
    for y in 0..h {
        for x in 0..w {
            let dx = 0.5 * (img.get_clamped(y, x + 1) - img.get_clamped(y, x - 1));
            let dy = 0.5 * (img.get_clamped(y + 1, x) - img.get_clamped(y - 1, x));
            gx.set(y as usize, x as usize, dx);
            gy.set(y as usize, x as usize, dy);
        }
    }
    (gx, gy)
}

/// Singular values and dominant right singular vector of the `M × 2`
/// gradient matrix, from the eigen-decomposition of its 2×2 Gram matrix.
fn gram_svd(sxx: f64, sxy: f64, syy: f64) -> (f64, f64, (f64, f64)) {
    let mean = 0.5 * (sxx + syy);
    let half = 0.5 * (sxx - syy);
    let radius = libm::hypot(half, sxy);
    let e1 = (mean + radius).max(0.0);
    let e2 = (mean - radius).max(0.0);
    let v1 = if sxy != 0.0 {
        let (a, b) = (e1 - syy, sxy);
        let n = libm::hypot(a, b);
        (a / n, b / n)
    } else if sxx >= syy {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    (libm::sqrt(e1), libm::sqrt(e2), v1)
}

pub fn steering_covariance(gx: &Image, gy: &Image, cfg: &SteeringConfig) -> Result<SteeringStats> {
    cfg.validate()?;
    let (h, w) = (gx.height(), gx.width());
    let r = (cfg.window / 2) as isize;
    let samples = (cfg.window * cfg.window) as f64;
    let mut covariance = Vec::with_capacity(h * w);
    let mut l1 = Vec::with_capacity(h * w);
    let mut l2 = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let a = gx.get_clamped(y + dy, x + dx);
                    let b = gy.get_clamped(y + dy, x + dx);
                    sxx += a * a;
                    sxy += a * b;
                    syy += b * b;
                }
            }
            let (s1, s2, (v1x, v1y)) = gram_svd(sxx, sxy, syy);
            let tau1 = (s1 + cfg.elongation_reg) / (s2 + cfg.elongation_reg);
            let tau2 = (s2 + cfg.elongation_reg) / (s1 + cfg.elongation_reg);
            let gamma = libm::pow((s1 * s2 + cfg.scaling_reg) / samples, cfg.gamma_exponent);
            // v2 = (-v1y, v1x)
            let (a, b) = (gamma * tau1, gamma * tau2);
            covariance.push(Covariance {
                xx: a * v1x * v1x + b * v1y * v1y,
                xy: (a - b) * v1x * v1y,
                yy: a * v1y * v1y + b * v1x * v1x,
            });
            l1.push(a);
            l2.push(b);
        }
    }
    Ok(SteeringStats {
        covariance,
        l1: Image::new(h, w, l1)?,
        l2: Image::new(h, w, l2)?,
    })
}

/// Maps `values` affinely onto `[0, 1]`; a constant map yields `None`.
fn normalize(values: &Image) -> Option<Image> {
    let (lo, hi) = values.min_max();
    let span = hi - lo;
    (span > 0.0).then(|| values.map(|v| (v - lo) / span))
}

/// `exp` of the normalized eigenvalue gap; `1` everywhere on a degenerate map.
pub fn target_prior(l1: &Image, l2: &Image) -> Result<Image> {
    let gap = l1.zip_with(l2, |a, b| a - b)?;
    Ok(match normalize(&gap) {
        Some(n) => n.map(libm::exp),
        None => gap.map(|_| 1.0),
    })
}

/// Normalized pointwise maximum eigenvalue; `0` everywhere on a degenerate map.
pub fn background_prior(l1: &Image, l2: &Image) -> Result<Image> {
    let larger = l1.zip_with(l2, f64::max)?;
    Ok(normalize(&larger).unwrap_or_else(|| larger.map(|_| 0.0)))
}

pub fn combined_prior(target: &Image, background: &Image) -> Result<Image> {
    target.zip_with(background, |a, b| a * b)
}

/// Every intermediate map of the local structure prior.
#[derive(Debug, Clone)]
pub struct PriorMaps {
    pub l1: Image,
    pub l2: Image,
    pub target: Image,
    pub background: Image,
    pub combined: Image,
}

impl PriorMaps {
    pub fn compute(img: &Image, cfg: &SteeringConfig) -> Result<Self> {
        let (gx, gy) = gradients(img);
        let stats = steering_covariance(&gx, &gy, cfg)?;
        let target = target_prior(&stats.l1, &stats.l2)?;
        let background = background_prior(&stats.l1, &stats.l2)?;
        let combined = combined_prior(&target, &background)?;
        Ok(Self {
            l1: stats.l1,
            l2: stats.l2,
            target,
            background,
            combined,
        })
    }
}

/// Patch-tensor form of the reciprocal prior, `1 / max(W_p, floor)`.
pub fn inverse_prior_tensor(prior: &Image, pm: &PatchModel) -> Result<Tensor> {
    Ok(pm.image_to_tensor(prior)?.map(|w| 1.0 / w.max(PRIOR_FLOOR)))
}

/// Reweighting term `1 / (|T| + ε)`.
pub fn sparse_reweight(target: &Tensor, eps: f64) -> Result<Tensor> {
    if !(eps > 0.0) {
        return Err(param("epsilon", "must be positive"));
    }
    Ok(target.map(|t| 1.0 / (t.abs() + eps)))
}

/// Full sparse weight: reciprocal prior times the reweighting term.
pub fn weight_tensor(prior: &Image, pm: &PatchModel, target: &Tensor, eps: f64) -> Result<Tensor> {
    let reweight = sparse_reweight(target, eps)?;
    inverse_prior_tensor(prior, pm)?.hadamard(&reweight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::E;

    #[test]
    fn constant_image_has_no_gradient() {
        let img = Image::filled(8, 9, 42.0).unwrap();
        let (gx, gy) = gradients(&img);
        assert!(gx.pixels().iter().chain(gy.pixels()).all(|&g| g == 0.0));
    }

    #[test]
    fn ramp_gradient() {
        let img = Image::from_fn(6, 8, |_, x| x as f64).unwrap();
        let (gx, gy) = gradients(&img);
        for y in 0..6 {
            for x in 1..7 {
                assert_eq!(gx.get(y, x), 1.0);
            }
        }
        assert!(gy.pixels().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn step_edge_gradient_peaks_on_edge() {
        let img = Image::from_fn(5, 10, |_, x| if x >= 5 { 100.0 } else { 0.0 }).unwrap();
        let (gx, _) = gradients(&img);
        assert_eq!(gx.get(2, 4), 50.0);
        assert_eq!(gx.get(2, 5), 50.0);
        assert_eq!(gx.get(2, 0), 0.0);
        assert_eq!(gx.get(2, 9), 0.0);
    }

    #[test]
    fn flat_region_is_isotropic() {
        let img = Image::filled(7, 7, 3.0).unwrap();
        let cfg = SteeringConfig::default();
        let (gx, gy) = gradients(&img);
        let st = steering_covariance(&gx, &gy, &cfg).unwrap();
        let gamma = libm::sqrt(1e-7 / 25.0);
        for (i, c) in st.covariance.iter().enumerate() {
            assert!((st.l1.pixels()[i] - gamma).abs() < 1e-18);
            assert_eq!(st.l1.pixels()[i], st.l2.pixels()[i]);
            assert!((c.xx - gamma).abs() < 1e-18 && (c.yy - gamma).abs() < 1e-18);
            assert_eq!(c.xy, 0.0);
        }
    }

    #[test]
    fn edge_is_elongated() {
        let img = Image::from_fn(11, 11, |_, x| if x >= 5 { 200.0 } else { 10.0 }).unwrap();
        let (gx, gy) = gradients(&img);
        let st = steering_covariance(&gx, &gy, &SteeringConfig::default()).unwrap();
        let (l1, l2) = (st.l1.get(5, 5), st.l2.get(5, 5));
        assert!(l1 > 1e4 * l2, "{l1} vs {l2}");
    }

    #[test]
    fn eigen_product_is_gamma_squared() {
        let img = Image::from_fn(9, 9, |y, x| ((y * 13 + x * 7) % 11) as f64 * 9.0).unwrap();
        let (gx, gy) = gradients(&img);
        let st = steering_covariance(&gx, &gy, &SteeringConfig::default()).unwrap();
        for (i, c) in st.covariance.iter().enumerate() {
            let (a, b) = (st.l1.pixels()[i], st.l2.pixels()[i]);
            assert!(a >= b && b >= 0.0);
            assert!((c.det() - a * b).abs() <= 1e-9 * a * b);
        }
    }

    #[test]
    fn even_window_rejected() {
        let img = Image::filled(5, 5, 0.0).unwrap();
        let (gx, gy) = gradients(&img);
        let cfg = SteeringConfig {
            window: 4,
            ..Default::default()
        };
        assert!(steering_covariance(&gx, &gy, &cfg).is_err());
    }

    #[test]
    fn degenerate_priors() {
        let l = Image::filled(3, 3, 0.2).unwrap();
        let wt = target_prior(&l, &l).unwrap();
        let wb = background_prior(&l, &l).unwrap();
        assert!(wt.pixels().iter().all(|&v| v == 1.0));
        assert!(wb.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prior_endpoints() {
        let l1 = Image::new(1, 3, alloc::vec![5.0, 2.0, 9.0]).unwrap();
        let l2 = Image::new(1, 3, alloc::vec![1.0, 2.0, 3.0]).unwrap();
        let wt = target_prior(&l1, &l2).unwrap();
        // gaps 4, 0, 6
        assert_eq!(wt.pixels()[1], 1.0);
        assert!((wt.pixels()[2] - E).abs() < 1e-15);
        assert!((wt.pixels()[0] - libm::exp(4.0 / 6.0)).abs() < 1e-15);
        let wb = background_prior(&l1, &l2).unwrap();
        assert_eq!(wb.pixels(), &[3.0 / 7.0, 0.0, 1.0]);
    }

    #[test]
    fn background_tracks_normalized_l1_when_isotropic() {
        let l = Image::new(1, 4, alloc::vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        let wb = background_prior(&l, &l).unwrap();
        assert_eq!(wb.pixels(), &[0.0, 0.5, 0.25, 1.0]);
    }

    #[test]
    fn combined_is_product() {
        let wt = Image::new(1, 3, alloc::vec![E, 1.5, 2.0]).unwrap();
        let wb = Image::new(1, 3, alloc::vec![1.0, 0.0, 0.25]).unwrap();
        let wp = combined_prior(&wt, &wb).unwrap();
        assert_eq!(wp.pixels(), &[E, 0.0, 0.5]);
    }

    #[test]
    fn weight_tensor_substitutions() {
        let pm = PatchModel::plan(4, 4, 2, 2, 2).unwrap();
        let zero = Tensor::zeros(pm.tensor_shape()).unwrap();
        let ones = Image::filled(4, 4, 1.0).unwrap();
        let w = weight_tensor(&ones, &pm, &zero, 0.01).unwrap();
        assert!(w.data().iter().all(|&v| (v - 100.0).abs() < 1e-12));

        let e_map = Image::filled(4, 4, E).unwrap();
        let w = weight_tensor(&e_map, &pm, &zero, 0.01).unwrap();
        assert!(w
            .data()
            .iter()
            .all(|&v| (v - 1.0 / (E * 0.01)).abs() < 1e-9));

        let mut t = zero.clone();
        t.data_mut()[0] = 50.0;
        let w = weight_tensor(&ones, &pm, &t, 0.01).unwrap();
        assert!(w.data()[0] < w.data()[1]);
        assert!(w.data().iter().all(|&v| v > 0.0));

        assert!(weight_tensor(&ones, &pm, &zero, 0.0).is_err());
    }

    #[test]
    fn zero_prior_is_floored() {
        let pm = PatchModel::plan(2, 2, 2, 2, 1).unwrap();
        let t = inverse_prior_tensor(&Image::filled(2, 2, 0.0).unwrap(), &pm).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0 / PRIOR_FLOOR));
    }

    #[test]
    fn kernel_is_circular_on_isotropic_covariance() {
        let c = Covariance {
            xx: 2.0,
            xy: 0.0,
            yy: 2.0,
        };
        assert!((c.kernel(1.0, 0.0) - c.kernel(0.0, 1.0)).abs() < 1e-15);
        assert!((c.kernel(0.0, 0.0) - 2.0).abs() < 1e-15);
    }
}
