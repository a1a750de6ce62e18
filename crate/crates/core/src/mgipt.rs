//! Multi-granularity patch tensor: sliding-window patches whose spatial
//! axes are split into their prime factors.
//!
//! For a window of `m × n` pixels the tensor shape is
//! `(m_1, …, m_i, n_1, …, n_j, cols, rows)` where `m_*`/`n_*` are the
//! ascending prime factors of `m`/`n`. Because storage is colexicographic
//! and the first factor is the fastest mixed-radix digit, pixel `(u, v)` of
//! window `(a, b)` lives at linear offset `u + m·(v + n·(a + cols·b))`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::tensor::Tensor;

/// Ascending prime factorization of `k ≥ 2`.
pub fn prime_factorize(k: usize) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Factorize(k));
    }
    let mut factors = Vec::new();
    let mut rest = k;
    let mut p = 2;
    while p * p <= rest {
        while rest.is_multiple_of(p) {
            factors.push(p);
            rest /= p;
        }
        p += 1;
    }
    if rest > 1 {
        factors.push(rest);
    }
    Ok(factors)
}

/// Window offsets `0, step, 2·step, …` with a final offset clamped to
/// `extent - patch` when the stride would otherwise leave pixels uncovered.
fn window_positions(extent: usize, patch: usize, step: usize) -> Vec<usize> {
    let last = extent - patch;
    let mut out: Vec<usize> = (0..=last).step_by(step).collect();
    if *out.last().expect("offset 0 always present") != last {
        out.push(last);
    }
    out
}

/// Sliding-window geometry plus the prime-factor granularity shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchModel {
    height: usize,
    width: usize,
    patch_h: usize,
    patch_w: usize,
    step: usize,
    row_positions: Vec<usize>,
    col_positions: Vec<usize>,
    m_factors: Vec<usize>,
    n_factors: Vec<usize>,
    tensor_shape: Vec<usize>,
}

impl PatchModel {
    /// Plans windows of `patch_h × patch_w` over a `height × width` image.
    pub fn plan(
        height: usize,
        width: usize,
        patch_h: usize,
        patch_w: usize,
        step: usize,
    ) -> Result<Self> {
        if step == 0 {
            return Err(crate::error::param("step", "must be at least 1"));
        }
        if patch_h == 0 || patch_w == 0 || patch_h > height || patch_w > width {
            return Err(Error::PatchTooLarge {
                patch_h,
                patch_w,
                height,
                width,
            });
        }
        // A side of 1 has no prime factors; it contributes a unit mode.
        let factors = |k: usize| {
            if k == 1 {
                Ok(vec![1])
            } else {
                prime_factorize(k)
            }
        };
        let m_factors = factors(patch_h)?;
        let n_factors = factors(patch_w)?;
        let row_positions = window_positions(height, patch_h, step);
        let col_positions = window_positions(width, patch_w, step);
        let gaps = |pos: &[usize], patch: usize| pos.windows(2).any(|w| w[1] - w[0] > patch);
        if gaps(&row_positions, patch_h) || gaps(&col_positions, patch_w) {
            return Err(crate::error::param(
                "step",
                "windows would leave pixels uncovered",
            ));
        }
        let mut tensor_shape = m_factors.clone();
        tensor_shape.extend_from_slice(&n_factors);
        tensor_shape.push(col_positions.len());
        tensor_shape.push(row_positions.len());
        Ok(Self {
            height,
            width,
            patch_h,
            patch_w,
            step,
            row_positions,
            col_positions,
            m_factors,
            n_factors,
            tensor_shape,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn patch_h(&self) -> usize {
        self.patch_h
    }
    pub fn patch_w(&self) -> usize {
        self.patch_w
    }
    pub fn step(&self) -> usize {
        self.step
    }
    pub fn row_positions(&self) -> &[usize] {
        &self.row_positions
    }
    pub fn col_positions(&self) -> &[usize] {
        &self.col_positions
    }
    pub fn m_factors(&self) -> &[usize] {
        &self.m_factors
    }
    pub fn n_factors(&self) -> &[usize] {
        &self.n_factors
    }
    pub fn tensor_shape(&self) -> &[usize] {
        &self.tensor_shape
    }
    pub fn cols(&self) -> usize {
        self.col_positions.len()
    }
    pub fn rows(&self) -> usize {
        self.row_positions.len()
    }
    /// Number of windows.
    pub fn patch_count(&self) -> usize {
        self.cols() * self.rows()
    }

    /// Default sparsity weight `scale / sqrt(ps_1 ⋯ ps_n · z)`, where the
    /// product runs over every prime factor of both patch sides.
    pub fn lambda(&self, scale: f64) -> f64 {
        let factors: usize = self.m_factors.iter().chain(&self.n_factors).product();
        scale / libm::sqrt((factors * self.patch_count()) as f64)
    }

    fn check_image(&self, img: &Image) -> Result<()> {
        if (img.height(), img.width()) != (self.height, self.width) {
            return Err(Error::ShapeMismatch {
                left: vec![img.height(), img.width()],
                right: vec![self.height, self.width],
            });
        }
        Ok(())
    }

    pub fn image_to_tensor(&self, img: &Image) -> Result<Tensor> {
        self.check_image(img)?;
        let (m, n) = (self.patch_h, self.patch_w);
        let cols = self.cols();
        let mut data = vec![0.0; m * n * self.patch_count()];
        for (b, &y0) in self.row_positions.iter().enumerate() {
            for (a, &x0) in self.col_positions.iter().enumerate() {
                let base = m * n * (a + cols * b);
                for v in 0..n {
                    let dst = &mut data[base + m * v..base + m * (v + 1)];
                    for (u, d) in dst.iter_mut().enumerate() {
                        *d = img.get(y0 + u, x0 + v);
                    }
                }
            }
        }
        Tensor::new(self.tensor_shape.clone(), data)
    }

    /// For each coordinate along one axis, the `(window index, offset)`
    /// pairs of every window covering it.
    fn coverage(extent: usize, patch: usize, positions: &[usize]) -> Vec<Vec<(usize, usize)>> {
        let mut cov = vec![Vec::new(); extent];
        for (w, &p) in positions.iter().enumerate() {
            for off in 0..patch {
                cov[p + off].push((w, off));
            }
        }
        cov
    }

    /// Folds a patch tensor back into an image; overlapping windows are
    /// resolved by the per-pixel median of their values.
    pub fn tensor_to_image(&self, t: &Tensor) -> Result<Image> {
        if t.shape() != self.tensor_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                left: t.shape().to_vec(),
                right: self.tensor_shape.clone(),
            });
        }
        let (m, n) = (self.patch_h, self.patch_w);
        let cols = self.cols();
        let row_cov = Self::coverage(self.height, m, &self.row_positions);
        let col_cov = Self::coverage(self.width, n, &self.col_positions);
        let data = t.data();
        let mut buf = Vec::new();
        let mut pixels = Vec::with_capacity(self.height * self.width);
        for rc in &row_cov {
            for cc in &col_cov {
                buf.clear();
                for &(b, u) in rc {
                    for &(a, v) in cc {
                        buf.push(data[u + m * (v + n * (a + cols * b))]);
                    }
                }
                pixels.push(median(&mut buf));
            }
        }
        Image::new(self.height, self.width, pixels)
    }
}

/// Median of a non-empty buffer; even counts average the two middle values.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    match values.len() {
        0 => f64::NAN,
        1 => values[0],
        len => {
            values.sort_unstable_by(f64::total_cmp);
            if len % 2 == 1 {
                values[len / 2]
            } else {
                0.5 * (values[len / 2 - 1] + values[len / 2])
            }
        }
    }
}
