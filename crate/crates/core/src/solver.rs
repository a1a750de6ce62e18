//! Auto-weighted tensor-train nuclear norm separation by ADMM.
//!
//! Splits a patch tensor `D` into a background `B` that is low-rank in every
//! TT unfolding and a sparse target `T`:
//!
//! ```text
//! min Σ α_i ‖X_i‖_* + λ ‖W ⊙ Y‖_1   s.t.  X_i = B_[i],  Y = T,  D = B + T
//! ```
//!
//! The mode weights `α` are re-estimated every iteration from the nuclear
//! norms of the current unfoldings, and `W` combines the steering-kernel
//! prior with a reweighting term built from the previous target estimate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::image::Image;
use crate::mgipt::PatchModel;
use crate::prior::{inverse_prior_tensor, sparse_reweight};
use crate::svd::{singular_values, svd};
use crate::tensor::{Matrix, Tensor};

/// How the smoothing factor ψ of the mode-weight QP is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiMode {
    /// ψ = mean of the current nuclear norms.
    MeanNorm,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// `L` in `λ = L / sqrt(ps_1 ⋯ ps_n · z)`.
    pub lambda_scale: f64,
    /// `f` in `β_i = f · α_i`.
    pub penalty_factor: f64,
    pub z1: f64,
    pub z2: f64,
    /// Geometric growth of `z1` and `z2`.
    pub rho: f64,
    /// Stop once `‖D − B − T‖²_F / ‖D‖²_F ≤ tolerance`.
    pub tolerance: f64,
    /// Also require `‖T^{k+1} − T^k‖²_F / ‖T^{k+1}‖²_F ≤ tolerance`.
    pub check_target_change: bool,
    pub max_iter: usize,
    pub psi: PsiMode,
    /// ε of the reweighting term `1 / (|T| + ε)`.
    pub epsilon: f64,
    /// Initial value of every entry of the multipliers `J` and `C_i`.
    pub multiplier_init: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_scale: 2.3,
            penalty_factor: 1.1,
            z1: 0.15,
            z2: 0.02,
            rho: 1.2,
            tolerance: 1e-3,
            check_target_change: true,
            max_iter: 200,
            psi: PsiMode::MeanNorm,
            epsilon: 0.01,
            multiplier_init: 0.0,
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !positive(self.lambda_scale) {
            return Err(param("lambda_scale", "must be positive"));
        }
        if !positive(self.penalty_factor) {
            return Err(param("f", "must be positive"));
        }
        if !positive(self.z1) || !positive(self.z2) {
            return Err(param("z1/z2", "must be positive"));
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return Err(param("rho", "must exceed 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(param("zeta", "must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(param("max_iter", "must be at least 1"));
        }
        if let PsiMode::Fixed(psi) = self.psi {
            if !positive(psi) {
                return Err(param("psi", "must be positive"));
            }
        }
        if !positive(self.epsilon) {
            return Err(param("epsilon", "must be positive"));
        }
        if !self.multiplier_init.is_finite() {
            return Err(param("multiplier_init", "must be finite"));
        }
        Ok(())
    }
}

/// Singular value thresholding: the proximal operator of `tau · ‖·‖_*`.
pub fn svt(a: &Matrix, tau: f64) -> Result<Matrix> {
    if !(tau >= 0.0) {
        return Err(param("tau", "must be non-negative"));
    }
    let dec = svd(a)?;
    let shrunk: Vec<f64> = dec.s.iter().map(|&s| (s - tau).max(0.0)).collect();
    Ok(dec.reconstruct_with(&shrunk))
}

/// Elementwise soft shrinkage `sign(x) · max(|x| − λ, 0)` with a per-entry λ.
pub fn soft_shrink(a: &Tensor, thresh: &Tensor) -> Result<Tensor> {
    if thresh.data().iter().any(|&t| !(t >= 0.0)) {
        return Err(param("threshold", "must be non-negative"));
    }
    a.zip_with(thresh, |x, t| {
        let mag = x.abs() - t;
        if mag > 0.0 {
            mag.copysign(x)
        } else {
            0.0
        }
    })
}

/// Solves `min −μᵀα + ψ‖α‖²` over the probability simplex.
///
/// The optimum is `α_i = max(μ_i − η, 0) / (2ψ)` with `η` fixed by the
/// active set, found by scanning the descending order of `μ`.
pub fn auto_weights(mu: &[f64], psi: f64) -> Result<Vec<f64>> {
    if !positive(psi) {
        return Err(param("psi", "must be positive"));
    }
    if mu.is_empty() {
        return Err(param("mu", "must not be empty"));
    }
    if mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite("nuclear norms"));
    }
    let mut sorted = mu.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut eta = sorted[0] - 2.0 * psi;
    let mut prefix = 0.0;
    for (j, &m) in sorted.iter().enumerate() {
        prefix += m;
        let candidate = (prefix - 2.0 * psi) / (j + 1) as f64;
        if m - candidate > 0.0 {
            eta = candidate;
        } else {
            break;
        }
    }
    let mut alpha: Vec<f64> = mu
        .iter()
        .map(|&m| (m - eta).max(0.0) / (2.0 * psi))
        .collect();
    // Remove the rounding drift so the weights sum to one.
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    Ok(alpha)
}

fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Diagnostics of one ADMM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// `‖D − B − T‖²_F / ‖D‖²_F` after the iteration.
    pub residual: f64,
    /// `‖T^{k+1} − T^k‖²_F / ‖T^{k+1}‖²_F`.
    pub target_change: f64,
    /// Mode weights after the iteration.
    pub alpha: Vec<f64>,
    pub target_l1: f64,
}

/// Result of [`Admm::run`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub background: Tensor,
    pub target: Tensor,
    /// The sparse split variable `Y`; equals `target` at convergence.
    pub sparse: Tensor,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn residual_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.residual).collect()
    }

    pub fn alpha_trace(&self) -> Vec<Vec<f64>> {
        self.trace.iter().map(|r| r.alpha.clone()).collect()
    }
}

const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_PATIENCE: usize = 20;

/// ADMM state. Construct with [`Admm::new`], then either [`Admm::run`] or
/// drive [`Admm::step`] by hand.
#[derive(Debug, Clone)]
pub struct Admm {
    cfg: SolverConfig,
    lambda: f64,
    d: Tensor,
    d_norm_sq: f64,
    inv_prior: Tensor,
    background: Tensor,
    target: Tensor,
    sparse: Tensor,
    x: Vec<Matrix>,
    c: Vec<Matrix>,
    j: Tensor,
    m: Tensor,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    z1: f64,
    z2: f64,
    weight: Tensor,
    trace: Vec<IterationRecord>,
    best_residual: f64,
    growth_streak: usize,
    converged: bool,
}

impl Admm {
    /// `inv_prior` is the reciprocal prior tensor (all ones for no prior);
    /// `lambda` is the sparsity weight.
    pub fn new(d: Tensor, inv_prior: Tensor, lambda: f64, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if !positive(lambda) {
            return Err(param("lambda", "must be positive"));
        }
        if d.order() < 2 {
            return Err(param("D", "needs at least two modes"));
        }
        if inv_prior.shape() != d.shape() {
            return Err(Error::ShapeMismatch {
                left: d.shape().to_vec(),
                right: inv_prior.shape().to_vec(),
            });
        }
        if !d.is_finite() || !inv_prior.is_finite() {
            return Err(Error::NonFinite("solver input"));
        }
        let d_norm_sq = d.data().iter().map(|x| x * x).sum::<f64>();
        if d_norm_sq == 0.0 {
            return Err(param("D", "must not be identically zero"));
        }
        let modes = d.order() - 1;
        let shape = d.shape().to_vec();
        let mut x = Vec::with_capacity(modes);
        let mut c = Vec::with_capacity(modes);
        for i in 1..=modes {
            x.push(d.unfold(i)?);
            let (rows, cols) = Tensor::unfolding_dims(&shape, i)?;
            c.push(Matrix::filled(rows, cols, cfg.multiplier_init)?);
        }
        let alpha = vec![1.0 / modes as f64; modes];
        let beta = alpha.iter().map(|a| cfg.penalty_factor * a).collect();
        let target = Tensor::zeros(&shape)?;
        let weight = inv_prior.hadamard(&sparse_reweight(&target, cfg.epsilon)?)?;
        Ok(Self {
            cfg: cfg.clone(),
            lambda,
            background: d.clone(),
            sparse: target.clone(),
            j: Tensor::filled(&shape, cfg.multiplier_init)?,
            m: Tensor::zeros(&shape)?,
            target,
            d,
            d_norm_sq,
            inv_prior,
            x,
            c,
            alpha,
            beta,
            z1: cfg.z1,
            z2: cfg.z2,
            weight,
            trace: Vec::new(),
            best_residual: f64::INFINITY,
            growth_streak: 0,
            converged: false,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn observed(&self) -> &Tensor {
        &self.d
    }
    pub fn background(&self) -> &Tensor {
        &self.background
    }
    pub fn target(&self) -> &Tensor {
        &self.target
    }
    pub fn sparse(&self) -> &Tensor {
        &self.sparse
    }
    /// Auxiliary low-rank matrices `X_i` (index 0 is mode 1).
    pub fn auxiliary(&self) -> &[Matrix] {
        &self.x
    }
    /// Multipliers `C_i` (index 0 is mode 1).
    pub fn mode_multipliers(&self) -> &[Matrix] {
        &self.c
    }
    /// Multiplier of `Y = T`.
    pub fn sparse_multiplier(&self) -> &Tensor {
        &self.j
    }
    /// Multiplier of `D = B + T`.
    pub fn residual_multiplier(&self) -> &Tensor {
        &self.m
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
    pub fn penalties(&self) -> (f64, f64) {
        (self.z1, self.z2)
    }
    pub fn weight(&self) -> &Tensor {
        &self.weight
    }
    pub fn trace(&self) -> &[IterationRecord] {
        &self.trace
    }
    pub fn converged(&self) -> bool {
        self.converged
    }

    fn residual_ratio(&self) -> f64 {
        let r: f64 = self
            .d
            .data()
            .iter()
            .zip(self.background.data())
            .zip(self.target.data())
            .map(|((d, b), t)| {
                let e = d - b - t;
                e * e
            })
            .sum();
        r / self.d_norm_sq
    }

    /// One full iteration. Modes whose weight has dropped to zero carry no
    /// penalty and are skipped until they become active again.
    pub fn step(&mut self) -> Result<&IterationRecord> {
        let iteration = self.trace.len() + 1;
        let shape = self.d.shape().to_vec();
        let modes = self.x.len();
        let (z1, z2) = (self.z1, self.z2);

        // Low-rank auxiliaries.
        for i in 0..modes {
            let beta = self.beta[i];
            let mut a = self.background.unfold(i + 1)?;
            if beta > 0.0 {
                for (v, c) in a.data_mut().iter_mut().zip(self.c[i].data()) {
                    *v -= c / beta;
                }
                self.x[i] = svt(&a, self.alpha[i] / beta)?;
            } else {
                self.x[i] = a;
            }
        }

        // Sparse auxiliary.
        let shifted = self.target.zip_with(&self.j, |t, j| t - j / z1)?;
        let thresh = self.weight.scale(self.lambda / z1);
        self.sparse = soft_shrink(&shifted, &thresh)?;

        // Coupled least squares for (B, T).
        let mut data_term = self.d.scale(z2);
        data_term.axpy(1.0, &self.m)?;
        let mut g = data_term.clone();
        let mut beta_sum = 0.0;
        for i in 0..modes {
            let beta = self.beta[i];
            if beta > 0.0 {
                beta_sum += beta;
                let x = Tensor::fold(self.x[i].clone(), &shape, i + 1)?;
                g.axpy(beta, &x)?;
                let c = Tensor::fold(self.c[i].clone(), &shape, i + 1)?;
                g.axpy(1.0, &c)?;
            }
        }
        let mut h = data_term;
        h.axpy(z1, &self.sparse)?;
        h.axpy(1.0, &self.j)?;
        let a = beta_sum + z2;
        let cc = z1 + z2;
        let det = a * cc - z2 * z2;
        self.background = g.zip_with(&h, |g, h| (cc * g - z2 * h) / det)?;
        let target = g.zip_with(&h, |g, h| (a * h - z2 * g) / det)?;
        let (mut moved, mut size) = (0.0, 0.0);
        for (new, old) in target.data().iter().zip(self.target.data()) {
            moved += (new - old) * (new - old);
            size += new * new;
        }
        let target_change = if size > 0.0 { moved / size } else { 0.0 };
        self.target = target;

        // Multipliers.
        for i in 0..modes {
            let beta = self.beta[i];
            if beta > 0.0 {
                let b = self.background.unfold(i + 1)?;
                for ((c, x), b) in self.c[i]
                    .data_mut()
                    .iter_mut()
                    .zip(self.x[i].data())
                    .zip(b.data())
                {
                    *c += beta * (x - b);
                }
            }
        }
        for ((j, y), t) in self
            .j
            .data_mut()
            .iter_mut()
            .zip(self.sparse.data())
            .zip(self.target.data())
        {
            *j += z1 * (y - t);
        }
        for (((m, d), b), t) in self
            .m
            .data_mut()
            .iter_mut()
            .zip(self.d.data())
            .zip(self.background.data())
            .zip(self.target.data())
        {
            *m += z2 * (d - b - t);
        }
        self.z1 *= self.cfg.rho;
        self.z2 *= self.cfg.rho;

        if !self.background.is_finite() || !self.target.is_finite() {
            return Err(Error::Diverged {
                iteration,
                reason: "non-finite iterate",
            });
        }

        // Mode weights.
        let mut mu = Vec::with_capacity(modes);
        for i in 0..modes {
            mu.push(nuclear_norm(&self.background.unfold(i + 1)?)?);
        }
        let psi = match self.cfg.psi {
            PsiMode::MeanNorm => mu.iter().sum::<f64>() / modes as f64,
            PsiMode::Fixed(psi) => psi,
        };
        if psi > 0.0 {
            self.alpha = auto_weights(&mu, psi)?;
        }
        self.beta = self
            .alpha
            .iter()
            .map(|a| self.cfg.penalty_factor * a)
            .collect();

        // Sparse weight.
        self.weight = self
            .inv_prior
            .hadamard(&sparse_reweight(&self.target, self.cfg.epsilon)?)?;

        let residual = self.residual_ratio();
        if !residual.is_finite() {
            return Err(Error::Diverged {
                iteration,
                reason: "non-finite residual",
            });
        }
        if residual > DIVERGENCE_FACTOR * self.best_residual {
            self.growth_streak += 1;
            if self.growth_streak >= DIVERGENCE_PATIENCE {
                return Err(Error::Diverged {
                    iteration,
                    reason: "residual kept growing",
                });
            }
        } else {
            self.growth_streak = 0;
        }
        self.best_residual = self.best_residual.min(residual);
        // Starting from B = D the residual is tiny long before T has formed,
        // so the target must also have stopped moving.
        let settled = !self.cfg.check_target_change || target_change <= self.cfg.tolerance;
        self.converged = settled && residual <= self.cfg.tolerance;
        self.trace.push(IterationRecord {
            iteration,
            residual,
            target_change,
            alpha: self.alpha.clone(),
            target_l1: self.target.l1_norm(),
        });
        Ok(self.trace.last().expect("just pushed"))
    }

    /// Iterates until the residual criterion holds or `max_iter` is reached.
    pub fn run(mut self) -> Result<Solution> {
        while !self.converged && self.trace.len() < self.cfg.max_iter {
            self.step()?;
        }
        Ok(Solution {
            background: self.background,
            target: self.target,
            sparse: self.sparse,
            trace: self.trace,
            converged: self.converged,
        })
    }
}

/// Separates the patch tensor `d` of an image with prior map `prior`.
pub fn admm_solve(
    d: &Tensor,
    prior: &Image,
    pm: &PatchModel,
    cfg: &SolverConfig,
) -> Result<Solution> {
    if d.shape() != pm.tensor_shape() {
        return Err(Error::ShapeMismatch {
            left: d.shape().to_vec(),
            right: pm.tensor_shape().to_vec(),
        });
    }
    let inv_prior = inverse_prior_tensor(prior, pm)?;
    Admm::new(d.clone(), inv_prior, pm.lambda(cfg.lambda_scale), cfg)?.run()
}
