//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use dwmgipt_core::metrics::{scr, DEFAULT_MARGIN, DEFAULT_PHI};
use dwmgipt_core::synth::{generate, BackgroundKind, Scene, SceneSpec, TargetSpec};
use dwmgipt_core::{Admm, Matrix, Tensor};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let n = Normal::new(0.0, 1.0).unwrap();
    Matrix::from_fn(rows, cols, |_, _| n.sample(rng)).unwrap()
}

/// Nuclear norm through nalgebra's singular values.
pub fn nuclear(m: &Matrix) -> f64 {
    nalgebra::DMatrix::from_column_slice(m.rows(), m.cols(), m.data())
        .singular_values()
        .sum()
}

pub fn svt_objective(x: &Matrix, a: &Matrix, tau: f64) -> f64 {
    let fit: f64 = x
        .data()
        .iter()
        .zip(a.data())
        .map(|(x, a)| (x - a) * (x - a))
        .sum();
    tau * nuclear(x) + 0.5 * fit
}

/// Smallest `objective(perturbed) − objective(x)` over random perturbations
/// of `x` at several scales.
pub fn svt_perturbation_margin(
    rng: &mut ChaCha8Rng,
    x: &Matrix,
    a: &Matrix,
    tau: f64,
    trials: usize,
) -> f64 {
    let scales = [1e-3, 1e-2, 1e-1, 1.0];
    let best = svt_objective(x, a, tau);
    let mut margin = f64::INFINITY;
    for k in 0..trials {
        let e = random_matrix(rng, x.rows(), x.cols());
        let s = scales[k % scales.len()];
        let mut p = x.clone();
        p.data_mut()
            .iter_mut()
            .zip(e.data())
            .for_each(|(p, e)| *p += s * e);
        margin = margin.min(svt_objective(&p, a, tau) - best);
    }
    margin
}

/// Minimizes `t|y| + (y - x)^2 / 2` by repeatedly refined grid search.
///
/// Candidates are compared through the factored objective difference, which
/// stays accurate where the objective itself is flat to machine precision.
pub fn grid_shrink(x: f64, t: f64) -> f64 {
    let worse = |a: f64, b: f64| t * (a.abs() - b.abs()) + 0.5 * (a - b) * (a + b - 2.0 * x) > 0.0;
    let (mut lo, mut hi) = (-x.abs() - 1.0, x.abs() + 1.0);
    let mut best = 0.0;
    for _ in 0..12 {
        let n = 400;
        let step = (hi - lo) / n as f64;
        for i in 0..=n {
            let y = lo + step * i as f64;
            if worse(best, y) {
                best = y;
            }
        }
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
    best
}

pub fn qp_objective(mu: &[f64], alpha: &[f64], psi: f64) -> f64 {
    let lin: f64 = mu.iter().zip(alpha).map(|(m, a)| m * a).sum();
    let quad: f64 = alpha.iter().map(|a| a * a).sum();
    -lin + psi * quad
}

/// Best KKT point over every possible active set.
pub fn brute_force_weights(mu: &[f64], psi: f64) -> Vec<f64> {
    let n = mu.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sum: f64 = active.iter().map(|&i| mu[i]).sum();
        let eta = (sum - 2.0 * psi) / active.len() as f64;
        let mut alpha = vec![0.0; n];
        let mut feasible = true;
        for &i in &active {
            alpha[i] = (mu[i] - eta) / (2.0 * psi);
            feasible &= alpha[i] >= -1e-15;
        }
        if !feasible {
            continue;
        }
        let obj = qp_objective(mu, &alpha, psi);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, alpha));
        }
    }
    best.unwrap().1
}

/// Runs one step and returns the largest relative residual of the two
/// coupled normal equations for (B, T), rebuilt from the state before it.
pub fn normal_equation_residual(admm: &mut Admm) -> f64 {
    let shape = admm.observed().shape().to_vec();
    let beta = admm.beta().to_vec();
    let (z1, z2) = admm.penalties();
    let c_prev: Vec<_> = admm.mode_multipliers().to_vec();
    let j_prev = admm.sparse_multiplier().clone();
    let m_prev = admm.residual_multiplier().clone();
    admm.step().unwrap();

    let d = admm.observed();
    let (b, t) = (admm.background(), admm.target());
    let beta_sum: f64 = beta.iter().sum();
    let mut rhs1 = d.scale(z2).add(&m_prev).unwrap();
    for (i, &bi) in beta.iter().enumerate() {
        if bi > 0.0 {
            let x = Tensor::fold(admm.auxiliary()[i].clone(), &shape, i + 1).unwrap();
            let c = Tensor::fold(c_prev[i].clone(), &shape, i + 1).unwrap();
            rhs1 = rhs1.add(&x.scale(bi)).unwrap().add(&c).unwrap();
        }
    }
    let lhs1 = b.scale(beta_sum + z2).add(&t.scale(z2)).unwrap();
    let rhs2 = admm
        .sparse()
        .scale(z1)
        .add(&j_prev)
        .unwrap()
        .add(&d.scale(z2))
        .unwrap()
        .add(&m_prev)
        .unwrap();
    let lhs2 = b.scale(z2).add(&t.scale(z1 + z2)).unwrap();
    let r1 = lhs1.sub(&rhs1).unwrap().frobenius_norm() / rhs1.frobenius_norm();
    let r2 = lhs2.sub(&rhs2).unwrap().frobenius_norm() / rhs2.frobenius_norm();
    r1.max(r2)
}

/// Tensor of TT rank `rank` with uniform random cores, scaled to peak 1.
pub fn low_tt_rank_tensor(rng: &mut ChaCha8Rng, shape: &[usize], rank: usize) -> Tensor {
    let u = Uniform::new(0.0, 1.0).unwrap();
    let n = shape.len();
    let ranks: Vec<usize> = (0..=n)
        .map(|k| if k == 0 || k == n { 1 } else { rank })
        .collect();
    // Core k holds entries (a, i, b) at a + r_k (i + I_k b).
    let cores: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..ranks[k] * shape[k] * ranks[k + 1])
                .map(|_| u.sample(rng))
                .collect()
        })
        .collect();
    let t = Tensor::from_fn(shape, |mut lin| {
        let mut v = vec![1.0];
        for k in 0..n {
            let i = lin % shape[k];
            lin /= shape[k];
            let mut next = vec![0.0; ranks[k + 1]];
            for (b, out) in next.iter_mut().enumerate() {
                for (a, va) in v.iter().enumerate() {
                    *out += va * cores[k][a + ranks[k] * (i + shape[k] * b)];
                }
            }
            v = next;
        }
        v[0]
    })
    .unwrap();
    let peak = t.max_abs();
    t.scale(1.0 / peak)
}

pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Two-target 256×256 scene for `kind` and `seed`. Targets stay 75 px clear
/// of a step edge and each amplitude is raised from 120 in steps of 20 until
/// the noiseless target has SCR ≥ 3; `noise` is added afterwards.
pub fn benchmark_scene(kind: BackgroundKind, seed: u64, noise: f64) -> Scene {
    let s = seed as f64;
    let base = SceneSpec {
        height: 256,
        width: 256,
        background: kind,
        level: 60.0,
        targets: Vec::new(),
        noise_sigma: 0.0,
        seed,
    };
    let edge = generate(&base).unwrap().edge_column;
    let (x1, x2) = match edge {
        Some(e) => ((e as f64 - 75.0).max(10.0), (e as f64 + 75.0).min(245.0)),
        None => (40.0 + 6.0 * s, 210.0 - 6.0 * s),
    };
    let (y1, y2) = (60.0 + 30.0 * s, 200.0 - 25.0 * s);
    let mut amps = [120.0f64; 2];
    loop {
        let spec = SceneSpec {
            targets: vec![
                TargetSpec {
                    cx: x1,
                    cy: y1,
                    amplitude: amps[0],
                    sigma: 1.5,
                },
                TargetSpec {
                    cx: x2,
                    cy: y2,
                    amplitude: amps[1],
                    sigma: 1.5,
                },
            ],
            ..base.clone()
        };
        let scene = generate(&spec).unwrap();
        let mut raised = false;
        for (amp, t) in amps.iter_mut().zip(&scene.truth) {
            if scr(&scene.image, t, DEFAULT_MARGIN, DEFAULT_PHI).unwrap() < 3.0 {
                *amp += 20.0;
                raised = true;
            }
        }
        if !raised {
            return generate(&SceneSpec {
                noise_sigma: noise,
                ..spec
            })
            .unwrap();
        }
        assert!(
            amps.iter().all(|&a| a <= 255.0),
            "no amplitude reaches SCR 3"
        );
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
