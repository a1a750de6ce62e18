//! Thin singular value decomposition backed by faer.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// `m = u * diag(s) * vᵀ`, singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows × r
    pub u: Matrix,
    pub s: Vec<f64>,
    /// cols × r
    pub v: Matrix,
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if m.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let dec = m
        .as_faer()
        .thin_svd()
        .map_err(|_| Error::SvdNoConvergence)?;
    let (u, v) = (dec.U(), dec.V());
    let s = dec.S().column_vector();

    let r = s.nrows();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let u = Matrix::from_fn(m.rows(), r, |i, k| u[(i, order[k])])?;
    let v = Matrix::from_fn(m.cols(), r, |j, k| v[(j, order[k])])?;
    let s = order.iter().map(|&k| s[k].max(0.0)).collect();
    Ok(Svd { u, s, v })
}

/// Singular values only, in descending order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let mut s = m
        .as_faer()
        .singular_values()
        .map_err(|_| Error::SvdNoConvergence)?;
    s.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(s)
}

impl Svd {
    /// `u * diag(values) * vᵀ` for an arbitrary replacement spectrum.
    pub fn reconstruct_with(&self, values: &[f64]) -> Matrix {
        let rows = self.u.rows();
        let cols = self.v.rows();
        let mut out = alloc::vec![0.0; rows * cols];
        for (k, &sk) in values.iter().enumerate() {
            if sk == 0.0 {
                continue;
            }
            let u_col = &self.u.data()[k * rows..(k + 1) * rows];
            let v_col = &self.v.data()[k * cols..(k + 1) * cols];
            for (j, &vj) in v_col.iter().enumerate() {
                let w = sk * vj;
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[j * rows..(j + 1) * rows];
                for (d, &ui) in dst.iter_mut().zip(u_col) {
                    *d += w * ui;
                }
            }
        }
        Matrix::new(rows, cols, out).expect("dimensions are consistent")
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.s)
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.s.iter().sum()
    }
}
