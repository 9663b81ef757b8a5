//! Training losses on functional maps and their matrix gradients.

use faer::Mat;

use crate::error::{Error, Result};
use crate::fmap::FunctionalMap;

/// Squared resolvent mask `Δ²` of shape `k2 × k1`:
/// `Δ²_ij = |g(λ²_i) − g(λ¹_j)|²` with `g(λ) = (√λ/(1+λ), 1/(1+λ))`.
pub fn resolvent_mask(lambda1: &[f64], lambda2: &[f64]) -> Mat<f64> {
    let g = |l: f64| {
        let l = l.max(0.0);
        (l.sqrt() / (1.0 + l), 1.0 / (1.0 + l))
    };
    Mat::from_fn(lambda2.len(), lambda1.len(), |i, j| {
        let (a, b) = g(lambda2[i]);
        let (c, d) = g(lambda1[j]);
        (a - c).powi(2) + (b - d).powi(2)
    })
}

/// `‖CᵀC − I‖²_F`
pub fn orthogonality_loss(c: &FunctionalMap) -> f64 {
    orthogonality_value_grad(&c.matrix().to_owned()).0
}

pub(crate) fn orthogonality_value_grad(c: &Mat<f64>) -> (f64, Mat<f64>) {
    let k = c.ncols();
    let r = c.transpose() * c - Mat::<f64>::identity(k, k);
    let grad = c * &r * 4.0;
    (r.squared_norm_l2(), grad)
}

/// `‖C_init − [C_refined]_{1:k₂, 1:k₁}‖²_F` where `k₂ × k₁` is the size of
/// `C_init`.
pub fn consistency_loss(c_init: &FunctionalMap, c_refined: &FunctionalMap) -> Result<f64> {
    let (k2, k1) = (c_init.k2(), c_init.k1());
    if c_refined.k2() < k2 || c_refined.k1() < k1 {
        return Err(Error::dim(format!(
            "refined map {}x{} is smaller than the initial {k2}x{k1}",
            c_refined.k2(),
            c_refined.k1()
        )));
    }
    let d = c_init.matrix() - c_refined.matrix().submatrix(0, 0, k2, k1);
    Ok(d.squared_norm_l2())
}

/// `Σ_ij Δ²_ij C²_ij`
pub fn laplacian_commutativity_loss(c: &FunctionalMap, lambda1: &[f64], lambda2: &[f64]) -> Result<f64> {
    Ok(laplacian_value_grad(&c.matrix().to_owned(), lambda1, lambda2)?.0)
}

pub(crate) fn laplacian_value_grad(c: &Mat<f64>, lambda1: &[f64], lambda2: &[f64]) -> Result<(f64, Mat<f64>)> {
    let (k2, k1) = (c.nrows(), c.ncols());
    if lambda1.len() < k1 || lambda2.len() < k2 {
        return Err(Error::dim(format!(
            "{}/{} eigenvalues cannot cover a {k2}x{k1} map",
            lambda1.len(),
            lambda2.len()
        )));
    }
    if lambda1.iter().chain(lambda2).any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(Error::NonFiniteInput("eigenvalues must be finite and nonnegative".into()));
    }
    let mask = resolvent_mask(&lambda1[..k1], &lambda2[..k2]);
    let mut value = 0.0;
    let grad = Mat::from_fn(k2, k1, |i, j| {
        value += mask[(i, j)] * c[(i, j)] * c[(i, j)];
        2.0 * mask[(i, j)] * c[(i, j)]
    });
    Ok((value, grad))
}
