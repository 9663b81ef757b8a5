//! Reverse-mode differentiation of the soft ZoomOut loop.
//!
//! Only the small functional maps of the forward pass are stored. The soft
//! map of each iteration is rebuilt from the previous functional map when
//! the backward sweep reaches it, so memory stays linear in the vertex
//! counts.

use faer::Mat;

use super::losses::{laplacian_value_grad, orthogonality_value_grad};
use super::{differentiable_zoomout, RefineMode, ZoomOutConfig};
use crate::error::{Error, Result};
use crate::fmap::{conversion_features, FunctionalMap};
use crate::matrix::RowMatrix;
use crate::softmap::ScalableSoftMap;
use crate::spectral::EigenBasis;

/// Weights of the three loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub orth: f64,
    pub consist: f64,
    pub lap: f64,
    /// Treat the refined map as a constant target in the consistency term.
    pub stop_gradient_refined: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            orth: 1.0,
            consist: 1e-4,
            lap: 1e2,
            stop_gradient_refined: false,
        }
    }
}

/// Unweighted loss terms and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub orth: f64,
    pub consist: f64,
    pub lap: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct LossGradients {
    pub df1: RowMatrix,
    pub df2: RowMatrix,
    pub loss: LossBreakdown,
    pub c_init: FunctionalMap,
    pub c_refined: FunctionalMap,
}

/// `n × k` matrix `A Φ_k G` in row-major layout.
fn weighted_lift(basis: &EigenBasis, g: &Mat<f64>) -> Result<RowMatrix> {
    let t = basis.truncate(g.nrows())?;
    let lifted = t.phi() * g;
    let a = basis.areas().values();
    Ok(RowMatrix::from_fn(lifted.nrows(), lifted.ncols(), |i, j| a[i] * lifted[(i, j)]))
}

/// Loss of the initial and refined maps produced by soft ZoomOut from
/// features `f1`, `f2`, and its gradient with respect to both feature
/// matrices.
pub fn loss_gradients(
    f1: &RowMatrix,
    f2: &RowMatrix,
    b1: &EigenBasis,
    b2: &EigenBasis,
    cfg: &ZoomOutConfig,
    weights: &LossWeights,
) -> Result<LossGradients> {
    if cfg.mode != RefineMode::Soft {
        return Err(Error::Config("loss gradients need soft mode".into()));
    }
    let mut fwd_cfg = cfg.clone();
    fwd_cfg.keep_snapshots = true;
    let out = differentiable_zoomout(f1, f2, b1, b2, &fwd_cfg)?;
    let cs: Vec<Mat<f64>> = out.trace.snapshots.iter().map(|c| c.matrix().to_owned()).collect();
    let last = cs.len() - 1;
    let k0 = cs[0].nrows();

    let (orth, g_orth) = orthogonality_value_grad(&cs[0]);
    let (lap, g_lap) = laplacian_value_grad(&cs[0], b1.lambda(), b2.lambda())?;
    let diff = &cs[0] - cs[last].as_ref().submatrix(0, 0, k0, k0);
    let consist = diff.squared_norm_l2();
    let total = weights.orth * orth + weights.consist * consist + weights.lap * lap;
    if !total.is_finite() {
        return Err(Error::NonFiniteInput("loss value".into()));
    }

    let mut gbar: Vec<Mat<f64>> = cs.iter().map(|c| Mat::zeros(c.nrows(), c.ncols())).collect();
    gbar[0] = &g_orth * weights.orth + &g_lap * weights.lap + &diff * (2.0 * weights.consist);
    if !weights.stop_gradient_refined {
        let mut block = gbar[last].as_mut().submatrix_mut(0, 0, k0, k0);
        block -= &diff * (2.0 * weights.consist);
    }

    for t in (1..=last).rev() {
        if gbar[t].norm_max() == 0.0 {
            continue;
        }
        let g = weighted_lift(b2, &gbar[t])?;
        let b = b1.truncate(cs[t].ncols())?.embedding();
        let prev = FunctionalMap::from_matrix(cs[t - 1].clone())?;
        let (x1, x2) = conversion_features(&prev, b1, b2)?;
        let pi = ScalableSoftMap::new(x1, x2, cfg.sigma)?;
        let (dx1, _) = pi.apply_adjoint(&g, &b)?;
        // F1 = Φ₁ Cᵀ, so dL/dC = dF1ᵀ Φ₁
        let phi1 = b1.truncate(cs[t - 1].ncols())?;
        let dc = dx1.as_faer().transpose() * phi1.phi();
        gbar[t - 1] += &dc;
    }

    let g = weighted_lift(b2, &gbar[0])?;
    let b = b1.truncate(k0)?.embedding();
    let pi0 = ScalableSoftMap::new(f1.clone(), f2.clone(), cfg.sigma)?;
    let (df1, df2) = pi0.apply_adjoint(&g, &b)?;

    Ok(LossGradients {
        df1,
        df2,
        loss: LossBreakdown {
            orth,
            consist,
            lap,
            total,
        },
        c_init: out.c_init,
        c_refined: out.c_refined,
    })
}
