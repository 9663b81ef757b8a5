//! Block Krylov–Schur iteration for the largest eigenpairs of an operator
//! that is self-adjoint in a diagonal (`A`-weighted) inner product.
//!
//! This is the restarted form of block Lanczos with full
//! reorthogonalisation: after each cycle the Krylov decomposition
//! `op·V = V·H + Q·E` is compressed onto the wanted Ritz vectors and then
//! expanded again from the residual block `Q`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub(crate) struct KrylovSchurParams {
    pub nev: usize,
    pub block: usize,
    pub max_dim: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

pub(crate) struct RitzPairs {
    /// Descending operator eigenvalues.
    pub values: Vec<f64>,
    /// `A`-orthonormal eigenvectors, one per column.
    pub vectors: Mat<f64>,
    pub restarts: usize,
}

/// `xᵀ diag(w) y`
fn weighted_inner(x: MatRef<'_, f64>, y: MatRef<'_, f64>, w: &[f64]) -> Mat<f64> {
    let wy = Mat::from_fn(y.nrows(), y.ncols(), |i, j| w[i] * y[(i, j)]);
    let mut out = Mat::zeros(x.ncols(), y.ncols());
    matmul(out.as_mut(), Accum::Replace, x.transpose(), wy.as_ref(), 1.0, Par::Seq);
    out
}

/// `W -= V·(Vᵀ A W)`, applied twice; returns the accumulated coefficients.
fn project_out(mut w: MatMut<'_, f64>, v: MatRef<'_, f64>, weights: &[f64]) -> Mat<f64> {
    let mut total = Mat::zeros(v.ncols(), w.ncols());
    if v.ncols() == 0 {
        return total;
    }
    for _ in 0..2 {
        let c = weighted_inner(v, w.as_ref(), weights);
        matmul(w.as_mut(), Accum::Add, v, c.as_ref(), -1.0, Par::Seq);
        total += &c;
    }
    total
}

fn col_norm(w: MatRef<'_, f64>, j: usize, weights: &[f64]) -> f64 {
    let c = w.col(j);
    (0..w.nrows()).map(|i| weights[i] * c[i] * c[i]).sum::<f64>().sqrt()
}

/// Orthonormalises the columns of `w` in place (against `basis` and each
/// other). Returns the triangular factor; dependent columns are replaced by
/// fresh random directions with a zero row in the factor.
fn orthonormalize_block(
    w: &mut Mat<f64>,
    basis: &[MatRef<'_, f64>],
    weights: &[f64],
    rng: &mut ChaCha8Rng,
) -> Mat<f64> {
    let b = w.ncols();
    let n = w.nrows();
    let mut r = Mat::zeros(b, b);
    for j in 0..b {
        let before = col_norm(w.as_ref(), j, weights);
        for _ in 0..2 {
            for k in 0..j {
                let c: f64 = (0..n).map(|i| weights[i] * w[(i, k)] * w[(i, j)]).sum();
                r[(k, j)] += c;
                for i in 0..n {
                    let wk = w[(i, k)];
                    w[(i, j)] -= c * wk;
                }
            }
        }
        let mut nrm = col_norm(w.as_ref(), j, weights);
        let dependent = !(nrm > 1e-10 * before.max(f64::MIN_POSITIVE));
        if dependent {
            // rank deficiency: continue the iteration in a random direction
            for k in 0..j {
                r[(k, j)] = 0.0;
            }
            loop {
                for i in 0..n {
                    w[(i, j)] = rng.random_range(-1.0..1.0);
                }
                for v in basis {
                    let mut col = w.as_mut().subcols_mut(j, 1);
                    project_out(col.as_mut(), *v, weights);
                }
                for _ in 0..2 {
                    for k in 0..j {
                        let c: f64 = (0..n).map(|i| weights[i] * w[(i, k)] * w[(i, j)]).sum();
                        for i in 0..n {
                            let wk = w[(i, k)];
                            w[(i, j)] -= c * wk;
                        }
                    }
                }
                nrm = col_norm(w.as_ref(), j, weights);
                if nrm > 1e-8 {
                    break;
                }
            }
            r[(j, j)] = 0.0;
        } else {
            r[(j, j)] = nrm;
        }
        for i in 0..n {
            w[(i, j)] /= nrm;
        }
    }
    r
}

/// Largest `nev` eigenpairs of `op`, restricted to the `A`-orthogonal
/// complement of `locked`.
pub(crate) fn krylov_schur(
    n: usize,
    weights: &[f64],
    locked: MatRef<'_, f64>,
    op: &dyn Fn(MatMut<'_, f64>),
    p: &KrylovSchurParams,
) -> Result<RitzPairs> {
    let b = p.block;
    let md = p.max_dim;
    assert!(md >= p.nev + b && md + locked.ncols() <= n);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut q = Mat::from_fn(n, b, |_, _| rng.random_range(-1.0..1.0));
    project_out(q.as_mut(), locked, weights);
    orthonormalize_block(&mut q, &[locked], weights, &mut rng);

    // storage for the whole cycle; only the first `m` columns are live
    let mut v = Mat::<f64>::zeros(n, md);
    let mut h = Mat::<f64>::zeros(md, md);
    let mut e = Mat::<f64>::zeros(b, md);
    let mut m = 0;
    let mut restarts = 0;

    loop {
        while m + b <= md {
            let mut w = q.clone();
            op(w.as_mut());
            project_out(w.as_mut(), locked, weights);

            v.as_mut().subcols_mut(m, b).copy_from(q.as_ref());
            let live = v.as_ref().subcols(0, m + b);
            let coeffs = project_out(w.as_mut(), live, weights);
            project_out(w.as_mut(), locked, weights);
            let r = orthonormalize_block(&mut w, &[locked, live], weights, &mut rng);

            h.as_mut().submatrix_mut(m, 0, b, m).copy_from(e.as_ref().subcols(0, m));
            h.as_mut().submatrix_mut(0, m, m + b, b).copy_from(coeffs.as_ref());
            e.fill(0.0);
            e.as_mut().submatrix_mut(0, m, b, b).copy_from(r.as_ref());
            m += b;
            q = w;
        }

        let hs = Mat::from_fn(m, m, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
        let eig = hs
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::ConvergenceFailure {
                converged: 0,
                requested: p.nev,
                restarts,
            })?;
        // faer sorts ascending; wanted values are the largest
        let theta: Vec<f64> = (0..m).rev().map(|i| eig.S().column_vector()[i]).collect();
        let y = Mat::from_fn(m, m, |i, j| eig.U()[(i, m - 1 - j)]);
        let mut ey = Mat::zeros(b, m);
        matmul(ey.as_mut(), Accum::Replace, e.as_ref().subcols(0, m), y.as_ref(), 1.0, Par::Seq);

        let floor = 1e2 * f64::EPSILON * theta[0].abs();
        let converged = (0..p.nev)
            .take_while(|&j| {
                let res = (0..b).map(|i| ey[(i, j)] * ey[(i, j)]).sum::<f64>().sqrt();
                res <= p.tol * theta[j].abs() + floor
            })
            .count();
        log::debug!("krylov-schur cycle {restarts}: dim {m}, {converged}/{} converged", p.nev);

        let keep = if converged == p.nev {
            p.nev
        } else {
            (p.nev + (md - p.nev) / 2).min(md - b)
        };
        let mut vk = Mat::zeros(n, keep);
        matmul(
            vk.as_mut(),
            Accum::Replace,
            v.as_ref().subcols(0, m),
            y.as_ref().subcols(0, keep),
            1.0,
            Par::Seq,
        );
        if converged == p.nev {
            return Ok(RitzPairs {
                values: theta[..p.nev].to_vec(),
                vectors: vk,
                restarts,
            });
        }
        if restarts >= p.max_restarts {
            return Err(Error::ConvergenceFailure {
                converged,
                requested: p.nev,
                restarts,
            });
        }
        restarts += 1;

        v.as_mut().subcols_mut(0, keep).copy_from(vk.as_ref());
        drop(vk);
        h.fill(0.0);
        for i in 0..keep {
            h[(i, i)] = theta[i];
        }
        e.fill(0.0);
        e.as_mut().subcols_mut(0, keep).copy_from(ey.as_ref().subcols(0, keep));
        m = keep;
    }
}
