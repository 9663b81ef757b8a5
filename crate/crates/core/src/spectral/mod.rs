//! Laplace–Beltrami eigenbases: the generalized problem `L φ = λ A φ` for
//! the smallest eigenpairs, projection into the basis and truncated views.

mod cache;
mod lanczos;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::mesh::{AreaVector, SparseOperator};

pub use cache::{cache_key, cached_eigenbasis, load_basis, read_basis, save_basis, write_basis};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of an eigenbasis, shared by all of its truncations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisId(pub u64);

impl BasisId {
    fn fresh() -> Self {
        BasisId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// First `k` generalized eigenpairs with `A`-orthonormal eigenfunctions.
///
/// Storage is reference counted, so [`EigenBasis::truncate`] is a view and
/// never copies `Φ`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    phi: Arc<Mat<f64>>,
    lambda: Arc<Vec<f64>>,
    areas: Arc<AreaVector>,
    k: usize,
    id: BasisId,
}

impl EigenBasis {
    /// Wraps precomputed eigenpairs, checking shapes only.
    pub fn from_parts(phi: Mat<f64>, lambda: Vec<f64>, areas: AreaVector) -> Result<Self> {
        if phi.nrows() != areas.len() || phi.ncols() != lambda.len() {
            return Err(Error::dim(format!(
                "basis of shape {}x{} with {} eigenvalues and {} areas",
                phi.nrows(),
                phi.ncols(),
                lambda.len(),
                areas.len()
            )));
        }
        let k = lambda.len();
        Ok(Self {
            phi: Arc::new(phi),
            lambda: Arc::new(lambda),
            areas: Arc::new(areas),
            k,
            id: BasisId::fresh(),
        })
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn id(&self) -> BasisId {
        self.id
    }

    /// `n × k` eigenfunction matrix.
    pub fn phi(&self) -> MatRef<'_, f64> {
        Mat::as_ref(&self.phi).subcols(0, self.k)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda[..self.k]
    }

    pub fn areas(&self) -> &AreaVector {
        &self.areas
    }

    /// View of the first `k` eigenpairs.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k > self.k {
            return Err(Error::KTooLarge {
                requested: k,
                available: self.k,
            });
        }
        if k < 1 {
            return Err(Error::Config("basis size must be at least 1".into()));
        }
        Ok(Self { k, ..self.clone() })
    }

    /// Spectral coefficients `Φᵀ A F` (`k × d`).
    pub fn project(&self, funcs: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if funcs.nrows() != self.n() {
            return Err(Error::dim(format!(
                "cannot project {} rows onto a basis over {} vertices",
                funcs.nrows(),
                self.n()
            )));
        }
        let a = self.areas.values();
        let af = Mat::from_fn(funcs.nrows(), funcs.ncols(), |i, j| a[i] * funcs[(i, j)]);
        if af.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteInput("projected functions".into()));
        }
        let mut out = Mat::zeros(self.k, funcs.ncols());
        matmul(out.as_mut(), Accum::Replace, self.phi().transpose(), af.as_ref(), 1.0, Par::Seq);
        Ok(out)
    }

    /// `Φ · coeffs` (`n × d`).
    pub fn reconstruct(&self, coeffs: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if coeffs.nrows() != self.k {
            return Err(Error::dim(format!(
                "{} coefficient rows for a basis of size {}",
                coeffs.nrows(),
                self.k
            )));
        }
        Ok(self.phi() * coeffs)
    }

    /// Row-major copy of `Φ`, one spectral embedding per vertex.
    pub fn embedding(&self) -> RowMatrix {
        RowMatrix::from_faer(self.phi())
    }

    /// Same basis on a relabelled mesh where new vertex `i` is old vertex
    /// `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::dim("permutation length differs from vertex count"));
        }
        let phi = Mat::from_fn(self.n(), self.k, |i, j| self.phi[(order[i], j)]);
        Self::from_parts(phi, self.lambda().to_vec(), self.areas.permuted(order))
    }
}

/// Solver settings for [`compute_eigenbasis_with`].
#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Block size of the Krylov iteration.
    pub block_size: usize,
    /// Relative residual tolerance on the shift-inverted operator.
    pub tol: f64,
    /// Restart cap as a multiple of the number of requested pairs.
    pub restarts_per_pair: usize,
    /// Meshes with at most this many vertices use a dense eigensolver.
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            block_size: 8,
            tol: 1e-9,
            restarts_per_pair: 50,
            dense_threshold: 400,
            seed: 0x5eed,
        }
    }
}

pub fn compute_eigenbasis(l: &SparseOperator, a: &AreaVector, k: usize) -> Result<EigenBasis> {
    compute_eigenbasis_with(l, a, k, &EigenOptions::default())
}

/// The `k` smallest eigenpairs of the pencil `(L, A)`, ascending, with each
/// column's largest-magnitude entry made positive.
pub fn compute_eigenbasis_with(
    l: &SparseOperator,
    a: &AreaVector,
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    let n = l.dim();
    if a.len() != n {
        return Err(Error::dim(format!("operator of size {n} with {} areas", a.len())));
    }
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 eigenpairs, asked for {k}")));
    }
    if k + 1 > n {
        return Err(Error::KTooLarge {
            requested: k,
            available: n.saturating_sub(1),
        });
    }
    let b = opts.block_size.max(1);
    let nev = k - 1;
    let max_dim = (2 * nev + 2 * b).max(nev + 4 * b).div_ceil(b) * b;
    let (mut lambda, mut phi) = if n <= opts.dense_threshold || max_dim + 1 > n {
        dense_eigenpairs(l, a, k)?
    } else {
        krylov_eigenpairs(l, a, k, max_dim, opts)?
    };

    // Rayleigh quotients are more accurate than the transformed Ritz values
    for j in 1..k {
        let col: Vec<f64> = (0..n).map(|i| phi[(i, j)]).collect();
        let mass: f64 = col.iter().zip(a.values()).map(|(x, w)| w * x * x).sum();
        lambda[j] = l.quadratic_form(&col) / mass;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| lambda[x].total_cmp(&lambda[y]));
    // the pencil is semi-definite, so negative values are rounding noise
    let lambda: Vec<f64> = order.iter().map(|&j| lambda[j].max(0.0)).collect();
    phi = Mat::from_fn(n, k, |i, j| phi[(i, order[j])]);
    canonicalize_signs(phi.as_mut());
    EigenBasis::from_parts(phi, lambda, a.clone())
}

fn canonicalize_signs(mut phi: MatMut<'_, f64>) {
    for j in 0..phi.ncols() {
        let mut best = 0;
        for i in 1..phi.nrows() {
            if phi[(i, j)].abs() > phi[(best, j)].abs() {
                best = i;
            }
        }
        if phi[(best, j)] < 0.0 {
            for i in 0..phi.nrows() {
                phi[(i, j)] = -phi[(i, j)];
            }
        }
    }
}

/// Dense path via the symmetric matrix `A^{-1/2} L A^{-1/2}`.
fn dense_eigenpairs(l: &SparseOperator, a: &AreaVector, k: usize) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = l.dim();
    let s: Vec<f64> = a.values().iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut m = Mat::<f64>::zeros(n, n);
    for (i, j, v) in l.triplets() {
        m[(i, j)] = v * s[i] * s[j];
    }
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::ConvergenceFailure {
        converged: 0,
        requested: k,
        restarts: 0,
    })?;
    let lambda = (0..k).map(|j| eig.S().column_vector()[j]).collect();
    let phi = Mat::from_fn(n, k, |i, j| eig.U()[(i, j)] * s[i]);
    Ok((lambda, phi))
}

fn krylov_eigenpairs(
    l: &SparseOperator,
    a: &AreaVector,
    k: usize,
    max_dim: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = l.dim();
    let w = a.values();
    let shift = -1e-8 * l.diagonal().iter().sum::<f64>() / n as f64;
    let triplets: Vec<Triplet<usize, usize, f64>> = l
        .triplets()
        .filter(|&(i, j, _)| i >= j)
        .map(|(i, j, v)| Triplet::new(i, j, if i == j { v - shift * w[i] } else { v }))
        .collect();
    let shifted = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::DegenerateGeometry(format!("cannot assemble operator: {e:?}")))?;
    let llt = shifted
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::DegenerateGeometry(format!("shifted operator is not definite: {e:?}")))?;

    // the constant function spans the null space of a closed mesh and
    // would otherwise dominate the shift-inverted spectrum
    let c = 1.0 / a.total().sqrt();
    let locked = Mat::from_fn(n, 1, |_, _| c);
    let op = |mut x: MatMut<'_, f64>| {
        for j in 0..x.ncols() {
            for i in 0..n {
                x[(i, j)] *= w[i];
            }
        }
        llt.solve_in_place(x);
    };
    let params = lanczos::KrylovSchurParams {
        nev: k - 1,
        block: opts.block_size.max(1),
        max_dim,
        tol: opts.tol,
        max_restarts: opts.restarts_per_pair * k,
        seed: opts.seed,
    };
    let ritz = lanczos::krylov_schur(n, w, locked.as_ref(), &op, &params)?;
    log::debug!("eigensolver converged after {} restarts", ritz.restarts);

    let mut lambda = vec![0.0];
    lambda.extend(ritz.values.iter().map(|t| shift + 1.0 / t));
    let mut phi = Mat::zeros(n, k);
    phi.as_mut().subcols_mut(0, 1).copy_from(locked.as_ref());
    phi.as_mut().subcols_mut(1, k - 1).copy_from(ritz.vectors.as_ref());
    Ok((lambda, phi))
}
