//! Functional maps `C: L²(S₁) → L²(S₂)` of size `K₂ × K₁`, their
//! construction from pointwise maps and conversion back.

use std::io::{BufRead, Write};
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::nn::{nearest_neighbors_hinted, NnStrategy};
use crate::softmap::{ScalableSoftMap, VertexMap};
use crate::spectral::{BasisId, EigenBasis};
use crate::zoomout::resolvent_mask;

/// Spectral matrix together with the identities of the bases it maps
/// between.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalMap {
    c: Mat<f64>,
    source: Option<BasisId>,
    target: Option<BasisId>,
}

impl FunctionalMap {
    pub fn new(c: Mat<f64>, source: Option<BasisId>, target: Option<BasisId>) -> Result<Self> {
        if c.nrows() == 0 || c.ncols() == 0 {
            return Err(Error::dim("functional map must be at least 1x1"));
        }
        if c.col_iter().any(|col| col.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteInput("functional map entries".into()));
        }
        Ok(Self { c, source, target })
    }

    /// Map not tied to particular bases.
    pub fn from_matrix(c: Mat<f64>) -> Result<Self> {
        Self::new(c, None, None)
    }

    pub fn identity(k: usize) -> Self {
        Self {
            c: Mat::identity(k, k),
            source: None,
            target: None,
        }
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.c.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.c
    }

    /// Rows: target basis size.
    pub fn k2(&self) -> usize {
        self.c.nrows()
    }

    /// Columns: source basis size.
    pub fn k1(&self) -> usize {
        self.c.ncols()
    }

    pub fn source_basis(&self) -> Option<BasisId> {
        self.source
    }

    pub fn target_basis(&self) -> Option<BasisId> {
        self.target
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = format!("{} {}\n", self.k2(), self.k1());
        for i in 0..self.k2() {
            let row: Vec<String> = (0..self.k1()).map(|j| format!("{:.17e}", self.c[(i, j)])).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| Error::parse("<functional map>", m);
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad header `{header}`"))))
            .collect::<Result<_>>()?;
        let [k2, k1] = dims[..] else {
            return Err(bad(format!("header must be `k2 k1`, got `{header}`")));
        };
        let mut c = Mat::zeros(k2, k1);
        for i in 0..k2 {
            let line = lines.next().ok_or_else(|| bad(format!("missing row {i}")))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad value `{t}` in row {i}"))))
                .collect::<Result<_>>()?;
            if vals.len() != k1 {
                return Err(bad(format!("row {i} has {} values, expected {k1}", vals.len())));
            }
            for (j, v) in vals.into_iter().enumerate() {
                c[(i, j)] = v;
            }
        }
        Self::from_matrix(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_text(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let f = std::fs::File::open(p)?;
        Self::read_text(std::io::BufReader::new(f)).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(p, message),
            other => other,
        })
    }
}

/// A pointwise map `S₂ → S₁`, hard or soft.
#[derive(Clone, Copy, Debug)]
pub enum PointMap<'a> {
    Hard(&'a VertexMap),
    Soft(&'a ScalableSoftMap),
}

/// Owned counterpart of [`PointMap`].
#[derive(Clone, Debug)]
pub enum OwnedPointMap {
    Hard(VertexMap),
    Soft(ScalableSoftMap),
}

impl OwnedPointMap {
    pub fn as_ref(&self) -> PointMap<'_> {
        match self {
            OwnedPointMap::Hard(m) => PointMap::Hard(m),
            OwnedPointMap::Soft(m) => PointMap::Soft(m),
        }
    }

    /// Hard map; soft maps are reduced to their row-wise argmax.
    pub fn to_vertex_map(&self) -> VertexMap {
        match self {
            OwnedPointMap::Hard(m) => m.clone(),
            OwnedPointMap::Soft(m) => m.extract_pointwise(),
        }
    }
}

/// Conversion used by [`fmap_to_pointwise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConversionMode {
    Hard,
    Soft { sigma: f64 },
}

/// Proper functional map `C = Φ₂ᵀ A₂ Π Φ₁` in the first `k2` and `k1`
/// eigenfunctions.
pub fn pullback(b1: &EigenBasis, b2: &EigenBasis, map: PointMap<'_>, k1: usize, k2: usize) -> Result<FunctionalMap> {
    let t1 = b1.truncate(k1)?;
    let t2 = b2.truncate(k2)?;
    let moved: Mat<f64> = match map {
        PointMap::Hard(v) => {
            if v.len() != b2.n() {
                return Err(Error::dim(format!(
                    "hard map has {} entries, target shape has {} vertices",
                    v.len(),
                    b2.n()
                )));
            }
            v.check_source(b1.n())?;
            let idx = v.indices();
            let phi = t1.phi();
            Mat::from_fn(idx.len(), k1, |i, j| phi[(idx[i], j)])
        }
        PointMap::Soft(s) => {
            if s.n_source() != b1.n() || s.n_target() != b2.n() {
                return Err(Error::dim(format!(
                    "soft map is {}x{}, bases have {} and {} vertices",
                    s.n_target(),
                    s.n_source(),
                    b2.n(),
                    b1.n()
                )));
            }
            s.apply(&t1.embedding())?.to_faer()
        }
    };
    let c = t2.project(moved.as_ref())?;
    FunctionalMap::new(c, Some(b1.id()), Some(b2.id()))
}

/// Pullback of a hard map given as a plain index list; convenience over
/// [`pullback`] that skips building a [`VertexMap`].
pub fn pullback_hard(b1: &EigenBasis, b2: &EigenBasis, map: &VertexMap, k: usize) -> Result<FunctionalMap> {
    pullback(b1, b2, PointMap::Hard(map), k, k)
}

/// Spectral embeddings `(Φ₁Cᵀ, Φ₂)` whose rows are compared when turning
/// `C` back into a pointwise map.
pub fn conversion_features(c: &FunctionalMap, b1: &EigenBasis, b2: &EigenBasis) -> Result<(RowMatrix, RowMatrix)> {
    let t1 = b1.truncate(c.k1())?;
    let t2 = b2.truncate(c.k2())?;
    let f1 = t1.phi() * c.matrix().transpose();
    Ok((RowMatrix::from_faer(f1.as_ref()), t2.embedding()))
}

/// Pointwise map induced by `C`: nearest neighbours (hard) or a soft map
/// between the rows of `Φ₂` and of `Φ₁Cᵀ`.
pub fn fmap_to_pointwise(
    c: &FunctionalMap,
    b1: &EigenBasis,
    b2: &EigenBasis,
    mode: ConversionMode,
) -> Result<OwnedPointMap> {
    fmap_to_pointwise_with(c, b1, b2, mode, NnStrategy::Auto, None)
}

/// [`fmap_to_pointwise`] with an explicit search strategy and optional
/// previous matches to seed the search.
pub fn fmap_to_pointwise_with(
    c: &FunctionalMap,
    b1: &EigenBasis,
    b2: &EigenBasis,
    mode: ConversionMode,
    strategy: NnStrategy,
    hints: Option<&VertexMap>,
) -> Result<OwnedPointMap> {
    let (f1, f2) = conversion_features(c, b1, b2)?;
    match mode {
        ConversionMode::Hard => {
            let idx = nearest_neighbors_hinted(&f2, &f1, strategy, hints.map(|h| h.indices()))?;
            Ok(OwnedPointMap::Hard(VertexMap::new(idx, b1.n())?))
        }
        ConversionMode::Soft { sigma } => Ok(OwnedPointMap::Soft(ScalableSoftMap::new(f1, f2, sigma)?)),
    }
}

/// Top-left `k2 × k1` block.
pub fn principal_submatrix(c: &FunctionalMap, k2: usize, k1: usize) -> Result<FunctionalMap> {
    if k2 > c.k2() || k1 > c.k1() || k2 == 0 || k1 == 0 {
        return Err(Error::dim(format!(
            "cannot take a {k2}x{k1} block of a {}x{} map",
            c.k2(),
            c.k1()
        )));
    }
    FunctionalMap::new(c.matrix().submatrix(0, 0, k2, k1).to_owned(), c.source, c.target)
}

/// Regularised least-squares map from spectral descriptor coefficients:
/// each row `c_i` minimises `‖c_i A₁ − (A₂)_i‖² + μ Σ_j Δ²_ij c_ij²`.
///
/// `a1` is `K₁ × p`, `a2` is `K₂ × p`; `lambda1`/`lambda2` provide the
/// eigenvalues for the mask. With fewer descriptors than `K₁` a small
/// ridge keeps each system definite.
pub fn solve_least_squares_fmap(
    a1: MatRef<'_, f64>,
    a2: MatRef<'_, f64>,
    lambda1: &[f64],
    lambda2: &[f64],
    reg_weight: f64,
) -> Result<FunctionalMap> {
    let (k1, p) = (a1.nrows(), a1.ncols());
    let k2 = a2.nrows();
    if a2.ncols() != p {
        return Err(Error::dim(format!("descriptor counts {p} and {} differ", a2.ncols())));
    }
    if lambda1.len() < k1 || lambda2.len() < k2 {
        return Err(Error::dim("eigenvalue lists shorter than the map"));
    }
    if !(reg_weight >= 0.0 && reg_weight.is_finite()) {
        return Err(Error::Config(format!("regularisation weight {reg_weight} must be nonnegative")));
    }
    let gram = a1 * a1.transpose();
    let rhs = a1 * a2.transpose();
    let mask = resolvent_mask(&lambda1[..k1], &lambda2[..k2]);
    let ridge = if p < k1 {
        1e-9 * (0..k1).map(|i| gram[(i, i)]).sum::<f64>() / k1 as f64
    } else {
        0.0
    };

    if reg_weight == 0.0 && ridge == 0.0 {
        let eig = gram.self_adjoint_eigen(Side::Lower).map_err(|_| Error::SingularSystem {
            row: 0,
            condition: f64::INFINITY,
        })?;
        let s = eig.S().column_vector();
        let (lo, hi) = (s[0], s[k1 - 1]);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > 1e12 {
            return Err(Error::SingularSystem { row: 0, condition });
        }
    }

    let mut c = Mat::zeros(k2, k1);
    for i in 0..k2 {
        let mut m = gram.clone();
        for j in 0..k1 {
            m[(j, j)] += reg_weight * mask[(i, j)] + ridge;
        }
        let llt = m.llt(Side::Lower).map_err(|_| Error::SingularSystem {
            row: i,
            condition: f64::INFINITY,
        })?;
        let mut b = rhs.as_ref().subcols(i, 1).to_owned();
        llt.solve_in_place(b.as_mut());
        for j in 0..k1 {
            c[(i, j)] = b[(j, 0)];
        }
    }
    FunctionalMap::from_matrix(c)
}

/// Residual `‖C A₁ − A₂‖²_F + μ ‖Δ∘C‖²_F` of the least-squares problem.
pub fn least_squares_residual(
    c: MatRef<'_, f64>,
    a1: MatRef<'_, f64>,
    a2: MatRef<'_, f64>,
    lambda1: &[f64],
    lambda2: &[f64],
    reg_weight: f64,
) -> f64 {
    let r = c * a1 - a2;
    let mask = resolvent_mask(&lambda1[..c.ncols()], &lambda2[..c.nrows()]);
    let mut pen = 0.0;
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            pen += mask[(i, j)] * c[(i, j)] * c[(i, j)];
        }
    }
    r.squared_norm_l2() + reg_weight * pen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cotangent_laplacian, shapes, vertex_areas};
    use crate::spectral::compute_eigenbasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(mesh: &crate::mesh::TriangleMesh, k: usize) -> EigenBasis {
        compute_eigenbasis(&cotangent_laplacian(mesh).unwrap(), &vertex_areas(mesh).unwrap(), k).unwrap()
    }

    fn random_mat(r: usize, c: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_pullback_and_roundtrip() {
        let mesh = shapes::deform_asymmetric(&shapes::icosphere(2), 2);
        let b = basis(&mesh, 20);
        let id = VertexMap::identity(b.n());
        for k in [5, 20] {
            let c = pullback_hard(&b, &b, &id, k).unwrap();
            assert!((c.matrix() - Mat::<f64>::identity(k, k)).norm_max() < 1e-10);
        }
        let c = pullback_hard(&b, &b, &id, 20).unwrap();
        let back = fmap_to_pointwise(&c, &b, &b, ConversionMode::Hard).unwrap();
        assert_eq!(back.to_vertex_map(), id);
    }

    #[test]
    fn hard_pullback_matches_dense_oracle_and_nests() {
        let m1 = shapes::icosphere(2);
        let m2 = shapes::deform_asymmetric(&m1, 4);
        let (b1, b2) = (basis(&m1, 24), basis(&m2, 24));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = VertexMap::new((0..b2.n()).map(|_| rng.random_range(0..b1.n())).collect(), b1.n()).unwrap();
        let c = pullback_hard(&b1, &b2, &v, 20).unwrap();

        let (n1, n2) = (b1.n(), b2.n());
        let pi = Mat::from_fn(n2, n1, |i, j| if v.indices()[i] == j { 1.0 } else { 0.0 });
        let a2 = Mat::from_fn(n2, n2, |i, j| if i == j { b2.areas().values()[i] } else { 0.0 });
        let phi1 = b1.phi().subcols(0, 20);
        let phi2 = b2.phi().subcols(0, 20);
        let dense = phi2.transpose() * &a2 * &pi * phi1;
        assert!((c.matrix() - &dense).norm_max() < 1e-12);

        let small = pullback_hard(&b1, &b2, &v, 10).unwrap();
        assert_eq!(principal_submatrix(&c, 10, 10).unwrap().matrix(), small.matrix());
        assert!(principal_submatrix(&c, 21, 3).is_err());
    }

    #[test]
    fn soft_conversion_limit_matches_hard() {
        let mesh = shapes::deform_asymmetric(&shapes::icosphere(2), 8);
        let b = basis(&mesh, 12);
        let c = FunctionalMap::from_matrix(random_mat(12, 12, 5) * 0.2 + Mat::<f64>::identity(12, 12)).unwrap();
        let hard = fmap_to_pointwise(&c, &b, &b, ConversionMode::Hard).unwrap().to_vertex_map();
        let soft = fmap_to_pointwise(&c, &b, &b, ConversionMode::Soft { sigma: 1e-4 }).unwrap();
        assert_eq!(soft.to_vertex_map(), hard);
        let sharp = ScalableSoftMap::new(b.embedding(), b.embedding(), 1e-3).unwrap();
        let cs = pullback(&b, &b, PointMap::Soft(&sharp), 12, 12).unwrap();
        assert!((cs.matrix() - Mat::<f64>::identity(12, 12)).norm_l2() < 1e-6);
    }

    #[test]
    fn least_squares_against_normal_equations() {
        let (k, p, mu) = (12, 40, 1e-2);
        let a1 = random_mat(k, p, 1);
        let a2 = random_mat(k, p, 2);
        let l1: Vec<f64> = (0..k).map(|i| i as f64 * 0.7).collect();
        let l2: Vec<f64> = (0..k).map(|i| i as f64 * 0.75).collect();
        let c = solve_least_squares_fmap(a1.as_ref(), a2.as_ref(), &l1, &l2, mu).unwrap();
        let mask = resolvent_mask(&l1, &l2);
        for i in 0..k {
            let mut m = &a1 * a1.transpose();
            for j in 0..k {
                m[(j, j)] += mu * mask[(i, j)];
            }
            let rhs = &a1 * a2.as_ref().row(i).transpose().to_owned();
            let x = m.partial_piv_lu().solve(&rhs);
            for j in 0..k {
                assert!((x[j] - c.matrix()[(i, j)]).abs() < 1e-10);
            }
        }
        let base = least_squares_residual(c.matrix(), a1.as_ref(), a2.as_ref(), &l1, &l2, mu);
        for s in 0..100 {
            let pert = c.matrix() + random_mat(k, k, 100 + s) * 1e-3;
            assert!(least_squares_residual(pert.as_ref(), a1.as_ref(), a2.as_ref(), &l1, &l2, mu) >= base);
        }
    }

    #[test]
    fn least_squares_edge_cases() {
        let id = Mat::<f64>::identity(6, 6);
        let l: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let c = solve_least_squares_fmap(id.as_ref(), id.as_ref(), &l, &l, 0.0).unwrap();
        assert!((c.matrix() - &id).norm_max() < 1e-14);

        let l2: Vec<f64> = (0..6).map(|i| 2.0 + i as f64).collect();
        let big = solve_least_squares_fmap(id.as_ref(), id.as_ref(), &l, &l2, 1e12).unwrap();
        assert!(big.matrix().norm_max() < 1e-6);

        let rank1 = Mat::from_fn(3, 5, |i, j| (i + 1) as f64 * (j + 1) as f64);
        assert!(matches!(
            solve_least_squares_fmap(rank1.as_ref(), rank1.as_ref(), &l, &l, 0.0),
            Err(Error::SingularSystem { .. })
        ));
        let wide = random_mat(8, 4, 3);
        let l8: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let r = solve_least_squares_fmap(wide.as_ref(), wide.as_ref(), &l8, &l8, 0.0).unwrap();
        assert!(r.matrix().norm_max().is_finite());
    }

    #[test]
    fn text_format_roundtrip() {
        let c = FunctionalMap::from_matrix(random_mat(3, 4, 7) * 1e-3).unwrap();
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("3 4\n"));
        let back = FunctionalMap::read_text(&buf[..]).unwrap();
        assert_eq!(back.matrix(), c.matrix());
        assert!(FunctionalMap::read_text(&b"2 2\n1 2\n3\n"[..]).is_err());
    }
}
