//! Wave kernel signatures and area-weighted normalisation.

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::mesh::AreaVector;
use crate::spectral::EigenBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Wks,
    External,
}

/// Per-vertex descriptor functions, one per column.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSet {
    pub values: RowMatrix,
    pub provenance: Provenance,
}

impl DescriptorSet {
    pub fn new(values: RowMatrix, provenance: Provenance) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::dim("descriptor set needs at least one column"));
        }
        if !values.is_finite() {
            return Err(Error::NonFiniteInput("descriptor values".into()));
        }
        Ok(Self { values, provenance })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn q(&self) -> usize {
        self.values.cols()
    }

    /// First `p` columns.
    pub fn leading(&self, p: usize) -> Result<Self> {
        if p == 0 || p > self.q() {
            return Err(Error::dim(format!("cannot take {p} of {} descriptor columns", self.q())));
        }
        Ok(Self {
            values: self.values.truncate_cols(p),
            provenance: self.provenance,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.values.save_fmat(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::new(RowMatrix::load_fmat(path)?, Provenance::External)
    }
}

/// Wave kernel signature with `q` log-spaced energies.
///
/// With `e_min`, `e_max` the logs of the smallest and largest nonzero
/// eigenvalues, the bandwidth is `σ = variance_scale·(e_max − e_min)/q` and
/// the energies are evenly spaced on `[e_min + 2σ, e_max − 2σ]`.
pub fn wks(basis: &EigenBasis, q: usize, variance_scale: f64) -> Result<DescriptorSet> {
    let lam = basis.lambda();
    let top = lam.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..lam.len()).filter(|&j| lam[j] > 1e-8 * top).collect();
    if kept.len() < 2 {
        return Err(Error::InsufficientSpectrum { nonzero: kept.len() });
    }
    if q < 2 || !(variance_scale > 0.0) {
        return Err(Error::Config(format!("WKS needs q >= 2 and a positive variance, got {q}, {variance_scale}")));
    }
    let logs: Vec<f64> = kept.iter().map(|&j| lam[j].ln()).collect();
    let (lo, hi) = (logs[0], logs[logs.len() - 1]);
    let sigma = variance_scale * (hi - lo) / q as f64;
    let (e0, e1) = (lo + 2.0 * sigma, hi - 2.0 * sigma);
    if !(e1 > e0) {
        return Err(Error::Config(format!(
            "WKS energy range is empty for q = {q} and variance {variance_scale}"
        )));
    }
    let energies: Vec<f64> = (0..q).map(|t| e0 + (e1 - e0) * t as f64 / (q - 1) as f64).collect();
    // coef[t][k]: normalised weight of eigenfunction k at energy t
    let coef: Vec<Vec<f64>> = energies
        .iter()
        .map(|e| {
            let w: Vec<f64> = logs.iter().map(|l| (-(e - l).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let phi = basis.phi();
    let n = basis.n();
    let mut sq = vec![0.0; kept.len()];
    let values = RowMatrix::from_fn(n, q, |i, t| {
        if t == 0 {
            for (s, &j) in sq.iter_mut().zip(&kept) {
                *s = phi[(i, j)] * phi[(i, j)];
            }
        }
        coef[t].iter().zip(&sq).map(|(c, s)| c * s).sum()
    });
    DescriptorSet::new(values, Provenance::Wks)
}

/// Scales every column to unit `A`-weighted L² norm.
pub fn normalize_l2(desc: &DescriptorSet, areas: &AreaVector) -> Result<DescriptorSet> {
    if areas.len() != desc.n() {
        return Err(Error::dim(format!(
            "{} descriptor rows with {} vertex areas",
            desc.n(),
            areas.len()
        )));
    }
    let a = areas.values();
    let norms: Vec<f64> = (0..desc.q())
        .map(|j| (0..desc.n()).map(|i| a[i] * desc.values.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let values = RowMatrix::from_fn(desc.n(), desc.q(), |i, j| desc.values.get(i, j) / norms[j]);
    DescriptorSet::new(values, desc.provenance)
}
