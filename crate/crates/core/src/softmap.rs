//! Implicit soft pointwise maps.
//!
//! A [`ScalableSoftMap`] stands for the row-stochastic matrix
//!
//! ```text
//! Π_ij = exp(δ_ij) / Σ_k exp(δ_ik),   δ_ij = −‖F2_i − F1_j‖² / (2σ²)
//! ```
//!
//! of size `n₂ × n₁`, but only stores the two feature matrices. Products
//! `Π·B`, their adjoints and the row-wise argmax are evaluated by streaming
//! over tiles of target rows and blocks of source rows, with a running
//! log-sum-exp per target row. No buffer ever scales with `n₁·n₂`.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, sq_dist, RowMatrix};
use crate::nn::{nearest_neighbors, NnStrategy};

/// Kernel used to turn feature distances into map weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Kernel {
    /// Gaussian kernel normalised by a softmax over each target row.
    #[default]
    GaussianRowSoftmax,
}

/// Tile shape of the streaming reductions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileConfig {
    /// Target rows handled together (one unit of parallel work).
    pub target_rows: usize,
    /// Source rows whose kernel values are held at once.
    pub source_rows: usize,
}

impl Default for TileConfig {
    fn default() -> Self {
        Self {
            target_rows: 128,
            source_rows: 1024,
        }
    }
}

/// Target tiles are grouped into this many fixed chunks when the adjoint
/// scatters into source rows, so the summation order never depends on the
/// thread count.
const ADJOINT_GROUPS: usize = 8;

#[derive(Clone, Debug)]
pub struct ScalableSoftMap {
    f1: RowMatrix,
    f2: RowMatrix,
    sigma: f64,
    kernel: Kernel,
    tiles: TileConfig,
}

/// Per-target-row log-sum-exp state.
struct RowStats {
    lse: Vec<f64>,
}

impl ScalableSoftMap {
    /// `f1` holds source (`S₁`) features, `f2` target (`S₂`) features.
    pub fn new(f1: RowMatrix, f2: RowMatrix, sigma: f64) -> Result<Self> {
        if f1.cols() != f2.cols() || f1.cols() == 0 {
            return Err(Error::dim(format!(
                "feature widths {} and {} must agree and be positive",
                f1.cols(),
                f2.cols()
            )));
        }
        if f1.rows() == 0 || f2.rows() == 0 {
            return Err(Error::dim("soft map needs at least one row per shape"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("blur must be positive and finite, got {sigma}")));
        }
        if !f1.is_finite() || !f2.is_finite() {
            return Err(Error::NonFiniteInput("soft-map features".into()));
        }
        Ok(Self {
            f1,
            f2,
            sigma,
            kernel: Kernel::GaussianRowSoftmax,
            tiles: TileConfig::default(),
        })
    }

    pub fn with_tiles(mut self, tiles: TileConfig) -> Self {
        self.tiles = TileConfig {
            target_rows: tiles.target_rows.max(1),
            source_rows: tiles.source_rows.max(1),
        };
        self
    }

    pub fn n_source(&self) -> usize {
        self.f1.rows()
    }

    pub fn n_target(&self) -> usize {
        self.f2.rows()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn tiles(&self) -> TileConfig {
        self.tiles
    }

    pub fn source_features(&self) -> &RowMatrix {
        &self.f1
    }

    pub fn target_features(&self) -> &RowMatrix {
        &self.f2
    }

    #[inline]
    fn scale(&self) -> f64 {
        -0.5 / (self.sigma * self.sigma)
    }

    /// Kernel logits `δ_ij` for a tile of targets and a block of sources.
    fn logits(&self, t0: usize, t1: usize, s0: usize, s1: usize, buf: &mut Vec<f64>) {
        let c = self.scale();
        let w = s1 - s0;
        buf.clear();
        buf.resize((t1 - t0) * w, 0.0);
        for i in t0..t1 {
            let x = self.f2.row(i);
            let row = &mut buf[(i - t0) * w..(i - t0 + 1) * w];
            for (r, j) in row.iter_mut().zip(s0..s1) {
                *r = c * sq_dist(x, self.f1.row(j));
            }
        }
    }

    fn check_source_rows(&self, b: &RowMatrix, what: &str) -> Result<()> {
        if b.rows() != self.n_source() {
            return Err(Error::dim(format!(
                "{what} has {} rows, the map has {} source vertices",
                b.rows(),
                self.n_source()
            )));
        }
        if !b.is_finite() {
            return Err(Error::NonFiniteInput(what.into()));
        }
        Ok(())
    }

    /// `Π·B` for `B` of shape `n₁ × d`.
    pub fn apply(&self, b: &RowMatrix) -> Result<RowMatrix> {
        self.check_source_rows(b, "applied matrix")?;
        Ok(self.apply_with_stats(b).0)
    }

    /// Forward reduction; also returns each target row's log normaliser.
    fn apply_with_stats(&self, b: &RowMatrix) -> (RowMatrix, RowStats) {
        let d = b.cols();
        let n2 = self.n_target();
        let tr = self.tiles.target_rows;
        let mut out = RowMatrix::zeros(n2, d);
        let mut lse = vec![0.0; n2];
        out.as_mut_slice()
            .par_chunks_mut(tr * d.max(1))
            .zip(lse.par_chunks_mut(tr))
            .enumerate()
            .for_each(|(tile, (out_tile, lse_tile))| {
                let t0 = tile * tr;
                let t1 = t0 + lse_tile.len();
                self.forward_tile(t0, t1, b, out_tile, lse_tile);
            });
        (out, RowStats { lse })
    }

    fn forward_tile(&self, t0: usize, t1: usize, b: &RowMatrix, out: &mut [f64], lse: &mut [f64]) {
        let d = b.cols();
        let n1 = self.n_source();
        let rows = t1 - t0;
        let mut run_max = vec![f64::NEG_INFINITY; rows];
        let mut run_sum = vec![0.0; rows];
        let mut buf = Vec::new();
        for s0 in (0..n1).step_by(self.tiles.source_rows) {
            let s1 = (s0 + self.tiles.source_rows).min(n1);
            let w = s1 - s0;
            self.logits(t0, t1, s0, s1, &mut buf);
            for r in 0..rows {
                let logits = &buf[r * w..(r + 1) * w];
                let block_max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let acc = &mut out[r * d..(r + 1) * d];
                if block_max > run_max[r] {
                    // rescale what has been accumulated so far
                    let f = (run_max[r] - block_max).exp();
                    run_sum[r] *= f;
                    acc.iter_mut().for_each(|v| *v *= f);
                    run_max[r] = block_max;
                }
                let m = run_max[r];
                for (l, j) in logits.iter().zip(s0..s1) {
                    let e = (l - m).exp();
                    if e == 0.0 {
                        continue;
                    }
                    run_sum[r] += e;
                    axpy(acc, e, b.row(j));
                }
            }
        }
        for r in 0..rows {
            let inv = 1.0 / run_sum[r];
            out[r * d..(r + 1) * d].iter_mut().for_each(|v| *v *= inv);
            lse[r] = run_max[r] + run_sum[r].ln();
        }
    }

    /// Gradient of `⟨G, Π·B⟩` with respect to the source and target
    /// features, returned as `(dF1, dF2)`.
    ///
    /// One pass recomputes the row normalisers (and `Π·B`), a second pass
    /// recomputes the kernel weights and accumulates both gradients.
    pub fn apply_adjoint(&self, g: &RowMatrix, b: &RowMatrix) -> Result<(RowMatrix, RowMatrix)> {
        self.check_source_rows(b, "adjoint source matrix")?;
        if g.rows() != self.n_target() || g.cols() != b.cols() {
            return Err(Error::dim(format!(
                "cotangent of shape {}x{} for a map with {} targets and width {}",
                g.rows(),
                g.cols(),
                self.n_target(),
                b.cols()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteInput("adjoint cotangent".into()));
        }
        let p = self.f1.cols();
        let (n1, n2) = (self.n_source(), self.n_target());
        if g.as_slice().iter().all(|&v| v == 0.0) {
            return Ok((RowMatrix::zeros(n1, p), RowMatrix::zeros(n2, p)));
        }
        let (pb, stats) = self.apply_with_stats(b);
        let r: Vec<f64> = (0..n2).map(|i| dot(g.row(i), pb.row(i))).collect();
        drop(pb);

        let tr = self.tiles.target_rows;
        let n_tiles = n2.div_ceil(tr);
        let per_group = n_tiles.div_ceil(ADJOINT_GROUPS);
        let inv_s2 = 1.0 / (self.sigma * self.sigma);

        let mut df2 = RowMatrix::zeros(n2, p);
        let groups: Vec<(usize, usize)> = (0..n_tiles)
            .step_by(per_group)
            .map(|g0| (g0, (g0 + per_group).min(n_tiles)))
            .collect();
        let mut df2_chunks: Vec<&mut [f64]> = Vec::with_capacity(groups.len());
        let mut rest = df2.as_mut_slice();
        for &(g0, g1) in &groups {
            let rows = (g1 * tr).min(n2) - g0 * tr;
            let (head, tail) = rest.split_at_mut(rows * p);
            df2_chunks.push(head);
            rest = tail;
        }
        let partial: Vec<(Vec<f64>, Vec<f64>)> = groups
            .par_iter()
            .zip(df2_chunks.into_par_iter())
            .map(|(&(g0, g1), df2_chunk)| {
                // source-side sums Σ_i w_ij x_i and Σ_i w_ij for this group
                let mut bx = vec![0.0; n1 * p];
                let mut bw = vec![0.0; n1];
                for tile in g0..g1 {
                    let t0 = tile * tr;
                    let t1 = (t0 + tr).min(n2);
                    let local = &mut df2_chunk[(t0 - g0 * tr) * p..(t1 - g0 * tr) * p];
                    self.adjoint_tile(t0, t1, g, b, &stats.lse, &r, local, &mut bx, &mut bw);
                }
                (bx, bw)
            })
            .collect();

        let mut df1 = RowMatrix::zeros(n1, p);
        for (bx, bw) in &partial {
            for j in 0..n1 {
                let y = self.f1.row(j);
                let out = df1.row_mut(j);
                for k in 0..p {
                    out[k] += bx[j * p + k] - bw[j] * y[k];
                }
            }
        }
        df1.scale(inv_s2);
        Ok((df1, df2))
    }

    #[allow(clippy::too_many_arguments)]
    fn adjoint_tile(
        &self,
        t0: usize,
        t1: usize,
        g: &RowMatrix,
        b: &RowMatrix,
        lse: &[f64],
        r: &[f64],
        df2: &mut [f64],
        bx: &mut [f64],
        bw: &mut [f64],
    ) {
        let p = self.f1.cols();
        let n1 = self.n_source();
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        let mut buf = Vec::new();
        let mut ay = vec![0.0; p];
        let rows = t1 - t0;
        let mut wsum = vec![0.0; rows];
        let mut ysum = vec![0.0; rows * p];
        for s0 in (0..n1).step_by(self.tiles.source_rows) {
            let s1 = (s0 + self.tiles.source_rows).min(n1);
            let w = s1 - s0;
            self.logits(t0, t1, s0, s1, &mut buf);
            for rr in 0..rows {
                let i = t0 + rr;
                let x = self.f2.row(i);
                let gi = g.row(i);
                let logits = &buf[rr * w..(rr + 1) * w];
                ay.iter_mut().for_each(|v| *v = 0.0);
                let mut ws = 0.0;
                for (l, j) in logits.iter().zip(s0..s1) {
                    let pij = (l - lse[i]).exp();
                    if pij == 0.0 {
                        continue;
                    }
                    let wij = pij * (dot(gi, b.row(j)) - r[i]);
                    if wij == 0.0 {
                        continue;
                    }
                    ws += wij;
                    let y = self.f1.row(j);
                    axpy(&mut ay, wij, y);
                    axpy(&mut bx[j * p..(j + 1) * p], wij, x);
                    bw[j] += wij;
                }
                wsum[rr] += ws;
                axpy(&mut ysum[rr * p..(rr + 1) * p], 1.0, &ay);
            }
        }
        for rr in 0..rows {
            let x = self.f2.row(t0 + rr);
            for k in 0..p {
                df2[rr * p + k] = -(wsum[rr] * x[k] - ysum[rr * p + k]) * inv_s2;
            }
        }
    }

    /// Row-wise argmax of `Π`: the nearest source feature for each target
    /// feature, ties going to the lowest source index.
    pub fn extract_pointwise(&self) -> VertexMap {
        let idx = nearest_neighbors(&self.f2, &self.f1, NnStrategy::Auto)
            .expect("feature widths were validated at construction");
        VertexMap {
            indices: idx,
        }
    }
}

/// Hard correspondence `T: S₂ → S₁`: entry `i` is the source vertex matched
/// to target vertex `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexMap {
    indices: Vec<usize>,
}

impl VertexMap {
    /// Checks every index against the source vertex count.
    pub fn new(indices: Vec<usize>, n_source: usize) -> Result<Self> {
        let m = Self { indices };
        m.check_source(n_source)?;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn check_source(&self, n_source: usize) -> Result<()> {
        if let Some((i, &j)) = self.indices.iter().enumerate().find(|(_, &j)| j >= n_source) {
            return Err(Error::dim(format!(
                "map entry {i} points to source vertex {j}, but the source has {n_source}"
            )));
        }
        Ok(())
    }

    /// Copy with a random `fraction` of entries reassigned uniformly in
    /// `0..n_source`.
    pub fn corrupted(&self, fraction: f64, n_source: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = ((fraction.clamp(0.0, 1.0) * self.len() as f64).round() as usize).min(self.len());
        let mut indices = self.indices.clone();
        for i in sample(&mut rng, self.len(), count) {
            indices[i] = rng.random_range(0..n_source);
        }
        Self { indices }
    }

    /// Fraction of entries equal to `other`.
    pub fn agreement(&self, other: &VertexMap) -> f64 {
        assert_eq!(self.len(), other.len());
        let same = self.indices.iter().zip(&other.indices).filter(|(a, b)| a == b).count();
        same as f64 / self.len().max(1) as f64
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::with_capacity(self.len() * 7);
        for i in &self.indices {
            s.push_str(&i.to_string());
            s.push('\n');
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut indices = Vec::new();
        for (no, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v = t
                .parse::<usize>()
                .map_err(|_| Error::parse("<vertex map>", format!("line {}: `{t}` is not an index", no + 1)))?;
            indices.push(v);
        }
        Ok(Self { indices })
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

/// Hard pullback: output row `i` is `B` row `vmap[i]`.
pub fn pointwise_apply(vmap: &VertexMap, b: &RowMatrix) -> Result<RowMatrix> {
    vmap.check_source(b.rows())?;
    let d = b.cols();
    let mut out = RowMatrix::zeros(vmap.len(), d);
    for (i, &j) in vmap.indices().iter().enumerate() {
        out.row_mut(i).copy_from_slice(b.row(j));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, seed: u64) -> RowMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RowMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Explicit row-softmax matrix times `B`.
    fn dense_apply(map: &ScalableSoftMap, b: &RowMatrix) -> RowMatrix {
        let (f1, f2) = (map.source_features(), map.target_features());
        let s2 = map.sigma() * map.sigma();
        let mut out = RowMatrix::zeros(f2.rows(), b.cols());
        for i in 0..f2.rows() {
            let logits: Vec<f64> = (0..f1.rows())
                .map(|j| {
                    let d: f64 = f2.row(i).iter().zip(f1.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
                    -d / (2.0 * s2)
                })
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for j in 0..f1.rows() {
                for k in 0..b.cols() {
                    out.row_mut(i)[k] += e[j] / z * b.get(j, k);
                }
            }
        }
        out
    }

    fn rel(a: &RowMatrix, b: &RowMatrix) -> f64 {
        let mut d = a.clone();
        d.add_scaled(-1.0, b);
        d.frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn two_point_example() {
        let f1 = RowMatrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let f2 = RowMatrix::from_vec(1, 1, vec![0.5]).unwrap();
        let map = ScalableSoftMap::new(f1, f2, 1.0).unwrap();
        let out = map.apply(&RowMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
        assert!((out.get(0, 0) - 0.5).abs() < 1e-15 && (out.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matches_dense_oracle_across_tiles() {
        let f1 = random(317, 8, 1);
        let f2 = random(203, 8, 2);
        let b = random(317, 16, 3);
        for tiles in [
            TileConfig::default(),
            TileConfig {
                target_rows: 7,
                source_rows: 13,
            },
        ] {
            let map = ScalableSoftMap::new(f1.clone(), f2.clone(), 0.3).unwrap().with_tiles(tiles);
            assert!(rel(&map.apply(&b).unwrap(), &dense_apply(&map, &b)) < 1e-12);
        }
    }

    #[test]
    fn rows_sum_to_one_and_sharp_limit() {
        let f = random(60, 3, 4);
        let map = ScalableSoftMap::new(f.clone(), f.clone(), 1e-4).unwrap();
        let ones = RowMatrix::from_fn(60, 1, |_, _| 1.0);
        let out = map.apply(&ones).unwrap();
        assert!(out.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let b = random(60, 5, 5);
        let pb = map.apply(&b).unwrap();
        let mut diff = pb.clone();
        diff.add_scaled(-1.0, &b);
        assert!(diff.as_slice().iter().all(|v| v.abs() <= 1e-8));
        assert_eq!(map.extract_pointwise(), VertexMap::identity(60));
    }

    #[test]
    fn extract_small_example() {
        let f1 = RowMatrix::from_vec(2, 1, vec![0.0, 10.0]).unwrap();
        let f2 = RowMatrix::from_vec(2, 1, vec![1.0, 9.0]).unwrap();
        let map = ScalableSoftMap::new(f1, f2, 1.0).unwrap();
        assert_eq!(map.extract_pointwise().indices(), &[0, 1]);
    }

    fn objective(f1: &RowMatrix, f2: &RowMatrix, sigma: f64, g: &RowMatrix, b: &RowMatrix) -> f64 {
        let map = ScalableSoftMap::new(f1.clone(), f2.clone(), sigma).unwrap();
        map.apply(b).unwrap().dot(g)
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let (n1, n2, p, d, sigma) = (97, 113, 5, 7, 0.5);
        let f1 = random(n1, p, 11);
        let f2 = random(n2, p, 12);
        let g = random(n2, d, 13);
        let b = random(n1, d, 14);
        let map = ScalableSoftMap::new(f1.clone(), f2.clone(), sigma)
            .unwrap()
            .with_tiles(TileConfig {
                target_rows: 10,
                source_rows: 17,
            });
        let (df1, df2) = map.apply_adjoint(&g, &b).unwrap();
        let h = 1e-5;
        for dir in 0..20 {
            let u1 = random(n1, p, 100 + dir);
            let u2 = random(n2, p, 200 + dir);
            let shift = |s: f64| {
                let mut a = f1.clone();
                a.add_scaled(s, &u1);
                let mut c = f2.clone();
                c.add_scaled(s, &u2);
                objective(&a, &c, sigma, &g, &b)
            };
            let fd = (shift(h) - shift(-h)) / (2.0 * h);
            let an = df1.dot(&u1) + df2.dot(&u2);
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-8), "dir {dir}: {fd} vs {an}");
        }
    }

    #[test]
    fn adjoint_degenerate_cases() {
        let f1 = random(30, 2, 1);
        let f2 = random(20, 2, 2);
        let b = random(30, 3, 3);
        let map = ScalableSoftMap::new(f1, f2, 1e3).unwrap();
        let (z1, z2) = map.apply_adjoint(&RowMatrix::zeros(20, 3), &b).unwrap();
        assert!(z1.frobenius_norm() == 0.0 && z2.frobenius_norm() == 0.0);
        let g = random(20, 3, 4);
        let (d1, _) = map.apply_adjoint(&g, &b).unwrap();
        assert!(d1.frobenius_norm() <= 1e-4 * g.frobenius_norm() * b.frobenius_norm());
        assert!(map.apply_adjoint(&random(19, 3, 0), &b).is_err());
    }

    #[test]
    fn constructor_validation() {
        let a = random(3, 2, 0);
        assert!(matches!(ScalableSoftMap::new(a.clone(), a.clone(), 0.0), Err(Error::Config(_))));
        assert!(ScalableSoftMap::new(a.clone(), random(3, 3, 0), 1.0).is_err());
        let mut bad = a.clone();
        bad.set(0, 0, f64::NAN);
        assert!(matches!(ScalableSoftMap::new(bad, a.clone(), 1.0), Err(Error::NonFiniteInput(_))));
        let map = ScalableSoftMap::new(a.clone(), a, 1.0).unwrap();
        assert!(map.apply(&random(4, 1, 0)).is_err());
    }

    #[test]
    fn vertex_map_io_and_pullback() {
        let m = VertexMap::new(vec![2, 0, 1, 1], 3).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "2\n0\n1\n1\n");
        assert_eq!(VertexMap::read_text(&buf[..]).unwrap(), m);
        assert!(VertexMap::read_text(&b"1\nx\n"[..]).is_err());
        assert!(VertexMap::new(vec![3], 3).is_err());

        let b = random(3, 2, 9);
        let out = pointwise_apply(&m, &b).unwrap();
        assert_eq!(out.row(0), b.row(2));
        assert_eq!(out.row(3), b.row(1));
        assert!(pointwise_apply(&m, &random(2, 2, 0)).is_err());

        let id = VertexMap::identity(1000);
        let c = id.corrupted(0.3, 1000, 4);
        let agree = id.agreement(&c);
        assert!(agree < 0.72 && agree > 0.69);
    }
}
