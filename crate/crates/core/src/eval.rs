//! Correspondence error metrics and the refinement benchmark.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::alloc;
use crate::error::{Error, Result};
use crate::fmap::PointMap;
use crate::mesh::geodesic::dijkstra;
use crate::mesh::{cotangent_laplacian, shapes, vertex_areas, TriangleMesh};
use crate::softmap::VertexMap;
use crate::spectral::{compute_eigenbasis, EigenBasis};
use crate::zoomout::{zoomout, ZoomOutConfig};

/// Per-vertex geodesic errors of a map into `S₁`, normalised by
/// `√area(S₁)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub errors: Vec<f64>,
    pub mean_x100: f64,
    /// `(threshold, fraction)` samples, filled by [`ErrorReport::with_pck`].
    pub pck: Vec<(f64, f64)>,
}

impl ErrorReport {
    pub fn from_errors(errors: Vec<f64>) -> Self {
        let mean = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
        Self {
            errors,
            mean_x100: 100.0 * mean,
            pck: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.errors.len()
    }

    pub fn with_pck(mut self, thresholds: &[f64]) -> Self {
        self.pck = thresholds.iter().copied().zip(pck_curve(&self, thresholds)).collect();
        self
    }

    /// `vertex,error` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "vertex,error")?;
        for (i, e) in self.errors.iter().enumerate() {
            writeln!(w, "{i},{e:e}")?;
        }
        Ok(())
    }
}

/// Geodesic error of `pred` against `gt`, both maps from `S₂` into `mesh1`.
pub fn mean_geodesic_error(pred: &VertexMap, gt: &VertexMap, mesh1: &TriangleMesh) -> Result<ErrorReport> {
    if pred.len() != gt.len() {
        return Err(Error::dim(format!(
            "predicted map has {} entries, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let n1 = mesh1.n_vertices();
    pred.check_source(n1)?;
    gt.check_source(n1)?;

    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, (&p, &g)) in pred.indices().iter().zip(gt.indices()).enumerate() {
        if p != g {
            by_source.entry(g).or_default().push(i);
        }
    }
    let adj = mesh1.edge_graph();
    let scale = 1.0 / mesh1.total_area().sqrt();
    let groups: Vec<(usize, Vec<usize>)> = by_source.into_iter().collect();
    let per_group: Vec<Result<Vec<(usize, f64)>>> = groups
        .par_iter()
        .map(|(src, targets)| {
            let d = dijkstra(&adj, *src);
            targets
                .iter()
                .map(|&i| {
                    let v = d[pred.indices()[i]];
                    if v.is_finite() {
                        Ok((i, v * scale))
                    } else {
                        Err(Error::DisconnectedMesh {
                            source_vertex: *src,
                            unreachable: d.iter().filter(|x| x.is_infinite()).count(),
                        })
                    }
                })
                .collect()
        })
        .collect();
    let mut errors = vec![0.0; pred.len()];
    for group in per_group {
        for (i, e) in group? {
            errors[i] = e;
        }
    }
    Ok(ErrorReport::from_errors(errors))
}

/// Fraction of errors at or below each threshold.
pub fn pck_curve(report: &ErrorReport, thresholds: &[f64]) -> Vec<f64> {
    let mut sorted = report.errors.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / n)
        .collect()
}

/// One benchmark cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    /// Mean refinement wall time in seconds.
    pub wall_secs: f64,
    /// Highest transient allocation during refinement, in bytes.
    pub peak_bytes: usize,
    /// Largest single allocation during refinement, in bytes.
    pub largest_alloc: usize,
}

/// Shape pair used by the benchmark: a geodesic sphere with about `n`
/// vertices and a relabelled copy, their bases and the true map.
pub struct BenchFixture {
    pub mesh1: TriangleMesh,
    pub basis1: EigenBasis,
    pub basis2: EigenBasis,
    pub ground_truth: VertexMap,
}

impl BenchFixture {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        let mesh1 = shapes::sphere_with_vertices(n);
        let basis1 = compute_eigenbasis(&cotangent_laplacian(&mesh1)?, &vertex_areas(&mesh1)?, k)?;
        let order = shapes::random_permutation(mesh1.n_vertices(), seed);
        let basis2 = basis1.permuted(&order)?;
        let ground_truth = VertexMap::new(order, mesh1.n_vertices())?;
        Ok(Self {
            mesh1,
            basis1,
            basis2,
            ground_truth,
        })
    }

    /// Ground truth with 30% of the entries reassigned at random.
    pub fn initial_map(&self, seed: u64) -> VertexMap {
        self.ground_truth.corrupted(0.3, self.mesh1.n_vertices(), seed)
    }
}

/// Times ZoomOut from a corrupted ground-truth map on one fixture.
pub fn bench_fixture(
    fx: &BenchFixture,
    cfg: &ZoomOutConfig,
    reps: usize,
    budget: Option<Duration>,
    seed: u64,
) -> Result<BenchRow> {
    let size = fx.mesh1.n_vertices();
    let init = fx.initial_map(seed);
    let mut total = 0.0;
    let mut peak = 0;
    let mut largest = 0;
    for _ in 0..reps.max(1) {
        let base = alloc::reset();
        let t0 = Instant::now();
        let trace = zoomout(PointMap::Hard(&init), &fx.basis1, &fx.basis2, cfg)?;
        let dt = t0.elapsed();
        let s = alloc::stats();
        drop(trace);
        peak = peak.max(s.transient_peak(&base));
        largest = largest.max(s.largest);
        if let Some(b) = budget {
            if dt > b {
                return Err(Error::OutOfBudget {
                    size,
                    budget_secs: b.as_secs_f64(),
                });
            }
        }
        total += dt.as_secs_f64();
    }
    Ok(BenchRow {
        size,
        wall_secs: total / reps.max(1) as f64,
        peak_bytes: peak,
        largest_alloc: largest,
    })
}

/// Runs [`bench_fixture`] on a sphere pair for every requested size, one
/// cell after another. Eigenbases are computed outside the timed region.
pub fn bench_refinement(
    sizes: &[usize],
    cfg: &ZoomOutConfig,
    reps: usize,
    budget: Option<Duration>,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let fx = BenchFixture::new(n, cfg.k_final, seed)?;
        let row = bench_fixture(&fx, cfg, reps, budget, seed.wrapping_add(1))?;
        log::info!("bench: n = {}, {:.3} s, {} bytes", row.size, row.wall_secs, row.peak_bytes);
        rows.push(row);
    }
    Ok(rows)
}

/// `size,wall_secs,peak_bytes` rows with a header.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut w: W) -> Result<()> {
    writeln!(w, "size,wall_secs,peak_bytes")?;
    for r in rows {
        writeln!(w, "{},{:.6},{}", r.size, r.wall_secs, r.peak_bytes)?;
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
