//! ZoomOut map refinement and its differentiable soft-map variant.
//!
//! Each iteration pulls the current pointwise map back to a functional map
//! of size `k`, then converts that map into a new pointwise map by comparing
//! spectral embeddings, with `k` growing by `step` every time.

mod diff;
mod losses;

use std::path::Path;

use crate::error::{Error, Result};
use crate::fmap::{fmap_to_pointwise_with, pullback, ConversionMode, FunctionalMap, OwnedPointMap, PointMap};
use crate::matrix::RowMatrix;
use crate::nn::NnStrategy;
use crate::softmap::{ScalableSoftMap, VertexMap};
use crate::spectral::EigenBasis;

pub use diff::{loss_gradients, LossBreakdown, LossGradients, LossWeights};
pub use losses::{consistency_loss, laplacian_commutativity_loss, orthogonality_loss, resolvent_mask};

/// How each iteration turns a functional map into a pointwise map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RefineMode {
    /// Exact nearest neighbours.
    #[default]
    Hard,
    /// Soft map with the configured blur.
    Soft,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoomOutConfig {
    pub k_init: usize,
    pub k_final: usize,
    pub step: usize,
    pub sigma: f64,
    pub mode: RefineMode,
    /// Keep every intermediate functional map, not only the last one.
    pub keep_snapshots: bool,
    pub nn: NnStrategy,
}

impl Default for ZoomOutConfig {
    fn default() -> Self {
        Self {
            k_init: 30,
            k_final: 130,
            step: 10,
            sigma: 1e-2,
            mode: RefineMode::Hard,
            keep_snapshots: true,
            nn: NnStrategy::Auto,
        }
    }
}

impl ZoomOutConfig {
    pub fn new(k_init: usize, k_final: usize, step: usize) -> Self {
        Self {
            k_init,
            k_final,
            step,
            ..Self::default()
        }
    }

    pub fn soft(mut self, sigma: f64) -> Self {
        self.mode = RefineMode::Soft;
        self.sigma = sigma;
        self
    }

    /// Checks the schedule against the available basis sizes.
    pub fn validate(&self, k1_available: usize, k2_available: usize) -> Result<()> {
        if self.k_init < 2 {
            return Err(Error::Config(format!("k_init must be at least 2, got {}", self.k_init)));
        }
        if self.step < 1 {
            return Err(Error::Config("step must be at least 1".into()));
        }
        if self.k_final < self.k_init {
            return Err(Error::Config(format!(
                "k_final {} is smaller than k_init {}",
                self.k_final, self.k_init
            )));
        }
        let avail = k1_available.min(k2_available);
        if self.k_final > avail {
            return Err(Error::Config(format!(
                "k_final {} exceeds the available basis size {avail}",
                self.k_final
            )));
        }
        if self.mode == RefineMode::Soft && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Basis sizes visited: `k_init, k_init + step, …` up to `k_final`.
    pub fn sizes(&self) -> Vec<usize> {
        (self.k_init..=self.k_final).step_by(self.step.max(1)).collect()
    }

    fn conversion(&self) -> ConversionMode {
        match self.mode {
            RefineMode::Hard => ConversionMode::Hard,
            RefineMode::Soft => ConversionMode::Soft { sigma: self.sigma },
        }
    }
}

/// Result of a refinement run.
#[derive(Clone, Debug)]
pub struct RefinementTrace {
    /// Basis size of every iteration.
    pub sizes: Vec<usize>,
    /// Functional map of every iteration (only the last one unless
    /// snapshots are kept).
    pub snapshots: Vec<FunctionalMap>,
    /// Pointwise map induced by the last functional map.
    pub final_map: OwnedPointMap,
}

impl RefinementTrace {
    pub fn final_fmap(&self) -> &FunctionalMap {
        self.snapshots.last().expect("a trace has at least one snapshot")
    }

    pub fn final_vertex_map(&self) -> VertexMap {
        self.final_map.to_vertex_map()
    }

    /// Writes one functional-map file per snapshot as `{prefix}_k{size}.txt`.
    pub fn dump(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let prefix = prefix.as_ref().to_string_lossy().into_owned();
        for c in &self.snapshots {
            c.save(format!("{prefix}_k{}.txt", c.k2()))?;
        }
        Ok(())
    }
}

fn check_init(init: PointMap<'_>, b1: &EigenBasis, b2: &EigenBasis) -> Result<()> {
    let (n1, n2) = match init {
        PointMap::Hard(v) => {
            v.check_source(b1.n())?;
            (b1.n(), v.len())
        }
        PointMap::Soft(s) => (s.n_source(), s.n_target()),
    };
    if n1 != b1.n() || n2 != b2.n() {
        return Err(Error::dim(format!(
            "initial map is {n2}x{n1}, bases cover {} and {} vertices",
            b2.n(),
            b1.n()
        )));
    }
    Ok(())
}

/// Refines `init` (a map from `S₂` to `S₁`) following the schedule in
/// `cfg`. Every emitted functional map is the pullback of the pointwise map
/// current at that iteration.
pub fn zoomout(init: PointMap<'_>, b1: &EigenBasis, b2: &EigenBasis, cfg: &ZoomOutConfig) -> Result<RefinementTrace> {
    cfg.validate(b1.k(), b2.k())?;
    check_init(init, b1, b2)?;
    let sizes = cfg.sizes();
    let mut snapshots = Vec::with_capacity(if cfg.keep_snapshots { sizes.len() } else { 1 });
    let mut current: Option<OwnedPointMap> = None;
    for &k in &sizes {
        let map = current.as_ref().map_or(init, |m| m.as_ref());
        let c = pullback(b1, b2, map, k, k)?;
        let hints = match &current {
            Some(OwnedPointMap::Hard(v)) => Some(v),
            _ => match init {
                PointMap::Hard(v) if current.is_none() => Some(v),
                _ => None,
            },
        };
        let next = fmap_to_pointwise_with(&c, b1, b2, cfg.conversion(), cfg.nn, hints)?;
        log::debug!("zoomout: k = {k}");
        if !cfg.keep_snapshots {
            snapshots.clear();
        }
        snapshots.push(c);
        current = Some(next);
    }
    Ok(RefinementTrace {
        sizes,
        snapshots,
        final_map: current.expect("schedule is never empty"),
    })
}

/// Output of [`differentiable_zoomout`].
#[derive(Clone, Debug)]
pub struct DifferentiableOutput {
    pub c_init: FunctionalMap,
    pub c_refined: FunctionalMap,
    pub trace: RefinementTrace,
}

/// Soft-map ZoomOut started from the feature-based soft map between `f1`
/// (source) and `f2` (target). `c_init` is the first snapshot (size
/// `k_init`) and `c_refined` the last.
pub fn differentiable_zoomout(
    f1: &RowMatrix,
    f2: &RowMatrix,
    b1: &EigenBasis,
    b2: &EigenBasis,
    cfg: &ZoomOutConfig,
) -> Result<DifferentiableOutput> {
    if cfg.mode != RefineMode::Soft {
        return Err(Error::Config("differentiable ZoomOut needs soft mode".into()));
    }
    let init = ScalableSoftMap::new(f1.clone(), f2.clone(), cfg.sigma)?;
    let mut keep = cfg.clone();
    keep.keep_snapshots = true;
    let mut trace = zoomout(PointMap::Soft(&init), b1, b2, &keep)?;
    let c_init = trace.snapshots[0].clone();
    let c_refined = trace.final_fmap().clone();
    if !cfg.keep_snapshots {
        trace.snapshots.drain(..trace.snapshots.len() - 1);
    }
    Ok(DifferentiableOutput {
        c_init,
        c_refined,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cotangent_laplacian, shapes, vertex_areas};
    use crate::spectral::compute_eigenbasis;
    use faer::Mat;

    fn basis(mesh: &crate::mesh::TriangleMesh, k: usize) -> EigenBasis {
        compute_eigenbasis(&cotangent_laplacian(mesh).unwrap(), &vertex_areas(mesh).unwrap(), k).unwrap()
    }

    #[test]
    fn config_validation_and_sizes() {
        let cfg = ZoomOutConfig::default();
        assert_eq!(cfg.sizes().len(), 11);
        assert_eq!(*cfg.sizes().last().unwrap(), 130);
        assert_eq!(ZoomOutConfig::new(10, 45, 10).sizes(), vec![10, 20, 30, 40]);
        assert!(ZoomOutConfig::new(1, 5, 1).validate(10, 10).is_err());
        assert!(ZoomOutConfig::new(5, 4, 1).validate(10, 10).is_err());
        assert!(ZoomOutConfig::new(5, 12, 1).validate(20, 11).is_err());
        assert!(ZoomOutConfig::new(5, 10, 0).validate(20, 20).is_err());
        assert!(ZoomOutConfig::new(2, 10, 2).soft(0.0).validate(20, 20).is_err());
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let mesh = shapes::deform_asymmetric(&shapes::icosphere(2), 7);
        let b = basis(&mesh, 30);
        let id = VertexMap::identity(b.n());
        let trace = zoomout(PointMap::Hard(&id), &b, &b, &ZoomOutConfig::new(10, 30, 10)).unwrap();
        assert_eq!(trace.sizes, vec![10, 20, 30]);
        for c in &trace.snapshots {
            let k = c.k1();
            assert!((c.matrix() - Mat::<f64>::identity(k, k)).norm_max() < 1e-8);
        }
        assert_eq!(trace.final_vertex_map(), id);
    }

    #[test]
    fn soft_forward_matches_trace() {
        let mesh = shapes::deform_asymmetric(&shapes::icosphere(2), 9);
        let b = basis(&mesh, 12);
        let f = b.embedding();
        let cfg = ZoomOutConfig::new(4, 12, 4).soft(0.05);
        let out = differentiable_zoomout(&f, &f, &b, &b, &cfg).unwrap();
        let init = ScalableSoftMap::new(f.clone(), f.clone(), 0.05).unwrap();
        let trace = zoomout(PointMap::Soft(&init), &b, &b, &cfg).unwrap();
        assert_eq!(out.c_init.matrix(), trace.snapshots[0].matrix());
        assert_eq!(out.c_refined.matrix(), trace.final_fmap().matrix());
        assert_eq!((out.c_refined.k2(), out.c_refined.k1()), (12, 12));
        assert!(differentiable_zoomout(&f, &f, &b, &b, &ZoomOutConfig::new(4, 12, 4)).is_err());
    }

    #[test]
    fn snapshot_retention_flag() {
        let mesh = shapes::icosphere(2);
        let b = basis(&mesh, 20);
        let id = VertexMap::identity(b.n());
        let mut cfg = ZoomOutConfig::new(5, 20, 5);
        cfg.keep_snapshots = false;
        let t = zoomout(PointMap::Hard(&id), &b, &b, &cfg).unwrap();
        assert_eq!(t.snapshots.len(), 1);
        assert_eq!(t.final_fmap().k1(), 20);
        let dir = tempfile::tempdir().unwrap();
        t.dump(dir.path().join("trace")).unwrap();
        assert!(dir.path().join("trace_k20.txt").exists());
    }
}
