//! Direct optimisation of per-vertex features against the ZoomOut losses.

use std::io::Write;

use crate::descriptors::{normalize_l2, DescriptorSet};
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::spectral::EigenBasis;
use crate::zoomout::{differentiable_zoomout, loss_gradients, LossGradients, LossWeights, RefinementTrace, ZoomOutConfig};

/// Loss values recorded at one optimisation step.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub total: f64,
    pub orth: f64,
    pub consist: f64,
    pub lap: f64,
}

#[derive(Clone, Debug)]
pub struct OptimConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    /// Consistency weight at step 0 and after `ramp_steps`.
    pub consist_start: f64,
    pub consist_end: f64,
    pub ramp_steps: usize,
    pub w_orth: f64,
    pub w_lap: f64,
    pub stop_gradient_refined: bool,
    /// Number of leading descriptor columns used as features.
    pub p: usize,
    pub zoomout: ZoomOutConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
            consist_start: 1e-4,
            consist_end: 1e-1,
            ramp_steps: 200,
            w_orth: 1.0,
            w_lap: 1e2,
            stop_gradient_refined: false,
            p: 32,
            zoomout: ZoomOutConfig::default().soft(1e-2),
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.ramp_steps > self.steps {
            return bad(format!("ramp of {} steps is longer than the run ({})", self.ramp_steps, self.steps));
        }
        if !(self.consist_start > 0.0 && self.consist_start <= self.consist_end) {
            return bad(format!(
                "consistency schedule needs 0 < start <= end, got {} -> {}",
                self.consist_start, self.consist_end
            ));
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive".into());
        }
        let (b1, b2) = self.betas;
        if !(0.0 < b1 && b1 < 1.0 && 0.0 < b2 && b2 < 1.0) {
            return bad(format!("Adam betas must lie in (0, 1), got ({b1}, {b2})"));
        }
        if self.w_orth < 0.0 || self.w_lap < 0.0 {
            return bad("loss weights must be nonnegative".into());
        }
        if self.p == 0 {
            return bad("need at least one feature column".into());
        }
        Ok(())
    }

    /// Consistency weight at `step`, interpolated geometrically.
    pub fn consist_weight(&self, step: usize) -> f64 {
        if self.ramp_steps == 0 {
            return self.consist_end;
        }
        let t = (step as f64 / self.ramp_steps as f64).min(1.0);
        self.consist_start * (self.consist_end / self.consist_start).powf(t)
    }

    fn weights(&self, step: usize) -> LossWeights {
        LossWeights {
            orth: self.w_orth,
            consist: self.consist_weight(step),
            lap: self.w_lap,
            stop_gradient_refined: self.stop_gradient_refined,
        }
    }
}

/// Adam state for one parameter matrix.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
}

impl Adam {
    pub fn new(len: usize, lr: f64, betas: (f64, f64), eps: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            betas,
            eps,
        }
    }

    /// Bias-corrected update of `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let (b1, b2) = self.betas;
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub f1: RowMatrix,
    pub f2: RowMatrix,
    pub trace: RefinementTrace,
    /// One record per step plus the final evaluation.
    pub history: Vec<LossRecord>,
}

/// Initial features: the first `p` area-normalised descriptor columns.
pub fn initial_features(desc: &DescriptorSet, basis: &EigenBasis, p: usize) -> Result<RowMatrix> {
    if desc.n() != basis.n() {
        return Err(Error::dim(format!(
            "{} descriptor rows for a shape with {} vertices",
            desc.n(),
            basis.n()
        )));
    }
    Ok(normalize_l2(desc, basis.areas())?.leading(p)?.values)
}

pub fn optimize_features(
    b1: &EigenBasis,
    b2: &EigenBasis,
    init1: &DescriptorSet,
    init2: &DescriptorSet,
    cfg: &OptimConfig,
) -> Result<OptimResult> {
    optimize_features_with_hook(b1, b2, init1, init2, cfg, &mut |_, _, _, _| {})
}

/// As [`optimize_features`]; `hook(step, f1, f2, grads)` sees the features
/// and the gradients right before each update.
pub fn optimize_features_with_hook(
    b1: &EigenBasis,
    b2: &EigenBasis,
    init1: &DescriptorSet,
    init2: &DescriptorSet,
    cfg: &OptimConfig,
    hook: &mut dyn FnMut(usize, &RowMatrix, &RowMatrix, &LossGradients),
) -> Result<OptimResult> {
    cfg.validate()?;
    let mut f1 = initial_features(init1, b1, cfg.p)?;
    let mut f2 = initial_features(init2, b2, cfg.p)?;
    let mut adam1 = Adam::new(f1.as_slice().len(), cfg.learning_rate, cfg.betas, cfg.eps);
    let mut adam2 = Adam::new(f2.as_slice().len(), cfg.learning_rate, cfg.betas, cfg.eps);
    let mut history = Vec::with_capacity(cfg.steps + 1);

    let evaluate = |step: usize, f1: &RowMatrix, f2: &RowMatrix, history: &[LossRecord]| {
        match loss_gradients(f1, f2, b1, b2, &cfg.zoomout, &cfg.weights(step)) {
            Ok(g) if g.df1.is_finite() && g.df2.is_finite() => Ok(g),
            Ok(_) | Err(Error::NonFiniteInput(_)) => Err(Error::NonFiniteLoss {
                step,
                history: history.to_vec(),
            }),
            Err(e) => Err(e),
        }
    };
    let record = |step: usize, g: &LossGradients| LossRecord {
        step,
        total: g.loss.total,
        orth: g.loss.orth,
        consist: g.loss.consist,
        lap: g.loss.lap,
    };

    for step in 0..cfg.steps {
        let g = evaluate(step, &f1, &f2, &history)?;
        history.push(record(step, &g));
        hook(step, &f1, &f2, &g);
        adam1.step(f1.as_mut_slice(), g.df1.as_slice());
        adam2.step(f2.as_mut_slice(), g.df2.as_slice());
        if step % 10 == 0 {
            log::info!("step {step}: loss {:.6e}", g.loss.total);
        }
    }
    let last = evaluate(cfg.steps, &f1, &f2, &history)?;
    history.push(record(cfg.steps, &last));
    let trace = differentiable_zoomout(&f1, &f2, b1, b2, &cfg.zoomout)?.trace;
    Ok(OptimResult { f1, f2, trace, history })
}

/// Writes `step,total,orth,consist,lap` rows with a header.
pub fn write_loss_csv<W: Write>(history: &[LossRecord], mut w: W) -> Result<()> {
    writeln!(w, "step,total,orth,consist,lap")?;
    for r in history {
        writeln!(w, "{},{:e},{:e},{:e},{:e}", r.step, r.total, r.orth, r.consist, r.lap)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{wks, Provenance};
    use crate::mesh::{cotangent_laplacian, shapes, vertex_areas};
    use crate::spectral::compute_eigenbasis;

    fn setup() -> (EigenBasis, DescriptorSet) {
        let mesh = shapes::deform_asymmetric(&shapes::icosphere(2), 11);
        let b = compute_eigenbasis(&cotangent_laplacian(&mesh).unwrap(), &vertex_areas(&mesh).unwrap(), 20).unwrap();
        let d = wks(&b, 32, 7.0).unwrap();
        (b, d)
    }

    fn small_cfg(steps: usize) -> OptimConfig {
        OptimConfig {
            steps,
            ramp_steps: steps,
            p: 8,
            zoomout: ZoomOutConfig::new(4, 8, 4).soft(0.05),
            ..Default::default()
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut a = Adam::new(2, 0.1, (0.9, 0.999), 1e-8);
        let mut p = vec![1.0, -1.0];
        a.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
        let mut q = vec![2.0];
        Adam::new(1, 0.1, (0.9, 0.999), 1e-8).step(&mut q, &[0.0]);
        assert_eq!(q[0], 2.0);
    }

    #[test]
    fn schedule_is_geometric() {
        let c = OptimConfig {
            steps: 10,
            ramp_steps: 4,
            ..Default::default()
        };
        assert!((c.consist_weight(0) - 1e-4).abs() < 1e-18);
        assert!((c.consist_weight(2) - 10f64.powf(-2.5)).abs() < 1e-12);
        assert!((c.consist_weight(9) - 1e-1).abs() < 1e-15);
        assert!(OptimConfig { ramp_steps: 11, ..c.clone() }.validate().is_err());
    }

    #[test]
    fn zero_steps_returns_initialisation() {
        let (b, d) = setup();
        let r = optimize_features(&b, &b, &d, &d, &small_cfg(0)).unwrap();
        assert_eq!(r.f1, initial_features(&d, &b, 8).unwrap());
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn zero_weights_freeze_parameters_and_hook_sees_gradients() {
        let (b, d) = setup();
        let mut cfg = small_cfg(3);
        cfg.w_orth = 0.0;
        cfg.w_lap = 0.0;
        cfg.consist_start = 1e-300;
        cfg.consist_end = 1e-300;
        let mut seen = 0;
        let r = optimize_features_with_hook(&b, &b, &d, &d, &cfg, &mut |step, f1, f2, g| {
            let direct = loss_gradients(f1, f2, &b, &b, &cfg.zoomout, &cfg.weights(step)).unwrap();
            assert_eq!(direct.df1, g.df1);
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 3);
        let init = initial_features(&d, &b, 8).unwrap();
        let mut diff = r.f1.clone();
        diff.add_scaled(-1.0, &init);
        assert!(diff.frobenius_norm() < 1e-200);
    }

    #[test]
    fn csv_format() {
        let h = vec![LossRecord {
            step: 0,
            total: 1.5,
            orth: 1.0,
            consist: 0.0,
            lap: 0.005,
        }];
        let mut buf = Vec::new();
        write_loss_csv(&h, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "step,total,orth,consist,lap");
        assert_eq!(s.lines().count(), 2);
        let _ = Provenance::External;
    }
}
