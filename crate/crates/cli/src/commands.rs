use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use fmap_core::descriptors::{normalize_l2, wks, DescriptorSet};
use fmap_core::eval::{bench_refinement, mean_geodesic_error, write_bench_csv};
use fmap_core::fmap::PointMap;
use fmap_core::mesh::{load_mesh, TriangleMesh};
use fmap_core::nn::{nearest_neighbors, NnStrategy};
use fmap_core::optim::{optimize_features, write_loss_csv, OptimConfig};
use fmap_core::softmap::VertexMap;
use fmap_core::spectral::{cached_eigenbasis, save_basis, EigenBasis, EigenOptions};
use fmap_core::zoomout::{zoomout, RefinementTrace, ZoomOutConfig};
use fmap_core::{Error, Result};

use crate::{Cli, Command, DescArgs, Mode, PairArgs, ZoomArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Precompute { mesh, k, out } => {
            let m = load_mesh(mesh)?;
            let basis = basis_for(cli, &m, *k, mesh)?;
            if let Some(out) = out {
                save_basis(&basis, out)?;
            }
            Ok(())
        }
        Command::Match {
            pair,
            zoom,
            desc,
            out,
            fmap_out,
        } => {
            let cfg = zoom_config(zoom);
            check_pair(pair, &cfg)?;
            check_desc(desc, pair.k)?;
            let (m1, m2) = (load_mesh(&pair.src)?, load_mesh(&pair.tgt)?);
            let b1 = basis_for(cli, &m1, pair.k, &pair.src)?;
            let b2 = basis_for(cli, &m2, pair.k, &pair.tgt)?;
            let f1 = features(&b1, desc)?;
            let f2 = features(&b2, desc)?;
            let init = VertexMap::new(
                nearest_neighbors(&f2.values, &f1.values, NnStrategy::Auto)?,
                b1.n(),
            )?;
            let trace = zoomout(PointMap::Hard(&init), &b1, &b2, &cfg)?;
            write_outputs(&trace, out, fmap_out.as_deref())
        }
        Command::Refine {
            pair,
            zoom,
            init_map,
            out,
            fmap_out,
        } => {
            let cfg = zoom_config(zoom);
            check_pair(pair, &cfg)?;
            let init = VertexMap::load(init_map)?;
            let (m1, m2) = (load_mesh(&pair.src)?, load_mesh(&pair.tgt)?);
            init.check_source(m1.n_vertices())?;
            if init.len() != m2.n_vertices() {
                return Err(Error::DimensionMismatch(format!(
                    "initial map has {} entries, target mesh has {} vertices",
                    init.len(),
                    m2.n_vertices()
                )));
            }
            let b1 = basis_for(cli, &m1, pair.k, &pair.src)?;
            let b2 = basis_for(cli, &m2, pair.k, &pair.tgt)?;
            let trace = zoomout(PointMap::Hard(&init), &b1, &b2, &cfg)?;
            write_outputs(&trace, out, fmap_out.as_deref())
        }
        Command::Optimize {
            pair,
            zoom,
            desc,
            steps,
            lr,
            consist_start,
            consist_end,
            ramp_steps,
            w_orth,
            w_lap,
            desc_src,
            desc_tgt,
            out_prefix,
        } => {
            let mut zcfg = zoom_config(zoom);
            zcfg.mode = fmap_core::zoomout::RefineMode::Soft;
            let cfg = OptimConfig {
                steps: *steps,
                learning_rate: *lr,
                consist_start: *consist_start,
                consist_end: *consist_end,
                ramp_steps: ramp_steps.unwrap_or(*steps),
                w_orth: *w_orth,
                w_lap: *w_lap,
                p: desc.p,
                zoomout: zcfg,
                ..Default::default()
            };
            cfg.validate()?;
            check_pair(pair, &cfg.zoomout)?;
            let external = desc_src.as_ref().zip(desc_tgt.as_ref());
            if external.is_none() {
                check_desc(desc, pair.k)?;
            }
            let (m1, m2) = (load_mesh(&pair.src)?, load_mesh(&pair.tgt)?);
            let b1 = basis_for(cli, &m1, pair.k, &pair.src)?;
            let b2 = basis_for(cli, &m2, pair.k, &pair.tgt)?;
            let (d1, d2) = match external {
                Some((a, b)) => (DescriptorSet::load(a)?, DescriptorSet::load(b)?),
                None => (wks_set(&b1, desc)?, wks_set(&b2, desc)?),
            };
            if d1.q() < cfg.p || d2.q() < cfg.p {
                return Err(Error::Config(format!(
                    "need {} descriptor columns, got {} and {}",
                    cfg.p,
                    d1.q(),
                    d2.q()
                )));
            }
            let prefix = out_prefix.to_string_lossy().into_owned();
            let loss_path = PathBuf::from(format!("{prefix}_loss.csv"));
            let res = match optimize_features(&b1, &b2, &d1, &d2, &cfg) {
                Ok(r) => r,
                Err(Error::NonFiniteLoss { step, history }) => {
                    write_loss_csv(&history, BufWriter::new(File::create(&loss_path)?))?;
                    return Err(Error::NonFiniteLoss { step, history });
                }
                Err(e) => return Err(e),
            };
            res.f1.save_fmat(format!("{prefix}_f1.fmat"))?;
            res.f2.save_fmat(format!("{prefix}_f2.fmat"))?;
            write_loss_csv(&res.history, BufWriter::new(File::create(&loss_path)?))?;
            write_outputs(
                &res.trace,
                Path::new(&format!("{prefix}_map.txt")),
                Some(Path::new(&format!("{prefix}_fmap.txt"))),
            )
        }
        Command::Eval {
            pred,
            gt,
            mesh,
            pck,
            errors_out,
        } => {
            if pck.iter().any(|t| !(*t >= 0.0)) || pck.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Config("PCK thresholds must be nonnegative and ascending".into()));
            }
            let pred = VertexMap::load(pred)?;
            let gt = VertexMap::load(gt)?;
            let m = load_mesh(mesh)?;
            let report = mean_geodesic_error(&pred, &gt, &m)?.with_pck(pck);
            if let Some(p) = errors_out {
                report.write_csv(BufWriter::new(File::create(p)?))?;
            }
            let pck_map: BTreeMap<String, f64> = report.pck.iter().map(|(t, f)| (t.to_string(), *f)).collect();
            let summary = serde_json::json!({
                "mean_x100": report.mean_x100,
                "n": report.n(),
                "pck": pck_map,
            });
            println!("{summary}");
            Ok(())
        }
        Command::Bench {
            sizes,
            reps,
            zoom,
            budget_secs,
        } => {
            let cfg = zoom_config(zoom);
            cfg.validate(cfg.k_final, cfg.k_final)?;
            if *reps == 0 || sizes.is_empty() {
                return Err(Error::Config("need at least one size and one repetition".into()));
            }
            let budget = match budget_secs {
                Some(s) if !(*s > 0.0 && s.is_finite()) => {
                    return Err(Error::Config(format!("budget must be positive, got {s}")));
                }
                s => s.map(Duration::from_secs_f64),
            };
            let rows = bench_refinement(sizes, &cfg, *reps, budget, cli.seed)?;
            let stdout = std::io::stdout();
            write_bench_csv(&rows, stdout.lock())?;
            Ok(())
        }
    }
}

fn zoom_config(z: &ZoomArgs) -> ZoomOutConfig {
    let mut cfg = ZoomOutConfig::new(z.k_init, z.k_final, z.step);
    cfg.sigma = z.sigma;
    if z.mode == Mode::Soft {
        cfg = cfg.soft(z.sigma);
    }
    cfg.keep_snapshots = false;
    cfg
}

fn check_pair(pair: &PairArgs, cfg: &ZoomOutConfig) -> Result<()> {
    cfg.validate(pair.k, pair.k)
}

fn check_desc(desc: &DescArgs, k: usize) -> Result<()> {
    if desc.p == 0 || desc.p > desc.wks_q {
        return Err(Error::Config(format!(
            "p = {} must lie in 1..={} (the WKS count)",
            desc.p, desc.wks_q
        )));
    }
    if desc.wks_k < 3 || desc.wks_k > k {
        return Err(Error::Config(format!(
            "WKS eigenfunction count {} must lie in 3..={k}",
            desc.wks_k
        )));
    }
    Ok(())
}

fn basis_for(cli: &Cli, mesh: &TriangleMesh, k: usize, path: &Path) -> Result<EigenBasis> {
    let dir = (!cli.no_cache).then_some(cli.cache_dir.as_path());
    let (basis, hit) = cached_eigenbasis(mesh, k, dir, &EigenOptions::default())?;
    if hit {
        log::info!("cache hit: eigenbasis of {} (k = {k})", path.display());
    } else {
        log::info!("computed eigenbasis of {} (k = {k})", path.display());
    }
    Ok(basis)
}

fn wks_set(basis: &EigenBasis, desc: &DescArgs) -> Result<DescriptorSet> {
    wks(&basis.truncate(desc.wks_k)?, desc.wks_q, desc.wks_variance)
}

fn features(basis: &EigenBasis, desc: &DescArgs) -> Result<DescriptorSet> {
    normalize_l2(&wks_set(basis, desc)?, basis.areas())?.leading(desc.p)
}

fn write_outputs(trace: &RefinementTrace, out: &Path, fmap_out: Option<&Path>) -> Result<()> {
    trace.final_vertex_map().save(out)?;
    if let Some(p) = fmap_out {
        trace.final_fmap().save(p)?;
    }
    log::info!("wrote {}", out.display());
    Ok(())
}
