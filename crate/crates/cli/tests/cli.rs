use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fmap_core::fmap::FunctionalMap;
use fmap_core::mesh::{shapes, write_off, TriangleMesh};
use fmap_core::softmap::VertexMap;

fn fmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmap"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_mesh(dir: &Path, name: &str, mesh: &TriangleMesh) -> PathBuf {
    let p = dir.join(name);
    write_off(mesh, File::create(&p).unwrap()).unwrap();
    p
}

fn shape() -> TriangleMesh {
    shapes::deform_asymmetric(&shapes::icosphere(3), 2)
}

#[test]
fn self_match_with_defaults_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let m = shape();
    write_mesh(dir.path(), "a.off", &m);
    let o = fmap(
        dir.path(),
        &["match", "--src", "a.off", "--tgt", "a.off", "--out", "map.txt", "--fmap-out", "c.txt"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let map = VertexMap::load(dir.path().join("map.txt")).unwrap();
    assert!(map.agreement(&VertexMap::identity(m.n_vertices())) >= 0.99);
    let c = FunctionalMap::load(dir.path().join("c.txt")).unwrap();
    assert_eq!((c.k2(), c.k1()), (130, 130));

    // second run reads both bases from the cache and reproduces the output
    let o2 = fmap(
        dir.path(),
        &["match", "--src", "a.off", "--tgt", "a.off", "--out", "map2.txt"],
    );
    assert!(o2.status.success(), "{}", stderr(&o2));
    assert_eq!(stderr(&o).matches("computed eigenbasis").count(), 1);
    assert_eq!(stderr(&o2).matches("cache hit").count(), 2);
    assert!(!stderr(&o2).contains("computed eigenbasis"));
    assert_eq!(
        std::fs::read(dir.path().join("map.txt")).unwrap(),
        std::fs::read(dir.path().join("map2.txt")).unwrap()
    );
}

#[test]
fn refine_eval_and_permuted_match() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = shape();
    let n = m1.n_vertices();
    let order = shapes::random_permutation(n, 3);
    let m2 = m1.permuted(&order).unwrap();
    write_mesh(dir.path(), "s.off", &m1);
    write_mesh(dir.path(), "t.off", &m2);
    let gt = VertexMap::new(order, n).unwrap();
    gt.save(dir.path().join("gt.txt")).unwrap();
    gt.corrupted(0.2, n, 5).save(dir.path().join("init.txt")).unwrap();

    let small = ["--k", "60", "--k-init", "10", "--k-final", "40", "--step", "10", "--no-cache"];
    let mut args = vec!["refine", "--src", "s.off", "--tgt", "t.off", "--init-map", "init.txt", "--out", "ref.txt"];
    args.extend(small);
    let o = fmap(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let refined = VertexMap::load(dir.path().join("ref.txt")).unwrap();
    assert!(refined.agreement(&gt) >= 0.99);

    let o = fmap(dir.path(), &["eval", "--pred", "gt.txt", "--gt", "gt.txt", "--mesh", "s.off", "--pck", "0,0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mean_x100"].as_f64(), Some(0.0));
    assert_eq!(v["n"].as_u64(), Some(n as u64));
    assert_eq!(v["pck"]["0"].as_f64(), Some(1.0));

    let o = fmap(
        dir.path(),
        &["eval", "--pred", "init.txt", "--gt", "gt.txt", "--mesh", "s.off", "--errors-out", "e.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["mean_x100"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(csv.lines().count(), n + 1);

    let mut args = vec!["match", "--src", "s.off", "--tgt", "t.off", "--out", "m.txt", "--wks-k", "60"];
    args.extend(small);
    let o = fmap(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let matched = VertexMap::load(dir.path().join("m.txt")).unwrap();
    assert!(matched.agreement(&gt) >= 0.99);
}

#[test]
fn optimize_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let m = shapes::deform_asymmetric(&shapes::icosphere(2), 4);
    write_mesh(dir.path(), "a.off", &m);
    let o = fmap(
        dir.path(),
        &[
            "optimize", "--src", "a.off", "--tgt", "a.off", "--k", "40", "--k-init", "8", "--k-final", "16", "--step",
            "4", "--wks-k", "40", "--wks-q", "32", "--p", "8", "--steps", "3", "--sigma", "0.3", "--out-prefix", "run",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for suffix in ["_f1.fmat", "_f2.fmat", "_map.txt", "_fmap.txt"] {
        assert!(dir.path().join(format!("run{suffix}")).exists(), "missing {suffix}");
    }
    let csv = std::fs::read_to_string(dir.path().join("run_loss.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,total,orth,consist,lap"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn bench_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = fmap(
        dir.path(),
        &["bench", "--sizes", "500,1000", "--reps", "1", "--k-init", "10", "--k-final", "20", "--step", "10"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "size,wall_secs,peak_bytes");
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 3);
        assert!(cols[1].parse::<f64>().unwrap() > 0.0);
        assert!(cols[2].parse::<u64>().unwrap() > 0);
    }
}

#[test]
fn errors_carry_category_prefix() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.off"), "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
    let o = fmap(dir.path(), &["precompute", "--mesh", "bad.off", "--k", "3", "--no-cache"]);
    assert!(!o.status.success());
    assert!(stderr(&o).lines().last().unwrap().starts_with("E_PARSE:"), "{}", stderr(&o));

    let o = fmap(dir.path(), &["precompute", "--mesh", "missing.off"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("E_IO:"));

    write_mesh(dir.path(), "a.off", &shapes::icosphere(1));
    let o = fmap(
        dir.path(),
        &["match", "--src", "a.off", "--tgt", "a.off", "--k", "20", "--out", "m.txt"],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("E_CONFIG:"), "{}", stderr(&o));
    assert!(!dir.path().join(".fmap_cache").exists());

    VertexMap::identity(5).save(dir.path().join("p.txt")).unwrap();
    VertexMap::identity(6).save(dir.path().join("g.txt")).unwrap();
    let o = fmap(dir.path(), &["eval", "--pred", "p.txt", "--gt", "g.txt", "--mesh", "a.off"]);
    assert!(stderr(&o).starts_with("E_DIM:"), "{}", stderr(&o));
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = fmap(dir.path(), &["match", "--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for d in ["default: 30", "default: 130", "default: 10", "default: 0.01", "default: 32"] {
        assert!(text.contains(d), "missing `{d}` in\n{text}");
    }
    let o = fmap(dir.path(), &["--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("default: 0") && text.contains(".fmap_cache"));
}
