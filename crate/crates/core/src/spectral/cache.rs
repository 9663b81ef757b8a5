//! `SPECB01` sidecar files holding a computed eigenbasis.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;
use sha2::{Digest, Sha256};

use super::{compute_eigenbasis_with, EigenBasis, EigenOptions};
use crate::error::{Error, Result};
use crate::matrix::read_u64;
use crate::mesh::{cotangent_laplacian, vertex_areas, AreaVector, TriangleMesh};

const MAGIC: &[u8; 7] = b"SPECB01";

/// Hex SHA-256 of the vertex coordinates, faces and basis size.
pub fn cache_key(mesh: &TriangleMesh, k: usize) -> String {
    let mut h = Sha256::new();
    h.update((mesh.n_vertices() as u64).to_le_bytes());
    for p in mesh.vertices() {
        for c in p {
            h.update(c.to_le_bytes());
        }
    }
    h.update((mesh.n_faces() as u64).to_le_bytes());
    for f in mesh.faces() {
        for &i in f {
            h.update((i as u64).to_le_bytes());
        }
    }
    h.update((k as u64).to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_basis<W: Write>(basis: &EigenBasis, mut w: W) -> Result<()> {
    let (n, k) = (basis.n(), basis.k());
    let mut buf = Vec::with_capacity(7 + 24 + 8 * (k + n * k + n));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(k as u64).to_le_bytes());
    buf.extend_from_slice(&basis.areas().total().to_le_bytes());
    for l in basis.lambda() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    let phi = basis.phi();
    for j in 0..k {
        for i in 0..n {
            buf.extend_from_slice(&phi[(i, j)].to_le_bytes());
        }
    }
    for a in basis.areas().values() {
        buf.extend_from_slice(&a.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_basis<R: Read>(mut r: R) -> Result<EigenBasis> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Cache("file too short for the header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Cache("missing SPECB01 magic".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let k = read_u64(&mut r)? as usize;
    let mut tb = [0u8; 8];
    r.read_exact(&mut tb)?;
    let total = f64::from_le_bytes(tb);

    let expected = k
        .checked_mul(n)
        .and_then(|nk| nk.checked_add(k + n))
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Cache(format!("absurd dimensions n={n}, K={k}")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != expected {
        return Err(Error::Cache(format!(
            "expected {expected} payload bytes for n={n}, K={k}, found {}",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let lambda = vals[..k].to_vec();
    let phi = Mat::from_fn(n, k, |i, j| vals[k + j * n + i]);
    let areas = AreaVector::new(vals[k + n * k..].to_vec())?;
    if (areas.total() - total).abs() > 1e-9 * total.abs() {
        return Err(Error::Cache("stored total area disagrees with the areas".into()));
    }
    EigenBasis::from_parts(phi, lambda, areas)
}

pub fn save_basis(basis: &EigenBasis, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_basis(basis, std::io::BufWriter::new(f))
}

pub fn load_basis(path: impl AsRef<Path>) -> Result<EigenBasis> {
    let f = std::fs::File::open(path)?;
    read_basis(std::io::BufReader::new(f))
}

/// Eigenbasis of `mesh`, read from `dir` when a matching file exists and
/// written there otherwise. The flag reports a cache hit.
pub fn cached_eigenbasis(
    mesh: &TriangleMesh,
    k: usize,
    dir: Option<&Path>,
    opts: &EigenOptions,
) -> Result<(EigenBasis, bool)> {
    let path: Option<PathBuf> = dir.map(|d| d.join(format!("{}.specb", cache_key(mesh, k))));
    if let Some(p) = &path {
        if p.exists() {
            match load_basis(p) {
                Ok(b) if b.n() == mesh.n_vertices() && b.k() == k => return Ok((b, true)),
                Ok(_) => log::warn!("ignoring mismatched cache file {}", p.display()),
                Err(e) => log::warn!("ignoring unreadable cache file {}: {e}", p.display()),
            }
        }
    }
    let l = cotangent_laplacian(mesh)?;
    let a = vertex_areas(mesh)?;
    let basis = compute_eigenbasis_with(&l, &a, k, opts)?;
    if let Some(p) = &path {
        if let Some(d) = p.parent() {
            std::fs::create_dir_all(d)?;
        }
        save_basis(&basis, p)?;
    }
    Ok((basis, false))
}
