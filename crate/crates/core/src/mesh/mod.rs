//! Triangle meshes, lumped vertex areas and the cotangent stiffness operator.

pub(crate) mod geodesic;
mod io;
pub mod shapes;

use std::collections::BTreeMap;

pub use geodesic::{geodesic_distances, geodesic_distances_partial};
pub use io::{load_mesh, read_obj, read_off, read_ply, write_obj, write_off, write_ply, PlyEncoding};

use crate::error::{Error, Result};

/// Cotangents are clamped to this magnitude so that slivers stay finite.
pub const COT_CLAMP: f64 = 1e4;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, validating face indices and coordinates.
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyMesh("vertices"));
        }
        if faces.is_empty() {
            return Err(Error::EmptyMesh("faces"));
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::parse(
                    "<mesh>",
                    format!("face {fi} references vertex outside [0, {n})"),
                ));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::parse("<mesh>", format!("face {fi} repeats a vertex")));
            }
        }
        if let Some(i) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFiniteInput(format!("vertex {i} has a non-finite coordinate")));
        }
        Ok(Self { vertices, faces })
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Unique undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| {
                [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]
                    .into_iter()
                    .map(|(a, b)| (a.min(b), a.max(b)))
            })
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Per-vertex adjacency lists with Euclidean edge lengths.
    pub fn edge_graph(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for (i, j) in self.edges() {
            let l = norm(sub(self.vertices[i], self.vertices[j]));
            adj[i].push((j, l));
            adj[j].push((i, l));
        }
        adj
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f].map(|v| self.vertices[v]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_faces()).map(|f| self.face_area(f)).sum()
    }

    /// Returns a mesh whose vertex `i` is vertex `order[i]` of `self`.
    ///
    /// `order` must be a permutation; the map from the new mesh to the old one
    /// is then exactly `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_vertices();
        if order.len() != n {
            return Err(Error::dim(format!("permutation of length {} for {n} vertices", order.len())));
        }
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::Config("vertex order is not a permutation".into()));
            }
            inverse[old] = new;
        }
        let vertices = order.iter().map(|&o| self.vertices[o]).collect();
        let faces = self.faces.iter().map(|f| f.map(|v| inverse[v])).collect();
        Self::new(vertices, faces)
    }
}

/// Lumped (diagonal) vertex masses.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaVector {
    values: Vec<f64>,
    total: f64,
}

impl AreaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::DegenerateGeometry("vertex areas must be finite and nonnegative".into()));
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateGeometry("total area is zero".into()));
        }
        Ok(Self { values, total })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Permutes masses the same way [`TriangleMesh::permuted`] does.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            values: order.iter().map(|&o| self.values[o]).collect(),
            total: self.total,
        }
    }
}

/// Each vertex receives one third of the area of its incident triangles.
pub fn vertex_areas(mesh: &TriangleMesh) -> Result<AreaVector> {
    let mut values = vec![0.0; mesh.n_vertices()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(fi) / 3.0;
        for &v in f {
            values[v] += a;
        }
    }
    AreaVector::new(values)
}

/// Symmetric sparse matrix in compressed-row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in triplets {
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for (j, v) in r {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `xᵀ M x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Cotangent stiffness matrix, positive semi-definite convention.
///
/// Off-diagonal `w_ij = -(cot α + cot β) / 2` over the angles opposite edge
/// `ij` (one term on boundary edges), diagonal `-Σ_j w_ij`.
pub fn cotangent_laplacian(mesh: &TriangleMesh) -> Result<SparseOperator> {
    let mut edge_w: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let p = f.map(|v| mesh.vertices()[v]);
        for corner in 0..3 {
            let (o, a, b) = (corner, (corner + 1) % 3, (corner + 2) % 3);
            let u = sub(p[a], p[o]);
            let v = sub(p[b], p[o]);
            let cr = norm(cross(u, v));
            if cr == 0.0 {
                return Err(Error::DegenerateGeometry(format!("face {fi} has zero area")));
            }
            let cot = (dot3(u, v) / cr).clamp(-COT_CLAMP, COT_CLAMP);
            let (i, j) = (f[a].min(f[b]), f[a].max(f[b]));
            *edge_w.entry((i, j)).or_insert(0.0) += 0.5 * cot;
        }
    }
    let n = mesh.n_vertices();
    let mut diag = vec![0.0; n];
    let mut trip = Vec::with_capacity(edge_w.len() * 2 + n);
    for (&(i, j), &w) in &edge_w {
        trip.push((i, j, -w));
        trip.push((j, i, -w));
        diag[i] += w;
        diag[j] += w;
    }
    trip.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    Ok(SparseOperator::from_triplets(n, trip))
}

#[inline]
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
