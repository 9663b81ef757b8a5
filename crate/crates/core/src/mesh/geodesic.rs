use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties by vertex index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graph geodesic distances (Dijkstra over mesh edges with Euclidean
/// lengths). Unreachable vertices get `+∞`.
///
/// This is an approximation of the polyhedral geodesic distance and always
/// overestimates it.
pub fn geodesic_distances_partial(mesh: &TriangleMesh, source: usize) -> Vec<f64> {
    dijkstra(&mesh.edge_graph(), source)
}

/// Like [`geodesic_distances_partial`] but fails when some vertex is
/// unreachable from `source`.
pub fn geodesic_distances(mesh: &TriangleMesh, source: usize) -> Result<Vec<f64>> {
    if source >= mesh.n_vertices() {
        return Err(Error::dim(format!(
            "source vertex {source} out of range for {} vertices",
            mesh.n_vertices()
        )));
    }
    let d = geodesic_distances_partial(mesh, source);
    let unreachable = d.iter().filter(|v| v.is_infinite()).count();
    if unreachable > 0 {
        return Err(Error::DisconnectedMesh {
            source_vertex: source,
            unreachable,
        });
    }
    Ok(d)
}

pub(crate) fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        vertex: source,
    });
    while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry { dist: nd, vertex: v });
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn line_of_triangles() {
        // strip of triangles whose bottom row is a unit-spaced path
        let mut v = Vec::new();
        for i in 0..5 {
            v.push([i as f64, 0.0, 0.0]);
        }
        for i in 0..5 {
            v.push([i as f64 + 0.5, 10.0, 0.0]);
        }
        let mut f = Vec::new();
        for i in 0..4 {
            f.push([i, i + 1, i + 5]);
            f.push([i + 1, i + 6, i + 5]);
        }
        let mesh = TriangleMesh::new(v, f).unwrap();
        let d = geodesic_distances(&mesh, 0).unwrap();
        assert_eq!(d[0], 0.0);
        assert!((d[3] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn disconnected_is_flagged() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [5.0, 0.0, 0.0],
            [6.0, 0.0, 0.0],
            [5.0, 1.0, 0.0],
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        assert!(matches!(
            geodesic_distances(&mesh, 0),
            Err(Error::DisconnectedMesh { unreachable: 3, .. })
        ));
        let d = geodesic_distances_partial(&mesh, 0);
        assert!(d[4].is_infinite());
        assert!(d[1].is_finite());
    }

    #[test]
    fn antipodal_on_sphere() {
        let mesh = shapes::icosphere(3);
        let d = geodesic_distances(&mesh, 0).unwrap();
        let p = mesh.vertices()[0];
        let anti = (0..mesh.n_vertices())
            .min_by(|&a, &b| {
                let da = super::super::dot3(mesh.vertices()[a], p);
                let db = super::super::dot3(mesh.vertices()[b], p);
                da.total_cmp(&db)
            })
            .unwrap();
        let rel = (d[anti] - std::f64::consts::PI) / std::f64::consts::PI;
        assert!((0.0..0.12).contains(&rel), "relative overestimate {rel}");
    }

    #[test]
    fn triangle_inequality_sampled() {
        let mesh = shapes::icosphere(2);
        let rows: Vec<Vec<f64>> = [0, 17, 80, 131]
            .iter()
            .map(|&s| geodesic_distances(&mesh, s).unwrap())
            .collect();
        let ids = [0, 17, 80, 131];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..mesh.n_vertices() {
                    assert!(rows[a][ids[b]] <= rows[a][c] + rows[b][c] + 1e-12);
                }
            }
        }
    }
}
