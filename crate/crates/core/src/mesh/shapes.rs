//! Synthetic meshes for tests, benchmarks and demos.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{norm, TriangleMesh};

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let v = raw.iter().map(|&p| normalized(p)).collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}

fn normalized(p: [f64; 3]) -> [f64; 3] {
    let l = norm(p);
    [p[0] / l, p[1] / l, p[2] / l]
}

/// Unit sphere from recursive midpoint subdivision of the icosahedron,
/// re-projected after every level: `10·4^s + 2` vertices.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let (mut v, mut f) = icosahedron();
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (v[a], v[b]);
                v.push(normalized([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                v.len() - 1
            })
        };
        for &[a, b, c] in &f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    TriangleMesh::new(v, f).expect("icosphere is valid")
}

/// Geodesic sphere of frequency `m`: each icosahedron face is split into an
/// `m × m` triangular grid, then projected. `10·m² + 2` vertices, so any
/// size can be approached.
pub fn geodesic_sphere(frequency: usize) -> TriangleMesh {
    assert!(frequency >= 1);
    let m = frequency;
    let (base, base_faces) = icosahedron();
    // points keyed by their sorted (corner, weight) barycentric signature
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut verts: Vec<[f64; 3]> = Vec::new();
    let mut faces = Vec::with_capacity(20 * m * m);
    for &[a, b, c] in &base_faces {
        let mut grid = vec![vec![0usize; m + 1]; m + 1];
        for i in 0..=m {
            for j in 0..=(m - i) {
                let k = m - i - j;
                let mut key: Vec<(usize, usize)> =
                    [(a, k), (b, i), (c, j)].into_iter().filter(|&(_, w)| w > 0).collect();
                key.sort_unstable();
                let id = *index.entry(key).or_insert_with(|| {
                    let w = |s: usize| s as f64 / m as f64;
                    let p = [0, 1, 2].map(|d| base[a][d] * w(k) + base[b][d] * w(i) + base[c][d] * w(j));
                    verts.push(normalized(p));
                    verts.len() - 1
                });
                grid[i][j] = id;
            }
        }
        for i in 0..m {
            for j in 0..(m - i) {
                faces.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if i + j + 1 < m {
                    faces.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    TriangleMesh::new(verts, faces).expect("geodesic sphere is valid")
}

/// Geodesic sphere whose vertex count is closest to `n`.
pub fn sphere_with_vertices(n: usize) -> TriangleMesh {
    let m = (((n.max(12) - 2) as f64 / 10.0).sqrt().round() as usize).max(1);
    geodesic_sphere(m)
}

/// Regular triangulation of `[0, sx] × [0, sy]` with `nx × ny` vertices.
pub fn grid(nx: usize, ny: usize, sx: f64, sy: f64) -> TriangleMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut v = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            v.push([sx * i as f64 / (nx - 1) as f64, sy * j as f64 / (ny - 1) as f64, 0.0]);
        }
    }
    let mut f = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            // alternate diagonals to avoid a directional bias
            if (i + j) % 2 == 0 {
                f.push([a, a + 1, a + nx + 1]);
                f.push([a, a + nx + 1, a + nx]);
            } else {
                f.push([a, a + 1, a + nx]);
                f.push([a + 1, a + nx + 1, a + nx]);
            }
        }
    }
    TriangleMesh::new(v, f).expect("grid is valid")
}

/// Closed torus with `nu` samples around the tube axis and `nv` around the
/// tube itself.
pub fn torus(nu: usize, nv: usize, major: f64, minor: f64) -> TriangleMesh {
    assert!(nu >= 3 && nv >= 3);
    let mut v = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = std::f64::consts::TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let w = std::f64::consts::TAU * j as f64 / nv as f64;
            let r = major + minor * w.cos();
            v.push([r * u.cos(), r * u.sin(), minor * w.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut f = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(v, f).expect("torus is valid")
}

/// Smooth radial deformation that removes every symmetry of a sphere-like
/// mesh: anisotropic axis scaling plus a few Gaussian bumps at random
/// directions.
pub fn deform_asymmetric(mesh: &TriangleMesh, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<([f64; 3], f64)> = (0..4)
        .map(|_| {
            let dir = normalized([
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            (dir, rng.random_range(0.15..0.35))
        })
        .collect();
    let scale = [1.0, 0.8, 0.65];
    let v = mesh
        .vertices()
        .iter()
        .map(|&p| {
            let dirp = normalized(p);
            let mut r = 1.0;
            for (c, amp) in &bumps {
                let d2 = (0..3).map(|k| (dirp[k] - c[k]).powi(2)).sum::<f64>();
                r += amp * (-d2 / 0.3).exp();
            }
            [p[0] * r * scale[0], p[1] * r * scale[1], p[2] * r * scale[2]]
        })
        .collect();
    TriangleMesh::new(v, mesh.faces().to_vec()).expect("deformation keeps connectivity")
}

/// Moves every vertex by a uniform random offset of at most `amplitude`.
pub fn jitter(mesh: &TriangleMesh, amplitude: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = mesh
        .vertices()
        .iter()
        .map(|p| p.map(|c| c + rng.random_range(-amplitude..=amplitude)))
        .collect();
    TriangleMesh::new(v, mesh.faces().to_vec()).expect("jitter keeps connectivity")
}

/// Uniformly random permutation of `0..n`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}
