//! Exact nearest-neighbour search between row sets.
//!
//! Both strategies compare distances produced by [`sq_dist`] and break ties
//! towards the lowest database index, so they return identical answers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, RowMatrix};

/// How [`nearest_neighbors`] searches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NnStrategy {
    /// Brute force for small problems, ball tree otherwise.
    #[default]
    Auto,
    BruteForce,
    BallTree,
}

const QUERY_BLOCK: usize = 64;
const DB_BLOCK: usize = 512;
const LEAF_SIZE: usize = 24;
const AUTO_BRUTE_LIMIT: usize = 1 << 22;

/// Index of the nearest `database` row for every `queries` row.
pub fn nearest_neighbors(queries: &RowMatrix, database: &RowMatrix, strategy: NnStrategy) -> Result<Vec<usize>> {
    nearest_neighbors_hinted(queries, database, strategy, None)
}

/// As [`nearest_neighbors`]; `hints` are candidate answers (for example the
/// previous iteration's matches) that only speed up tree pruning.
pub fn nearest_neighbors_hinted(
    queries: &RowMatrix,
    database: &RowMatrix,
    strategy: NnStrategy,
    hints: Option<&[usize]>,
) -> Result<Vec<usize>> {
    if queries.cols() != database.cols() {
        return Err(Error::dim(format!(
            "query dimension {} differs from database dimension {}",
            queries.cols(),
            database.cols()
        )));
    }
    if database.rows() == 0 {
        return Err(Error::dim("empty nearest-neighbour database"));
    }
    if let Some(h) = hints {
        if h.len() != queries.rows() || h.iter().any(|&j| j >= database.rows()) {
            return Err(Error::dim("hint list does not match the queries"));
        }
    }
    let use_tree = match strategy {
        NnStrategy::BruteForce => false,
        NnStrategy::BallTree => true,
        NnStrategy::Auto => queries.rows().saturating_mul(database.rows()) > AUTO_BRUTE_LIMIT,
    };
    if use_tree {
        let tree = BallTree::build(database);
        Ok(tree.query_all(queries, hints))
    } else {
        Ok(brute_force(queries, database))
    }
}

#[inline]
fn better(d: f64, j: usize, best: (f64, usize)) -> bool {
    d < best.0 || (d == best.0 && j < best.1)
}

/// Tiled exhaustive search: query blocks against database blocks in
/// ascending order, keeping a running minimum per query.
pub fn brute_force(queries: &RowMatrix, database: &RowMatrix) -> Vec<usize> {
    let nq = queries.rows();
    let mut out = vec![0usize; nq];
    out.par_chunks_mut(QUERY_BLOCK).enumerate().for_each(|(blk, chunk)| {
        let q0 = blk * QUERY_BLOCK;
        let mut best = vec![(f64::INFINITY, usize::MAX); chunk.len()];
        for d0 in (0..database.rows()).step_by(DB_BLOCK) {
            let d1 = (d0 + DB_BLOCK).min(database.rows());
            for (t, b) in best.iter_mut().enumerate() {
                let q = queries.row(q0 + t);
                for j in d0..d1 {
                    let d = sq_dist(q, database.row(j));
                    if better(d, j, *b) {
                        *b = (d, j);
                    }
                }
            }
        }
        for (o, b) in chunk.iter_mut().zip(best) {
            *o = b.1;
        }
    });
    out
}

struct Node {
    center: Vec<f64>,
    radius: f64,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// Ball tree over the rows of a matrix.
pub struct BallTree<'a> {
    data: &'a RowMatrix,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> BallTree<'a> {
    pub fn build(data: &'a RowMatrix) -> Self {
        let mut tree = Self {
            data,
            order: (0..data.rows()).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(0, data.rows());
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let dim = self.data.cols();
        let mut center = vec![0.0; dim];
        for &i in &self.order[start..end] {
            for (c, v) in center.iter_mut().zip(self.data.row(i)) {
                *c += v;
            }
        }
        let inv = 1.0 / (end - start) as f64;
        center.iter_mut().for_each(|c| *c *= inv);
        let radius = self.order[start..end]
            .iter()
            .map(|&i| sq_dist(&center, self.data.row(i)))
            .fold(0.0, f64::max)
            .sqrt();
        let id = self.nodes.len();
        self.nodes.push(Node {
            center,
            radius,
            start,
            end,
            children: None,
        });
        if end - start > LEAF_SIZE {
            // split at the median of the widest coordinate
            let mut axis = 0;
            let mut spread = -1.0;
            for a in 0..dim {
                let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = self.data.get(i, a);
                    (lo.min(v), hi.max(v))
                });
                if hi - lo > spread {
                    spread = hi - lo;
                    axis = a;
                }
            }
            if spread > 0.0 {
                let mid = (start + end) / 2;
                let data = self.data;
                self.order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
                    data.get(x, axis).total_cmp(&data.get(y, axis)).then(x.cmp(&y))
                });
                let l = self.build_node(start, mid);
                let r = self.build_node(mid, end);
                self.nodes[id].children = Some((l, r));
            }
        }
        id
    }

    /// Exact nearest neighbour of `q`, starting from an optional candidate.
    pub fn query(&self, q: &[f64], hint: Option<usize>) -> usize {
        let mut best = match hint {
            Some(j) => (sq_dist(q, self.data.row(j)), j),
            None => (f64::INFINITY, usize::MAX),
        };
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let dc = sq_dist(q, &node.center).sqrt();
            // the bound is only trusted up to rounding in dc and the radius
            let lb = dc - node.radius - 1e-9 * (dc + node.radius);
            if lb > 0.0 && lb * lb > best.0 {
                continue;
            }
            match node.children {
                None => {
                    for &j in &self.order[node.start..node.end] {
                        let d = sq_dist(q, self.data.row(j));
                        if better(d, j, best) {
                            best = (d, j);
                        }
                    }
                }
                Some((l, r)) => {
                    let dl = sq_dist(q, &self.nodes[l].center);
                    let dr = sq_dist(q, &self.nodes[r].center);
                    // nearer child is popped first
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        best.1
    }

    pub fn query_all(&self, queries: &RowMatrix, hints: Option<&[usize]>) -> Vec<usize> {
        (0..queries.rows())
            .into_par_iter()
            .with_min_len(256)
            .map(|i| self.query(queries.row(i), hints.map(|h| h[i])))
            .collect()
    }
}
