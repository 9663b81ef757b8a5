//! Memory contract of the implicit soft map, checked with the counting
//! allocator at a size where the dense matrix would need 3.2 GB.

use fmap_core::alloc::{self, CountingAllocator};
use fmap_core::matrix::RowMatrix;
use fmap_core::softmap::ScalableSoftMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

#[test]
fn soft_map_never_allocates_a_dense_block() {
    assert!(alloc::is_active());
    let n = 20_000;
    let (p, d) = (4, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f1 = RowMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let f2 = RowMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let b = RowMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let g = RowMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let soft = ScalableSoftMap::new(f1, f2, 0.2).unwrap();

    let base = alloc::reset();
    let out = soft.apply(&b).unwrap();
    let (df1, df2) = soft.apply_adjoint(&g, &b).unwrap();
    let s = alloc::stats();
    assert!(out.is_finite() && df1.is_finite() && df2.is_finite());

    let dense_quarter = n * n / 4 * std::mem::size_of::<f64>();
    assert!(s.largest < dense_quarter, "largest allocation {} bytes", s.largest);
    // outputs and per-tile scratch only: far below one dense row block
    let linear = 64 * n * (p + d) * std::mem::size_of::<f64>();
    assert!(s.transient_peak(&base) < linear, "peak {} bytes", s.transient_peak(&base));
}
