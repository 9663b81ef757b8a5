//! Counting global allocator used by the benchmark harness.
//!
//! Install it with `#[global_allocator] static A: CountingAllocator =
//! CountingAllocator;` in a binary or test target. Without it every figure
//! reported here stays zero.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering::Relaxed};

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static LARGEST: AtomicUsize = AtomicUsize::new(0);
static COUNT: AtomicUsize = AtomicUsize::new(0);

pub struct CountingAllocator;

fn on_alloc(size: usize) {
    let now = CURRENT.fetch_add(size, Relaxed) + size;
    PEAK.fetch_max(now, Relaxed);
    LARGEST.fetch_max(size, Relaxed);
    COUNT.fetch_add(1, Relaxed);
}

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            on_alloc(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            on_alloc(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            CURRENT.fetch_sub(layout.size(), Relaxed);
            on_alloc(new_size);
        }
        p
    }
}

/// Allocator counters at one point in time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AllocStats {
    /// Bytes currently live.
    pub current: usize,
    /// Highest live byte count since the last reset.
    pub peak: usize,
    /// Largest single request since the last reset.
    pub largest: usize,
    /// Allocation calls since the last reset.
    pub count: usize,
}

impl AllocStats {
    /// Peak growth over a baseline taken at reset time.
    pub fn transient_peak(&self, baseline: &AllocStats) -> usize {
        self.peak.saturating_sub(baseline.current)
    }
}

pub fn stats() -> AllocStats {
    AllocStats {
        current: CURRENT.load(Relaxed),
        peak: PEAK.load(Relaxed),
        largest: LARGEST.load(Relaxed),
        count: COUNT.load(Relaxed),
    }
}

/// Restarts peak, largest and count tracking; returns the baseline.
pub fn reset() -> AllocStats {
    let current = CURRENT.load(Relaxed);
    PEAK.store(current, Relaxed);
    LARGEST.store(0, Relaxed);
    COUNT.store(0, Relaxed);
    stats()
}

/// Whether a [`CountingAllocator`] is installed and has seen traffic.
pub fn is_active() -> bool {
    let before = stats();
    drop(std::hint::black_box(vec![0u8; 1]));
    stats().count > before.count
}
