//! Allocation accounting for the memory benchmarks.
//!
//! [`TrackingAllocator`] wraps the system allocator and keeps global
//! counters: cumulative bytes allocated, current live bytes and the peak of
//! live bytes. Binaries that want memory reports install it:
//!
//! ```ignore
//! #[global_allocator]
//! static ALLOC: diffractor::alloc_track::TrackingAllocator = TrackingAllocator::new();
//! ```
//!
//! Counters are process-global; measurements assume the measuring thread is
//! the only one allocating during the measured section.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};

static TOTAL: AtomicU64 = AtomicU64::new(0);
static CURRENT: AtomicI64 = AtomicI64::new(0);
static PEAK: AtomicI64 = AtomicI64::new(0);

pub struct TrackingAllocator;

impl TrackingAllocator {
    pub const fn new() -> Self {
        TrackingAllocator
    }
}

impl Default for TrackingAllocator {
    fn default() -> Self {
        Self::new()
    }
}

fn on_alloc(size: usize) {
    TOTAL.fetch_add(size as u64, Ordering::Relaxed);
    let live = CURRENT.fetch_add(size as i64, Ordering::Relaxed) + size as i64;
    PEAK.fetch_max(live, Ordering::Relaxed);
}

fn on_dealloc(size: usize) {
    CURRENT.fetch_sub(size as i64, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            on_alloc(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        on_dealloc(layout.size());
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            on_dealloc(layout.size());
            on_alloc(new_size);
        }
        p
    }
}

/// Cumulative bytes handed out since process start.
pub fn total_allocated() -> u64 {
    TOTAL.load(Ordering::Relaxed)
}

/// Live bytes right now.
pub fn current_live() -> i64 {
    CURRENT.load(Ordering::Relaxed)
}

/// Peak of live bytes since the last [`reset_peak`].
pub fn peak_live() -> i64 {
    PEAK.load(Ordering::Relaxed)
}

pub fn reset_peak() {
    PEAK.store(CURRENT.load(Ordering::Relaxed), Ordering::Relaxed);
}

/// Whether the tracking allocator is actually installed in this process,
/// detected by making a probe allocation and watching the counter.
pub fn is_tracking() -> bool {
    let before = total_allocated();
    let probe = std::hint::black_box(vec![0u8; 256]);
    drop(probe);
    total_allocated() != before
}
