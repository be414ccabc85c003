#![allow(dead_code)]

use std::sync::Once;

use speclab::cache::PhiCache;

/// Cache shared by all test binaries; tables and φ solves computed by one
/// binary are reused by the next.
pub fn cache() -> PhiCache {
    PhiCache::new(concat!(env!("CARGO_TARGET_TMPDIR"), "/speclab-test-cache"))
}

pub fn init() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| speclab::structure_functions::set_session_defaults(128, Some(cache())));
}

pub fn rel(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    (a - b).norm() / b.norm()
}
