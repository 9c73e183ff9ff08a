//! Fixtures shared by the benchmarks in `benches/`.

use dunkl_core::kernel::KernelEvaluator;
use dunkl_core::{CRational, Complex64, DunklContext, Family, Scalar};

/// B_2 with `k_short = 1/2`, `k_long = 3/2` (short orbit first).
pub fn b2_exact() -> DunklContext<CRational> {
    DunklContext::for_family(Family::B, 2, vec![CRational::ratio(1, 2), CRational::ratio(3, 2)]).unwrap()
}

pub fn b2_float() -> DunklContext<Complex64> {
    DunklContext::for_family(Family::B, 2, vec![Complex64::from_f64(0.5), Complex64::from_f64(1.5)]).unwrap()
}

pub fn a2_exact() -> DunklContext<CRational> {
    DunklContext::for_family(Family::A, 3, vec![CRational::ratio(1, 2)]).unwrap()
}

pub fn b2_evaluator(n: usize) -> KernelEvaluator<Complex64> {
    KernelEvaluator::hermite_only(b2_float(), n).unwrap()
}

/// Deterministic points on a small spiral inside the unit disk.
pub fn spiral(count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|i| {
            let t = i as f64 / count as f64;
            let a = 7.0 * t;
            [0.8 * t * a.cos(), 0.8 * t * a.sin()]
        })
        .collect()
}
