//! Per-thread tally of 3×3 matrix operations.
//!
//! Charged by the tensor kernels so that integrators can be compared by the
//! amount of 3×3 work they do, independent of wall-clock noise. Weights are in
//! units of one 3×3 matrix product (45 flops).

use std::cell::Cell;

pub const PRODUCT: u64 = 1;
pub const INVERSE: u64 = 1;
/// Symmetric 3×3 eigendecomposition, a few Jacobi/QR sweeps.
pub const EIGEN: u64 = 4;

thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

pub fn charge(n: u64) {
    OPS.with(|c| c.set(c.get() + n));
}

/// Dense LU solve of an `n`-dimensional system, expressed in 3×3 products.
pub fn charge_dense_solve(n: usize) {
    let n = n as f64;
    let flops = 2.0 / 3.0 * n * n * n + 2.0 * n * n;
    charge((flops / 45.0).ceil() as u64);
}

pub fn matrix_ops() -> u64 {
    OPS.with(Cell::get)
}

pub fn reset() {
    OPS.with(|c| c.set(0));
}

/// Runs `f` and returns its result along with the operations it charged.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = matrix_ops();
    let out = f();
    (out, matrix_ops() - before)
}
