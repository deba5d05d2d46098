//! Floating-point operation accounting.
//!
//! Every training run owns a [`FlopLedger`] and threads it through the
//! network and solver kernels. Counts are analytic (matrix-vector product
//! of an m x n matrix is 2mn, a Cholesky factorization of a p x p matrix
//! is p^3/3, and so on), so two runs of the same configuration report the
//! same number regardless of hardware.

/// Cumulative count of floating-point operations attributed to one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopLedger {
    count: u64,
}

impl FlopLedger {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, flops: u64) {
        self.count = self.count.saturating_add(flops);
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.count
    }

    pub fn reset(&mut self) {
        self.count = 0;
    }
}

/// Flops charged for one transcendental activation evaluation.
pub const ACTIVATION_FLOPS: u64 = 8;
/// Flops charged for one activation derivative given cached values.
pub const ACTIVATION_DERIV_FLOPS: u64 = 4;

/// Inner product or axpy over vectors of length `n`.
#[inline]
pub fn vector_op(n: usize) -> u64 {
    2 * n as u64
}

/// Dense matrix-vector product, `m x n`.
#[inline]
pub fn mat_vec(m: usize, n: usize) -> u64 {
    2 * (m as u64) * (n as u64)
}

/// Dense product of an `m x k` matrix with a `k x n` matrix.
#[inline]
pub fn mat_mat(m: usize, k: usize, n: usize) -> u64 {
    2 * (m as u64) * (k as u64) * (n as u64)
}

/// Cholesky factorization of a `p x p` symmetric positive definite matrix.
#[inline]
pub fn cholesky(p: usize) -> u64 {
    let p = p as u64;
    p * p * p / 3
}

/// Forward + backward substitution against a `p x p` triangular factor.
#[inline]
pub fn cholesky_solve(p: usize) -> u64 {
    2 * (p as u64) * (p as u64)
}
