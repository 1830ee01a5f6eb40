//! Hand-written differentiable models: a ReLU/softmax feedforward policy, a
//! two-layer LSTM policy, Adam, cross-entropy and gradient checking.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod mlp;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use gradcheck::{max_relative_error, numeric_gradient};
pub use loss::{cross_entropy_loss, entropy, softmax_in_place};
pub use lstm::{Lstm, LstmCache, LstmState};
pub use mlp::{Mlp, MlpCache};

/// `C = A B + beta C` for row/column-strided operands: `A` is `m x k`,
/// `B` is `k x n`, `C` is `m x n` and contiguous row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len(), "gemm: A out of bounds");
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len(), "gemm: B out of bounds");
    assert!(c.len() >= m * n, "gemm: C out of bounds");
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
