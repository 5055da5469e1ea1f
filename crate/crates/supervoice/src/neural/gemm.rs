//! Small matrix kernels shared by the convolution and linear layers.
//!
//! Two access patterns cover every product in this crate:
//! `axpy_rows` walks the output row by row accumulating scaled rows of B
//! (good for forward passes and input gradients), and `dot8` reduces two
//! contiguous slices with eight independent accumulators (good for weight
//! gradients). Loop order is fixed, so results are bit-reproducible for a
//! given build.

use super::tensor::Scalar;

/// c += a * b for equal-length slices.
#[inline]
pub fn axpy<F: Scalar>(c: &mut [F], a: F, b: &[F]) {
    debug_assert_eq!(c.len(), b.len());
    for (ci, &bi) in c.iter_mut().zip(b) {
        *ci = *ci + a * bi;
    }
}

/// C[m,n] += A[m,k] * B[k,n], all row-major contiguous.
pub fn axpy_rows<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &aip) in arow.iter().enumerate() {
            if aip != F::zero() {
                axpy(crow, aip, &b[p * n..(p + 1) * n]);
            }
        }
    }
}

/// Dot product with eight partial accumulators. Faster than a naive fold and
/// keeps the reduction order independent of slice alignment.
pub fn dot8<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let base = c * 8;
        for lane in 0..8 {
            acc[lane] = acc[lane] + a[base + lane] * b[base + lane];
        }
    }
    let mut tail = F::zero();
    for i in chunks * 8..a.len() {
        tail = tail + a[i] * b[i];
    }
    let mut total = tail;
    for lane in 0..8 {
        total = total + acc[lane];
    }
    total
}
