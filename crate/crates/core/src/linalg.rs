//! Small dense linear-algebra helpers shared by the solver.

use crate::error::{Error, Result};
use crate::Float;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

/// Column-block width of the parallel matrix product. Fixed so the block
/// partition (and therefore every floating-point result) is independent of
/// the thread count.
const GEMM_BLOCK: usize = 1024;

/// `out = a * b`, parallelized over fixed column blocks of `b`. Each block
/// is computed by a single-threaded kernel, so results are bit-identical to
/// the sequential product regardless of scheduling.
pub(crate) fn mat_mul_into<T: Float>(a: ArrayView2<T>, b: ArrayView2<T>, out: &mut Array2<T>) {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(out.nrows(), a.nrows());
    debug_assert_eq!(out.ncols(), b.ncols());
    if b.ncols() <= GEMM_BLOCK {
        general_mat_mul(T::one(), &a, &b, T::zero(), out);
        return;
    }
    let out_blocks: Vec<_> = out.axis_chunks_iter_mut(Axis(1), GEMM_BLOCK).collect();
    let b_blocks: Vec<_> = b.axis_chunks_iter(Axis(1), GEMM_BLOCK).collect();
    out_blocks
        .into_par_iter()
        .zip(b_blocks.into_par_iter())
        .for_each(|(mut o, bb)| {
            general_mat_mul(T::one(), &a, &bb, T::zero(), &mut o);
        });
}

pub(crate) fn mat_mul<T: Float>(a: ArrayView2<T>, b: ArrayView2<T>) -> Array2<T> {
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    mat_mul_into(a, b, &mut out);
    out
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // a NaN pivot must fail
pub(crate) fn cholesky_lower<T: Float>(m: &Array2<T>) -> Result<Array2<T>> {
    let p = m.nrows();
    debug_assert_eq!(p, m.ncols());
    let mut l: Array2<T> = Array2::zeros((p, p));
    for j in 0..p {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: d.to_f64().unwrap_or(f64::NAN),
            });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..p {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` column by column given the lower factor `L`.
pub(crate) fn cholesky_solve<T: Float>(l: &Array2<T>, b: ArrayView2<T>) -> Array2<T> {
    let p = l.nrows();
    debug_assert_eq!(b.nrows(), p);
    let mut x = b.to_owned();
    for mut col in x.columns_mut() {
        // forward: L z = b
        for i in 0..p {
            let mut s = col[i];
            for k in 0..i {
                s -= l[(i, k)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        // backward: L^T x = z
        for i in (0..p).rev() {
            let mut s = col[i];
            for k in (i + 1)..p {
                s -= l[(k, i)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn cholesky_of_identity() {
        let eye: Array2<f64> = Array2::eye(3);
        let l = cholesky_lower(&eye).unwrap();
        assert_eq!(l, Array2::eye(3));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(
            cholesky_lower(&m),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn solve_matches_hand_computed() {
        // m = [[4, 2], [2, 3]], b = [[2], [1]], x = [[0.5], [0]]
        let m: Array2<f64> = arr2(&[[4.0, 2.0], [2.0, 3.0]]);
        let l = cholesky_lower(&m).unwrap();
        let x = cholesky_solve(&l, arr2(&[[2.0], [1.0]]).view());
        assert!((x[(0, 0)] - 0.5).abs() < 1e-14);
        assert!(x[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn blocked_product_matches_plain() {
        let a = Array2::from_shape_fn((7, 13), |(i, j)| (i * 13 + j) as f64 * 0.01);
        let b = Array2::from_shape_fn((13, 3000), |(i, j)| ((i + j) % 17) as f64 * 0.1);
        let blocked = mat_mul(a.view(), b.view());
        let mut plain = Array2::zeros((7, 3000));
        general_mat_mul(1.0, &a, &b, 0.0, &mut plain);
        assert_eq!(blocked, plain);
    }
}
