//! Dense complex products through an optimized GEMM kernel.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// out ← a·b. `out` is resized when its shape does not match.
pub fn mul_into(a: &DMatrix<C64>, b: &DMatrix<C64>, out: &mut DMatrix<C64>) {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if out.shape() != (m, n) {
        *out = DMatrix::zeros(m, n);
    }
    if m == 0 || n == 0 || k == 0 {
        out.fill(C64::new(0.0, 0.0));
        return;
    }
    // Complex64 is #[repr(C)] { re, im }, the layout of [f64; 2]; nalgebra
    // storage is column-major with unit row stride.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr().cast(),
            1,
            m as isize,
            b.as_ptr().cast(),
            1,
            k as isize,
            [0.0, 0.0],
            out.as_mut_ptr().cast(),
            1,
            m as isize,
        );
    }
}

pub fn mul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    mul_into(a, b, &mut out);
    out
}
