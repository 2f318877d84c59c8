//! Minimal dense kernels over row-major flat slices. Everything the cell
//! and its backward pass need; nothing more.

/// out = A x, with A an n-by-n row-major matrix.
#[inline]
pub(crate) fn matvec(a: &[f64], x: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), n);
    for (o, row) in out.iter_mut().zip(a.chunks_exact(n)) {
        *o = row.iter().zip(x).map(|(w, v)| w * v).sum();
    }
}

/// out += A^T x.
#[inline]
pub(crate) fn matvec_t_add(a: &[f64], x: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * n);
    for (xi, row) in x.iter().zip(a.chunks_exact(n)) {
        axpy(out, *xi, row);
    }
}

/// a += alpha * b, elementwise.
#[inline]
pub(crate) fn axpy(a: &mut [f64], alpha: f64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (ai, bi) in a.iter_mut().zip(b) {
        *ai += alpha * bi;
    }
}

/// m += x y^T (outer product accumulate), m row-major n-by-n.
#[inline]
pub(crate) fn outer_add(m: &mut [f64], x: &[f64], y: &[f64], n: usize) {
    debug_assert_eq!(m.len(), n * n);
    for (xi, row) in x.iter().zip(m.chunks_exact_mut(n)) {
        axpy(row, *xi, y);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
