//! Small factorization helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Thin QR of `t` grouped as `row_legs | rest`: returns `(q, r)` with `q`
/// carrying the row legs plus `bond`, and `r` carrying `bond` plus the rest.
pub fn qr_split<T: Scalar>(t: &Tensor<T>, row_legs: &[&str], bond: &str) -> Result<(Tensor<T>, Tensor<T>)> {
    let (row_spec, col_spec) = leg_specs(t, row_legs);
    let m = t.to_matrix(row_legs)?;
    let (q, r) = thin_qr(m);
    let k = q.ncols();
    let rs: Vec<(&str, usize)> = row_spec.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    let cs: Vec<(&str, usize)> = col_spec.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    Ok((
        Tensor::from_matrix(&q, &rs, &[(bond, k)])?,
        Tensor::from_matrix(&r, &[(bond, k)], &cs)?,
    ))
}

/// Thin LQ of `t` grouped as `row_legs | rest`: returns `(l, q)` with `q`
/// having orthonormal rows.
pub fn lq_split<T: Scalar>(t: &Tensor<T>, row_legs: &[&str], bond: &str) -> Result<(Tensor<T>, Tensor<T>)> {
    let (row_spec, col_spec) = leg_specs(t, row_legs);
    let m = t.to_matrix(row_legs)?;
    let (q, r) = thin_qr(m.transpose());
    let k = q.ncols();
    let rs: Vec<(&str, usize)> = row_spec.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    let cs: Vec<(&str, usize)> = col_spec.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    Ok((
        Tensor::from_matrix(&r.transpose(), &rs, &[(bond, k)])?,
        Tensor::from_matrix(&q.transpose(), &[(bond, k)], &cs)?,
    ))
}

fn leg_specs<T: Scalar>(t: &Tensor<T>, row_legs: &[&str]) -> (Vec<(String, usize)>, Vec<(String, usize)>) {
    let rows = row_legs
        .iter()
        .map(|l| (l.to_string(), t.dim(l).unwrap_or(0)))
        .collect();
    let cols = t
        .legs()
        .iter()
        .zip(t.shape())
        .filter(|(l, _)| !row_legs.contains(&l.as_str()))
        .map(|(l, d)| (l.clone(), *d))
        .collect();
    (rows, cols)
}

/// Thin QR with a nonnegative diagonal in `r`.
pub fn thin_qr<T: Scalar>(m: DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (DMatrix::zeros(rows, 0), DMatrix::zeros(0, cols));
    }
    let qr = m.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..k {
        if r[(j, j)] < T::zero() {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// All eigenpairs of a symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen<T: Scalar>(m: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    match T::eigh_kernel(&m) {
        Some(pair) => pair,
        None => {
            let eig = m.symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| {
                eig.eigenvalues[i]
                    .partial_cmp(&eig.eigenvalues[j])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let mut vecs = DMatrix::zeros(n, n);
            for (new, &old) in order.iter().enumerate() {
                vecs.set_column(new, &eig.eigenvectors.column(old));
            }
            (vals, vecs)
        }
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale<T: Scalar>(y: &mut [T], a: T) {
    for yi in y.iter_mut() {
        *yi *= a;
    }
}
