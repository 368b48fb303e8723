//! Lanczos eigensolver for the lowest eigenpair of a symmetric map.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale, symmetric_eigen};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosOpts {
    /// Total number of map applications.
    pub max_iter: usize,
    pub tol: f64,
    /// Krylov dimension before restarting.
    pub krylov_dim: usize,
    /// Ritz vectors carried over a restart.
    pub keep: usize,
}

impl Default for LanczosOpts {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            krylov_dim: 40,
            keep: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult<T = f64> {
    pub value: T,
    pub vector: Vec<T>,
    /// `‖A v − λ v‖` of the returned unit vector.
    pub residual: T,
    pub converged: bool,
    /// The Krylov space was exhausted before convergence was declared.
    pub breakdown: bool,
    pub iterations: usize,
}

/// Lowest eigenpair of the symmetric map `apply`, with the Krylov basis kept
/// fully orthogonal and orthogonal to the unit vectors in `orth_against`.
///
/// Each step extends the basis by the residual of the current lowest Ritz
/// vector, which spans the same Krylov space as the three-term recurrence.
/// On restart the lowest `keep` Ritz vectors are retained.
pub fn lanczos_lowest<T: Scalar>(
    apply: impl Fn(&[T]) -> Result<Vec<T>>,
    init: &[T],
    orth_against: &[Vec<T>],
    opts: &LanczosOpts,
) -> Result<LanczosResult<T>> {
    let n = init.len();
    let mut v0 = init.to_vec();
    deflate(&mut v0, orth_against);
    deflate(&mut v0, orth_against);
    let nrm = norm(&v0);
    if nrm <= T::tol(1e-300) {
        return Err(Error::InvalidArgument("initial vector vanishes after orthogonalization".into()));
    }
    scale(&mut v0, T::one() / nrm);
    let tol = T::of(opts.tol);
    let kdim = opts.krylov_dim.clamp(2, n.max(2));
    let keep = opts.keep.clamp(1, kdim - 1);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut images: Vec<Vec<T>> = Vec::new();
    let mut proj: DMatrix<T> = DMatrix::zeros(0, 0);
    let mut next = v0;
    let mut iterations = 0;
    loop {
        let w = apply(&next)?;
        if w.len() != n {
            return Err(Error::Shape(format!("map returned length {} for length {n}", w.len())));
        }
        iterations += 1;
        let m = basis.len();
        let mut grown = DMatrix::zeros(m + 1, m + 1);
        grown.view_mut((0, 0), (m, m)).copy_from(&proj);
        for (i, q) in basis.iter().enumerate() {
            let c = (dot(q, &w) + dot(&next, &images[i])) * T::of(0.5);
            grown[(i, m)] = c;
            grown[(m, i)] = c;
        }
        grown[(m, m)] = dot(&next, &w);
        proj = grown;
        basis.push(next);
        images.push(w);

        let (vals, vecs) = symmetric_eigen(proj.clone());
        let (x, ax) = combine(&basis, &images, vecs.column(0).as_slice());
        let theta = vals[0];
        let mut r = ax.clone();
        axpy(&mut r, -theta, &x);
        deflate(&mut r, orth_against);
        let residual = norm(&r);
        let scale_ref = theta.abs().max(T::one());
        let converged = residual <= tol * scale_ref;
        let mut cand = r;
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &cand);
                axpy(&mut cand, -c, q);
            }
            deflate(&mut cand, orth_against);
        }
        let cn = norm(&cand);
        let exhausted = cn <= T::tol(1e-13) * scale_ref || basis.len() >= n;
        if converged || exhausted || iterations >= opts.max_iter {
            let mut x = x;
            deflate(&mut x, orth_against);
            let xn = norm(&x);
            scale(&mut x, T::one() / xn);
            return Ok(LanczosResult {
                value: theta,
                vector: x,
                residual,
                converged,
                breakdown: exhausted && !converged,
                iterations,
            });
        }
        scale(&mut cand, T::one() / cn);
        if basis.len() >= kdim {
            let k = keep.min(basis.len());
            let mut nb = Vec::with_capacity(kdim);
            let mut ni = Vec::with_capacity(kdim);
            for j in 0..k {
                let (y, ay) = combine(&basis, &images, vecs.column(j).as_slice());
                nb.push(y);
                ni.push(ay);
            }
            basis = nb;
            images = ni;
            proj = DMatrix::from_fn(k, k, |i, j| if i == j { vals[i] } else { T::zero() });
        }
        next = cand;
    }
}

/// `(Σ c_i v_i, Σ c_i A v_i)`.
fn combine<T: Scalar>(basis: &[Vec<T>], images: &[Vec<T>], c: &[T]) -> (Vec<T>, Vec<T>) {
    let n = basis[0].len();
    let mut x = vec![T::zero(); n];
    let mut ax = vec![T::zero(); n];
    for (i, ci) in c.iter().enumerate() {
        axpy(&mut x, *ci, &basis[i]);
        axpy(&mut ax, *ci, &images[i]);
    }
    (x, ax)
}

fn deflate<T: Scalar>(v: &mut [T], against: &[Vec<T>]) {
    for q in against {
        let c = dot(q, v);
        axpy(v, -c, q);
    }
}
