//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable as a tensor element.
///
/// Implemented for `f32` and `f64`. Library code converts literal constants
/// through [`Scalar::of`] and tolerances through [`Scalar::tol`], which never
/// returns less than a small multiple of the type's machine epsilon.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn machine_eps() -> Self {
        Self::default_epsilon()
    }

    /// `x` as a tolerance, floored at `64 * eps`.
    fn tol(x: f64) -> Self {
        let floor = Self::machine_eps() * Self::of(64.0);
        let t = Self::of(x);
        if t < floor {
            floor
        } else {
            t
        }
    }

    /// Thin SVD `(u, s, vt)` as returned by the dense kernel, unsorted.
    fn svd_kernel(m: &DMatrix<Self>) -> Option<(DMatrix<Self>, Vec<Self>, DMatrix<Self>)>;

    /// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
    fn eigh_kernel(m: &DMatrix<Self>) -> Option<(Vec<Self>, DMatrix<Self>)>;
}

macro_rules! dense_kernels {
    ($t:ty) => {
        impl Scalar for $t {
            fn svd_kernel(m: &DMatrix<$t>) -> Option<(DMatrix<$t>, Vec<$t>, DMatrix<$t>)> {
                let f = faer::Mat::<$t>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
                let svd = f.thin_svd().ok()?;
                let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
                let k = s.nrows();
                Some((
                    DMatrix::from_fn(m.nrows(), k, |i, j| u[(i, j)]),
                    (0..k).map(|i| s[i]).collect(),
                    DMatrix::from_fn(k, m.ncols(), |i, j| v[(j, i)]),
                ))
            }

            fn eigh_kernel(m: &DMatrix<$t>) -> Option<(Vec<$t>, DMatrix<$t>)> {
                let f = faer::Mat::<$t>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
                let eig = f.self_adjoint_eigen(faer::Side::Lower).ok()?;
                let (s, u) = (eig.S().column_vector(), eig.U());
                let n = s.nrows();
                Some(((0..n).map(|i| s[i]).collect(), DMatrix::from_fn(n, n, |i, j| u[(i, j)])))
            }
        }
    };
}

dense_kernels!(f32);
dense_kernels!(f64);
