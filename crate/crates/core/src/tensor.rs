//! Dense tensors with named legs.
//!
//! A [`Tensor`] stores its entries in row-major order. Legs are addressed by
//! name; [`contract`] sums over pairs of named legs and keeps the remaining
//! legs of `a` followed by those of `b`.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    legs: Vec<String>,
    data: Vec<T>,
}

fn check_legs<S: AsRef<str>>(legs: &[S]) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(legs.len());
    for leg in legs {
        let leg = leg.as_ref();
        if !seen.insert(leg) {
            return Err(Error::DuplicateLeg(leg.to_string()));
        }
        out.push(leg.to_string());
    }
    Ok(out)
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl<T: Scalar> Tensor<T> {
    pub fn new<S: AsRef<str>>(legs: &[S], shape: &[usize], data: Vec<T>) -> Result<Self> {
        if legs.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} legs for a rank-{} shape",
                legs.len(),
                shape.len()
            )));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            legs: check_legs(legs)?,
            data,
        })
    }

    pub fn zeros<S: AsRef<str>>(legs: &[S], shape: &[usize]) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(legs, shape, vec![T::zero(); len])
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in row-major order.
    pub fn from_fn<S: AsRef<str>>(
        legs: &[S],
        shape: &[usize],
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(legs, shape, data)
    }

    pub fn scalar(x: T) -> Self {
        Self {
            shape: vec![],
            legs: vec![],
            data: vec![x],
        }
    }

    pub fn identity(row: &str, col: &str, n: usize) -> Result<Self> {
        Self::from_fn(&[row, col], &[n, n], |i| {
            if i[0] == i[1] {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Reshapes a matrix into a tensor. Rows enumerate `row_legs` in
    /// row-major order, columns enumerate `col_legs`.
    pub fn from_matrix(
        m: &DMatrix<T>,
        row_legs: &[(&str, usize)],
        col_legs: &[(&str, usize)],
    ) -> Result<Self> {
        let rows: usize = row_legs.iter().map(|l| l.1).product();
        let cols: usize = col_legs.iter().map(|l| l.1).product();
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, legs need {}x{}",
                m.nrows(),
                m.ncols(),
                rows,
                cols
            )));
        }
        let legs: Vec<&str> = row_legs.iter().chain(col_legs).map(|l| l.0).collect();
        let shape: Vec<usize> = row_legs.iter().chain(col_legs).map(|l| l.1).collect();
        // transposed column-major storage is row-major storage
        let data = m.transpose().as_slice().to_vec();
        Self::new(&legs, &shape, data)
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn legs(&self) -> &[String] {
        &self.legs
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn has_leg(&self, leg: &str) -> bool {
        self.legs.iter().any(|l| l == leg)
    }

    pub fn leg_index(&self, leg: &str) -> Result<usize> {
        self.legs
            .iter()
            .position(|l| l == leg)
            .ok_or_else(|| Error::UnknownLeg(leg.to_string()))
    }

    pub fn dim(&self, leg: &str) -> Result<usize> {
        Ok(self.shape[self.leg_index(leg)?])
    }

    pub fn get(&self, idx: &[usize]) -> T {
        let st = strides(&self.shape);
        let off: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    pub fn rename(mut self, from: &str, to: &str) -> Result<Self> {
        let i = self.leg_index(from)?;
        if from != to && self.has_leg(to) {
            return Err(Error::DuplicateLeg(to.to_string()));
        }
        self.legs[i] = to.to_string();
        Ok(self)
    }

    /// Renames several legs at once; the renaming is simultaneous, so swaps work.
    pub fn renamed(mut self, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut new_legs = self.legs.clone();
        for (from, to) in pairs {
            let i = self.leg_index(from)?;
            new_legs[i] = to.to_string();
        }
        self.legs = check_legs(&new_legs)?;
        Ok(self)
    }

    pub fn with_legs<S: AsRef<str>>(mut self, legs: &[S]) -> Result<Self> {
        if legs.len() != self.rank() {
            return Err(Error::Shape(format!(
                "{} names for a rank-{} tensor",
                legs.len(),
                self.rank()
            )));
        }
        self.legs = check_legs(legs)?;
        Ok(self)
    }

    pub fn reshape<S: AsRef<str>>(self, legs: &[S], shape: &[usize]) -> Result<Self> {
        Self::new(legs, shape, self.data)
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.rank() {
            return Err(Error::Shape(format!(
                "permutation of length {} for a rank-{} tensor",
                order.len(),
                self.rank()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for leg in order {
            perm.push(self.leg_index(leg.as_ref())?);
        }
        check_legs(order)?;
        Ok(self.permute_axes(&perm))
    }

    fn permute_axes(&self, perm: &[usize]) -> Self {
        let legs: Vec<String> = perm.iter().map(|&p| self.legs[p].clone()).collect();
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Self {
                shape,
                legs,
                data: self.data.clone(),
            };
        }
        let src_strides = strides(&self.shape);
        let st: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let len = self.data.len();
        let mut data = Vec::with_capacity(len);
        let r = shape.len();
        if len > 0 {
            let inner = shape[r - 1];
            let inner_stride = st[r - 1];
            let mut idx = vec![0usize; r];
            let mut off = 0usize;
            let outer = len / inner;
            for _ in 0..outer {
                let mut o = off;
                for _ in 0..inner {
                    data.push(self.data[o]);
                    o += inner_stride;
                }
                for k in (0..r - 1).rev() {
                    idx[k] += 1;
                    off += st[k];
                    if idx[k] < shape[k] {
                        break;
                    }
                    off -= st[k] * shape[k];
                    idx[k] = 0;
                }
            }
        }
        Self { shape, legs, data }
    }

    /// Matrix view with `row_legs` (in the given order) as rows and the
    /// remaining legs, in their stored order, as columns.
    pub fn to_matrix<S: AsRef<str>>(&self, row_legs: &[S]) -> Result<DMatrix<T>> {
        let (t, rows, cols) = self.grouped(row_legs)?;
        Ok(DMatrix::from_row_slice(rows, cols, &t.data))
    }

    fn grouped<S: AsRef<str>>(&self, row_legs: &[S]) -> Result<(Self, usize, usize)> {
        let mut order: Vec<String> = row_legs.iter().map(|s| s.as_ref().to_string()).collect();
        for leg in &self.legs {
            if !order.contains(leg) {
                order.push(leg.clone());
            }
        }
        let t = self.permute(&order)?;
        let rows: usize = t.shape[..row_legs.len()].iter().product();
        let cols: usize = t.shape[row_legs.len()..].iter().product();
        Ok((t, rows, cols))
    }

    pub fn norm_sqr(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x)
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn scale(&self, a: T) -> Self {
        let mut out = self.clone();
        out.scale_mut(a);
        out
    }

    pub fn scale_mut(&mut self, a: T) {
        for x in &mut self.data {
            *x *= a;
        }
    }

    fn aligned(&self, other: &Self) -> Result<Self> {
        if other.rank() != self.rank() {
            return Err(Error::Shape(format!(
                "rank {} vs rank {}",
                self.rank(),
                other.rank()
            )));
        }
        let o = other.permute(&self.legs)?;
        for (leg, (a, b)) in self.legs.iter().zip(self.shape.iter().zip(&o.shape)) {
            if a != b {
                return Err(Error::ExtentMismatch {
                    leg: leg.clone(),
                    left: *a,
                    right: *b,
                });
            }
        }
        Ok(o)
    }

    /// `self += a * other`, matching legs by name.
    pub fn axpy(&mut self, a: T, other: &Self) -> Result<()> {
        let o = self.aligned(other)?;
        for (x, &y) in self.data.iter_mut().zip(&o.data) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(T::one(), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    /// Full inner product, matching legs by name.
    pub fn dot(&self, other: &Self) -> Result<T> {
        let o = self.aligned(other)?;
        Ok(self
            .data
            .iter()
            .zip(&o.data)
            .fold(T::zero(), |acc, (&x, &y)| acc + x * y))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        let o = self.aligned(other)?;
        Ok(self
            .data
            .iter()
            .zip(&o.data)
            .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs())))
    }

    /// Single entry of a rank-0 (or one-element) tensor.
    pub fn as_scalar(&self) -> Result<T> {
        if self.data.len() != 1 {
            return Err(Error::Shape(format!(
                "expected a single entry, found shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }
}

/// Contracts `a` and `b` over the listed `(leg of a, leg of b)` pairs.
pub fn contract<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, pairs: &[(&str, &str)]) -> Result<Tensor<T>> {
    let mut a_sum = Vec::with_capacity(pairs.len());
    let mut b_sum = Vec::with_capacity(pairs.len());
    for (la, lb) in pairs {
        let ia = a.leg_index(la)?;
        let ib = b.leg_index(lb)?;
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::ExtentMismatch {
                leg: format!("{la}/{lb}"),
                left: a.shape[ia],
                right: b.shape[ib],
            });
        }
        a_sum.push(ia);
        b_sum.push(ib);
    }
    let a_free: Vec<usize> = (0..a.rank()).filter(|i| !a_sum.contains(i)).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|i| !b_sum.contains(i)).collect();

    let legs: Vec<String> = a_free
        .iter()
        .map(|&i| a.legs[i].clone())
        .chain(b_free.iter().map(|&i| b.legs[i].clone()))
        .collect();
    let legs = check_legs(&legs)?;
    let shape: Vec<usize> = a_free
        .iter()
        .map(|&i| a.shape[i])
        .chain(b_free.iter().map(|&i| b.shape[i]))
        .collect();

    let m: usize = a_free.iter().map(|&i| a.shape[i]).product();
    let n: usize = b_free.iter().map(|&i| b.shape[i]).product();
    let k: usize = a_sum.iter().map(|&i| a.shape[i]).product();

    let pa: Vec<usize> = a_free.iter().chain(&a_sum).copied().collect();
    let pb: Vec<usize> = b_sum.iter().chain(&b_free).copied().collect();
    let at = a.permute_axes(&pa);
    let bt = b.permute_axes(&pb);

    if m == 0 || n == 0 {
        return Tensor::zeros(&legs, &shape);
    }
    if k == 0 {
        return Tensor::zeros(&legs, &shape);
    }
    // row-major (m x k) storage is column-major (k x m), i.e. the transpose
    let a_t = DMatrix::from_vec(k, m, at.data);
    let b_t = DMatrix::from_vec(n, k, bt.data);
    let c_t = b_t * a_t;
    Tensor::new(&legs, &shape, c_t.data.into())
}

/// Rules for dropping singular values in [`svd_split`].
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub max_rank: Option<usize>,
    pub rel_cutoff: f64,
    pub keep_degenerate: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self::exact()
    }
}

impl TruncationPolicy {
    /// Keeps every nonzero singular value.
    pub fn exact() -> Self {
        Self {
            max_rank: None,
            rel_cutoff: 0.0,
            keep_degenerate: false,
        }
    }

    pub fn max_rank(d: usize) -> Self {
        Self {
            max_rank: Some(d),
            ..Self::exact()
        }
    }

    pub fn with_cutoff(mut self, rel_cutoff: f64) -> Self {
        self.rel_cutoff = rel_cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rel_cutoff) {
            return Err(Error::InvalidPolicy(format!(
                "rel_cutoff {} outside [0, 1)",
                self.rel_cutoff
            )));
        }
        if self.max_rank == Some(0) {
            return Err(Error::EmptyTruncation);
        }
        Ok(())
    }

    /// Number of values to keep from a nonincreasing sequence.
    pub fn kept<T: Scalar>(&self, s: &[T]) -> usize {
        if s.is_empty() || s[0] <= T::zero() {
            return 0;
        }
        let floor = s[0] * T::of(self.rel_cutoff);
        let mut k = s.iter().take_while(|&&x| x > T::zero() && x >= floor).count();
        if let Some(m) = self.max_rank {
            if k > m {
                k = m;
                if self.keep_degenerate {
                    let boundary = s[k - 1];
                    let window = boundary * T::of(1e-12);
                    while k < s.len() && s[k] > T::zero() && (boundary - s[k]).abs() <= window {
                        k += 1;
                    }
                }
            }
        }
        k
    }
}

#[derive(Clone, Debug)]
pub struct SvdSplit<T = f64> {
    /// Row legs followed by the new bond leg.
    pub u: Tensor<T>,
    pub s: Vec<T>,
    /// The new bond leg followed by the remaining legs.
    pub vh: Tensor<T>,
    pub discarded_weight: T,
}

impl<T: Scalar> SvdSplit<T> {
    /// `u * diag(s)`, with the bond leg kept.
    pub fn us(&self, bond: &str) -> Result<Tensor<T>> {
        scale_leg(&self.u, bond, &self.s)
    }

    /// `diag(s) * vh`, with the bond leg kept.
    pub fn svh(&self, bond: &str) -> Result<Tensor<T>> {
        scale_leg(&self.vh, bond, &self.s)
    }
}

/// Multiplies slices along `leg` by the weights `w`.
pub fn scale_leg<T: Scalar>(t: &Tensor<T>, leg: &str, w: &[T]) -> Result<Tensor<T>> {
    let i = t.leg_index(leg)?;
    if t.shape[i] != w.len() {
        return Err(Error::ExtentMismatch {
            leg: leg.to_string(),
            left: t.shape[i],
            right: w.len(),
        });
    }
    let inner: usize = t.shape[i + 1..].iter().product();
    let mut out = t.clone();
    for (j, x) in out.data.iter_mut().enumerate() {
        *x *= w[(j / inner.max(1)) % w.len().max(1)];
    }
    Ok(out)
}

/// Singular value decomposition of `t` viewed as a matrix with `row_legs` as rows.
///
/// Singular values are returned in nonincreasing order and truncated per
/// `policy`. Each left singular vector is signed so its largest-magnitude
/// entry is positive. A zero tensor yields rank 0.
pub fn svd_split<T: Scalar, S: AsRef<str>>(
    t: &Tensor<T>,
    row_legs: &[S],
    policy: &TruncationPolicy,
    bond: &str,
) -> Result<SvdSplit<T>> {
    policy.validate()?;
    svd_with(t, row_legs, bond, |s| policy.kept(s))
}

/// Thin SVD keeping all `min(rows, cols)` singular values, zeros included.
pub fn svd_split_full<T: Scalar, S: AsRef<str>>(t: &Tensor<T>, row_legs: &[S], bond: &str) -> Result<SvdSplit<T>> {
    svd_with(t, row_legs, bond, |s| s.len())
}

fn svd_with<T: Scalar, S: AsRef<str>>(
    t: &Tensor<T>,
    row_legs: &[S],
    bond: &str,
    keep: impl Fn(&[T]) -> usize,
) -> Result<SvdSplit<T>> {
    if row_legs.is_empty() || row_legs.len() >= t.rank() {
        return Err(Error::InvalidArgument(
            "row legs must be a nonempty proper subset".into(),
        ));
    }
    let (g, rows, cols) = t.grouped(row_legs)?;
    let row_spec: Vec<(String, usize)> = g.legs[..row_legs.len()]
        .iter()
        .cloned()
        .zip(g.shape[..row_legs.len()].iter().copied())
        .collect();
    let col_spec: Vec<(String, usize)> = g.legs[row_legs.len()..]
        .iter()
        .cloned()
        .zip(g.shape[row_legs.len()..].iter().copied())
        .collect();

    let total = t.norm_sqr();
    let (u_mat, s, vt_mat) = if rows == 0 || cols == 0 || total == T::zero() {
        (DMatrix::zeros(rows, 0), vec![], DMatrix::zeros(0, cols))
    } else {
        let m = DMatrix::from_row_slice(rows, cols, &g.data);
        thin_svd(m)?
    };

    let keep = keep(&s);
    let discarded_weight = s[keep..].iter().fold(T::zero(), |acc, &x| acc + x * x);

    let mut u = u_mat.columns(0, keep).into_owned();
    let mut vt = vt_mat.rows(0, keep).into_owned();
    for j in 0..keep {
        let col = u.column(j);
        let mut best = T::zero();
        let mut sign = T::one();
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = if x < T::zero() { -T::one() } else { T::one() };
            }
        }
        if sign < T::zero() {
            u.column_mut(j).neg_mut();
            vt.row_mut(j).neg_mut();
        }
    }

    let rs: Vec<(&str, usize)> = row_spec.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    let cs: Vec<(&str, usize)> = col_spec.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    let u = Tensor::from_matrix(&u, &rs, &[(bond, keep)])?;
    let vh = Tensor::from_matrix(&vt, &[(bond, keep)], &cs)?;
    Ok(SvdSplit {
        u,
        s: s[..keep].to_vec(),
        vh,
        discarded_weight,
    })
}

/// Thin SVD with singular values sorted in nonincreasing order.
pub(crate) fn thin_svd<T: Scalar>(m: DMatrix<T>) -> Result<(DMatrix<T>, Vec<T>, DMatrix<T>)> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok((DMatrix::zeros(rows, 0), vec![], DMatrix::zeros(0, cols)));
    }
    let (u, sv, vt) = T::svd_kernel(&m).ok_or_else(|| Error::Linalg("svd did not converge".into()))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u2 = DMatrix::zeros(rows, k);
    let mut vt2 = DMatrix::zeros(k, cols);
    let mut s = Vec::with_capacity(k);
    for (new, &old) in order.iter().enumerate() {
        u2.set_column(new, &u.column(old));
        vt2.set_row(new, &vt.row(old));
        s.push(sv[old]);
    }
    Ok((u2, s, vt2))
}

/// Orthonormal basis of the complement of an isometry's column space.
///
/// `iso` is viewed as an `m x k` matrix with `row_legs` as rows; the result
/// carries the same row legs and a new leg `bond` of extent `m - k`.
pub fn orthogonal_complement<T: Scalar, S: AsRef<str>>(
    iso: &Tensor<T>,
    row_legs: &[S],
    bond: &str,
) -> Result<Tensor<T>> {
    let (g, m, k) = iso.grouped(row_legs)?;
    if k > m {
        return Err(Error::NotIsometric(f64::INFINITY));
    }
    let q = DMatrix::from_row_slice(m, k, &g.data);
    let dev = isometry_deviation(&q);
    if dev > T::tol(1e-10) {
        return Err(Error::NotIsometric(dev.as_f64()));
    }
    let comp = complement_columns(&q);
    let row_spec: Vec<(&str, usize)> = g.legs[..row_legs.len()]
        .iter()
        .map(|l| l.as_str())
        .zip(g.shape[..row_legs.len()].iter().copied())
        .collect();
    Tensor::from_matrix(&comp, &row_spec, &[(bond, m - k)])
}

/// `max |Q^T Q - 1|`.
pub fn isometry_deviation<T: Scalar>(q: &DMatrix<T>) -> T {
    let g = q.transpose() * q;
    let mut dev = T::zero();
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { T::one() } else { T::zero() };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Columns completing the orthonormal columns of `q` to a square orthogonal matrix.
pub(crate) fn complement_columns<T: Scalar>(q: &DMatrix<T>) -> DMatrix<T> {
    let (m, k) = q.shape();
    if k == m {
        return DMatrix::zeros(m, 0);
    }
    let mut ext = DMatrix::zeros(m, k + m);
    ext.columns_mut(0, k).copy_from(q);
    ext.columns_mut(k, m).fill_with_identity();
    let full = ext.qr().q();
    full.columns(k, m - k).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(legs: &[&str], shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(legs, shape, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn identity_contraction_leaves_vector() {
        let id = Tensor::<f64>::identity("i", "j", 2).unwrap();
        let v = Tensor::new(&["k"], &[2], vec![3.0, -1.5]).unwrap();
        let out = contract(&id, &v, &[("j", "k")]).unwrap();
        assert_eq!(out.legs(), &["i".to_string()]);
        assert_eq!(out.data(), &[3.0, -1.5]);
    }

    #[test]
    fn matrix_times_identity() {
        let a = Tensor::new(&["i", "j"], &[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let id = Tensor::identity("k", "l", 2).unwrap();
        let out = contract(&a, &id, &[("j", "k")]).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn contraction_matches_nested_loops() {
        let a = random(&["i", "j", "k"], &[3, 4, 2], 1);
        let b = random(&["x", "y", "z"], &[4, 2, 5], 2);
        let c = contract(&a, &b, &[("j", "x"), ("k", "y")]).unwrap();
        assert_eq!(c.shape(), &[3, 5]);
        for i in 0..3 {
            for z in 0..5 {
                let mut s = 0.0;
                for j in 0..4 {
                    for k in 0..2 {
                        s += a.get(&[i, j, k]) * b.get(&[j, k, z]);
                    }
                }
                assert!((c.get(&[i, z]) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contraction_errors() {
        let a = random(&["i", "j"], &[2, 3], 3);
        let b = random(&["k", "l"], &[2, 3], 4);
        assert!(matches!(
            contract(&a, &b, &[("j", "k")]),
            Err(Error::ExtentMismatch { .. })
        ));
        assert!(matches!(
            contract(&a, &b, &[("q", "k")]),
            Err(Error::UnknownLeg(_))
        ));
        let c = random(&["i", "m"], &[2, 2], 5);
        assert!(matches!(
            contract(&a, &c, &[]),
            Err(Error::DuplicateLeg(_))
        ));
    }

    #[test]
    fn permute_roundtrip() {
        let a = random(&["a", "b", "c", "d"], &[2, 3, 4, 5], 6);
        let p = a.permute(&["c", "a", "d", "b"]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 5, 3]);
        assert_eq!(p.get(&[3, 1, 2, 0]), a.get(&[1, 0, 3, 2]));
        let back = p.permute(&["a", "b", "c", "d"]).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn svd_of_identity() {
        let id = Tensor::<f64>::identity("i", "j", 2).unwrap();
        let s = svd_split(&id, &["i"], &TruncationPolicy::exact(), "b").unwrap();
        assert_eq!(s.s.len(), 2);
        assert!((s.s[0] - 1.0).abs() < 1e-14 && (s.s[1] - 1.0).abs() < 1e-14);
        let back = contract(&s.us("b").unwrap(), &s.vh, &[("b", "b")]).unwrap();
        assert!(back.max_abs_diff(&id).unwrap() < 1e-14);
    }

    #[test]
    fn svd_rank_one() {
        let t: Tensor = Tensor::new(&["i", "j"], &[2, 3], vec![0.0, 0.6, 0.8, 0.0, 0.0, 0.0]).unwrap();
        let s = svd_split(&t, &["i"], &TruncationPolicy::exact(), "b").unwrap();
        assert_eq!(s.s.len(), 1);
        assert!((s.s[0] - 1.0).abs() < 1e-14);
        assert_eq!(s.discarded_weight, 0.0);
    }

    #[test]
    fn svd_truncation_weight() {
        let t = random(&["i", "j"], &[6, 4], 7);
        let full = svd_split(&t, &["i"], &TruncationPolicy::exact(), "b").unwrap();
        let cut = svd_split(&t, &["i"], &TruncationPolicy::max_rank(2), "b").unwrap();
        let dropped: f64 = full.s[2..].iter().map(|x| x * x).sum();
        assert!((cut.discarded_weight - dropped).abs() < 1e-12);
        let back = contract(&cut.us("b").unwrap(), &cut.vh, &[("b", "b")]).unwrap();
        let err = back.sub(&t).unwrap().norm_sqr();
        assert!((err - cut.discarded_weight).abs() < 1e-12);
    }

    #[test]
    fn svd_zero_tensor_has_rank_zero() {
        let t = Tensor::<f64>::zeros(&["i", "j"], &[3, 2]).unwrap();
        let s = svd_split(&t, &["i"], &TruncationPolicy::exact(), "b").unwrap();
        assert!(s.s.is_empty());
        assert_eq!(s.u.shape(), &[3, 0]);
        assert_eq!(s.discarded_weight, 0.0);
    }

    #[test]
    fn svd_rejects_empty_policy() {
        let t = random(&["i", "j"], &[3, 3], 8);
        let p = TruncationPolicy::max_rank(0);
        assert!(matches!(
            svd_split(&t, &["i"], &p, "b"),
            Err(Error::EmptyTruncation)
        ));
    }

    #[test]
    fn degenerate_values_kept_together() {
        let p = TruncationPolicy {
            max_rank: Some(2),
            rel_cutoff: 0.0,
            keep_degenerate: true,
        };
        assert_eq!(p.kept(&[3.0, 1.0, 1.0, 0.5]), 3);
        let q = TruncationPolicy::max_rank(2);
        assert_eq!(q.kept(&[3.0, 1.0, 1.0, 0.5]), 2);
    }

    #[test]
    fn complement_of_basis_vector() {
        let iso: Tensor = Tensor::new(&["i", "b"], &[2, 1], vec![1.0, 0.0]).unwrap();
        let c = orthogonal_complement(&iso, &["i"], "x").unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert!(c.get(&[0, 0]).abs() < 1e-15);
        assert!((c.get(&[1, 0]).abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_of_unitary_is_empty() {
        let t = random(&["i", "j"], &[4, 4], 9);
        let q = svd_split(&t, &["i"], &TruncationPolicy::exact(), "b").unwrap().u;
        let c = orthogonal_complement(&q, &["i"], "x").unwrap();
        assert_eq!(c.shape(), &[4, 0]);
    }

    #[test]
    fn complement_rejects_non_isometry() {
        let t = Tensor::new(&["i", "b"], &[2, 1], vec![2.0, 0.0]).unwrap();
        assert!(matches!(
            orthogonal_complement(&t, &["i"], "x"),
            Err(Error::NotIsometric(_))
        ));
    }
}
