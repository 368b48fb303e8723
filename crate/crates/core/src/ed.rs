//! Brute-force dense reference for small chains.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dmrg::{env_left_step, env_right_step, mpo_local, unit_env, EffectiveHam};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::mpo::{mpo_legs, spin, Mpo};
use crate::mps::{local_legs, site_legs, vleg, Mps};
use crate::scalar::Scalar;
use crate::tensor::{contract, Tensor};

/// Largest Hilbert-space dimension handled densely.
pub const DENSE_LIMIT: usize = 4096;

/// Full state vector in lexicographic `σ_1 … σ_L` order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState<T = f64> {
    pub l: usize,
    pub d: usize,
    pub amplitudes: DVector<T>,
}

pub fn hilbert_dim(l: usize, d: usize) -> Result<usize> {
    let mut n: usize = 1;
    for _ in 0..l {
        n = n.saturating_mul(d);
    }
    if n > DENSE_LIMIT {
        return Err(Error::GuardExceeded { dim: n, limit: DENSE_LIMIT });
    }
    Ok(n)
}

pub fn dense_state<T: Scalar>(psi: &Mps<T>) -> Result<DenseState<T>> {
    hilbert_dim(psi.len(), psi.phys_dim())?;
    let sites = psi.plain_sites()?;
    let mut v = sites[0].clone().renamed(&[(vleg(0).as_str(), "_s")])?;
    let mut rows = 1;
    for l in 1..=psi.len() {
        if l > 1 {
            v = contract(&v, &sites[l - 1], &[(vleg(l - 1).as_str(), vleg(l - 1).as_str())])?;
        }
        let [_, p, vr] = site_legs(l);
        rows *= psi.phys_dim();
        let dr = v.dim(&vr)?;
        let data = v.permute(&["_s", p.as_str(), vr.as_str()])?.into_data();
        v = Tensor::new(&["_s".to_string(), vr.clone()], &[rows, dr], data)?;
    }
    Ok(DenseState {
        l: psi.len(),
        d: psi.phys_dim(),
        amplitudes: DVector::from_vec(v.into_data()),
    })
}

/// Dense `d^L × d^L` matrix of an MPO, rows indexing the output.
pub fn dense_hamiltonian<T: Scalar>(h: &Mpo<T>) -> Result<DMatrix<T>> {
    let n = hilbert_dim(h.len(), h.phys_dim())?;
    let d = h.phys_dim();
    let mut m = Tensor::new(&["_r", "_c", "w0"], &[1, 1, 1], vec![T::one()])?;
    let mut dim = 1;
    for l in 1..=h.len() {
        let [wl, p, q, wr] = mpo_legs(l);
        let t = contract(&m, h.site(l), &[(wl.as_str(), wl.as_str())])?;
        let t = t.permute(&["_r", p.as_str(), "_c", q.as_str(), wr.as_str()])?;
        let w = t.dim(&wr)?;
        dim *= d;
        m = t.reshape(&["_r", "_c", wr.as_str()], &[dim, dim, w])?;
    }
    debug_assert_eq!(dim, n);
    Ok(DMatrix::from_row_slice(n, n, m.data()))
}

/// The `k` smallest eigenvalues of a symmetric matrix, ascending.
pub fn exact_spectrum<T: Scalar>(m: &DMatrix<T>, k: usize) -> Result<Vec<T>> {
    Ok(exact_eigenpairs(m, k)?.0)
}

/// The `k` lowest eigenpairs; eigenvectors are the columns of the matrix.
pub fn exact_eigenpairs<T: Scalar>(m: &DMatrix<T>, k: usize) -> Result<(Vec<T>, DMatrix<T>)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let asym = (m - m.transpose()).amax();
    let scale = m.amax().max(T::one());
    if asym > T::tol(1e-10) * scale {
        return Err(Error::NotSymmetric(asym.as_f64()));
    }
    let sym = (m + m.transpose()) * T::of(0.5);
    let (vals, vecs) = symmetric_eigen(sym);
    let k = k.min(vals.len());
    Ok((vals[..k].to_vec(), vecs.columns(0, k).into_owned()))
}

fn local<T: Scalar>(op: &[f64; 4]) -> DMatrix<T> {
    DMatrix::from_row_slice(2, 2, &op.map(T::of))
}

/// Spin-1/2 operator `op` acting on site `i` of an `l`-site chain.
pub fn site_operator<T: Scalar>(l: usize, i: usize, op: &[f64; 4]) -> Result<DMatrix<T>> {
    hilbert_dim(l, 2)?;
    let mut m = DMatrix::<T>::identity(1, 1);
    for s in 1..=l {
        let f = if s == i { local(op) } else { local(&spin::ID) };
        m = m.kronecker(&f);
    }
    Ok(m)
}

/// `S_i·S_j` assembled from Kronecker products.
pub fn spin_dot<T: Scalar>(l: usize, i: usize, j: usize) -> Result<DMatrix<T>> {
    let half = T::of(0.5);
    let pm = site_operator::<T>(l, i, &spin::SP)? * site_operator::<T>(l, j, &spin::SM)?;
    let mp = site_operator::<T>(l, i, &spin::SM)? * site_operator::<T>(l, j, &spin::SP)?;
    let zz = site_operator::<T>(l, i, &spin::SZ)? * site_operator::<T>(l, j, &spin::SZ)?;
    Ok((pm + mp) * half + zz)
}

/// `Σ_{i<j} c(i, j) S_i·S_j` by explicit pairwise summation.
pub fn pairwise_hamiltonian<T: Scalar>(l: usize, coupling: impl Fn(usize, usize) -> f64) -> Result<DMatrix<T>> {
    let n = hilbert_dim(l, 2)?;
    let mut h = DMatrix::zeros(n, n);
    for i in 1..=l {
        for j in i + 1..=l {
            let c = coupling(i, j);
            if c != 0.0 {
                h += spin_dot::<T>(l, i, j)? * T::of(c);
            }
        }
    }
    Ok(h)
}

/// Numerical rank with singular values above `1e-8` times the largest.
pub fn numerical_rank<T: Scalar>(m: &DMatrix<T>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let Ok((_, s, _)) = crate::tensor::thin_svd(m.clone()) else {
        return 0;
    };
    let top = s.iter().fold(T::zero(), |a, &b| a.max(b));
    if top == T::zero() {
        return 0;
    }
    s.iter().filter(|&&x| x > T::of(1e-8) * top).count()
}

/// Tolerance of every entry in [`verify_identity_suite`].
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub max_abs_deviation: f64,
    pub pass: bool,
}

/// Identity name mapped to its largest observed deviation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdentityReport {
    pub checks: BTreeMap<String, IdentityCheck>,
}

impl IdentityReport {
    fn record(&mut self, name: &str, dev: f64) {
        let e = self.checks.entry(name.to_string()).or_insert(IdentityCheck {
            max_abs_deviation: 0.0,
            pass: true,
        });
        if dev.is_nan() || dev > e.max_abs_deviation {
            e.max_abs_deviation = dev;
        }
        e.pass = e.max_abs_deviation <= IDENTITY_TOL;
    }

    pub fn all_pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.values().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect()
    }
}

fn diff<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    if a.is_empty() {
        return 0.0;
    }
    (a - b).amax().as_f64()
}

/// Dense verification of the kept/discarded projector algebra, the effective
/// Hamiltonians and the variance decomposition for `psi` and `h`.
pub fn verify_identity_suite<T: Scalar>(psi: &Mps<T>, h: &Mpo<T>) -> Result<IdentityReport> {
    use crate::projectors::{
        build_bases, convert_kd_dk, dense_kept_states, dense_projector, dense_projector_sum, one_perp_mixed,
        subspace_dimension, ProjectorSpec as S, ProjectorSum, Sector::*,
    };
    let len = psi.len();
    let d = psi.phys_dim();
    let size = hilbert_dim(len, d)?;
    if h.len() != len || h.phys_dim() != d {
        return Err(Error::Shape("MPO and MPS shapes differ".into()));
    }
    let b = build_bases(psi)?;
    let mut rep = IdentityReport::default();
    let p = |spec: S| dense_projector(&spec, &b);
    let cache = RefCell::new(HashMap::new());
    let pair = |x, xb, l, lb| -> Result<DMatrix<T>> {
        if let Some(m) = cache.borrow().get(&(x, xb, l, lb)) {
            return Ok(DMatrix::clone(m));
        }
        let m = dense_projector(&S::pair(x, xb, l, lb), &b)?;
        cache.borrow_mut().insert((x, xb, l, lb), m.clone());
        Ok(m)
    };
    let local = |n, l| dense_projector(&S::LocalNs { n, l }, &b);
    let zero = DMatrix::<T>::zeros(size, size);
    let id = DMatrix::<T>::identity(size, size);

    rep.record("isometries_and_gauge", b.deviation()?.as_f64());
    let reference = dense_state(&b.kept.reference)?.amplitudes;
    for bond in 0..=len {
        let v = dense_state(&b.bond_state(bond)?)?.amplitudes;
        rep.record("bond_canonical_forms", (v - &reference).amax().as_f64());
    }

    // Effective Hamiltonians on bonds, single sites and site pairs.
    let hd = dense_hamiltonian(h)?;
    let (lk, rk) = dense_kept_states(&b)?;
    let a: Vec<Tensor<T>> = (1..=len).map(|l| local_legs(&b.kept.left[l - 1], l)).collect::<Result<_>>()?;
    let bb: Vec<Tensor<T>> = (1..=len).map(|l| local_legs(&b.kept.right[l - 1], l)).collect::<Result<_>>()?;
    let ws: Vec<Tensor<T>> = (1..=len).map(|l| mpo_local(h, l)).collect::<Result<_>>()?;
    let mut lefts = vec![unit_env()?];
    for l in 1..=len {
        lefts.push(env_left_step(&lefts[l - 1], &a[l - 1], &ws[l - 1], &a[l - 1])?);
    }
    let mut rights = vec![unit_env()?; len + 1];
    for l in (1..=len).rev() {
        rights[l - 1] = env_right_step(&rights[l], &bb[l - 1], &ws[l - 1], &bb[l - 1])?;
    }
    let energy = reference.dot(&(&hd * &reference));
    let hpsi = &hd * &reference;
    for n in 0..=2.min(len) {
        let first = if n == 0 { 0 } else { 1 };
        for l in first..=len + 1 - n.max(1) {
            let (left, right) = if n == 0 { (&lefts[l], &rights[l]) } else { (&lefts[l - 1], &rights[l + n - 1]) };
            let (lm, rm) = if n == 0 { (&lk[l], &rk[l]) } else { (&lk[l - 1], &rk[l + n - 1]) };
            let mid = d.pow(n as u32);
            let v = lm.kronecker(&DMatrix::identity(mid, mid)).kronecker(&rm.transpose());
            let want = v.transpose() * &hd * &v;
            let heff = EffectiveHam {
                left: left.clone(),
                ws: if n == 0 { Vec::new() } else { ws[l - 1..l - 1 + n].to_vec() },
                right: right.clone(),
            };
            let dim = v.ncols();
            let mut got = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                let mut e = vec![T::zero(); dim];
                e[i] = T::one();
                got.set_column(i, &DVector::from_vec(heff.apply_flat(&e)?));
            }
            rep.record("effective_hamiltonians", diff(&got, &want));
            // The local image of the reference reproduces the projected H|Ψ⟩ and E.
            let x = v.transpose() * &reference;
            let hx = &got * &x;
            rep.record("projected_residual", (&v * &hx - &v * (v.transpose() * &hpsi)).amax().as_f64());
            rep.record("projected_residual", (x.dot(&hx) - energy).abs().as_f64());
        }
    }

    // Orthogonality and completeness of kept and discarded spaces.
    for l in 1..=len {
        let (kl, dl) = (pair(K, K, l, len + 1)?, pair(D, K, l, len + 1)?);
        rep.record("kept_discarded_orthogonality", diff(&(&kl * &dl), &zero));
        rep.record("kept_discarded_completeness", diff(&(kl + dl), &pair(K, K, l - 1, len + 1)?));
        let (kr, dr) = (pair(K, K, 0, l)?, pair(K, D, 0, l)?);
        rep.record("kept_discarded_orthogonality", diff(&(&kr * &dr), &zero));
        rep.record("kept_discarded_completeness", diff(&(kr + dr), &pair(K, K, 0, l + 1)?));
        let one = local(1, l)?;
        rep.record("one_site_completeness", diff(&(pair(K, K, l, l + 1)? + pair(D, K, l, l + 1)?), &one));
        rep.record("one_site_completeness", diff(&(pair(K, K, l - 1, l)? + pair(K, D, l - 1, l)?), &one));
        if l < len {
            let whole = local(2, l)?;
            let mut parts = DMatrix::zeros(size, size);
            let mut pieces = DVector::zeros(size);
            for x in [K, D] {
                for xb in [K, D] {
                    let q = pair(x, xb, l, l + 1)?;
                    pieces += &q * &hpsi;
                    parts += q;
                }
            }
            rep.record("two_site_decomposition", diff(&whole, &parts));
            rep.record("two_site_decomposition", (&whole * &hpsi - pieces).amax().as_f64());
        }
    }

    // Same-side products.
    for i in 1..=len {
        for j in i..=len {
            let (ki, kj) = (pair(K, K, i, len + 1)?, pair(K, K, j, len + 1)?);
            let (di, dj) = (pair(D, K, i, len + 1)?, pair(D, K, j, len + 1)?);
            let mut dev = diff(&(&kj * &ki), &kj).max(diff(&(&ki * &kj), &kj));
            if j > i {
                dev = dev.max(diff(&(&kj * &di), &zero)).max(diff(&(&dj * &di), &zero));
                dev = dev.max(diff(&(&dj * &ki), &dj));
            } else {
                dev = dev.max(diff(&(&di * &di), &di)).max(diff(&(&ki * &di), &zero));
            }
            let (few, many) = (pair(K, K, 0, j + 1)?, pair(K, K, 0, i + 1)?);
            dev = dev.max(diff(&(&few * &many), &many));
            let (qj, qi) = (pair(K, D, 0, j)?, pair(K, D, 0, i)?);
            if i < j {
                dev = dev.max(diff(&(&qj * &qi), &zero)).max(diff(&(&few * &qi), &qi));
            } else {
                dev = dev.max(diff(&(&qi * &qi), &qi)).max(diff(&(&qi * &few), &qi));
                dev = dev.max(diff(&(&qi * &pair(K, K, 0, i)?), &zero));
            }
            rep.record("same_side_products", dev);
        }
    }

    // Mixed products of pair projectors on the same bonds.
    for i in 0..len {
        for j in i + 1..=len + 1 {
            for x in [K, D] {
                for xb in [K, D] {
                    let q = pair(x, xb, i, j)?;
                    for y in [K, D] {
                        for yb in [K, D] {
                            let r = pair(y, yb, i, j)?;
                            let want = if x == y && xb == yb { &q } else { &zero };
                            rep.record("mixed_products", diff(&(&q * &r), want));
                        }
                    }
                }
            }
        }
    }
    // A left D before an n-site window or a right D after it annihilates the window projector.
    for n in 0..=len {
        for lp in 1..=len + 1 - n {
            let win = local(n, lp)?;
            for l in 1..lp {
                for lb in l + 1..=len + 1 {
                    for xb in [K, D] {
                        rep.record("early_discarded_annihilation", diff(&(&pair(D, xb, l, lb)? * &win), &zero));
                    }
                }
            }
            for lbp in lp + n..=len {
                for l2 in 0..lbp {
                    for x in [K, D] {
                        rep.record("early_discarded_annihilation", diff(&(&win * &pair(x, D, l2, lbp)?), &zero));
                    }
                }
            }
        }
    }

    for n in 1..=len {
        for i in 1..=len - n {
            let m = &local(n, i)? * &local(n, i + 1)?;
            rep.record("mismatch_collapse", diff(&m, &local(n - 1, i + 1)?));
        }
        for lb in 1..=len + 1 - n {
            for lp in lb..=len + 1 - n {
                let (lhs, rhs) = convert_kd_dk(len, n, lb, lp)?;
                rep.record(
                    "kd_dk_conversion",
                    diff(&dense_projector_sum(&lhs, &b)?, &dense_projector_sum(&rhs, &b)?),
                );
            }
        }
    }

    // Global and irreducible projectors.
    let g: Vec<DMatrix<T>> = (0..=len).map(|n| p(S::GlobalNs { n, pivot: None })).collect::<Result<_>>()?;
    let perp: Vec<DMatrix<T>> = (0..=len).map(|n| p(S::IrreducibleNPerp { n })).collect::<Result<_>>()?;
    let mut total = DMatrix::zeros(size, size);
    let mut dim_total = 0usize;
    for n in 0..=len {
        rep.record("global_nesting", diff(&(&g[n] * &g[n]), &g[n]));
        for m in 0..n {
            rep.record("global_nesting", diff(&(&g[n] * &g[m]), &g[m]));
        }
        if n >= 1 {
            for piv in 1..=len + 1 - n {
                let alt = p(S::GlobalNs { n, pivot: Some(piv) })?;
                rep.record("global_pivot_independence", diff(&alt, &g[n]));
                let loc = local(n, piv)?;
                rep.record("global_nesting", diff(&(&g[n] * &loc), &loc));
            }
            rep.record("irreducible_construction", diff(&perp[n], &(&g[n] - &g[n - 1])));
        }
        for (m, q) in perp.iter().enumerate() {
            let want = if m == n { &perp[n] } else { &zero };
            rep.record("irreducible_orthonormality", diff(&(&perp[n] * q), want));
        }
        if n >= 2 {
            let mut k = ProjectorSum::new();
            for i in 1..=len + 1 - n {
                k = k.plus(1.0, S::LocalNs { n, l: i });
            }
            for i in 1..=len - n {
                k = k.plus(-1.0, S::LocalNs { n: n - 1, l: i + 1 });
            }
            rep.record("global_k_only_form", diff(&dense_projector_sum(&k, &b)?, &g[n]));
            let mut s = ProjectorSum::new();
            for i in 1..=len + 1 - n {
                s = s
                    .plus(1.0, S::LocalNs { n, l: i })
                    .plus(-1.0, S::LocalNs { n: n - 1, l: i + 1 })
                    .plus(-1.0, S::LocalNs { n: n - 1, l: i });
                if i < len + 2 - n {
                    s = s.plus(1.0, S::LocalNs { n: n - 2, l: i + 1 });
                }
            }
            rep.record("irreducible_k_only_form", diff(&dense_projector_sum(&s, &b)?, &perp[n]));
        }
        let dim = subspace_dimension(&b, n)?;
        dim_total += dim;
        let rank_gap = (numerical_rank(&perp[n]) as f64 - dim as f64).abs();
        rep.record("irreducible_dimensions", rank_gap.max((perp[n].trace().as_f64() - dim as f64).abs()));
        total += &perp[n];
    }
    rep.record("irreducible_completeness", diff(&total, &id));
    rep.record("irreducible_dimensions", (dim_total as f64 - size as f64).abs());
    for piv in 1..=len {
        rep.record("one_perp_forms", diff(&dense_projector_sum(&one_perp_mixed(len, piv)?, &b)?, &perp[1]));
    }
    let kd = (1..=len).fold(ProjectorSum::new(), |s, i| s.plus(1.0, S::pair(K, D, i - 1, i)));
    rep.record("one_perp_forms", diff(&dense_projector_sum(&kd, &b)?, &perp[1]));

    // Variance decomposition.
    let ctx = crate::variance::VarianceContext::new(psi, h)?;
    let mut sum = T::zero();
    let shifted = crate::mpo::mpo_add(h, &crate::mpo::identity_mpo(len, d)?, T::one(), T::of(3.7))?;
    let sctx = crate::variance::VarianceContext::new(psi, &shifted)?;
    for n in 1..=len {
        let dn = ctx.delta(n)?;
        rep.record("variance_terms", (dn - (&perp[n] * &hpsi).norm_squared()).abs().as_f64());
        rep.record("variance_shift_invariance", (sctx.delta(n)? - dn).abs().as_f64());
        sum += dn;
    }
    let resid = (&hpsi - &reference * energy).norm_squared();
    rep.record("variance_total", (sum - resid).abs().as_f64());
    for l in 1..=len {
        let x = ctx.one_site_term(l)?;
        let dev = (x - ctx.one_site_term_isometry(l)?).abs();
        rep.record("variance_one_site_forms", dev.as_f64());
    }
    let mut right = T::zero();
    for l in 1..=len {
        right += ctx.one_site_term_right(l)?;
    }
    rep.record("variance_one_site_forms", (right - ctx.delta(1)?).abs().as_f64());
    Ok(rep)
}
