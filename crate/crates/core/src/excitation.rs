//! The n-site excitation ansatz on top of a ground-state MPS.
//!
//! A state is `Σ_ℓ A_1 … A_{ℓ-1} T^ℓ B_{ℓ+n} … B_L` for `ℓ = 1 … L-n+1`,
//! where `T^ℓ` is a window tensor on the sites `ℓ … ℓ+n-1`. For `ℓ < L-n+1`
//! the first site of `T^ℓ` lies in the discarded space of `A_ℓ`, which makes
//! all branches mutually orthogonal.

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blob;
use crate::dmrg::{apply_window, env_left_step, env_right_step, mpo_local, unit_env, window_legs};
use crate::error::{Error, Result};
use crate::lanczos::{lanczos_lowest, LanczosOpts};
use crate::linalg::qr_split;
use crate::mpo::{total_spin_sq_mpo, total_sz_mpo, Mpo};
use crate::mps::{local_legs, mps_add, site_legs_from_local, CanonicalForm, Mps};
use crate::projectors::{build_bases, KeptBases};
use crate::scalar::Scalar;
use crate::tensor::{contract, scale_leg, Tensor};
use crate::variance::project_left;

/// Ground-state isometries shared by every excitation built on them.
#[derive(Clone, Debug)]
pub struct AnsatzBasis<T = f64> {
    pub kept: KeptBases<T>,
    a: Vec<Tensor<T>>,
    b: Vec<Tensor<T>>,
}

impl<T: Scalar> AnsatzBasis<T> {
    pub fn new(kept: KeptBases<T>) -> Result<Arc<Self>> {
        let n = kept.left.len();
        let a = (1..=n).map(|l| local_legs(&kept.left[l - 1], l)).collect::<Result<_>>()?;
        let b = (1..=n).map(|l| local_legs(&kept.right[l - 1], l)).collect::<Result<_>>()?;
        Ok(Arc::new(Self { kept, a, b }))
    }

    pub fn from_state(psi: &Mps<T>) -> Result<Arc<Self>> {
        Self::new(build_bases(psi)?.kept)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.kept.reference.phys_dim()
    }

    /// `A_ℓ` with legs `l`, `p`, `r`.
    pub fn a(&self, l: usize) -> &Tensor<T> {
        &self.a[l - 1]
    }

    pub fn b(&self, l: usize) -> &Tensor<T> {
        &self.b[l - 1]
    }

    /// Bond dimension between sites `k` and `k+1`.
    pub fn bond(&self, k: usize) -> usize {
        if k == 0 {
            1
        } else {
            self.a[k - 1].shape()[2]
        }
    }

    fn window_shape(&self, l: usize, n: usize) -> Vec<usize> {
        let mut s = vec![self.bond(l - 1)];
        s.extend(std::iter::repeat_n(self.phys_dim(), n));
        s.push(self.bond(l + n - 1));
        s
    }

    /// `Λ_{ℓ-1} B_ℓ … B_{ℓ+n-1}`, the ground state seen through window `ℓ`.
    fn ground_window(&self, l: usize, n: usize) -> Result<Tensor<T>> {
        let mut sites = vec![scale_leg(&self.b[l - 1], "l", &self.kept.lambda[l - 1])?];
        sites.extend(self.b[l..l + n - 1].iter().cloned());
        chain_window(&sites)
    }

    fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || (self.a == other.a && self.b == other.b)
    }
}

/// Contracts a chain of local `l`, `p`, `r` tensors into one window tensor.
pub fn chain_window<T: Scalar>(sites: &[Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = sites.first() else {
        return Err(Error::InvalidArgument("empty chain".into()));
    };
    let mut x = first.clone().rename("p", "p1")?;
    for (j, s) in sites.iter().enumerate().skip(1) {
        let s = s.clone().renamed(&[("p", format!("p{}", j + 1).as_str()), ("r", "_r")])?;
        x = contract(&x, &s, &[("r", "l")])?.rename("_r", "r")?;
    }
    x.permute(&window_legs(sites.len()))
}

/// Exact split of a window tensor into `n` local tensors by successive QR.
pub fn split_window<T: Scalar>(w: &Tensor<T>, n: usize) -> Result<Vec<Tensor<T>>> {
    let mut out = Vec::with_capacity(n);
    let mut rest = w.clone();
    for i in 1..n {
        let p = format!("p{i}");
        let (q, r) = qr_split(&rest, &["l", p.as_str()], "_k")?;
        out.push(q.renamed(&[(p.as_str(), "p"), ("_k", "r")])?.permute(&["l", "p", "r"])?);
        rest = r.rename("_k", "l")?;
    }
    out.push(rest.rename(&format!("p{n}"), "p")?.permute(&["l", "p", "r"])?);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ExcitationState<T = f64> {
    basis: Arc<AnsatzBasis<T>>,
    n: usize,
    /// `T^ℓ` at index `ℓ-1`, legs [`window_legs`].
    windows: Vec<Tensor<T>>,
}

impl<T: Scalar> ExcitationState<T> {
    pub fn zeros(basis: Arc<AnsatzBasis<T>>, n: usize) -> Result<Self> {
        let len = basis.len();
        if n < 1 || n > len {
            return Err(Error::OutOfRange(format!("window size {n} outside [1, {len}]")));
        }
        let legs = window_legs(n);
        let windows = (1..=len + 1 - n)
            .map(|l| Tensor::zeros(&legs, &basis.window_shape(l, n)))
            .collect::<Result<_>>()?;
        Ok(Self { basis, n, windows })
    }

    pub fn from_windows(basis: Arc<AnsatzBasis<T>>, n: usize, windows: Vec<Tensor<T>>) -> Result<Self> {
        let z = Self::zeros(basis, n)?;
        if windows.len() != z.windows.len() {
            return Err(Error::Shape(format!("{} windows for {} branches", windows.len(), z.windows.len())));
        }
        for (w, r) in windows.iter().zip(&z.windows) {
            if w.legs() != r.legs() || w.shape() != r.shape() {
                return Err(Error::Shape(format!("window {:?} {:?}, expected {:?}", w.legs(), w.shape(), r.shape())));
            }
        }
        Ok(Self { windows, ..z })
    }

    /// The ground state written in ansatz form: only the last branch is occupied.
    pub fn ground_state(basis: Arc<AnsatzBasis<T>>, n: usize) -> Result<Self> {
        let mut x = Self::zeros(basis, n)?;
        let lp = x.last_branch();
        x.windows[lp - 1] = x.basis.ground_window(lp, n)?;
        Ok(x)
    }

    pub fn basis(&self) -> &Arc<AnsatzBasis<T>> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// `ℓ' = L − n + 1`.
    pub fn last_branch(&self) -> usize {
        self.len() + 1 - self.n
    }

    pub fn window(&self, l: usize) -> &Tensor<T> {
        &self.windows[l - 1]
    }

    pub fn windows(&self) -> &[Tensor<T>] {
        &self.windows
    }

    /// `T^ℓ_1 … T^ℓ_n` of branch `ℓ`.
    pub fn chain(&self, l: usize) -> Result<Vec<Tensor<T>>> {
        split_window(&self.windows[l - 1], self.n)
    }

    pub fn num_params(&self) -> usize {
        self.windows.iter().map(Tensor::len).sum()
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.windows.iter().flat_map(|w| w.data().iter().copied()).collect()
    }

    pub fn with_flat(&self, v: &[T]) -> Result<Self> {
        if v.len() != self.num_params() {
            return Err(Error::Shape(format!("{} values for {} parameters", v.len(), self.num_params())));
        }
        let mut out = self.clone();
        let mut off = 0;
        for w in &mut out.windows {
            let k = w.len();
            w.data_mut().copy_from_slice(&v[off..off + k]);
            off += k;
        }
        Ok(out)
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        for w in &mut out.windows {
            w.scale_mut(a);
        }
        out
    }

    /// Largest `‖A_ℓ† T^ℓ‖` over the constrained branches.
    pub fn gauge_deviation(&self) -> Result<T> {
        let mut m = T::zero();
        for l in 1..self.last_branch() {
            let a = self.basis.a(l).clone().renamed(&[("p", "p1"), ("r", "_k")])?;
            let c = contract(&a, &self.windows[l - 1], &[("l", "l"), ("p1", "p1")])?;
            m = m.max(c.norm());
        }
        Ok(m)
    }

    /// Branch `ℓ` as a plain MPS.
    pub fn branch_mps(&self, l: usize) -> Result<Mps<T>> {
        let len = self.len();
        let mut sites: Vec<Tensor<T>> = (1..l).map(|s| self.basis.a(s).clone()).collect();
        sites.extend(self.chain(l)?);
        sites.extend((l + self.n..=len).map(|s| self.basis.b(s).clone()));
        let sites = sites
            .into_iter()
            .enumerate()
            .map(|(i, t)| site_legs_from_local(t, i + 1))
            .collect::<Result<Vec<_>>>()?;
        Mps::from_sites(sites, CanonicalForm::Unnormalized)
    }

    /// Sum of all branches as one MPS with block-diagonal bonds.
    pub fn materialize(&self) -> Result<Mps<T>> {
        let mut acc = self.branch_mps(1)?;
        for l in 2..=self.last_branch() {
            acc = mps_add(&acc, &self.branch_mps(l)?, T::one(), T::one())?;
        }
        Ok(acc)
    }

    pub fn dense(&self) -> Result<DVector<T>> {
        let mut v = crate::ed::dense_state(&self.branch_mps(1)?)?.amplitudes;
        for l in 2..=self.last_branch() {
            v += crate::ed::dense_state(&self.branch_mps(l)?)?.amplitudes;
        }
        Ok(v)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.basis.same_as(&other.basis) {
            return Err(Error::MismatchedReference);
        }
        if self.n != other.n {
            return Err(Error::InvalidArgument(format!("window sizes {} and {}", self.n, other.n)));
        }
        Ok(())
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.n.hash(&mut h);
        for w in &self.windows {
            w.shape().hash(&mut h);
            for x in w.data() {
                x.as_f64().to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

/// Projects the first site of every constrained window onto the discarded space of `A_ℓ`.
pub fn gauge_fix_t1<T: Scalar>(x: &ExcitationState<T>) -> Result<ExcitationState<T>> {
    let mut out = x.clone();
    for l in 1..x.last_branch() {
        out.windows[l - 1] = project_left(x.basis.a(l), &x.windows[l - 1])?;
    }
    Ok(out)
}

/// Random gauge-fixed state of unit norm.
pub fn init_excitation<T: Scalar>(basis: Arc<AnsatzBasis<T>>, n: usize, seed: u64) -> Result<ExcitationState<T>> {
    let mut x = ExcitationState::zeros(basis, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in &mut x.windows {
        for v in w.data_mut() {
            *v = T::of(StandardNormal.sample(&mut rng));
        }
    }
    let x = gauge_fix_t1(&x)?;
    let nrm = ex_overlap(&x, &x)?.sqrt();
    if nrm <= T::tol(1e-300) {
        return Err(Error::InvalidArgument("ansatz space is empty".into()));
    }
    Ok(x.scaled(T::one() / nrm))
}

/// `⟨x|y⟩` as a single sum over branches.
pub fn ex_overlap<T: Scalar>(x: &ExcitationState<T>, y: &ExcitationState<T>) -> Result<T> {
    x.check_compatible(y)?;
    let mut s = T::zero();
    for (a, b) in x.windows.iter().zip(&y.windows) {
        s += a.dot(b)?;
    }
    Ok(s)
}

/// `x + a y`, branch by branch.
pub fn ex_axpy<T: Scalar>(x: &ExcitationState<T>, a: T, y: &ExcitationState<T>) -> Result<ExcitationState<T>> {
    x.check_compatible(y)?;
    let mut out = x.clone();
    for (w, v) in out.windows.iter_mut().zip(&y.windows) {
        w.axpy(a, v)?;
    }
    Ok(out)
}

/// Mixed environments of `⟨Ψ|H|x⟩`.
///
/// `𝓛^m_ℓ` holds `A`s on the bra side and, on the ket side, the first `m`
/// tensors of branch `ℓ-m+1` (for `m < n`) or the completed branches
/// `ℓ' ≤ ℓ-n+1` (for `m = n`). `𝓡^m_ℓ` mirrors this with `B`s.
#[derive(Clone, Debug)]
pub struct ExcEnvCache<T = f64> {
    n: usize,
    tag: u64,
    ws: Vec<Tensor<T>>,
    /// `lefts[m][ℓ]` for `ℓ = 0..=L`.
    lefts: Vec<Vec<Option<Tensor<T>>>>,
    /// `rights[m][ℓ-1]` for `ℓ = 1..=L+1`.
    rights: Vec<Vec<Option<Tensor<T>>>>,
    chains: Vec<Option<Vec<Tensor<T>>>>,
}

impl<T: Scalar> ExcEnvCache<T> {
    /// `𝓛^m_ℓ`, or `None` where it vanishes.
    pub fn left(&self, m: usize, l: usize) -> Option<&Tensor<T>> {
        self.lefts[m][l].as_ref()
    }

    pub fn right(&self, m: usize, l: usize) -> Option<&Tensor<T>> {
        self.rights[m][l - 1].as_ref()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn mpo_tag<T: Scalar>(h: &Mpo<T>) -> u64 {
    let mut s = DefaultHasher::new();
    for w in h.sites() {
        w.shape().hash(&mut s);
        for x in w.data() {
            x.as_f64().to_bits().hash(&mut s);
        }
    }
    s.finish()
}

fn add_env<T: Scalar>(a: Option<Tensor<T>>, b: Option<Tensor<T>>) -> Result<Option<Tensor<T>>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(a.add(&b)?),
        (a, None) => a,
        (None, b) => b,
    })
}

pub fn build_exc_env<T: Scalar>(x: &ExcitationState<T>, h: &Mpo<T>) -> Result<ExcEnvCache<T>> {
    let len = x.len();
    if h.len() != len || h.phys_dim() != x.basis.phys_dim() {
        return Err(Error::Shape("MPO and ground state shapes differ".into()));
    }
    let dev = x.gauge_deviation()?.as_f64();
    let scale = ex_overlap(x, x)?.sqrt().as_f64().max(1.0);
    if dev > 1e-10 * scale {
        return Err(Error::NotGaugeFixed(dev));
    }
    let n = x.n;
    let lp = x.last_branch();
    let basis = &x.basis;
    let ws: Vec<Tensor<T>> = (1..=len).map(|l| mpo_local(h, l)).collect::<Result<_>>()?;
    let chains: Vec<Option<Vec<Tensor<T>>>> = (1..=lp)
        .map(|l| {
            if x.windows[l - 1].max_abs() == T::zero() {
                Ok(None)
            } else {
                x.chain(l).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let branch = |s: isize| -> Option<&Vec<Tensor<T>>> {
        if s >= 1 && s as usize <= lp {
            chains[s as usize - 1].as_ref()
        } else {
            None
        }
    };

    let mut lefts: Vec<Vec<Option<Tensor<T>>>> = vec![vec![None; len + 1]; n + 1];
    lefts[0][0] = Some(unit_env()?);
    for l in 1..=len {
        let (a, w) = (basis.a(l), &ws[l - 1]);
        let prev0 = lefts[0][l - 1].as_ref().expect("plain environment");
        lefts[0][l] = Some(env_left_step(prev0, a, w, a)?);
        for m in 1..n {
            if let (Some(c), Some(prev)) = (branch(l as isize - m as isize + 1), lefts[m - 1][l - 1].as_ref()) {
                lefts[m][l] = Some(env_left_step(prev, a, w, &c[m - 1])?);
            }
        }
        let carried = match lefts[n][l - 1].as_ref() {
            Some(prev) => Some(env_left_step(prev, a, w, basis.b(l))?),
            None => None,
        };
        let fresh = match (branch(l as isize - n as isize + 1), lefts[n - 1][l - 1].as_ref()) {
            (Some(c), Some(prev)) => Some(env_left_step(prev, a, w, &c[n - 1])?),
            _ => None,
        };
        lefts[n][l] = add_env(carried, fresh)?;
    }

    let mut rights: Vec<Vec<Option<Tensor<T>>>> = vec![vec![None; len + 1]; n + 1];
    rights[0][len] = Some(unit_env()?);
    for l in (1..=len).rev() {
        let (b, w) = (basis.b(l), &ws[l - 1]);
        let prev0 = rights[0][l].as_ref().expect("plain environment");
        rights[0][l - 1] = Some(env_right_step(prev0, b, w, b)?);
        for m in 1..n {
            if let (Some(c), Some(prev)) = (branch(l as isize + m as isize - n as isize), rights[m - 1][l].as_ref()) {
                rights[m][l - 1] = Some(env_right_step(prev, b, w, &c[n - m])?);
            }
        }
        let carried = match rights[n][l].as_ref() {
            Some(prev) => Some(env_right_step(prev, b, w, basis.a(l))?),
            None => None,
        };
        let fresh = match (branch(l as isize), rights[n - 1][l].as_ref()) {
            (Some(c), Some(prev)) => Some(env_right_step(prev, b, w, &c[0])?),
            _ => None,
        };
        rights[n][l - 1] = add_env(carried, fresh)?;
    }

    let mut tag = DefaultHasher::new();
    x.fingerprint().hash(&mut tag);
    mpo_tag(h).hash(&mut tag);
    Ok(ExcEnvCache {
        n,
        tag: tag.finish(),
        ws,
        lefts,
        rights,
        chains,
    })
}

/// `P^{ns} H P^{ns} |x⟩` in ansatz form.
pub fn apply_projected_h<T: Scalar>(x: &ExcitationState<T>, h: &Mpo<T>, env: &ExcEnvCache<T>) -> Result<ExcitationState<T>> {
    let mut tag = DefaultHasher::new();
    x.fingerprint().hash(&mut tag);
    mpo_tag(h).hash(&mut tag);
    if env.n != x.n || env.tag != tag.finish() {
        return Err(Error::StaleEnvironment);
    }
    let n = x.n;
    let lp = x.last_branch();
    let basis = &x.basis;
    let mut out = x.clone();
    for l in 1..=lp {
        let ws = &env.ws[l - 1..l - 1 + n];
        let r0 = env.rights[0][l + n - 1].as_ref().expect("plain environment");
        let l0 = env.lefts[0][l - 1].as_ref().expect("plain environment");
        let mut acc = apply_window(l0, ws, r0, &x.windows[l - 1])?;
        for m in 1..=n {
            if let Some(left) = env.lefts[m][l - 1].as_ref() {
                let mut sites: Vec<Tensor<T>> = if m < n { env.chains[l - m - 1].as_ref().expect("occupied branch")[m..].to_vec() } else { Vec::new() };
                sites.extend((l + n - m..l + n).map(|s| basis.b(s).clone()));
                acc.axpy(T::one(), &apply_window(left, ws, r0, &chain_window(&sites)?)?)?;
            }
            if let Some(right) = env.rights[m][l + n - 1].as_ref() {
                let mut sites: Vec<Tensor<T>> = (l..l + m).map(|s| basis.a(s).clone()).collect();
                if m < n {
                    sites.extend(env.chains[l + m - 1].as_ref().expect("occupied branch")[..n - m].iter().cloned());
                }
                acc.axpy(T::one(), &apply_window(l0, ws, right, &chain_window(&sites)?)?)?;
            }
        }
        out.windows[l - 1] = if l < lp { project_left(basis.a(l), &acc)? } else { acc };
    }
    Ok(out)
}

/// Builds the environments and applies the projected Hamiltonian.
pub fn apply_h<T: Scalar>(x: &ExcitationState<T>, h: &Mpo<T>) -> Result<ExcitationState<T>> {
    apply_projected_h(x, h, &build_exc_env(x, h)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationOpts {
    pub lanczos: LanczosOpts,
    pub seed: u64,
}

impl Default for ExcitationOpts {
    fn default() -> Self {
        Self {
            lanczos: LanczosOpts {
                max_iter: 400,
                tol: 1e-10,
                krylov_dim: 60,
                keep: 6,
            },
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExcitationResult<T = f64> {
    pub energy: T,
    pub state: ExcitationState<T>,
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
    /// `⟨S²_tot⟩` of the unit-norm excitation.
    pub s_squared: T,
    pub s_z: T,
}

/// Lowest eigenpair of `P^{ns} H P^{ns}` orthogonal to the ground state.
pub fn solve_lowest_excitation<T: Scalar>(
    gs: &Mps<T>,
    h: &Mpo<T>,
    n: usize,
    opts: &ExcitationOpts,
) -> Result<ExcitationResult<T>> {
    let basis = AnsatzBasis::from_state(gs)?;
    solve_in_basis(basis, h, n, opts)
}

pub fn solve_in_basis<T: Scalar>(
    basis: Arc<AnsatzBasis<T>>,
    h: &Mpo<T>,
    n: usize,
    opts: &ExcitationOpts,
) -> Result<ExcitationResult<T>> {
    let x0 = init_excitation(basis.clone(), n, opts.seed)?;
    let g = ExcitationState::ground_state(basis, n)?;
    let gn = ex_overlap(&g, &g)?.sqrt();
    let g = g.scaled(T::one() / gn).to_flat();
    let map = |v: &[T]| Ok(apply_h(&gauge_fix_t1(&x0.with_flat(v)?)?, h)?.to_flat());
    let r = lanczos_lowest(map, &x0.to_flat(), &[g], &opts.lanczos)?;
    if !r.converged {
        warn!("excitation solve stopped at residual {:e}", r.residual.as_f64());
    }
    let state = gauge_fix_t1(&x0.with_flat(&r.vector)?)?;
    let len = state.len();
    let s_squared = ex_overlap(&state, &apply_h(&state, &total_spin_sq_mpo(len)?)?)?;
    let s_z = ex_overlap(&state, &apply_h(&state, &total_sz_mpo(len)?)?)?;
    info!(
        "excitation n={n}: E={:.12} residual={:e} S^2={:.6}",
        r.value.as_f64(),
        r.residual.as_f64(),
        s_squared.as_f64()
    );
    Ok(ExcitationResult {
        energy: r.value,
        state,
        residual: r.residual,
        converged: r.converged,
        iterations: r.iterations,
        s_squared,
        s_z,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationManifest {
    pub kind: String,
    pub n: usize,
    #[serde(rename = "L")]
    pub length: usize,
    pub d: usize,
    #[serde(rename = "D")]
    pub bond_dim: usize,
    #[serde(rename = "E_ex")]
    pub energy: f64,
    pub residual: f64,
    pub seed: u64,
    /// Archive of the ground state the windows refer to.
    pub ground_state: Option<String>,
}

/// Writes `manifest.json` and one `window_{ℓ}.ten` blob per branch.
pub fn save_excitation<T: Scalar>(x: &ExcitationState<T>, manifest: &ExcitationManifest, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    for (i, w) in x.windows.iter().enumerate() {
        blob::save_tensor(w, &dir.join(format!("window_{}.ten", i + 1)))?;
    }
    Ok(())
}

pub fn load_excitation<T: Scalar>(
    dir: &Path,
    basis: Arc<AnsatzBasis<T>>,
) -> Result<(ExcitationState<T>, ExcitationManifest)> {
    let m: ExcitationManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if m.kind != "excitation" {
        return Err(Error::Format(format!("archive kind is {:?}", m.kind)));
    }
    if m.length != basis.len() {
        return Err(Error::MismatchedReference);
    }
    let legs = window_legs(m.n);
    let windows = (1..=m.length + 1 - m.n)
        .map(|l| blob::load_tensor(&dir.join(format!("window_{l}.ten")), &legs))
        .collect::<Result<Vec<_>>>()?;
    Ok((ExcitationState::from_windows(basis, m.n, windows)?, m))
}
