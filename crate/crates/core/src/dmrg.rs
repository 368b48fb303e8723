//! Environments, effective Hamiltonians and DMRG sweeps.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{lanczos_lowest, LanczosOpts};
use crate::linalg::{lq_split, qr_split};
use crate::mpo::{mpo_legs, Mpo};
use crate::mps::{canonicalize, local_legs, site_legs_from_local, transfer_left, transfer_right};
use crate::mps::{CanonicalForm, CanonicalTarget, Mps};
use crate::scalar::Scalar;
use crate::tensor::{contract, svd_split, Tensor, TruncationPolicy};

/// MPO site `l` with legs renamed to `wl`, `p` (output), `q` (input), `wr`.
pub fn mpo_local<T: Scalar>(h: &Mpo<T>, l: usize) -> Result<Tensor<T>> {
    let [wl, p, q, wr] = mpo_legs(l);
    h.site(l)
        .clone()
        .renamed(&[(wl.as_str(), "wl"), (p.as_str(), "p"), (q.as_str(), "q"), (wr.as_str(), "wr")])
}

/// Trivial boundary environment with legs `[a, w, b]`.
pub fn unit_env<T: Scalar>() -> Result<Tensor<T>> {
    Tensor::from_fn(&["a", "w", "b"], &[1, 1, 1], |_| T::one())
}

/// Extends a left environment `[a, w, b]` by one site; `bra` and `ket` carry `l`, `p`, `r`.
pub fn env_left_step<T: Scalar>(env: &Tensor<T>, bra: &Tensor<T>, w: &Tensor<T>, ket: &Tensor<T>) -> Result<Tensor<T>> {
    let k = ket.clone().renamed(&[("p", "q"), ("r", "_b")])?;
    let t = contract(env, &k, &[("b", "l")])?;
    let t = contract(&t, w, &[("w", "wl"), ("q", "q")])?;
    let br = bra.clone().rename("r", "_a")?;
    let t = contract(&br, &t, &[("l", "a"), ("p", "p")])?;
    t.renamed(&[("_a", "a"), ("wr", "w"), ("_b", "b")])?.permute(&["a", "w", "b"])
}

/// Extends a right environment `[a, w, b]` by one site to the left.
pub fn env_right_step<T: Scalar>(env: &Tensor<T>, bra: &Tensor<T>, w: &Tensor<T>, ket: &Tensor<T>) -> Result<Tensor<T>> {
    let k = ket.clone().renamed(&[("p", "q"), ("l", "_b")])?;
    let t = contract(&k, env, &[("r", "b")])?;
    let t = contract(w, &t, &[("wr", "w"), ("q", "q")])?;
    let br = bra.clone().rename("l", "_a")?;
    let t = contract(&br, &t, &[("r", "a"), ("p", "p")])?;
    t.renamed(&[("_a", "a"), ("wl", "w"), ("_b", "b")])?.permute(&["a", "w", "b"])
}

/// Left and right environments of `⟨ψ|H|ψ⟩` built from the plain site tensors.
#[derive(Clone, Debug)]
pub struct EnvCache<T = f64> {
    /// `L_0 … L_L`.
    pub lefts: Vec<Tensor<T>>,
    /// `R_1 … R_{L+1}` stored at index `ℓ-1`.
    pub rights: Vec<Tensor<T>>,
}

impl<T: Scalar> EnvCache<T> {
    pub fn left(&self, l: usize) -> &Tensor<T> {
        &self.lefts[l]
    }

    pub fn right(&self, l: usize) -> &Tensor<T> {
        &self.rights[l - 1]
    }

    /// `⟨ψ|H|ψ⟩` from the environments meeting at bond `b`.
    pub fn energy_at(&self, b: usize) -> Result<T> {
        self.lefts[b].dot(&self.rights[b])
    }
}

fn check_shapes<T: Scalar>(psi: &Mps<T>, h: &Mpo<T>) -> Result<()> {
    if psi.len() != h.len() || psi.phys_dim() != h.phys_dim() {
        return Err(Error::Shape(format!(
            "state with L={}, d={} against operator with L={}, d={}",
            psi.len(),
            psi.phys_dim(),
            h.len(),
            h.phys_dim()
        )));
    }
    Ok(())
}

pub fn build_env<T: Scalar>(psi: &Mps<T>, h: &Mpo<T>) -> Result<EnvCache<T>> {
    check_shapes(psi, h)?;
    let n = psi.len();
    let plain = psi.plain_sites()?;
    let sites: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(&plain[l - 1], l)).collect::<Result<_>>()?;
    let ws: Vec<Tensor<T>> = (1..=n).map(|l| mpo_local(h, l)).collect::<Result<_>>()?;
    let mut lefts = vec![unit_env()?];
    for l in 1..=n {
        lefts.push(env_left_step(&lefts[l - 1], &sites[l - 1], &ws[l - 1], &sites[l - 1])?);
    }
    let mut rights = vec![unit_env()?; n + 1];
    for l in (1..=n).rev() {
        rights[l - 1] = env_right_step(&rights[l], &sites[l - 1], &ws[l - 1], &sites[l - 1])?;
    }
    Ok(EnvCache { lefts, rights })
}

fn pleg_i(i: usize) -> String {
    format!("p{i}")
}

/// Legs `l`, `p1 … pn`, `r` of an `n`-site window tensor.
pub fn window_legs(n: usize) -> Vec<String> {
    let mut v = vec!["l".to_string()];
    v.extend((1..=n).map(pleg_i));
    v.push("r".into());
    v
}

/// Applies the effective Hamiltonian of a window of `ws.len()` sites (or of a
/// bond when `ws` is empty) to `x`, which carries [`window_legs`].
pub fn apply_window<T: Scalar>(left: &Tensor<T>, ws: &[Tensor<T>], right: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut t = contract(left, x, &[("b", "l")])?;
    for (i, w) in ws.iter().enumerate() {
        let pi = pleg_i(i + 1);
        let wi = w.clone().renamed(&[("p", "_o"), ("wr", "_w")])?;
        t = contract(&t, &wi, &[("w", "wl"), (pi.as_str(), "q")])?.renamed(&[("_o", pi.as_str()), ("_w", "w")])?;
    }
    let r = right.clone().renamed(&[("a", "_r"), ("b", "r")])?;
    let t = contract(&t, &r, &[("w", "w"), ("r", "r")])?.renamed(&[("a", "l"), ("_r", "r")])?;
    t.permute(&window_legs(ws.len()))
}

/// Effective Hamiltonian on a bond (no site tensors) or on a window of sites.
#[derive(Clone, Debug)]
pub struct EffectiveHam<T = f64> {
    pub left: Tensor<T>,
    pub ws: Vec<Tensor<T>>,
    pub right: Tensor<T>,
}

impl<T: Scalar> EffectiveHam<T> {
    /// Window of `n` sites starting at `l`, with environments from `env`.
    pub fn window(env: &EnvCache<T>, h: &Mpo<T>, l: usize, n: usize) -> Result<Self> {
        if l < 1 || l + n > h.len() + 1 {
            return Err(Error::OutOfRange(format!("window of {n} sites at {l}")));
        }
        Ok(Self {
            left: env.left(l - 1).clone(),
            ws: (l..l + n).map(|s| mpo_local(h, s)).collect::<Result<_>>()?,
            right: env.right(l + n).clone(),
        })
    }

    /// Extents of the window tensor in [`window_legs`] order.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.left.shape()[2]];
        s.extend(self.ws.iter().map(|w| w.shape()[2]));
        s.push(self.right.shape()[2]);
        s
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let legs = window_legs(self.ws.len());
        if x.legs() != legs.as_slice() || x.shape() != self.shape().as_slice() {
            return Err(Error::Shape(format!("window tensor {:?} {:?}", x.legs(), x.shape())));
        }
        apply_window(&self.left, &self.ws, &self.right, x)
    }

    pub fn apply_flat(&self, v: &[T]) -> Result<Vec<T>> {
        let x = Tensor::new(&window_legs(self.ws.len()), &self.shape(), v.to_vec())?;
        Ok(self.apply(&x)?.into_data())
    }
}

/// Which local problem a sweep step solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DmrgMode {
    OneSite,
    TwoSite,
}

#[derive(Clone, Debug)]
pub struct DmrgOpts {
    pub mode: DmrgMode,
    pub n_sweeps: usize,
    pub policy: TruncationPolicy,
    pub conv_tol: f64,
    pub lanczos: LanczosOpts,
    /// Seed for fallback start vectors when a warm start vanishes.
    pub seed: u64,
}

impl Default for DmrgOpts {
    fn default() -> Self {
        Self {
            mode: DmrgMode::TwoSite,
            n_sweeps: 20,
            policy: TruncationPolicy::max_rank(32).with_cutoff(1e-14),
            conv_tol: 1e-10,
            lanczos: LanczosOpts::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult<T = f64> {
    /// Site-canonical at site 1.
    pub state: Mps<T>,
    pub energy: T,
    /// Energy after each full sweep.
    pub energies: Vec<T>,
    /// Energy after each half-sweep.
    pub half_sweep_energies: Vec<T>,
    /// Largest Lanczos residual of each sweep.
    pub residuals: Vec<T>,
    /// Largest discarded weight of each sweep.
    pub discarded: Vec<T>,
    pub converged: bool,
}

/// Run manifest written next to a ground-state archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: String,
    #[serde(rename = "L")]
    pub length: usize,
    pub d: usize,
    #[serde(rename = "D_cap")]
    pub d_cap: usize,
    pub seed: u64,
    pub sweeps: usize,
    pub energies: Vec<f64>,
    pub final_energy: f64,
    pub residuals: Vec<f64>,
}

pub fn dmrg_ground_state<T: Scalar>(psi0: &Mps<T>, h: &Mpo<T>, opts: &DmrgOpts) -> Result<DmrgResult<T>> {
    dmrg_orthogonal(psi0, h, &[], opts)
}

/// DMRG restricted to states orthogonal to every state in `orth`.
///
/// Each local problem is deflated against the projection of the `orth`
/// states onto the local variational space, so the optimized state stays
/// exactly orthogonal to them.
pub fn dmrg_orthogonal<T: Scalar>(psi0: &Mps<T>, h: &Mpo<T>, orth: &[Mps<T>], opts: &DmrgOpts) -> Result<DmrgResult<T>> {
    check_shapes(psi0, h)?;
    for o in orth {
        check_shapes(o, h)?;
    }
    opts.policy.validate()?;
    if opts.n_sweeps == 0 {
        return Err(Error::InvalidArgument("at least one sweep is required".into()));
    }
    let mut run = Sweeper::new(psi0, h, orth, opts)?;
    let mut energies = Vec::new();
    let mut half = Vec::new();
    let mut residuals = Vec::new();
    let mut discarded = Vec::new();
    let mut converged = false;
    for sweep in 0..opts.n_sweeps {
        run.max_residual = T::zero();
        run.max_discarded = T::zero();
        let e_right = run.sweep_right()?;
        half.push(e_right);
        let e = run.sweep_left()?;
        half.push(e);
        debug!("sweep {sweep}: E = {e:?}");
        let prev = energies.last().copied();
        energies.push(e);
        residuals.push(run.max_residual);
        discarded.push(run.max_discarded);
        if let Some(p) = prev {
            if (e - p).abs() < T::of(opts.conv_tol) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        warn!("DMRG did not reach |dE| < {} in {} sweeps", opts.conv_tol, opts.n_sweeps);
    }
    let energy = *energies.last().expect("at least one sweep");
    Ok(DmrgResult {
        state: run.into_state()?,
        energy,
        energies,
        half_sweep_energies: half,
        residuals,
        discarded,
        converged,
    })
}

struct Sweeper<'a, T> {
    n: usize,
    opts: &'a DmrgOpts,
    ws: Vec<Tensor<T>>,
    /// Local tensors; `A` left of the center, `B` right of it.
    sites: Vec<Tensor<T>>,
    lefts: Vec<Tensor<T>>,
    /// Indexed by `ℓ` for `R_ℓ`, `ℓ = 1..=L+1`; index 0 unused.
    rights: Vec<Tensor<T>>,
    orth: Vec<Vec<Tensor<T>>>,
    orth_lefts: Vec<Vec<Tensor<T>>>,
    orth_rights: Vec<Vec<Tensor<T>>>,
    rng: ChaCha8Rng,
    max_residual: T,
    max_discarded: T,
}

impl<'a, T: Scalar> Sweeper<'a, T> {
    fn new(psi0: &Mps<T>, h: &Mpo<T>, orth: &[Mps<T>], opts: &'a DmrgOpts) -> Result<Self> {
        let n = psi0.len();
        let (psi, _) = canonicalize(psi0, CanonicalTarget::Site(1))?;
        let sites: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(psi.site(l), l)).collect::<Result<_>>()?;
        let ws: Vec<Tensor<T>> = (1..=n).map(|l| mpo_local(h, l)).collect::<Result<_>>()?;
        let unit = unit_env()?;
        let mut rights = vec![unit.clone(); n + 2];
        for l in (2..=n).rev() {
            rights[l] = env_right_step(&rights[l + 1], &sites[l - 1], &ws[l - 1], &sites[l - 1])?;
        }
        let lefts = vec![unit; n + 1];
        let ounit = Tensor::from_fn(&["a", "b"], &[1, 1], |_| T::one())?;
        let mut orth_sites = Vec::new();
        let mut orth_lefts = Vec::new();
        let mut orth_rights = Vec::new();
        for o in orth {
            let plain = o.plain_sites()?;
            let os: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(&plain[l - 1], l)).collect::<Result<_>>()?;
            let mut r = vec![ounit.clone(); n + 2];
            for l in (2..=n).rev() {
                r[l] = transfer_right(&r[l + 1], &sites[l - 1], &os[l - 1])?;
            }
            orth_sites.push(os);
            orth_lefts.push(vec![ounit.clone(); n + 1]);
            orth_rights.push(r);
        }
        Ok(Self {
            n,
            opts,
            ws,
            sites,
            lefts,
            rights,
            orth: orth_sites,
            orth_lefts,
            orth_rights,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            max_residual: T::zero(),
            max_discarded: T::zero(),
        })
    }

    fn two_site(&self) -> bool {
        self.opts.mode == DmrgMode::TwoSite && self.n >= 2
    }

    /// Projection of each `orth` state onto the window `[l, l+k)`, orthonormalized.
    fn orth_vectors(&self, l: usize, k: usize) -> Result<Vec<Vec<T>>> {
        let mut out: Vec<Vec<T>> = Vec::new();
        for (i, os) in self.orth.iter().enumerate() {
            let mut t = self.orth_lefts[i][l - 1].clone().renamed(&[("a", "l"), ("b", "_x")])?;
            for j in 0..k {
                let s = os[l + j - 1].clone().renamed(&[("p", pleg_i(j + 1).as_str()), ("r", "_y")])?;
                t = contract(&t, &s, &[("_x", "l")])?.rename("_y", "_x")?;
            }
            let r = self.orth_rights[i][l + k].clone().rename("a", "r")?;
            let t = contract(&t, &r, &[("_x", "b")])?.permute(&window_legs(k))?;
            let mut v = t.into_data();
            for q in &out {
                let c = crate::linalg::dot(q, &v);
                crate::linalg::axpy(&mut v, -c, q);
            }
            let nv = crate::linalg::norm(&v);
            if nv > T::tol(1e-12) {
                crate::linalg::scale(&mut v, T::one() / nv);
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Solves the local problem on `[l, l+k)` starting from `x`.
    fn solve(&mut self, l: usize, x: Tensor<T>) -> Result<(T, Tensor<T>)> {
        let k = x.rank() - 2;
        let heff = EffectiveHam {
            left: self.lefts[l - 1].clone(),
            ws: self.ws[l - 1..l - 1 + k].to_vec(),
            right: self.rights[l + k].clone(),
        };
        let orth = self.orth_vectors(l, k)?;
        let shape = x.shape().to_vec();
        let mut init = x.into_data();
        for q in &orth {
            let c = crate::linalg::dot(q, &init);
            crate::linalg::axpy(&mut init, -c, q);
        }
        if crate::linalg::norm(&init) < T::tol(1e-8) {
            init = (0..init.len())
                .map(|_| T::of(StandardNormal.sample(&mut self.rng)))
                .collect();
        }
        let res = lanczos_lowest(|v| heff.apply_flat(v), &init, &orth, &self.opts.lanczos)?;
        self.max_residual = self.max_residual.max(res.residual);
        Ok((res.value, Tensor::new(&window_legs(k), &shape, res.vector)?))
    }

    fn update_left(&mut self, l: usize) -> Result<()> {
        let s = &self.sites[l - 1];
        self.lefts[l] = env_left_step(&self.lefts[l - 1], s, &self.ws[l - 1], s)?;
        for i in 0..self.orth.len() {
            self.orth_lefts[i][l] = transfer_left(&self.orth_lefts[i][l - 1], s, &self.orth[i][l - 1])?;
        }
        Ok(())
    }

    fn update_right(&mut self, l: usize) -> Result<()> {
        let s = &self.sites[l - 1];
        self.rights[l] = env_right_step(&self.rights[l + 1], s, &self.ws[l - 1], s)?;
        for i in 0..self.orth.len() {
            self.orth_rights[i][l] = transfer_right(&self.orth_rights[i][l + 1], s, &self.orth[i][l - 1])?;
        }
        Ok(())
    }

    fn two_site_tensor(&self, l: usize) -> Result<Tensor<T>> {
        let a = self.sites[l - 1].clone().renamed(&[("p", "p1"), ("r", "_m")])?;
        let b = self.sites[l].clone().rename("p", "p2")?;
        contract(&a, &b, &[("_m", "l")])?.permute(&window_legs(2))
    }

    /// Splits a two-site tensor; the singular values go right when `right` is set.
    fn split(&mut self, l: usize, theta: &Tensor<T>, right: bool) -> Result<()> {
        let split = svd_split(theta, &["l", "p1"], &self.opts.policy, "_b")?;
        self.max_discarded = self.max_discarded.max(split.discarded_weight);
        let kept: T = split.s.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
        let (u, v) = if right {
            (split.u.clone(), split.svh("_b")?.scale(T::one() / kept))
        } else {
            (split.us("_b")?.scale(T::one() / kept), split.vh.clone())
        };
        self.sites[l - 1] = u.renamed(&[("p1", "p"), ("_b", "r")])?.permute(&["l", "p", "r"])?;
        self.sites[l] = v.renamed(&[("_b", "l"), ("p2", "p")])?.permute(&["l", "p", "r"])?;
        Ok(())
    }

    fn sweep_right(&mut self) -> Result<T> {
        let mut e = T::zero();
        if self.two_site() {
            for l in 1..self.n {
                let theta = self.two_site_tensor(l)?;
                let (val, x) = self.solve(l, theta)?;
                e = val;
                self.split(l, &x, true)?;
                self.update_left(l)?;
            }
        } else {
            for l in 1..=self.n {
                let x = self.sites[l - 1].clone().rename("p", "p1")?;
                let (val, x) = self.solve(l, x)?;
                e = val;
                let x = x.rename("p1", "p")?;
                if l == self.n {
                    self.sites[l - 1] = x;
                    break;
                }
                let (q, r) = qr_split(&x, &["l", "p"], "_b")?;
                self.sites[l - 1] = q.rename("_b", "r")?;
                let next = contract(&r, &self.sites[l], &[("r", "l")])?.rename("_b", "l")?;
                self.sites[l] = next.permute(&["l", "p", "r"])?;
                self.update_left(l)?;
            }
        }
        Ok(e)
    }

    fn sweep_left(&mut self) -> Result<T> {
        let mut e = T::zero();
        if self.two_site() {
            for l in (1..self.n).rev() {
                let theta = self.two_site_tensor(l)?;
                let (val, x) = self.solve(l, theta)?;
                e = val;
                self.split(l, &x, false)?;
                self.update_right(l + 1)?;
            }
        } else {
            for l in (1..=self.n).rev() {
                let x = self.sites[l - 1].clone().rename("p", "p1")?;
                let (val, x) = self.solve(l, x)?;
                e = val;
                let x = x.rename("p1", "p")?;
                if l == 1 {
                    self.sites[0] = x;
                    break;
                }
                let (lm, q) = lq_split(&x, &["l"], "_b")?;
                self.sites[l - 1] = q.rename("_b", "l")?.permute(&["l", "p", "r"])?;
                let prev = contract(&self.sites[l - 2], &lm, &[("r", "l")])?.rename("_b", "r")?;
                self.sites[l - 2] = prev.permute(&["l", "p", "r"])?;
                self.update_right(l)?;
            }
        }
        Ok(e)
    }

    fn into_state(self) -> Result<Mps<T>> {
        let sites = self
            .sites
            .into_iter()
            .enumerate()
            .map(|(i, t)| site_legs_from_local(t, i + 1))
            .collect::<Result<Vec<_>>>()?;
        Mps::from_sites(sites, CanonicalForm::SiteCanonical(1))
    }
}
