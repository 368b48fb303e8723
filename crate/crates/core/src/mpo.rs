//! Matrix product operators for spin-1/2 chains.
//!
//! Site `ℓ` carries legs `w{ℓ-1}`, `p{ℓ}` (output), `q{ℓ}` (input), `w{ℓ}`.
//! Local basis index 0 is spin up, 1 is spin down.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::{Error, Result};
use crate::linalg::qr_split;
use crate::mps::{pleg, site_legs, vleg, Mps};
use crate::scalar::Scalar;
use crate::tensor::{contract, svd_split, Tensor, TruncationPolicy};

pub fn wleg(l: usize) -> String {
    format!("w{l}")
}

pub fn qleg(l: usize) -> String {
    format!("q{l}")
}

pub fn mpo_legs(l: usize) -> [String; 4] {
    [wleg(l - 1), pleg(l), qleg(l), wleg(l)]
}

#[derive(Clone, Debug)]
pub struct Mpo<T = f64> {
    d: usize,
    sites: Vec<Tensor<T>>,
}

/// Local spin-1/2 operators as row-major 2x2 arrays.
pub mod spin {
    pub const ID: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
    pub const SZ: [f64; 4] = [0.5, 0.0, 0.0, -0.5];
    pub const SP: [f64; 4] = [0.0, 1.0, 0.0, 0.0];
    pub const SM: [f64; 4] = [0.0, 0.0, 1.0, 0.0];
}

impl<T: Scalar> Mpo<T> {
    /// Builds an MPO from 4-leg tensors of shape `(w_{ℓ-1}, d, d, w_ℓ)`.
    pub fn from_sites(sites: Vec<Tensor<T>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("empty MPO".into()));
        }
        let d = sites[0].shape().get(1).copied().unwrap_or(0);
        let n = sites.len();
        let mut out = Vec::with_capacity(n);
        for (i, s) in sites.into_iter().enumerate() {
            if s.rank() != 4 || s.shape()[1] != d || s.shape()[2] != d {
                return Err(Error::Shape(format!("MPO site {} has shape {:?}", i + 1, s.shape())));
            }
            out.push(s.with_legs(&mpo_legs(i + 1))?);
        }
        if out[0].shape()[0] != 1 || out[n - 1].shape()[3] != 1 {
            return Err(Error::Shape("boundary bonds must have extent 1".into()));
        }
        for l in 1..n {
            if out[l - 1].shape()[3] != out[l].shape()[0] {
                return Err(Error::ExtentMismatch {
                    leg: wleg(l),
                    left: out[l - 1].shape()[3],
                    right: out[l].shape()[0],
                });
            }
        }
        Ok(Self { d, sites: out })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.d
    }

    pub fn site(&self, l: usize) -> &Tensor<T> {
        &self.sites[l - 1]
    }

    pub fn sites(&self) -> &[Tensor<T>] {
        &self.sites
    }

    /// Bond extents `w_0..w_L`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = vec![1];
        dims.extend(self.sites.iter().map(|s| s.shape()[3]));
        dims
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut sites = self.sites.clone();
        sites[0].scale_mut(c);
        Self { d: self.d, sites }
    }

    /// Frobenius norm of the represented operator.
    pub fn frobenius_norm(&self) -> Result<T> {
        let mut e = Tensor::from_fn(&["a", "b"], &[1, 1], |_| T::one())?;
        for l in 1..=self.len() {
            let [wl, p, q, wr] = mpo_legs(l);
            let kb = self.sites[l - 1].clone().renamed(&[(wl.as_str(), "_bl"), (wr.as_str(), "_br")])?;
            let t = contract(&e, &kb, &[("b", "_bl")])?;
            let t = contract(
                &t,
                &self.sites[l - 1],
                &[("a", wl.as_str()), (p.as_str(), p.as_str()), (q.as_str(), q.as_str())],
            )?;
            e = t.renamed(&[("_br", "b"), (wr.as_str(), "a")])?;
        }
        Ok(e.as_scalar()?.max(T::zero()).sqrt())
    }

    /// Exact `H|ψ⟩` with multiplied bond extents.
    pub fn apply(&self, psi: &Mps<T>) -> Result<Mps<T>> {
        if psi.len() != self.len() || psi.phys_dim() != self.d {
            return Err(Error::Shape("MPO and MPS shapes differ".into()));
        }
        let sites = psi.plain_sites()?;
        let mut out = Vec::with_capacity(self.len());
        for l in 1..=self.len() {
            let [wl, p, q, wr] = mpo_legs(l);
            let [vl, _, vr] = site_legs(l);
            let ket = sites[l - 1].clone().rename(&p, &q)?;
            let t = contract(&self.sites[l - 1], &ket, &[(q.as_str(), q.as_str())])?;
            let t = t.permute(&[wl.as_str(), vl.as_str(), p.as_str(), wr.as_str(), vr.as_str()])?;
            let sh = t.shape().to_vec();
            out.push(t.reshape(&site_legs(l), &[sh[0] * sh[1], sh[2], sh[3] * sh[4]])?);
        }
        Mps::from_sites(out, crate::mps::CanonicalForm::Unnormalized)
    }
}

/// Builds an MPO from a bulk operator-valued matrix: the first site keeps
/// row `start`, the last site keeps column `end`.
fn from_bulk<T: Scalar>(l: usize, w: usize, start: usize, end: usize, bulk: impl Fn(usize) -> Vec<(usize, usize, f64, [f64; 4])>) -> Result<Mpo<T>> {
    let d = 2;
    let mut sites = Vec::with_capacity(l);
    for site in 1..=l {
        let rows: Vec<usize> = if site == 1 { vec![start] } else { (0..w).collect() };
        let cols: Vec<usize> = if site == l { vec![end] } else { (0..w).collect() };
        let entries = bulk(site);
        let mut t = Tensor::zeros(&mpo_legs(site), &[rows.len(), d, d, cols.len()])?;
        let nc = cols.len();
        for &(a, b, c, op) in &entries {
            let (Some(i), Some(j)) = (rows.iter().position(|&r| r == a), cols.iter().position(|&x| x == b)) else {
                continue;
            };
            let data = t.data_mut();
            for s in 0..d {
                for sp in 0..d {
                    data[((i * d + s) * d + sp) * nc + j] += T::of(c * op[s * d + sp]);
                }
            }
        }
        sites.push(t);
    }
    Mpo::from_sites(sites)
}

/// Nearest-neighbour Heisenberg chain `J Σ S_ℓ·S_{ℓ+1}`, bulk bond dimension 5.
pub fn heisenberg_mpo<T: Scalar>(l: usize, j: f64) -> Result<Mpo<T>> {
    if l < 2 {
        return Err(Error::InvalidArgument("Heisenberg chain needs L >= 2".into()));
    }
    use spin::*;
    from_bulk(l, 5, 4, 0, |_| {
        vec![
            (0, 0, 1.0, ID),
            (1, 0, 1.0, SP),
            (2, 0, 1.0, SM),
            (3, 0, 1.0, SZ),
            (4, 1, 0.5 * j, SM),
            (4, 2, 0.5 * j, SP),
            (4, 3, j, SZ),
            (4, 4, 1.0, ID),
        ]
    })
}

/// `c·Σ_{ℓ<ℓ'} S_ℓ·S_ℓ' + onsite·L·1`, bond dimension 5.
fn all_pairs_mpo<T: Scalar>(l: usize, c: f64, onsite: f64) -> Result<Mpo<T>> {
    use spin::*;
    from_bulk(l, 5, 4, 0, |_| {
        vec![
            (0, 0, 1.0, ID),
            (1, 0, 1.0, SP),
            (2, 0, 1.0, SM),
            (3, 0, 1.0, SZ),
            (1, 1, 1.0, ID),
            (2, 2, 1.0, ID),
            (3, 3, 1.0, ID),
            (4, 1, 0.5 * c, SM),
            (4, 2, 0.5 * c, SP),
            (4, 3, c, SZ),
            (4, 0, onsite, ID),
            (4, 4, 1.0, ID),
        ]
    })
}

/// Total spin squared `S²_tot`.
pub fn total_spin_sq_mpo<T: Scalar>(l: usize) -> Result<Mpo<T>> {
    all_pairs_mpo(l, 2.0, 0.75)
}

/// Total magnetization `S^z_tot`.
pub fn total_sz_mpo<T: Scalar>(l: usize) -> Result<Mpo<T>> {
    use spin::*;
    from_bulk(l, 2, 1, 0, |_| vec![(0, 0, 1.0, ID), (1, 0, 1.0, SZ), (1, 1, 1.0, ID)])
}

/// Identity operator with bond dimension 1.
pub fn identity_mpo<T: Scalar>(l: usize, d: usize) -> Result<Mpo<T>> {
    let sites = (1..=l)
        .map(|s| Tensor::from_fn(&mpo_legs(s), &[1, d, d, 1], |i| if i[1] == i[2] { T::one() } else { T::zero() }))
        .collect::<Result<Vec<_>>>()?;
    Mpo::from_sites(sites)
}

/// `c S_i·S_j` for a single pair `i < j`, bond dimension 3 between them.
pub fn pair_mpo<T: Scalar>(l: usize, i: usize, j: usize, c: f64) -> Result<Mpo<T>> {
    if !(1 <= i && i < j && j <= l) {
        return Err(Error::OutOfRange(format!("pair ({i}, {j}) on L={l}")));
    }
    use spin::*;
    let mut sites = Vec::with_capacity(l);
    for s in 1..=l {
        let (wl, wr) = (if s > i && s <= j { 3 } else { 1 }, if s >= i && s < j { 3 } else { 1 });
        let mut t = Tensor::zeros(&mpo_legs(s), &[wl, 2, 2, wr])?;
        let mut put = |a: usize, b: usize, coef: f64, op: &[f64; 4]| {
            let data = t.data_mut();
            for x in 0..2 {
                for y in 0..2 {
                    data[((a * 2 + x) * 2 + y) * wr + b] += T::of(coef * op[x * 2 + y]);
                }
            }
        };
        if s == i {
            put(0, 0, 1.0, &SP);
            put(0, 1, 1.0, &SM);
            put(0, 2, 1.0, &SZ);
        } else if s == j {
            put(0, 0, 0.5 * c, &SM);
            put(1, 0, 0.5 * c, &SP);
            put(2, 0, c, &SZ);
        } else if wl == 3 {
            for k in 0..3 {
                put(k, k, 1.0, &ID);
            }
        } else {
            put(0, 0, 1.0, &ID);
        }
        sites.push(t);
    }
    Mpo::from_sites(sites)
}

/// Coupling `π²/(L² sin²(π(ℓ-ℓ')/L))` of the Haldane–Shastry ring.
pub fn haldane_shastry_coupling(l: usize, i: usize, j: usize) -> f64 {
    let n = l as f64;
    let s = (PI * (i as f64 - j as f64) / n).sin();
    PI * PI / (n * n * s * s)
}

/// Haldane–Shastry ring as a compressed MPO built from its pair terms.
pub fn haldane_shastry_mpo<T: Scalar>(l: usize, tol: f64) -> Result<Mpo<T>> {
    if l < 2 {
        return Err(Error::InvalidArgument("Haldane-Shastry ring needs L >= 2".into()));
    }
    let mut acc: Option<Mpo<T>> = None;
    for i in 1..l {
        // one batch per left site keeps intermediate bond dimensions small
        let mut terms: Vec<Mpo<T>> = acc.take().into_iter().collect();
        for j in i + 1..=l {
            terms.push(pair_mpo(l, i, j, haldane_shastry_coupling(l, i, j))?);
        }
        acc = Some(mpo_sum_compress(&terms, tol)?);
    }
    Ok(acc.expect("L >= 2 gives at least one pair"))
}

/// Block-diagonal sum of MPOs without compression.
pub fn mpo_block_sum<T: Scalar>(terms: &[Mpo<T>]) -> Result<Mpo<T>> {
    let first = terms.first().ok_or_else(|| Error::InvalidArgument("empty term list".into()))?;
    let (n, d) = (first.len(), first.d);
    if terms.iter().any(|t| t.len() != n || t.d != d) {
        return Err(Error::Shape("MPO terms differ in shape".into()));
    }
    let mut sites = Vec::with_capacity(n);
    for l in 1..=n {
        let (first_site, last_site) = (l == 1, l == n);
        let lefts: Vec<usize> = terms.iter().map(|t| t.sites[l - 1].shape()[0]).collect();
        let rights: Vec<usize> = terms.iter().map(|t| t.sites[l - 1].shape()[3]).collect();
        let wl = if first_site { 1 } else { lefts.iter().sum() };
        let wr = if last_site { 1 } else { rights.iter().sum() };
        let mut t = Tensor::zeros(&mpo_legs(l), &[wl, d, d, wr])?;
        let (mut ol, mut or) = (0, 0);
        for (k, term) in terms.iter().enumerate() {
            let src = &term.sites[l - 1];
            let (a, b) = (lefts[k], rights[k]);
            let data = t.data_mut();
            for i in 0..a {
                for s in 0..d * d {
                    for j in 0..b {
                        data[((ol + i) * d * d + s) * wr + or + j] += src.data()[(i * d * d + s) * b + j];
                    }
                }
            }
            if !first_site {
                ol += a;
            }
            if !last_site {
                or += b;
            }
        }
        sites.push(t);
    }
    Mpo::from_sites(sites)
}

/// `ca·a + cb·b`, uncompressed.
pub fn mpo_add<T: Scalar>(a: &Mpo<T>, b: &Mpo<T>, ca: T, cb: T) -> Result<Mpo<T>> {
    mpo_block_sum(&[a.scaled(ca), b.scaled(cb)])
}

/// Sum of `terms`, compressed by a left QR sweep and a right-to-left SVD
/// sweep dropping singular values below `tol` times the largest one.
pub fn mpo_sum_compress<T: Scalar>(terms: &[Mpo<T>], tol: f64) -> Result<Mpo<T>> {
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::InvalidPolicy(format!("tolerance {tol} outside [0, 1)")));
    }
    let sum = mpo_block_sum(terms)?;
    let scale = terms.iter().try_fold(T::zero(), |acc, t| Ok::<T, Error>(acc + t.frobenius_norm()?))?;
    compress(&sum, tol, scale)
}

fn compress<T: Scalar>(h: &Mpo<T>, tol: f64, scale: T) -> Result<Mpo<T>> {
    let n = h.len();
    let mut sites = h.sites.clone();
    for l in 1..n {
        let [wl, p, q, wr] = mpo_legs(l);
        let (qm, r) = qr_split(&sites[l - 1], &[wl.as_str(), p.as_str(), q.as_str()], "_b")?;
        sites[l - 1] = qm.rename("_b", &wr)?;
        let r = r.rename(&wr, "_c")?.rename("_b", &wr)?;
        sites[l] = contract(&r, &sites[l], &[("_c", wr.as_str())])?;
    }
    // noise floor relative to the summed term norms
    let floor = T::of(1e-14) * scale;
    for l in (2..=n).rev() {
        let [wl, p, q, wr] = mpo_legs(l);
        let split = svd_split(&sites[l - 1], &[wl.as_str()], &TruncationPolicy::exact().with_cutoff(tol), "_b")?;
        let keep = split.s.iter().take_while(|&&s| s > floor).count();
        let (mut u, mut vh) = (split.us("_b")?, split.vh);
        if keep == 0 {
            u = Tensor::zeros(&[wl.as_str(), "_b"], &[u.shape()[0], 1])?;
            vh = Tensor::zeros(&["_b", p.as_str(), q.as_str(), wr.as_str()], &[1, h.d, h.d, vh.shape()[3]])?;
        } else if keep < split.s.len() {
            u = take_leading(&u, "_b", keep)?;
            vh = take_leading(&vh, "_b", keep)?;
        }
        sites[l - 1] = vh.rename("_b", &wl)?;
        let u = u.rename(&wl, "_c")?.rename("_b", &wl)?;
        sites[l - 2] = contract(&sites[l - 2], &u, &[(wl.as_str(), "_c")])?;
    }
    Mpo::from_sites(sites)
}

/// Keeps the first `k` indices of `leg`.
fn take_leading<T: Scalar>(t: &Tensor<T>, leg: &str, k: usize) -> Result<Tensor<T>> {
    let i = t.leg_index(leg)?;
    let mut shape = t.shape().to_vec();
    shape[i] = k;
    Tensor::from_fn(t.legs(), &shape, |idx| t.get(idx))
}

/// `⟨ψ|H|ψ⟩` without normalization.
pub fn expectation<T: Scalar>(psi: &Mps<T>, h: &Mpo<T>) -> Result<T> {
    sandwich(psi, h, psi)
}

/// `⟨a|H|b⟩`.
pub fn sandwich<T: Scalar>(a: &Mps<T>, h: &Mpo<T>, b: &Mps<T>) -> Result<T> {
    if a.len() != h.len() || b.len() != h.len() || a.phys_dim() != h.d || b.phys_dim() != h.d {
        return Err(Error::Shape("MPO and MPS shapes differ".into()));
    }
    let sa = a.plain_sites()?;
    let sb = b.plain_sites()?;
    let mut e = Tensor::from_fn(&["a", "w", "b"], &[1, 1, 1], |_| T::one())?;
    for l in 1..=h.len() {
        let [wl, p, q, wr] = mpo_legs(l);
        let (vl, vr) = (vleg(l - 1), vleg(l));
        let ket = sb[l - 1].clone().renamed(&[(vl.as_str(), "_kl"), (p.as_str(), q.as_str()), (vr.as_str(), "_kr")])?;
        let t = contract(&e, &ket, &[("b", "_kl")])?;
        let t = contract(&t, &h.sites[l - 1], &[("w", wl.as_str()), (q.as_str(), q.as_str())])?;
        let t = contract(&t, &sa[l - 1], &[("a", vl.as_str()), (p.as_str(), p.as_str())])?;
        e = t.renamed(&[("_kr", "b"), (wr.as_str(), "w"), (vr.as_str(), "a")])?;
    }
    e.as_scalar()
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    kind: String,
    #[serde(rename = "L")]
    length: usize,
    d: usize,
    bond_dims: Vec<usize>,
    format_version: u32,
}

pub fn save_mpo<T: Scalar>(h: &Mpo<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        kind: "mpo".into(),
        length: h.len(),
        d: h.d,
        bond_dims: h.bond_dims(),
        format_version: crate::mps::FORMAT_VERSION,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    for (i, s) in h.sites.iter().enumerate() {
        blob::save_tensor(s, &dir.join(format!("site_{}.ten", i + 1)))?;
    }
    Ok(())
}

pub fn load_mpo<T: Scalar>(dir: &Path) -> Result<Mpo<T>> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.kind != "mpo" {
        return Err(Error::Format(format!("archive kind is {:?}", manifest.kind)));
    }
    if manifest.format_version != crate::mps::FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {}", manifest.format_version)));
    }
    let sites = (1..=manifest.length)
        .map(|l| blob::load_tensor(&dir.join(format!("site_{l}.ten")), &mpo_legs(l)))
        .collect::<Result<Vec<_>>>()?;
    let h = Mpo::from_sites(sites)?;
    if h.bond_dims() != manifest.bond_dims || h.d != manifest.d {
        return Err(Error::Format("manifest disagrees with site tensors".into()));
    }
    Ok(h)
}
