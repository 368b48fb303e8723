//! Open-boundary matrix product states.
//!
//! Site `ℓ` (1-based) carries legs `v{ℓ-1}`, `p{ℓ}`, `v{ℓ}`. The dummy bonds
//! `v0` and `v{L}` have extent 1.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::{Error, Result};
use crate::linalg::{lq_split, qr_split};
use crate::scalar::Scalar;
use crate::tensor::{contract, scale_leg, svd_split, Tensor, TruncationPolicy};

pub fn vleg(l: usize) -> String {
    format!("v{l}")
}

pub fn pleg(l: usize) -> String {
    format!("p{l}")
}

/// Leg names of site `l`.
pub fn site_legs(l: usize) -> [String; 3] {
    [vleg(l - 1), pleg(l), vleg(l)]
}

#[derive(Clone, Debug, PartialEq)]
pub enum CanonicalForm<T = f64> {
    Unnormalized,
    /// Orthogonality center on a site.
    SiteCanonical(usize),
    /// Orthogonality center on bond `ℓ` with its singular values.
    BondCanonical(usize, Vec<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanonicalTarget {
    Site(usize),
    Bond(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Debug)]
pub struct Mps<T = f64> {
    d: usize,
    sites: Vec<Tensor<T>>,
    form: CanonicalForm<T>,
}

impl<T: Scalar> Mps<T> {
    /// Builds an MPS from site tensors, relabeling their legs to the standard
    /// scheme. Each tensor must have shape `(D_{ℓ-1}, d, D_ℓ)`.
    pub fn from_sites(sites: Vec<Tensor<T>>, form: CanonicalForm<T>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("empty MPS".into()));
        }
        let d = sites[0].shape().get(1).copied().unwrap_or(0);
        let n = sites.len();
        let mut out = Vec::with_capacity(n);
        for (i, s) in sites.into_iter().enumerate() {
            if s.rank() != 3 || s.shape()[1] != d {
                return Err(Error::Shape(format!("site {} has shape {:?}", i + 1, s.shape())));
            }
            out.push(s.with_legs(&site_legs(i + 1))?);
        }
        if out[0].shape()[0] != 1 || out[n - 1].shape()[2] != 1 {
            return Err(Error::Shape("boundary bonds must have extent 1".into()));
        }
        for l in 1..n {
            if out[l - 1].shape()[2] != out[l].shape()[0] {
                return Err(Error::ExtentMismatch {
                    leg: vleg(l),
                    left: out[l - 1].shape()[2],
                    right: out[l].shape()[0],
                });
            }
        }
        match &form {
            CanonicalForm::SiteCanonical(c) if *c < 1 || *c > n => {
                return Err(Error::OutOfRange(format!("center {c} outside [1, {n}]")));
            }
            CanonicalForm::BondCanonical(b, lam) => {
                if *b > n {
                    return Err(Error::OutOfRange(format!("bond {b} outside [0, {n}]")));
                }
                let dim = if *b == 0 { 1 } else { out[b - 1].shape()[2] };
                if lam.len() != dim {
                    return Err(Error::Shape("bond weights do not match bond extent".into()));
                }
            }
            _ => {}
        }
        Ok(Self { d, sites: out, form })
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

    pub fn form(&self) -> &CanonicalForm<T> {
        &self.form
    }

    /// Site `l`, 1-based.
    pub fn site(&self, l: usize) -> &Tensor<T> {
        &self.sites[l - 1]
    }

    pub fn sites(&self) -> &[Tensor<T>] {
        &self.sites
    }

    /// Bond extents `D_0..D_L`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = vec![1];
        dims.extend(self.sites.iter().map(|s| s.shape()[2]));
        dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Site tensors whose plain product is the represented state; bond
    /// weights of a bond-canonical form are folded into an adjacent site.
    pub fn plain_sites(&self) -> Result<Vec<Tensor<T>>> {
        let mut sites = self.sites.clone();
        if let CanonicalForm::BondCanonical(b, lam) = &self.form {
            if *b >= 1 {
                sites[b - 1] = scale_leg(&sites[b - 1], &vleg(*b), lam)?;
            } else {
                sites[0] = scale_leg(&sites[0], &vleg(0), lam)?;
            }
        }
        Ok(sites)
    }

    /// Same state with every site scaled so the total picks up factor `c`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        let mut sites = self.plain_sites()?;
        sites[0].scale_mut(c);
        Ok(Self {
            d: self.d,
            sites,
            form: CanonicalForm::Unnormalized,
        })
    }

    pub fn norm(&self) -> Result<T> {
        Ok(overlap(self, self)?.max(T::zero()).sqrt())
    }

    /// Largest deviation from the isometry conditions implied by the form.
    pub fn form_deviation(&self) -> Result<T> {
        let (left_until, right_from) = match &self.form {
            CanonicalForm::Unnormalized => return Ok(T::zero()),
            CanonicalForm::SiteCanonical(c) => (*c - 1, *c + 1),
            CanonicalForm::BondCanonical(b, _) => (*b, *b + 1),
        };
        let mut dev = T::zero();
        for l in 1..=self.len() {
            let s = &self.sites[l - 1];
            let [vl, p, vr] = site_legs(l);
            if l <= left_until {
                let m = s.to_matrix(&[vl.as_str(), p.as_str()])?;
                dev = dev.max(crate::tensor::isometry_deviation(&m));
            } else if l >= right_from {
                let m = s.permute(&[p.as_str(), vr.as_str(), vl.as_str()])?.to_matrix(&[p.as_str(), vr.as_str()])?;
                dev = dev.max(crate::tensor::isometry_deviation(&m));
            }
        }
        Ok(dev)
    }
}

/// Random MPS in `SiteCanonical(1)` form with unit norm.
///
/// Bond extents are `min(cap, d^ℓ, d^{L-ℓ})`; `cap = None` means unlimited.
pub fn random_mps<T: Scalar>(l: usize, d: usize, cap: Option<usize>, seed: u64) -> Result<Mps<T>> {
    if l < 1 || d < 2 {
        return Err(Error::InvalidArgument(format!("need L >= 1 and d >= 2, got L={l}, d={d}")));
    }
    if cap == Some(0) {
        return Err(Error::InvalidArgument("bond cap must be positive".into()));
    }
    let dims = bond_profile(l, d, cap);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites = Vec::with_capacity(l);
    for i in 1..=l {
        let shape = [dims[i - 1], d, dims[i]];
        let n = shape.iter().product();
        let data: Vec<T> = (0..n)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                T::of(x)
            })
            .collect();
        sites.push(Tensor::new(&site_legs(i), &shape, data)?);
    }
    let psi = Mps::from_sites(sites, CanonicalForm::Unnormalized)?;
    Ok(canonicalize(&psi, CanonicalTarget::Site(1))?.0)
}

/// Bond extents `min(cap, d^ℓ, d^{L-ℓ})` for `ℓ = 0..L`.
pub fn bond_profile(l: usize, d: usize, cap: Option<usize>) -> Vec<usize> {
    let cap = cap.unwrap_or(usize::MAX);
    (0..=l)
        .map(|b| {
            let e = b.min(l - b);
            let mut x: usize = 1;
            for _ in 0..e {
                x = x.saturating_mul(d);
                if x >= cap {
                    break;
                }
            }
            x.min(cap)
        })
        .collect()
}

/// Product state `|σ_1 … σ_L⟩`, canonical with center on site 1.
pub fn product_state<T: Scalar>(d: usize, config: &[usize]) -> Result<Mps<T>> {
    if config.is_empty() {
        return Err(Error::InvalidArgument("empty configuration".into()));
    }
    let mut sites = Vec::with_capacity(config.len());
    for (i, &s) in config.iter().enumerate() {
        if s >= d {
            return Err(Error::OutOfRange(format!("local state {s} at site {} with d={d}", i + 1)));
        }
        sites.push(Tensor::from_fn(&site_legs(i + 1), &[1, d, 1], |idx| {
            if idx[1] == s {
                T::one()
            } else {
                T::zero()
            }
        })?);
    }
    Mps::from_sites(sites, CanonicalForm::SiteCanonical(1))
}

/// Brings `psi` into the requested canonical form with unit norm.
///
/// Returns the normalized state and the norm of the input.
pub fn canonicalize<T: Scalar>(psi: &Mps<T>, target: CanonicalTarget) -> Result<(Mps<T>, T)> {
    let n = psi.len();
    let center = match target {
        CanonicalTarget::Site(c) => {
            if c < 1 || c > n {
                return Err(Error::OutOfRange(format!("site {c} outside [1, {n}]")));
            }
            c
        }
        CanonicalTarget::Bond(b) => {
            if b > n {
                return Err(Error::OutOfRange(format!("bond {b} outside [0, {n}]")));
            }
            b.max(1)
        }
    };
    let mut sites = psi.plain_sites()?;
    for l in 1..center {
        let [vl, p, vr] = site_legs(l);
        let (q, r) = qr_split(&sites[l - 1], &[vl.as_str(), p.as_str()], "_b")?;
        sites[l - 1] = q.rename("_b", &vr)?;
        let r = r.rename(&vr, "_c")?.rename("_b", &vr)?;
        sites[l] = contract(&r, &sites[l], &[("_c", vr.as_str())])?;
    }
    for l in (center + 1..=n).rev() {
        let vl = vleg(l - 1);
        let (lm, q) = lq_split(&sites[l - 1], &[vl.as_str()], "_b")?;
        sites[l - 1] = q.rename("_b", &vl)?;
        let lm = lm.rename(&vl, "_c")?.rename("_b", &vl)?;
        let prev = contract(&sites[l - 2], &lm, &[(vl.as_str(), "_c")])?;
        sites[l - 2] = prev;
    }
    let c = &sites[center - 1];
    let norm = c.norm();
    if norm == T::zero() || !norm.is_finite() {
        return Err(Error::InvalidArgument("cannot normalize a zero state".into()));
    }
    sites[center - 1] = c.scale(T::one() / norm);
    let sites = sites
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.permute(&site_legs(i + 1)))
        .collect::<Result<Vec<_>>>()?;

    let form = match target {
        CanonicalTarget::Site(c) => CanonicalForm::SiteCanonical(c),
        CanonicalTarget::Bond(b) => {
            let mut sites = sites;
            let lam = if b == 0 {
                let [vl, p, vr] = site_legs(1);
                let split = svd_split(&sites[0], &[vl.as_str()], &TruncationPolicy::exact(), "_b")?;
                let s = split.s[0];
                // 1x1 sign factor folded into the right factor
                let u = split.u.data()[0];
                sites[0] = split.vh.scale(u).rename("_b", &vl)?.permute(&[vl.as_str(), p.as_str(), vr.as_str()])?;
                vec![s]
            } else {
                let [vl, p, vr] = site_legs(b);
                let split = svd_split(&sites[b - 1], &[vl.as_str(), p.as_str()], &TruncationPolicy::exact(), "_b")?;
                if b == n {
                    let v = split.vh.data()[0];
                    sites[b - 1] = split.u.scale(v).rename("_b", &vr)?;
                } else {
                    sites[b - 1] = split.u.rename("_b", &vr)?;
                    let [wl, wp, wr] = site_legs(b + 1);
                    let vh = split.vh.rename(&vr, "_c")?.rename("_b", &wl)?;
                    sites[b] = contract(&vh, &sites[b], &[("_c", wl.as_str())])?
                        .permute(&[wl.as_str(), wp.as_str(), wr.as_str()])?;
                }
                split.s
            };
            return Ok((Mps::from_sites(sites, CanonicalForm::BondCanonical(b, lam))?, norm));
        }
    };
    Ok((Mps::from_sites(sites, form)?, norm))
}

/// Moves a site-canonical center one step, truncating the split bond per
/// `policy`. Returns the new state and the discarded weight.
pub fn shift_center<T: Scalar>(psi: &Mps<T>, dir: Direction, policy: &TruncationPolicy) -> Result<(Mps<T>, T)> {
    let n = psi.len();
    let c = match psi.form {
        CanonicalForm::SiteCanonical(c) => c,
        _ => return Err(Error::InvalidArgument("shift_center needs a site-canonical state".into())),
    };
    let mut sites = psi.sites.clone();
    match dir {
        Direction::Right => {
            if c >= n {
                return Err(Error::OutOfRange("cannot shift past the right end".into()));
            }
            let [vl, p, vr] = site_legs(c);
            let split = svd_split(&sites[c - 1], &[vl.as_str(), p.as_str()], policy, "_b")?;
            let [wl, wp, wr] = site_legs(c + 1);
            let sv = split.svh("_b")?.rename(&vr, "_c")?.rename("_b", &wl)?;
            sites[c] = contract(&sv, &sites[c], &[("_c", wl.as_str())])?
                .permute(&[wl.as_str(), wp.as_str(), wr.as_str()])?;
            sites[c - 1] = split.u.rename("_b", &vr)?;
            Ok((Mps::from_sites(sites, CanonicalForm::SiteCanonical(c + 1))?, split.discarded_weight))
        }
        Direction::Left => {
            if c <= 1 {
                return Err(Error::OutOfRange("cannot shift past the left end".into()));
            }
            let [vl, p, vr] = site_legs(c);
            let split = svd_split(&sites[c - 1], &[vl.as_str()], policy, "_b")?;
            let us = split.us("_b")?.rename(&vl, "_c")?.rename("_b", &vl)?;
            sites[c - 2] = contract(&sites[c - 2], &us, &[(vl.as_str(), "_c")])?;
            sites[c - 1] = split.vh.rename("_b", &vl)?.permute(&[vl.as_str(), p.as_str(), vr.as_str()])?;
            Ok((Mps::from_sites(sites, CanonicalForm::SiteCanonical(c - 1))?, split.discarded_weight))
        }
    }
}

fn check_same_shape<T: Scalar>(a: &Mps<T>, b: &Mps<T>) -> Result<()> {
    if a.len() != b.len() || a.phys_dim() != b.phys_dim() {
        return Err(Error::Shape(format!(
            "states differ in shape: L={} d={} vs L={} d={}",
            a.len(),
            a.phys_dim(),
            b.len(),
            b.phys_dim()
        )));
    }
    Ok(())
}

/// Site tensor of site `l` with legs renamed to `l`, `p`, `r`.
pub fn local_legs<T: Scalar>(t: &Tensor<T>, l: usize) -> Result<Tensor<T>> {
    let [vl, p, vr] = site_legs(l);
    t.clone().renamed(&[(vl.as_str(), "l"), (p.as_str(), "p"), (vr.as_str(), "r")])
}

/// Site tensor with local legs `l`, `p`, `r` renamed to the site-`l` scheme.
pub fn site_legs_from_local<T: Scalar>(t: Tensor<T>, l: usize) -> Result<Tensor<T>> {
    let [vl, p, vr] = site_legs(l);
    t.renamed(&[("l", vl.as_str()), ("p", p.as_str()), ("r", vr.as_str())])?
        .permute(&[vl.as_str(), p.as_str(), vr.as_str()])
}

/// Extends a left environment `[a, b]` by one site: `a` pairs with the bra,
/// `b` with the ket. Both sites carry legs `l`, `p`, `r`.
pub fn transfer_left<T: Scalar>(env: &Tensor<T>, bra: &Tensor<T>, ket: &Tensor<T>) -> Result<Tensor<T>> {
    let t = contract(env, ket, &[("b", "l")])?.rename("r", "b")?;
    contract(bra, &t, &[("l", "a"), ("p", "p")])?.rename("r", "a")?.permute(&["a", "b"])
}

/// Extends a right environment `[a, b]` by one site to the left.
pub fn transfer_right<T: Scalar>(env: &Tensor<T>, bra: &Tensor<T>, ket: &Tensor<T>) -> Result<Tensor<T>> {
    let t = contract(ket, env, &[("r", "b")])?.rename("l", "b")?;
    contract(bra, &t, &[("r", "a"), ("p", "p")])?.rename("l", "a")?.permute(&["a", "b"])
}

/// `⟨a|b⟩` by a left-to-right transfer contraction.
pub fn overlap<T: Scalar>(a: &Mps<T>, b: &Mps<T>) -> Result<T> {
    check_same_shape(a, b)?;
    let sa = a.plain_sites()?;
    let sb = b.plain_sites()?;
    let mut e = Tensor::from_fn(&["a", "b"], &[1, 1], |_| T::one())?;
    for l in 1..=a.len() {
        e = transfer_left(&e, &local_legs(&sa[l - 1], l)?, &local_legs(&sb[l - 1], l)?)?;
    }
    e.as_scalar()
}

/// `ca·a + cb·b` with block-diagonal bonds.
pub fn mps_add<T: Scalar>(a: &Mps<T>, b: &Mps<T>, ca: T, cb: T) -> Result<Mps<T>> {
    check_same_shape(a, b)?;
    let n = a.len();
    let d = a.phys_dim();
    let sa = a.plain_sites()?;
    let sb = b.plain_sites()?;
    let mut sites = Vec::with_capacity(n);
    for l in 1..=n {
        let x = &sa[l - 1];
        let y = &sb[l - 1];
        let (xl, xr) = (x.shape()[0], x.shape()[2]);
        let (yl, yr) = (y.shape()[0], y.shape()[2]);
        let first = l == 1;
        let last = l == n;
        let dl = if first { 1 } else { xl + yl };
        let dr = if last { 1 } else { xr + yr };
        let mut t = Tensor::zeros(&site_legs(l), &[dl, d, dr])?;
        {
            let data = t.data_mut();
            for i in 0..xl {
                for s in 0..d {
                    for j in 0..xr {
                        let v = x.data()[(i * d + s) * xr + j] * if first { ca } else { T::one() };
                        data[(i * d + s) * dr + j] += v;
                    }
                }
            }
            let (ol, or) = (if first { 0 } else { xl }, if last { 0 } else { xr });
            for i in 0..yl {
                for s in 0..d {
                    for j in 0..yr {
                        let v = y.data()[(i * d + s) * yr + j] * if first { cb } else { T::one() };
                        data[((ol + i) * d + s) * dr + or + j] += v;
                    }
                }
            }
        }
        sites.push(t);
    }
    Mps::from_sites(sites, CanonicalForm::Unnormalized)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FormRecord {
    Unnormalized,
    Site { center: usize },
    Bond { bond: usize },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(default = "mps_kind")]
    kind: String,
    #[serde(rename = "L")]
    length: usize,
    d: usize,
    bond_dims: Vec<usize>,
    form: FormRecord,
    norm: f64,
    format_version: u32,
}

fn mps_kind() -> String {
    "mps".into()
}

pub const FORMAT_VERSION: u32 = 1;

/// Writes `psi` as a directory archive.
pub fn save_mps<T: Scalar>(psi: &Mps<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let form = match &psi.form {
        CanonicalForm::Unnormalized => FormRecord::Unnormalized,
        CanonicalForm::SiteCanonical(c) => FormRecord::Site { center: *c },
        CanonicalForm::BondCanonical(b, lam) => {
            let t = Tensor::new(&["s"], &[lam.len()], lam.clone())?;
            blob::save_tensor(&t, &dir.join("lambda.ten"))?;
            FormRecord::Bond { bond: *b }
        }
    };
    let manifest = Manifest {
        kind: mps_kind(),
        length: psi.len(),
        d: psi.d,
        bond_dims: psi.bond_dims(),
        form,
        norm: psi.norm()?.as_f64(),
        format_version: FORMAT_VERSION,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    for (i, s) in psi.sites.iter().enumerate() {
        blob::save_tensor(s, &dir.join(format!("site_{}.ten", i + 1)))?;
    }
    Ok(())
}

/// Reads an archive written by [`save_mps`].
pub fn load_mps<T: Scalar>(dir: &Path) -> Result<Mps<T>> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.kind != "mps" {
        return Err(Error::Format(format!("archive kind is {:?}", manifest.kind)));
    }
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {}", manifest.format_version)));
    }
    let mut sites = Vec::with_capacity(manifest.length);
    for l in 1..=manifest.length {
        let t = blob::load_tensor(&dir.join(format!("site_{l}.ten")), &site_legs(l))?;
        sites.push(t);
    }
    let form = match manifest.form {
        FormRecord::Unnormalized => CanonicalForm::Unnormalized,
        FormRecord::Site { center } => CanonicalForm::SiteCanonical(center),
        FormRecord::Bond { bond } => {
            let t: Tensor<T> = blob::load_tensor(&dir.join("lambda.ten"), &["s"])?;
            CanonicalForm::BondCanonical(bond, t.into_data())
        }
    };
    let psi = Mps::from_sites(sites, form)?;
    if psi.bond_dims() != manifest.bond_dims || psi.d != manifest.d {
        return Err(Error::Format("manifest disagrees with site tensors".into()));
    }
    Ok(psi)
}
