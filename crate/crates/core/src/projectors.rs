//! Kept and discarded bases of a reference state and the projectors built from them.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ed::hilbert_dim;
use crate::error::{Error, Result};
use crate::mps::{canonicalize, local_legs, mps_add, site_legs, site_legs_from_local, transfer_left, transfer_right, vleg};
use crate::mps::{CanonicalForm, CanonicalTarget, Mps};
use crate::scalar::Scalar;
use crate::tensor::{contract, orthogonal_complement, scale_leg, svd_split, Tensor, TruncationPolicy};

/// Schmidt values below this fraction of the largest are dropped when the bases are built.
pub const SCHMIDT_FLOOR: f64 = 1e-14;

/// Left and right isometries of a unit-norm reference state in mixed canonical gauge.
///
/// Site tensors keep the leg names of the state (`v{ℓ-1}`, `p{ℓ}`, `v{ℓ}`).
/// For every bond `ℓ`, `A_1 … A_ℓ Λ_ℓ B_{ℓ+1} … B_L` is the reference state.
#[derive(Clone, Debug)]
pub struct KeptBases<T = f64> {
    pub reference: Mps<T>,
    pub left: Vec<Tensor<T>>,
    pub right: Vec<Tensor<T>>,
    /// `Λ_0 … Λ_L`, each the diagonal of a bond matrix.
    pub lambda: Vec<Vec<T>>,
}

/// Orthogonal complements of the kept isometries.
///
/// `Ā_ℓ` carries `v{ℓ-1}`, `p{ℓ}`, `xa{ℓ}`; `B̄_ℓ` carries `xb{ℓ-1}`, `p{ℓ}`, `v{ℓ}`.
#[derive(Clone, Debug)]
pub struct DiscardedBases<T = f64> {
    pub left: Vec<Tensor<T>>,
    pub right: Vec<Tensor<T>>,
}

#[derive(Clone, Debug)]
pub struct Bases<T = f64> {
    pub kept: KeptBases<T>,
    pub discarded: DiscardedBases<T>,
}

pub fn xaleg(l: usize) -> String {
    format!("xa{l}")
}

pub fn xbleg(l: usize) -> String {
    format!("xb{l}")
}

/// Builds the kept and discarded bases of `psi`, which is normalized first.
pub fn build_bases<T: Scalar>(psi: &Mps<T>) -> Result<Bases<T>> {
    let n = psi.len();
    let d = psi.phys_dim();
    let (c, _) = canonicalize(psi, CanonicalTarget::Site(n))?;
    let mut a: Vec<Tensor<T>> = c.sites().to_vec();
    let mut b: Vec<Option<Tensor<T>>> = vec![None; n];
    let mut lambda: Vec<Vec<T>> = vec![Vec::new(); n + 1];
    lambda[n] = vec![T::one()];
    let policy = TruncationPolicy::exact().with_cutoff(SCHMIDT_FLOOR);
    let mut x = a[n - 1].clone();
    for l in (1..=n).rev() {
        let [vl, p, vr] = site_legs(l);
        let split = svd_split(&x, &[vl.as_str()], &policy, "_b")?;
        b[l - 1] = Some(split.vh.rename("_b", &vl)?.permute(&[vl.as_str(), p.as_str(), vr.as_str()])?);
        // u with its row leg renamed for contractions on either side
        let u = split.u.renamed(&[(vl.as_str(), "_c"), ("_b", vl.as_str())])?;
        a[l - 1] = contract(&u, &a[l - 1], &[("_c", vl.as_str())])?.permute(&[vl.as_str(), p.as_str(), vr.as_str()])?;
        if l > 1 {
            let prev = contract(&a[l - 2], &u, &[(vl.as_str(), "_c")])?;
            a[l - 2] = prev.permute(&site_legs(l - 1))?;
            x = scale_leg(&a[l - 2], &vl, &split.s)?;
        }
        lambda[l - 1] = split.s;
    }
    let right: Vec<Tensor<T>> = b.into_iter().map(|t| t.expect("filled by the sweep")).collect();
    let reference = Mps::from_sites(a.clone(), CanonicalForm::SiteCanonical(n))?;

    let mut abar = Vec::with_capacity(n);
    let mut bbar = Vec::with_capacity(n);
    for l in 1..=n {
        let [vl, p, vr] = site_legs(l);
        abar.push(orthogonal_complement(&a[l - 1], &[vl.as_str(), p.as_str()], &xaleg(l))?);
        let comp = orthogonal_complement(&right[l - 1], &[p.as_str(), vr.as_str()], &xbleg(l - 1))?;
        bbar.push(comp.permute(&[xbleg(l - 1), p.clone(), vr.clone()])?);
    }
    debug_assert!(abar.iter().all(|t| t.shape()[0] * d >= t.shape()[2]));
    Ok(Bases {
        kept: KeptBases {
            reference,
            left: a,
            right,
            lambda,
        },
        discarded: DiscardedBases { left: abar, right: bbar },
    })
}

impl<T: Scalar> Bases<T> {
    pub fn len(&self) -> usize {
        self.kept.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.left.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.kept.reference.phys_dim()
    }

    /// `D_0 … D_L`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.kept.lambda.iter().map(|s| s.len()).collect()
    }

    /// `D̄^A_1 … D̄^A_L`.
    pub fn discarded_left_dims(&self) -> Vec<usize> {
        self.discarded.left.iter().map(|t| t.shape()[2]).collect()
    }

    /// `D̄^B_1 … D̄^B_L`.
    pub fn discarded_right_dims(&self) -> Vec<usize> {
        self.discarded.right.iter().map(|t| t.shape()[0]).collect()
    }

    /// Reference state in bond-canonical form at bond `b`, assembled from the bases.
    pub fn bond_state(&self, b: usize) -> Result<Mps<T>> {
        let n = self.len();
        if b > n {
            return Err(Error::OutOfRange(format!("bond {b} outside [0, {n}]")));
        }
        let sites = self.kept.left[..b]
            .iter()
            .chain(&self.kept.right[b..])
            .cloned()
            .collect();
        Mps::from_sites(sites, CanonicalForm::BondCanonical(b, self.kept.lambda[b].clone()))
    }

    /// Largest deviation from the orthonormality and gauge relations of the bases.
    pub fn deviation(&self) -> Result<T> {
        let mut dev = T::zero();
        for l in 1..=self.len() {
            let [vl, p, vr] = site_legs(l);
            let rows_a = [vl.as_str(), p.as_str()];
            let rows_b = [p.as_str(), vr.as_str()];
            let a = self.kept.left[l - 1].to_matrix(&rows_a)?;
            let ab = self.discarded.left[l - 1].to_matrix(&rows_a)?;
            let b = self.kept.right[l - 1].to_matrix(&rows_b)?;
            let bb = self.discarded.right[l - 1].to_matrix(&rows_b)?;
            for m in [&a, &ab, &b, &bb] {
                dev = dev.max(crate::tensor::isometry_deviation(m));
            }
            for m in [a.transpose() * &ab, b.transpose() * &bb] {
                dev = dev.max(m.amax());
            }
            // A_ℓ Λ_ℓ = Λ_{ℓ-1} B_ℓ
            let al = scale_leg(&self.kept.left[l - 1], &vr, &self.kept.lambda[l])?;
            let lb = scale_leg(&self.kept.right[l - 1], &vl, &self.kept.lambda[l - 1])?;
            dev = dev.max(al.max_abs_diff(&lb)?);
        }
        Ok(dev)
    }
}

/// Which sector a one-sided projector keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    K,
    D,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::K => write!(f, "K"),
            Sector::D => write!(f, "D"),
        }
    }
}

/// Side of an orthogonalized local projector: `Left` keeps `D` on the left end of the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Symbolic projector on an `L`-site chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectorSpec {
    /// `P^X_ℓ` on sites `1..=ℓ` times `Q^X̄_ℓ̄` on sites `ℓ̄..=L`, with `0 ≤ ℓ < ℓ̄ ≤ L+1`.
    SectorPair { x: Sector, xbar: Sector, l: usize, lbar: usize },
    /// `P^{ns}_ℓ`, free on sites `ℓ..ℓ+n-1`.
    LocalNs { n: usize, l: usize },
    /// `P^{ns}_{ℓ<}` (`Side::Left`) or `P^{ns}_{ℓ>}` (`Side::Right`).
    LocalNsOrtho { n: usize, l: usize, side: Side },
    /// `P^{ns}`; `pivot` defaults to `L+1-n`.
    GlobalNs { n: usize, pivot: Option<usize> },
    IrreducibleNPerp { n: usize },
}

/// One signed `P^{XX̄}_{ℓℓ̄}` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairTerm {
    pub sign: i8,
    pub x: Sector,
    pub xbar: Sector,
    pub l: usize,
    pub lbar: usize,
}

impl PairTerm {
    fn new(sign: i8, x: Sector, xbar: Sector, l: usize, lbar: usize) -> Self {
        Self { sign, x, xbar, l, lbar }
    }
}

fn range_err(what: &str) -> Error {
    Error::OutOfRange(what.to_string())
}

impl ProjectorSpec {
    pub fn pair(x: Sector, xbar: Sector, l: usize, lbar: usize) -> Self {
        ProjectorSpec::SectorPair { x, xbar, l, lbar }
    }

    /// Expands into `P^{XX̄}_{ℓℓ̄}` terms for a chain of `len` sites.
    pub fn terms(&self, len: usize) -> Result<Vec<PairTerm>> {
        use Sector::{D, K};
        let big_l = len;
        match *self {
            ProjectorSpec::SectorPair { x, xbar, l, lbar } => {
                if l >= lbar || lbar > big_l + 1 {
                    return Err(range_err(&format!(
                        "pair ({l}, {lbar}) needs 0 <= l < lbar <= {}",
                        big_l + 1
                    )));
                }
                Ok(vec![PairTerm::new(1, x, xbar, l, lbar)])
            }
            ProjectorSpec::LocalNs { n, l } => {
                if n > big_l || l < 1 || l + n > big_l + 1 {
                    return Err(range_err(&format!("local n={n} at l={l} on {big_l} sites")));
                }
                Ok(vec![PairTerm::new(1, K, K, l - 1, l + n)])
            }
            ProjectorSpec::LocalNsOrtho { n, l, side } => {
                if n < 1 || n > big_l || l < 1 || l + n > big_l + 1 {
                    return Err(range_err(&format!("orthogonalized n={n} at l={l} on {big_l} sites")));
                }
                Ok(vec![match side {
                    Side::Left => PairTerm::new(1, D, K, l, l + n),
                    Side::Right => PairTerm::new(1, K, D, l - 1, l - 1 + n),
                }])
            }
            ProjectorSpec::GlobalNs { n, pivot } => {
                if n > big_l {
                    return Err(range_err(&format!("global n={n} on {big_l} sites")));
                }
                if n == 0 {
                    return Ok(vec![PairTerm::new(1, K, K, big_l, big_l + 1)]);
                }
                let last = big_l + 1 - n;
                let p = pivot.unwrap_or(last);
                if p < 1 || p > last {
                    return Err(range_err(&format!("pivot {p} outside [1, {last}]")));
                }
                let mut t: Vec<PairTerm> = (1..p).map(|l| PairTerm::new(1, D, K, l, l + n)).collect();
                t.push(PairTerm::new(1, K, K, p - 1, p + n));
                t.extend((p + 1..=last).map(|l| PairTerm::new(1, K, D, l - 1, l - 1 + n)));
                Ok(t)
            }
            ProjectorSpec::IrreducibleNPerp { n } => match n {
                _ if n > big_l => Err(range_err(&format!("irreducible n={n} on {big_l} sites"))),
                0 => Ok(vec![PairTerm::new(1, K, K, big_l, big_l + 1)]),
                1 => Ok((1..=big_l).map(|l| PairTerm::new(1, D, K, l, l + 1)).collect()),
                _ => Ok((1..=big_l + 1 - n).map(|l| PairTerm::new(1, D, D, l, l + n - 1)).collect()),
            },
        }
    }
}

/// Linear combination of projector specs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectorSum {
    pub terms: Vec<(f64, ProjectorSpec)>,
}

impl ProjectorSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plus(mut self, c: f64, spec: ProjectorSpec) -> Self {
        self.terms.push((c, spec));
        self
    }

    pub fn extend(mut self, other: ProjectorSum) -> Self {
        self.terms.extend(other.terms);
        self
    }
}

impl From<ProjectorSpec> for ProjectorSum {
    fn from(spec: ProjectorSpec) -> Self {
        ProjectorSum::new().plus(1.0, spec)
    }
}

/// Both sides of the identity turning a window of `DK` terms into `KD` terms:
/// `Σ_{ℓ=ℓ̄}^{ℓ'} P^{DK}_{ℓ,ℓ+n}` and
/// `P^{(n-1)s}_{ℓ̄} + Σ_{ℓ=ℓ̄}^{ℓ'} P^{KD}_{ℓ-1,ℓ-1+n} − P^{(n-1)s}_{ℓ'+1}`.
pub fn convert_kd_dk(len: usize, n: usize, lbar: usize, lprime: usize) -> Result<(ProjectorSum, ProjectorSum)> {
    if n < 1 || n > len || lbar < 1 || lbar > lprime || lprime + n > len + 1 {
        return Err(range_err(&format!(
            "window [{lbar}, {lprime}] with n={n} on {len} sites"
        )));
    }
    let mut lhs = ProjectorSum::new();
    let mut rhs = ProjectorSum::new().plus(1.0, ProjectorSpec::LocalNs { n: n - 1, l: lbar });
    for l in lbar..=lprime {
        lhs = lhs.plus(1.0, ProjectorSpec::pair(Sector::D, Sector::K, l, l + n));
        rhs = rhs.plus(1.0, ProjectorSpec::pair(Sector::K, Sector::D, l - 1, l - 1 + n));
    }
    rhs = rhs.plus(-1.0, ProjectorSpec::LocalNs { n: n - 1, l: lprime + 1 });
    Ok((lhs, rhs))
}

/// `P^{1⊥}` written with `DK` terms left of `ℓ'`, `KD` terms right of it and
/// `P^{1s}_{ℓ'}` in between, minus `P^{0s}`.
pub fn one_perp_mixed(len: usize, lprime: usize) -> Result<ProjectorSum> {
    if lprime < 1 || lprime > len {
        return Err(range_err(&format!("pivot {lprime} outside [1, {len}]")));
    }
    let mut s = ProjectorSum::new();
    for l in 1..lprime {
        s = s.plus(1.0, ProjectorSpec::pair(Sector::D, Sector::K, l, l + 1));
    }
    s = s.plus(1.0, ProjectorSpec::LocalNs { n: 1, l: lprime });
    for l in lprime + 1..=len {
        s = s.plus(1.0, ProjectorSpec::pair(Sector::K, Sector::D, l - 1, l));
    }
    Ok(s.plus(-1.0, ProjectorSpec::pair(Sector::K, Sector::K, len, len + 1)))
}

/// Dimension of the irreducible `n`-site subspace.
pub fn subspace_dimension<T: Scalar>(bases: &Bases<T>, n: usize) -> Result<usize> {
    let len = bases.len();
    if n > len {
        return Err(range_err(&format!("n={n} on {len} sites")));
    }
    let dims = bases.bond_dims();
    let da = bases.discarded_left_dims();
    let db = bases.discarded_right_dims();
    let d = bases.phys_dim();
    Ok(match n {
        0 => 1,
        1 => (1..=len).map(|l| da[l - 1] * dims[l]).sum(),
        _ => {
            let inner = d.pow((n - 2) as u32);
            (1..=len + 1 - n).map(|l| da[l - 1] * inner * db[l + n - 2]).sum()
        }
    })
}

/// A projected state kept as a sum of branch MPSs with signs folded in.
#[derive(Clone, Debug)]
pub struct ProjectedState<T = f64> {
    len: usize,
    d: usize,
    branches: Vec<Mps<T>>,
}

impl<T: Scalar> ProjectedState<T> {
    pub fn branches(&self) -> &[Mps<T>] {
        &self.branches
    }

    pub fn is_zero(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn overlap_with(&self, other: &Mps<T>) -> Result<T> {
        let mut s = T::zero();
        for b in &self.branches {
            s += crate::mps::overlap(b, other)?;
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> Result<T> {
        let mut s = T::zero();
        for (i, a) in self.branches.iter().enumerate() {
            s += crate::mps::overlap(a, a)?;
            for b in &self.branches[i + 1..] {
                s += T::of(2.0) * crate::mps::overlap(a, b)?;
            }
        }
        Ok(s)
    }

    /// Single MPS with block-diagonal bonds holding the sum of all branches.
    pub fn materialize(&self) -> Result<Mps<T>> {
        let mut it = self.branches.iter();
        let Some(first) = it.next() else {
            let zero = crate::mps::product_state::<T>(self.d, &vec![0; self.len])?;
            return zero.scaled(T::zero());
        };
        let mut acc = first.clone();
        for b in it {
            acc = mps_add(&acc, b, T::one(), T::one())?;
        }
        Ok(acc)
    }

    pub fn dense(&self) -> Result<nalgebra::DVector<T>> {
        let n = hilbert_dim(self.len, self.d)?;
        let mut v = nalgebra::DVector::zeros(n);
        for b in &self.branches {
            v += crate::ed::dense_state(b)?.amplitudes;
        }
        Ok(v)
    }
}

/// Overlaps of the bases with one state, reused across all terms of a projector.
pub struct ApplyContext<'a, T = f64> {
    bases: &'a Bases<T>,
    phi: Vec<Tensor<T>>,
    a: Vec<Tensor<T>>,
    b: Vec<Tensor<T>>,
    /// `O_ℓ = ⟨A_1…A_ℓ|Φ_1…Φ_ℓ⟩` for `ℓ = 0..=L`, legs `[a, b]`.
    lefts: Vec<Tensor<T>>,
    /// `R_ℓ` for `ℓ = 1..=L+1` (index `ℓ-1`), legs `[a, b]`.
    rights: Vec<Tensor<T>>,
}

impl<'a, T: Scalar> ApplyContext<'a, T> {
    pub fn new(bases: &'a Bases<T>, phi: &Mps<T>) -> Result<Self> {
        let n = bases.len();
        if phi.len() != n || phi.phys_dim() != bases.phys_dim() {
            return Err(Error::Shape(format!(
                "state with L={}, d={} against bases with L={}, d={}",
                phi.len(),
                phi.phys_dim(),
                n,
                bases.phys_dim()
            )));
        }
        let sites = phi.plain_sites()?;
        let phi: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(&sites[l - 1], l)).collect::<Result<_>>()?;
        let a: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(&bases.kept.left[l - 1], l)).collect::<Result<_>>()?;
        let b: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(&bases.kept.right[l - 1], l)).collect::<Result<_>>()?;
        let unit = Tensor::from_fn(&["a", "b"], &[1, 1], |_| T::one())?;
        let mut lefts = vec![unit.clone()];
        for l in 1..=n {
            lefts.push(transfer_left(&lefts[l - 1], &a[l - 1], &phi[l - 1])?);
        }
        let mut rights = vec![unit; n + 1];
        for l in (1..=n).rev() {
            rights[l - 1] = transfer_right(&rights[l], &b[l - 1], &phi[l - 1])?;
        }
        Ok(Self {
            bases,
            phi,
            a,
            b,
            lefts,
            rights,
        })
    }

    /// `⟨Ψ|Φ⟩`.
    pub fn reference_overlap(&self) -> Result<T> {
        self.lefts[self.bases.len()].as_scalar()
    }

    /// Applies one `P^{XX̄}_{ℓℓ̄}` term; `None` when the term vanishes identically.
    pub fn apply_pair(&self, t: &PairTerm) -> Result<Option<Mps<T>>> {
        let n = self.bases.len();
        if t.l >= t.lbar || t.lbar > n + 1 {
            return Err(range_err(&format!("pair ({}, {})", t.l, t.lbar)));
        }
        if (t.x == Sector::D && t.l == 0) || (t.xbar == Sector::D && t.lbar == n + 1) {
            return Ok(None);
        }
        let mut sites: Vec<Tensor<T>> = Vec::with_capacity(n);
        for s in 1..=t.l {
            if s < t.l {
                sites.push(self.a[s - 1].clone());
            } else if t.x == Sector::K {
                sites.push(contract(&self.a[s - 1], &self.lefts[s], &[("r", "a")])?.rename("b", "r")?);
            } else {
                let y = contract(&self.lefts[s - 1], &self.phi[s - 1], &[("b", "l")])?.rename("a", "l")?;
                sites.push(project_out_left(&self.a[s - 1], y)?);
            }
        }
        for s in t.l + 1..t.lbar {
            sites.push(self.phi[s - 1].clone());
        }
        for s in t.lbar..=n {
            if s > t.lbar {
                sites.push(self.b[s - 1].clone());
            } else if t.xbar == Sector::K {
                sites.push(contract(&self.rights[s - 1], &self.b[s - 1], &[("a", "l")])?.rename("b", "l")?);
            } else {
                let z = contract(&self.phi[s - 1], &self.rights[s], &[("r", "b")])?.rename("a", "r")?;
                sites.push(project_out_right(&self.b[s - 1], z)?);
            }
        }
        let sites = sites
            .into_iter()
            .enumerate()
            .map(|(i, t)| site_legs_from_local(t, i + 1))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Mps::from_sites(sites, CanonicalForm::Unnormalized)?;
        if t.sign < 0 {
            out = out.scaled(-T::one())?;
        }
        Ok(Some(out))
    }

    pub fn apply_terms(&self, terms: &[PairTerm], coef: T) -> Result<Vec<Mps<T>>> {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            if let Some(m) = self.apply_pair(t)? {
                out.push(if coef == T::one() { m } else { m.scaled(coef)? });
            }
        }
        Ok(out)
    }
}

/// `(1 − A A†) y` for tensors with local legs.
fn project_out_left<T: Scalar>(a: &Tensor<T>, y: Tensor<T>) -> Result<Tensor<T>> {
    let ak = a.clone().rename("r", "_k")?;
    let m = contract(&ak, &y, &[("l", "l"), ("p", "p")])?;
    let back = contract(&ak, &m, &[("_k", "_k")])?.permute(&["l", "p", "r"])?;
    y.permute(&["l", "p", "r"])?.sub(&back)
}

/// `z (1 − B† B)` for tensors with local legs.
fn project_out_right<T: Scalar>(b: &Tensor<T>, z: Tensor<T>) -> Result<Tensor<T>> {
    let bk = b.clone().rename("l", "_k")?;
    let m = contract(&z, &bk, &[("p", "p"), ("r", "r")])?;
    let back = contract(&m, &bk, &[("_k", "_k")])?.permute(&["l", "p", "r"])?;
    z.permute(&["l", "p", "r"])?.sub(&back)
}

/// Applies `spec` to `phi`, returning the unsummed branches.
pub fn apply_projector<T: Scalar>(spec: &ProjectorSpec, bases: &Bases<T>, phi: &Mps<T>) -> Result<ProjectedState<T>> {
    apply_projector_sum(&spec.clone().into(), bases, phi)
}

pub fn apply_projector_sum<T: Scalar>(sum: &ProjectorSum, bases: &Bases<T>, phi: &Mps<T>) -> Result<ProjectedState<T>> {
    let ctx = ApplyContext::new(bases, phi)?;
    let mut branches = Vec::new();
    for (c, spec) in &sum.terms {
        let terms = spec.terms(bases.len())?;
        branches.extend(ctx.apply_terms(&terms, T::of(*c))?);
    }
    Ok(ProjectedState {
        len: bases.len(),
        d: bases.phys_dim(),
        branches,
    })
}

/// Dense matrices of the kept and discarded states on either side of every bond.
struct DenseBases<T> {
    /// `Ψ^K_ℓ` (`d^ℓ × D_ℓ`) for `ℓ = 0..=L`.
    left_k: Vec<DMatrix<T>>,
    /// `Ψ^D_ℓ` for `ℓ = 1..=L` (index `ℓ-1`).
    left_d: Vec<DMatrix<T>>,
    /// `Φ^K_ℓ` (`D_{ℓ-1} × d^{L-ℓ+1}`) for `ℓ = 1..=L+1` (index `ℓ-1`).
    right_k: Vec<DMatrix<T>>,
    /// `Φ^D_ℓ` for `ℓ = 1..=L` (index `ℓ-1`).
    right_d: Vec<DMatrix<T>>,
}

impl<T: Scalar> DenseBases<T> {
    fn new(bases: &Bases<T>) -> Result<Self> {
        let n = bases.len();
        let d = bases.phys_dim();
        hilbert_dim(n, d)?;
        let id = DMatrix::<T>::identity(d, d);
        let mut left_k = vec![DMatrix::identity(1, 1)];
        let mut left_d = Vec::with_capacity(n);
        for l in 1..=n {
            let [vl, p, _] = site_legs(l);
            let ext = left_k[l - 1].kronecker(&id);
            let a = bases.kept.left[l - 1].to_matrix(&[vl.as_str(), p.as_str()])?;
            let ab = bases.discarded.left[l - 1].to_matrix(&[vl.as_str(), p.as_str()])?;
            left_d.push(&ext * ab);
            left_k.push(ext * a);
        }
        let mut right_k = vec![DMatrix::identity(1, 1); n + 1];
        let mut right_d = vec![DMatrix::zeros(0, 0); n];
        for l in (1..=n).rev() {
            let ext = id.kronecker(&right_k[l]);
            let b = bases.kept.right[l - 1].to_matrix(&[vleg(l - 1)])?;
            let bb = bases.discarded.right[l - 1].to_matrix(&[xbleg(l - 1)])?;
            right_d[l - 1] = bb * &ext;
            right_k[l - 1] = b * ext;
        }
        Ok(Self {
            left_k,
            left_d,
            right_k,
            right_d,
        })
    }

    fn pair(&self, t: &PairTerm, d: usize) -> DMatrix<T> {
        let n = self.left_d.len();
        let left = match t.x {
            Sector::K => outer(&self.left_k[t.l]),
            Sector::D if t.l == 0 => DMatrix::zeros(1, 1),
            Sector::D => outer(&self.left_d[t.l - 1]),
        };
        let right = match t.xbar {
            Sector::K => outer(&self.right_k[t.lbar - 1].transpose()),
            Sector::D if t.lbar == n + 1 => DMatrix::zeros(1, 1),
            Sector::D => outer(&self.right_d[t.lbar - 1].transpose()),
        };
        let mid = d.pow((t.lbar - t.l - 1) as u32);
        let m = left.kronecker(&DMatrix::identity(mid, mid)).kronecker(&right);
        if t.sign < 0 {
            -m
        } else {
            m
        }
    }
}

fn outer<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    m * m.transpose()
}

/// Dense `d^L × d^L` matrix of `spec`.
pub fn dense_projector<T: Scalar>(spec: &ProjectorSpec, bases: &Bases<T>) -> Result<DMatrix<T>> {
    dense_projector_sum(&spec.clone().into(), bases)
}

pub fn dense_projector_sum<T: Scalar>(sum: &ProjectorSum, bases: &Bases<T>) -> Result<DMatrix<T>> {
    let size = hilbert_dim(bases.len(), bases.phys_dim())?;
    let db = DenseBases::new(bases)?;
    let mut out = DMatrix::zeros(size, size);
    for (c, spec) in &sum.terms {
        for t in spec.terms(bases.len())? {
            out += db.pair(&t, bases.phys_dim()) * T::of(*c);
        }
    }
    Ok(out)
}

/// Dense `Ψ^K_ℓ` (`d^ℓ × D_ℓ`) and `Ψ^D_ℓ` for every `ℓ`, the latter empty at `ℓ = 0`.
pub fn dense_left_states<T: Scalar>(bases: &Bases<T>) -> Result<(Vec<DMatrix<T>>, Vec<DMatrix<T>>)> {
    let db = DenseBases::new(bases)?;
    let mut dd = vec![DMatrix::zeros(1, 0)];
    dd.extend(db.left_d);
    Ok((db.left_k, dd))
}

/// Dense `Ψ^K_ℓ` for `ℓ = 0..=L` and `Φ^K_ℓ` (`D_{ℓ-1} × d^{L-ℓ+1}`) for `ℓ = 1..=L+1` at index `ℓ-1`.
pub fn dense_kept_states<T: Scalar>(bases: &Bases<T>) -> Result<(Vec<DMatrix<T>>, Vec<DMatrix<T>>)> {
    let db = DenseBases::new(bases)?;
    Ok((db.left_k, db.right_k))
}
