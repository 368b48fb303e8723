//! Energy variance split into irreducible n-site contributions.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dmrg::{apply_window, env_left_step, env_right_step, mpo_local, unit_env, window_legs};
use crate::ed::{dense_hamiltonian, dense_state, hilbert_dim};
use crate::error::{Error, Result};
use crate::mpo::Mpo;
use crate::mps::{local_legs, Mps};
use crate::projectors::{build_bases, Bases};
use crate::scalar::Scalar;
use crate::tensor::{contract, scale_leg, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub energy: f64,
    /// `Δ^{n⊥}` for `n = 1..=n_max` at index `n-1`.
    pub delta: Vec<f64>,
    /// Prefix sums of `delta`.
    pub cumulative: Vec<f64>,
    /// Dense `‖(H−E)Ψ‖²` when the chain is small enough.
    pub total: Option<f64>,
}

/// Bases, MPO tensors and environments shared by all window terms.
pub struct VarianceContext<T = f64> {
    bases: Bases<T>,
    a: Vec<Tensor<T>>,
    b: Vec<Tensor<T>>,
    ws: Vec<Tensor<T>>,
    lefts: Vec<Tensor<T>>,
    /// `R_ℓ` at index `ℓ-1`.
    rights: Vec<Tensor<T>>,
    energy: T,
}

impl<T: Scalar> VarianceContext<T> {
    pub fn new(psi: &Mps<T>, h: &Mpo<T>) -> Result<Self> {
        if psi.len() != h.len() || psi.phys_dim() != h.phys_dim() {
            return Err(Error::Shape("MPO and MPS shapes differ".into()));
        }
        let n = psi.len();
        let bases = build_bases(psi)?;
        let a: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(&bases.kept.left[l - 1], l)).collect::<Result<_>>()?;
        let b: Vec<Tensor<T>> = (1..=n).map(|l| local_legs(&bases.kept.right[l - 1], l)).collect::<Result<_>>()?;
        let ws: Vec<Tensor<T>> = (1..=n).map(|l| mpo_local(h, l)).collect::<Result<_>>()?;
        let mut lefts = vec![unit_env()?];
        for l in 1..=n {
            lefts.push(env_left_step(&lefts[l - 1], &a[l - 1], &ws[l - 1], &a[l - 1])?);
        }
        let mut rights = vec![unit_env()?; n + 1];
        for l in (1..=n).rev() {
            rights[l - 1] = env_right_step(&rights[l], &b[l - 1], &ws[l - 1], &b[l - 1])?;
        }
        let energy = lefts[n].as_scalar()?;
        Ok(Self {
            bases,
            a,
            b,
            ws,
            lefts,
            rights,
            energy,
        })
    }

    pub fn energy(&self) -> T {
        self.energy
    }

    pub fn bases(&self) -> &Bases<T> {
        &self.bases
    }

    fn len(&self) -> usize {
        self.a.len()
    }

    /// `H Ψ` restricted to the window `[l, l+n)` with kept states outside it.
    pub fn projected_window(&self, l: usize, n: usize) -> Result<Tensor<T>> {
        let lam = &self.bases.kept.lambda[l - 1];
        let mut x = scale_leg(&self.b[l - 1], "l", lam)?.rename("p", "p1")?;
        for j in 1..n {
            let s = self.b[l + j - 1].clone().renamed(&[("p", format!("p{}", j + 1).as_str()), ("r", "_r")])?;
            x = contract(&x, &s, &[("r", "l")])?.rename("_r", "r")?;
        }
        let x = x.permute(&window_legs(n))?;
        apply_window(&self.lefts[l - 1], &self.ws[l - 1..l - 1 + n], &self.rights[l + n - 1], &x)
    }

    /// `‖P^{DK}_{ℓ,ℓ+1} HΨ‖²` via `1 − A A†`.
    pub fn one_site_term(&self, l: usize) -> Result<T> {
        let y = self.projected_window(l, 1)?;
        Ok(project_left(&self.a[l - 1], &y)?.norm_sqr())
    }

    /// The same term through the explicit complement, `‖Ā† Y‖²`.
    pub fn one_site_term_isometry(&self, l: usize) -> Result<T> {
        let y = self.projected_window(l, 1)?;
        let abar = self.bases.discarded.left[l - 1].clone();
        let [vl, p, _] = crate::mps::site_legs(l);
        let abar = abar.renamed(&[(vl.as_str(), "l"), (p.as_str(), "p1")])?;
        Ok(contract(&abar, &y, &[("l", "l"), ("p1", "p1")])?.norm_sqr())
    }

    /// `‖P^{KD}_{ℓ-1,ℓ} HΨ‖²` via `1 − B† B`.
    pub fn one_site_term_right(&self, l: usize) -> Result<T> {
        let y = self.projected_window(l, 1)?;
        Ok(project_right(&self.b[l - 1], &y, "p1")?.norm_sqr())
    }

    /// `‖P^{DD}_{ℓ,ℓ+n-1} HΨ‖²` for `n ≥ 2`.
    pub fn window_term(&self, l: usize, n: usize) -> Result<T> {
        let y = self.projected_window(l, n)?;
        let y = project_left(&self.a[l - 1], &y)?;
        Ok(project_right(&self.b[l + n - 2], &y, &format!("p{n}"))?.norm_sqr())
    }

    /// `Δ^{n⊥}` for `n ≥ 1`.
    pub fn delta(&self, n: usize) -> Result<T> {
        let len = self.len();
        if n < 1 || n > len {
            return Err(Error::OutOfRange(format!("n={n} outside [1, {len}]")));
        }
        let mut s = T::zero();
        if n == 1 {
            for l in 1..=len {
                s += self.one_site_term(l)?;
            }
        } else {
            for l in 1..=len + 1 - n {
                s += self.window_term(l, n)?;
            }
        }
        Ok(s)
    }
}

/// `(1 − A A†) y`, with `A` on the legs `l`, `p1` of `y`.
pub(crate) fn project_left<T: Scalar>(a: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    let ak = a.clone().renamed(&[("p", "p1"), ("r", "_k")])?;
    let m = contract(&ak, y, &[("l", "l"), ("p1", "p1")])?;
    let back = contract(&ak, &m, &[("_k", "_k")])?.permute(y.legs())?;
    y.sub(&back)
}

/// `y (1 − B† B)`, with `B` on the legs `pleg`, `r` of `y`.
fn project_right<T: Scalar>(b: &Tensor<T>, y: &Tensor<T>, pleg: &str) -> Result<Tensor<T>> {
    let bk = b.clone().renamed(&[("l", "_k"), ("p", pleg)])?;
    let m = contract(y, &bk, &[(pleg, pleg), ("r", "r")])?;
    let back = contract(&m, &bk, &[("_k", "_k")])?.permute(y.legs())?;
    y.sub(&back)
}

pub fn nsite_variance<T: Scalar>(psi: &Mps<T>, h: &Mpo<T>, n_max: usize) -> Result<VarianceReport> {
    let len = psi.len();
    if n_max < 1 || n_max > len {
        return Err(Error::OutOfRange(format!("n_max={n_max} outside [1, {len}]")));
    }
    let ctx = VarianceContext::new(psi, h)?;
    let mut delta = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let v = ctx.delta(n)?.as_f64();
        if v < 0.0 {
            warn!("clipping negative variance {v:e} at n={n}");
        }
        delta.push(v.max(0.0));
    }
    let total = if hilbert_dim(len, psi.phys_dim()).is_ok() {
        Some(dense_variance(ctx.bases().kept.reference.clone(), h)?)
    } else {
        None
    };
    Ok(VarianceReport {
        energy: ctx.energy().as_f64(),
        cumulative: cumulative_variance(&delta),
        delta,
        total,
    })
}

/// `‖(H − E)Ψ‖²` of the normalized state by dense matrix algebra.
pub fn dense_variance<T: Scalar>(psi: Mps<T>, h: &Mpo<T>) -> Result<f64> {
    let v = dense_state(&psi)?.amplitudes;
    let v = &v / v.norm();
    let hv = dense_hamiltonian(h)? * &v;
    let e = v.dot(&hv);
    Ok((hv - v * e).norm_squared().as_f64())
}

pub fn cumulative_variance(delta: &[f64]) -> Vec<f64> {
    delta
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Writes `n, delta_n_perp, delta_ns_cumulative` rows with 12 significant digits.
pub fn write_variance_csv<W: Write>(report: &VarianceReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "delta_n_perp", "delta_ns_cumulative"])
        .map_err(|e| Error::Format(e.to_string()))?;
    for (i, (d, c)) in report.delta.iter().zip(&report.cumulative).enumerate() {
        w.write_record([(i + 1).to_string(), format!("{d:.11e}"), format!("{c:.11e}")])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
