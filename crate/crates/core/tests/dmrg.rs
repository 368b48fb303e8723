use approx::assert_abs_diff_eq;
use kdmps::dmrg::{apply_window, mpo_local, window_legs, EffectiveHam};
use kdmps::ed::{dense_hamiltonian, dense_state, exact_spectrum};
use kdmps::mpo::{expectation, identity_mpo};
use kdmps::mps::{local_legs, site_legs_from_local};
use kdmps::{
    build_env, canonicalize, dmrg_ground_state, dmrg_orthogonal, haldane_shastry_mpo, heisenberg_mpo, lanczos_lowest,
    overlap, random_mps, CanonicalForm, CanonicalTarget, DmrgMode, DmrgOpts, LanczosOpts, Mpo, Mps, Tensor,
    TruncationPolicy,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts(d: usize) -> DmrgOpts {
    DmrgOpts {
        policy: TruncationPolicy::max_rank(d).with_cutoff(1e-14),
        ..DmrgOpts::default()
    }
}

#[test]
fn two_site_heisenberg_singlet() {
    let h: Mpo = heisenberg_mpo(2, 1.0).unwrap();
    let psi0: Mps = random_mps(2, 2, None, 1).unwrap();
    let r = dmrg_ground_state(&psi0, &h, &opts(4)).unwrap();
    assert_abs_diff_eq!(r.energies[0], -0.75, epsilon = 1e-12);
    assert_abs_diff_eq!(expectation(&r.state, &h).unwrap(), -0.75, epsilon = 1e-12);
}

#[test]
fn env_energy_matches_dense() {
    let h: Mpo = haldane_shastry_mpo(6, 1e-12).unwrap();
    let psi: Mps = random_mps(6, 2, Some(3), 4).unwrap();
    let env = build_env(&psi, &h).unwrap();
    let v = dense_state(&psi).unwrap().amplitudes;
    let e = (v.transpose() * dense_hamiltonian(&h).unwrap() * &v)[(0, 0)] / v.norm_squared();
    for b in 0..=6 {
        assert_abs_diff_eq!(env.energy_at(b).unwrap(), e, epsilon = 1e-10);
    }
    let zero = h.scaled(0.0);
    let env = build_env(&psi, &zero).unwrap();
    assert_abs_diff_eq!(env.energy_at(3).unwrap(), 0.0, epsilon = 1e-15);
}

#[test]
fn identity_effective_hamiltonian() {
    let h: Mpo = identity_mpo(4, 2).unwrap();
    let (psi, _) = canonicalize(&random_mps::<f64>(4, 2, Some(2), 3).unwrap(), CanonicalTarget::Site(2)).unwrap();
    let env = build_env(&psi, &h).unwrap();
    let heff = EffectiveHam::window(&env, &h, 2, 1).unwrap();
    let x = local_legs(psi.site(2), 2).unwrap().rename("p", "p1").unwrap();
    let hx = heff.apply(&x).unwrap();
    assert!(hx.max_abs_diff(&x).unwrap() < 1e-13);
}

fn random_window(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.len() - 2;
    Tensor::from_fn(&window_legs(n), shape, |_| rng.random::<f64>() - 0.5).unwrap()
}

#[test]
fn effective_hamiltonian_is_symmetric() {
    let h: Mpo = haldane_shastry_mpo(6, 1e-12).unwrap();
    let psi: Mps = random_mps(6, 2, Some(3), 8).unwrap();
    let env = build_env(&psi, &h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (l, n) in [(1, 1), (3, 2), (2, 3), (4, 0)] {
        let heff = EffectiveHam::window(&env, &h, l, n).unwrap();
        let x = random_window(&heff.shape(), &mut rng);
        let y = random_window(&heff.shape(), &mut rng);
        let a = x.dot(&heff.apply(&y).unwrap()).unwrap();
        let b = y.dot(&heff.apply(&x).unwrap()).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }
}

/// Dense states `A … A e_i B … B` for every unit window tensor `e_i`.
fn window_basis(psi: &Mps, l: usize) -> DMatrix<f64> {
    let n = psi.len();
    let site = psi.site(l);
    let len = site.len();
    let mut cols = Vec::new();
    for i in 0..len {
        let mut data = vec![0.0; len];
        data[i] = 1.0;
        let e = Tensor::new(site.legs(), site.shape(), data).unwrap();
        let mut sites = psi.sites().to_vec();
        sites[l - 1] = e;
        let m = Mps::from_sites(sites, CanonicalForm::Unnormalized).unwrap();
        cols.push(dense_state(&m).unwrap().amplitudes);
    }
    DMatrix::from_columns(&cols).resize(1 << n, len, 0.0)
}

#[test]
fn one_site_effective_matches_dense() {
    let l = 6;
    let h: Mpo = heisenberg_mpo(l, 1.0).unwrap();
    let hd = dense_hamiltonian(&h).unwrap();
    let psi0: Mps = random_mps(l, 2, Some(3), 12).unwrap();
    for c in 1..=l {
        let (psi, _) = canonicalize(&psi0, CanonicalTarget::Site(c)).unwrap();
        let v = window_basis(&psi, c);
        let want = v.transpose() * &hd * &v;
        let env = build_env(&psi, &h).unwrap();
        let heff = EffectiveHam::window(&env, &h, c, 1).unwrap();
        let dim = v.ncols();
        let mut got = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            got.set_column(i, &nalgebra::DVector::from_vec(heff.apply_flat(&e).unwrap()));
        }
        assert!((got - want).amax() < 1e-10, "site {c}");
    }
}

#[test]
fn apply_window_shape_is_checked() {
    let h: Mpo = heisenberg_mpo(3, 1.0).unwrap();
    let psi: Mps = random_mps(3, 2, None, 1).unwrap();
    let env = build_env(&psi, &h).unwrap();
    let heff = EffectiveHam::window(&env, &h, 1, 2).unwrap();
    let wrong = Tensor::<f64>::zeros(&window_legs(2), &[1, 2, 2, 3]).unwrap();
    assert!(heff.apply(&wrong).is_err());
    assert!(EffectiveHam::window(&env, &h, 3, 2).is_err());
    let w = mpo_local(&h, 1).unwrap();
    assert_eq!(w.legs(), &["wl", "p", "q", "wr"]);
    let bond = EffectiveHam::window(&env, &h, 2, 0).unwrap();
    let x = Tensor::from_fn(&["l", "r"], &bond.shape(), |i| (i[0] + 2 * i[1]) as f64).unwrap();
    let y = apply_window(&bond.left, &[], &bond.right, &x).unwrap();
    assert_eq!(y.shape(), x.shape());
}

#[test]
fn lanczos_matches_dense_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let n = 50;
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let m = &a + a.transpose();
    let init: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.01).collect();
    let o = LanczosOpts {
        max_iter: 500,
        ..LanczosOpts::default()
    };
    let r = lanczos_lowest(|x| Ok((&m * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()), &init, &[], &o)
        .unwrap();
    let exact = exact_spectrum(&m, 1).unwrap()[0];
    assert!(r.converged);
    assert_abs_diff_eq!(r.value, exact, epsilon = 1e-10);
}

#[test]
fn heisenberg_l8_matches_ed() {
    let h: Mpo = heisenberg_mpo(8, 1.0).unwrap();
    let exact = exact_spectrum(&dense_hamiltonian(&h).unwrap(), 1).unwrap()[0];
    let psi0: Mps = random_mps(8, 2, Some(4), 3).unwrap();
    let r = dmrg_ground_state(&psi0, &h, &opts(16)).unwrap();
    assert!(r.converged);
    assert_abs_diff_eq!(r.energy, exact, epsilon = 1e-8);
    for w in r.half_sweep_energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    assert!(r.state.form_deviation().unwrap() < 1e-10);
}

#[test]
fn haldane_shastry_l8_energy() {
    let h: Mpo = haldane_shastry_mpo(8, 1e-12).unwrap();
    let psi0: Mps = random_mps(8, 2, Some(4), 7).unwrap();
    let r = dmrg_ground_state(&psi0, &h, &opts(32)).unwrap();
    let exact = -std::f64::consts::PI.powi(2) * (8.0 + 5.0 / 8.0) / 24.0;
    assert_abs_diff_eq!(r.energy, exact, epsilon = 1e-6);
    assert_abs_diff_eq!(r.energy, -3.5468891, epsilon = 1e-6);
}

#[test]
fn one_site_mode_improves_a_fixed_bond_state() {
    let h: Mpo = heisenberg_mpo(6, 1.0).unwrap();
    let psi0: Mps = random_mps(6, 2, Some(4), 9).unwrap();
    let o = DmrgOpts {
        mode: DmrgMode::OneSite,
        ..opts(4)
    };
    let r = dmrg_ground_state(&psi0, &h, &o).unwrap();
    assert_eq!(r.state.bond_dims(), psi0.bond_dims());
    assert!(r.energy < expectation(&psi0, &h).unwrap());
    for w in r.half_sweep_energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    let exact = exact_spectrum(&dense_hamiltonian(&h).unwrap(), 1).unwrap()[0];
    assert!(r.energy >= exact - 1e-12);
}

#[test]
fn orthogonal_dmrg_finds_first_excited_state() {
    let l = 6;
    let h: Mpo = haldane_shastry_mpo(l, 1e-12).unwrap();
    let spec = exact_spectrum(&dense_hamiltonian(&h).unwrap(), 2).unwrap();
    let gs = dmrg_ground_state(&random_mps(l, 2, Some(4), 1).unwrap(), &h, &opts(8)).unwrap();
    assert_abs_diff_eq!(gs.energy, spec[0], epsilon = 1e-9);
    let ex = dmrg_orthogonal(&random_mps(l, 2, Some(4), 2).unwrap(), &h, &[gs.state.clone()], &opts(8)).unwrap();
    assert_abs_diff_eq!(ex.energy, spec[1], epsilon = 1e-8);
    assert!(overlap(&ex.state, &gs.state).unwrap().abs() < 1e-8);
}

#[test]
fn site_legs_roundtrip() {
    let psi: Mps = random_mps(3, 2, None, 1).unwrap();
    let t = local_legs(psi.site(2), 2).unwrap();
    assert_eq!(t.legs(), &["l", "p", "r"]);
    let back = site_legs_from_local(t, 2).unwrap();
    assert_eq!(&back, psi.site(2));
}
