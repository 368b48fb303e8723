use approx::assert_abs_diff_eq;
use kdmps::ed::{dense_hamiltonian, dense_state};
use kdmps::mpo::identity_mpo;
use kdmps::variance::{dense_variance, write_variance_csv, VarianceContext};
use kdmps::{
    build_bases, cumulative_variance, dense_projector, dmrg_ground_state, haldane_shastry_mpo, heisenberg_mpo, mpo_add,
    nsite_variance, random_mps, DmrgOpts, Mpo, Mps, ProjectorSpec, TruncationPolicy, VarianceReport,
};

#[test]
fn singlet_has_no_variance() {
    let h: Mpo = heisenberg_mpo(2, 1.0).unwrap();
    let gs = dmrg_ground_state(&random_mps(2, 2, None, 3).unwrap(), &h, &DmrgOpts::default()).unwrap();
    let r = nsite_variance(&gs.state, &h, 2).unwrap();
    assert_abs_diff_eq!(r.energy, -0.75, epsilon = 1e-12);
    for d in &r.delta {
        assert!(*d <= 1e-20, "{d:e}");
    }
}

#[test]
fn terms_match_dense_irreducible_projections() {
    for (h, seed) in [
        (haldane_shastry_mpo::<f64>(6, 1e-12).unwrap(), 1),
        (heisenberg_mpo::<f64>(6, 1.0).unwrap(), 2),
    ] {
        let psi: Mps = random_mps(6, 2, Some(3), seed).unwrap();
        let b = build_bases(&psi).unwrap();
        let v = dense_state(&b.kept.reference).unwrap().amplitudes;
        let hv = dense_hamiltonian(&h).unwrap() * v;
        let r = nsite_variance(&psi, &h, 6).unwrap();
        for n in 1..=6 {
            let p = dense_projector(&ProjectorSpec::IrreducibleNPerp { n }, &b).unwrap();
            let want = (&p * &hv).norm_squared();
            assert_abs_diff_eq!(r.delta[n - 1], want, epsilon = 1e-10);
        }
        let total = r.total.unwrap();
        assert_abs_diff_eq!(r.cumulative[5], total, epsilon = 1e-10);
        assert_abs_diff_eq!(total, dense_variance(psi.clone(), &h).unwrap(), epsilon = 1e-14);
    }
}

#[test]
fn energy_shift_invariance() {
    let l = 6;
    let h: Mpo = haldane_shastry_mpo(l, 1e-12).unwrap();
    let psi: Mps = random_mps(l, 2, Some(3), 5).unwrap();
    let base = nsite_variance(&psi, &h, l).unwrap();
    for c in [-10.0, 0.0, 10.0] {
        let shifted = mpo_add(&h, &identity_mpo(l, 2).unwrap(), 1.0, c).unwrap();
        let r = nsite_variance(&psi, &shifted, l).unwrap();
        assert_abs_diff_eq!(r.energy, base.energy + c, epsilon = 1e-10);
        for (a, b) in r.delta.iter().zip(&base.delta) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300) || (a - b).abs() < 1e-14, "{a:e} vs {b:e}");
        }
    }
}

#[test]
fn one_site_forms_agree() {
    let l = 6;
    let h: Mpo = haldane_shastry_mpo(l, 1e-12).unwrap();
    let psi: Mps = random_mps(l, 2, Some(3), 9).unwrap();
    let ctx = VarianceContext::new(&psi, &h).unwrap();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 1..=l {
        let x = ctx.one_site_term(i).unwrap();
        let y = ctx.one_site_term_isometry(i).unwrap();
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        a += x;
        b += y;
        c += ctx.one_site_term_right(i).unwrap();
    }
    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    assert_abs_diff_eq!(a, c, epsilon = 1e-12);
    assert_abs_diff_eq!(a, ctx.delta(1).unwrap(), epsilon = 1e-14);
}

#[test]
fn nearest_neighbour_model_has_no_long_windows() {
    let l = 8;
    let h: Mpo = heisenberg_mpo(l, 1.0).unwrap();
    for psi in [random_mps::<f64>(l, 2, Some(4), 1).unwrap()] {
        let r = nsite_variance(&psi, &h, l).unwrap();
        for n in 3..=l {
            assert!(r.delta[n - 1] <= 1e-12 * r.delta[1], "n={n}: {:e}", r.delta[n - 1]);
        }
    }
    let opts = DmrgOpts {
        policy: TruncationPolicy::max_rank(4),
        ..DmrgOpts::default()
    };
    let gs = dmrg_ground_state(&random_mps(l, 2, Some(4), 2).unwrap(), &h, &opts).unwrap();
    let r = nsite_variance(&gs.state, &h, 6).unwrap();
    assert!(r.delta[0] < r.delta[1], "{:?}", r.delta);
    assert_abs_diff_eq!(r.cumulative[5], r.total.unwrap(), epsilon = 1e-10);
}

#[test]
fn cumulative_sums() {
    assert_eq!(cumulative_variance(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
    assert_eq!(cumulative_variance(&[1.5, 2.0]), vec![1.5, 3.5]);
}

#[test]
fn range_checks() {
    let h: Mpo = heisenberg_mpo(4, 1.0).unwrap();
    let psi: Mps = random_mps(4, 2, Some(2), 1).unwrap();
    assert!(nsite_variance(&psi, &h, 0).is_err());
    assert!(nsite_variance(&psi, &h, 5).is_err());
    let other: Mpo = heisenberg_mpo(5, 1.0).unwrap();
    assert!(nsite_variance(&psi, &other, 2).is_err());
}

#[test]
fn csv_layout() {
    let r = VarianceReport {
        energy: -1.0,
        delta: vec![0.25, 1.0 / 3.0],
        cumulative: cumulative_variance(&[0.25, 1.0 / 3.0]),
        total: None,
    };
    let mut buf = Vec::new();
    write_variance_csv(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,delta_n_perp,delta_ns_cumulative");
    assert_eq!(lines[1], "1,2.50000000000e-1,2.50000000000e-1");
    assert_eq!(lines[2], "2,3.33333333333e-1,5.83333333333e-1");
}
