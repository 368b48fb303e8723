use approx::assert_abs_diff_eq;
use kdmps::ed::{dense_state, numerical_rank};
use kdmps::mps::bond_profile;
use kdmps::projectors::{
    apply_projector_sum, convert_kd_dk, dense_projector_sum, one_perp_mixed, ApplyContext, PairTerm,
};
use kdmps::{
    apply_projector, build_bases, dense_projector, overlap, product_state, random_mps, subspace_dimension, Bases,
    Mps, ProjectorSpec, ProjectorSum, Sector, Side,
};
use nalgebra::DMatrix;

fn bases(l: usize, cap: Option<usize>, seed: u64) -> Bases {
    let psi: Mps = random_mps(l, 2, cap, seed).unwrap();
    build_bases(&psi).unwrap()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn perp(n: usize) -> ProjectorSpec {
    ProjectorSpec::IrreducibleNPerp { n }
}

fn global(n: usize) -> ProjectorSpec {
    ProjectorSpec::GlobalNs { n, pivot: None }
}

fn local(n: usize, l: usize) -> ProjectorSpec {
    ProjectorSpec::LocalNs { n, l }
}

fn pair(x: Sector, xbar: Sector, l: usize, lbar: usize) -> ProjectorSpec {
    ProjectorSpec::pair(x, xbar, l, lbar)
}

#[test]
fn bases_are_orthonormal_and_gauge_consistent() {
    for (l, cap) in [(3, None), (4, Some(2)), (6, Some(3)), (5, Some(1))] {
        let b = bases(l, cap, 7);
        assert!(b.deviation().unwrap() < 1e-10);
        let psi = &b.kept.reference;
        for bond in 0..=l {
            let s = b.bond_state(bond).unwrap();
            assert_abs_diff_eq!(overlap(&s, psi).unwrap(), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn bases_normalize_the_reference() {
    let psi: Mps = random_mps(4, 2, Some(2), 3).unwrap();
    let b = build_bases(&psi.scaled(3.5).unwrap()).unwrap();
    assert_abs_diff_eq!(overlap(&b.kept.reference, &psi).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn discarded_dims() {
    let b: Bases = build_bases(&product_state(2, &[0, 1, 0]).unwrap()).unwrap();
    assert_eq!(b.bond_dims(), vec![1, 1, 1, 1]);
    assert_eq!(b.discarded_left_dims(), vec![1, 1, 1]);

    let b = bases(4, None, 1);
    assert_eq!(b.bond_dims(), vec![1, 2, 4, 2, 1]);
    assert_eq!(b.discarded_left_dims(), vec![0, 0, 6, 3]);
    assert_eq!(b.discarded_right_dims(), vec![3, 6, 0, 0]);
}

#[test]
fn subspace_dimension_tables() {
    let dims = |b: &Bases| (0..=b.len()).map(|n| subspace_dimension(b, n).unwrap()).collect::<Vec<_>>();
    assert_eq!(dims(&bases(4, None, 2)), vec![1, 15, 0, 0, 0]);
    assert_eq!(dims(&bases(4, Some(2), 2)), vec![1, 11, 4, 0, 0]);
    let prod: Bases = build_bases(&product_state(2, &[0, 0]).unwrap()).unwrap();
    assert_eq!(dims(&prod), vec![1, 2, 1]);
    assert!(subspace_dimension(&prod, 3).is_err());
}

#[test]
fn dimensions_match_dense_ranks() {
    for (l, cap, seed) in [(4, None, 1), (4, Some(2), 2), (5, Some(2), 3), (6, Some(3), 4), (6, Some(1), 5)] {
        let b = bases(l, cap, seed);
        let mut total = 0;
        for n in 0..=l {
            let p = dense_projector(&perp(n), &b).unwrap();
            let dim = subspace_dimension(&b, n).unwrap();
            assert_eq!(numerical_rank(&p), dim, "L={l} cap={cap:?} n={n}");
            assert_abs_diff_eq!(p.trace(), dim as f64, epsilon = 1e-9);
            total += dim;
        }
        assert_eq!(total, 1 << l);
    }
}

#[test]
fn irreducible_projectors_resolve_identity() {
    for (l, cap) in [(4, None), (5, Some(2)), (6, Some(3))] {
        let b = bases(l, cap, 11);
        let ps: Vec<DMatrix<f64>> = (0..=l).map(|n| dense_projector(&perp(n), &b).unwrap()).collect();
        let sum = ps.iter().fold(DMatrix::zeros(1 << l, 1 << l), |acc, p| acc + p);
        assert!(max_diff(&sum, &DMatrix::identity(1 << l, 1 << l)) < 1e-10);
        for (i, p) in ps.iter().enumerate() {
            assert!(max_diff(p, &p.transpose()) < 1e-12);
            for (j, q) in ps.iter().enumerate() {
                let expect = if i == j { p.clone() } else { DMatrix::zeros(1 << l, 1 << l) };
                assert!(max_diff(&(p * q), &expect) < 1e-10, "n={i} n'={j}");
            }
        }
    }
}

#[test]
fn global_projectors_are_nested_and_pivot_independent() {
    let l = 5;
    let b = bases(l, Some(2), 21);
    let g: Vec<DMatrix<f64>> = (0..=l).map(|n| dense_projector(&global(n), &b).unwrap()).collect();
    for n in 0..=l {
        assert!(max_diff(&(&g[n] * &g[n]), &g[n]) < 1e-10);
        for m in 0..n {
            assert!(max_diff(&(&g[n] * &g[m]), &g[m]) < 1e-10);
        }
        if n >= 1 {
            for p in 1..=l + 1 - n {
                let alt = dense_projector(&ProjectorSpec::GlobalNs { n, pivot: Some(p) }, &b).unwrap();
                assert!(max_diff(&alt, &g[n]) < 1e-10, "n={n} pivot={p}");
                let loc = dense_projector(&local(n, p), &b).unwrap();
                assert!(max_diff(&(&g[n] * &loc), &loc) < 1e-10);
            }
            let perp_n = dense_projector(&perp(n), &b).unwrap();
            assert!(max_diff(&perp_n, &(&g[n] - &g[n - 1])) < 1e-10);
        }
    }
    assert!(max_diff(&g[l], &DMatrix::identity(1 << l, 1 << l)) < 1e-10);
}

#[test]
fn k_only_form_matches_dd_form() {
    let l = 6;
    let b = bases(l, Some(3), 5);
    for n in 2..=l {
        let mut s = ProjectorSum::new();
        for i in 1..=l + 1 - n {
            s = s.plus(1.0, local(n, i));
            s = s.plus(-1.0, local(n - 1, i + 1));
            s = s.plus(-1.0, local(n - 1, i));
            if i < l + 2 - n {
                s = s.plus(1.0, local(n - 2, i + 1));
            }
        }
        let lhs = dense_projector_sum(&s, &b).unwrap();
        let rhs = dense_projector(&perp(n), &b).unwrap();
        assert!(max_diff(&lhs, &rhs) < 1e-10, "n={n}");

        let mut k = ProjectorSum::new();
        for i in 1..=l + 1 - n {
            k = k.plus(1.0, local(n, i));
        }
        for i in 1..=l - n {
            k = k.plus(-1.0, local(n - 1, i + 1));
        }
        let kform = dense_projector_sum(&k, &b).unwrap();
        let gl = dense_projector(&global(n), &b).unwrap();
        assert!(max_diff(&kform, &gl) < 1e-10, "n={n}");
    }
}

#[test]
fn one_perp_forms_agree() {
    let l = 5;
    let b = bases(l, Some(2), 8);
    let dk = dense_projector(&perp(1), &b).unwrap();
    let kd: ProjectorSum = (1..=l).fold(ProjectorSum::new(), |s, i| s.plus(1.0, pair(Sector::K, Sector::D, i - 1, i)));
    assert!(max_diff(&dk, &dense_projector_sum(&kd, &b).unwrap()) < 1e-10);
    for p in 1..=l {
        let mixed = dense_projector_sum(&one_perp_mixed(l, p).unwrap(), &b).unwrap();
        assert!(max_diff(&dk, &mixed) < 1e-10, "pivot {p}");
    }
}

#[test]
fn kd_dk_conversion() {
    let l = 4;
    let b = bases(l, None, 9);
    for n in 1..=l {
        for lb in 1..=l + 1 - n {
            for lp in lb..=l + 1 - n {
                let (lhs, rhs) = convert_kd_dk(l, n, lb, lp).unwrap();
                let a = dense_projector_sum(&lhs, &b).unwrap();
                let c = dense_projector_sum(&rhs, &b).unwrap();
                assert!(max_diff(&a, &c) < 1e-10, "n={n} window [{lb}, {lp}]");
            }
        }
    }
    assert!(convert_kd_dk(l, 1, 3, 2).is_err());
    assert!(convert_kd_dk(l, 2, 1, 4).is_err());
}

#[test]
fn same_side_products() {
    let l = 5;
    let b = bases(l, Some(2), 31);
    use Sector::{D, K};
    let left = |x: Sector, i: usize| dense_projector(&pair(x, K, i, l + 1), &b).unwrap();
    let right = |x: Sector, i: usize| dense_projector(&pair(K, x, 0, i), &b).unwrap();
    let zero = DMatrix::<f64>::zeros(1 << l, 1 << l);
    for i in 1..=l {
        for j in i..=l {
            let (kk, kj) = (left(K, i), left(K, j));
            let (di, dj) = (left(D, i), left(D, j));
            assert!(max_diff(&(&kj * &kk), &kj) < 1e-10);
            assert!(max_diff(&(&kk * &kj), &kj) < 1e-10);
            if j > i {
                assert!(max_diff(&(&kj * &di), &zero) < 1e-10);
                assert!(max_diff(&(&dj * &di), &zero) < 1e-10);
                assert!(max_diff(&(&dj * &kk), &dj) < 1e-10);
            } else {
                assert!(max_diff(&(&di * &di), &di) < 1e-10);
                assert!(max_diff(&(&kk * &di), &zero) < 1e-10);
            }
            // Q^K on more sites lies inside Q^K on fewer sites
            let (few, many) = (right(K, j + 1), right(K, i + 1));
            assert!(max_diff(&(&few * &many), &many) < 1e-10);
            let (qd_few, qd_many) = (right(D, j), right(D, i));
            if i < j {
                assert!(max_diff(&(&qd_few * &qd_many), &zero) < 1e-10);
                assert!(max_diff(&(&few * &qd_many), &qd_many) < 1e-10);
            } else {
                assert!(max_diff(&(&qd_many * &qd_many), &qd_many) < 1e-10);
                assert!(max_diff(&(&qd_many * &few), &qd_many) < 1e-10);
                assert!(max_diff(&(&qd_many * &right(K, i)), &zero) < 1e-10);
            }
        }
    }
}

#[test]
fn mixed_products_and_mismatch_collapse() {
    let l = 5;
    let b = bases(l, Some(2), 41);
    use Sector::{D, K};
    for i in 0..l {
        for j in i + 1..=l + 1 {
            for x in [K, D] {
                for xb in [K, D] {
                    let p = dense_projector(&pair(x, xb, i, j), &b).unwrap();
                    for y in [K, D] {
                        for yb in [K, D] {
                            let q = dense_projector(&pair(y, yb, i, j), &b).unwrap();
                            let expect = if x == y && xb == yb { p.clone() } else { DMatrix::zeros(1 << l, 1 << l) };
                            assert!(max_diff(&(&p * &q), &expect) < 1e-10);
                        }
                    }
                }
            }
        }
    }
    for n in 1..=l {
        for i in 1..=l - n {
            let a = dense_projector(&local(n, i), &b).unwrap();
            let c = dense_projector(&local(n, i + 1), &b).unwrap();
            let e = dense_projector(&local(n - 1, i + 1), &b).unwrap();
            assert!(max_diff(&(&a * &c), &e) < 1e-10, "n={n} l={i}");
        }
    }
}

#[test]
fn two_site_decomposition() {
    let l = 6;
    let b = bases(l, Some(3), 13);
    use Sector::{D, K};
    for i in 1..l {
        let whole = dense_projector(&local(2, i), &b).unwrap();
        let mut parts = DMatrix::zeros(1 << l, 1 << l);
        for x in [K, D] {
            for xb in [K, D] {
                parts += dense_projector(&pair(x, xb, i, i + 1), &b).unwrap();
            }
        }
        assert!(max_diff(&whole, &parts) < 1e-10);
        let tr = dense_projector(&local(1, i), &b).unwrap().trace();
        let dims = b.bond_dims();
        assert_abs_diff_eq!(tr, (dims[i - 1] * 2 * dims[i]) as f64, epsilon = 1e-9);
    }
}

#[test]
fn apply_matches_dense() {
    let l = 5;
    let b = bases(l, Some(2), 17);
    let phi: Mps = random_mps(l, 2, Some(3), 99).unwrap().scaled(1.7).unwrap();
    let v = dense_state(&phi).unwrap().amplitudes;
    let mut specs = vec![
        global(1),
        ProjectorSpec::GlobalNs { n: 2, pivot: Some(2) },
        ProjectorSpec::LocalNsOrtho { n: 2, l: 3, side: Side::Left },
        ProjectorSpec::LocalNsOrtho { n: 2, l: 1, side: Side::Right },
        pair(Sector::D, Sector::D, 2, 3),
        pair(Sector::K, Sector::K, 0, l + 1),
        pair(Sector::K, Sector::D, 0, 1),
        pair(Sector::D, Sector::K, l, l + 1),
    ];
    specs.extend((0..=l).map(perp));
    specs.extend((0..=l).map(global));
    for spec in &specs {
        let p = dense_projector(spec, &b).unwrap();
        let got = apply_projector(spec, &b, &phi).unwrap();
        let want = &p * &v;
        assert!((got.dense().unwrap() - &want).amax() < 1e-10, "{spec:?}");
        let mat = got.materialize().unwrap();
        assert!((dense_state(&mat).unwrap().amplitudes - &want).amax() < 1e-10);
        assert_abs_diff_eq!(got.norm_sqr().unwrap(), want.norm_squared(), epsilon = 1e-10);
        let twice = apply_projector(spec, &b, &mat).unwrap();
        assert!((twice.dense().unwrap() - &want).amax() < 1e-10, "idempotence {spec:?}");
    }
}

#[test]
fn reference_state_behaviour() {
    let b = bases(5, Some(2), 23);
    let psi = b.kept.reference.clone();
    for n in 1..=5 {
        let out = apply_projector(&perp(n), &b, &psi).unwrap();
        assert!(out.norm_sqr().unwrap().abs() < 1e-24, "n={n}");
    }
    let phi: Mps = random_mps(5, 2, Some(2), 4).unwrap();
    let out = apply_projector(&perp(0), &b, &phi).unwrap();
    let c = overlap(&psi, &phi).unwrap();
    let want = dense_state(&psi).unwrap().amplitudes * c;
    assert!((out.dense().unwrap() - want).amax() < 1e-12);
    let ctx = ApplyContext::new(&b, &phi).unwrap();
    assert_abs_diff_eq!(ctx.reference_overlap().unwrap(), c, epsilon = 1e-12);
}

#[test]
fn boundary_discarded_terms_vanish() {
    let b = bases(3, None, 1);
    let phi: Mps = random_mps(3, 2, None, 2).unwrap();
    let ctx = ApplyContext::new(&b, &phi).unwrap();
    let t = PairTerm { sign: 1, x: Sector::D, xbar: Sector::K, l: 0, lbar: 2 };
    assert!(ctx.apply_pair(&t).unwrap().is_none());
    let t = PairTerm { sign: 1, x: Sector::K, xbar: Sector::D, l: 0, lbar: 4 };
    assert!(ctx.apply_pair(&t).unwrap().is_none());
}

#[test]
fn invalid_ranges_are_rejected() {
    let b = bases(4, Some(2), 1);
    let phi = b.kept.reference.clone();
    for spec in [
        pair(Sector::K, Sector::K, 2, 2),
        pair(Sector::K, Sector::K, 0, 6),
        local(2, 4),
        local(1, 0),
        ProjectorSpec::LocalNsOrtho { n: 0, l: 1, side: Side::Left },
        ProjectorSpec::GlobalNs { n: 2, pivot: Some(4) },
        perp(5),
        global(5),
    ] {
        assert!(apply_projector(&spec, &b, &phi).is_err(), "{spec:?}");
        assert!(dense_projector(&spec, &b).is_err(), "{spec:?}");
    }
    let other: Mps = random_mps(5, 2, Some(2), 1).unwrap();
    assert!(apply_projector(&perp(1), &b, &other).is_err());
}

#[test]
fn projector_sum_linearity() {
    let b = bases(4, Some(2), 3);
    let phi: Mps = random_mps(4, 2, Some(2), 5).unwrap();
    let s = ProjectorSum::new().plus(2.0, perp(1)).plus(-0.5, perp(2));
    let got = apply_projector_sum(&s, &b, &phi).unwrap().dense().unwrap();
    let v = dense_state(&phi).unwrap().amplitudes;
    let want = (dense_projector(&perp(1), &b).unwrap() * 2.0 - dense_projector(&perp(2), &b).unwrap() * 0.5) * v;
    assert!((got - want).amax() < 1e-10);
}

#[test]
fn bond_profile_is_respected() {
    let b = bases(6, Some(3), 2);
    assert_eq!(b.bond_dims(), bond_profile(6, 2, Some(3)));
}
