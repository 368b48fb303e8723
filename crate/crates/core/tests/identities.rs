use kdmps::ed::{verify_identity_suite, IdentityReport};
use kdmps::{haldane_shastry_mpo, heisenberg_mpo, product_state, random_mps, Error, Mpo, Mps};
use proptest::prelude::*;

#[test]
fn random_state_passes_everything() {
    let h: Mpo = heisenberg_mpo(4, 1.0).unwrap();
    let psi: Mps = random_mps(4, 2, Some(2), 7).unwrap();
    let r = verify_identity_suite(&psi, &h).unwrap();
    assert!(r.all_pass(), "{:?}", r.failures());
    assert!(r.checks.len() >= 20);
}

#[test]
fn product_state_passes() {
    let h: Mpo = haldane_shastry_mpo(3, 1e-12).unwrap();
    let psi: Mps = product_state(2, &[0, 1, 1]).unwrap();
    let r = verify_identity_suite(&psi, &h).unwrap();
    assert!(r.all_pass(), "{:?}", r.failures());
}

#[test]
fn full_bond_state_passes() {
    let h: Mpo = haldane_shastry_mpo(5, 1e-12).unwrap();
    for cap in [None, Some(3)] {
        let psi: Mps = random_mps(5, 2, cap, 2).unwrap();
        let r = verify_identity_suite(&psi, &h).unwrap();
        assert!(r.all_pass(), "{:?}", r.failures());
    }
}

#[test]
fn report_json_layout() {
    let h: Mpo = heisenberg_mpo(3, 1.0).unwrap();
    let psi: Mps = random_mps(3, 2, None, 1).unwrap();
    let r = verify_identity_suite(&psi, &h).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    let entry = &v["mixed_products"];
    assert!(entry["max_abs_deviation"].is_number());
    assert_eq!(entry["pass"], serde_json::Value::Bool(true));
    let back: IdentityReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, r);
}

#[test]
fn guard_is_enforced() {
    let h: Mpo = heisenberg_mpo(13, 1.0).unwrap();
    let psi: Mps = random_mps(13, 2, Some(2), 1).unwrap();
    assert!(matches!(verify_identity_suite(&psi, &h), Err(Error::GuardExceeded { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identities_hold_for_random_states(seed in any::<u64>(), l in 3usize..=6, d in 1usize..=3, hs in any::<bool>()) {
        let h: Mpo = if hs { haldane_shastry_mpo(l, 1e-12).unwrap() } else { heisenberg_mpo(l, 1.0).unwrap() };
        let psi: Mps = random_mps(l, 2, Some(d), seed).unwrap();
        let r = verify_identity_suite(&psi, &h).unwrap();
        prop_assert!(r.all_pass(), "{:?}", r.failures());
    }
}
