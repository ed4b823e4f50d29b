mod common;

use common::*;
use proptest::prelude::*;
use qpt_core::linalg::{state_fidelity, CVector, DenseChoi};
use qpt_core::lpdo::{
    choi_element, choi_trace, fidelity_to_unitary, load_checkpoint, materialize_choi, probability,
    reduce_to_subset, save_checkpoint, tp_regularizer, tp_regularizer_via, GammaRoute, Lpdo,
};
use qpt_core::registry::{builtin_pauli6, pauli_state};
use qpt_core::sim::{build_circuit_unitary, build_rqc_cycle};
use qpt_core::topology::Topology;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn materialized_choi_matches_oracle(seed in any::<u64>()) {
        let lpdo = random_small_lpdo(seed);
        let oracle = choi_oracle(&lpdo);
        let tn = materialize_choi(&lpdo).unwrap();
        prop_assert!(max_abs_diff(tn.matrix(), &oracle) <= 1e-10 * oracle.norm().max(1.0));
        prop_assert!(tn.hermiticity_error() <= 1e-10 * oracle.norm().max(1.0));
        prop_assert!(tn.min_eigenvalue() >= -1e-10 * oracle.norm().max(1.0));
    }

    #[test]
    fn trace_and_gamma_match_oracle(seed in any::<u64>()) {
        let lpdo = random_small_lpdo(seed);
        let oracle = choi_oracle(&lpdo);
        let n = lpdo.n_qubits();
        prop_assert!(rel(choi_trace(&lpdo).unwrap(), trace(&oracle).re) < 1e-10);
        let g = gamma_oracle(&oracle, n);
        for route in [GammaRoute::DenseDelta, GammaRoute::Network] {
            prop_assert!(rel(tp_regularizer_via(&lpdo, route).unwrap(), g) < 1e-8);
        }
    }

    #[test]
    fn probabilities_match_oracle(seed in any::<u64>(), pick in prop::collection::vec((0usize..6, 0usize..6), 3)) {
        let lpdo = random_small_lpdo(seed);
        let n = lpdo.n_qubits();
        let (states, povm) = builtin_pauli6();
        let rho: Vec<_> = pick[..n].iter().map(|&(a, _)| states.0[a]).collect();
        let m: Vec<_> = pick[..n].iter().map(|&(_, b)| povm.0[b]).collect();
        let p = probability(&lpdo, &rho, &m).unwrap();
        prop_assert!(rel(p, probability_oracle(&choi_oracle(&lpdo), n, &rho, &m)) < 1e-9);
    }

    #[test]
    fn elements_match_oracle(seed in any::<u64>(), r in 0usize..64, col in 0usize..64) {
        let lpdo = random_small_lpdo(seed);
        let n = lpdo.n_qubits();
        let h = 1usize << n;
        let (r, col) = (r % (h * h), col % (h * h));
        let bits = |x: usize| (0..n).map(|q| (x >> (n - 1 - q)) & 1).collect::<Vec<_>>();
        let e = choi_element(&lpdo, &bits(r / h), &bits(r % h), &bits(col / h), &bits(col % h)).unwrap();
        prop_assert!((e - choi_oracle(&lpdo)[(r, col)]).norm() < 1e-10);
    }
}

#[test]
fn reduction_matches_oracle() {
    let lpdo = random_lpdo(&Topology::ring(3), 2, 2, 11);
    let lambda = choi_oracle(&lpdo);
    let x = pauli_state("X+").unwrap();
    let y = pauli_state("Y-").unwrap();
    let cases: Vec<(Vec<(usize, _)>, Vec<usize>)> = vec![
        (vec![(1, x)], vec![0, 2]),
        (vec![(0, y), (2, x)], vec![1]),
        (vec![], vec![2, 0, 1]),
    ];
    for (fixed, keep) in cases {
        let tn = reduce_to_subset(&lpdo, &fixed, &keep).unwrap();
        let oracle = reduce_oracle(&lambda, 3, &fixed, &keep);
        assert!(max_abs_diff(tn.matrix(), &oracle) < 1e-10, "{keep:?}");
    }
}

#[test]
fn identity_reduction_is_identity() {
    let lpdo = random_lpdo(&Topology::line(3), 1, 1, 0);
    let id = qpt_core::lpdo::identity_lpdo(lpdo.topology(), lpdo.dims()).unwrap();
    let r = reduce_to_subset(&id, &[(1, pauli_state("Z+").unwrap())], &[0, 2]).unwrap();
    let expected = DenseChoi::from_unitary(&qpt_core::linalg::CMatrix::identity(4, 4)).unwrap();
    assert!(max_abs_diff(r.matrix(), expected.matrix()) < 1e-12);
}

#[test]
fn unitary_fidelity_matches_dense_uhlmann() {
    let topo = Topology::line(3);
    let u = build_circuit_unitary(&build_rqc_cycle(&topo, &[(0, 1), (1, 2)], 3).unwrap()).unwrap();
    let target = DenseChoi::from_unitary(&u).unwrap();
    for seed in 0..10 {
        let lpdo = random_lpdo(&topo, 2, 2, seed);
        let lambda = choi_oracle(&lpdo);
        let h = 8;
        let vec = CVector::from_fn(h * h, |r, _| u[(r % h, r / h)]);
        let direct = (vec.adjoint() * &lambda * &vec)[(0, 0)].re / (h as f64 * trace(&lambda).re);
        let tn = fidelity_to_unitary(&lpdo, &u).unwrap();
        let dense = state_fidelity(&lambda, target.matrix()).unwrap();
        assert!((tn - direct).abs() < 1e-10);
        assert!((tn - dense).abs() < 1e-8, "{tn} {dense}");
    }
}

#[test]
fn exact_circuit_has_unit_fidelity_and_is_tp() {
    let topo = Topology::tee4();
    let spec = build_rqc_cycle(&topo, &[(0, 1), (1, 2), (1, 3)], 8).unwrap();
    let lpdo = spec.ideal_lpdo().unwrap();
    let u = build_circuit_unitary(&spec).unwrap();
    assert!((fidelity_to_unitary(&lpdo, &u).unwrap() - 1.0).abs() < 1e-10);
    assert!(tp_regularizer(&lpdo).unwrap() < 1e-10);
    assert!((choi_trace(&lpdo).unwrap() - 16.0).abs() < 1e-10);
}

#[test]
fn checkpoint_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let lpdo = random_small_lpdo(seed);
        let path = dir.path().join(format!("{seed}.json"));
        save_checkpoint(&lpdo, &path).unwrap();
        let back: Lpdo = load_checkpoint(&path).unwrap();
        assert_eq!(back, lpdo);
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\":\"lpdo-checkpoint/9\"}").unwrap();
    assert!(load_checkpoint(&bad).is_err());
}
