use proptest::prelude::*;
use qpt_core::tensor::{contract_pair, partial_trace, Index, Tensor};
use qpt_core::C64;

fn tensor_strategy(labels: &'static [&'static str]) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(1usize..4, labels.len()).prop_flat_map(move |dims| {
        let len: usize = dims.iter().product();
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(move |vals| {
            let idx = labels
                .iter()
                .zip(&dims)
                .map(|(l, &d)| Index::new(*l, d))
                .collect();
            Tensor::new(idx, vals.into_iter().map(|(r, i)| C64::new(r, i)).collect()).unwrap()
        })
    })
}

fn offset(t: &Tensor, pos: &[usize]) -> usize {
    pos.iter().zip(t.dims()).fold(0, |acc, (&p, d)| acc * d + p)
}

proptest! {
    #[test]
    fn permute_roundtrip(t in tensor_strategy(&["a", "b", "c", "d"]), perm in Just(vec!["c", "a", "d", "b"]).prop_shuffle()) {
        let p = t.permute(&perm).unwrap();
        for (k, l) in perm.iter().enumerate() {
            prop_assert_eq!(p.indices()[k].name(), *l);
        }
        let back = p.permute(&["a", "b", "c", "d"]).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn contract_pair_matches_naive(da in 1usize..4, db in 1usize..4, dk in 1usize..4, dl in 1usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rnd = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let a = Tensor::from_fn(vec![Index::new("i", da), Index::new("k", dk), Index::new("l", dl)], |_| rnd()).unwrap();
        let b = Tensor::from_fn(vec![Index::new("l", dl), Index::new("j", db), Index::new("k", dk)], |_| rnd()).unwrap();
        let c = contract_pair(&a, &b).unwrap();
        let names: Vec<_> = c.indices().iter().map(|i| i.name().to_string()).collect();
        prop_assert_eq!(names, vec!["i".to_string(), "j".to_string()]);
        for i in 0..da {
            for j in 0..db {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..dk {
                    for l in 0..dl {
                        acc += a.get(&[i, k, l]) * b.get(&[l, j, k]);
                    }
                }
                prop_assert!((c.get(&[i, j]) - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn outer_product_without_shared_labels(a in tensor_strategy(&["x"]), b in tensor_strategy(&["y", "z"])) {
        let c = contract_pair(&a, &b).unwrap();
        prop_assert_eq!(c.rank(), 3);
        for x in 0..a.dims()[0] {
            for y in 0..b.dims()[0] {
                for z in 0..b.dims()[1] {
                    let want = a.data()[x] * b.data()[offset(&b, &[y, z])];
                    prop_assert!((c.get(&[x, y, z]) - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn partial_trace_sums_diagonal(d in 1usize..4, e in 1usize..4, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = Tensor::from_fn(
            vec![Index::new("p", d), Index::new("q", e), Index::new("p'", d)],
            |_| C64::new(rng.random(), rng.random()),
        ).unwrap();
        let r = partial_trace(&t, &[("p", "p'")]).unwrap();
        prop_assert_eq!(r.dims(), vec![e]);
        for q in 0..e {
            let want: C64 = (0..d).map(|p| t.get(&[p, q, p])).sum();
            prop_assert!((r.get(&[q]) - want).norm() < 1e-12);
        }
    }
}

#[test]
fn mismatched_extents_are_rejected() {
    let a = Tensor::zeros(vec![Index::new("k", 2)]).unwrap();
    let b = Tensor::zeros(vec![Index::new("k", 3)]).unwrap();
    assert!(contract_pair(&a, &b).is_err());
    let t = Tensor::zeros(vec![Index::new("p", 2), Index::new("q", 3)]).unwrap();
    assert!(partial_trace(&t, &[("p", "q")]).is_err());
    assert!(Tensor::zeros(vec![Index::new("p", 2), Index::new("p", 2)]).is_err());
}
