//! Dense reference computations shared by the integration tests. Everything
//! here works from raw site arrays and full matrices, never through the
//! contraction engine.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qpt_core::linalg::{CMatrix, Mat2};
use qpt_core::lpdo::{init_lpdo, Lpdo, LpdoDims};
use qpt_core::topology::Topology;
use qpt_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_topologies() -> Vec<Topology> {
    vec![
        Topology::line(1),
        Topology::line(2),
        Topology::line(3),
        Topology::ring(3),
    ]
}

pub fn random_lpdo(topo: &Topology, chi: usize, k: usize, seed: u64) -> Lpdo {
    init_lpdo(topo, &LpdoDims::uniform(topo, chi, k), 0.6, seed).unwrap()
}

/// Picks a topology and dimensions from `seed`, then a random LPDO.
pub fn random_small_lpdo(seed: u64) -> Lpdo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topos = small_topologies();
    let topo = &topos[rng.random_range(0..topos.len())];
    let dims = LpdoDims {
        kraus: (0..topo.n_qubits())
            .map(|_| rng.random_range(1..=3))
            .collect(),
        bond: (0..topo.edges().len())
            .map(|_| rng.random_range(1..=3))
            .collect(),
    };
    init_lpdo(topo, &dims, 0.6, rng.random()).unwrap()
}

fn digits(mut x: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = x % d;
        x /= d;
    }
    out
}

/// `Λ = Σ_ν |ψ_ν><ψ_ν|` with `ψ_ν[σ, τ]` summed over every bond assignment.
pub fn choi_oracle(lpdo: &Lpdo) -> CMatrix {
    let n = lpdo.n_qubits();
    let topo = lpdo.topology();
    let dims = lpdo.dims();
    let h = 1usize << n;
    let bond_dims = &dims.bond;
    let n_bond: usize = bond_dims.iter().product();
    let n_kraus: usize = dims.kraus.iter().product();
    let incident: Vec<Vec<usize>> = (0..n).map(|j| topo.incident_edges(j)).collect();
    let mut lambda = CMatrix::zeros(h * h, h * h);
    for nu_flat in 0..n_kraus {
        let nu = digits(nu_flat, &dims.kraus);
        let mut psi = vec![C64::new(0.0, 0.0); h * h];
        for (row, amp) in psi.iter_mut().enumerate() {
            let (s, t) = (row / h, row % h);
            for b_flat in 0..n_bond {
                let b = digits(b_flat, bond_dims);
                let mut prod = C64::new(1.0, 0.0);
                for j in 0..n {
                    let sigma = (s >> (n - 1 - j)) & 1;
                    let tau = (t >> (n - 1 - j)) & 1;
                    let mut off = 0;
                    for &e in &incident[j] {
                        off = off * bond_dims[e] + b[e];
                    }
                    let block: usize = incident[j].iter().map(|&e| bond_dims[e]).product();
                    let flat = ((tau * 2 + sigma) * dims.kraus[j] + nu[j]) * block + off;
                    prod *= lpdo.site_data(j)[flat];
                }
                *amp += prod;
            }
        }
        for r in 0..h * h {
            for c in 0..h * h {
                lambda[(r, c)] += psi[r] * psi[c].conj();
            }
        }
    }
    lambda
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn kron_all(ms: &[Mat2]) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for m in ms {
        let dm = DMatrix::from_fn(2, 2, |r, c| m[(r, c)]);
        out = out.kronecker(&dm);
    }
    out
}

/// `Tr[(ρ^T ⊗ M) Λ] d^N / Tr Λ`.
pub fn probability_oracle(lambda: &CMatrix, n: usize, states: &[Mat2], effects: &[Mat2]) -> f64 {
    let op = kron_all(states).transpose().kronecker(&kron_all(effects));
    let raw = trace(&(op * lambda)).re;
    raw * (1u64 << n) as f64 / trace(lambda).re
}

pub fn trace_output(lambda: &CMatrix, n: usize) -> CMatrix {
    let h = 1usize << n;
    CMatrix::from_fn(h, h, |s, sp| {
        (0..h).map(|t| lambda[(s * h + t, sp * h + t)]).sum()
    })
}

/// `sqrt(d^{-N} Σ |Tr_τ Λ - I|^2)`.
pub fn gamma_oracle(lambda: &CMatrix, n: usize) -> f64 {
    let h = 1usize << n;
    let delta = trace_output(lambda, n) - CMatrix::identity(h, h);
    (delta.iter().map(|x| x.norm_sqr()).sum::<f64>() / h as f64).sqrt()
}

/// Feeds `rho` (indexed by qubit) into each fixed qubit, traces its output,
/// and returns the Choi matrix on `keep` in the given order.
pub fn reduce_oracle(
    lambda: &CMatrix,
    n: usize,
    fixed: &[(usize, Mat2)],
    keep: &[usize],
) -> CMatrix {
    let h = 1usize << n;
    let k = keep.len();
    let hk = 1usize << k;
    let bit = |x: usize, q: usize| (x >> (n - 1 - q)) & 1;
    let mut out = CMatrix::zeros(hk * hk, hk * hk);
    for r in 0..h * h {
        for c in 0..h * h {
            let (s, t, sp, tp) = (r / h, r % h, c / h, c % h);
            let mut w = C64::new(1.0, 0.0);
            for (q, rho) in fixed {
                if bit(t, *q) != bit(tp, *q) {
                    w = C64::new(0.0, 0.0);
                    break;
                }
                w *= rho[(bit(s, *q), bit(sp, *q))];
            }
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            let pack = |x: usize| keep.iter().fold(0, |acc, &q| acc * 2 + bit(x, q));
            let (rr, cc) = (pack(s) * hk + pack(t), pack(sp) * hk + pack(tp));
            out[(rr, cc)] += w * lambda[(r, c)];
        }
    }
    out
}

/// Random isometry `V` (rows `ν·2 + τ'`, columns `τ`) read as Kraus operators.
pub fn random_kraus(k: usize, rng: &mut impl Rng) -> Vec<Mat2> {
    let g = CMatrix::from_fn(2 * k, 2, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let q = g.qr().q();
    (0..k)
        .map(|nu| Mat2::from_fn(|r, c| q[(nu * 2 + r, c)]))
        .collect()
}

/// Follows every output leg of a trace-preserving LPDO with an independent
/// random channel of Kraus rank `k`; the result is trace preserving.
pub fn with_output_noise(lpdo: &Lpdo, k: usize, seed: u64) -> Lpdo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lpdo.n_qubits();
    let mut dims = lpdo.dims().clone();
    let data = (0..n)
        .map(|j| {
            let kraus = random_kraus(k, &mut rng);
            let k0 = dims.kraus[j];
            let block = lpdo.bond_block(j);
            let src = lpdo.site_data(j);
            let mut out = vec![C64::new(0.0, 0.0); 4 * k0 * k * block];
            for tau_new in 0..2 {
                for sigma in 0..2 {
                    for nu_new in 0..k {
                        for nu in 0..k0 {
                            for b in 0..block {
                                let mut acc = C64::new(0.0, 0.0);
                                for tau in 0..2 {
                                    acc += kraus[nu_new][(tau_new, tau)]
                                        * src[((tau * 2 + sigma) * k0 + nu) * block + b];
                                }
                                out[((tau_new * 2 + sigma) * k0 * k + nu_new * k0 + nu) * block
                                    + b] = acc;
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    for kd in dims.kraus.iter_mut() {
        *kd *= k;
    }
    Lpdo::from_site_data(lpdo.topology().clone(), dims, data).unwrap()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Random network of `2..=max_tensors` tensors: each pair shares a bond with
/// probability 0.35, bond extents are 1 to 3, and each tensor may carry one
/// open leg.
pub fn random_network(seed: u64, max_tensors: usize) -> qpt_core::planner::TensorNetwork {
    use qpt_core::tensor::{Index, Tensor};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_tensors);
    let mut legs: Vec<Vec<Index>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.35) {
                let idx = Index::new(format!("e{a}_{b}"), rng.random_range(1..=3));
                legs[a].push(idx.clone());
                legs[b].push(idx);
            }
        }
        if rng.random_bool(0.3) {
            legs[a].push(Index::new(format!("o{a}"), rng.random_range(1..=3)));
        }
    }
    let tensors = legs
        .into_iter()
        .map(|idx| {
            Tensor::from_fn(idx, |_| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            })
            .unwrap()
        })
        .collect();
    qpt_core::planner::TensorNetwork::new(tensors).unwrap()
}

/// Runs the greedy and optimal plans on the same network and returns
/// `(greedy_flops, optimal_flops, relative result difference)`.
pub fn compare_plans(net: &qpt_core::planner::TensorNetwork) -> (u128, u128, f64) {
    use qpt_core::planner::{execute_plan, plan_greedy, plan_optimal};
    let greedy = plan_greedy(net.shape());
    let optimal = plan_optimal(net.shape()).unwrap();
    let open: Vec<String> = net
        .open_indices()
        .iter()
        .map(|i| i.name().to_string())
        .collect();
    let order: Vec<&str> = open.iter().map(String::as_str).collect();
    let a = execute_plan(net, &greedy).unwrap().permute(&order).unwrap();
    let b = execute_plan(net, &optimal)
        .unwrap()
        .permute(&order)
        .unwrap();
    let scale = a
        .data()
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    (
        greedy.est_flops,
        optimal.est_flops,
        a.max_abs_diff(&b) / scale,
    )
}
