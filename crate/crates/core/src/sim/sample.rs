use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ShotRecord, SpamOverride};
use crate::linalg::{kron, mat2_to_dense, CMatrix, DenseChoi, Mat2};
use crate::lpdo::LocalOp;
use crate::registry::{depolarize_state, QubitPovm, QubitStateSet, Registry};

use super::{apply_one, apply_two, choi_from_spec, ChannelSpec, SimError, NOISY_CAP, UNITARY_CAP};

/// What the shots are drawn from.
#[derive(Clone, Copy, Debug)]
pub enum ShotSource<'a> {
    Spec(&'a ChannelSpec),
    Choi(&'a DenseChoi),
}

/// State-preparation and readout errors applied while sampling. Records
/// still carry the ideal indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpamNoise {
    /// Every prepared state becomes `(1 - p) ρ + p I / 2`.
    pub state_depolarizing: f64,
    /// Outcomes `2k` and `2k + 1` (the two signs of one basis) swap with
    /// this probability.
    pub readout_flip: f64,
}

impl SpamNoise {
    pub fn validate(&self) -> Result<(), SimError> {
        for r in [self.state_depolarizing, self.readout_flip] {
            if !(0.0..=1.0).contains(&r) {
                return Err(SimError::Rate(r));
            }
        }
        Ok(())
    }

    pub fn is_trivial(&self) -> bool {
        self.state_depolarizing == 0.0 && self.readout_flip == 0.0
    }

    /// The registry the device actually realizes when `ideal` is requested.
    pub fn actual_registry(&self, ideal: &Registry) -> Registry {
        let mut reg = ideal.clone();
        for q in 0..ideal.n_qubits() {
            let states = QubitStateSet(
                ideal
                    .states(q)
                    .0
                    .iter()
                    .map(|s| depolarize_state(s, self.state_depolarizing))
                    .collect(),
            );
            let eff = &ideal.povm(q).0;
            let f = C64::new(self.readout_flip, 0.0);
            let keep = C64::new(1.0 - self.readout_flip, 0.0);
            let povm = QubitPovm(
                (0..eff.len())
                    .map(|b| {
                        let partner = b ^ 1;
                        if partner < eff.len() {
                            eff[b] * keep + eff[partner] * f
                        } else {
                            eff[b]
                        }
                    })
                    .collect(),
            );
            reg.set_qubit(q, states, povm);
        }
        reg
    }

    /// Override that tells the reconstruction about this noise on a Pauli-6 device.
    pub fn matching_override(&self, n_qubits: usize) -> SpamOverride {
        let actual = self.actual_registry(&Registry::pauli6(n_qubits));
        let mut ov = SpamOverride::identity(n_qubits);
        for q in 0..n_qubits {
            ov.set(q, actual.states(q).clone(), actual.povm(q).clone());
        }
        ov
    }
}

/// Pure components `(weight, vector)` of a 2x2 PSD operator.
type Branches = Vec<(f64, [C64; 2])>;

fn branches(m: &Mat2) -> Branches {
    let eig = SymmetricEigen::new((m + m.adjoint()) * C64::new(0.5, 0.0));
    (0..2)
        .filter(|&k| eig.eigenvalues[k] > 1e-15)
        .map(|k| {
            (
                eig.eigenvalues[k],
                [eig.eigenvectors[(0, k)], eig.eigenvectors[(1, k)]],
            )
        })
        .collect()
}

fn pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

/// Draws `m` shots: uniform input indices per qubit, then one outcome tuple
/// from the exact joint distribution of the product POVM. Shot `i` uses its
/// own RNG stream, so the result does not depend on the worker count.
pub fn sample_shots(
    source: ShotSource<'_>,
    registry: &Registry,
    m: usize,
    seed: u64,
    spam: Option<&SpamNoise>,
) -> Result<Dataset, SimError> {
    let n = match source {
        ShotSource::Spec(s) => s.n_qubits(),
        ShotSource::Choi(c) => c.n_qubits(),
    };
    if registry.n_qubits() != n {
        return Err(SimError::Spec(format!(
            "registry covers {} qubits, channel has {n}",
            registry.n_qubits()
        )));
    }
    if let Some(s) = spam {
        s.validate()?;
    }
    let actual = spam.map_or_else(|| registry.clone(), |s| s.actual_registry(registry));
    let rng_for = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        rng
    };
    let draw_inputs = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        (0..n)
            .map(|q| rng.random_range(0..registry.states(q).len()))
            .collect()
    };

    let records: Vec<ShotRecord> = match source {
        ShotSource::Spec(spec) if spec.is_noiseless() => {
            if n > UNITARY_CAP {
                return Err(SimError::Cap {
                    what: "state-vector sampling",
                    n,
                    cap: UNITARY_CAP,
                });
            }
            let ops = spec.local_ops();
            let state_br: Vec<Vec<Branches>> = (0..n)
                .map(|q| actual.states(q).0.iter().map(branches).collect())
                .collect();
            let effect_br: Vec<Vec<Branches>> = (0..n)
                .map(|q| actual.povm(q).0.iter().map(branches).collect())
                .collect();
            (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_for(i);
                    let inputs = draw_inputs(&mut rng);
                    let mut psi = vec![C64::new(1.0, 0.0)];
                    for (q, &a) in inputs.iter().enumerate() {
                        let br = &state_br[q][a];
                        let (_, v) = br[pick(&mut rng, br.iter().map(|b| b.0))];
                        psi = psi.iter().flat_map(|x| [x * v[0], x * v[1]]).collect();
                    }
                    apply_ops(&mut psi, n, &ops);
                    let outcomes = measure_pure(&mut rng, psi, &effect_br);
                    ShotRecord::new(inputs, outcomes)
                })
                .collect()
        }
        _ => {
            if n > NOISY_CAP {
                return Err(SimError::Cap {
                    what: "density-matrix sampling",
                    n,
                    cap: NOISY_CAP,
                });
            }
            let owned;
            let choi = match source {
                ShotSource::Choi(c) => c,
                ShotSource::Spec(s) => {
                    owned = choi_from_spec(s)?;
                    &owned
                }
            };
            let inputs: Vec<(Vec<usize>, ChaCha8Rng)> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_for(i);
                    (draw_inputs(&mut rng), rng)
                })
                .collect();
            let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
            for (i, (a, _)) in inputs.iter().enumerate() {
                groups.entry(a.as_slice()).or_default().push(i);
            }
            let groups: Vec<(&[usize], Vec<usize>)> = groups.into_iter().collect();
            let outputs: Vec<(usize, Vec<usize>)> = groups
                .par_iter()
                .flat_map_iter(|(alpha, shots)| {
                    let rho = alpha
                        .iter()
                        .enumerate()
                        .map(|(q, &a)| mat2_to_dense(actual.state(q, a)))
                        .reduce(|x, y| kron(&x, &y))
                        .expect("at least one qubit");
                    let out = choi.apply(&rho);
                    shots
                        .iter()
                        .map(|&i| {
                            let mut rng = inputs[i].1.clone();
                            (i, measure_mixed(&mut rng, out.clone(), &actual))
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            let mut outcomes = vec![Vec::new(); m];
            for (i, o) in outputs {
                outcomes[i] = o;
            }
            inputs
                .into_iter()
                .zip(outcomes)
                .map(|((a, _), b)| ShotRecord::new(a, b))
                .collect()
        }
    };
    Ok(Dataset::new(registry.clone(), records)?)
}

pub(crate) fn apply_ops(psi: &mut [C64], n: usize, ops: &[LocalOp]) {
    for op in ops {
        match op {
            LocalOp::One { qubit, matrix } => apply_one(psi, n, *qubit, matrix),
            LocalOp::Two { a, b, matrix } => apply_two(psi, n, *a, *b, matrix),
        }
    }
}

/// Chain-rule sampling of a product POVM on a pure state, qubit 0 first.
/// Each effect is split into its eigen-branches so the conditional state
/// stays pure.
fn measure_pure(rng: &mut ChaCha8Rng, mut psi: Vec<C64>, effects: &[Vec<Branches>]) -> Vec<usize> {
    let mut out = Vec::with_capacity(effects.len());
    for per_qubit in effects {
        let half = psi.len() / 2;
        let (top, bottom) = psi.split_at(half);
        let mut cands: Vec<(usize, f64, Vec<C64>)> = Vec::new();
        for (b, br) in per_qubit.iter().enumerate() {
            for (w, e) in br {
                let phi: Vec<C64> = top
                    .iter()
                    .zip(bottom)
                    .map(|(x, y)| e[0].conj() * x + e[1].conj() * y)
                    .collect();
                let p = w * phi.iter().map(C64::norm_sqr).sum::<f64>();
                cands.push((b, p, phi));
            }
        }
        let k = pick(rng, cands.iter().map(|c| c.1));
        let (b, _, phi) = cands.swap_remove(k);
        out.push(b);
        psi = phi;
    }
    out
}

/// Chain-rule sampling on a density matrix, qubit 0 first.
fn measure_mixed(rng: &mut ChaCha8Rng, mut rho: CMatrix, reg: &Registry) -> Vec<usize> {
    let n = reg.n_qubits();
    let mut out = Vec::with_capacity(n);
    for q in 0..n {
        let half = rho.nrows() / 2;
        let block = |a: usize, b: usize| rho.view((a * half, b * half), (half, half));
        let tr = |a: usize, b: usize| -> C64 { block(a, b).trace() };
        let reduced = Mat2::new(tr(0, 0), tr(0, 1), tr(1, 0), tr(1, 1));
        let effects = &reg.povm(q).0;
        let probs: Vec<f64> = effects
            .iter()
            .map(|m| (m * reduced).trace().re.max(0.0))
            .collect();
        let b = pick(rng, probs.iter().copied());
        out.push(b);
        let m = effects[b];
        let mut next = CMatrix::zeros(half, half);
        for a in 0..2 {
            for c in 0..2 {
                let w = m[(c, a)];
                if w.norm_sqr() > 0.0 {
                    next += block(a, c) * w;
                }
            }
        }
        rho = next;
    }
    out
}
