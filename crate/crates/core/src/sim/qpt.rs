//! Traditional process tomography by linear inversion.
//!
//! Every qubit is prepared in one of `{Z+, Z-, X+, Y+}` and measured in one
//! of the Z, X, Y bases. With Pauli-6 outcome indices, outcome `β` belongs
//! to basis `β / 2` and has sign bit `β % 2`.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, ShotRecord};
use crate::linalg::{hermitian_eigen, kron, mat2_to_dense, trace, CMatrix, DenseChoi};
use crate::registry::{pauli_state, Registry, PAULI6_LABELS};

use super::SimError;

/// Pauli-6 indices of the QPT input states `Z+, Z-, X+, Y+`.
pub const QPT_INPUTS: [usize; 4] = [0, 1, 2, 4];
const QPT_MAX_QUBITS: usize = 3;

/// Outcome probabilities for every setting, indexed by
/// `((input tuple) * 3^n + basis tuple) * 2^n + outcome bits`, each tuple
/// read with qubit 0 as the most significant digit.
#[derive(Clone, Debug, PartialEq)]
pub struct QptTable {
    n_qubits: usize,
    probs: Vec<f64>,
}

fn digits(mut x: usize, base: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for slot in d.iter_mut().rev() {
        *slot = x % base;
        x /= base;
    }
    d
}

fn settings(n: usize) -> usize {
    4usize.pow(n as u32) * 3usize.pow(n as u32)
}

fn check_n(n: usize) -> Result<(), SimError> {
    if n == 0 || n > QPT_MAX_QUBITS {
        return Err(SimError::Cap {
            what: "linear-inversion QPT",
            n,
            cap: QPT_MAX_QUBITS,
        });
    }
    Ok(())
}

fn pauli(i: usize) -> CMatrix {
    mat2_to_dense(&pauli_state(PAULI6_LABELS[i]).expect("builtin label"))
}

fn product(n: usize, f: impl Fn(usize) -> CMatrix) -> CMatrix {
    (0..n).map(f).reduce(|a, b| kron(&a, &b)).expect("n >= 1")
}

impl QptTable {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Outcome distribution of setting `s` (input tuple and basis tuple).
    pub fn setting(&self, s: usize) -> &[f64] {
        let k = 1 << self.n_qubits;
        &self.probs[s * k..(s + 1) * k]
    }

    /// Exact probabilities of a channel with ideal preparations and projectors.
    pub fn exact(choi: &DenseChoi) -> Result<Self, SimError> {
        let n = choi.n_qubits();
        check_n(n)?;
        let k = 1usize << n;
        let nb = 3usize.pow(n as u32);
        let probs = (0..settings(n))
            .into_par_iter()
            .flat_map_iter(|s| {
                let inputs = digits(s / nb, 4, n);
                let bases = digits(s % nb, 3, n);
                let rho = product(n, |q| pauli(QPT_INPUTS[inputs[q]]));
                let out = choi.apply(&rho);
                (0..k)
                    .map(|o| {
                        let bits = digits(o, 2, n);
                        let proj = product(n, |q| pauli(2 * bases[q] + bits[q]));
                        trace(&(&out * proj)).re
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self { n_qubits: n, probs })
    }

    /// Empirical frequencies from QPT-style records; records with inputs
    /// outside the QPT set are ignored.
    pub fn from_dataset(ds: &Dataset) -> Result<Self, SimError> {
        let n = ds.n_qubits();
        check_n(n)?;
        let input_pos: HashMap<usize, usize> = QPT_INPUTS
            .iter()
            .enumerate()
            .map(|(i, &a)| (a, i))
            .collect();
        let k = 1usize << n;
        let nb = 3usize.pow(n as u32);
        let mut counts = vec![0u64; settings(n) * k];
        for r in ds.records() {
            let Some(inp) = r
                .inputs
                .iter()
                .map(|a| input_pos.get(a).copied())
                .collect::<Option<Vec<_>>>()
            else {
                continue;
            };
            let i = inp.iter().fold(0, |acc, &x| acc * 4 + x);
            let b = r.outcomes.iter().fold(0, |acc, &x| acc * 3 + x / 2);
            let o = r.outcomes.iter().fold(0, |acc, &x| acc * 2 + x % 2);
            counts[(i * nb + b) * k + o] += 1;
        }
        let mut probs = vec![0.0; counts.len()];
        for s in 0..settings(n) {
            let block = &counts[s * k..(s + 1) * k];
            let total: u64 = block.iter().sum();
            if total == 0 {
                let inputs: Vec<&str> = digits(s / nb, 4, n)
                    .iter()
                    .map(|&i| PAULI6_LABELS[QPT_INPUTS[i]])
                    .collect();
                let bases: Vec<&str> = digits(s % nb, 3, n)
                    .iter()
                    .map(|&b| ["Z", "X", "Y"][b])
                    .collect();
                return Err(SimError::MissingSetting(format!(
                    "inputs {inputs:?}, bases {bases:?}"
                )));
            }
            for (p, c) in probs[s * k..(s + 1) * k].iter_mut().zip(block) {
                *p = *c as f64 / total as f64;
            }
        }
        Ok(Self { n_qubits: n, probs })
    }
}

/// `shots` single-shot records per setting, drawn from the channel's exact
/// QPT distribution and written with Pauli-6 indices.
pub fn sample_qpt_dataset(choi: &DenseChoi, shots: usize, seed: u64) -> Result<Dataset, SimError> {
    let exact = QptTable::exact(choi)?;
    let n = choi.n_qubits();
    let nb = 3usize.pow(n as u32);
    let records: Vec<ShotRecord> = (0..settings(n))
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let dist = exact.setting(s).to_vec();
            let inputs: Vec<usize> = digits(s / nb, 4, n)
                .iter()
                .map(|&i| QPT_INPUTS[i])
                .collect();
            let bases = digits(s % nb, 3, n);
            (0..shots)
                .map(|_| {
                    let mut u = rng.random::<f64>() * dist.iter().sum::<f64>();
                    let mut o = dist.len() - 1;
                    for (i, p) in dist.iter().enumerate() {
                        if u < *p {
                            o = i;
                            break;
                        }
                        u -= p;
                    }
                    let bits = digits(o, 2, n);
                    let outcomes = (0..n).map(|q| 2 * bases[q] + bits[q]).collect();
                    ShotRecord::new(inputs.clone(), outcomes)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(Dataset::new(Registry::pauli6(n), records)?)
}

/// Single-qubit measurement map: row `(input * 3 + basis) * 2 + bit`,
/// column `(σ τ)(σ' τ')` of the 4x4 Choi matrix, entry `ρ[σ, σ'] Π[τ', τ]`.
fn single_qubit_map() -> CMatrix {
    CMatrix::from_fn(24, 16, |r, c| {
        let (i, b, o) = (r / 6, (r / 2) % 3, r % 2);
        let rho = pauli(QPT_INPUTS[i]);
        let proj = pauli(2 * b + o);
        let (row, col) = (c / 4, c % 4);
        let (s, t, sp, tp) = (row / 2, row % 2, col / 2, col % 2);
        rho[(s, sp)] * proj[(tp, t)]
    })
}

/// Multiplies axis `axis` of a row-major tensor with extents `dims` by `m`.
fn mode_apply(data: &[C64], dims: &[usize], axis: usize, m: &CMatrix) -> (Vec<C64>, Vec<usize>) {
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let (rows, cols) = m.shape();
    let mut out = vec![C64::new(0.0, 0.0); outer * rows * inner];
    for a in 0..outer {
        for r in 0..rows {
            for c in 0..cols {
                let w = m[(r, c)];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                let src = &data[(a * cols + c) * inner..(a * cols + c + 1) * inner];
                let dst = &mut out[(a * rows + r) * inner..(a * rows + r + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    let mut new_dims = dims.to_vec();
    new_dims[axis] = rows;
    (out, new_dims)
}

/// Nearest PSD matrix with the same trace: the most negative eigenvalues are
/// zeroed and their mass is shared evenly among the rest.
fn clip_fixed_trace(m: &CMatrix, target: f64) -> Result<CMatrix, SimError> {
    let tr = trace(m).re;
    if tr <= 0.0 {
        return Err(crate::linalg::DenseError::NonPositiveTrace(tr).into());
    }
    let (mut w, v) = hermitian_eigen(&m.scale(target / tr));
    let mut deficit = 0.0;
    let mut first = 0;
    while first < w.len() {
        let keep = (w.len() - first) as f64;
        if w[first] + deficit / keep >= 0.0 {
            break;
        }
        deficit += w[first];
        w[first] = 0.0;
        first += 1;
    }
    let keep = (w.len() - first) as f64;
    for x in &mut w[first..] {
        *x += deficit / keep;
    }
    let mut scaled = v.clone();
    for (j, x) in w.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*x);
    }
    Ok(scaled * v.adjoint())
}

/// Least-squares inversion of the QPT table, then projection onto the PSD
/// cone with `Tr Λ = 2^n`.
pub fn full_qpt_linear_inversion(table: &QptTable) -> Result<DenseChoi, SimError> {
    let n = table.n_qubits();
    check_n(n)?;
    let pinv = single_qubit_map()
        .pseudo_inverse(1e-12)
        .map_err(|e| SimError::Spec(e.to_string()))?;

    // Reorder the table so each qubit owns one axis of extent 24.
    let k = 1usize << n;
    let nb = 3usize.pow(n as u32);
    let mut p = vec![C64::new(0.0, 0.0); 24usize.pow(n as u32)];
    for (idx, &v) in table.probs().iter().enumerate() {
        let (s, o) = (idx / k, idx % k);
        let inputs = digits(s / nb, 4, n);
        let bases = digits(s % nb, 3, n);
        let bits = digits(o, 2, n);
        let flat = (0..n).fold(0, |acc, q| {
            acc * 24 + (inputs[q] * 3 + bases[q]) * 2 + bits[q]
        });
        p[flat] = C64::new(v, 0.0);
    }
    let mut dims = vec![24; n];
    for q in 0..n {
        let (next, d) = mode_apply(&p, &dims, q, &pinv);
        p = next;
        dims = d;
    }

    let h = 1usize << n;
    let mut choi = CMatrix::zeros(h * h, h * h);
    for (flat, v) in p.iter().enumerate() {
        let c = digits(flat, 16, n);
        let (mut s, mut t, mut sp, mut tp) = (0, 0, 0, 0);
        for cq in c {
            let (row, col) = (cq / 4, cq % 4);
            s = s * 2 + row / 2;
            t = t * 2 + row % 2;
            sp = sp * 2 + col / 2;
            tp = tp * 2 + col % 2;
        }
        choi[(s * h + t, sp * h + tp)] = *v;
    }
    Ok(DenseChoi::new(n, clip_fixed_trace(&choi, h as f64)?)?)
}
