use num_complex::Complex64 as C64;

use crate::linalg::{choi_vector, unitarity_error, CMatrix, DenseChoi, DenseError, Mat2};
use crate::tensor::{Index, Tensor};

use super::network::{identity_weight, measurement_weight, Leaf, SiteNodeNetwork, SiteProgram};
use super::{labels, Lpdo, LpdoError, SiteWeight};

/// Largest qubit count for which a dense Choi matrix is built.
pub const DEFAULT_DENSE_CAP: usize = 6;
/// Largest qubit count for which a dense Choi vector is built.
pub const DEFAULT_VECTOR_CAP: usize = 10;

fn check_tuple(n: usize, t: &[usize]) -> Result<(), LpdoError> {
    if t.len() != n {
        return Err(LpdoError::TupleLength {
            expected: n,
            got: t.len(),
        });
    }
    match t.iter().find(|&&x| x > 1) {
        Some(&x) => Err(LpdoError::BasisOutOfRange(x)),
        None => Ok(()),
    }
}

/// `<σ τ|Λ|σ' τ'>` for computational-basis tuples.
pub fn choi_element(
    lpdo: &Lpdo,
    sigma: &[usize],
    tau: &[usize],
    sigma_p: &[usize],
    tau_p: &[usize],
) -> Result<C64, LpdoError> {
    let n = lpdo.n_qubits();
    for t in [sigma, tau, sigma_p, tau_p] {
        check_tuple(n, t)?;
    }
    let weights: Vec<SiteWeight> = (0..n)
        .map(|j| {
            let mut w = [[C64::new(0.0, 0.0); 4]; 4];
            w[tau[j] * 2 + sigma[j]][tau_p[j] * 2 + sigma_p[j]] = C64::new(1.0, 0.0);
            w
        })
        .collect();
    Ok(SiteNodeNetwork::new(lpdo)?.value(lpdo, &weights))
}

/// `Tr Λ`.
pub fn choi_trace(lpdo: &Lpdo) -> Result<f64, LpdoError> {
    let weights = vec![identity_weight(); lpdo.n_qubits()];
    Ok(SiteNodeNetwork::new(lpdo)?.value(lpdo, &weights).re)
}

pub fn materialize_choi(lpdo: &Lpdo) -> Result<DenseChoi, LpdoError> {
    materialize_choi_with_cap(lpdo, DEFAULT_DENSE_CAP)
}

pub fn materialize_choi_with_cap(lpdo: &Lpdo, cap: usize) -> Result<DenseChoi, LpdoError> {
    let n = lpdo.n_qubits();
    if n > cap {
        return Err(DenseError::CapExceeded { n, cap }.into());
    }
    let mut leaves = Vec::with_capacity(2 * n);
    for j in 0..n {
        leaves.push(Leaf::plain(lpdo, j, |_| None));
        leaves.push(Leaf::conj(lpdo, j, prime(&['t', 's', 'b'])));
    }
    let t = SiteProgram::new(leaves)?.contract(lpdo)?;
    let mut order: Vec<String> = Vec::with_capacity(4 * n);
    order.extend((0..n).map(labels::inp));
    order.extend((0..n).map(labels::out));
    order.extend((0..n).map(labels::inp_p));
    order.extend((0..n).map(labels::out_p));
    let dim = 1usize << (2 * n);
    Ok(DenseChoi::new(
        n,
        CMatrix::from_row_slice(dim, dim, permuted(&t, &order)?.data()),
    )?)
}

/// Label map priming every label whose first character is in `kinds`.
pub(crate) fn prime(kinds: &[char]) -> impl Fn(&str) -> Option<String> + '_ {
    move |name| {
        let first = name.chars().next()?;
        kinds.contains(&first).then(|| format!("{name}'"))
    }
}

pub(crate) fn permuted(t: &Tensor, order: &[String]) -> Result<Tensor, LpdoError> {
    let refs: Vec<&str> = order.iter().map(String::as_str).collect();
    Ok(t.permute(&refs)?)
}

/// Measurement probability `Tr[(ρ^T ⊗ M) Λ] d^N / Tr Λ` for product input
/// states and product effects.
pub fn probability(lpdo: &Lpdo, states: &[Mat2], effects: &[Mat2]) -> Result<f64, LpdoError> {
    let n = lpdo.n_qubits();
    for len in [states.len(), effects.len()] {
        if len != n {
            return Err(LpdoError::TupleLength {
                expected: n,
                got: len,
            });
        }
    }
    let net = SiteNodeNetwork::new(lpdo)?;
    let z = net.value(lpdo, &vec![identity_weight(); n]).re;
    if z <= 0.0 {
        return Err(LpdoError::NonPositiveTrace(z));
    }
    let weights: Vec<SiteWeight> = states
        .iter()
        .zip(effects)
        .map(|(r, m)| measurement_weight(r, m))
        .collect();
    let raw = net.value(lpdo, &weights).re;
    Ok(raw * (1u64 << n) as f64 / z)
}

/// Dense Choi matrix on `keep` after feeding each fixed qubit its state and
/// tracing its output.
pub fn reduce_to_subset(
    lpdo: &Lpdo,
    fixed: &[(usize, Mat2)],
    keep: &[usize],
) -> Result<DenseChoi, LpdoError> {
    let n = lpdo.n_qubits();
    let mut role = vec![None; n];
    for (q, rho) in fixed {
        let slot = role
            .get_mut(*q)
            .ok_or_else(|| partition(format!("qubit {q} out of range")))?;
        if slot.is_some() {
            return Err(partition(format!("qubit {q} listed twice")));
        }
        *slot = Some(Some(*rho));
    }
    for &q in keep {
        let slot = role
            .get_mut(q)
            .ok_or_else(|| partition(format!("qubit {q} out of range")))?;
        if slot.is_some() {
            return Err(partition(format!("qubit {q} listed twice")));
        }
        *slot = Some(None);
    }
    if let Some(q) = role.iter().position(Option::is_none) {
        return Err(partition(format!("qubit {q} is neither fixed nor kept")));
    }
    if keep.is_empty() {
        return Err(partition("no qubits kept".into()));
    }
    if keep.len() > DEFAULT_DENSE_CAP {
        return Err(DenseError::CapExceeded {
            n: keep.len(),
            cap: DEFAULT_DENSE_CAP,
        }
        .into());
    }

    let mut leaves = Vec::with_capacity(3 * n);
    for (j, r) in role.iter().enumerate() {
        leaves.push(Leaf::plain(lpdo, j, |_| None));
        match r.expect("checked above") {
            None => leaves.push(Leaf::conj(lpdo, j, prime(&['t', 's', 'b']))),
            Some(rho) => {
                leaves.push(Leaf::conj(lpdo, j, prime(&['s', 'b'])));
                let idx = vec![
                    Index::new(labels::inp(j), 2),
                    Index::new(labels::inp_p(j), 2),
                ];
                let data = vec![rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]];
                leaves.push(Leaf::Fixed(Tensor::new(idx, data)?));
            }
        }
    }
    let t = SiteProgram::new(leaves)?.contract(lpdo)?;
    let mut order: Vec<String> = Vec::with_capacity(4 * keep.len());
    order.extend(keep.iter().map(|&j| labels::inp(j)));
    order.extend(keep.iter().map(|&j| labels::out(j)));
    order.extend(keep.iter().map(|&j| labels::inp_p(j)));
    order.extend(keep.iter().map(|&j| labels::out_p(j)));
    let dim = 1usize << (2 * keep.len());
    Ok(DenseChoi::new(
        keep.len(),
        CMatrix::from_row_slice(dim, dim, permuted(&t, &order)?.data()),
    )?)
}

fn partition(msg: String) -> LpdoError {
    LpdoError::Partition(msg)
}

/// Process fidelity `<v|Λ|v> / (<v|v> Tr Λ)` with the pure Choi vector of `u`.
pub fn fidelity_to_unitary(lpdo: &Lpdo, u: &CMatrix) -> Result<f64, LpdoError> {
    let n = lpdo.n_qubits();
    if n > DEFAULT_VECTOR_CAP {
        return Err(DenseError::CapExceeded {
            n,
            cap: DEFAULT_VECTOR_CAP,
        }
        .into());
    }
    let h = 1usize << n;
    if u.nrows() != h || u.ncols() != h {
        return Err(DenseError::Dimension {
            rows: u.nrows(),
            cols: u.ncols(),
            expected: h,
        }
        .into());
    }
    let err = unitarity_error(u);
    if err > 1e-10 {
        return Err(DenseError::NotUnitary(err).into());
    }
    let v = choi_vector(u)?;
    let mut idx: Vec<Index> = (0..n).map(|j| Index::new(labels::inp(j), 2)).collect();
    idx.extend((0..n).map(|j| Index::new(labels::out(j), 2)));
    let vbar = Tensor::new(idx, v.iter().map(C64::conj).collect())?;

    let mut leaves = vec![Leaf::Fixed(vbar)];
    leaves.extend((0..n).map(|j| Leaf::plain(lpdo, j, |_| None)));
    let phi = SiteProgram::new(leaves)?.contract(lpdo)?;
    let z = choi_trace(lpdo)?;
    if z <= 0.0 {
        return Err(LpdoError::NonPositiveTrace(z));
    }
    Ok(phi.norm_sqr() / (h as f64 * z))
}
