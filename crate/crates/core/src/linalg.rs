//! Dense linear algebra for the oracle side: Choi matrices, Hermitian
//! spectra, square roots and Kronecker products.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64 as C64;
use thiserror::Error;

pub type Mat2 = Matrix2<C64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const D: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenseError {
    #[error("matrix is {rows}x{cols}, expected {expected}x{expected}")]
    Dimension {
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    Mismatch(usize, usize),

    #[error("dense size cap exceeded: {n} qubits > {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix has nonpositive trace {0}")]
    NonPositiveTrace(f64),

    #[error("dense Choi file: {0}")]
    Format(String),
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, col| {
        eig.eigenvectors[(r, order[col])]
    });
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// `V f(Λ) V†` for the Hermitian part of `m`.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let mut scaled = vectors.clone();
    for (j, v) in values.iter().enumerate() {
        let fv = f(*v);
        scaled.column_mut(j).scale_mut(fv);
    }
    scaled * vectors.adjoint()
}

pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |v| v.max(0.0).sqrt())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

const RANK_TOL: f64 = 1e-12;

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2` of the trace-normalized operands.
pub fn state_fidelity(a: &CMatrix, b: &CMatrix) -> Result<f64, DenseError> {
    if a.shape() != b.shape() {
        return Err(DenseError::Mismatch(a.nrows(), b.nrows()));
    }
    let ta = trace(a).re;
    let tb = trace(b).re;
    if ta <= 0.0 {
        return Err(DenseError::NonPositiveTrace(ta));
    }
    if tb <= 0.0 {
        return Err(DenseError::NonPositiveTrace(tb));
    }
    let (a, b) = (a.unscale(ta), b.unscale(tb));
    let (ea, va) = hermitian_eigen(&a);
    let (eb, vb) = hermitian_eigen(&b);
    let rank = |e: &[f64]| e.iter().filter(|&&v| v > RANK_TOL).count();
    let (root_of, other) = if rank(&ea) <= rank(&eb) {
        ((ea, va), b)
    } else {
        ((eb, vb), a)
    };
    let (values, vectors) = root_of;
    let roots = DVector::from_iterator(
        values.len(),
        values
            .iter()
            .map(|&v| C64::new(if v > RANK_TOL { v.sqrt() } else { 0.0 }, 0.0)),
    );
    let sa = &vectors * CMatrix::from_diagonal(&roots) * vectors.adjoint();
    let inner = &sa * other * &sa;
    let (values, _) = hermitian_eigen(&inner);
    let root: f64 = values
        .iter()
        .filter(|&&v| v > RANK_TOL)
        .map(|v| v.sqrt())
        .sum();
    Ok(root * root)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |r, col| {
        a[(r / br, col / bc)] * b[(r % br, col % bc)]
    })
}

pub fn mat2_to_dense(m: &Mat2) -> CMatrix {
    CMatrix::from_fn(2, 2, |r, col| m[(r, col)])
}

/// Maximum entrywise deviation of `u† u` from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let id = CMatrix::identity(u.nrows(), u.ncols());
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Unnormalized Choi matrix `Σ_ij |i><j| ⊗ E(|i><j|)` on `n` qubits, with the
/// input (σ) register as the more significant half of the row index and qubit
/// 0 as the most significant bit within each register.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseChoi {
    n_qubits: usize,
    matrix: CMatrix,
}

impl DenseChoi {
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self, DenseError> {
        let expected = 1usize << (2 * n_qubits);
        if matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(DenseError::Dimension {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected,
            });
        }
        Ok(Self { n_qubits, matrix })
    }

    /// `|v><v|` for the pure Choi vector `v = Σ_i |i> ⊗ U|i>`.
    pub fn from_unitary(u: &CMatrix) -> Result<Self, DenseError> {
        let v = choi_vector(u)?;
        let n = u.nrows().trailing_zeros() as usize;
        Self::new(n, &v * v.adjoint())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    /// `Tr_τ Λ`, a `2^N x 2^N` operator on the input register.
    pub fn trace_output(&self) -> CMatrix {
        let h = 1usize << self.n_qubits;
        CMatrix::from_fn(h, h, |s, sp| {
            (0..h).map(|t| self.matrix[(s * h + t, sp * h + t)]).sum()
        })
    }

    /// Output state `Tr_σ[(ρ^T ⊗ I) Λ]` for an input density matrix `ρ`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let h = 1usize << self.n_qubits;
        let mut out = CMatrix::zeros(h, h);
        for s in 0..h {
            for sp in 0..h {
                let w = rho[(s, sp)];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                for t in 0..h {
                    for tp in 0..h {
                        out[(t, tp)] += w * self.matrix[(s * h + t, sp * h + tp)];
                    }
                }
            }
        }
        out
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Maximum entrywise deviation of `Tr_τ Λ` from the identity.
    pub fn tp_error(&self) -> f64 {
        let t = self.trace_output();
        max_abs_diff(&t, &CMatrix::identity(t.nrows(), t.ncols()))
    }

    /// `{"format": "dense-choi/1", "n_qubits": n, "matrix": [[[re, im], ...], ...]}`
    /// with rows in storage order.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<[f64; 2]>> = self
            .matrix
            .row_iter()
            .map(|r| r.iter().map(|x| [x.re, x.im]).collect())
            .collect();
        serde_json::to_string(&DenseChoiFile {
            format: DENSE_CHOI_FORMAT.into(),
            n_qubits: self.n_qubits,
            matrix: rows,
        })
        .expect("matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DenseError> {
        let file: DenseChoiFile =
            serde_json::from_str(text).map_err(|e| DenseError::Format(e.to_string()))?;
        if file.format != DENSE_CHOI_FORMAT {
            return Err(DenseError::Format(format!(
                "unsupported format `{}`",
                file.format
            )));
        }
        let dim = 1usize << (2 * file.n_qubits);
        if file.matrix.len() != dim || file.matrix.iter().any(|r| r.len() != dim) {
            return Err(DenseError::Format(format!("expected a {dim}x{dim} matrix")));
        }
        let m = CMatrix::from_fn(dim, dim, |r, c| {
            C64::new(file.matrix[r][c][0], file.matrix[r][c][1])
        });
        Self::new(file.n_qubits, m)
    }
}

pub const DENSE_CHOI_FORMAT: &str = "dense-choi/1";

#[derive(serde::Serialize, serde::Deserialize)]
struct DenseChoiFile {
    format: String,
    n_qubits: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

/// Pure Choi vector `Σ_i |i> ⊗ U|i>`, entry `(σ, τ)` equal to `U[τ, σ]`.
pub fn choi_vector(u: &CMatrix) -> Result<CVector, DenseError> {
    let h = u.nrows();
    if u.ncols() != h || !h.is_power_of_two() {
        return Err(DenseError::Dimension {
            rows: u.nrows(),
            cols: u.ncols(),
            expected: h,
        });
    }
    Ok(CVector::from_fn(h * h, |r, _| u[(r % h, r / h)]))
}

/// Trace-normalized process fidelity between two Choi matrices.
pub fn dense_process_fidelity(a: &DenseChoi, b: &DenseChoi) -> Result<f64, DenseError> {
    if a.dim() != b.dim() {
        return Err(DenseError::Mismatch(a.dim(), b.dim()));
    }
    state_fidelity(&a.matrix, &b.matrix)
}
