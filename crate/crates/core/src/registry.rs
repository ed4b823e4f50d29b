//! Per-qubit input-state sets and POVMs.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::Mat2;

/// Strict tolerance for builtin and synthetic registries.
pub const STRICT_TOL: f64 = 1e-8;
/// Relaxed tolerance for effects estimated from device characterization.
pub const RELAXED_TOL: f64 = 1e-6;

pub const PAULI6_LABELS: [&str; 6] = ["Z+", "Z-", "X+", "X-", "Y+", "Y-"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("state {index} is not Hermitian")]
    NonHermitianState { index: usize },

    #[error("state {index} has trace {trace}, expected 1")]
    StateTrace { index: usize, trace: f64 },

    #[error("{kind} {index} has negative eigenvalue {value}")]
    NotPsd {
        kind: &'static str,
        index: usize,
        value: f64,
    },

    #[error("effect {index} is not Hermitian")]
    NonHermitianEffect { index: usize },

    #[error("effects sum deviates from identity by {0:.3e}")]
    Completeness(f64),

    #[error("empty {0} set")]
    Empty(&'static str),

    #[error("qubit {qubit}: {source}")]
    Qubit {
        qubit: usize,
        #[source]
        source: Box<RegistryError>,
    },

    #[error("registry covers {got} qubits, expected {expected}")]
    QubitCount { expected: usize, got: usize },
}

fn hermitian_error(m: &Mat2) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of the Hermitian part of a 2x2 matrix.
pub fn min_eig2(m: &Mat2) -> f64 {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    mean - (half * half + b.norm_sqr()).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct QubitStateSet(pub Vec<Mat2>);

#[derive(Clone, Debug, PartialEq)]
pub struct QubitPovm(pub Vec<Mat2>);

impl QubitStateSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, tol: f64) -> Result<(), RegistryError> {
        if self.0.is_empty() {
            return Err(RegistryError::Empty("state"));
        }
        for (index, rho) in self.0.iter().enumerate() {
            if hermitian_error(rho) > tol {
                return Err(RegistryError::NonHermitianState { index });
            }
            let trace = (rho[(0, 0)] + rho[(1, 1)]).re;
            if (trace - 1.0).abs() > tol {
                return Err(RegistryError::StateTrace { index, trace });
            }
            let value = min_eig2(rho);
            if value < -tol {
                return Err(RegistryError::NotPsd {
                    kind: "state",
                    index,
                    value,
                });
            }
        }
        Ok(())
    }
}

impl QubitPovm {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, tol: f64) -> Result<(), RegistryError> {
        if self.0.is_empty() {
            return Err(RegistryError::Empty("effect"));
        }
        for (index, m) in self.0.iter().enumerate() {
            if hermitian_error(m) > tol {
                return Err(RegistryError::NonHermitianEffect { index });
            }
            let value = min_eig2(m);
            if value < -tol {
                return Err(RegistryError::NotPsd {
                    kind: "effect",
                    index,
                    value,
                });
            }
        }
        let sum: Mat2 = self.0.iter().sum();
        let dev = (sum - Mat2::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > tol {
            return Err(RegistryError::Completeness(dev));
        }
        Ok(())
    }
}

/// The state set and POVM of every qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct Registry {
    states: Vec<QubitStateSet>,
    povms: Vec<QubitPovm>,
}

impl Registry {
    pub fn new(states: Vec<QubitStateSet>, povms: Vec<QubitPovm>) -> Result<Self, RegistryError> {
        if states.len() != povms.len() {
            return Err(RegistryError::QubitCount {
                expected: states.len(),
                got: povms.len(),
            });
        }
        Ok(Self { states, povms })
    }

    pub fn uniform(n_qubits: usize, states: &QubitStateSet, povm: &QubitPovm) -> Self {
        Self {
            states: vec![states.clone(); n_qubits],
            povms: vec![povm.clone(); n_qubits],
        }
    }

    pub fn pauli6(n_qubits: usize) -> Self {
        let (states, povm) = builtin_pauli6();
        Self::uniform(n_qubits, &states, &povm)
    }

    pub fn n_qubits(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self, qubit: usize) -> &QubitStateSet {
        &self.states[qubit]
    }

    pub fn povm(&self, qubit: usize) -> &QubitPovm {
        &self.povms[qubit]
    }

    pub fn state(&self, qubit: usize, index: usize) -> &Mat2 {
        &self.states[qubit].0[index]
    }

    pub fn effect(&self, qubit: usize, index: usize) -> &Mat2 {
        &self.povms[qubit].0[index]
    }

    pub fn set_qubit(&mut self, qubit: usize, states: QubitStateSet, povm: QubitPovm) {
        self.states[qubit] = states;
        self.povms[qubit] = povm;
    }

    pub fn validate(&self, state_tol: f64, effect_tol: f64) -> Result<(), RegistryError> {
        for q in 0..self.n_qubits() {
            let wrap = |e| RegistryError::Qubit {
                qubit: q,
                source: Box::new(e),
            };
            self.states[q].validate(state_tol).map_err(wrap)?;
            self.povms[q].validate(effect_tol).map_err(wrap)?;
        }
        Ok(())
    }
}

fn projector(a: C64, b: C64) -> Mat2 {
    Mat2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj())
}

/// Pure Pauli eigenstate by label (`Z+`, `Z-`, `X+`, `X-`, `Y+`, `Y-`).
pub fn pauli_state(label: &str) -> Option<Mat2> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    Some(match label {
        "Z+" => projector(one, zero),
        "Z-" => projector(zero, one),
        "X+" => projector(C64::new(h, 0.0), C64::new(h, 0.0)),
        "X-" => projector(C64::new(h, 0.0), C64::new(-h, 0.0)),
        "Y+" => projector(C64::new(h, 0.0), C64::new(0.0, h)),
        "Y-" => projector(C64::new(h, 0.0), C64::new(0.0, -h)),
        _ => return None,
    })
}

/// The six Pauli eigenstates and the same set scaled by 1/3 as a POVM, in
/// [`PAULI6_LABELS`] order. Outcome `i` belongs to basis `i / 2` (Z, X, Y)
/// with sign bit `i % 2`.
pub fn builtin_pauli6() -> (QubitStateSet, QubitPovm) {
    let states: Vec<Mat2> = PAULI6_LABELS
        .iter()
        .map(|l| pauli_state(l).unwrap())
        .collect();
    let effects = states.iter().map(|s| s / C64::new(3.0, 0.0)).collect();
    (QubitStateSet(states), QubitPovm(effects))
}

/// Depolarized copy `(1 - p) ρ + p I / 2`.
pub fn depolarize_state(rho: &Mat2, p: f64) -> Mat2 {
    rho * C64::new(1.0 - p, 0.0) + Mat2::identity() * C64::new(p / 2.0, 0.0)
}
