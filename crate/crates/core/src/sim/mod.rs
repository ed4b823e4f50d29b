//! Reference channels and samplers: the stand-in for a quantum device.

mod gates;
mod qpt;
mod sample;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::linalg::{CMatrix, DenseChoi, DenseError, Mat2};
use crate::lpdo::{lpdo_from_ops, LocalOp, Lpdo, LpdoError};
use crate::topology::Topology;

pub use gates::{apply_one, apply_two, cnot, cz, named_gate, OneQubitGate};
pub use qpt::{full_qpt_linear_inversion, sample_qpt_dataset, QptTable, QPT_INPUTS};
pub use sample::{sample_shots, ShotSource, SpamNoise};

/// Largest qubit count for dense unitaries and pure Choi vectors.
pub const UNITARY_CAP: usize = 10;
/// Largest qubit count for dense Choi matrices.
pub const NOISY_CAP: usize = 6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid channel spec: {0}")]
    Spec(String),

    #[error("{what} needs at most {cap} qubits, got {n}")]
    Cap {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("operation requires a noiseless channel")]
    Noisy,

    #[error("invalid rate {0}: must lie in [0, 1]")]
    Rate(f64),

    #[error("missing QPT setting: {0}")]
    MissingSetting(String),

    #[error(transparent)]
    Dense(#[from] DenseError),

    #[error(transparent)]
    Lpdo(#[from] LpdoError),

    #[error(transparent)]
    Data(#[from] DataError),
}

/// One circuit element. Two-qubit matrices act on `|a b>` / `|control target>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    One { name: OneQubitGate, qubit: usize },
    Haar { qubit: usize, seed: u64 },
    Cz { a: usize, b: usize },
    Cnot { control: usize, target: usize },
}

/// Noise applied to every qubit after the circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    #[default]
    None,
    Depolarizing {
        p: f64,
    },
    AmplitudeDamping {
        gamma: f64,
    },
}

impl Noise {
    /// Single-qubit Kraus operators; `None` for the noiseless case.
    pub fn kraus(&self) -> Option<Vec<Mat2>> {
        let c = |x: f64| C64::new(x, 0.0);
        let z = c(0.0);
        match *self {
            Noise::None => None,
            Noise::Depolarizing { p } => {
                let paulis = [
                    Mat2::identity(),
                    Mat2::new(z, c(1.0), c(1.0), z),
                    Mat2::new(z, C64::new(0.0, -1.0), C64::new(0.0, 1.0), z),
                    Mat2::new(c(1.0), z, z, c(-1.0)),
                ];
                let w = [
                    (1.0 - 0.75 * p).sqrt(),
                    (p / 4.0).sqrt(),
                    (p / 4.0).sqrt(),
                    (p / 4.0).sqrt(),
                ];
                Some(paulis.iter().zip(w).map(|(m, w)| m * c(w)).collect())
            }
            Noise::AmplitudeDamping { gamma } => Some(vec![
                Mat2::new(c(1.0), z, z, c((1.0 - gamma).sqrt())),
                Mat2::new(z, c(gamma.sqrt()), z, z),
            ]),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        match *self {
            Noise::None => Ok(()),
            Noise::Depolarizing { p: r } | Noise::AmplitudeDamping { gamma: r } => {
                if (0.0..=1.0).contains(&r) {
                    Ok(())
                } else {
                    Err(SimError::Rate(r))
                }
            }
        }
    }
}

/// A circuit on a topology, optionally followed by per-qubit noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub topology: Topology,
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub noise: Noise,
}

impl ChannelSpec {
    pub fn new(topology: Topology, gates: Vec<Gate>, noise: Noise) -> Result<Self, SimError> {
        let spec = Self {
            topology,
            gates,
            noise,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity(topology: Topology) -> Self {
        Self {
            topology,
            gates: Vec::new(),
            noise: Noise::None,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.topology.n_qubits()
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise == Noise::None
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.n_qubits();
        let qubit = |q: usize| {
            if q < n {
                Ok(())
            } else {
                Err(SimError::Spec(format!("gate on qubit {q} of {n}")))
            }
        };
        for g in &self.gates {
            match *g {
                Gate::One { qubit: q, .. } | Gate::Haar { qubit: q, .. } => qubit(q)?,
                Gate::Cz { a, b }
                | Gate::Cnot {
                    control: a,
                    target: b,
                } => {
                    qubit(a)?;
                    qubit(b)?;
                    if !self.topology.has_edge(a, b) {
                        return Err(SimError::Spec(format!("({a}, {b}) is not a topology edge")));
                    }
                }
            }
        }
        self.noise.validate()
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| SimError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// The circuit as local operators, in application order.
    pub fn local_ops(&self) -> Vec<LocalOp> {
        self.gates
            .iter()
            .map(|g| match *g {
                Gate::One { name, qubit } => LocalOp::One {
                    qubit,
                    matrix: named_gate(name),
                },
                Gate::Haar { qubit, seed } => LocalOp::One {
                    qubit,
                    matrix: random_su2(seed),
                },
                Gate::Cz { a, b } => LocalOp::Two { a, b, matrix: cz() },
                Gate::Cnot { control, target } => LocalOp::Two {
                    a: control,
                    b: target,
                    matrix: cnot(),
                },
            })
            .collect()
    }

    /// Exact Kraus-rank-1 LPDO of the noiseless circuit.
    pub fn ideal_lpdo(&self) -> Result<Lpdo, SimError> {
        Ok(lpdo_from_ops(&self.topology, &self.local_ops())?)
    }

    /// Applies the circuit to a state vector of `2^N` amplitudes.
    pub fn apply_to_state(&self, psi: &mut [C64]) {
        sample::apply_ops(psi, self.n_qubits(), &self.local_ops());
    }
}

/// SplitMix64 finalizer over `seed + stream`; used for every derived seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Haar-random 2x2 unitary: QR of a complex Gaussian matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn random_su2(seed: u64) -> Mat2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    };
    let z = Mat2::new(g(), g(), g(), g());
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..2 {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for row in 0..2 {
            q[(row, k)] *= phase;
        }
    }
    q
}

/// One layer of Hadamards on every qubit.
pub fn hadamard_layer(topology: &Topology) -> ChannelSpec {
    let gates = (0..topology.n_qubits())
        .map(|q| Gate::One {
            name: OneQubitGate::H,
            qubit: q,
        })
        .collect();
    ChannelSpec::identity(topology.clone()).with_gates(gates)
}

impl ChannelSpec {
    fn with_gates(mut self, gates: Vec<Gate>) -> Self {
        self.gates = gates;
        self
    }

    pub fn with_noise(mut self, noise: Noise) -> Result<Self, SimError> {
        noise.validate()?;
        self.noise = noise;
        Ok(self)
    }
}

/// For every scheduled edge: fresh Haar rotations on both endpoints, then CZ.
pub fn build_rqc_cycle(
    topology: &Topology,
    schedule: &[(usize, usize)],
    seed: u64,
) -> Result<ChannelSpec, SimError> {
    let mut gates = Vec::with_capacity(3 * schedule.len());
    for (i, &(a, b)) in schedule.iter().enumerate() {
        if !topology.has_edge(a, b) {
            return Err(SimError::Spec(format!("({a}, {b}) is not a topology edge")));
        }
        let i = i as u64;
        gates.push(Gate::Haar {
            qubit: a,
            seed: derive_seed(seed, 2 * i),
        });
        gates.push(Gate::Haar {
            qubit: b,
            seed: derive_seed(seed, 2 * i + 1),
        });
        gates.push(Gate::Cz { a, b });
    }
    ChannelSpec::new(topology.clone(), gates, Noise::None)
}

/// The three-step CZ schedule used for the I-beam device.
pub fn ibeam7_schedule() -> Vec<(usize, usize)> {
    vec![(0, 1), (3, 5), (1, 2), (4, 5), (1, 3), (5, 6)]
}

/// Dense `2^N x 2^N` circuit unitary.
pub fn build_circuit_unitary(spec: &ChannelSpec) -> Result<CMatrix, SimError> {
    if !spec.is_noiseless() {
        return Err(SimError::Noisy);
    }
    let n = spec.n_qubits();
    if n > UNITARY_CAP {
        return Err(SimError::Cap {
            what: "dense unitary",
            n,
            cap: UNITARY_CAP,
        });
    }
    let h = 1usize << n;
    let mut u = CMatrix::zeros(h, h);
    let mut col = vec![C64::new(0.0, 0.0); h];
    for j in 0..h {
        col.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        col[j] = C64::new(1.0, 0.0);
        spec.apply_to_state(&mut col);
        for (i, x) in col.iter().enumerate() {
            u[(i, j)] = *x;
        }
    }
    Ok(u)
}

/// Dense Choi matrix of the (possibly noisy) channel.
pub fn choi_from_spec(spec: &ChannelSpec) -> Result<DenseChoi, SimError> {
    let n = spec.n_qubits();
    if n > NOISY_CAP {
        return Err(SimError::Cap {
            what: "dense Choi matrix",
            n,
            cap: NOISY_CAP,
        });
    }
    let clean = ChannelSpec {
        noise: Noise::None,
        ..spec.clone()
    };
    let mut choi = DenseChoi::from_unitary(&build_circuit_unitary(&clean)?)?.into_matrix();
    if let Some(kraus) = spec.noise.kraus() {
        for q in 0..n {
            choi = apply_local_kraus(&choi, 2 * n, n + q, &kraus);
        }
    }
    Ok(DenseChoi::new(n, choi)?)
}

/// `Σ_k K_k ρ K_k†` with each `K_k` acting on qubit `pos` of `total` (MSB first).
pub fn apply_local_kraus(rho: &CMatrix, total: usize, pos: usize, kraus: &[Mat2]) -> CMatrix {
    let dim = 1usize << total;
    let bit = 1usize << (total - 1 - pos);
    let mut sup = [[C64::new(0.0, 0.0); 4]; 4];
    for k in kraus {
        for (io, row) in sup.iter_mut().enumerate() {
            for (ab, x) in row.iter_mut().enumerate() {
                *x += k[(io / 2, ab / 2)] * k[(io % 2, ab % 2)].conj();
            }
        }
    }
    let mut out = CMatrix::zeros(dim, dim);
    for i in (0..dim).filter(|i| i & bit == 0) {
        for j in (0..dim).filter(|j| j & bit == 0) {
            let src = [
                rho[(i, j)],
                rho[(i, j | bit)],
                rho[(i | bit, j)],
                rho[(i | bit, j | bit)],
            ];
            for (io, row) in sup.iter().enumerate() {
                let v: C64 = row.iter().zip(&src).map(|(s, x)| s * x).sum();
                let r = if io / 2 == 1 { i | bit } else { i };
                let c = if io % 2 == 1 { j | bit } else { j };
                out[(r, c)] = v;
            }
        }
    }
    out
}

/// Product of `(1 - r_g)` over gate error rates.
pub fn compound_error_baseline(rates: &[f64]) -> Result<f64, SimError> {
    rates.iter().try_fold(1.0, |acc, &r| {
        if (0.0..=1.0).contains(&r) {
            Ok(acc * (1.0 - r))
        } else {
            Err(SimError::Rate(r))
        }
    })
}
