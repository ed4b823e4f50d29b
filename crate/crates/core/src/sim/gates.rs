use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, Mat2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OneQubitGate {
    I,
    H,
    X,
    Y,
    Z,
    S,
    T,
    Sx,
}

pub fn named_gate(g: OneQubitGate) -> Mat2 {
    let c = |re: f64, im: f64| C64::new(re, im);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match g {
        OneQubitGate::I => Mat2::identity(),
        OneQubitGate::H => Mat2::new(c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)),
        OneQubitGate::X => Mat2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)),
        OneQubitGate::Y => Mat2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)),
        OneQubitGate::Z => Mat2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)),
        OneQubitGate::S => Mat2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)),
        OneQubitGate::T => Mat2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(h, h)),
        OneQubitGate::Sx => Mat2::new(c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)),
    }
}

pub fn cz() -> CMatrix {
    let mut m = CMatrix::identity(4, 4);
    m[(3, 3)] = C64::new(-1.0, 0.0);
    m
}

/// CNOT on `|control target>`.
pub fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(r, c)] = C64::new(1.0, 0.0);
    }
    m
}

/// Applies `g` to qubit `q` of an `n`-qubit state (qubit 0 most significant).
pub fn apply_one(psi: &mut [C64], n: usize, q: usize, g: &Mat2) {
    let bit = 1usize << (n - 1 - q);
    for i in (0..psi.len()).filter(|i| i & bit == 0) {
        let (a, b) = (psi[i], psi[i | bit]);
        psi[i] = g[(0, 0)] * a + g[(0, 1)] * b;
        psi[i | bit] = g[(1, 0)] * a + g[(1, 1)] * b;
    }
}

/// Applies a 4x4 `g` on `|a b>` to an `n`-qubit state.
pub fn apply_two(psi: &mut [C64], n: usize, a: usize, b: usize, g: &CMatrix) {
    let ba = 1usize << (n - 1 - a);
    let bb = 1usize << (n - 1 - b);
    for i in (0..psi.len()).filter(|i| i & (ba | bb) == 0) {
        let idx = [i, i | bb, i | ba, i | ba | bb];
        let v = idx.map(|k| psi[k]);
        for (r, &k) in idx.iter().enumerate() {
            psi[k] = (0..4).map(|c| g[(r, c)] * v[c]).sum();
        }
    }
}
