use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::linalg::{CMatrix, Mat2};
use crate::tensor::{Index, Tensor};
use crate::topology::Topology;

use super::{Lpdo, LpdoDims, LpdoError};

/// A gate in a circuit that is exactly representable with Kraus dimension 1.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalOp {
    One {
        qubit: usize,
        matrix: Mat2,
    },
    /// 4x4 matrix on `|a b>` with `a` the more significant qubit.
    Two {
        a: usize,
        b: usize,
        matrix: CMatrix,
    },
}

struct SiteAcc {
    /// `[τ, σ, bonds...]`, row-major.
    data: Vec<C64>,
    bonds: Vec<(usize, usize)>,
}

impl SiteAcc {
    fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self {
            data: vec![one, zero, zero, one],
            bonds: Vec::new(),
        }
    }

    fn block(&self) -> usize {
        self.bonds.iter().map(|b| b.1).product()
    }

    /// Left-multiplies the output leg by each `factors[r]`, appending a new bond axis over `r`.
    fn absorb(&mut self, factors: &[Mat2], edge: Option<usize>) {
        let block = self.block();
        let rank = factors.len();
        let mut out = vec![C64::new(0.0, 0.0); self.data.len() * rank];
        for t in 0..2 {
            for s in 0..2 {
                for beta in 0..block {
                    for (r, f) in factors.iter().enumerate() {
                        let v = f[(t, 0)] * self.data[(s * block) + beta]
                            + f[(t, 1)] * self.data[(2 + s) * block + beta];
                        out[((t * 2 + s) * block + beta) * rank + r] = v;
                    }
                }
            }
        }
        self.data = out;
        if let Some(e) = edge {
            self.bonds.push((e, rank));
        }
    }
}

/// Operator-Schmidt factors of a two-qubit gate: `G = Σ_r A_r ⊗ B_r`.
fn schmidt_split(g: &CMatrix) -> (Vec<Mat2>, Vec<Mat2>) {
    let r = DMatrix::from_fn(4, 4, |row, col| {
        let (ta, sa) = (row / 2, row % 2);
        let (tb, sb) = (col / 2, col % 2);
        g[(ta * 2 + tb, sa * 2 + sb)]
    });
    let svd = r.svd(true, true);
    let u = svd.u.expect("requested u");
    let vt = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.max();
    let mut fa = Vec::new();
    let mut fb = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= 1e-12 * smax.max(1.0) {
            continue;
        }
        let w = C64::new(s.sqrt(), 0.0);
        fa.push(Mat2::from_fn(|t, s| u[(t * 2 + s, k)] * w));
        fb.push(Mat2::from_fn(|t, s| vt[(k, t * 2 + s)] * w));
    }
    (fa, fb)
}

/// Exact Kraus-rank-1 model of a gate sequence: one-qubit gates are absorbed
/// into their site, two-qubit gates are split by operator Schmidt
/// decomposition, and repeated gates on one edge multiply its bond dimension.
pub fn lpdo_from_ops(topology: &Topology, ops: &[LocalOp]) -> Result<Lpdo, LpdoError> {
    let n = topology.n_qubits();
    let mut acc: Vec<SiteAcc> = (0..n).map(|_| SiteAcc::identity()).collect();
    for op in ops {
        match op {
            LocalOp::One { qubit, matrix } => {
                let site = acc
                    .get_mut(*qubit)
                    .ok_or_else(|| LpdoError::Dims(format!("gate on qubit {qubit} of {n}")))?;
                site.absorb(std::slice::from_ref(matrix), None);
            }
            LocalOp::Two { a, b, matrix } => {
                if matrix.shape() != (4, 4) {
                    return Err(LpdoError::Dims("two-qubit gate must be 4x4".into()));
                }
                let e = topology
                    .edge_id(*a, *b)
                    .ok_or(LpdoError::OffTopology(*a, *b))?;
                let (fa, fb) = schmidt_split(matrix);
                acc[*a].absorb(&fa, Some(e));
                acc[*b].absorb(&fb, Some(e));
            }
        }
    }

    let mut bond = vec![1usize; topology.edges().len()];
    for (e, &(lo, _)) in topology.edges().iter().enumerate() {
        bond[e] = acc[lo]
            .bonds
            .iter()
            .filter(|b| b.0 == e)
            .map(|b| b.1)
            .product();
    }
    let dims = LpdoDims {
        kraus: vec![1; n],
        bond,
    };

    let data = acc
        .into_iter()
        .enumerate()
        .map(|(j, site)| {
            let mut idx = vec![Index::new("t", 2), Index::new("s", 2)];
            idx.extend(
                site.bonds
                    .iter()
                    .enumerate()
                    .map(|(i, b)| Index::new(format!("g{i}"), b.1)),
            );
            let t = Tensor::new(idx, site.data)?;
            let mut order = vec!["t".to_string(), "s".to_string()];
            for e in topology.incident_edges(j) {
                order.extend(
                    site.bonds
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| b.0 == e)
                        .map(|(i, _)| format!("g{i}")),
                );
            }
            let refs: Vec<&str> = order.iter().map(String::as_str).collect();
            Ok(t.permute(&refs)?.into_data())
        })
        .collect::<Result<Vec<_>, LpdoError>>()?;
    Lpdo::from_site_data(topology.clone(), dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, kron, mat2_to_dense, max_abs_diff, DenseChoi};
    use crate::lpdo::{fidelity_to_unitary, materialize_choi, tp_regularizer};

    fn hadamard() -> Mat2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Mat2::new(c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.))
    }

    fn cz() -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1., 0.),
            c(1., 0.),
            c(1., 0.),
            c(-1., 0.),
        ]))
    }

    fn cnot() -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(r, col)] = c(1., 0.);
        }
        m
    }

    #[test]
    fn cz_has_bond_dimension_two() {
        let topo = Topology::line(2);
        let lpdo = lpdo_from_ops(
            &topo,
            &[LocalOp::Two {
                a: 0,
                b: 1,
                matrix: cz(),
            }],
        )
        .unwrap();
        assert_eq!(lpdo.dims().bond, vec![2]);
        assert!(tp_regularizer(&lpdo).unwrap() < 1e-12);
        assert!((fidelity_to_unitary(&lpdo, &cz()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circuit_choi_matches_dense_unitary() {
        let topo = Topology::line(3);
        let h = hadamard();
        let ops = vec![
            LocalOp::One {
                qubit: 0,
                matrix: h,
            },
            LocalOp::Two {
                a: 0,
                b: 1,
                matrix: cnot(),
            },
            LocalOp::Two {
                a: 2,
                b: 1,
                matrix: cnot(),
            },
            LocalOp::One {
                qubit: 1,
                matrix: h,
            },
            LocalOp::Two {
                a: 1,
                b: 0,
                matrix: cz(),
            },
        ];
        let lpdo = lpdo_from_ops(&topo, &ops).unwrap();
        assert_eq!(lpdo.dims().bond, vec![4, 2]);
        let id2 = CMatrix::identity(2, 2);
        let hd = mat2_to_dense(&h);
        let swap_cnot = {
            // Control on qubit 2, target qubit 1, in the |q1 q2> basis.
            let mut m = CMatrix::zeros(4, 4);
            for (r, col) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
                m[(r, col)] = c(1., 0.);
            }
            m
        };
        let u = kron(&cz(), &id2)
            * kron(&kron(&id2, &hd), &id2)
            * kron(&id2, &swap_cnot)
            * kron(&cnot(), &id2)
            * kron(&kron(&hd, &id2), &id2);
        let dense = materialize_choi(&lpdo).unwrap();
        let want = DenseChoi::from_unitary(&u).unwrap();
        assert!(max_abs_diff(dense.matrix(), want.matrix()) < 1e-12);
    }

    #[test]
    fn off_topology_gate_rejected() {
        let topo = Topology::line(3);
        let err = lpdo_from_ops(
            &topo,
            &[LocalOp::Two {
                a: 0,
                b: 2,
                matrix: cz(),
            }],
        )
        .unwrap_err();
        assert!(matches!(err, LpdoError::OffTopology(0, 2)));
    }
}
