use num_complex::Complex64 as C64;

use crate::linalg::{CMatrix, DenseError};
use crate::tensor::{contract_pair, Index, Tensor};

use super::network::{compile, Leaf, SiteProgram};
use super::ops::{choi_trace, permuted, prime};
use super::{conj_relabel, labels, Lpdo, LpdoError};

/// Up to this many qubits the regularizer is evaluated from a dense `Tr_τ Λ`.
pub const DENSE_DELTA_CAP: usize = 10;
/// Below this regularizer value its gradient is reported as zero.
pub const GAMMA_GRAD_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaRoute {
    /// Materialize `Δ = Tr_τ Λ - I` and sum `|Δ|^2` directly.
    DenseDelta,
    /// Expand `Σ|Δ|^2 = Tr T^2 - 2 Tr Λ + d^N` as networks.
    Network,
}

impl GammaRoute {
    pub fn for_qubits(n: usize) -> Self {
        if n <= DENSE_DELTA_CAP {
            Self::DenseDelta
        } else {
            Self::Network
        }
    }
}

/// `Δ = Tr_τ Λ - I` kept in factored form: one tensor `T_j[σ_j, σ'_j, bonds, bonds']`
/// per site.
#[derive(Clone, Debug)]
pub struct TpDeviation {
    sites: Vec<Tensor>,
}

pub fn tp_deviation(lpdo: &Lpdo) -> Result<TpDeviation, LpdoError> {
    let sites = (0..lpdo.n_qubits())
        .map(|j| contract_pair(lpdo.site(j), &conj_relabel(lpdo.site(j), false, true)))
        .collect::<Result<_, _>>()?;
    Ok(TpDeviation { sites })
}

impl TpDeviation {
    pub fn n_qubits(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, j: usize) -> &Tensor {
        &self.sites[j]
    }

    /// Dense `Tr_τ Λ - I`, rows indexed by `σ`, columns by `σ'`.
    pub fn materialize(&self) -> Result<CMatrix, LpdoError> {
        let n = self.n_qubits();
        if n > DENSE_DELTA_CAP {
            return Err(DenseError::CapExceeded {
                n,
                cap: DENSE_DELTA_CAP,
            }
            .into());
        }
        let program = compile(self.sites.iter().map(|t| t.indices().to_vec()).collect())?;
        let refs: Vec<&[C64]> = self.sites.iter().map(Tensor::data).collect();
        let out = Tensor::new(
            program.output_indices().to_vec(),
            program.forward(&refs).value().to_vec(),
        )?;
        let mut order: Vec<String> = (0..n).map(labels::inp).collect();
        order.extend((0..n).map(labels::inp_p));
        let h = 1usize << n;
        let t = CMatrix::from_row_slice(h, h, permuted(&out, &order)?.data());
        Ok(t - CMatrix::identity(h, h))
    }

    /// `Tr T^2` with two copies of the factored `T`.
    fn trace_square(&self) -> Result<f64, LpdoError> {
        let second: Vec<Tensor> = self
            .sites
            .iter()
            .map(|t| {
                t.clone().relabel(|name| match name.strip_suffix('\'') {
                    Some(base) if base.starts_with('s') => Some(base.to_string()),
                    Some(base) => Some(format!("{base}~'")),
                    None if name.starts_with('s') => Some(format!("{name}'")),
                    None => Some(format!("{name}~")),
                })
            })
            .collect::<Result<_, _>>()?;
        let mut nodes: Vec<Vec<Index>> = self.sites.iter().map(|t| t.indices().to_vec()).collect();
        nodes.extend(second.iter().map(|t| t.indices().to_vec()));
        let program = compile(nodes)?;
        let mut refs: Vec<&[C64]> = self.sites.iter().map(Tensor::data).collect();
        refs.extend(second.iter().map(Tensor::data));
        Ok(program.forward(&refs).scalar().re)
    }
}

pub fn tp_regularizer(lpdo: &Lpdo) -> Result<f64, LpdoError> {
    tp_regularizer_via(lpdo, GammaRoute::for_qubits(lpdo.n_qubits()))
}

/// `Γ = sqrt(d^-N Σ |Δ|^2)`.
pub fn tp_regularizer_via(lpdo: &Lpdo, route: GammaRoute) -> Result<f64, LpdoError> {
    let n = lpdo.n_qubits();
    let scale = (-(n as f64) * std::f64::consts::LN_2).exp();
    match route {
        GammaRoute::DenseDelta => {
            let delta = tp_deviation(lpdo)?.materialize()?;
            Ok((scale * delta.iter().map(C64::norm_sqr).sum::<f64>()).sqrt())
        }
        GammaRoute::Network => {
            let tt = tp_deviation(lpdo)?.trace_square()?;
            let z = choi_trace(lpdo)?;
            let g2 = scale * (tt - 2.0 * z) + 1.0;
            Ok(g2.max(0.0).sqrt())
        }
    }
}

/// `Γ` and `∂Γ/∂conj(A_j)` for every site, using the route chosen by size.
pub fn tp_regularizer_with_grad(lpdo: &Lpdo) -> Result<(f64, Vec<Vec<C64>>), LpdoError> {
    tp_regularizer_with_grad_via(lpdo, GammaRoute::for_qubits(lpdo.n_qubits()))
}

pub fn tp_regularizer_with_grad_via(
    lpdo: &Lpdo,
    route: GammaRoute,
) -> Result<(f64, Vec<Vec<C64>>), LpdoError> {
    let n = lpdo.n_qubits();
    let scale = (-(n as f64) * std::f64::consts::LN_2).exp();
    let gamma = tp_regularizer_via(lpdo, route)?;
    if gamma < GAMMA_GRAD_FLOOR {
        let zeros = lpdo
            .sites()
            .iter()
            .map(|s| vec![C64::new(0.0, 0.0); s.len()])
            .collect();
        return Ok((gamma, zeros));
    }
    let trace_t_leaves = |j: usize| {
        [
            Leaf::plain(lpdo, j, |_| None),
            Leaf::conj(lpdo, j, prime(&['s', 'b'])),
        ]
    };
    let grads = match route {
        GammaRoute::DenseDelta => {
            let delta = tp_deviation(lpdo)?.materialize()?;
            let mut idx: Vec<Index> = (0..n).map(|j| Index::new(labels::inp_p(j), 2)).collect();
            idx.extend((0..n).map(|j| Index::new(labels::inp(j), 2)));
            let h = 1usize << n;
            let data = (0..h * h).map(|i| delta[(i / h, i % h)]).collect();
            let mut leaves = vec![Leaf::Fixed(Tensor::new(idx, data)?)];
            for j in 0..n {
                leaves.extend(trace_t_leaves(j));
            }
            let (_, g) = SiteProgram::new(leaves)?.scalar_and_conj_grad(lpdo);
            let f = scale / gamma;
            scaled(g, f)
        }
        GammaRoute::Network => {
            let mut leaves = Vec::with_capacity(4 * n);
            for j in 0..n {
                leaves.extend(trace_t_leaves(j));
                leaves.push(Leaf::plain(lpdo, j, second_plain));
                leaves.push(Leaf::conj(lpdo, j, second_conj));
            }
            let (_, gt) = SiteProgram::new(leaves)?.scalar_and_conj_grad(lpdo);
            let z_leaves = (0..n)
                .flat_map(|j| {
                    [
                        Leaf::plain(lpdo, j, |_| None),
                        Leaf::conj(lpdo, j, prime(&['b'])),
                    ]
                })
                .collect();
            let (_, gz) = SiteProgram::new(z_leaves)?.scalar_and_conj_grad(lpdo);
            let f = scale / (2.0 * gamma);
            gt.into_iter()
                .zip(gz)
                .map(|(a, b)| {
                    a.into_iter()
                        .zip(b)
                        .map(|(x, y)| (x - 2.0 * y) * f)
                        .collect()
                })
                .collect()
        }
    };
    Ok((gamma, grads))
}

fn scaled(g: Vec<Vec<C64>>, f: f64) -> Vec<Vec<C64>> {
    g.into_iter()
        .map(|v| v.into_iter().map(|x| x * f).collect())
        .collect()
}

/// Second copy of `T` in `Tr T^2`: input legs swapped, private output,
/// Kraus and bond legs.
fn second_plain(name: &str) -> Option<String> {
    match name.as_bytes()[0] {
        b's' => Some(format!("{name}'")),
        _ => Some(format!("{name}~")),
    }
}

fn second_conj(name: &str) -> Option<String> {
    match name.as_bytes()[0] {
        b's' => None,
        b'b' => Some(format!("{name}~'")),
        _ => Some(format!("{name}~")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::lpdo::{identity_lpdo, init_lpdo, materialize_choi, LpdoDims};
    use crate::topology::Topology;

    #[test]
    fn identity_is_trace_preserving() {
        let topo = Topology::ring(4);
        let lpdo = identity_lpdo(&topo, &LpdoDims::uniform(&topo, 2, 2)).unwrap();
        assert!(tp_regularizer(&lpdo).unwrap() < 1e-14);
        let (g, grads) = tp_regularizer_with_grad(&lpdo).unwrap();
        assert!(g < 1e-14);
        assert!(grads.iter().flatten().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn deviation_matches_dense_partial_trace() {
        let topo = Topology::line(3);
        let lpdo = init_lpdo(&topo, &LpdoDims::uniform(&topo, 2, 2), 0.2, 9).unwrap();
        let dense = materialize_choi(&lpdo).unwrap();
        let want = dense.trace_output() - CMatrix::identity(8, 8);
        let got = tp_deviation(&lpdo).unwrap().materialize().unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn routes_agree() {
        let topo = Topology::tee4();
        let lpdo = init_lpdo(&topo, &LpdoDims::uniform(&topo, 2, 2), 0.2, 10).unwrap();
        let a = tp_regularizer_via(&lpdo, GammaRoute::DenseDelta).unwrap();
        let b = tp_regularizer_via(&lpdo, GammaRoute::Network).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        let (_, ga) = tp_regularizer_with_grad_via(&lpdo, GammaRoute::DenseDelta).unwrap();
        let (_, gb) = tp_regularizer_with_grad_via(&lpdo, GammaRoute::Network).unwrap();
        for (x, y) in ga.iter().flatten().zip(gb.iter().flatten()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let topo = Topology::line(2);
        let lpdo = init_lpdo(&topo, &LpdoDims::uniform(&topo, 2, 2), 0.3, 11).unwrap();
        let (_, grads) = tp_regularizer_with_grad(&lpdo).unwrap();
        let h = 1e-6;
        for (j, i) in [(0, 0), (0, 5), (1, 3), (1, 14)] {
            let eval = |d: C64| {
                let mut m = lpdo.clone();
                m.site_data_mut(j)[i] += d;
                tp_regularizer(&m).unwrap()
            };
            let dx = (eval(C64::new(h, 0.0)) - eval(C64::new(-h, 0.0))) / (2.0 * h);
            let dy = (eval(C64::new(0.0, h)) - eval(C64::new(0.0, -h))) / (2.0 * h);
            let want = C64::new(dx, dy) * 0.5;
            assert!(
                (grads[j][i] - want).norm() < 1e-6,
                "{} vs {want}",
                grads[j][i]
            );
        }
    }
}
