use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::data::ShotRecord;
use crate::lpdo::{
    identity_weight, measurement_weight, site_node, site_node_conj_grad, tp_regularizer,
    tp_regularizer_with_grad, Lpdo, LpdoDims, SiteNodeNetwork, SiteWeight,
};
use crate::registry::Registry;
use crate::topology::Topology;

use super::TrainError;

const CHUNK: usize = 256;

/// Negative log-likelihood of shot records plus `κ Γ`, evaluated through
/// per-site nodes that are shared by every record with the same local
/// setting.
pub struct Objective {
    network: SiteNodeNetwork,
    topology: Topology,
    dims: LpdoDims,
    weights: Vec<Vec<SiteWeight>>,
    n_states: Vec<usize>,
    n_effects: Vec<usize>,
    kappa: f64,
    floor: f64,
}

/// Per-chunk partial sums: NLL, unclamped count, and node cotangents per
/// `[site][setting]`.
struct Partial {
    nll: f64,
    unclamped: usize,
    buckets: Vec<Vec<Vec<C64>>>,
}

impl Partial {
    fn new(n: usize, settings: &[usize]) -> Self {
        Self {
            nll: 0.0,
            unclamped: 0,
            buckets: (0..n).map(|j| vec![Vec::new(); settings[j]]).collect(),
        }
    }

    fn add_bucket(slot: &mut Vec<C64>, g: &[C64], coef: f64) {
        if slot.is_empty() {
            slot.resize(g.len(), C64::new(0.0, 0.0));
        }
        for (s, x) in slot.iter_mut().zip(g) {
            *s += x * coef;
        }
    }

    fn merge(&mut self, other: Partial) {
        self.nll += other.nll;
        self.unclamped += other.unclamped;
        for (mine, theirs) in self.buckets.iter_mut().zip(other.buckets) {
            for (slot, g) in mine.iter_mut().zip(theirs) {
                if !g.is_empty() {
                    Self::add_bucket(slot, &g, 1.0);
                }
            }
        }
    }
}

impl Objective {
    pub fn new(
        lpdo: &Lpdo,
        registry: &Registry,
        kappa: f64,
        floor: f64,
    ) -> Result<Self, TrainError> {
        let n = lpdo.n_qubits();
        if registry.n_qubits() != n {
            return Err(TrainError::Config(format!(
                "registry covers {} qubits, model has {n}",
                registry.n_qubits()
            )));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(TrainError::Config(format!(
                "kappa must be >= 0, got {kappa}"
            )));
        }
        if !(floor > 0.0 && floor < 1.0) {
            return Err(TrainError::Config(format!(
                "prob_floor must be in (0, 1), got {floor}"
            )));
        }
        let n_states: Vec<usize> = (0..n).map(|q| registry.states(q).len()).collect();
        let n_effects: Vec<usize> = (0..n).map(|q| registry.povm(q).len()).collect();
        let weights = (0..n)
            .map(|q| {
                let mut w = Vec::with_capacity(n_states[q] * n_effects[q]);
                for a in 0..n_states[q] {
                    for b in 0..n_effects[q] {
                        w.push(measurement_weight(
                            registry.state(q, a),
                            registry.effect(q, b),
                        ));
                    }
                }
                w
            })
            .collect();
        Ok(Self {
            network: SiteNodeNetwork::new(lpdo)?,
            topology: lpdo.topology().clone(),
            dims: lpdo.dims().clone(),
            weights,
            n_states,
            n_effects,
            kappa,
            floor,
        })
    }

    fn check_model(&self, lpdo: &Lpdo) -> Result<(), TrainError> {
        if lpdo.topology() != &self.topology || lpdo.dims() != &self.dims {
            return Err(TrainError::Config(
                "model shape differs from the one the objective was built for".into(),
            ));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn settings(&self) -> Vec<usize> {
        self.weights.iter().map(Vec::len).collect()
    }

    fn check(&self, records: &[ShotRecord]) -> Result<(), TrainError> {
        if records.is_empty() {
            return Err(TrainError::Config("empty batch".into()));
        }
        let n = self.n_states.len();
        for (k, r) in records.iter().enumerate() {
            if r.inputs.len() != n || r.outcomes.len() != n {
                return Err(TrainError::Record {
                    record: k,
                    msg: format!("expected {n} entries"),
                });
            }
            for q in 0..n {
                if r.inputs[q] >= self.n_states[q] || r.outcomes[q] >= self.n_effects[q] {
                    return Err(TrainError::Record {
                        record: k,
                        msg: format!("index out of registry range on qubit {q}"),
                    });
                }
            }
        }
        Ok(())
    }

    fn setting(&self, q: usize, r: &ShotRecord) -> usize {
        r.inputs[q] * self.n_effects[q] + r.outcomes[q]
    }

    /// Site nodes for every setting used by `records`.
    fn nodes(&self, lpdo: &Lpdo, records: &[ShotRecord]) -> Vec<Vec<Vec<C64>>> {
        let n = lpdo.n_qubits();
        let mut used: Vec<Vec<bool>> = self.weights.iter().map(|w| vec![false; w.len()]).collect();
        for r in records {
            for (q, u) in used.iter_mut().enumerate() {
                u[self.setting(q, r)] = true;
            }
        }
        (0..n)
            .into_par_iter()
            .map(|q| {
                let data = lpdo.site_data(q);
                let (k, b) = (lpdo.kraus_dim(q), lpdo.bond_block(q));
                self.weights[q]
                    .iter()
                    .zip(&used[q])
                    .map(|(w, &u)| {
                        if u {
                            site_node(data, k, b, w)
                        } else {
                            Vec::new()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn normalization(&self, lpdo: &Lpdo) -> Result<(f64, Vec<Vec<C64>>), TrainError> {
        let n = lpdo.n_qubits();
        let nodes = SiteNodeNetwork::nodes(lpdo, &vec![identity_weight(); n]);
        let refs: Vec<&[C64]> = nodes.iter().map(Vec::as_slice).collect();
        let fwd = self.network.program().forward(&refs);
        let z = fwd.scalar().re;
        if z <= 0.0 {
            return Err(TrainError::Lpdo(crate::lpdo::LpdoError::NonPositiveTrace(
                z,
            )));
        }
        let grads = self.network.program().backward(&fwd, &[C64::new(1.0, 0.0)]);
        Ok((z, grads))
    }

    /// Model probabilities `P(β|α)` of each record.
    pub fn probabilities(
        &self,
        lpdo: &Lpdo,
        records: &[ShotRecord],
    ) -> Result<Vec<f64>, TrainError> {
        self.check_model(lpdo)?;
        self.check(records)?;
        let (z, _) = self.normalization(lpdo)?;
        let scale = (1u64 << lpdo.n_qubits()) as f64 / z;
        let nodes = self.nodes(lpdo, records);
        let program = self.network.program();
        Ok(records
            .par_iter()
            .map(|r| {
                let refs: Vec<&[C64]> = nodes
                    .iter()
                    .enumerate()
                    .map(|(q, e)| e[self.setting(q, r)].as_slice())
                    .collect();
                program.forward(&refs).scalar().re * scale
            })
            .collect())
    }

    /// `-(1/M) Σ log max(P, floor)`.
    pub fn nll(&self, lpdo: &Lpdo, records: &[ShotRecord]) -> Result<f64, TrainError> {
        let p = self.probabilities(lpdo, records)?;
        let sum: f64 = p
            .chunks(CHUNK)
            .map(|c| c.iter().map(|&x| -x.max(self.floor).ln()).sum::<f64>())
            .sum();
        Ok(sum / records.len() as f64)
    }

    pub fn cost(&self, lpdo: &Lpdo, records: &[ShotRecord]) -> Result<f64, TrainError> {
        let nll = self.nll(lpdo, records)?;
        let gamma = if self.kappa > 0.0 {
            tp_regularizer(lpdo)?
        } else {
            0.0
        };
        Ok(nll + self.kappa * gamma)
    }

    /// Cost and its derivative with respect to the conjugate of every site
    /// tensor.
    pub fn cost_and_gradient(
        &self,
        lpdo: &Lpdo,
        records: &[ShotRecord],
    ) -> Result<(f64, Vec<Vec<C64>>), TrainError> {
        self.check_model(lpdo)?;
        self.check(records)?;
        let n = lpdo.n_qubits();
        let m = records.len() as f64;
        let (z, z_grads) = self.normalization(lpdo)?;
        let scale = (1u64 << n) as f64 / z;
        let nodes = self.nodes(lpdo, records);
        let program = self.network.program();
        let settings = self.settings();

        let partials: Vec<Partial> = records
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = Partial::new(n, &settings);
                for r in chunk {
                    let idx: Vec<usize> = (0..n).map(|q| self.setting(q, r)).collect();
                    let refs: Vec<&[C64]> = idx
                        .iter()
                        .enumerate()
                        .map(|(q, &c)| nodes[q][c].as_slice())
                        .collect();
                    let fwd = program.forward(&refs);
                    let raw = fwd.scalar().re;
                    let p = raw * scale;
                    if p < self.floor {
                        acc.nll -= self.floor.ln();
                        continue;
                    }
                    acc.nll -= p.ln();
                    acc.unclamped += 1;
                    let grads = program.backward(&fwd, &[C64::new(1.0, 0.0)]);
                    for (q, g) in grads.iter().enumerate() {
                        Partial::add_bucket(&mut acc.buckets[q][idx[q]], g, -1.0 / (m * raw));
                    }
                }
                acc
            })
            .collect();
        let mut total = Partial::new(n, &settings);
        for p in partials {
            total.merge(p);
        }

        let z_coef = total.unclamped as f64 / (m * z);
        let (gamma, gamma_grad) = if self.kappa > 0.0 {
            tp_regularizer_with_grad(lpdo)?
        } else {
            (0.0, Vec::new())
        };
        let grads = (0..n)
            .into_par_iter()
            .map(|q| {
                let data = lpdo.site_data(q);
                let (k, b) = (lpdo.kraus_dim(q), lpdo.bond_block(q));
                let zg: Vec<C64> = z_grads[q].iter().map(|x| x * z_coef).collect();
                let mut g = site_node_conj_grad(data, k, b, &identity_weight(), &zg);
                for (w, bucket) in self.weights[q].iter().zip(&total.buckets[q]) {
                    if bucket.is_empty() {
                        continue;
                    }
                    for (gi, x) in g.iter_mut().zip(site_node_conj_grad(data, k, b, w, bucket)) {
                        *gi += x;
                    }
                }
                if let Some(tg) = gamma_grad.get(q) {
                    for (gi, x) in g.iter_mut().zip(tg) {
                        *gi += x * self.kappa;
                    }
                }
                g
            })
            .collect();
        Ok((total.nll / m + self.kappa * gamma, grads))
    }
}

/// Central differences of the cost along the real and imaginary part of
/// every parameter, combined as `(∂/∂x + i ∂/∂y) / 2`.
pub fn finite_difference_gradient(
    objective: &Objective,
    lpdo: &Lpdo,
    records: &[ShotRecord],
    h: f64,
) -> Result<Vec<Vec<C64>>, TrainError> {
    let mut probe = lpdo.clone();
    let mut out = Vec::with_capacity(lpdo.n_qubits());
    for j in 0..lpdo.n_qubits() {
        let mut g = vec![C64::new(0.0, 0.0); lpdo.site_data(j).len()];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut partial = |dir: C64| -> Result<f64, TrainError> {
                let orig = probe.site_data(j)[i];
                probe.site_data_mut(j)[i] = orig + dir * h;
                let plus = objective.cost(&probe, records)?;
                probe.site_data_mut(j)[i] = orig - dir * h;
                let minus = objective.cost(&probe, records)?;
                probe.site_data_mut(j)[i] = orig;
                Ok((plus - minus) / (2.0 * h))
            };
            let dx = partial(C64::new(1.0, 0.0))?;
            let dy = partial(C64::new(0.0, 1.0))?;
            *gi = C64::new(dx, dy) * 0.5;
        }
        out.push(g);
    }
    Ok(out)
}

/// Largest entry-wise deviation relative to the largest reference entry.
pub fn relative_gradient_error(analytic: &[Vec<C64>], reference: &[Vec<C64>]) -> f64 {
    let scale = reference
        .iter()
        .flatten()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let diff = analytic
        .iter()
        .flatten()
        .zip(reference.iter().flatten())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    diff / scale
}
