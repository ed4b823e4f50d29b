//! Maximum-likelihood training of an LPDO on single-shot records.

mod adam;
mod objective;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, ShotRecord};
use crate::linalg::{dense_process_fidelity, CMatrix, DenseChoi, DenseError};
use crate::lpdo::{fidelity_to_unitary, materialize_choi, Lpdo, LpdoError};
use crate::sim::derive_seed;

pub use adam::{AdamConfig, AdamState};
pub use objective::{finite_difference_gradient, relative_gradient_error, Objective};

const SPLIT_STREAM: u64 = 0;
const SWEEP_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),

    #[error("record {record}: {msg}")]
    Record { record: usize, msg: String },

    #[error(transparent)]
    Lpdo(#[from] LpdoError),

    #[error(transparent)]
    Dense(#[from] DenseError),

    #[error("history export: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kappa: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub validation_fraction: f64,
    pub seed: u64,
    pub prob_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            batch_size: 1000,
            epochs: 100,
            adam: AdamConfig::default(),
            validation_fraction: 0.2,
            seed: 0,
            prob_floor: 1e-12,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be >= 0, got {}", self.kappa));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 1.0) {
            return bad(format!(
                "prob_floor must be in (0, 1), got {}",
                self.prob_floor
            ));
        }
        let a = &self.adam;
        if !(a.alpha > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.eps >= 0.0)
        {
            return bad(format!("invalid Adam parameters {a:?}"));
        }
        Ok(())
    }

    pub fn objective(&self, lpdo: &Lpdo, dataset: &Dataset) -> Result<Objective, TrainError> {
        Objective::new(lpdo, dataset.registry(), self.kappa, self.prob_floor)
    }
}

/// `C = -(1/M) Σ log max(P, 1e-12) + κ Γ` on `records`.
pub fn cost(
    lpdo: &Lpdo,
    dataset: &Dataset,
    records: &[ShotRecord],
    kappa: f64,
) -> Result<f64, TrainError> {
    Objective::new(
        lpdo,
        dataset.registry(),
        kappa,
        TrainConfig::default().prob_floor,
    )?
    .cost(lpdo, records)
}

/// `∂C/∂A_j*` for every site.
pub fn gradient(
    lpdo: &Lpdo,
    dataset: &Dataset,
    records: &[ShotRecord],
    kappa: f64,
) -> Result<Vec<Vec<num_complex::Complex64>>, TrainError> {
    let obj = Objective::new(
        lpdo,
        dataset.registry(),
        kappa,
        TrainConfig::default().prob_floor,
    )?;
    Ok(obj.cost_and_gradient(lpdo, records)?.1)
}

/// Target channel for fidelity tracking.
#[derive(Clone, Debug)]
pub enum Reference {
    Unitary(CMatrix),
    Choi(DenseChoi),
}

impl Reference {
    pub fn fidelity(&self, lpdo: &Lpdo) -> Result<f64, TrainError> {
        Ok(match self {
            Self::Unitary(u) => fidelity_to_unitary(lpdo, u)?,
            Self::Choi(c) => dense_process_fidelity(&materialize_choi(lpdo)?, c)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the mini-batch costs seen during the epoch, weighted by batch size.
    pub train_loss: f64,
    pub val_loss: f64,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch - 1]
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Training and validation indices: the validation set is the tail of a
/// seeded shuffle.
pub fn split_indices(len: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        SPLIT_STREAM,
    )));
    let n_val = ((len as f64) * validation_fraction).round() as usize;
    let val = idx.split_off(len - n_val.min(len));
    (idx, val)
}

/// Trains from `init` and returns the model at the epoch with the lowest
/// validation loss together with the per-epoch history.
pub fn train(
    init: Lpdo,
    dataset: &Dataset,
    config: &TrainConfig,
    reference: Option<&Reference>,
) -> Result<(Lpdo, TrainHistory), TrainError> {
    config.validate()?;
    let (train_idx, val_idx) =
        split_indices(dataset.len(), config.validation_fraction, config.seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(TrainError::Config(format!(
            "{} records cannot be split into training and validation sets",
            dataset.len()
        )));
    }
    let records = dataset.records();
    let val: Vec<ShotRecord> = val_idx.iter().map(|&i| records[i].clone()).collect();
    let objective = config.objective(&init, dataset)?;
    let batch = config.batch_size.min(train_idx.len());

    let mut lpdo = init;
    let mut adam = AdamState::new(&lpdo);
    let mut order = train_idx;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Lpdo)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            config.seed,
            epoch as u64,
        )));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            let recs: Vec<ShotRecord> = chunk.iter().map(|&i| records[i].clone()).collect();
            let (c, g) = objective.cost_and_gradient(&lpdo, &recs)?;
            loss_sum += c * recs.len() as f64;
            adam.step(&mut lpdo, &g, &config.adam);
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_loss = objective.cost(&lpdo, &val)?;
        let fidelity = reference.map(|r| r.fidelity(&lpdo)).transpose()?;
        log::info!(
            "epoch {epoch}: train {train_loss:.6} val {val_loss:.6}{}",
            fidelity
                .map(|f| format!(" fidelity {f:.6}"))
                .unwrap_or_default()
        );
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(TrainError::Config(format!(
                "non-finite loss at epoch {epoch}"
            )));
        }
        if best.as_ref().is_none_or(|(v, _, _)| val_loss < *v) {
            best = Some((val_loss, epoch, lpdo.clone()));
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            fidelity,
        });
    }
    let (_, best_epoch, best_lpdo) = best.expect("at least one epoch");
    Ok((
        best_lpdo,
        TrainHistory {
            epochs: history,
            best_epoch,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub best_epoch: usize,
    pub infidelity: f64,
}

/// Independent training runs on prefixes of one fixed shuffle of `dataset`.
pub fn data_size_sweep(
    init: &Lpdo,
    dataset: &Dataset,
    sizes: &[usize],
    config: &TrainConfig,
    reference: &Reference,
) -> Result<Vec<SweepRow>, TrainError> {
    if let Some(&m) = sizes.iter().find(|&&m| m > dataset.len()) {
        return Err(TrainError::Config(format!(
            "size {m} exceeds the {} available records",
            dataset.len()
        )));
    }
    let mut shuffled = dataset.records().to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        SWEEP_STREAM,
    )));
    sizes
        .iter()
        .map(|&m| {
            let subset = dataset.subset(shuffled[..m].to_vec());
            let (best, history) = train(init.clone(), &subset, config, None)?;
            let infidelity = 1.0 - reference.fidelity(&best)?;
            log::info!(
                "sweep M = {m}: infidelity {infidelity:.6} at epoch {}",
                history.best_epoch
            );
            Ok(SweepRow {
                m,
                best_epoch: history.best_epoch,
                infidelity,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpdo::{init_lpdo, LpdoDims};
    use crate::registry::Registry;
    use crate::sim::{hadamard_layer, sample_shots, ShotSource};
    use crate::topology::Topology;

    fn small_setup(m: usize) -> (Lpdo, Dataset, CMatrix) {
        let topo = Topology::line(1);
        let spec = hadamard_layer(&topo);
        let ds = sample_shots(ShotSource::Spec(&spec), &Registry::pauli6(1), m, 11, None).unwrap();
        let init = init_lpdo(&topo, &LpdoDims::uniform(&topo, 1, 2), 0.01, 2).unwrap();
        let u = crate::sim::build_circuit_unitary(&spec).unwrap();
        (init, ds, u)
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let (tr, va) = split_indices(100, 0.2, 9);
        assert_eq!((tr.len(), va.len()), (80, 20));
        let mut all: Vec<_> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 0.2, 9), (tr, va));
    }

    #[test]
    fn history_bookkeeping_and_determinism() {
        let (init, ds, u) = small_setup(400);
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 64,
            adam: AdamConfig {
                alpha: 0.02,
                ..Default::default()
            },
            ..Default::default()
        };
        let reference = Reference::Unitary(u);
        let (best, h) = train(init.clone(), &ds, &cfg, Some(&reference)).unwrap();
        assert_eq!(h.epochs.len(), 6);
        let argmin = h
            .epochs
            .iter()
            .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
            .unwrap()
            .epoch;
        assert_eq!(h.best_epoch, argmin);
        let (_, val) = split_indices(ds.len(), cfg.validation_fraction, cfg.seed);
        let val: Vec<_> = val.iter().map(|&i| ds.records()[i].clone()).collect();
        let again = cfg
            .objective(&best, &ds)
            .unwrap()
            .cost(&best, &val)
            .unwrap();
        assert!((again - h.best().val_loss).abs() < 1e-10);

        let (best2, h2) = train(init, &ds, &cfg, Some(&reference)).unwrap();
        assert_eq!(h, h2);
        assert_eq!(best.sites(), best2.sites());
    }

    #[test]
    fn small_batch_falls_back_to_full_batch() {
        let (init, ds, _) = small_setup(20);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 1000,
            ..Default::default()
        };
        let (_, h) = train(init, &ds, &cfg, None).unwrap();
        assert_eq!(h.epochs.len(), 2);
        assert!(h.epochs.iter().all(|e| e.fidelity.is_none()));
    }

    #[test]
    fn csv_export() {
        let h = TrainHistory {
            epochs: vec![
                EpochStats {
                    epoch: 1,
                    train_loss: 2.0,
                    val_loss: 2.5,
                    fidelity: Some(0.5),
                },
                EpochStats {
                    epoch: 2,
                    train_loss: 1.5,
                    val_loss: 2.0,
                    fidelity: None,
                },
            ],
            best_epoch: 2,
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "epoch,train_loss,val_loss,fidelity\n1,2.0,2.5,0.5\n2,1.5,2.0,\n"
        );
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                kappa: -0.1,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                validation_fraction: 1.0,
                ..Default::default()
            },
            TrainConfig {
                prob_floor: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        let (init, ds, u) = small_setup(10);
        assert!(data_size_sweep(
            &init,
            &ds,
            &[11],
            &TrainConfig::default(),
            &Reference::Unitary(u)
        )
        .is_err());
    }
}
