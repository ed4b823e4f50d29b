use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use qpt_core::data::{load_dataset, load_spam_overrides, resolve_topology, Dataset};
use qpt_core::linalg::{dense_process_fidelity, DenseChoi, DENSE_CHOI_FORMAT};
use qpt_core::lpdo::{
    fidelity_to_unitary, init_lpdo, load_checkpoint, materialize_choi, probability_network_shape,
    reduce_to_subset, Lpdo, LpdoDims, LpdoError, DEFAULT_DENSE_CAP, DEFAULT_INIT_NOISE,
};
use qpt_core::planner::{plan_greedy, plan_optimal_with_cap, ContractionPlan, DEFAULT_OPTIMAL_CAP};
use qpt_core::registry::{pauli_state, Registry};
use qpt_core::sim::{
    build_circuit_unitary, choi_from_spec, sample_shots, ChannelSpec, ShotSource, SpamNoise,
    NOISY_CAP, UNITARY_CAP,
};
use qpt_core::topology::Topology;
use qpt_core::train::{
    data_size_sweep, finite_difference_gradient, relative_gradient_error, train, write_sweep_csv,
    Objective, Reference, TrainConfig,
};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{set, RunConfig, INIT_STREAM, SAMPLE_STREAM};
use crate::output::{config_error, Classify, Failure, Staged, Summary};
use crate::{
    FidelityArgs, GradcheckArgs, ModelArgs, PlanArgs, ReconstructArgs, ReduceArgs, SimulateArgs,
    SweepArgs,
};

type CmdResult = Result<Summary, Failure>;

const MANIFEST_FORMAT: &str = "qpt-manifest/1";

fn required<T>(value: Option<T>, what: &str) -> Result<T, Failure> {
    value.ok_or_else(|| config_error(format!("missing {what} (flag or config file)")))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .config()
}

fn load_spec(path: &Path) -> Result<ChannelSpec, Failure> {
    ChannelSpec::from_json(&read_text(path)?)
        .with_context(|| format!("channel spec {}", path.display()))
        .config()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let mut cfg = RunConfig::load_opt(a.config.as_deref()).config()?;
    set(&mut cfg.spec, a.spec);
    set(&mut cfg.shots, a.shots);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.out_dir, a.out);
    let mut spam = cfg.spam_noise.unwrap_or_default();
    if let Some(p) = a.state_depolarizing {
        spam.state_depolarizing = p;
    }
    if let Some(p) = a.readout_flip {
        spam.readout_flip = p;
    }
    spam.validate().config()?;

    let spec_path = required(cfg.spec.clone(), "channel spec")?;
    let shots = required(cfg.shots, "shot count")?;
    let out = required(cfg.out_dir.clone(), "output directory")?;
    let spec = load_spec(&spec_path)?;
    let n = spec.n_qubits();
    let cap = if spec.is_noiseless() {
        UNITARY_CAP
    } else {
        NOISY_CAP
    };
    if n > cap {
        return Err(config_error(format!(
            "simulation of this channel needs at most {cap} qubits, got {n}"
        )));
    }

    let seed = cfg.sub_seed(SAMPLE_STREAM);
    let spam_ref = (!spam.is_trivial()).then_some(&spam);
    let ds = sample_shots(
        ShotSource::Spec(&spec),
        &Registry::pauli6(n),
        shots,
        seed,
        spam_ref,
    )
    .runtime()?;
    let mut data = Vec::new();
    ds.write_to(&mut data).runtime()?;

    let spec_hash = hex::encode(Sha256::digest(spec.to_json().as_bytes()));
    let manifest = json!({
        "format": MANIFEST_FORMAT,
        "command": "simulate",
        "seed": cfg.seed(),
        "sample_seed": seed,
        "spec_sha256": spec_hash,
        "shots": shots,
        "n_qubits": n,
        "spam_noise": { "state_depolarizing": spam.state_depolarizing, "readout_flip": spam.readout_flip },
        "dataset": "dataset.txt",
    });
    let mut staged = Staged::default();
    staged.add(out.join("dataset.txt"), data);
    staged.add(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("json"),
    );
    staged.commit().runtime()?;

    Ok(Summary::new("simulate")
        .with("records", ds.len())
        .with("n_qubits", n)
        .with("spec_sha256", spec_hash)
        .with("dataset", path_str(&out.join("dataset.txt"))))
}

struct Prepared {
    dataset: Dataset,
    init: Lpdo,
    train: TrainConfig,
    reference: Option<Reference>,
    out: PathBuf,
    sizes: Option<Vec<usize>>,
}

fn reference_for(spec: &ChannelSpec) -> Result<Reference, Failure> {
    let n = spec.n_qubits();
    if spec.is_noiseless() && n <= UNITARY_CAP {
        return Ok(Reference::Unitary(build_circuit_unitary(spec).config()?));
    }
    if n > NOISY_CAP {
        return Err(config_error(format!(
            "dense cap exceeded: {n} qubits > {NOISY_CAP}"
        )));
    }
    Ok(Reference::Choi(choi_from_spec(spec).config()?))
}

fn prepare(m: ModelArgs, sizes: Option<Vec<usize>>) -> Result<Prepared, Failure> {
    let mut cfg = RunConfig::load_opt(m.config.as_deref()).config()?;
    set(&mut cfg.dataset, m.dataset);
    set(&mut cfg.topology, m.topology);
    set(&mut cfg.bond_dim, m.bond_dim);
    set(&mut cfg.kraus_dim, m.kraus_dim);
    set(&mut cfg.seed, m.seed);
    set(&mut cfg.spam_override, m.spam_override);
    set(&mut cfg.reference_spec, m.reference_spec);
    set(&mut cfg.out_dir, m.out);
    set(&mut cfg.sizes, sizes);
    set(&mut cfg.train.epochs, m.epochs);
    set(&mut cfg.train.batch_size, m.batch_size);
    set(&mut cfg.train.kappa, m.kappa);
    if let Some(lr) = m.lr {
        let mut adam = cfg.train.adam.unwrap_or_default();
        adam.alpha = lr;
        cfg.train.adam = Some(adam);
    }

    let ds_path = required(cfg.dataset.clone(), "dataset")?;
    let out = required(cfg.out_dir.clone(), "output directory")?;
    let mut dataset = load_dataset(&ds_path)
        .with_context(|| format!("dataset {}", ds_path.display()))
        .config()?;
    let n = dataset.n_qubits();
    let topology = match &cfg.topology {
        Some(t) => resolve_topology(t).config()?,
        None => Topology::line(n),
    };
    if topology.n_qubits() != n {
        return Err(config_error(format!(
            "topology has {} qubits but the dataset has {n}",
            topology.n_qubits()
        )));
    }
    if let Some(p) = &cfg.spam_override {
        let ov = load_spam_overrides(p, n)
            .with_context(|| format!("SPAM override {}", p.display()))
            .config()?;
        dataset = dataset.with_registry(ov.registry()).config()?;
    }
    let dims = LpdoDims::uniform(
        &topology,
        cfg.bond_dim.unwrap_or(2),
        cfg.kraus_dim.unwrap_or(2),
    );
    let noise = cfg.init_noise.unwrap_or(DEFAULT_INIT_NOISE);
    let init = init_lpdo(&topology, &dims, noise, cfg.sub_seed(INIT_STREAM)).config()?;
    let train = cfg.train_config();
    train.validate().config()?;
    let reference = match &cfg.reference_spec {
        Some(p) => {
            let spec = load_spec(p)?;
            if spec.n_qubits() != n {
                return Err(config_error(format!(
                    "reference spec has {} qubits but the dataset has {n}",
                    spec.n_qubits()
                )));
            }
            Some(reference_for(&spec)?)
        }
        None => None,
    };
    Ok(Prepared {
        dataset,
        init,
        train,
        reference,
        out,
        sizes: cfg.sizes,
    })
}

pub fn reconstruct(a: ReconstructArgs) -> CmdResult {
    let p = prepare(a.model, None)?;
    let (best, history) = train(p.init, &p.dataset, &p.train, p.reference.as_ref()).runtime()?;
    let mut csv = Vec::new();
    history.write_csv(&mut csv).runtime()?;
    let b = history.best();
    let summary_json = json!({
        "best_epoch": history.best_epoch,
        "train_loss": b.train_loss,
        "val_loss": b.val_loss,
        "fidelity": b.fidelity,
        "epochs": history.epochs.len(),
        "records": p.dataset.len(),
    });
    let mut staged = Staged::default();
    staged.add(p.out.join("checkpoint.json"), best.to_checkpoint_json());
    staged.add(p.out.join("history.csv"), csv);
    staged.add(
        p.out.join("summary.json"),
        serde_json::to_string_pretty(&summary_json).expect("json"),
    );
    staged.commit().runtime()?;

    let mut s = Summary::new("reconstruct")
        .with("best_epoch", history.best_epoch)
        .with("train_loss", b.train_loss)
        .with("val_loss", b.val_loss);
    if let Some(f) = b.fidelity {
        s = s.with("fidelity", f);
    }
    Ok(s.with("checkpoint", path_str(&p.out.join("checkpoint.json"))))
}

pub fn sweep(a: SweepArgs) -> CmdResult {
    let p = prepare(a.model, a.sizes)?;
    let sizes = required(p.sizes, "sizes")?;
    if sizes.is_empty() {
        return Err(config_error("sizes must not be empty"));
    }
    let reference = p
        .reference
        .ok_or_else(|| config_error("sweep needs a reference spec"))?;
    let rows = data_size_sweep(&p.init, &p.dataset, &sizes, &p.train, &reference).config()?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).runtime()?;
    let mut staged = Staged::default();
    staged.add(p.out.join("sweep.csv"), csv);
    staged.commit().runtime()?;
    let table: Vec<_> = rows
        .iter()
        .map(|r| json!({ "m": r.m, "best_epoch": r.best_epoch, "infidelity": r.infidelity }))
        .collect();
    Ok(Summary::new("sweep")
        .with("rows", table)
        .with("csv", path_str(&p.out.join("sweep.csv"))))
}

fn load_model(path: &Path) -> Result<Lpdo, Failure> {
    load_checkpoint(path)
        .with_context(|| format!("checkpoint {}", path.display()))
        .config()
}

enum RefChannel {
    Spec(ChannelSpec),
    Choi(DenseChoi),
}

fn load_reference(path: &Path) -> Result<RefChannel, Failure> {
    let text = read_text(path)?;
    let is_choi = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| {
            v.get("format")
                .and_then(|f| f.as_str())
                .map(|f| f == DENSE_CHOI_FORMAT)
        })
        .unwrap_or(false);
    if is_choi {
        let choi = DenseChoi::from_json(&text)
            .with_context(|| format!("reference {}", path.display()))
            .config()?;
        Ok(RefChannel::Choi(choi))
    } else {
        Ok(RefChannel::Spec(load_spec(path)?))
    }
}

pub fn fidelity(a: FidelityArgs) -> CmdResult {
    let lpdo = load_model(&a.checkpoint)?;
    let reference = load_reference(&a.reference)?;
    let n = lpdo.n_qubits();
    let ref_n = match &reference {
        RefChannel::Spec(s) => s.n_qubits(),
        RefChannel::Choi(c) => c.n_qubits(),
    };
    if ref_n != n {
        return Err(config_error(format!(
            "checkpoint has {n} qubits, reference has {ref_n}"
        )));
    }
    if let RefChannel::Spec(spec) = &reference {
        if spec.is_noiseless() && !a.dense {
            if n > UNITARY_CAP {
                return Err(config_error(format!(
                    "vector cap exceeded: {n} qubits > {UNITARY_CAP}"
                )));
            }
            let u = build_circuit_unitary(spec).config()?;
            let f = fidelity_to_unitary(&lpdo, &u).runtime()?;
            return Ok(Summary::new("fidelity")
                .with("fidelity", f)
                .with("path", "tensor-network"));
        }
    }
    if n > DEFAULT_DENSE_CAP {
        return Err(config_error(format!(
            "dense cap exceeded: {n} qubits > {DEFAULT_DENSE_CAP}"
        )));
    }
    let target = match reference {
        RefChannel::Spec(spec) => choi_from_spec(&spec).config()?,
        RefChannel::Choi(c) => c,
    };
    let model = materialize_choi(&lpdo).runtime()?;
    let f = dense_process_fidelity(&model, &target).runtime()?;
    Ok(Summary::new("fidelity")
        .with("fidelity", f)
        .with("path", "dense"))
}

fn parse_label(label: &str) -> Result<qpt_core::linalg::Mat2, Failure> {
    pauli_state(label).ok_or_else(|| config_error(format!("unknown state label `{label}`")))
}

pub fn reduce(a: ReduceArgs) -> CmdResult {
    let lpdo = load_model(&a.checkpoint)?;
    let n = lpdo.n_qubits();
    let mut fixed = Vec::new();
    let mut covered: BTreeSet<usize> = a.keep.iter().copied().collect();
    for item in &a.fixed {
        let (q, label) = item
            .split_once('=')
            .ok_or_else(|| config_error(format!("--fix expects qubit=label, got `{item}`")))?;
        let q: usize = q
            .trim()
            .parse()
            .map_err(|_| config_error(format!("bad qubit in `{item}`")))?;
        fixed.push((q, parse_label(label.trim())?));
        covered.insert(q);
    }
    if let Some(label) = &a.fix_others {
        let rho = parse_label(label)?;
        for q in (0..n).filter(|q| !covered.contains(q)) {
            fixed.push((q, rho));
        }
    }
    let choi = reduce_to_subset(&lpdo, &fixed, &a.keep).map_err(|e| match e {
        LpdoError::Partition(_) | LpdoError::Dense(_) => Failure::Config(e.into()),
        other => Failure::Runtime(other.into()),
    })?;
    let mut staged = Staged::default();
    staged.add(a.out.clone(), choi.to_json());
    staged.commit().runtime()?;
    Ok(Summary::new("reduce")
        .with("kept", a.keep.clone())
        .with("trace", choi.trace())
        .with("out", path_str(&a.out)))
}

fn plan_json(p: &ContractionPlan) -> serde_json::Value {
    json!({
        "est_flops": p.est_flops.to_string(),
        "est_max_size": p.est_max_size.to_string(),
        "steps": p.steps,
    })
}

pub fn plan(a: PlanArgs) -> CmdResult {
    let topology = resolve_topology(&a.topology).config()?;
    let dims = LpdoDims::uniform(&topology, a.bond_dim, a.kraus_dim);
    let shape = probability_network_shape(&topology, &dims).config()?;
    let greedy = plan_greedy(&shape);
    let mut s = Summary::new("plan")
        .with("tensors", shape.len())
        .with("greedy", plan_json(&greedy));
    match plan_optimal_with_cap(&shape, DEFAULT_OPTIMAL_CAP) {
        Ok(opt) => s = s.with("optimal", plan_json(&opt)),
        Err(e) => s = s.with("optimal", format!("skipped: {e}")),
    }
    Ok(s)
}

pub fn gradcheck(a: GradcheckArgs) -> CmdResult {
    if a.records == 0 || a.step.is_nan() || a.step <= 0.0 {
        return Err(config_error("records and step must be positive"));
    }
    let topology = resolve_topology(&a.topology).config()?;
    let n = topology.n_qubits();
    if n > UNITARY_CAP {
        return Err(config_error(format!(
            "gradcheck supports at most {UNITARY_CAP} qubits"
        )));
    }
    let dims = LpdoDims::uniform(&topology, a.bond_dim, a.kraus_dim);
    let lpdo = init_lpdo(&topology, &dims, a.noise, a.seed).config()?;
    let ds = sample_shots(
        ShotSource::Spec(&ChannelSpec::identity(topology.clone())),
        &Registry::pauli6(n),
        a.records,
        a.seed,
        None::<&SpamNoise>,
    )
    .runtime()?;
    let obj = Objective::new(&lpdo, ds.registry(), a.kappa, 1e-12).config()?;
    let (cost, analytic) = obj.cost_and_gradient(&lpdo, ds.records()).runtime()?;
    let fd = finite_difference_gradient(&obj, &lpdo, ds.records(), a.step).runtime()?;
    let err = relative_gradient_error(&analytic, &fd);
    let mut s = Summary::new("gradcheck")
        .with("parameters", lpdo.n_params())
        .with("cost", cost)
        .with("max_relative_error", err)
        .with("tolerance", a.tolerance);
    s.failed = err.is_nan() || err > a.tolerance;
    Ok(s)
}
