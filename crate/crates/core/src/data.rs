//! Dataset, topology and SPAM-override files.
//!
//! A dataset file is line oriented. The first line is a JSON header carrying
//! the qubit count and the full per-qubit registries; every following line
//! is one shot, `a_0 a_1 ... | b_0 b_1 ...`, listing state indices then
//! outcome indices:
//!
//! ```text
//! {"format":"qpt-dataset/1","n_qubits":2,"states":[...],"povms":[...]}
//! 0 3 | 2 5
//! 1 1 | 0 0
//! ```
//!
//! Matrices are nested row arrays of `[re, im]` pairs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat2;
use crate::registry::{
    builtin_pauli6, QubitPovm, QubitStateSet, Registry, RegistryError, RELAXED_TOL, STRICT_TOL,
};
use crate::topology::{Topology, TopologyError};

pub const DATASET_FORMAT: &str = "qpt-dataset/1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("record {record} (line {line}): {msg}")]
    Record {
        record: usize,
        line: usize,
        msg: String,
    },

    #[error("record {record}: {msg}")]
    Invalid { record: usize, msg: String },

    #[error(transparent)]
    Registry(#[from] RegistryError),

    #[error(transparent)]
    Topology(#[from] TopologyError),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One single-shot measurement: the input state index and the observed
/// POVM outcome index on every qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShotRecord {
    pub inputs: Vec<usize>,
    pub outcomes: Vec<usize>,
}

impl ShotRecord {
    pub fn new(inputs: Vec<usize>, outcomes: Vec<usize>) -> Self {
        Self { inputs, outcomes }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    registry: Registry,
    records: Vec<ShotRecord>,
}

impl Dataset {
    pub fn new(registry: Registry, records: Vec<ShotRecord>) -> Result<Self, DataError> {
        let ds = Self { registry, records };
        for (i, r) in ds.records.iter().enumerate() {
            ds.check_record(r)
                .map_err(|msg| DataError::Invalid { record: i, msg })?;
        }
        Ok(ds)
    }

    pub fn empty(registry: Registry) -> Self {
        Self {
            registry,
            records: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.registry.n_qubits()
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn records(&self) -> &[ShotRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same records evaluated against another registry of equal shape.
    pub fn with_registry(&self, registry: Registry) -> Result<Self, DataError> {
        Self::new(registry, self.records.clone())
    }

    pub fn subset(&self, records: Vec<ShotRecord>) -> Self {
        Self {
            registry: self.registry.clone(),
            records,
        }
    }

    fn check_record(&self, r: &ShotRecord) -> Result<(), String> {
        let n = self.n_qubits();
        if r.inputs.len() != n || r.outcomes.len() != n {
            return Err(format!(
                "expected {n} inputs and {n} outcomes, got {} and {}",
                r.inputs.len(),
                r.outcomes.len()
            ));
        }
        for q in 0..n {
            let (a, kp) = (r.inputs[q], self.registry.states(q).len());
            if a >= kp {
                return Err(format!(
                    "input index {a} on qubit {q} out of range (K_p = {kp})"
                ));
            }
            let (b, km) = (r.outcomes[q], self.registry.povm(q).len());
            if b >= km {
                return Err(format!(
                    "outcome index {b} on qubit {q} out of range (K_m = {km})"
                ));
            }
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), DataError> {
        let header = Header {
            format: DATASET_FORMAT.to_string(),
            n_qubits: self.n_qubits(),
            states: (0..self.n_qubits())
                .map(|q| self.registry.states(q).0.iter().map(to_json).collect())
                .collect(),
            povms: (0..self.n_qubits())
                .map(|q| self.registry.povm(q).0.iter().map(to_json).collect())
                .collect(),
        };
        serde_json::to_writer(&mut w, &header).map_err(|e| DataError::Format(e.to_string()))?;
        writeln!(w)?;
        for r in &self.records {
            let ins: Vec<String> = r.inputs.iter().map(usize::to_string).collect();
            let outs: Vec<String> = r.outcomes.iter().map(usize::to_string).collect();
            writeln!(w, "{} | {}", ins.join(" "), outs.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, DataError> {
        let mut lines = r.lines();
        let first = lines.next().ok_or(DataError::Parse {
            line: 1,
            msg: "missing header".into(),
        })??;
        let header: Header = serde_json::from_str(&first).map_err(|e| DataError::Parse {
            line: 1,
            msg: format!("bad header: {e}"),
        })?;
        if header.format != DATASET_FORMAT {
            return Err(DataError::Parse {
                line: 1,
                msg: format!("unsupported format `{}`", header.format),
            });
        }
        if header.states.len() != header.n_qubits || header.povms.len() != header.n_qubits {
            return Err(DataError::Parse {
                line: 1,
                msg: format!("registries do not cover {} qubits", header.n_qubits),
            });
        }
        let states = header
            .states
            .iter()
            .map(|s| QubitStateSet(s.iter().map(from_json).collect()))
            .collect();
        let povms = header
            .povms
            .iter()
            .map(|s| QubitPovm(s.iter().map(from_json).collect()))
            .collect();
        let registry = Registry::new(states, povms)?;
        registry.validate(STRICT_TOL, RELAXED_TOL)?;

        let mut ds = Dataset::empty(registry);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record =
                parse_record(&line).map_err(|msg| DataError::Parse { line: line_no, msg })?;
            ds.check_record(&record).map_err(|msg| DataError::Record {
                record: ds.records.len(),
                line: line_no,
                msg,
            })?;
            ds.records.push(record);
        }
        Ok(ds)
    }
}

fn parse_record(line: &str) -> Result<ShotRecord, String> {
    let (a, b) = line.split_once('|').ok_or("expected `inputs | outcomes`")?;
    let parse = |s: &str| -> Result<Vec<usize>, String> {
        s.split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| format!("bad index `{t}`")))
            .collect()
    };
    Ok(ShotRecord::new(parse(a)?, parse(b)?))
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut w = io::BufWriter::new(fs::File::create(path)?);
    ds.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    Dataset::read_from(BufReader::new(fs::File::open(path)?))
}

type JsonMat = [[[f64; 2]; 2]; 2];

fn to_json(m: &Mat2) -> JsonMat {
    let e = |r: usize, c: usize| [m[(r, c)].re, m[(r, c)].im];
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn from_json(j: &JsonMat) -> Mat2 {
    Mat2::from_fn(|r, c| C64::new(j[r][c][0], j[r][c][1]))
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    n_qubits: usize,
    states: Vec<Vec<JsonMat>>,
    povms: Vec<Vec<JsonMat>>,
}

/// A JSON topology file (`{"n_qubits": N, "edges": [[a, b], ...]}`) if
/// `arg` names an existing file, otherwise a builtin name.
pub fn resolve_topology(arg: &str) -> Result<Topology, DataError> {
    let path = Path::new(arg);
    if path.is_file() {
        load_topology(path)
    } else {
        Ok(Topology::builtin(arg)?)
    }
}

pub fn load_topology(path: &Path) -> Result<Topology, DataError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| DataError::Format(format!("{}: {e}", path.display())))
}

pub fn save_topology(t: &Topology, path: &Path) -> Result<(), DataError> {
    fs::write(
        path,
        serde_json::to_string_pretty(t).expect("topology serializes"),
    )?;
    Ok(())
}

/// Per-qubit replacement registries; `None` keeps the builtin Pauli-6 set.
#[derive(Clone, Debug, PartialEq)]
pub struct SpamOverride {
    qubits: Vec<Option<(QubitStateSet, QubitPovm)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OverrideEntry {
    Identity(IdentityTag),
    Sets {
        states: Vec<JsonMat>,
        effects: Vec<JsonMat>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum IdentityTag {
    Identity,
}

#[derive(Serialize, Deserialize)]
struct OverrideFile {
    qubits: BTreeMap<usize, OverrideEntry>,
}

impl SpamOverride {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            qubits: vec![None; n_qubits],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn set(&mut self, qubit: usize, states: QubitStateSet, povm: QubitPovm) {
        self.qubits[qubit] = Some((states, povm));
    }

    pub fn get(&self, qubit: usize) -> Option<&(QubitStateSet, QubitPovm)> {
        self.qubits[qubit].as_ref()
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        for (q, entry) in self.qubits.iter().enumerate() {
            if let Some((s, m)) = entry {
                let wrap = |e| RegistryError::Qubit {
                    qubit: q,
                    source: Box::new(e),
                };
                s.validate(STRICT_TOL).map_err(wrap)?;
                m.validate(RELAXED_TOL).map_err(wrap)?;
            }
        }
        Ok(())
    }

    /// The Pauli-6 registry with every overridden qubit replaced.
    pub fn registry(&self) -> Registry {
        let (states, povm) = builtin_pauli6();
        let mut reg = Registry::uniform(self.n_qubits(), &states, &povm);
        for (q, entry) in self.qubits.iter().enumerate() {
            if let Some((s, m)) = entry {
                reg.set_qubit(q, s.clone(), m.clone());
            }
        }
        reg
    }

    pub fn to_json(&self) -> String {
        let qubits = self
            .qubits
            .iter()
            .enumerate()
            .filter_map(|(q, e)| {
                e.as_ref().map(|(s, m)| {
                    let entry = OverrideEntry::Sets {
                        states: s.0.iter().map(to_json).collect(),
                        effects: m.0.iter().map(to_json).collect(),
                    };
                    (q, entry)
                })
            })
            .collect();
        serde_json::to_string_pretty(&OverrideFile { qubits }).expect("override serializes")
    }

    pub fn from_json(text: &str, n_qubits: usize) -> Result<Self, DataError> {
        let file: OverrideFile = serde_json::from_str(text)
            .map_err(|e| DataError::Format(format!("SPAM override: {e}")))?;
        let mut out = Self::identity(n_qubits);
        for (q, entry) in file.qubits {
            if q >= n_qubits {
                return Err(DataError::Format(format!(
                    "SPAM override names qubit {q} of {n_qubits}"
                )));
            }
            if let OverrideEntry::Sets { states, effects } = entry {
                out.set(
                    q,
                    QubitStateSet(states.iter().map(from_json).collect()),
                    QubitPovm(effects.iter().map(from_json).collect()),
                );
            }
        }
        out.validate()?;
        Ok(out)
    }
}

pub fn load_spam_overrides(path: &Path, n_qubits: usize) -> Result<SpamOverride, DataError> {
    SpamOverride::from_json(&fs::read_to_string(path)?, n_qubits)
}
