//! Declarative scenario files and their validated hardware description.

use crate::action::{Action, Axis};
use crate::error::{QffError, Result};
use crate::metrics::RqMethod;
use crate::qmem::NoiseKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Either a named topology or an explicit list of `[control, target]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Connectivity {
    Named(String),
    Pairs(Vec<[usize; 2]>),
}

impl Default for Connectivity {
    fn default() -> Self {
        Connectivity::Pairs(Vec::new())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Measurements {
    pub z: Vec<usize>,
    pub xy: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// `null` means no decoherence.
    #[serde(rename = "T_dec")]
    pub t_dec: Option<f64>,
    #[serde(default)]
    pub moments: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    /// Stabilizer backend whenever the scenario allows it.
    #[default]
    Auto,
    Dense,
    Chz,
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub qubits: usize,
    #[serde(default)]
    pub connectivity: Connectivity,
    #[serde(default)]
    pub measurements: Measurements,
    #[serde(default)]
    pub flips: Vec<usize>,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub msmt_error: f64,
    pub horizon: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub pca_components: usize,
    #[serde(default)]
    pub decode_window: usize,
    #[serde(default)]
    pub target_qubit: usize,
    #[serde(default)]
    pub backend: BackendChoice,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Validated hardware and episode description.
#[derive(Clone, Debug, PartialEq)]
pub struct HardwareSpec {
    pub name: String,
    pub n_qubits: usize,
    pub connectivity: Vec<(usize, usize)>,
    pub measurable_z: Vec<usize>,
    pub measurable_xy: Vec<usize>,
    pub flips_allowed: Vec<usize>,
    pub msmt_error: f64,
    pub noise_kind: NoiseKind,
    pub t_dec: f64,
    pub moments: Vec<f64>,
    pub dt: f64,
    pub horizon: usize,
    pub pca_components: usize,
    pub decode_window: usize,
    pub target_qubit: usize,
    pub backend: BackendChoice,
    pub hash: String,
}

fn named_topology(name: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    let both = |pairs: Vec<(usize, usize)>| pairs.into_iter().flat_map(|(a, b)| [(a, b), (b, a)]).collect();
    Ok(match name {
        "all-to-all" => (0..n).flat_map(|c| (0..n).filter(move |&t| t != c).map(move |t| (c, t))).collect(),
        "chain" => both((1..n).map(|i| (i - 1, i)).collect()),
        "ring" if n >= 3 => both((0..n).map(|i| (i, (i + 1) % n)).collect()),
        "none" => Vec::new(),
        other => return Err(QffError::Config(format!("unknown connectivity '{other}'"))),
    })
}

fn sorted_unique(mut v: Vec<usize>, what: &str, n: usize) -> Result<Vec<usize>> {
    if let Some(&q) = v.iter().find(|&&q| q >= n) {
        return Err(QffError::Config(format!("{what} qubit {q} out of range for {n} qubits")));
    }
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

impl HardwareSpec {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        if cfg.version != SCHEMA_VERSION {
            return Err(QffError::Config(format!("unsupported schema version {}", cfg.version)));
        }
        let n = cfg.qubits;
        if !(1..=5).contains(&n) {
            return Err(QffError::Config(format!("qubits must be in 1..=5, got {n}")));
        }
        let mut connectivity = match &cfg.connectivity {
            Connectivity::Named(name) => named_topology(name, n)?,
            Connectivity::Pairs(p) => p.iter().map(|&[c, t]| (c, t)).collect(),
        };
        for &(c, t) in &connectivity {
            if c == t || c >= n || t >= n {
                return Err(QffError::Config(format!("invalid connectivity pair ({c}, {t})")));
            }
        }
        connectivity.sort_unstable();
        connectivity.dedup();
        if !(0.0..=0.5).contains(&cfg.msmt_error) {
            return Err(QffError::Config(format!("msmt_error {} outside [0, 1/2]", cfg.msmt_error)));
        }
        let t_dec = cfg.noise.t_dec.unwrap_or(f64::INFINITY);
        if !(t_dec > 0.0) {
            return Err(QffError::Config(format!("T_dec must be positive, got {t_dec}")));
        }
        if cfg.noise.kind == NoiseKind::CorrelatedDephasing && cfg.noise.moments.len() != n {
            return Err(QffError::Config(format!("correlated noise needs {n} moments")));
        }
        if !(cfg.dt > 0.0) || cfg.horizon == 0 {
            return Err(QffError::Config("dt and horizon must be positive".into()));
        }
        if cfg.pca_components == 0 || cfg.pca_components > 1 << n {
            return Err(QffError::Config(format!("pca_components must be in 1..={}", 1 << n)));
        }
        if cfg.decode_window > cfg.horizon {
            return Err(QffError::Config("decode_window exceeds horizon".into()));
        }
        if cfg.target_qubit >= n {
            return Err(QffError::Config(format!("target qubit {} out of range", cfg.target_qubit)));
        }
        Ok(Self {
            name: cfg.name.clone(),
            n_qubits: n,
            connectivity,
            measurable_z: sorted_unique(cfg.measurements.z.clone(), "z-measurement", n)?,
            measurable_xy: sorted_unique(cfg.measurements.xy.clone(), "xy-measurement", n)?,
            flips_allowed: sorted_unique(cfg.flips.clone(), "flip", n)?,
            msmt_error: cfg.msmt_error,
            noise_kind: cfg.noise.kind,
            t_dec,
            moments: cfg.noise.moments.clone(),
            dt: cfg.dt,
            horizon: cfg.horizon,
            pca_components: cfg.pca_components,
            decode_window: cfg.decode_window,
            target_qubit: cfg.target_qubit,
            backend: cfg.backend,
            hash: cfg.hash(),
        })
    }

    /// Start of the decoding phase.
    pub fn t_signal(&self) -> usize {
        self.horizon - self.decode_window
    }

    pub fn action_count(&self) -> usize {
        self.connectivity.len() + self.measurable_z.len() + 2 * self.measurable_xy.len() + self.flips_allowed.len() + 1
    }

    /// Every action stays inside CNOT / flip / z-measurement.
    pub fn is_chz(&self) -> bool {
        self.measurable_xy.is_empty()
    }

    pub fn chz_eligible(&self) -> bool {
        self.is_chz() && self.noise_kind == NoiseKind::BitFlip
    }

    /// Exact R_Q minimization for this scenario's frames.
    pub fn rq_method(&self) -> RqMethod {
        match self.noise_kind {
            NoiseKind::CorrelatedDephasing if self.connectivity.is_empty() && self.flips_allowed.is_empty() && self.measurable_z.is_empty() => {
                RqMethod::Equator
            }
            NoiseKind::BitFlip if self.is_chz() => RqMethod::Axis,
            _ => RqMethod::Grid,
        }
    }
}

/// Ordered, immutable list of actions with cached measurement positions.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSet {
    pub actions: Vec<Action>,
    pub measurement_indices: Vec<usize>,
}

impl ActionSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Action> {
        self.actions.get(i)
    }

    pub fn index_of(&self, a: &Action) -> Option<usize> {
        self.actions.iter().position(|b| b == a)
    }
}

/// CNOTs (lexicographic), z-measurements, x/y-measurements, flips, idle.
pub fn build_action_set(spec: &HardwareSpec) -> Result<ActionSet> {
    let mut actions: Vec<Action> = spec.connectivity.iter().map(|&(control, target)| Action::Cnot { control, target }).collect();
    actions.extend(spec.measurable_z.iter().map(|&qubit| Action::Measure { qubit, axis: Axis::Z }));
    for &qubit in &spec.measurable_xy {
        actions.push(Action::Measure { qubit, axis: Axis::X });
        actions.push(Action::Measure { qubit, axis: Axis::Y });
    }
    actions.extend(spec.flips_allowed.iter().map(|&qubit| Action::Flip { qubit }));
    actions.push(Action::Idle);
    if actions.is_empty() {
        return Err(QffError::Config("empty action set".into()));
    }
    let measurement_indices = actions.iter().enumerate().filter(|(_, a)| a.is_measurement()).map(|(i, _)| i).collect();
    Ok(ActionSet { actions, measurement_indices })
}
