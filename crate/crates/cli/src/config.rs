//! Experiment configuration: structured TOML with sections for the circuit,
//! the noise models, the probe grid, the mitigation methods and the Monte
//! Carlo validation run. Unknown keys are hard errors.

use serde::Deserialize;

use qem_core::channel::PauliChannel;
use qem_core::fermi_hubbard::FhCircuitSpec;

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub circuit: CircuitSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub probes: ProbesSection,
    #[serde(default)]
    pub methods: MethodsSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    #[serde(default = "default_two")]
    pub lx: usize,
    #[serde(default = "default_two")]
    pub ly: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_u")]
    pub u: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// One model name or a list; decay-scan emits one file per model.
    #[serde(default = "default_models")]
    pub model: ModelList,
    /// Explicit fire distribution for model = "custom": (pauli, weight)
    /// pairs over two qubits, weights summing to 1.
    #[serde(default)]
    pub custom: Option<Vec<(String, f64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelList {
    One(String),
    Many(Vec<String>),
}

impl ModelList {
    pub fn names(&self) -> Vec<String> {
        match self {
            ModelList::One(s) => vec![s.clone()],
            ModelList::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesSection {
    #[serde(default = "default_mus")]
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsSection {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_fit_tol")]
    pub fit_tol: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_mc_seed")]
    pub seed: u64,
    #[serde(default = "default_two")]
    pub lx: usize,
    #[serde(default = "default_one")]
    pub ly: usize,
    #[serde(default = "default_mc_layers")]
    pub layers: usize,
    #[serde(default = "default_mc_observable")]
    pub observable: String,
    /// Mean non-identity error count for the cancellation check.
    #[serde(default = "default_half")]
    pub mu_eps: f64,
    /// Mean detectable error count for the retention check.
    #[serde(default = "default_half")]
    pub mu_d: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

fn default_one() -> usize {
    1
}
fn default_two() -> usize {
    2
}
fn default_layers() -> usize {
    8
}
fn default_mc_layers() -> usize {
    12
}
fn default_seed() -> u64 {
    7
}
fn default_mc_seed() -> u64 {
    1
}
fn default_t() -> f64 {
    1.0
}
fn default_u() -> f64 {
    2.0
}
fn default_half() -> f64 {
    0.5
}
fn default_k_max() -> usize {
    2
}
fn default_fit_tol() -> f64 {
    1e-4
}
fn default_lambda() -> f64 {
    2.0
}
fn default_trajectories() -> usize {
    100_000
}
fn default_mus() -> Vec<f64> {
    vec![0.5, 1.0, 1.5, 2.0]
}
fn default_models() -> ModelList {
    ModelList::Many(vec!["depolarizing".into(), "detectable".into()])
}
fn default_mc_observable() -> String {
    "ZIII".into()
}
fn default_out_dir() -> String {
    "out".into()
}

impl Default for CircuitSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are valid")
    }
}
impl Default for NoiseSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are valid")
    }
}
impl Default for ProbesSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are valid")
    }
}
impl Default for MethodsSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are valid")
    }
}
impl Default for McSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are valid")
    }
}
impl Default for OutputSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<(Self, u64), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok((config, crate::output::fnv1a(text.as_bytes())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.probes.mu.is_empty() {
            return Err(CliError::Config("probes.mu must not be empty".into()));
        }
        for (i, &mu) in self.probes.mu.iter().enumerate() {
            if mu <= 0.0 || !mu.is_finite() {
                return Err(CliError::Config(format!(
                    "probes.mu values must be positive, got {mu}"
                )));
            }
            for &other in &self.probes.mu[i + 1..] {
                if (mu - other).abs() < 1e-12 {
                    return Err(CliError::Config(format!(
                        "probes.mu values must be distinct, {mu} repeats"
                    )));
                }
            }
        }
        if self.methods.lambda <= 1.0 {
            return Err(CliError::Config("methods.lambda must exceed 1".into()));
        }
        if self.methods.k_max == 0 {
            return Err(CliError::Config("methods.k_max must be positive".into()));
        }
        let names = self.noise.model.names();
        if names.is_empty() {
            return Err(CliError::Config("noise.model must not be empty".into()));
        }
        for name in &names {
            match name.as_str() {
                "depolarizing" | "depolarizing2" | "detectable" | "detectable2" => {}
                "custom" => {
                    if self.noise.custom.is_none() {
                        return Err(CliError::Config(
                            "noise.model = \"custom\" needs a noise.custom weight list".into(),
                        ));
                    }
                }
                "dephasing" => {
                    return Err(CliError::Config(
                        "the dephasing preset is single-qubit and cannot follow two-qubit gates"
                            .into(),
                    ))
                }
                other => return Err(CliError::Config(format!(
                    "unknown noise model {other:?} (expected depolarizing, detectable or custom)"
                ))),
            }
        }
        Ok(())
    }

    pub fn circuit_spec(&self, seed_override: Option<u64>) -> FhCircuitSpec {
        FhCircuitSpec {
            lx: self.circuit.lx,
            ly: self.circuit.ly,
            layers: self.circuit.layers,
            params: None,
            seed: seed_override.unwrap_or(self.circuit.seed),
        }
    }

    /// Fire distribution for one configured noise model name.
    pub fn fire_channel(&self, name: &str) -> Result<PauliChannel, CliError> {
        match name {
            "depolarizing" | "depolarizing2" => {
                Ok(qem_core::fermi_hubbard::NoiseModel::Depolarizing.fire_channel())
            }
            "detectable" | "detectable2" => {
                Ok(qem_core::fermi_hubbard::NoiseModel::Detectable.fire_channel())
            }
            "custom" => {
                let pairs = self.noise.custom.as_ref().ok_or_else(|| {
                    CliError::Config("noise.custom missing for the custom model".into())
                })?;
                let mut weights = Vec::with_capacity(pairs.len());
                for (label, w) in pairs {
                    let string: qem_core::pauli::PauliString = label
                        .parse()
                        .map_err(|e| CliError::Config(format!("noise.custom: {e}")))?;
                    weights.push((string, *w));
                }
                PauliChannel::new(2, weights)
                    .map_err(|e| CliError::Config(format!("noise.custom: {e}")))
            }
            other => Err(CliError::Config(format!("unknown noise model {other:?}"))),
        }
    }

}
