pub mod costs;
pub mod decay_scan;
pub mod fit;
pub mod mc_validate;
pub mod mitigate;

use qem_core::fermi_hubbard::{build_circuit, hamiltonian_terms};
use qem_core::pauli::PauliString;
use qem_core::sim::NoisyCircuit;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Builds the configured circuit and the sorted list of non-identity
/// Hamiltonian observables in its final mode ordering.
pub fn circuit_and_observables(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
) -> Result<(NoisyCircuit, Vec<PauliString>), CliError> {
    let spec = config.circuit_spec(seed_override);
    let circuit = build_circuit(&spec)?;
    let terms = hamiltonian_terms(
        config.circuit.lx,
        config.circuit.ly,
        config.circuit.t,
        config.circuit.u,
        circuit.mode_permutation(),
    )?;
    let observables = terms
        .iter()
        .filter(|t| !t.string.is_identity())
        .map(|t| t.string)
        .collect();
    Ok((circuit, observables))
}
