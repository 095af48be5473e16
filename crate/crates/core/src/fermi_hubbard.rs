//! Fermi-Hubbard swap-network circuits with seeded parametrisation.
//!
//! Layout convention: the lattice has `lx * ly` sites with two spin modes per
//! site, Jordan-Wigner encoded onto a line of `2 * lx * ly` qubits (mode
//! `2*site + spin`). Each layer applies number-conserving hopping rotations
//! on even then odd bonds, diagonal interaction gates on even bonds, and a
//! full round of fermionic swaps (even then odd bonds). For the default
//! 2x2 lattice this gives 18 two-qubit gates per layer and 144 in total over
//! the default 8 layers, after which the tracked mode permutation returns to
//! the identity. Every gate conserves particle number, hence the fermion
//! number parity symmetry prod_i Z_i.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::channel::{detectable_channel, GroupChannel, PauliChannel};
use crate::error::{Error, Result};
use crate::pauli::{partition_detectable, PauliString, PauliSubgroup, SignedPauliTerm};
use crate::sim::{Gate, NoiseSite, NoisyCircuit};

/// Circuit construction parameters. When `params` is absent the gate angles
/// are drawn uniformly from [0, 2 pi) using a ChaCha12 generator seeded with
/// `seed`, so a seed fully determines the circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct FhCircuitSpec {
    pub lx: usize,
    pub ly: usize,
    pub layers: usize,
    pub params: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for FhCircuitSpec {
    fn default() -> Self {
        FhCircuitSpec {
            lx: 2,
            ly: 2,
            layers: 8,
            params: None,
            seed: 7,
        }
    }
}

impl FhCircuitSpec {
    pub fn n_qubits(&self) -> usize {
        2 * self.lx * self.ly
    }

    /// Angles needed per layer: two per hopping bond plus one per
    /// interaction bond.
    pub fn params_per_layer(&self) -> usize {
        let n = self.n_qubits();
        2 * (n - 1) + n / 2
    }

    pub fn params_total(&self) -> usize {
        self.layers * self.params_per_layer()
    }
}

/// Fermion number parity symmetry: the all-Z string.
pub fn parity_symmetry(n: usize) -> PauliString {
    PauliString::from_bits(n, 0, (1u64 << n) - 1).unwrap()
}

/// Half-filled initial occupation: spin-up on even sites, spin-down on odd
/// sites (a Neel-like basis state).
fn half_filled_state(lx: usize, ly: usize) -> u64 {
    let mut bits = 0u64;
    for site in 0..lx * ly {
        let mode = 2 * site + (site % 2);
        bits |= 1 << mode;
    }
    bits
}

fn even_bonds(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n - 1).step_by(2).map(|q| (q, q + 1))
}

fn odd_bonds(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..n - 1).step_by(2).map(|q| (q, q + 1))
}

/// Builds the noiseless swap-network circuit for the spec.
pub fn build_circuit(spec: &FhCircuitSpec) -> Result<NoisyCircuit> {
    let n = spec.n_qubits();
    if spec.lx == 0 || spec.ly == 0 || spec.layers == 0 {
        return Err(Error::InvalidArgument(
            "lattice dims and layers must be positive".into(),
        ));
    }
    let expected = spec.params_total();
    let params: Vec<f64> = match &spec.params {
        Some(p) => {
            if p.len() != expected {
                return Err(Error::ParamCountMismatch {
                    got: p.len(),
                    expected,
                });
            }
            p.clone()
        }
        None => {
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            (0..expected)
                .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
                .collect()
        }
    };

    let mut circuit = NoisyCircuit::new(n, half_filled_state(spec.lx, spec.ly))?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut next = params.into_iter();
    let mut angle = || next.next().expect("parameter count checked above");

    for _ in 0..spec.layers {
        for (a, b) in even_bonds(n) {
            circuit.push(Gate::givens(a, b, angle(), angle()), None)?;
        }
        for (a, b) in odd_bonds(n) {
            circuit.push(Gate::givens(a, b, angle(), angle()), None)?;
        }
        for (a, b) in even_bonds(n) {
            circuit.push(Gate::interaction(a, b, angle()), None)?;
        }
        for (a, b) in even_bonds(n).chain(odd_bonds(n)) {
            circuit.push(Gate::fermionic_swap(a, b), None)?;
            perm.swap(a, b);
        }
    }
    circuit.set_mode_permutation(perm)?;
    Ok(circuit)
}

/// Local noise attached after every two-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Two-qubit depolarising: fire a uniformly random element of the full
    /// two-qubit Pauli group.
    Depolarizing,
    /// Uniform distribution over the eight two-qubit Paulis detectable by
    /// the ZZ parity check.
    Detectable,
}

impl NoiseModel {
    pub fn parse(name: &str) -> Result<NoiseModel> {
        match name {
            "depolarizing" => Ok(NoiseModel::Depolarizing),
            "detectable" => Ok(NoiseModel::Detectable),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    /// The per-site fire channel.
    pub fn fire_channel(&self) -> PauliChannel {
        match self {
            NoiseModel::Depolarizing => GroupChannel::new(1.0, PauliSubgroup::full(2))
                .unwrap()
                .to_pauli(),
            NoiseModel::Detectable => {
                let e = PauliSubgroup::full(2);
                let (qsub, _) = partition_detectable(&e, &["ZZ".parse().unwrap()]).unwrap();
                detectable_channel(1.0, &e, &qsub).unwrap()
            }
        }
    }
}

/// Attaches the noise model after every two-qubit gate, splitting the mean
/// circuit error count `mu` evenly across the M gates.
pub fn attach_noise(circuit: &NoisyCircuit, model: NoiseModel, mu: f64) -> Result<NoisyCircuit> {
    attach_noise_channel(circuit, &model.fire_channel(), mu)
}

/// Same as [`attach_noise`] with an explicit two-qubit fire distribution.
pub fn attach_noise_channel(
    circuit: &NoisyCircuit,
    fire: &PauliChannel,
    mu: f64,
) -> Result<NoisyCircuit> {
    if mu < 0.0 {
        return Err(Error::InvalidProbability(mu));
    }
    let m = circuit.two_qubit_gate_count();
    if m == 0 {
        return Err(Error::InvalidArgument(
            "circuit has no two-qubit gates".into(),
        ));
    }
    let p = mu / m as f64;
    if p >= 1.0 {
        return Err(Error::InvalidProbability(p));
    }
    if mu == 0.0 {
        return Ok(circuit.clone());
    }
    let n = circuit.n_qubits();
    let mut rebuilt = NoisyCircuit::new(n, circuit.initial_state())?;
    for op in circuit.ops() {
        let noise = if op.gate.is_two_qubit() {
            Some(NoiseSite::new(n, op.gate.qubits(), p, fire.clone())?)
        } else {
            None
        };
        rebuilt.push(op.gate.clone(), noise)?;
    }
    rebuilt.set_mode_permutation(circuit.mode_permutation().to_vec())?;
    Ok(rebuilt)
}

/// Jordan-Wigner Pauli components of the Fermi-Hubbard Hamiltonian
/// H = -t sum over bonds and spins (hop) + u sum_i n_up n_down, on qubit
/// positions through `ordering` (entry q = mode held by qubit q).
///
/// Includes the constant (identity) component from the interaction terms;
/// callers measuring observables usually skip it.
pub fn hamiltonian_terms(
    lx: usize,
    ly: usize,
    t: f64,
    u: f64,
    ordering: &[usize],
) -> Result<Vec<SignedPauliTerm>> {
    let n_sites = lx * ly;
    let n = 2 * n_sites;
    if ordering.len() != n {
        return Err(Error::LengthMismatch {
            left: ordering.len(),
            right: n,
        });
    }
    let mut pos_of_mode = vec![usize::MAX; n];
    for (q, &m) in ordering.iter().enumerate() {
        if m >= n || pos_of_mode[m] != usize::MAX {
            return Err(Error::InvalidArgument(
                "ordering is not a permutation".into(),
            ));
        }
        pos_of_mode[m] = q;
    }

    use std::collections::BTreeMap;
    let mut acc: BTreeMap<PauliString, f64> = BTreeMap::new();
    let mut add = |x: u64, z: u64, w: f64| {
        let s = PauliString::from_bits(n, x, z).unwrap();
        *acc.entry(s).or_default() += w;
    };

    // lattice edges, open boundaries
    let site = |x: usize, y: usize| y * lx + x;
    let mut edges = Vec::new();
    for y in 0..ly {
        for x in 0..lx {
            if x + 1 < lx {
                edges.push((site(x, y), site(x + 1, y)));
            }
            if y + 1 < ly {
                edges.push((site(x, y), site(x, y + 1)));
            }
        }
    }

    if t != 0.0 {
        for &(i, j) in &edges {
            for spin in 0..2 {
                let a = pos_of_mode[2 * i + spin];
                let b = pos_of_mode[2 * j + spin];
                let (lo, hi) = (a.min(b), a.max(b));
                let mut zchain = 0u64;
                for q in lo + 1..hi {
                    zchain |= 1 << q;
                }
                let ends = (1u64 << lo) | (1u64 << hi);
                // XZ..ZX and YZ..ZY halves of the hopping term
                add(ends, zchain, -t / 2.0);
                add(ends, zchain | ends, -t / 2.0);
            }
        }
    }

    if u != 0.0 {
        for i in 0..n_sites {
            let a = pos_of_mode[2 * i];
            let b = pos_of_mode[2 * i + 1];
            // u n_up n_down = u/4 (I - Z_a - Z_b + Z_a Z_b)
            add(0, 0, u / 4.0);
            add(0, 1 << a, -u / 4.0);
            add(0, 1 << b, -u / 4.0);
            add(0, (1 << a) | (1 << b), u / 4.0);
        }
    }

    Ok(acc
        .into_iter()
        .filter(|(_, w)| w.abs() > 1e-15)
        .map(|(s, w)| SignedPauliTerm::new(w, s))
        .collect())
}
