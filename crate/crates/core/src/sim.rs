//! Exact density-matrix evolution under gates and Pauli channels, with an
//! error-count-resolved mode and a pure-state Monte Carlo trajectory engine.
//!
//! Channels are applied as weight-convolutions over Pauli conjugations of the
//! density matrix; Kraus operators are never materialised. The count-resolved
//! mode carries one weighted density matrix per number of channel firings,
//! updated per noise site as rho_l <- (1-p) rho_l + p J1(rho_{l-1}).

use num_complex::Complex64;
use rand::Rng;

use crate::channel::PauliChannel;
use crate::error::{Error, Result};
use crate::pauli::{commutes, multiply, PauliString, SignedPauliTerm};
use crate::quasi::{decompose, QuasiDecomposition};

/// Exact simulation is capped well below the packed-string limit: a 12-qubit
/// density matrix already holds 2^24 complex entries.
pub const MAX_SIM_QUBITS: usize = 12;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn i_pow(e: u32) -> Complex64 {
    match e % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn parity(v: u64) -> bool {
    !v.count_ones().is_multiple_of(2)
}

/// Dense 2^n x 2^n complex state, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    dim: usize,
    amps: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_basis_state(n_qubits: usize, basis: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_SIM_QUBITS {
            return Err(Error::QubitLimit(n_qubits, MAX_SIM_QUBITS));
        }
        let dim = 1usize << n_qubits;
        if basis as usize >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis state {basis} outside register of {n_qubits} qubits"
            )));
        }
        let mut amps = vec![C0; dim * dim];
        amps[basis as usize * dim + basis as usize] = C1;
        Ok(DensityMatrix {
            n_qubits,
            dim,
            amps,
        })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let mut rho = DensityMatrix::from_basis_state(n_qubits, 0)?;
        let dim = rho.dim;
        rho.amps.fill(C0);
        let w = Complex64::new(1.0 / dim as f64, 0.0);
        for r in 0..dim {
            rho.amps[r * dim + r] = w;
        }
        Ok(rho)
    }

    pub fn from_pure_state(state: &StateVector) -> Self {
        let dim = state.amps.len();
        let mut amps = vec![C0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                amps[r * dim + c] = state.amps[r] * state.amps[c].conj();
            }
        }
        DensityMatrix {
            n_qubits: state.n_qubits,
            dim,
            amps,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|r| self.amps[r * self.dim + r].re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_rc|^2 for Hermitian rho
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                let d = (self.amps[r * self.dim + c] - self.amps[c * self.dim + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    fn zeroed_like(&self) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits,
            dim: self.dim,
            amps: vec![C0; self.amps.len()],
        }
    }

    fn assign_scaled(&mut self, src: &DensityMatrix, s: f64) {
        for (d, a) in self.amps.iter_mut().zip(&src.amps) {
            *d = a * s;
        }
    }

    fn scale_in_place(&mut self, s: f64) {
        for a in self.amps.iter_mut() {
            *a *= s;
        }
    }

    /// self += coeff * P src P for the phase-free Pauli with the given bits.
    fn add_conjugated(&mut self, src: &DensityMatrix, x: u64, z: u64, coeff: f64) {
        let dim = self.dim;
        let x = x as usize;
        for r in 0..dim {
            let row = r * dim;
            let dest_row = (r ^ x) * dim;
            let zr = parity(z & r as u64);
            for c in 0..dim {
                let sign = zr ^ parity(z & c as u64);
                let v = src.amps[row + c] * if sign { -coeff } else { coeff };
                self.amps[dest_row + (c ^ x)] += v;
            }
        }
    }

    /// Applies a physical or signed local channel in place using a scratch
    /// buffer: rho <- keep * rho + scale * sum_k w_k P_k rho P_k.
    fn apply_mixture(
        &mut self,
        keep: f64,
        scale: f64,
        terms: &[(f64, PauliString)],
        scratch: &mut DensityMatrix,
    ) {
        scratch.assign_scaled(self, keep);
        for (w, s) in terms {
            scratch.add_conjugated(self, s.x_bits(), s.z_bits(), scale * w);
        }
        std::mem::swap(&mut self.amps, &mut scratch.amps);
    }

    pub fn apply_gate(&mut self, gate: &Gate) {
        match gate {
            Gate::One { qubit, u } => self.apply_u2(*qubit, u),
            Gate::Two { a, b, u } => self.apply_u4(*a, *b, u),
        }
    }

    fn apply_u2(&mut self, q: usize, u: &[[Complex64; 2]; 2]) {
        let dim = self.dim;
        let bq = 1usize << q;
        // left multiply: rows
        for r in 0..dim {
            if r & bq != 0 {
                continue;
            }
            for c in 0..dim {
                let i0 = r * dim + c;
                let i1 = (r | bq) * dim + c;
                let (v0, v1) = (self.amps[i0], self.amps[i1]);
                self.amps[i0] = u[0][0] * v0 + u[0][1] * v1;
                self.amps[i1] = u[1][0] * v0 + u[1][1] * v1;
            }
        }
        // right multiply by the adjoint: columns
        for c in 0..dim {
            if c & bq != 0 {
                continue;
            }
            for r in 0..dim {
                let i0 = r * dim + c;
                let i1 = r * dim + (c | bq);
                let (v0, v1) = (self.amps[i0], self.amps[i1]);
                self.amps[i0] = v0 * u[0][0].conj() + v1 * u[0][1].conj();
                self.amps[i1] = v0 * u[1][0].conj() + v1 * u[1][1].conj();
            }
        }
    }

    fn apply_u4(&mut self, a: usize, b: usize, u: &[[Complex64; 4]; 4]) {
        let dim = self.dim;
        let (ba, bb) = (1usize << a, 1usize << b);
        let idx = |base: usize, l: usize| -> usize {
            base | if l & 2 != 0 { ba } else { 0 } | if l & 1 != 0 { bb } else { 0 }
        };
        for r in 0..dim {
            if r & (ba | bb) != 0 {
                continue;
            }
            for c in 0..dim {
                let mut v = [C0; 4];
                for (l, value) in v.iter_mut().enumerate() {
                    *value = self.amps[idx(r, l) * dim + c];
                }
                for (l, row) in u.iter().enumerate() {
                    let mut acc = C0;
                    for (m, value) in v.iter().enumerate() {
                        acc += row[m] * value;
                    }
                    self.amps[idx(r, l) * dim + c] = acc;
                }
            }
        }
        for c in 0..dim {
            if c & (ba | bb) != 0 {
                continue;
            }
            for r in 0..dim {
                let row = r * dim;
                let mut v = [C0; 4];
                for (l, value) in v.iter_mut().enumerate() {
                    *value = self.amps[row + idx(c, l)];
                }
                for (l, urow) in u.iter().enumerate() {
                    let mut acc = C0;
                    for (m, value) in v.iter().enumerate() {
                        acc += value * urow[m].conj();
                    }
                    self.amps[row + idx(c, l)] = acc;
                }
            }
        }
    }

    /// Tr(G rho) for a phase-free Pauli label (Hermitian convention).
    pub fn expectation_pauli(&self, g: &PauliString) -> Result<f64> {
        if g.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: g.n_qubits(),
                right: self.n_qubits,
            });
        }
        let x = g.x_bits() as usize;
        let z = g.z_bits();
        let mut acc = C0;
        for k in 0..self.dim {
            let v = self.amps[k * self.dim + (k ^ x)];
            acc += if parity(z & k as u64) { -v } else { v };
        }
        acc *= i_pow((g.x_bits() & g.z_bits()).count_ones());
        Ok(acc.re)
    }
}

/// Pure state used by the trajectory engine.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_basis_state(n_qubits: usize, basis: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 2 * MAX_SIM_QUBITS {
            return Err(Error::QubitLimit(n_qubits, 2 * MAX_SIM_QUBITS));
        }
        let dim = 1usize << n_qubits;
        if basis as usize >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis state {basis} outside register of {n_qubits} qubits"
            )));
        }
        let mut amps = vec![C0; dim];
        amps[basis as usize] = C1;
        Ok(StateVector { n_qubits, amps })
    }

    pub fn apply_gate(&mut self, gate: &Gate) {
        match gate {
            Gate::One { qubit, u } => {
                let bq = 1usize << qubit;
                for i in 0..self.amps.len() {
                    if i & bq != 0 {
                        continue;
                    }
                    let (v0, v1) = (self.amps[i], self.amps[i | bq]);
                    self.amps[i] = u[0][0] * v0 + u[0][1] * v1;
                    self.amps[i | bq] = u[1][0] * v0 + u[1][1] * v1;
                }
            }
            Gate::Two { a, b, u } => {
                let (ba, bb) = (1usize << a, 1usize << b);
                let idx = |base: usize, l: usize| -> usize {
                    base | if l & 2 != 0 { ba } else { 0 } | if l & 1 != 0 { bb } else { 0 }
                };
                for i in 0..self.amps.len() {
                    if i & (ba | bb) != 0 {
                        continue;
                    }
                    let mut v = [C0; 4];
                    for (l, value) in v.iter_mut().enumerate() {
                        *value = self.amps[idx(i, l)];
                    }
                    for (l, row) in u.iter().enumerate() {
                        let mut acc = C0;
                        for (m, value) in v.iter().enumerate() {
                            acc += row[m] * value;
                        }
                        self.amps[idx(i, l)] = acc;
                    }
                }
            }
        }
    }

    /// Applies a phase-free Pauli, dropping the irrelevant global phase.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        let x = p.x_bits() as usize;
        let z = p.z_bits();
        if x == 0 {
            for (i, a) in self.amps.iter_mut().enumerate() {
                if parity(z & i as u64) {
                    *a = -*a;
                }
            }
            return;
        }
        let dim = self.amps.len();
        for i in 0..dim {
            let j = i ^ x;
            if j < i {
                continue;
            }
            let (vi, vj) = (self.amps[i], self.amps[j]);
            self.amps[j] = if parity(z & i as u64) { -vi } else { vi };
            self.amps[i] = if parity(z & j as u64) { -vj } else { vj };
        }
    }

    pub fn expectation_pauli(&self, g: &PauliString) -> Result<f64> {
        if g.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: g.n_qubits(),
                right: self.n_qubits,
            });
        }
        let x = g.x_bits() as usize;
        let z = g.z_bits();
        let mut acc = C0;
        for (i, a) in self.amps.iter().enumerate() {
            let v = self.amps[i ^ x].conj() * a;
            acc += if parity(z & i as u64) { -v } else { v };
        }
        acc *= i_pow((g.x_bits() & g.z_bits()).count_ones());
        Ok(acc.re)
    }
}

/// One- or two-qubit unitary. Two-qubit matrices are indexed by
/// `(bit_a << 1) | bit_b` for the listed qubit order `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    One {
        qubit: usize,
        u: [[Complex64; 2]; 2],
    },
    Two {
        a: usize,
        b: usize,
        u: [[Complex64; 4]; 4],
    },
}

impl Gate {
    pub fn x(qubit: usize) -> Gate {
        Gate::One {
            qubit,
            u: [[C0, C1], [C1, C0]],
        }
    }

    pub fn hadamard(qubit: usize) -> Gate {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Gate::One {
            qubit,
            u: [[h, h], [h, -h]],
        }
    }

    /// Number-conserving hopping rotation in the {|01>, |10>} block.
    pub fn givens(a: usize, b: usize, theta: f64, phi: f64) -> Gate {
        let c = Complex64::new(theta.cos(), 0.0);
        let s = theta.sin();
        let e_plus = Complex64::new(0.0, phi).exp();
        let e_minus = Complex64::new(0.0, -phi).exp();
        let mut u = [[C0; 4]; 4];
        u[0][0] = C1;
        u[3][3] = C1;
        u[1][1] = c;
        u[1][2] = -s * e_plus;
        u[2][1] = s * e_minus;
        u[2][2] = c;
        Gate::Two { a, b, u }
    }

    /// Diagonal interaction gate: a phase on the doubly occupied state.
    pub fn interaction(a: usize, b: usize, phase: f64) -> Gate {
        let mut u = [[C0; 4]; 4];
        u[0][0] = C1;
        u[1][1] = C1;
        u[2][2] = C1;
        u[3][3] = Complex64::new(0.0, -phase).exp();
        Gate::Two { a, b, u }
    }

    /// Fermionic swap: exchange occupations with a -1 phase on |11>.
    pub fn fermionic_swap(a: usize, b: usize) -> Gate {
        let mut u = [[C0; 4]; 4];
        u[0][0] = C1;
        u[1][2] = C1;
        u[2][1] = C1;
        u[3][3] = -C1;
        Gate::Two { a, b, u }
    }

    pub fn identity_two(a: usize, b: usize) -> Gate {
        let mut u = [[C0; 4]; 4];
        for (l, row) in u.iter_mut().enumerate() {
            row[l] = C1;
        }
        Gate::Two { a, b, u }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::One { qubit, .. } => vec![*qubit],
            Gate::Two { a, b, .. } => vec![*a, *b],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Two { .. })
    }
}

/// Noise attached to one circuit location: with probability `p` the local
/// `fire` channel is applied, otherwise nothing happens. For group errors the
/// fire channel is the uniform distribution over the whole group (identity
/// element included), so `p` is the group-error rate, not the non-identity
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSite {
    qubits: Vec<usize>,
    p: f64,
    fire: PauliChannel,
    fire_global: Vec<(f64, PauliString)>,
    fire_cumulative: Vec<f64>,
}

impl NoiseSite {
    pub fn new(n_qubits: usize, qubits: Vec<usize>, p: f64, fire: PauliChannel) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        if fire.n_qubits() != qubits.len() {
            return Err(Error::SizeMismatch {
                left: fire.n_qubits(),
                right: qubits.len(),
            });
        }
        for (i, a) in qubits.iter().enumerate() {
            if qubits[i + 1..].contains(a) {
                return Err(Error::InvalidArgument(format!(
                    "noise site lists qubit {a} twice"
                )));
            }
        }
        if !fire.is_physical() {
            return Err(Error::InvalidArgument(
                "fire channel must be physical".into(),
            ));
        }
        let mut fire_global = Vec::with_capacity(fire.len());
        let mut fire_cumulative = Vec::with_capacity(fire.len());
        let mut acc = 0.0;
        for (s, w) in fire.terms() {
            fire_global.push((w, s.embed(n_qubits, &qubits)?));
            acc += w;
            fire_cumulative.push(acc);
        }
        if let Some(last) = fire_cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(NoiseSite {
            qubits,
            p,
            fire,
            fire_global,
            fire_cumulative,
        })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn fire(&self) -> &PauliChannel {
        &self.fire
    }

    /// Probability that a firing applies a non-identity Pauli.
    pub fn non_identity_fraction(&self) -> f64 {
        self.fire.non_identity_probability()
    }

    /// Local channel (1-p) I + p fire as an explicit distribution. Fails
    /// when the site is a pure non-identity error (p = 1 with no identity
    /// weight in the fire channel).
    pub fn local_channel(&self) -> Result<PauliChannel> {
        self.fire.scale_error(self.p)
    }

    fn sample_fire<R: Rng + ?Sized>(&self, rng: &mut R) -> &PauliString {
        let u: f64 = rng.gen();
        let idx = match self
            .fire_cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) => (i + 1).min(self.fire_global.len() - 1),
            Err(i) => i.min(self.fire_global.len() - 1),
        };
        &self.fire_global[idx].1
    }
}

/// One gate with optional trailing noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitOp {
    pub gate: Gate,
    pub noise: Option<NoiseSite>,
}

/// Ordered gate list with per-gate noise sites and a tracked mode
/// permutation (entry q is the mode held by qubit q after the circuit).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCircuit {
    n_qubits: usize,
    initial: u64,
    ops: Vec<CircuitOp>,
    mode_permutation: Vec<usize>,
}

impl NoisyCircuit {
    pub fn new(n_qubits: usize, initial: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_SIM_QUBITS {
            return Err(Error::QubitLimit(n_qubits, MAX_SIM_QUBITS));
        }
        Ok(NoisyCircuit {
            n_qubits,
            initial,
            ops: Vec::new(),
            mode_permutation: (0..n_qubits).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn initial_state(&self) -> u64 {
        self.initial
    }

    pub fn set_initial_state(&mut self, basis: u64) -> Result<()> {
        if basis >> self.n_qubits != 0 {
            return Err(Error::InvalidArgument(format!(
                "basis state {basis} outside register of {} qubits",
                self.n_qubits
            )));
        }
        self.initial = basis;
        Ok(())
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    pub fn push(&mut self, gate: Gate, noise: Option<NoiseSite>) -> Result<()> {
        for q in gate.qubits() {
            if q >= self.n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "gate qubit {q} outside register of {}",
                    self.n_qubits
                )));
            }
        }
        self.ops.push(CircuitOp { gate, noise });
        Ok(())
    }

    pub fn mode_permutation(&self) -> &[usize] {
        &self.mode_permutation
    }

    pub fn set_mode_permutation(&mut self, perm: Vec<usize>) -> Result<()> {
        let mut seen = vec![false; self.n_qubits];
        if perm.len() != self.n_qubits {
            return Err(Error::LengthMismatch {
                left: perm.len(),
                right: self.n_qubits,
            });
        }
        for &m in &perm {
            if m >= self.n_qubits || seen[m] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[m] = true;
        }
        self.mode_permutation = perm;
        Ok(())
    }

    pub fn gate_count(&self) -> usize {
        self.ops.len()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.ops.iter().filter(|op| op.gate.is_two_qubit()).count()
    }

    /// Mean circuit error count: the sum of site firing probabilities.
    pub fn mean_error_count(&self) -> f64 {
        self.ops
            .iter()
            .filter_map(|op| op.noise.as_ref())
            .map(|s| s.p)
            .sum()
    }

    /// Mean count of non-identity errors per run.
    pub fn mean_nonidentity_count(&self) -> f64 {
        self.ops
            .iter()
            .filter_map(|op| op.noise.as_ref())
            .map(|s| s.p * s.non_identity_fraction())
            .sum()
    }

    /// Replaces every noise site through `f`, keeping the gates.
    pub fn map_noise(
        &self,
        mut f: impl FnMut(&NoiseSite) -> Result<Option<NoiseSite>>,
    ) -> Result<NoisyCircuit> {
        let mut out = self.clone();
        for op in out.ops.iter_mut() {
            if let Some(site) = op.noise.as_ref() {
                op.noise = f(site)?;
            }
        }
        Ok(out)
    }

    /// Rewrites each noise site to its detectable remainder with respect to
    /// a global symmetry: the fraction d of fire weight anticommuting with
    /// the symmetry survives (renormalised), the rest is dropped, and the
    /// firing probability becomes p d. Returns the transformed circuit and
    /// the mean detectable error count.
    pub fn detectable_remainder(&self, symmetry: &PauliString) -> Result<(NoisyCircuit, f64)> {
        if symmetry.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: symmetry.n_qubits(),
                right: self.n_qubits,
            });
        }
        let mut mu_d = 0.0;
        let out = self.map_noise(|site| {
            let local_sym = restrict_to_qubits(symmetry, &site.qubits)?;
            let mut detectable = Vec::new();
            let mut d = 0.0;
            for (s, w) in site.fire.terms() {
                if !commutes(s, &local_sym) {
                    detectable.push((*s, w));
                    d += w;
                }
            }
            if d <= 1e-15 {
                return Ok(None);
            }
            mu_d += site.p * d;
            // anticommuting strings are never the identity, so the fire
            // channel is supported purely on detectable errors
            let fire = PauliChannel::new(
                local_sym.n_qubits(),
                detectable.into_iter().map(|(s, w)| (s, w / d)),
            )?;
            Ok(Some(NoiseSite::new(
                self.n_qubits,
                site.qubits.clone(),
                site.p * d,
                fire,
            )?))
        })?;
        Ok((out, mu_d))
    }
}

/// Restriction of a global Pauli string to an ordered qubit subset.
pub fn restrict_to_qubits(global: &PauliString, qubits: &[usize]) -> Result<PauliString> {
    let mut x = 0u64;
    let mut z = 0u64;
    for (local, &q) in qubits.iter().enumerate() {
        if q >= global.n_qubits() {
            return Err(Error::InvalidArgument(format!(
                "qubit {q} outside register of {}",
                global.n_qubits()
            )));
        }
        x |= ((global.x_bits() >> q) & 1) << local;
        z |= ((global.z_bits() >> q) & 1) << local;
    }
    PauliString::from_bits(qubits.len(), x, z)
}

fn check_scale(circuit: &NoisyCircuit, scale: f64) -> Result<()> {
    if scale < 0.0 {
        return Err(Error::InvalidProbability(scale));
    }
    for op in &circuit.ops {
        if let Some(site) = &op.noise {
            let q = site.p * scale;
            // q is a firing probability; the scaled error probability of the
            // site channel must stay below 1
            if q > 1.0 || (q > 0.0 && q * site.non_identity_fraction() >= 1.0) {
                return Err(Error::InvalidProbability(q));
            }
        }
    }
    Ok(())
}

/// Exact final state after interleaved gates and scaled channels. `scale`
/// multiplies every site's firing probability.
pub fn run_exact(circuit: &NoisyCircuit, scale: f64) -> Result<DensityMatrix> {
    check_scale(circuit, scale)?;
    let mut rho = DensityMatrix::from_basis_state(circuit.n_qubits, circuit.initial)?;
    let mut scratch = rho.zeroed_like();
    for op in &circuit.ops {
        rho.apply_gate(&op.gate);
        if let Some(site) = &op.noise {
            let q = site.p * scale;
            if q > 0.0 {
                rho.apply_mixture(1.0 - q, q, &site.fire_global, &mut scratch);
            }
        }
    }
    Ok(rho)
}

/// sum_k coef_k Tr(G_k rho).
pub fn expectation(state: &DensityMatrix, observable: &[SignedPauliTerm]) -> Result<f64> {
    let mut acc = 0.0;
    for term in observable {
        acc += term.coefficient * state.expectation_pauli(&term.string)?;
    }
    Ok(acc)
}

/// Expectation values in the passed and failed branches of a symmetry
/// verification, plus the pass probability.
///
/// The observable must commute with the symmetry. When the failed branch is
/// empty its expectation is reported as 0.
pub fn symmetry_partition(
    state: &DensityMatrix,
    symmetry: &PauliString,
    sector: i8,
    observable: &PauliString,
) -> Result<(f64, f64, f64)> {
    if !commutes(symmetry, observable) {
        return Err(Error::NonCommutingObservable);
    }
    if sector != 1 && sector != -1 {
        return Err(Error::InvalidArgument(format!(
            "sector must be +/-1, got {sector}"
        )));
    }
    let s = f64::from(sector);
    let sym_expect = state.expectation_pauli(symmetry)?;
    let p_pass = 0.5 * (1.0 + s * sym_expect);
    if p_pass < 1e-12 {
        return Err(Error::EmptyBranch(p_pass));
    }
    let o_expect = state.expectation_pauli(observable)?;
    let (phase, os) = multiply(observable, symmetry)?;
    let os_expect = phase.as_real() * state.expectation_pauli(&os)?;
    let pass_raw = 0.5 * (o_expect + s * os_expect);
    let fail_raw = 0.5 * (o_expect - s * os_expect);
    let p_fail = 1.0 - p_pass;
    let o_pass = pass_raw / p_pass;
    let o_fail = if p_fail < 1e-12 {
        0.0
    } else {
        fail_raw / p_fail
    };
    Ok((o_pass, o_fail, p_pass))
}

/// Options for the error-count-resolved run.
#[derive(Debug, Clone, Copy)]
pub struct CountResolvedOpts {
    /// Highest tracked firing count; `None` picks the smallest l with a
    /// Poisson tail below 1e-6, capped at 10.
    pub l_max: Option<usize>,
    /// Reject circuits whose sites have unequal firing probabilities.
    pub require_uniform: bool,
}

impl Default for CountResolvedOpts {
    fn default() -> Self {
        CountResolvedOpts {
            l_max: None,
            require_uniform: true,
        }
    }
}

/// Exact state partitioned by the number of channel firings. Layer l holds
/// the probability-weighted state conditioned on exactly l firings.
#[derive(Debug, Clone)]
pub struct CountResolvedState {
    layers: Vec<DensityMatrix>,
    truncated_mass: f64,
}

impl CountResolvedState {
    pub fn l_max(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Probability of exactly l firings.
    pub fn weight(&self, l: usize) -> f64 {
        self.layers[l].trace()
    }

    /// Conditional expectation given exactly l firings.
    pub fn conditional_expectation(&self, l: usize, observable: &[SignedPauliTerm]) -> Result<f64> {
        let w = self.weight(l);
        if w < 1e-14 {
            return Err(Error::EmptyBranch(w));
        }
        Ok(expectation(&self.layers[l], observable)? / w)
    }

    /// Weighted sum over the tracked layers (the truncated tail is absent).
    pub fn total_expectation(&self, observable: &[SignedPauliTerm]) -> Result<f64> {
        let mut acc = 0.0;
        for layer in &self.layers {
            acc += expectation(layer, observable)?;
        }
        Ok(acc)
    }
}

fn poisson_default_l_max(mu: f64) -> usize {
    let mut term = (-mu).exp();
    let mut cdf = term;
    for l in 0..10usize {
        if 1.0 - cdf < 1e-6 {
            return l;
        }
        term *= mu / (l + 1) as f64;
        cdf += term;
    }
    10
}

/// Evolves the circuit keeping states resolved by firing count up to l_max.
pub fn run_count_resolved(
    circuit: &NoisyCircuit,
    scale: f64,
    opts: CountResolvedOpts,
) -> Result<CountResolvedState> {
    check_scale(circuit, scale)?;
    let probs: Vec<f64> = circuit
        .ops
        .iter()
        .filter_map(|op| op.noise.as_ref())
        .map(|s| s.p * scale)
        .collect();
    if opts.require_uniform && !probs.is_empty() {
        let p0 = probs[0];
        if probs.iter().any(|&p| (p - p0).abs() > 1e-12) {
            return Err(Error::NonUniformSites);
        }
    }
    let mu: f64 = probs.iter().sum();
    let l_max = opts.l_max.unwrap_or_else(|| poisson_default_l_max(mu));

    let rho0 = DensityMatrix::from_basis_state(circuit.n_qubits, circuit.initial)?;
    let mut layers = vec![rho0.zeroed_like(); l_max + 1];
    layers[0] = rho0;
    let mut truncated = 0.0;
    let mut occupied = 0usize;
    let mut scratch = layers[0].zeroed_like();

    for op in &circuit.ops {
        for layer in layers.iter_mut().take(occupied + 1) {
            layer.apply_gate(&op.gate);
        }
        if let Some(site) = &op.noise {
            let q = site.p * scale;
            if q == 0.0 {
                continue;
            }
            truncated += q * layers[l_max].trace();
            for l in (1..=l_max.min(occupied + 1)).rev() {
                // layers[l] <- (1-q) layers[l] + q Fire(layers[l-1])
                let (lower, upper) = layers.split_at_mut(l);
                let dst = &mut upper[0];
                dst.scale_in_place(1.0 - q);
                scratch.amps.fill(C0);
                for (w, s) in &site.fire_global {
                    scratch.add_conjugated(&lower[l - 1], s.x_bits(), s.z_bits(), q * w);
                }
                for (d, a) in dst.amps.iter_mut().zip(&scratch.amps) {
                    *d += a;
                }
            }
            layers[0].scale_in_place(1.0 - q);
            occupied = (occupied + 1).min(l_max);
        }
    }
    Ok(CountResolvedState {
        layers,
        truncated_mass: truncated,
    })
}

/// Per-trajectory mitigation instructions: one optional sampleable insertion
/// per circuit op (already embedded on global qubits) and an optional
/// symmetry check with the noiseless sector of the initial state.
#[derive(Debug, Clone)]
pub struct TrajectoryPlan {
    observable: PauliString,
    insertions: Vec<Option<QuasiDecomposition>>,
    symmetry: Option<(PauliString, i8)>,
}

/// Outcome of a single Monte Carlo trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    /// Expectation of the observable in the sampled pure state.
    pub value: f64,
    /// Product of quasi-probability signs along the path.
    pub sign: i8,
    /// Whether the measured symmetry sector matched the adjusted criterion.
    pub passed: bool,
}

impl TrajectoryPlan {
    /// No mitigation: direct noisy sampling.
    pub fn direct(circuit: &NoisyCircuit, observable: PauliString) -> Result<TrajectoryPlan> {
        Ok(TrajectoryPlan {
            observable,
            insertions: vec![None; circuit.ops.len()],
            symmetry: None,
        })
    }

    /// Full cancellation: after every noise site, sample from the exact
    /// inverse of that site's local channel.
    pub fn full_inverse(circuit: &NoisyCircuit, observable: PauliString) -> Result<TrajectoryPlan> {
        let mut insertions = Vec::with_capacity(circuit.ops.len());
        for op in &circuit.ops {
            match &op.noise {
                None => insertions.push(None),
                Some(site) => {
                    let inverse = site.local_channel()?.inverse()?;
                    insertions.push(Some(embed_decomposition(
                        &inverse,
                        circuit.n_qubits,
                        &site.qubits,
                    )?));
                }
            }
        }
        Ok(TrajectoryPlan {
            observable,
            insertions,
            symmetry: None,
        })
    }

    /// Signed transformation of every site to its detectable remainder,
    /// followed by a symmetry check against the initial sector.
    pub fn detectable_transform(
        circuit: &NoisyCircuit,
        observable: PauliString,
        symmetry: PauliString,
    ) -> Result<TrajectoryPlan> {
        let sector = initial_sector(circuit, &symmetry)?;
        let mut insertions = Vec::with_capacity(circuit.ops.len());
        for op in &circuit.ops {
            match &op.noise {
                None => insertions.push(None),
                Some(site) => {
                    let local_sym = restrict_to_qubits(&symmetry, &site.qubits)?;
                    let gc = group_channel_from_site(site)?;
                    let (qsub, detectable) =
                        crate::pauli::partition_detectable(gc.group(), &[local_sym])?;
                    if detectable.is_empty() {
                        // fully undetectable noise: remove it outright
                        let inverse = site.local_channel()?.inverse()?;
                        insertions.push(Some(embed_decomposition(
                            &inverse,
                            circuit.n_qubits,
                            &site.qubits,
                        )?));
                        continue;
                    }
                    let e_ord = gc.group().order() as f64;
                    let p_d = site.p * (e_ord - qsub.order() as f64) / e_ord;
                    let target = crate::channel::detectable_channel(p_d, gc.group(), &qsub)?;
                    let map = crate::channel::transform_map(&gc, &target)?;
                    insertions.push(Some(embed_decomposition(
                        &map,
                        circuit.n_qubits,
                        &site.qubits,
                    )?));
                }
            }
        }
        Ok(TrajectoryPlan {
            observable,
            insertions,
            symmetry: Some((symmetry, sector)),
        })
    }

    /// Signed reduction of every site's error rate by the factor `lambda`:
    /// after each site, sample from the map taking the local channel at rate
    /// p to the same channel at rate p / lambda.
    pub fn rate_reduction(
        circuit: &NoisyCircuit,
        observable: PauliString,
        lambda: f64,
    ) -> Result<TrajectoryPlan> {
        if lambda <= 1.0 {
            return Err(Error::InvalidArgument(
                "rate reduction needs lambda > 1".into(),
            ));
        }
        let mut insertions = Vec::with_capacity(circuit.ops.len());
        for op in &circuit.ops {
            match &op.noise {
                None => insertions.push(None),
                Some(site) => {
                    let local = site.local_channel()?;
                    let reduced = site.fire.scale_error(site.p / lambda)?;
                    let map = crate::channel::compose(&reduced, &local.inverse()?)?;
                    insertions.push(Some(embed_decomposition(
                        &map,
                        circuit.n_qubits,
                        &site.qubits,
                    )?));
                }
            }
        }
        Ok(TrajectoryPlan {
            observable,
            insertions,
            symmetry: None,
        })
    }

    /// Symmetry verification without any quasi-probability insertions.
    pub fn verify_only(
        circuit: &NoisyCircuit,
        observable: PauliString,
        symmetry: PauliString,
    ) -> Result<TrajectoryPlan> {
        let sector = initial_sector(circuit, &symmetry)?;
        Ok(TrajectoryPlan {
            observable,
            insertions: vec![None; circuit.ops.len()],
            symmetry: Some((symmetry, sector)),
        })
    }

    /// Product of the insertion one-norms: the trajectory estimator scale Q.
    pub fn total_one_norm(&self) -> f64 {
        self.insertions
            .iter()
            .flatten()
            .map(|d| d.one_norm())
            .product()
    }
}

fn initial_sector(circuit: &NoisyCircuit, symmetry: &PauliString) -> Result<i8> {
    if symmetry.x_bits() != 0 {
        return Err(Error::InvalidArgument(
            "initial sector is only defined for Z-type symmetries on basis states".into(),
        ));
    }
    Ok(if parity(symmetry.z_bits() & circuit.initial) {
        -1
    } else {
        1
    })
}

/// Reads a noise site as a group error channel or reports NotGroupChannel.
fn group_channel_from_site(site: &NoiseSite) -> Result<crate::channel::GroupChannel> {
    let elements: Vec<PauliString> = site.fire.terms().map(|(s, _)| *s).collect();
    let expected = 1.0 / elements.len() as f64;
    for (_, w) in site.fire.terms() {
        if (w - expected).abs() > 1e-12 {
            return Err(Error::NotGroupChannel);
        }
    }
    let group = crate::pauli::subgroup_from_elements(site.fire.n_qubits(), &elements)
        .map_err(|_| Error::NotGroupChannel)?;
    crate::channel::GroupChannel::new(site.p, group)
}

fn embed_decomposition(
    map: &PauliChannel,
    n_qubits: usize,
    qubits: &[usize],
) -> Result<QuasiDecomposition> {
    let embedded = PauliChannel::new(
        n_qubits,
        map.terms()
            .map(|(s, w)| Ok((s.embed(n_qubits, qubits)?, w)))
            .collect::<Result<Vec<_>>>()?,
    )?;
    decompose(&embedded)
}

/// Runs one pure-state trajectory with sampled noise firings and optional
/// signed insertions, returning the observable value, the accumulated sign
/// and the symmetry verdict.
pub fn mc_trajectory<R: Rng + ?Sized>(
    circuit: &NoisyCircuit,
    plan: &TrajectoryPlan,
    rng: &mut R,
) -> Result<Trajectory> {
    if plan.insertions.len() != circuit.ops.len() {
        return Err(Error::LengthMismatch {
            left: plan.insertions.len(),
            right: circuit.ops.len(),
        });
    }
    let mut state = StateVector::from_basis_state(circuit.n_qubits, circuit.initial)?;
    let mut sign = 1i8;
    let mut expected_sector = plan.symmetry.as_ref().map(|(_, s)| *s);
    for (op, insertion) in circuit.ops.iter().zip(&plan.insertions) {
        state.apply_gate(&op.gate);
        if let Some(site) = &op.noise {
            if rng.gen::<f64>() < site.p {
                let pauli = site.sample_fire(rng);
                state.apply_pauli(pauli);
            }
        }
        if let Some(dec) = insertion {
            let (pauli, s) = dec.sample(rng);
            state.apply_pauli(&pauli);
            sign *= s;
            if let (Some((sym, _)), Some(sector)) = (&plan.symmetry, expected_sector.as_mut()) {
                if !commutes(&pauli, sym) {
                    *sector = -*sector;
                }
            }
        }
    }
    let value = state.expectation_pauli(&plan.observable)?;
    let passed = match (&plan.symmetry, expected_sector) {
        (Some((sym, _)), Some(sector)) => {
            let measured = state.expectation_pauli(sym)?;
            (measured >= 0.0) == (sector > 0)
        }
        _ => true,
    };
    Ok(Trajectory {
        value,
        sign,
        passed,
    })
}

/// Draws a +/-1 measurement outcome for a Pauli observable with the given
/// per-trajectory expectation value.
pub fn sample_outcome<R: Rng + ?Sized>(value: f64, rng: &mut R) -> i8 {
    let p_plus = 0.5 * (1.0 + value.clamp(-1.0, 1.0));
    if rng.gen::<f64>() < p_plus {
        1
    } else {
        -1
    }
}
