//! Phase-free Pauli-string algebra.
//!
//! Strings are stored in symplectic form (one X bit and one Z bit per qubit),
//! so products, commutators and subgroup spans reduce to XOR arithmetic over
//! GF(2). Scalar phases never live on the strings themselves; they only appear
//! in [`Phase`] return values and in the signed coefficients of
//! [`SignedPauliTerm`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest qubit count representable by the packed form.
pub const MAX_QUBITS: usize = 32;

/// Quarter phase accumulated by Pauli products, stored as an exponent of i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    fn from_exponent(e: i64) -> Self {
        match e.rem_euclid(4) {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn exponent(self) -> u8 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    /// The phase as a real number; panics for the imaginary phases.
    pub fn as_real(self) -> f64 {
        match self {
            Phase::PlusOne => 1.0,
            Phase::MinusOne => -1.0,
            _ => panic!("imaginary phase has no real value"),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;

    // quarter phases multiply by adding their i-exponents
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, other: Phase) -> Phase {
        Phase::from_exponent(i64::from(self.exponent()) + i64::from(other.exponent()))
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::PlusOne => write!(f, "+1"),
            Phase::PlusI => write!(f, "+i"),
            Phase::MinusOne => write!(f, "-1"),
            Phase::MinusI => write!(f, "-i"),
        }
    }
}

/// Phase-free N-qubit Pauli label in symplectic (X-bits, Z-bits) form.
///
/// Qubit `q` corresponds to bit `q` of both masks: `(0,0)` is I, `(1,0)` X,
/// `(0,1)` Z and `(1,1)` Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!((1..=MAX_QUBITS).contains(&n_qubits));
        PauliString {
            n_qubits,
            x: 0,
            z: 0,
        }
    }

    pub fn from_bits(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitLimit(n_qubits, MAX_QUBITS));
        }
        let mask = Self::mask(n_qubits);
        if x & !mask != 0 || z & !mask != 0 {
            return Err(Error::InvalidArgument(format!(
                "bits outside the {n_qubits}-qubit register"
            )));
        }
        Ok(PauliString { n_qubits, x, z })
    }

    /// Single-qubit X/Y/Z embedded into an `n`-qubit register.
    pub fn single(n_qubits: usize, qubit: usize, letter: char) -> Result<Self> {
        let mut letters = vec!['I'; n_qubits];
        if qubit >= n_qubits {
            return Err(Error::InvalidArgument(format!(
                "qubit {qubit} outside register of {n_qubits}"
            )));
        }
        letters[qubit] = letter;
        letters.iter().collect::<String>().parse()
    }

    fn mask(n_qubits: usize) -> u64 {
        if n_qubits == 64 {
            u64::MAX
        } else {
            (1u64 << n_qubits) - 1
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Letter at `qubit` as one of 'I', 'X', 'Y', 'Z'.
    pub fn letter(&self, qubit: usize) -> char {
        match ((self.x >> qubit) & 1, (self.z >> qubit) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Packed (X,Z) bits as a single symplectic vector, X half low.
    pub(crate) fn symplectic(&self) -> u64 {
        self.x | (self.z << self.n_qubits)
    }

    pub(crate) fn from_symplectic(n_qubits: usize, v: u64) -> Self {
        let mask = Self::mask(n_qubits);
        PauliString {
            n_qubits,
            x: v & mask,
            z: (v >> n_qubits) & mask,
        }
    }

    /// Re-embeds a local string into a larger register at the given qubits.
    pub fn embed(&self, n_qubits: usize, qubits: &[usize]) -> Result<Self> {
        if qubits.len() != self.n_qubits {
            return Err(Error::LengthMismatch {
                left: qubits.len(),
                right: self.n_qubits,
            });
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (local, &global) in qubits.iter().enumerate() {
            if global >= n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "qubit {global} outside register of {n_qubits}"
                )));
            }
            x |= ((self.x >> local) & 1) << global;
            z |= ((self.z >> local) & 1) << global;
        }
        PauliString::from_bits(n_qubits, x, z)
    }

    fn check_size(&self, other: &PauliString) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses the textual form "XIZY" with qubit 0 leftmost.
    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitLimit(n, MAX_QUBITS));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, c) in s.chars().enumerate() {
            match c {
                'I' => {}
                'X' => x |= 1 << q,
                'Y' => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                'Z' => z |= 1 << q,
                _ => return Err(Error::ParsePauli(s.to_string())),
            }
        }
        Ok(PauliString { n_qubits: n, x, z })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.letter(q))?;
        }
        Ok(())
    }
}

/// A Pauli string with a real scalar coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedPauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

impl SignedPauliTerm {
    pub fn new(coefficient: f64, string: PauliString) -> Self {
        SignedPauliTerm {
            coefficient,
            string,
        }
    }
}

/// Product of two phase-free labels with the accumulated scalar phase.
///
/// Per qubit the convention is the Hermitian one, `Y = iXZ`, so for example
/// `multiply(X, Z) = (-i, Y)`.
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString)> {
    a.check_size(b)?;
    let x = a.x ^ b.x;
    let z = a.z ^ b.z;
    // i-exponent per qubit: xa*za + xb*zb + 2*za*xb - xc*zc, summed mod 4.
    let e = (a.x & a.z).count_ones() as i64
        + (b.x & b.z).count_ones() as i64
        + 2 * (a.z & b.x).count_ones() as i64
        - (x & z).count_ones() as i64;
    Ok((
        Phase::from_exponent(e),
        PauliString {
            n_qubits: a.n_qubits,
            x,
            z,
        },
    ))
}

/// Commutator sign: +1 if the strings commute, -1 if they anticommute.
pub fn eta(g: &PauliString, o: &PauliString) -> Result<f64> {
    g.check_size(o)?;
    Ok(if commutes(g, o) { 1.0 } else { -1.0 })
}

/// True iff the two strings commute. Panics on size mismatch.
pub fn commutes(a: &PauliString, b: &PauliString) -> bool {
    assert_eq!(a.n_qubits, b.n_qubits);
    ((a.x & b.z).count_ones() + (a.z & b.x).count_ones()).is_multiple_of(2)
}

/// Phase-free subgroup of the N-qubit Pauli group.
///
/// `generators` is a fully reduced GF(2) basis of the span (deterministic for
/// a given element set); `elements` is the complete span, sorted, with the
/// identity always first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliSubgroup {
    n_qubits: usize,
    generators: Vec<PauliString>,
    elements: Vec<PauliString>,
}

/// Fully reduced XOR basis over symplectic vectors. Vectors are kept sorted
/// by descending leading bit and every leading bit occurs in one vector only.
fn reduce_basis(vectors: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::new();
    for mut v in vectors {
        for b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            for b in basis.iter_mut() {
                *b = (*b).min(*b ^ v);
            }
            basis.push(v);
        }
    }
    basis.sort_unstable_by(|a, b| b.cmp(a));
    basis
}

impl PauliSubgroup {
    /// Trivial group `{I}`.
    pub fn trivial(n_qubits: usize) -> Self {
        PauliSubgroup {
            n_qubits,
            generators: Vec::new(),
            elements: vec![PauliString::identity(n_qubits)],
        }
    }

    /// The full 4^n-element phase-free Pauli group on `n` qubits.
    pub fn full(n_qubits: usize) -> Self {
        let mut gens = Vec::new();
        for q in 0..n_qubits {
            gens.push(PauliString::single(n_qubits, q, 'X').unwrap());
            gens.push(PauliString::single(n_qubits, q, 'Z').unwrap());
        }
        span_group(n_qubits, &gens).unwrap()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn elements(&self) -> &[PauliString] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, p: &PauliString) -> bool {
        self.elements.binary_search(p).is_ok()
    }

    pub fn is_subgroup_of(&self, other: &PauliSubgroup) -> bool {
        self.n_qubits == other.n_qubits && self.elements.iter().all(|e| other.contains(e))
    }

    /// Elements of `self` that are not in `sub`, in sorted order.
    pub fn difference(&self, sub: &PauliSubgroup) -> Vec<PauliString> {
        self.elements
            .iter()
            .filter(|e| !sub.contains(e))
            .copied()
            .collect()
    }
}

/// Span of a set of Pauli strings as a phase-free subgroup.
///
/// Duplicate and dependent generators are reduced away; an empty input yields
/// the trivial group.
pub fn span_group(n_qubits: usize, generators: &[PauliString]) -> Result<PauliSubgroup> {
    for g in generators {
        if g.n_qubits != n_qubits {
            return Err(Error::SizeMismatch {
                left: g.n_qubits,
                right: n_qubits,
            });
        }
    }
    let basis = reduce_basis(generators.iter().map(|g| g.symplectic()));
    Ok(subgroup_from_basis(n_qubits, &basis))
}

fn subgroup_from_basis(n_qubits: usize, basis: &[u64]) -> PauliSubgroup {
    let k = basis.len();
    let mut elements = Vec::with_capacity(1 << k);
    for m in 0u64..(1 << k) {
        let mut v = 0u64;
        for (i, b) in basis.iter().enumerate() {
            if (m >> i) & 1 == 1 {
                v ^= b;
            }
        }
        elements.push(PauliString::from_symplectic(n_qubits, v));
    }
    elements.sort_unstable();
    let generators = basis
        .iter()
        .map(|&b| PauliString::from_symplectic(n_qubits, b))
        .collect();
    PauliSubgroup {
        n_qubits,
        generators,
        elements,
    }
}

/// Builds the subgroup spanned by an element list, checking that the list is
/// exactly closed (its size must equal the size of its own span).
pub fn subgroup_from_elements(n_qubits: usize, elements: &[PauliString]) -> Result<PauliSubgroup> {
    let basis = reduce_basis(elements.iter().map(|e| e.symplectic()));
    let group = subgroup_from_basis(n_qubits, &basis);
    if group.order() != elements.len() {
        return Err(Error::NotSubgroup);
    }
    Ok(group)
}

/// Rewrites a generating set so that symmetry syndromes are in reduced
/// echelon form: every symmetry that acts as a pivot anticommutes with
/// exactly one generator, and generators commuting with all symmetries are
/// untouched in span.
///
/// Gaussian elimination over GF(2) by pairwise generator multiplication;
/// ties break to the lowest-index generator.
pub fn canonicalize_generators(
    gens: &[PauliString],
    symmetries: &[PauliString],
) -> Result<Vec<PauliString>> {
    let mut out: Vec<PauliString> = gens.to_vec();
    for g in &out {
        for s in symmetries {
            g.check_size(s)?;
        }
    }
    let mut pivot_for: Vec<Option<usize>> = vec![None; symmetries.len()];
    let mut used: Vec<bool> = vec![false; out.len()];
    for (si, s) in symmetries.iter().enumerate() {
        let anti = |g: &PauliString| !commutes(g, s);
        let pivot = match out.iter().enumerate().find(|(j, g)| !used[*j] && anti(g)) {
            Some((j, _)) => j,
            None => continue,
        };
        used[pivot] = true;
        pivot_for[si] = Some(pivot);
        for j in 0..out.len() {
            if j != pivot && anti(&out[j]) {
                let (_, prod) = multiply(&out[j], &out[pivot])?;
                out[j] = prod;
            }
        }
    }
    Ok(out)
}

/// Splits a group into the subgroup commuting with every symmetry and the
/// remaining (detectable) elements.
pub fn partition_detectable(
    group: &PauliSubgroup,
    symmetries: &[PauliString],
) -> Result<(PauliSubgroup, Vec<PauliString>)> {
    for s in symmetries {
        if s.n_qubits() != group.n_qubits {
            return Err(Error::SizeMismatch {
                left: s.n_qubits(),
                right: group.n_qubits,
            });
        }
    }
    let mut undetectable = Vec::new();
    let mut detectable = Vec::new();
    for e in group.elements() {
        if symmetries.iter().all(|s| commutes(e, s)) {
            undetectable.push(*e);
        } else {
            detectable.push(*e);
        }
    }
    // Commutation with a fixed set is preserved under products, so the
    // filtered set must come back as a full span of its own basis.
    let sub = subgroup_from_elements(group.n_qubits, &undetectable)?;
    Ok((sub, detectable))
}

fn validate_symmetries(symmetries: &[PauliString]) -> Result<()> {
    for (i, a) in symmetries.iter().enumerate() {
        for b in &symmetries[i + 1..] {
            a.check_size(b)?;
            if !commutes(a, b) {
                return Err(Error::InvalidSymmetries(
                    "symmetry operators must pairwise commute".into(),
                ));
            }
        }
    }
    let basis = reduce_basis(symmetries.iter().map(|s| s.symplectic()));
    if basis.len() != symmetries.len() {
        return Err(Error::InvalidSymmetries(
            "symmetry operators must be independent".into(),
        ));
    }
    Ok(())
}

/// Expansion of the eigenspace projector prod_i (I + s_i S_i) / 2 into
/// 2^m signed Pauli terms.
pub fn projector_expansion(
    symmetries: &[PauliString],
    eigenvalues: &[i8],
) -> Result<Vec<SignedPauliTerm>> {
    if symmetries.len() != eigenvalues.len() {
        return Err(Error::LengthMismatch {
            left: symmetries.len(),
            right: eigenvalues.len(),
        });
    }
    if symmetries.is_empty() {
        return Err(Error::InvalidArgument(
            "projector of an empty symmetry list needs an explicit qubit count".into(),
        ));
    }
    validate_symmetries(symmetries)?;
    for &s in eigenvalues {
        if s != 1 && s != -1 {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue {s} is not +/-1"
            )));
        }
    }
    let n = symmetries[0].n_qubits();
    let m = symmetries.len();
    let norm = 0.5f64.powi(m as i32);
    let mut terms = Vec::with_capacity(1 << m);
    for subset in 0u32..(1 << m) {
        let mut phase = Phase::PlusOne;
        let mut prod = PauliString::identity(n);
        let mut sign = 1.0;
        for (i, s) in symmetries.iter().enumerate() {
            if (subset >> i) & 1 == 1 {
                let (ph, p) = multiply(&prod, s)?;
                phase = phase * ph;
                prod = p;
                sign *= f64::from(eigenvalues[i]);
            }
        }
        // Commuting Hermitian factors always leave a real product phase.
        debug_assert!(phase.is_real());
        terms.push(SignedPauliTerm::new(sign * phase.as_real() * norm, prod));
    }
    terms.sort_by_key(|t| t.string);
    Ok(terms)
}

/// Pauli expansion of `O * P` for a projector expansion `P`, together with
/// its coefficient 1-norm.
///
/// The result must be Hermitian with real coefficients; a residual imaginary
/// part above 1e-12 signals an observable that does not commute with the
/// projected symmetry and is reported as an error.
pub fn observable_projector_product(
    o: &PauliString,
    projector: &[SignedPauliTerm],
) -> Result<(Vec<SignedPauliTerm>, f64)> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<PauliString, (f64, f64)> = BTreeMap::new();
    for term in projector {
        o.check_size(&term.string)?;
        let (phase, string) = multiply(o, &term.string)?;
        let entry = acc.entry(string).or_insert((0.0, 0.0));
        match phase {
            Phase::PlusOne => entry.0 += term.coefficient,
            Phase::MinusOne => entry.0 -= term.coefficient,
            Phase::PlusI => entry.1 += term.coefficient,
            Phase::MinusI => entry.1 -= term.coefficient,
        }
    }
    let mut terms = Vec::new();
    let mut one_norm = 0.0;
    for (string, (re, im)) in acc {
        if im.abs() > 1e-12 {
            return Err(Error::NonRealCoefficient(im));
        }
        if re.abs() > 1e-15 {
            one_norm += re.abs();
            terms.push(SignedPauliTerm::new(re, string));
        }
    }
    Ok((terms, one_norm))
}
