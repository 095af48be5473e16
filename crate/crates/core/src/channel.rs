//! Pauli and group error channels.
//!
//! A channel is a signed weight distribution over phase-free Pauli strings
//! acting by conjugation. Noise models, their exact inverses and the
//! quasi-probability transformation maps all share this one representation;
//! inverses simply carry negative weights. Pauli channels are diagonal in
//! the Pauli operator basis, so their transfer matrices are stored as an
//! eigenvalue per basis string instead of a 4^n x 4^n matrix.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pauli::{eta, partition_detectable, span_group, PauliString, PauliSubgroup};

/// Weights smaller than this are dropped after arithmetic.
pub const PRUNE_EPS: f64 = 1e-15;

/// Largest register for which a full 4^n transfer-matrix diagonal is built.
pub const MAX_PTM_QUBITS: usize = 8;

const TRACE_TOL: f64 = 1e-12;

/// Signed weight distribution over Pauli strings, acting by conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel {
    n_qubits: usize,
    terms: BTreeMap<PauliString, f64>,
}

impl PauliChannel {
    /// Builds a channel from (string, weight) pairs. Weights of equal strings
    /// accumulate; the total must be 1 within 1e-12 (trace preservation).
    pub fn new(
        n_qubits: usize,
        weights: impl IntoIterator<Item = (PauliString, f64)>,
    ) -> Result<Self> {
        let mut terms: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (s, w) in weights {
            if s.n_qubits() != n_qubits {
                return Err(Error::SizeMismatch {
                    left: s.n_qubits(),
                    right: n_qubits,
                });
            }
            if !w.is_finite() {
                return Err(Error::InvalidArgument("non-finite channel weight".into()));
            }
            *terms.entry(s).or_default() += w;
        }
        terms.retain(|_, w| w.abs() > PRUNE_EPS);
        if terms.is_empty() {
            return Err(Error::EmptyChannel);
        }
        let sum: f64 = terms.values().sum();
        if (sum - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotTracePreserving(sum));
        }
        Ok(PauliChannel { n_qubits, terms })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(PauliString::identity(n_qubits), 1.0);
        PauliChannel { n_qubits, terms }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.terms.iter().map(|(s, &w)| (s, w))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn weight(&self, s: &PauliString) -> f64 {
        self.terms.get(s).copied().unwrap_or(0.0)
    }

    /// A channel is physical when every weight is non-negative.
    pub fn is_physical(&self) -> bool {
        self.terms.values().all(|&w| w >= -PRUNE_EPS)
    }

    /// Total weight on non-identity strings (the error probability of a
    /// physical channel).
    pub fn non_identity_probability(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(s, _)| !s.is_identity())
            .map(|(_, &w)| w)
            .sum()
    }

    /// Coefficient 1-norm of the weight distribution; 1 for physical channels.
    pub fn one_norm(&self) -> f64 {
        self.terms.values().map(|w| w.abs()).sum()
    }

    /// Multiplies the non-identity probability by `scale`, keeping the error
    /// profile. Fails when the scaled probability reaches 1.
    pub fn scale_error(&self, scale: f64) -> Result<PauliChannel> {
        if scale < 0.0 {
            return Err(Error::InvalidProbability(scale));
        }
        let p = self.non_identity_probability();
        if scale * p >= 1.0 {
            return Err(Error::InvalidProbability(scale * p));
        }
        let id = PauliString::identity(self.n_qubits);
        let others = self
            .terms
            .iter()
            .filter(|(s, _)| !s.is_identity())
            .map(|(s, &w)| (*s, scale * w));
        PauliChannel::new(
            self.n_qubits,
            others.chain(std::iter::once((id, 1.0 - scale * p))),
        )
    }

    /// Transfer-matrix eigenvalue for one basis string:
    /// f_G = sum_E w_E eta(E, G).
    pub fn ptm_eigenvalue(&self, g: &PauliString) -> Result<f64> {
        let mut f = 0.0;
        for (e, w) in self.terms() {
            f += w * eta(e, g)?;
        }
        Ok(f)
    }

    /// Full transfer-matrix diagonal over all 4^n basis strings.
    pub fn ptm_diagonal(&self) -> Result<PtmDiagonal> {
        if self.n_qubits > MAX_PTM_QUBITS {
            return Err(Error::QubitLimit(self.n_qubits, MAX_PTM_QUBITS));
        }
        let n = self.n_qubits;
        let len = 1usize << (2 * n);
        let mut dense = vec![0.0f64; len];
        for (s, w) in self.terms() {
            dense[(s.x_bits() as usize) | ((s.z_bits() as usize) << n)] += w;
        }
        walsh_hadamard(&mut dense);
        // eta(E, G) pairs the X half of E with the Z half of G and vice
        // versa, so the transform output lands at the half-swapped index.
        let mut values = vec![0.0f64; len];
        for (g, v) in values.iter_mut().enumerate() {
            *v = dense[swap_halves(g, n)];
        }
        Ok(PtmDiagonal {
            n_qubits: n,
            values,
        })
    }

    /// Exact inverse through the reciprocal transfer-matrix diagonal.
    pub fn inverse(&self) -> Result<PauliChannel> {
        let ptm = self.ptm_diagonal()?;
        let n = self.n_qubits;
        let len = ptm.values.len();
        for (g, &f) in ptm.values.iter().enumerate() {
            if f.abs() < 1e-12 {
                let s = PauliString::from_bits(n, (g as u64) & ((1 << n) - 1), (g as u64) >> n)
                    .unwrap();
                return Err(Error::SingularChannel {
                    string: s.to_string(),
                    value: f,
                });
            }
        }
        let mut dense = vec![0.0f64; len];
        for (j, d) in dense.iter_mut().enumerate() {
            *d = 1.0 / ptm.values[swap_halves(j, n)];
        }
        walsh_hadamard(&mut dense);
        let norm = 1.0 / len as f64;
        PauliChannel::new(
            n,
            dense.iter().enumerate().filter_map(|(e, &v)| {
                let w = v * norm;
                if w.abs() > PRUNE_EPS {
                    Some((
                        PauliString::from_bits(n, (e as u64) & ((1 << n) - 1), (e as u64) >> n)
                            .unwrap(),
                        w,
                    ))
                } else {
                    None
                }
            }),
        )
    }

    /// First-order inverse that simply negates the non-identity weights.
    /// Composing it with the source channel leaves an O(p^2) residual.
    pub fn approximate_inverse(&self) -> PauliChannel {
        let p = self.non_identity_probability();
        let id = PauliString::identity(self.n_qubits);
        let mut terms = BTreeMap::new();
        terms.insert(id, 1.0 + p);
        for (s, w) in self.terms() {
            if !s.is_identity() {
                *terms.entry(*s).or_insert(0.0) -= w;
            }
        }
        terms.retain(|_, w| w.abs() > PRUNE_EPS);
        PauliChannel {
            n_qubits: self.n_qubits,
            terms,
        }
    }
}

/// Sequential composition of two Pauli channels (order is immaterial since
/// both are diagonal in the same basis). Weights convolve over phase-free
/// products; equivalently the transfer-matrix diagonals multiply entrywise.
pub fn compose(a: &PauliChannel, b: &PauliChannel) -> Result<PauliChannel> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::SizeMismatch {
            left: a.n_qubits,
            right: b.n_qubits,
        });
    }
    let mut terms: BTreeMap<PauliString, f64> = BTreeMap::new();
    for (e, we) in a.terms() {
        for (f, wf) in b.terms() {
            let prod = PauliString::from_bits(
                a.n_qubits,
                e.x_bits() ^ f.x_bits(),
                e.z_bits() ^ f.z_bits(),
            )
            .unwrap();
            *terms.entry(prod).or_default() += we * wf;
        }
    }
    PauliChannel::new(a.n_qubits, terms)
}

/// Group generated by the union of two subgroups' generators. Pure group
/// channels of the inputs compose to the pure group channel of the result.
pub fn compose_pure_groups(e: &PauliSubgroup, b: &PauliSubgroup) -> Result<PauliSubgroup> {
    if e.n_qubits() != b.n_qubits() {
        return Err(Error::SizeMismatch {
            left: e.n_qubits(),
            right: b.n_qubits(),
        });
    }
    let gens: Vec<PauliString> = e
        .generators()
        .iter()
        .chain(b.generators())
        .copied()
        .collect();
    span_group(e.n_qubits(), &gens)
}

fn swap_halves(idx: usize, n: usize) -> usize {
    let mask = (1usize << n) - 1;
    ((idx & mask) << n) | (idx >> n)
}

/// In-place Walsh-Hadamard transform with +/-1 kernel (unnormalised).
fn walsh_hadamard(a: &mut [f64]) {
    let len = a.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for i in block..block + h {
                let (x, y) = (a[i], a[i + h]);
                a[i] = x + y;
                a[i + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Transfer-matrix diagonal of a Pauli channel: one real eigenvalue per
/// basis string, f_I = 1 for trace-preserving channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PtmDiagonal {
    n_qubits: usize,
    values: Vec<f64>,
}

impl PtmDiagonal {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn value(&self, g: &PauliString) -> f64 {
        self.values[(g.x_bits() as usize) | ((g.z_bits() as usize) << self.n_qubits)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PauliString, f64)> + '_ {
        let n = self.n_qubits;
        self.values.iter().enumerate().map(move |(i, &v)| {
            (
                PauliString::from_bits(n, (i as u64) & ((1 << n) - 1), (i as u64) >> n).unwrap(),
                v,
            )
        })
    }

    /// Entrywise product, the transfer-matrix image of channel composition.
    pub fn product(&self, other: &PtmDiagonal) -> Result<PtmDiagonal> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(PtmDiagonal {
            n_qubits: self.n_qubits,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn max_deviation_from_identity(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Group error channel: with probability `p` apply a uniformly random element
/// of the subgroup, otherwise do nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupChannel {
    p: f64,
    group: PauliSubgroup,
}

impl GroupChannel {
    pub fn new(p: f64, group: PauliSubgroup) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(GroupChannel { p, group })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn group(&self) -> &PauliSubgroup {
        &self.group
    }

    /// Expands to the explicit weight distribution:
    /// (1-p) on the identity plus p/|E| on every group element.
    pub fn to_pauli(&self) -> PauliChannel {
        self.expand_signed(self.p)
    }

    /// Same expansion with an arbitrary, possibly negative, rate. Used for
    /// inverses and rate-reduction maps, which are group channels with a
    /// negative probability.
    pub fn expand_signed(&self, rate: f64) -> PauliChannel {
        let n = self.group.n_qubits();
        let order = self.group.order() as f64;
        let share = rate / order;
        let mut terms: BTreeMap<PauliString, f64> = BTreeMap::new();
        terms.insert(PauliString::identity(n), 1.0 - rate);
        for e in self.group.elements() {
            *terms.entry(*e).or_default() += share;
        }
        terms.retain(|_, w| w.abs() > PRUNE_EPS);
        PauliChannel { n_qubits: n, terms }
    }

    /// Closed-form inverse: a group channel of the same group at rate
    /// -p/(1-p). Fails for pure group errors (p = 1), whose transfer matrix
    /// has zero eigenvalues.
    pub fn inverse(&self) -> Result<PauliChannel> {
        if self.p >= 1.0 {
            return Err(Error::SingularChannel {
                string: "pure group error".into(),
                value: 0.0,
            });
        }
        let alpha = self.p / (1.0 - self.p);
        Ok(self.expand_signed(-alpha))
    }

    /// Detected probability and residual channel under a set of commuting
    /// Pauli symmetry checks.
    ///
    /// Dropping the detectable weights and renormalising by 1 - p_d leaves
    /// another group error channel over the undetectable subgroup Q at rate
    /// r = |Q| p / (|E|(1-p) + |Q| p).
    pub fn symmetry_filtered(&self, symmetries: &[PauliString]) -> Result<(GroupChannel, f64)> {
        let (q, _detectable) = partition_detectable(&self.group, symmetries)?;
        let e_ord = self.group.order() as f64;
        let q_ord = q.order() as f64;
        let p_d = (e_ord - q_ord) / e_ord * self.p;
        let r = q_ord * self.p / (e_ord * (1.0 - self.p) + q_ord * self.p);
        Ok((GroupChannel::new(r, q)?, p_d))
    }
}

/// Channel supported purely on the detectable elements E \ Q:
/// (1-q) on the identity and q/(|E|-|Q|) on each element outside Q.
pub fn detectable_channel(q: f64, e: &PauliSubgroup, qsub: &PauliSubgroup) -> Result<PauliChannel> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidProbability(q));
    }
    if !qsub.is_subgroup_of(e) {
        return Err(Error::NotSubgroup);
    }
    let outside = e.difference(qsub);
    if outside.is_empty() {
        if q > 0.0 {
            return Err(Error::InvalidArgument(
                "no detectable elements to carry nonzero probability".into(),
            ));
        }
        return Ok(PauliChannel::identity(e.n_qubits()));
    }
    let n = e.n_qubits();
    let share = q / outside.len() as f64;
    let mut terms: BTreeMap<PauliString, f64> = BTreeMap::new();
    terms.insert(PauliString::identity(n), 1.0 - q);
    for v in outside {
        *terms.entry(v).or_default() += share;
    }
    terms.retain(|_, w| w.abs() > PRUNE_EPS);
    Ok(PauliChannel { n_qubits: n, terms })
}

/// Reads a detectable-channel target back into (q, Q) against the group of
/// `gc`: the non-identity support must be uniform and its complement in E
/// must close into a subgroup.
fn read_detectable_target(
    gc: &GroupChannel,
    target: &PauliChannel,
) -> Result<(f64, PauliSubgroup)> {
    let e = gc.group();
    let mut support = Vec::new();
    let mut q = 0.0;
    let mut share: Option<f64> = None;
    for (s, w) in target.terms() {
        if s.is_identity() {
            continue;
        }
        if !e.contains(s) {
            return Err(Error::NotSubgroup);
        }
        match share {
            None => share = Some(w),
            Some(prev) if (prev - w).abs() > 1e-12 => return Err(Error::NotGroupChannel),
            _ => {}
        }
        support.push(*s);
        q += w;
    }
    let mut q_elems: Vec<PauliString> = e
        .elements()
        .iter()
        .filter(|el| !support.contains(el))
        .copied()
        .collect();
    q_elems.sort_unstable();
    let qsub = crate::pauli::subgroup_from_elements(e.n_qubits(), &q_elems)?;
    Ok((q, qsub))
}

/// Signed map M with M after J_{p,E} equal to the detectable target V_q.
///
/// Closed-form coefficients: 1/(1-p) times (1-q) on the identity,
/// (q - p_d)/(|E|-|Q|) on each detectable element and -p/|E| extra on each
/// element of Q. At q = p_d the detectable coefficients vanish and the map
/// is supported on Q alone.
pub fn transform_map(gc: &GroupChannel, target: &PauliChannel) -> Result<PauliChannel> {
    if gc.p() >= 1.0 {
        return Err(Error::SingularChannel {
            string: "pure group error".into(),
            value: 0.0,
        });
    }
    let (q, qsub) = read_detectable_target(gc, target)?;
    let e = gc.group();
    let p = gc.p();
    let n = e.n_qubits();
    let e_ord = e.order() as f64;
    let q_ord = qsub.order() as f64;
    let p_d = (e_ord - q_ord) / e_ord * p;
    let inv = 1.0 / (1.0 - p);

    let mut terms: BTreeMap<PauliString, f64> = BTreeMap::new();
    terms.insert(PauliString::identity(n), inv * (1.0 - q));
    let beta_q = -inv * p / e_ord;
    for el in qsub.elements() {
        *terms.entry(*el).or_default() += beta_q;
    }
    if e_ord > q_ord {
        let beta_v = inv * (q - p_d) / (e_ord - q_ord);
        for v in e.difference(&qsub) {
            *terms.entry(v).or_default() += beta_v;
        }
    }
    terms.retain(|_, w| w.abs() > PRUNE_EPS);
    PauliChannel::new(n, terms)
}

/// Named channel presets used by configuration files.
///
/// * `depolarizing2` - two-qubit depolarising channel at probability p
/// * `dephasing` - single-qubit phase flip group channel at probability p
/// * `detectable2` - two-qubit channel uniform over the eight Pauli errors
///   detectable by a ZZ parity check, at probability p
pub fn named_channel(name: &str, p: f64) -> Result<PauliChannel> {
    match name {
        "depolarizing2" => Ok(GroupChannel::new(p, PauliSubgroup::full(2))?.to_pauli()),
        "dephasing" => {
            let group = span_group(1, &["Z".parse().unwrap()])?;
            Ok(GroupChannel::new(p, group)?.to_pauli())
        }
        "detectable2" => {
            let e = PauliSubgroup::full(2);
            let (qsub, _) = partition_detectable(&e, &["ZZ".parse().unwrap()])?;
            detectable_channel(p, &e, &qsub)
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Identity check helper: largest PTM deviation of `ch` from the identity.
pub fn identity_residual(ch: &PauliChannel) -> Result<f64> {
    Ok(ch.ptm_diagonal()?.max_deviation_from_identity())
}
