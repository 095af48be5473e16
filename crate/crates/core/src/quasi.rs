//! Quasi-probability decomposition of signed Pauli maps into sampleable
//! signed Pauli insertions, plus the associated sampling-cost formulas.

use rand::Rng;

use crate::channel::PauliChannel;
use crate::error::{Error, Result};
use crate::pauli::PauliString;

/// One sampleable basis operation: a Pauli insertion applied by conjugation,
/// drawn with `probability` and weighted by `sign`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisOp {
    pub probability: f64,
    pub sign: i8,
    pub insertion: PauliString,
}

/// Sampleable form of a signed Pauli map: probabilities |w|/Q, signs sgn(w)
/// and the coefficient 1-norm Q. The map itself is recovered as
/// Q * sum_i sign_i prob_i (conjugation by insertion_i).
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDecomposition {
    basis_ops: Vec<BasisOp>,
    one_norm: f64,
    cumulative: Vec<f64>,
}

impl QuasiDecomposition {
    pub fn basis_ops(&self) -> &[BasisOp] {
        &self.basis_ops
    }

    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    /// Draws one insertion with its sign. Deterministic given the rng state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (PauliString, i8) {
        let u: f64 = rng.gen();
        let idx = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) => (i + 1).min(self.basis_ops.len() - 1),
            Err(i) => i.min(self.basis_ops.len() - 1),
        };
        let op = &self.basis_ops[idx];
        (op.insertion, op.sign)
    }
}

/// Decomposes a trace-preserving signed map into a sampleable distribution.
pub fn decompose(map: &PauliChannel) -> Result<QuasiDecomposition> {
    let one_norm = map.one_norm();
    if one_norm <= 0.0 {
        return Err(Error::EmptyChannel);
    }
    let mut basis_ops = Vec::with_capacity(map.len());
    let mut cumulative = Vec::with_capacity(map.len());
    let mut acc = 0.0;
    for (s, w) in map.terms() {
        let probability = w.abs() / one_norm;
        acc += probability;
        basis_ops.push(BasisOp {
            probability,
            sign: if w < 0.0 { -1 } else { 1 },
            insertion: *s,
        });
        cumulative.push(acc);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(QuasiDecomposition {
        basis_ops,
        one_norm,
        cumulative,
    })
}

/// Sampling cost of inverting a group error channel at rate `p` over a group
/// of the given order: (1 + 2 (|E|-1) p / (|E| (1-p)))^2.
pub fn cost_invert_group(p: f64, group_order: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if group_order == 0 {
        return Err(Error::InvalidArgument("empty group".into()));
    }
    let e = group_order as f64;
    let b = 1.0 + 2.0 * (e - 1.0) * p / (e * (1.0 - p));
    Ok(b * b)
}

/// First-order cost of transforming a channel with non-identity probability
/// `p_eps` into one with `q_eps`, under even suppression: 1 + 4 (p_eps - q_eps).
pub fn cost_transform(p_eps: f64, q_eps: f64) -> Result<f64> {
    if q_eps > p_eps || q_eps < 0.0 {
        return Err(Error::InvalidProbability(q_eps));
    }
    Ok(1.0 + 4.0 * (p_eps - q_eps))
}

/// Exact cost of transforming a group error at rate `p` into the detectable
/// channel V_q over the subgroup pair (E, Q).
///
/// The coefficient 1-norm splits at the threshold q = p_d: above it the cost
/// is independent of q, below it every unit of additional suppression costs
/// an extra 2q/(1-p) of norm.
pub fn cost_transform_exact(
    p: f64,
    q: f64,
    group_order: usize,
    subgroup_order: usize,
) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if subgroup_order == 0 || !group_order.is_multiple_of(subgroup_order) {
        return Err(Error::NotSubgroup);
    }
    let e = group_order as f64;
    let qo = subgroup_order as f64;
    let p_d = (e - qo) / e * p;
    let b = if q >= p_d {
        1.0 + 2.0 * (qo - 1.0) * p / (e * (1.0 - p))
    } else {
        1.0 + 2.0 * (e - 1.0) * p / (e * (1.0 - p)) - 2.0 * q / (1.0 - p)
    };
    Ok(b * b)
}

/// Whole-circuit cost of reducing the mean non-identity error count from
/// `mu_eps` to `nu_eps`: e^{4 (mu_eps - nu_eps)}.
pub fn circuit_cost(mu_eps: f64, nu_eps: f64) -> Result<f64> {
    if nu_eps > mu_eps || nu_eps < 0.0 {
        return Err(Error::InvalidProbability(nu_eps));
    }
    Ok((4.0 * (mu_eps - nu_eps)).exp())
}
