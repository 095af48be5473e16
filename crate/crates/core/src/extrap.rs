//! Estimators and sampling-cost models: two-point and multi-exponential
//! extrapolation, hyperbolic extrapolation from symmetry-partitioned
//! expectations, the combined quasi-probability pipelines, and break-even
//! analysis between mitigation strategies.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::pauli::{commutes, PauliString};
use crate::sim::{mc_trajectory, run_exact, symmetry_partition, NoisyCircuit, TrajectoryPlan};

/// Components smaller than this are pruned from fitted models.
const AMPLITUDE_EPS: f64 = 1e-12;

/// Sum of decaying exponentials y(mu) = sum_k A_k e^{-gamma_k mu} with
/// gamma_k in [0, 1], sorted by gamma ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpDecayModel {
    components: Vec<(f64, f64)>,
    residual: f64,
    warning: bool,
}

impl ExpDecayModel {
    /// (amplitude, decay rate) pairs, gamma ascending.
    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    /// Root-mean-square residual of the fit.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Set when the model selector ran out of components above tolerance.
    pub fn warning(&self) -> bool {
        self.warning
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn evaluate(&self, mu: f64) -> f64 {
        self.components
            .iter()
            .map(|(a, g)| a * (-g * mu).exp())
            .sum()
    }

    /// Extrapolation to zero noise: the sum of the amplitudes.
    pub fn zero_noise(&self) -> f64 {
        self.components.iter().map(|(a, _)| a).sum()
    }
}

/// Sum of power decays y(l) = sum_k A_k (1 - gamma_k)^l over integer error
/// counts, gamma_k in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecayModel {
    components: Vec<(f64, f64)>,
    residual: f64,
}

impl PowerDecayModel {
    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn evaluate(&self, l: f64) -> f64 {
        self.components
            .iter()
            .map(|(a, g)| a * (1.0 - g).powf(l))
            .sum()
    }

    pub fn zero_noise(&self) -> f64 {
        self.components.iter().map(|(a, _)| a).sum()
    }
}

// ---------------------------------------------------------------------------
// damped least-squares fitting of sums of geometric decays
// ---------------------------------------------------------------------------

fn model_value(amps: &[f64], bases: &[f64], x: f64) -> f64 {
    amps.iter().zip(bases).map(|(a, b)| a * b.powf(x)).sum()
}

fn rss(xs: &[f64], ys: &[f64], ws: &[f64], amps: &[f64], bases: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| {
            let r = y - model_value(amps, bases, x);
            w * r * r
        })
        .sum()
}

/// Optimal amplitudes for fixed bases by weighted linear least squares.
fn linear_amplitudes(xs: &[f64], ys: &[f64], ws: &[f64], bases: &[f64]) -> Vec<f64> {
    let design = DMatrix::from_fn(xs.len(), bases.len(), |i, j| {
        ws[i].sqrt() * bases[j].powf(xs[i])
    });
    let rhs = DVector::from_fn(xs.len(), |i, _| ws[i].sqrt() * ys[i]);
    design
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; bases.len()])
}

/// Damped Gauss-Newton polish of (amplitudes, bases) with the bases clamped
/// into [lo, hi]. Returns the refined parameters and their residual sum of
/// squares.
fn lm_polish(
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
    amps0: Vec<f64>,
    bases0: Vec<f64>,
    lo: f64,
    hi: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let k = bases0.len();
    let m = xs.len();
    let mut amps = amps0;
    let mut bases = bases0;
    let mut cost = rss(xs, ys, ws, &amps, &bases);
    let mut damping = 1e-3;

    for _ in 0..200 {
        if cost < 1e-28 {
            break;
        }
        let mut jac = DMatrix::zeros(m, 2 * k);
        let mut res = DVector::zeros(m);
        for i in 0..m {
            let x = xs[i];
            let sw = ws[i].sqrt();
            res[i] = sw * (ys[i] - model_value(&amps, &bases, x));
            for j in 0..k {
                jac[(i, j)] = sw * bases[j].powf(x);
                jac[(i, k + j)] = if x == 0.0 {
                    0.0
                } else {
                    sw * amps[j] * x * bases[j].powf(x - 1.0)
                };
            }
        }
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        let grad = &jt * &res;
        let mut accepted = false;
        for _ in 0..12 {
            let mut damped = normal.clone();
            for d in 0..2 * k {
                let diag = normal[(d, d)].max(1e-12);
                damped[(d, d)] = diag * (1.0 + damping);
            }
            let step = match damped.clone().lu().solve(&grad) {
                Some(s) => s,
                None => break,
            };
            let mut new_amps = amps.clone();
            let mut new_bases = bases.clone();
            for j in 0..k {
                new_amps[j] += step[j];
                new_bases[j] = (bases[j] + step[k + j]).clamp(lo, hi);
            }
            let new_cost = rss(xs, ys, ws, &new_amps, &new_bases);
            if new_cost < cost {
                let improvement = cost - new_cost;
                amps = new_amps;
                bases = new_bases;
                cost = new_cost;
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                if improvement < 1e-24 {
                    return (amps, bases, cost);
                }
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            break;
        }
        normal.fill(0.0);
    }
    (amps, bases, cost)
}

/// Candidate bases from the linear recurrence satisfied by geometric sums
/// on an equally spaced grid (Prony's method). For four points and two
/// components this interpolates exactly whenever the recurrence roots are
/// real and positive; otherwise no candidate is produced.
fn prony_candidates(xs: &[f64], ys: &[f64], k: usize, lo: f64, hi: f64) -> Option<Vec<f64>> {
    let m = xs.len();
    if k == 0 || k > 2 || m < 2 * k {
        return None;
    }
    let h = xs[1] - xs[0];
    if h <= 0.0 {
        return None;
    }
    let span = xs[m - 1] - xs[0];
    for (i, &x) in xs.iter().enumerate() {
        if (x - xs[0] - i as f64 * h).abs() > 1e-9 * span.max(1.0) {
            return None;
        }
    }
    let rows = m - k;
    let design = DMatrix::from_fn(rows, k, |r, j| ys[r + j]);
    let rhs = DVector::from_fn(rows, |r, _| ys[r + k]);
    let coeffs = design.svd(true, true).solve(&rhs, 1e-13).ok()?;
    let ratios: Vec<f64> = match k {
        1 => vec![coeffs[0]],
        _ => {
            // t^2 - c1 t - c0 = 0
            let (c0, c1) = (coeffs[0], coeffs[1]);
            let disc = c1 * c1 + 4.0 * c0;
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            vec![0.5 * (c1 + s), 0.5 * (c1 - s)]
        }
    };
    let mut bases = Vec::with_capacity(k);
    for rho in ratios {
        if rho <= 0.0 {
            return None;
        }
        bases.push(rho.powf(1.0 / h).clamp(lo, hi));
    }
    Some(bases)
}

/// Slope-based single-base estimate from the data, NaN when the signs mix.
fn log_linear_base(xs: &[f64], ys: &[f64]) -> f64 {
    let sign = ys.iter().find(|y| y.abs() > 1e-300).map(|y| y.signum());
    let sign = match sign {
        Some(s) => s,
        None => return f64::NAN,
    };
    if ys.iter().any(|y| y.abs() > 1e-300 && y.signum() != sign) {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.abs() > 1e-300)
        .map(|(&x, &y)| (x, y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return f64::NAN;
    }
    ((n * sxy - sx * sy) / denom).exp()
}

/// Best fit of sum_k A_k b_k^x with b in [lo, hi], via a deterministic
/// candidate sweep (log-linear start, nested refinement of the smaller
/// model, a coarse grid and seeded restarts), each polished by damped
/// least squares.
fn fit_geometric(
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
    k: usize,
    lo: f64,
    hi: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one component".into()));
    }
    if xs.len() < 2 * k {
        return Err(Error::InsufficientPoints {
            got: xs.len(),
            need: 2 * k,
        });
    }
    let span = hi - lo;
    let mut candidates: Vec<Vec<f64>> = Vec::new();

    let b_slope = log_linear_base(xs, ys).clamp(lo, hi);
    let b_start = if b_slope.is_nan() {
        lo + 0.5 * span
    } else {
        b_slope
    };

    if k == 1 {
        candidates.push(vec![b_start]);
        for t in [0.1, 0.5, 0.9] {
            candidates.push(vec![lo + t * span]);
        }
    } else {
        // nested: refine the best (k-1)-component solution, which keeps the
        // residual monotone in k
        let (_, smaller_bases, _) = fit_geometric(xs, ys, ws, k - 1, lo, hi)?;
        for extra in [lo + 0.1 * span, lo + 0.5 * span, lo + 0.9 * span, b_start] {
            let mut bases = smaller_bases.clone();
            bases.push(extra);
            candidates.push(bases);
        }
        // spread around the slope estimate
        let grid = [0.1, 0.35, 0.65, 0.9];
        for (i, &ti) in grid.iter().enumerate() {
            for &tj in grid.iter().skip(i + 1) {
                let mut bases = vec![lo + ti * span, lo + tj * span];
                while bases.len() < k {
                    bases.push(b_start);
                }
                candidates.push(bases);
            }
        }
    }
    if let Some(bases) = prony_candidates(xs, ys, k, lo, hi) {
        candidates.push(bases);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x05ee_df17 + k as u64);
    for _ in 0..20 {
        use rand::Rng;
        let bases: Vec<f64> = (0..k).map(|_| lo + span * rng.gen::<f64>()).collect();
        candidates.push(bases);
    }

    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for bases in candidates {
        let amps = linear_amplitudes(xs, ys, ws, &bases);
        let (amps, bases, cost) = lm_polish(xs, ys, ws, amps, bases, lo, hi);
        if best.as_ref().is_none_or(|(_, _, c)| cost < *c) {
            best = Some((amps, bases, cost));
        }
    }
    let (amps, bases, cost) = best.ok_or(Error::FitDiverged(20))?;
    if !cost.is_finite() {
        return Err(Error::FitDiverged(20));
    }
    Ok((amps, bases, cost))
}

fn validate_points(points: &[(f64, f64)], k: usize, positive_x: bool) -> Result<()> {
    if points.len() < 2 * k {
        return Err(Error::InsufficientPoints {
            got: points.len(),
            need: 2 * k,
        });
    }
    for (i, (x, _)) in points.iter().enumerate() {
        if positive_x && *x <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "probe points must be positive, got {x}"
            )));
        }
        for (x2, _) in &points[i + 1..] {
            if (x - x2).abs() < 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "probe points must be distinct, {x} repeats"
                )));
            }
        }
    }
    Ok(())
}

/// Nonlinear least-squares fit of k decaying exponentials over (mu, y)
/// points, with every decay rate constrained to [0, 1]. Deterministic for a
/// given input.
pub fn fit_multi_exp(points: &[(f64, f64)], k: usize) -> Result<ExpDecayModel> {
    validate_points(points, k, true)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ws = vec![1.0; points.len()];
    // gamma in [0, 1] <=> base e^{-gamma} in [1/e, 1]
    let (amps, bases, cost) = fit_geometric(&xs, &ys, &ws, k, (-1.0f64).exp(), 1.0)?;
    let mut components: Vec<(f64, f64)> = amps
        .into_iter()
        .zip(bases)
        .filter(|(a, _)| a.abs() > AMPLITUDE_EPS)
        .map(|(a, b)| (a, (-b.ln()).clamp(0.0, 1.0)))
        .collect();
    components.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    Ok(ExpDecayModel {
        components,
        residual: (cost / points.len() as f64).sqrt(),
        warning: false,
    })
}

/// Fit of k power decays sum_k A_k (1-gamma_k)^l over integer error counts,
/// gamma in [0, 1].
pub fn fit_power_decay(points: &[(f64, f64)], k: usize) -> Result<PowerDecayModel> {
    let ws = vec![1.0; points.len()];
    fit_power_decay_weighted(points, &ws, k)
}

/// Weighted variant of [`fit_power_decay`]; the stored residual is the
/// weighted root-mean-square sqrt(sum w r^2 / sum w).
pub fn fit_power_decay_weighted(
    points: &[(f64, f64)],
    weights: &[f64],
    k: usize,
) -> Result<PowerDecayModel> {
    validate_points(points, k, false)?;
    if weights.len() != points.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: points.len(),
        });
    }
    let total_weight: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || total_weight <= 0.0 {
        return Err(Error::InvalidArgument(
            "weights must be non-negative".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (amps, bases, cost) = fit_geometric(&xs, &ys, weights, k, 0.0, 1.0)?;
    let mut components: Vec<(f64, f64)> = amps
        .into_iter()
        .zip(bases)
        .filter(|(a, _)| a.abs() > AMPLITUDE_EPS)
        .map(|(a, b)| (a, 1.0 - b))
        .collect();
    components.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    Ok(PowerDecayModel {
        components,
        residual: (cost / total_weight).sqrt(),
    })
}

/// Outlier rule for extrapolation-bias comparisons: a fit row is excluded
/// from corpus aggregates when its selected model stayed above tolerance,
/// either bias is exceptionally large, or the true value is too small to
/// carry a meaningful relative comparison.
pub fn is_fit_outlier(warning: bool, eps1: f64, eps2: f64, truth: Option<f64>) -> bool {
    warning || eps1 > 0.1 || eps2 > 0.01 || truth.is_some_and(|t| t.abs() < 1e-3)
}

/// Smallest K <= k_max whose fit has normalized residual (rms over the
/// largest |y|) below `tol`; otherwise the k_max fit with the warning flag.
pub fn select_model(points: &[(f64, f64)], k_max: usize, tol: f64) -> Result<ExpDecayModel> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be positive".into()));
    }
    let scale = points.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
    if scale < 1e-12 {
        // identically zero data: the flat model fits exactly
        return Ok(ExpDecayModel {
            components: vec![],
            residual: 0.0,
            warning: false,
        });
    }
    let mut last = None;
    for k in 1..=k_max {
        if points.len() < 2 * k {
            break;
        }
        let model = fit_multi_exp(points, k)?;
        if model.residual / scale < tol {
            return Ok(model);
        }
        last = Some(model);
    }
    let mut model = last.ok_or(Error::InsufficientPoints {
        got: points.len(),
        need: 2,
    })?;
    model.warning = true;
    Ok(model)
}

/// Two-point exponential extrapolation from values at error counts mu and
/// lambda mu: (o_mu^lambda / o_lmu)^{1/(lambda-1)}, with the common sign
/// carried through.
pub fn two_point_exp(o_mu: f64, o_lmu: f64, lambda: f64) -> Result<f64> {
    if lambda <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs lambda > 1, got {lambda}"
        )));
    }
    if o_mu == 0.0 || o_lmu == 0.0 || o_mu.signum() != o_lmu.signum() {
        return Err(Error::NonExponentialData);
    }
    let est = (o_mu.abs().powf(lambda) / o_lmu.abs()).powf(1.0 / (lambda - 1.0));
    Ok(o_mu.signum() * est)
}

/// Forward partition map of an exact single-exponential observable: the
/// even- and odd-count expectations at detectable error count mu_d.
pub fn forward_partition(o0: f64, gamma: f64, mu_d: f64) -> Result<(f64, f64)> {
    if mu_d <= 0.0 {
        return Err(Error::InvalidProbability(mu_d));
    }
    let x = 1.0 - gamma;
    Ok((
        o0 * (x * mu_d).cosh() / mu_d.cosh(),
        o0 * (x * mu_d).sinh() / mu_d.sinh(),
    ))
}

/// Hyperbolic extrapolation: recover the zero-noise value from the passed
/// and failed expectations at one detectable error count.
pub fn hyperbolic_extrapolate(o_pass: f64, o_fail: f64, mu_d: f64) -> Result<f64> {
    if mu_d <= 0.0 {
        return Err(Error::InvalidProbability(mu_d));
    }
    let radicand = o_pass * o_pass * mu_d.cosh().powi(2) - o_fail * o_fail * mu_d.sinh().powi(2);
    if radicand < 0.0 {
        return Err(Error::NonHyperbolicDecay(radicand));
    }
    Ok(o_pass.signum() * radicand.sqrt())
}

/// Weighted recombination of the two verification branches:
/// e^{-mu_d} (cosh(mu_d) o_pass + sinh(mu_d) o_fail).
pub fn recombine_identity_check(o_pass: f64, o_fail: f64, mu_d: f64) -> f64 {
    (-mu_d).exp() * (mu_d.cosh() * o_pass + mu_d.sinh() * o_fail)
}

/// Effective detectable error count from a measured pass probability:
/// p_pass = e^{-mu} cosh(mu) inverted to mu = -ln(2 p_pass - 1) / 2.
pub fn mu_d_from_pass_prob(p_pass: f64) -> Result<f64> {
    if !(p_pass > 0.5 && p_pass <= 1.0) {
        return Err(Error::InvalidProbability(p_pass));
    }
    Ok(-0.5 * (2.0 * p_pass - 1.0).ln())
}

// ---------------------------------------------------------------------------
// sampling-cost formulas
// ---------------------------------------------------------------------------

/// Verification cost factor 2 / (1 + e^{-2 mu_d}), upper-bounded by 2.
pub fn cost_symmetry(mu_d: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * mu_d).exp())
}

/// Probability that a run is discarded: (1 - e^{-2 mu_d}) / 2.
pub fn detection_prob(mu_d: f64) -> f64 {
    0.5 * (1.0 - (-2.0 * mu_d).exp())
}

/// Fraction of surviving runs that still carry errors:
/// (1 - e^{-mu_d})^2 / 2.
pub fn residual_error(mu_d: f64) -> f64 {
    0.5 * (1.0 - (-mu_d).exp()).powi(2)
}

/// Post-processing verification squares the direct cost: 1 / p_pass^2.
pub fn cost_postproc(p_pass: f64) -> Result<f64> {
    if p_pass <= 0.0 || p_pass > 1.0 {
        return Err(Error::InvalidProbability(p_pass));
    }
    Ok(1.0 / (p_pass * p_pass))
}

/// Cost of two-point exponential extrapolation with an even sample split:
/// 2 (lambda^2 e^{2 gamma mu} + e^{2 lambda gamma mu}) / (lambda - 1)^2.
pub fn cost_exp_extrapolation(gamma: f64, mu: f64, lambda: f64) -> f64 {
    2.0 * (lambda * lambda * (2.0 * gamma * mu).exp() + (2.0 * lambda * gamma * mu).exp())
        / ((lambda - 1.0) * (lambda - 1.0))
}

/// Cost of quasi-probability with exponential extrapolation, probing at the
/// suppressed rate mu/lambda and the native rate mu.
pub fn cost_qe(gamma: f64, mu: f64, lambda: f64, mu_eps: f64) -> f64 {
    let inner = (2.0 / lambda) * (gamma * mu + 2.0 * (lambda - 1.0) * mu_eps);
    2.0 * (lambda * lambda * inner.exp() + (2.0 * gamma * mu).exp())
        / ((lambda - 1.0) * (lambda - 1.0))
}

/// Upper-bound cost of hyperbolic extrapolation:
/// cosh(2 (1-gamma) mu_d) cosh(mu_d) e^{mu_d}.
pub fn cost_hyperbolic(gamma: f64, mu_d: f64) -> f64 {
    (2.0 * (1.0 - gamma) * mu_d).cosh() * mu_d.cosh() * mu_d.exp()
}

/// Cost of quasi-probability with hyperbolic extrapolation:
/// e^{4 mu_eps} cosh(mu_d) cosh(2 (1-gamma) mu_d) / e^{3 mu_d}.
pub fn cost_qh(gamma: f64, mu_eps: f64, mu_d: f64) -> f64 {
    (4.0 * mu_eps).exp() * mu_d.cosh() * (2.0 * (1.0 - gamma) * mu_d).cosh() / (3.0 * mu_d).exp()
}

/// Quasi-probability down to nu combined with symmetry verification:
/// cost e^{4 mu_eps} / (e^{3 nu} cosh(nu)), the saving factor over pure
/// quasi-probability, and the residual circuit error rate.
pub fn cost_qs(mu_eps: f64, nu: f64) -> (f64, f64, f64) {
    let saving = (3.0 * nu).exp() * nu.cosh();
    ((4.0 * mu_eps).exp() / saving, saving, residual_error(nu))
}

/// Residual rate nu that leaves a target circuit error fraction after
/// verification: inverts p_circ = (1 - e^{-nu})^2 / 2.
pub fn nu_for_residual_error(p_circ: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&p_circ) {
        return Err(Error::InvalidProbability(p_circ));
    }
    Ok(-(1.0 - (2.0 * p_circ).sqrt()).ln())
}

/// Optimal split of samples between two estimator inputs with sensitivities
/// a and b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCost {
    /// Fraction of samples on the first input: a / (a + b).
    pub alpha: f64,
    /// Cost at the optimal split: (a + b)^2.
    pub cost: f64,
    /// Cost of the even split: 2 (a^2 + b^2).
    pub naive_cost: f64,
}

pub fn optimal_split(a: f64, b: f64) -> Result<SplitCost> {
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::InvalidArgument(
            "sensitivities must be positive".into(),
        ));
    }
    Ok(SplitCost {
        alpha: a / (a + b),
        cost: (a + b) * (a + b),
        naive_cost: 2.0 * (a * a + b * b),
    })
}

/// Break-even sample count between a low-bias/high-cost technique (c1, eps1)
/// and a cheaper biased one (c2, eps2): N* = (c1 - c2) / (eps2^2 - eps1^2),
/// plus the leading-order form c1 / eps2^2.
pub fn break_even(c1: f64, c2: f64, eps1: f64, eps2: f64) -> Result<(f64, f64)> {
    if eps2 <= eps1 || eps1 < 0.0 {
        return Err(Error::InvalidArgument(
            "break-even needs eps2 > eps1 >= 0".into(),
        ));
    }
    if c2 > c1 {
        return Err(Error::InvalidArgument("break-even needs c1 >= c2".into()));
    }
    let denom = eps2 * eps2 - eps1 * eps1;
    Ok(((c1 - c2) / denom, c1 / (eps2 * eps2)))
}

/// Cost factors of pure quasi-probability, QE (lambda = 2) and QH for the
/// swap-network noise model: mu_eps = 15 mu / 16 and mu_d = nu = mu / 2.
pub fn fh_cost_curves(gamma: f64, mu: f64) -> (f64, f64, f64) {
    let mu_eps = 15.0 / 16.0 * mu;
    (
        (4.0 * mu_eps).exp(),
        cost_qe(gamma, mu, 2.0, mu_eps),
        cost_qh(gamma, mu_eps, 0.5 * mu),
    )
}

/// Root of f on [lo, hi] by bisection, if f changes sign there.
pub fn find_crossing(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if (fa > 0.0) == (fb > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 || (b - a) < 1e-12 {
            return Some(mid);
        }
        if (fa > 0.0) == (fm > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

// ---------------------------------------------------------------------------
// combined pipelines
// ---------------------------------------------------------------------------

/// Evaluation backend for the combined pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Apply the transformed channels analytically on the density matrix.
    Exact,
    /// Estimate expectations by sign-weighted pure-state trajectories.
    MonteCarlo { trajectories: usize, seed: u64 },
}

/// Sampling-cost record attached to a mitigated estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub method: &'static str,
    pub cost_factor: f64,
    pub mu: Option<f64>,
    pub mu_eps: Option<f64>,
    pub mu_d: Option<f64>,
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
}

fn gamma_from_points(o_low_noise: f64, o_high_noise: f64, count_gap: f64) -> f64 {
    if o_low_noise == 0.0
        || o_high_noise == 0.0
        || o_low_noise.signum() != o_high_noise.signum()
        || count_gap <= 0.0
    {
        return 0.0;
    }
    ((o_low_noise / o_high_noise).abs().ln() / count_gap).clamp(0.0, 1.0)
}

fn mc_mean_direct(
    circuit: &NoisyCircuit,
    observable: &PauliString,
    trajectories: usize,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let plan = TrajectoryPlan::direct(circuit, *observable)?;
    let mut sum = 0.0;
    for _ in 0..trajectories {
        sum += mc_trajectory(circuit, &plan, rng)?.value;
    }
    Ok(sum / trajectories as f64)
}

fn mc_mean_signed(
    circuit: &NoisyCircuit,
    plan: &TrajectoryPlan,
    trajectories: usize,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    let q = plan.total_one_norm();
    let mut sum = 0.0;
    for _ in 0..trajectories {
        let t = mc_trajectory(circuit, plan, rng)?;
        sum += f64::from(t.sign) * t.value;
    }
    Ok(q * sum / trajectories as f64)
}

/// Quasi-probability with exponential extrapolation over a batch of
/// observables sharing the simulations: suppress the noise by the factor
/// lambda, probe the native and suppressed rates, extrapolate with the
/// two-point formula. Per-observable failures (non-exponential data) are
/// reported in place.
pub fn qe_estimates(
    circuit: &NoisyCircuit,
    observables: &[PauliString],
    lambda: f64,
    backend: &Backend,
) -> Result<Vec<Result<(f64, CostReport)>>> {
    if lambda <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "pipeline needs lambda > 1, got {lambda}"
        )));
    }
    let mu = circuit.mean_error_count();
    let mu_eps = circuit.mean_nonidentity_count();
    let nu = mu / lambda;
    let points: Vec<(f64, f64)> = match backend {
        Backend::Exact => {
            let high = run_exact(circuit, 1.0)?;
            let low = run_exact(circuit, 1.0 / lambda)?;
            observables
                .iter()
                .map(|obs| Ok((low.expectation_pauli(obs)?, high.expectation_pauli(obs)?)))
                .collect::<Result<_>>()?
        }
        Backend::MonteCarlo { trajectories, seed } => {
            let mut out = Vec::with_capacity(observables.len());
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            for obs in observables {
                let high = mc_mean_direct(circuit, obs, *trajectories, &mut rng)?;
                let plan = TrajectoryPlan::rate_reduction(circuit, *obs, lambda)?;
                let low = mc_mean_signed(circuit, &plan, *trajectories, &mut rng)?;
                out.push((low, high));
            }
            out
        }
    };
    Ok(points
        .into_iter()
        .map(|(o_nu, o_mu)| {
            let estimate = if mu == 0.0 {
                o_mu
            } else {
                two_point_exp(o_nu, o_mu, lambda)?
            };
            let gamma = gamma_from_points(o_nu, o_mu, mu - nu);
            Ok((
                estimate,
                CostReport {
                    method: "QE",
                    cost_factor: cost_qe(gamma, mu, lambda, mu_eps),
                    mu: Some(mu),
                    mu_eps: Some(mu_eps),
                    mu_d: None,
                    nu: Some(nu),
                    gamma: Some(gamma),
                    lambda: Some(lambda),
                },
            ))
        })
        .collect())
}

/// Single-observable wrapper over [`qe_estimates`].
pub fn qe_pipeline(
    circuit: &NoisyCircuit,
    observable: &PauliString,
    lambda: f64,
    backend: &Backend,
) -> Result<(f64, CostReport)> {
    qe_estimates(circuit, std::slice::from_ref(observable), lambda, backend)?
        .pop()
        .expect("one observable in, one result out")
}

/// Quasi-probability with hyperbolic extrapolation over a batch of
/// observables: transform every local channel to its detectable remainder,
/// verify the symmetry and recombine the passed and failed branches.
/// Observables that anticommute with the symmetry or produce a negative
/// radicand are reported as per-observable errors.
pub fn qh_estimates(
    circuit: &NoisyCircuit,
    observables: &[PauliString],
    symmetry: &PauliString,
    backend: &Backend,
) -> Result<Vec<Result<(f64, CostReport)>>> {
    let mu = circuit.mean_error_count();
    let mu_eps = circuit.mean_nonidentity_count();
    if mu == 0.0 {
        let clean = run_exact(circuit, 0.0)?;
        return observables
            .iter()
            .map(|obs| {
                if !commutes(obs, symmetry) {
                    return Ok(Err(Error::NonCommutingObservable));
                }
                let estimate = clean.expectation_pauli(obs)?;
                Ok(Ok((
                    estimate,
                    CostReport {
                        method: "QH",
                        cost_factor: 1.0,
                        mu: Some(0.0),
                        mu_eps: Some(0.0),
                        mu_d: Some(0.0),
                        nu: None,
                        gamma: None,
                        lambda: None,
                    },
                )))
            })
            .collect();
    }
    let sector = if (symmetry.z_bits() & circuit.initial_state())
        .count_ones()
        .is_multiple_of(2)
    {
        1i8
    } else {
        -1i8
    };
    let (detectable, mu_d) = circuit.detectable_remainder(symmetry)?;
    // per-observable (o_pass, o_fail, p_pass) triples
    let triples: Vec<Result<(f64, f64, f64)>> = match backend {
        Backend::Exact => {
            let rho = run_exact(&detectable, 1.0)?;
            observables
                .iter()
                .map(|obs| symmetry_partition(&rho, symmetry, sector, obs))
                .collect()
        }
        Backend::MonteCarlo { trajectories, seed } => {
            let mut out = Vec::with_capacity(observables.len());
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            for obs in observables {
                if !commutes(obs, symmetry) {
                    out.push(Err(Error::NonCommutingObservable));
                    continue;
                }
                let plan = TrajectoryPlan::detectable_transform(circuit, *obs, *symmetry)?;
                let q = plan.total_one_norm();
                let (mut sv_pass, mut s_pass, mut sv_fail, mut s_fail) =
                    (0.0f64, 0.0f64, 0.0f64, 0.0f64);
                for _ in 0..*trajectories {
                    let t = mc_trajectory(circuit, &plan, &mut rng)?;
                    let s = f64::from(t.sign);
                    if t.passed {
                        sv_pass += s * t.value;
                        s_pass += s;
                    } else {
                        sv_fail += s * t.value;
                        s_fail += s;
                    }
                }
                if s_pass.abs() < 1e-12 {
                    out.push(Err(Error::EmptyBranch(0.0)));
                    continue;
                }
                let o_pass = sv_pass / s_pass;
                let o_fail = if s_fail.abs() < 1e-12 {
                    0.0
                } else {
                    sv_fail / s_fail
                };
                let p_pass = q * s_pass / *trajectories as f64;
                out.push(Ok((o_pass, o_fail, p_pass)));
            }
            out
        }
    };
    Ok(triples
        .into_iter()
        .map(|triple| {
            let (o_pass, o_fail, p_pass) = triple?;
            if p_pass <= 0.5 {
                // more failed than passed runs: outside the invertible range
                return Err(Error::NonHyperbolicDecay(2.0 * p_pass - 1.0));
            }
            // the measured pass probability fixes the effective detectable
            // count, absorbing the finite-site deviation from the Poisson
            // weights
            let mu_hat = mu_d_from_pass_prob(p_pass.clamp(0.0, 1.0))?;
            let estimate = if mu_hat <= 0.0 {
                o_pass
            } else {
                hyperbolic_extrapolate(o_pass, o_fail, mu_hat)?
            };
            let o_mud = p_pass * o_pass + (1.0 - p_pass) * o_fail;
            let gamma = if mu_hat > 0.0 {
                gamma_from_points(estimate, o_mud, mu_hat)
            } else {
                0.0
            };
            Ok((
                estimate,
                CostReport {
                    method: "QH",
                    cost_factor: cost_qh(gamma, mu_eps, mu_d),
                    mu: Some(mu),
                    mu_eps: Some(mu_eps),
                    mu_d: Some(mu_d),
                    nu: None,
                    gamma: Some(gamma),
                    lambda: None,
                },
            ))
        })
        .collect())
}

/// Single-observable wrapper over [`qh_estimates`].
pub fn qh_pipeline(
    circuit: &NoisyCircuit,
    observable: &PauliString,
    symmetry: &PauliString,
    backend: &Backend,
) -> Result<(f64, CostReport)> {
    if !commutes(observable, symmetry) {
        return Err(Error::NonCommutingObservable);
    }
    qh_estimates(circuit, std::slice::from_ref(observable), symmetry, backend)?
        .pop()
        .expect("one observable in, one result out")
}

/// Pure quasi-probability over a batch of observables: remove the noise
/// entirely. On the exact backend the estimate is the noiseless expectation
/// (full cancellation is exact); the Monte Carlo backend samples the exact
/// per-site inverses.
pub fn q_estimates(
    circuit: &NoisyCircuit,
    observables: &[PauliString],
    backend: &Backend,
) -> Result<Vec<(f64, CostReport)>> {
    let mu = circuit.mean_error_count();
    let mu_eps = circuit.mean_nonidentity_count();
    let cost = (4.0 * mu_eps).exp();
    let report = |_: &PauliString| CostReport {
        method: "Q",
        cost_factor: cost,
        mu: Some(mu),
        mu_eps: Some(mu_eps),
        mu_d: None,
        nu: Some(0.0),
        gamma: None,
        lambda: None,
    };
    match backend {
        Backend::Exact => {
            let clean = run_exact(circuit, 0.0)?;
            observables
                .iter()
                .map(|obs| Ok((clean.expectation_pauli(obs)?, report(obs))))
                .collect()
        }
        Backend::MonteCarlo { trajectories, seed } => {
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            observables
                .iter()
                .map(|obs| {
                    let plan = TrajectoryPlan::full_inverse(circuit, *obs)?;
                    let est = mc_mean_signed(circuit, &plan, *trajectories, &mut rng)?;
                    Ok((est, report(obs)))
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::named_channel;
    use crate::sim::{Gate, NoiseSite};

    fn synth_points(components: &[(f64, f64)], mus: &[f64]) -> Vec<(f64, f64)> {
        mus.iter()
            .map(|&mu| {
                (
                    mu,
                    components
                        .iter()
                        .map(|(a, g)| a * (-g * mu).exp())
                        .sum::<f64>(),
                )
            })
            .collect()
    }

    #[test]
    fn two_point_exp_examples() {
        // exact single-exp round trip
        let a = 1.0f64;
        let gamma = 0.1f64;
        let est = two_point_exp(
            a * (-gamma * 1.0f64).exp(),
            a * (-gamma * 2.0f64).exp(),
            2.0,
        )
        .unwrap();
        assert!((est - 1.0).abs() < 1e-12);

        // flat line returns the common value
        assert!((two_point_exp(0.4, 0.4, 2.0).unwrap() - 0.4).abs() < 1e-15);

        // negative amplitude round trip
        let a = -0.8f64;
        let gamma = 0.3f64;
        let est = two_point_exp(
            a * (-gamma * 0.5f64).exp(),
            a * (-gamma * 1.5f64).exp(),
            3.0,
        )
        .unwrap();
        assert!((est + 0.8).abs() < 1e-12);

        assert!(matches!(
            two_point_exp(0.5, -0.5, 2.0),
            Err(Error::NonExponentialData)
        ));
        assert!(matches!(
            two_point_exp(0.0, 0.5, 2.0),
            Err(Error::NonExponentialData)
        ));
    }

    #[test]
    fn dual_exp_fit_recovers_exact_parameters() {
        let truth = [(0.6, 0.2), (0.4, 0.9)];
        let points = synth_points(&truth, &[0.5, 1.0, 1.5, 2.0]);
        let model = fit_multi_exp(&points, 2).unwrap();
        assert_eq!(model.k(), 2);
        for ((a, g), (ta, tg)) in model.components().iter().zip(truth.iter()) {
            assert!((a - ta).abs() < 1e-6, "amplitude {a} vs {ta}");
            assert!((g - tg).abs() < 1e-6, "rate {g} vs {tg}");
        }
        assert!((model.zero_noise() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_exp_fit_matches_two_point_formula() {
        let points = synth_points(&[(0.7, 0.35)], &[0.8, 1.6]);
        let model = fit_multi_exp(&points, 1).unwrap();
        let closed = two_point_exp(points[0].1, points[1].1, 2.0).unwrap();
        assert!((model.zero_noise() - closed).abs() < 1e-9);
    }

    #[test]
    fn flat_data_fits_zero_rate() {
        let points: Vec<(f64, f64)> = [0.5, 1.0, 1.5, 2.0].iter().map(|&m| (m, 0.42)).collect();
        let model = fit_multi_exp(&points, 1).unwrap();
        assert_eq!(model.k(), 1);
        let (a, g) = model.components()[0];
        assert!((a - 0.42).abs() < 1e-9);
        assert!(g.abs() < 1e-9);
    }

    #[test]
    fn select_model_prefers_small_k() {
        let single = synth_points(&[(0.9, 0.4)], &[0.5, 1.0, 1.5, 2.0]);
        let model = select_model(&single, 2, 1e-4).unwrap();
        assert_eq!(model.k(), 1);
        assert!(!model.warning());
    }

    #[test]
    fn select_model_needs_two_components_for_sign_crossing() {
        let truth = [(-0.3, 0.1), (0.5, 0.9)];
        let points = synth_points(&truth, &[0.5, 1.0, 1.5, 2.0]);
        let single = fit_multi_exp(&points, 1).unwrap();
        let scale = points.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
        assert!(single.residual / scale > 1e-4);
        let model = select_model(&points, 2, 1e-4).unwrap();
        assert_eq!(model.k(), 2);
        assert!(!model.warning());
        assert!((model.zero_noise() - 0.2).abs() < 1e-5);
    }

    #[test]
    fn select_model_flags_unreachable_tolerance() {
        // points off any two-exponential curve by construction (random jitter)
        let points = vec![
            (0.5, 0.9),
            (1.0, 0.2),
            (1.5, 0.75),
            (2.0, 0.1),
            (2.5, 0.6),
            (3.0, 0.05),
        ];
        let model = select_model(&points, 2, 1e-10).unwrap();
        assert!(model.warning());
    }

    #[test]
    fn nested_models_have_monotone_residual() {
        let points = synth_points(&[(0.5, 0.15), (0.4, 0.8)], &[0.4, 0.9, 1.3, 1.8, 2.2, 2.8]);
        let m1 = fit_multi_exp(&points, 1).unwrap();
        let m2 = fit_multi_exp(&points, 2).unwrap();
        assert!(m2.residual <= m1.residual + 1e-15);
    }

    #[test]
    fn power_decay_fit_recovers_count_profile() {
        let truth = [(0.7, 0.3), (0.3, 1.0)];
        let points: Vec<(f64, f64)> = (0..8)
            .map(|l| {
                let y: f64 = truth
                    .iter()
                    .map(|(a, g): &(f64, f64)| a * (1.0 - g).powi(l))
                    .sum();
                (l as f64, y)
            })
            .collect();
        let model = fit_power_decay(&points, 2).unwrap();
        assert!((model.zero_noise() - 1.0).abs() < 1e-7);
        let gammas: Vec<f64> = model.components().iter().map(|c| c.1).collect();
        assert!((gammas[0] - 0.3).abs() < 1e-6);
        assert!((gammas[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hyperbolic_round_trip_and_failure() {
        let (o_c, o_s) = forward_partition(0.8, 0.3, 1.0).unwrap();
        assert!((o_c - 0.650739).abs() < 1e-5);
        assert!((o_s - 0.516394).abs() < 1e-5);
        let est = hyperbolic_extrapolate(o_c, o_s, 1.0).unwrap();
        assert!((est - 0.8).abs() < 1e-12);

        // gamma = 0: equal branches return the common value
        let est = hyperbolic_extrapolate(0.37, 0.37, 1.7).unwrap();
        assert!((est - 0.37).abs() < 1e-12);

        assert!(matches!(
            hyperbolic_extrapolate(0.1, 0.9, 1.0),
            Err(Error::NonHyperbolicDecay(_))
        ));
    }

    #[test]
    fn hyperbolic_identity_on_grid() {
        for &o0 in &[-0.9, -0.2, 0.3, 1.0] {
            for g in 0..10 {
                let gamma = g as f64 / 10.0;
                for m in 1..=6 {
                    let mu_d = m as f64 * 0.5;
                    let (o_c, o_s) = forward_partition(o0, gamma, mu_d).unwrap();
                    let est = hyperbolic_extrapolate(o_c, o_s, mu_d).unwrap();
                    assert!(
                        (est - o0).abs() < 1e-10,
                        "o0 {o0} gamma {gamma} mu_d {mu_d}: {est}"
                    );
                }
            }
        }
    }

    #[test]
    fn recombination_examples() {
        assert_eq!(recombine_identity_check(0.7, 0.3, 0.0), 0.7);
        let c = 0.42;
        for mu_d in [0.3, 1.0, 2.5] {
            assert!((recombine_identity_check(c, c, mu_d) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetry_cost_examples() {
        assert!((cost_symmetry(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(detection_prob(0.0), 0.0);
        assert_eq!(residual_error(0.0), 0.0);

        assert!((cost_symmetry(50.0) - 2.0).abs() < 1e-12);
        assert!((detection_prob(50.0) - 0.5).abs() < 1e-12);
        assert!((residual_error(50.0) - 0.5).abs() < 1e-12);

        assert!((cost_symmetry(0.5) - 1.4621).abs() < 1e-4);
        assert!((detection_prob(0.5) - 0.31606).abs() < 1e-5);
        assert!((residual_error(0.5) - 0.07740).abs() < 1e-5);
    }

    #[test]
    fn extrapolation_cost_examples() {
        assert!((cost_exp_extrapolation(0.0, 1.0, 2.0) - 10.0).abs() < 1e-12);
        assert!((cost_exp_extrapolation(0.5, 1.0, 2.0) - 36.524).abs() < 1e-2);
        let lambda: f64 = 3.0;
        assert!(
            (cost_exp_extrapolation(0.7, 0.0, lambda)
                - 2.0 * (lambda * lambda + 1.0) / (lambda - 1.0).powi(2))
            .abs()
                < 1e-12
        );
    }

    #[test]
    fn qe_cost_examples() {
        let c = cost_qe(0.5, 2.0, 2.0, 1.875);
        assert!((c - 939.45).abs() < 0.5);
        let lambda: f64 = 2.0;
        assert!(
            (cost_qe(0.3, 0.0, lambda, 0.0)
                - 2.0 * (lambda * lambda + 1.0) / (lambda - 1.0).powi(2))
            .abs()
                < 1e-12
        );
        assert!(
            (cost_qe(0.0, 1.0, 2.0, 0.0) - cost_exp_extrapolation(0.0, 1.0, 2.0)).abs() < 1e-12
        );
    }

    #[test]
    fn hyperbolic_cost_examples() {
        assert!((cost_hyperbolic(0.4, 0.0) - 1.0).abs() < 1e-15);
        assert!((cost_hyperbolic(1.0, 1.0) - 1.0f64.cosh() * 1.0f64.exp()).abs() < 1e-12);
        assert!((cost_hyperbolic(1.0, 1.0) - 4.1945).abs() < 1e-3);
        assert!((cost_hyperbolic(0.3, 1.0) - 9.022).abs() < 1e-2);
    }

    #[test]
    fn qh_cost_examples() {
        // swap-network values at mu = 1, gamma = 0.5
        let c = cost_qh(0.5, 15.0 / 16.0, 0.5);
        assert!((c - 12.06).abs() < 0.01);
        // mu_d = 0 reduces to pure quasi-probability
        for mu_eps in [0.2, 0.9375, 1.875] {
            assert!((cost_qh(0.7, mu_eps, 0.0) - (4.0 * mu_eps).exp()).abs() < 1e-10);
        }
        // strictly below pure quasi-probability for any positive mu_d, and
        // every cost factor stays at or above one on the physical domain
        for g in 0..=10 {
            let gamma = g as f64 / 10.0;
            for m in 1..=16 {
                let mu = 0.25 * m as f64;
                let (q0, qe, qh) = fh_cost_curves(gamma, mu);
                assert!(qh < q0, "gamma {gamma} mu {mu}");
                assert!(q0 >= 1.0 && qe >= 1.0 && qh >= 1.0);
                assert!(cost_hyperbolic(gamma, 0.5 * mu) >= 1.0);
                assert!(cost_symmetry(0.5 * mu) >= 1.0);
            }
        }
    }

    #[test]
    fn qs_cost_examples() {
        let (cost, saving, p_circ) = cost_qs(0.9375, 0.0);
        assert!((saving - 1.0).abs() < 1e-15);
        assert_eq!(p_circ, 0.0);
        assert!((cost - 3.75f64.exp()).abs() < 1e-9);

        let nu = nu_for_residual_error(1e-2).unwrap();
        let (_, saving, p_circ) = cost_qs(0.9375, nu);
        assert!((p_circ - 1e-2).abs() < 1e-12);
        assert!((1.4..1.65).contains(&saving), "saving {saving}");

        let nu = nu_for_residual_error(1e-3).unwrap();
        let (_, saving, _) = cost_qs(0.9375, nu);
        assert!((1.1..1.2).contains(&saving), "saving {saving}");
    }

    #[test]
    fn postproc_cost_examples() {
        assert_eq!(cost_postproc(1.0).unwrap(), 1.0);
        assert!((cost_postproc(0.8).unwrap() - 1.5625).abs() < 1e-12);
        assert!(cost_postproc(0.0).is_err());
    }

    #[test]
    fn optimal_split_examples() {
        let s = optimal_split(1.0, 1.0).unwrap();
        assert_eq!(s.alpha, 0.5);
        assert_eq!(s.cost, 4.0);
        assert_eq!(s.naive_cost, 4.0);

        let s = optimal_split(2.0, 1.0).unwrap();
        assert!((s.alpha - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.cost, 9.0);
        assert_eq!(s.naive_cost, 10.0);

        // C(alpha+) <= C(0.5) <= 2 C(alpha+)
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            use rand::Rng;
            let a = 0.01 + rng.gen::<f64>() * 10.0;
            let b = 0.01 + rng.gen::<f64>() * 10.0;
            let s = optimal_split(a, b).unwrap();
            assert!(s.cost <= s.naive_cost + 1e-12);
            assert!(s.naive_cost <= 2.0 * s.cost + 1e-12);
        }
    }

    #[test]
    fn break_even_examples() {
        let (exact, leading) = break_even(42.5, 0.0, 0.0, 3e-3).unwrap();
        assert!((exact - 42.5 / 9e-6).abs() < 1e-6);
        assert_eq!(exact, leading);
        assert!((1e6..1e7).contains(&exact));

        let (exact, _) = break_even(5.0, 5.0, 0.0, 0.1).unwrap();
        assert_eq!(exact, 0.0);
        assert!(break_even(1.0, 0.0, 0.2, 0.1).is_err());
    }

    #[test]
    fn fh_cost_crossings() {
        // QE vs pure quasi-probability at gamma = 1 near mu = 2.4
        let mu = find_crossing(
            |mu| {
                let (q0, qe, _) = fh_cost_curves(1.0, mu);
                qe - q0
            },
            1.0,
            3.5,
        )
        .unwrap();
        assert!((mu - 2.4).abs() < 0.1, "crossing at {mu}");

        // QE vs QH at gamma = 0 near mu = 1.8
        let mu = find_crossing(
            |mu| {
                let (_, qe, qh) = fh_cost_curves(0.0, mu);
                qe - qh
            },
            1.0,
            3.0,
        )
        .unwrap();
        assert!((mu - 1.8).abs() < 0.1, "crossing at {mu}");

        // QE vs QH at gamma = 0.5 near mu = 3.9
        let mu = find_crossing(
            |mu| {
                let (_, qe, qh) = fh_cost_curves(0.5, mu);
                qe - qh
            },
            2.0,
            5.0,
        )
        .unwrap();
        assert!((mu - 3.9).abs() < 0.1, "crossing at {mu}");
    }

    fn uniform_detectable_circuit(sites: usize, mu_d: f64) -> NoisyCircuit {
        let fire = named_channel("detectable2", 1.0).unwrap();
        let mut circuit = NoisyCircuit::new(2, 0).unwrap();
        let p = mu_d / sites as f64;
        for _ in 0..sites {
            circuit
                .push(
                    Gate::identity_two(0, 1),
                    Some(NoiseSite::new(2, vec![0, 1], p, fire.clone()).unwrap()),
                )
                .unwrap();
        }
        circuit
    }

    #[test]
    fn qh_pipeline_small_rate_bias() {
        // observable ZI is erased by any detectable firing (mean commutator
        // zero), an exactly single-exponential count profile
        let circuit = uniform_detectable_circuit(144, 0.01);
        let obs: PauliString = "ZI".parse().unwrap();
        let sym: PauliString = "ZZ".parse().unwrap();
        let (est, report) = qh_pipeline(&circuit, &obs, &sym, &Backend::Exact).unwrap();
        assert!((est - 1.0).abs() < 1e-6, "bias {}", (est - 1.0).abs());
        assert!(report.cost_factor >= 1.0);
        assert!((report.mu_d.unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn qh_pipeline_rejects_anticommuting_observable() {
        let circuit = uniform_detectable_circuit(10, 0.1);
        let obs: PauliString = "XI".parse().unwrap();
        let sym: PauliString = "ZZ".parse().unwrap();
        assert!(matches!(
            qh_pipeline(&circuit, &obs, &sym, &Backend::Exact),
            Err(Error::NonCommutingObservable)
        ));
    }

    #[test]
    fn pipelines_are_exact_on_noiseless_circuits() {
        let mut circuit = NoisyCircuit::new(2, 1).unwrap();
        circuit.push(Gate::givens(0, 1, 0.8, 0.5), None).unwrap();
        let obs: PauliString = "ZI".parse().unwrap();
        let truth = run_exact(&circuit, 0.0)
            .unwrap()
            .expectation_pauli(&obs)
            .unwrap();
        let (qe, _) = qe_pipeline(&circuit, &obs, 2.0, &Backend::Exact).unwrap();
        assert!((qe - truth).abs() < 1e-12);
        let sym: PauliString = "ZZ".parse().unwrap();
        let (qh, report) = qh_pipeline(&circuit, &obs, &sym, &Backend::Exact).unwrap();
        assert!((qh - truth).abs() < 1e-12);
        assert_eq!(report.cost_factor, 1.0);
    }

    #[test]
    fn qe_pipeline_reduces_bias_on_uniform_noise() {
        let fire = named_channel("depolarizing2", 1.0).unwrap();
        let mut circuit = NoisyCircuit::new(2, 1).unwrap();
        for k in 0..32 {
            circuit
                .push(
                    Gate::givens(0, 1, 0.2 + 0.05 * k as f64, 0.3),
                    Some(NoiseSite::new(2, vec![0, 1], 0.5 / 32.0, fire.clone()).unwrap()),
                )
                .unwrap();
        }
        let obs: PauliString = "ZI".parse().unwrap();
        let truth = run_exact(&circuit, 0.0)
            .unwrap()
            .expectation_pauli(&obs)
            .unwrap();
        let noisy = run_exact(&circuit, 1.0)
            .unwrap()
            .expectation_pauli(&obs)
            .unwrap();
        let (est, report) = qe_pipeline(&circuit, &obs, 2.0, &Backend::Exact).unwrap();
        assert!(
            (est - truth).abs() < 0.2 * (noisy - truth).abs(),
            "est {est} truth {truth} noisy {noisy}"
        );
        assert!(report.cost_factor >= 1.0);
        assert!((report.mu.unwrap() - 0.5).abs() < 1e-12);
    }
}
