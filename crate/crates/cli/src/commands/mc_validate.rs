//! Monte Carlo validation: estimator unbiasedness, variance inflation
//! against the predicted cost factor, and symmetry-verification retention.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde_json::json;

use qem_core::extrap::cost_symmetry;
use qem_core::fermi_hubbard::{
    attach_noise, build_circuit, parity_symmetry, FhCircuitSpec, NoiseModel,
};
use qem_core::pauli::PauliString;
use qem_core::sim::{mc_trajectory, run_exact, sample_outcome, NoisyCircuit, TrajectoryPlan};

use crate::config::ExperimentConfig;
use crate::output::write_json;
use crate::{CliError, CommonArgs};

const CHUNK: usize = 4096;

/// Sign-weighted +/-1 outcome statistics plus the pass fraction, accumulated
/// over deterministic per-chunk rng streams.
struct Stats {
    n: usize,
    sum: f64,
    sumsq: f64,
    passed: usize,
}

fn run_trajectories(
    circuit: &NoisyCircuit,
    plan: &TrajectoryPlan,
    n: usize,
    seed: u64,
    scale: f64,
) -> Result<Stats, CliError> {
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<Result<Stats, qem_core::Error>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64 + 1);
            let take = CHUNK.min(n - ci * CHUNK);
            let mut stats = Stats {
                n: take,
                sum: 0.0,
                sumsq: 0.0,
                passed: 0,
            };
            for _ in 0..take {
                let t = mc_trajectory(circuit, plan, &mut rng)?;
                let outcome = f64::from(sample_outcome(t.value, &mut rng));
                let x = scale * f64::from(t.sign) * outcome;
                stats.sum += x;
                stats.sumsq += x * x;
                stats.passed += usize::from(t.passed);
            }
            Ok(stats)
        })
        .collect();
    let mut total = Stats {
        n: 0,
        sum: 0.0,
        sumsq: 0.0,
        passed: 0,
    };
    for partial in partials {
        let partial = partial?;
        total.n += partial.n;
        total.sum += partial.sum;
        total.sumsq += partial.sumsq;
        total.passed += partial.passed;
    }
    Ok(total)
}

impl Stats {
    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn variance(&self) -> f64 {
        let n = self.n as f64;
        ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let (config, config_hash) = ExperimentConfig::load(&args.config)?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| config.output.dir.clone().into());
    let mc = &config.mc;
    if mc.trajectories < 10_000 {
        return Err(CliError::Config(
            "mc.trajectories must be at least 10000".into(),
        ));
    }
    let spec = FhCircuitSpec {
        lx: mc.lx,
        ly: mc.ly,
        layers: mc.layers,
        params: None,
        seed: args.seed.unwrap_or(config.circuit.seed),
    };
    let circuit = build_circuit(&spec)?;
    let observable: PauliString = mc
        .observable
        .parse()
        .map_err(|e| CliError::Config(format!("mc.observable: {e}")))?;
    if observable.n_qubits() != circuit.n_qubits() {
        return Err(CliError::Config(format!(
            "mc.observable acts on {} qubits, circuit has {}",
            observable.n_qubits(),
            circuit.n_qubits()
        )));
    }

    // quasi-probability cancellation under depolarising noise at the
    // requested mean non-identity count
    let mu = mc.mu_eps * 16.0 / 15.0;
    let noisy = attach_noise(&circuit, NoiseModel::Depolarizing, mu)?;
    let truth = run_exact(&noisy, 0.0)?.expectation_pauli(&observable)?;
    let noisy_expect = run_exact(&noisy, 1.0)?.expectation_pauli(&observable)?;

    let direct_plan = TrajectoryPlan::direct(&noisy, observable)?;
    let direct = run_trajectories(&noisy, &direct_plan, mc.trajectories, mc.seed, 1.0)?;
    let direct_z = (direct.mean() - noisy_expect) / direct.stderr();

    let inverse_plan = TrajectoryPlan::full_inverse(&noisy, observable)?;
    let q = inverse_plan.total_one_norm();
    let quasi = run_trajectories(
        &noisy,
        &inverse_plan,
        mc.trajectories,
        mc.seed.wrapping_add(1),
        q,
    )?;
    let quasi_z = (quasi.mean() - truth) / quasi.stderr();
    let inflation_emp = quasi.variance();
    let inflation_pred = q * q - truth * truth;
    let inflation_ratio = inflation_emp / inflation_pred;

    // retention under purely detectable noise
    let detectable = attach_noise(&circuit, NoiseModel::Detectable, mc.mu_d)?;
    let symmetry = parity_symmetry(circuit.n_qubits());
    let verify_plan = TrajectoryPlan::verify_only(&detectable, observable, symmetry)?;
    let verify = run_trajectories(
        &detectable,
        &verify_plan,
        mc.trajectories,
        mc.seed.wrapping_add(2),
        1.0,
    )?;
    let retention_expected = (-mc.mu_d).exp() * mc.mu_d.cosh();
    let retention_observed = verify.passed as f64 / verify.n as f64;
    let retention_sigma =
        (retention_expected * (1.0 - retention_expected) / verify.n as f64).sqrt();
    let retention_z = (retention_observed - retention_expected) / retention_sigma;

    let quasi_pass = quasi_z.abs() <= 3.0;
    let inflation_pass = (inflation_ratio - 1.0).abs() <= 0.10;
    let retention_pass = retention_z.abs() <= 3.0;

    let report = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": format!("{config_hash:016x}"),
        "seed": mc.seed,
        "circuit": {
            "n_qubits": circuit.n_qubits(),
            "two_qubit_gates": circuit.two_qubit_gate_count(),
            "observable": observable.to_string(),
        },
        "direct": {
            "mu": mu,
            "trajectories": direct.n,
            "mean": direct.mean(),
            "stderr": direct.stderr(),
            "noisy_expectation": noisy_expect,
            "z": direct_z,
            "pass": direct_z.abs() <= 3.0,
        },
        "quasi": {
            "mu_eps": mc.mu_eps,
            "one_norm": q,
            // exact product of per-site inverse norms squared, and the
            // Poisson-limit first-order form it converges to
            "cost_factor_exact": q * q,
            "cost_factor_poisson_limit": (4.0 * mc.mu_eps).exp(),
            "trajectories": quasi.n,
            "mean": quasi.mean(),
            "stderr": quasi.stderr(),
            "truth": truth,
            "z": quasi_z,
            "pass": quasi_pass,
            "variance_emp": inflation_emp,
            "variance_pred": inflation_pred,
            "variance_ratio": inflation_ratio,
            "variance_pass": inflation_pass,
        },
        "retention": {
            "mu_d": mc.mu_d,
            "trajectories": verify.n,
            "expected": retention_expected,
            "observed": retention_observed,
            "z": retention_z,
            "pass": retention_pass,
            "cost_symmetry": cost_symmetry(mc.mu_d),
        },
        "pass": quasi_pass && inflation_pass && retention_pass,
    });
    write_json(&out_dir.join("mc_validate.json"), &report)?;
    if !(quasi_pass && inflation_pass && retention_pass) {
        return Err(CliError::Numerical(qem_core::Error::InvalidArgument(
            "mc-validate checks failed; see mc_validate.json".into(),
        )));
    }
    Ok(())
}
