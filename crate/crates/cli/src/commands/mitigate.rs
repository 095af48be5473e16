//! Mitigated estimates for one method over the probe grid, with
//! per-class aggregate rows.

use rayon::prelude::*;

use qem_core::extrap::{
    q_estimates, qe_estimates, qh_estimates, select_model, Backend, CostReport,
};
use qem_core::fermi_hubbard::{attach_noise_channel, parity_symmetry};
use qem_core::sim::run_exact;
use qem_core::Error;

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, CsvFile};
use crate::{CliError, CommonArgs};

const HEADER: &str = "observable,method,mu,estimate,truth,bias,cost_factor,k_class,excluded";

struct Detail {
    observable: String,
    mu: f64,
    estimate: Option<(f64, CostReport)>,
    truth: f64,
    k_class: usize,
}

pub fn run(args: &CommonArgs, method: &str, self_audit: bool) -> Result<(), CliError> {
    let (config, config_hash) = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(config.circuit.seed);
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| config.output.dir.clone().into());
    for model in config.noise.model.names() {
        run_model(args, &config, method, self_audit, &model, seed, config_hash, &out_dir)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_model(
    args: &CommonArgs,
    config: &ExperimentConfig,
    method: &str,
    self_audit: bool,
    model: &str,
    seed: u64,
    config_hash: u64,
    out_dir: &std::path::Path,
) -> Result<(), CliError> {
    let fire = config.fire_channel(model)?;
    let (circuit, observables) = super::circuit_and_observables(config, args.seed)?;
    let symmetry = parity_symmetry(circuit.n_qubits());
    let lambda = config.methods.lambda;

    // unmitigated decay over the probe grid classifies each observable as
    // single- or dual-exponential
    let mu_max = config
        .probes
        .mu
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let reference = attach_noise_channel(&circuit, &fire, mu_max)?;
    let truth_state = run_exact(&reference, 0.0)?;
    let grid_states = config
        .probes
        .mu
        .par_iter()
        .map(|&mu| run_exact(&reference, mu / mu_max))
        .collect::<Result<Vec<_>, _>>()?;
    let mut k_class = Vec::with_capacity(observables.len());
    for obs in &observables {
        let points: Vec<(f64, f64)> = config
            .probes
            .mu
            .iter()
            .zip(&grid_states)
            .map(|(&mu, st)| Ok((mu, st.expectation_pauli(obs)?)))
            .collect::<Result<_, Error>>()?;
        // a grid too small to fit is classified single-exponential
        let k = if points.len() < 2 {
            1
        } else {
            select_model(&points, config.methods.k_max, config.methods.fit_tol)?.k()
        };
        k_class.push(k);
    }

    let per_mu: Vec<Result<Vec<Detail>, CliError>> = config
        .probes
        .mu
        .par_iter()
        .map(|&mu| {
            let noisy = attach_noise_channel(&circuit, &fire, mu)?;
            let estimates: Vec<Option<(f64, CostReport)>> = match method {
                "Q" => q_estimates(&noisy, &observables, &Backend::Exact)?
                    .into_iter()
                    .map(Some)
                    .collect(),
                "QE" => qe_estimates(&noisy, &observables, lambda, &Backend::Exact)?
                    .into_iter()
                    .map(drop_numerical)
                    .collect::<Result<_, _>>()?,
                "QH" => qh_estimates(&noisy, &observables, &symmetry, &Backend::Exact)?
                    .into_iter()
                    .map(drop_numerical)
                    .collect::<Result<_, _>>()?,
                other => return Err(CliError::Config(format!("unknown method {other:?}"))),
            };
            observables
                .iter()
                .zip(estimates)
                .zip(&k_class)
                .map(|((obs, estimate), &k)| {
                    Ok(Detail {
                        observable: obs.to_string(),
                        mu,
                        estimate,
                        truth: truth_state.expectation_pauli(obs)?,
                        k_class: k,
                    })
                })
                .collect()
        })
        .collect();

    let mut details = Vec::new();
    for block in per_mu {
        details.extend(block?);
    }
    details.sort_by(|a, b| {
        a.observable
            .cmp(&b.observable)
            .then(a.mu.partial_cmp(&b.mu).unwrap())
    });
    if details.iter().all(|d| d.estimate.is_none()) {
        return Err(CliError::Numerical(Error::NonHyperbolicDecay(0.0)));
    }

    let mut csv = CsvFile::new("mitigate", seed, config_hash, HEADER);
    for d in &details {
        match &d.estimate {
            Some((est, report)) => csv.push(format!(
                "{},{method},{},{},{},{},{},{},0",
                d.observable,
                fmt_f64(d.mu),
                fmt_f64(*est),
                fmt_f64(d.truth),
                fmt_f64((est - d.truth).abs()),
                fmt_f64(report.cost_factor),
                d.k_class,
            )),
            None => csv.push(format!(
                "{},{method},{},,{},,,{},1",
                d.observable,
                fmt_f64(d.mu),
                fmt_f64(d.truth),
                d.k_class,
            )),
        }
    }

    // aggregate rows: mean |bias| and mean cost over the included rows of
    // each class, per probe point
    let mut aggregates = Vec::new();
    for &mu in &config.probes.mu {
        for (label, class) in [
            ("MEAN_1EXP", Some(1)),
            ("MEAN_2EXP", Some(2)),
            ("MEAN_ALL", None),
        ] {
            let rows: Vec<&Detail> = details
                .iter()
                .filter(|d| d.mu == mu && d.estimate.is_some())
                .filter(|d| class.is_none_or(|k| d.k_class == k))
                .collect();
            if rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            let bias = rows
                .iter()
                .map(|d| (d.estimate.as_ref().unwrap().0 - d.truth).abs())
                .sum::<f64>()
                / n;
            let cost = rows
                .iter()
                .map(|d| d.estimate.as_ref().unwrap().1.cost_factor)
                .sum::<f64>()
                / n;
            aggregates.push((label, mu, bias, cost, rows.len()));
            csv.push(format!(
                "{label},{method},{},,,{},{},,0",
                fmt_f64(mu),
                fmt_f64(bias),
                fmt_f64(cost),
            ));
        }
    }

    if self_audit {
        audit(&csv, &aggregates)?;
    }
    csv.write(&out_dir.join(format!("mitigate_{}_{model}.csv", method.to_lowercase())))?;
    Ok(())
}

fn drop_numerical(
    r: Result<(f64, CostReport), Error>,
) -> Result<Option<(f64, CostReport)>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        // flagged rows: the extrapolation rejected this observable
        Err(Error::NonHyperbolicDecay(_)) | Err(Error::NonExponentialData) => Ok(None),
        Err(e) => Err(CliError::Numerical(e)),
    }
}

/// Recomputes every aggregate from the emitted detail rows and compares the
/// formatted values byte for byte.
fn audit(csv: &CsvFile, aggregates: &[(&str, f64, f64, f64, usize)]) -> Result<(), CliError> {
    for (label, mu, bias, cost, _) in aggregates {
        let mut sum_bias = 0.0;
        let mut sum_cost = 0.0;
        let mut n = 0usize;
        for row in &csv.rows {
            let fields: Vec<&str> = row.split(',').collect();
            if fields[0].starts_with("MEAN") || fields[8] == "1" {
                continue;
            }
            let row_mu: f64 = fields[2].parse().unwrap();
            let k: usize = fields[7].parse().unwrap();
            let class_ok = match *label {
                "MEAN_1EXP" => k == 1,
                "MEAN_2EXP" => k == 2,
                _ => true,
            };
            if (row_mu - *mu).abs() <= 1e-9 * mu.abs() && class_ok {
                sum_bias += fields[5].parse::<f64>().unwrap();
                sum_cost += fields[6].parse::<f64>().unwrap();
                n += 1;
            }
        }
        let recomputed_bias = fmt_f64(sum_bias / n as f64);
        let recomputed_cost = fmt_f64(sum_cost / n as f64);
        // biases were re-parsed from 12-digit strings, so allow the last
        // digit to move
        let close = |a: &str, b: f64| {
            let av: f64 = a.parse().unwrap();
            (av - b).abs() <= 1e-10 * b.abs().max(1e-30)
        };
        if !close(&recomputed_bias, *bias) || !close(&recomputed_cost, *cost) {
            return Err(CliError::Numerical(Error::InvalidArgument(format!(
                "self-audit mismatch for {label} at mu={mu}"
            ))));
        }
    }
    Ok(())
}
