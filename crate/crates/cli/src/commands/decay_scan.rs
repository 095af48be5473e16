//! Exact decay scan: noisy expectation values of every observable at each
//! probe error count, one CSV per noise model.

use rayon::prelude::*;

use qem_core::fermi_hubbard::attach_noise_channel;
use qem_core::sim::run_exact;

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, CsvFile};
use crate::{CliError, CommonArgs};

pub fn run(args: &CommonArgs) -> Result<(), CliError> {
    let (config, config_hash) = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(config.circuit.seed);
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| config.output.dir.clone().into());
    let (circuit, observables) = super::circuit_and_observables(&config, args.seed)?;

    for model in config.noise.model.names() {
        let fire = config.fire_channel(&model)?;
        // the probe grid is simulated at mu_max and rescaled per point
        let mu_max = config
            .probes
            .mu
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let noisy = attach_noise_channel(&circuit, &fire, mu_max)?;
        let truth_state = run_exact(&noisy, 0.0)?;

        let states = config
            .probes
            .mu
            .par_iter()
            .map(|&mu| run_exact(&noisy, mu / mu_max))
            .collect::<Result<Vec<_>, _>>()?;

        let mut csv = CsvFile::new(
            "decay-scan",
            seed,
            config_hash,
            "observable,mu,expectation,truth",
        );
        let mut sorted: Vec<_> = observables.iter().collect();
        sorted.sort();
        for obs in sorted {
            let truth = truth_state.expectation_pauli(obs)?;
            for (mu, state) in config.probes.mu.iter().zip(&states) {
                let value = state.expectation_pauli(obs)?;
                csv.push(format!(
                    "{obs},{},{},{}",
                    fmt_f64(*mu),
                    fmt_f64(value),
                    fmt_f64(truth)
                ));
            }
        }
        csv.write(&out_dir.join(format!("decay_{model}.csv")))?;
    }
    Ok(())
}
