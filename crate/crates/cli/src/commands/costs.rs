//! Sampling-cost curves over a (gamma, mu) grid for the swap-network noise
//! parametrisation, with crossing points located by bisection.

use std::path::Path;

use qem_core::extrap::{fh_cost_curves, find_crossing};

use crate::output::{fmt_f64, CsvFile};
use crate::CliError;

pub fn run(
    gammas: &str,
    mu_min: f64,
    mu_max: f64,
    mu_step: f64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let gammas: Vec<f64> = gammas
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("--gammas: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(CliError::Config(
            "--gammas values must lie in [0, 1]".into(),
        ));
    }
    if !(mu_step > 0.0 && mu_max > mu_min && mu_min > 0.0) {
        return Err(CliError::Config(
            "need 0 < --mu-min < --mu-max and positive --mu-step".into(),
        ));
    }

    let steps = ((mu_max - mu_min) / mu_step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| mu_min + i as f64 * mu_step).collect();

    let mut csv = CsvFile::new("costs", 0, 0, "gamma,mu,c_q0,c_qe,c_qh");
    for &gamma in &gammas {
        for &mu in &grid {
            let (q0, qe, qh) = fh_cost_curves(gamma, mu);
            csv.push(format!(
                "{},{},{},{},{}",
                fmt_f64(gamma),
                fmt_f64(mu),
                fmt_f64(q0),
                fmt_f64(qe),
                fmt_f64(qh)
            ));
        }
    }
    csv.write(&out_dir.join("costs.csv"))?;

    let mut crossings = CsvFile::new("costs-crossings", 0, 0, "gamma,pair,mu");
    type CostDiff = fn(f64, f64) -> f64;
    let differences: [(&str, CostDiff); 3] = [
        ("QE-Q", |gamma, mu| {
            let (q0, qe, _) = fh_cost_curves(gamma, mu);
            qe - q0
        }),
        ("QE-QH", |gamma, mu| {
            let (_, qe, qh) = fh_cost_curves(gamma, mu);
            qe - qh
        }),
        ("QH-Q", |gamma, mu| {
            let (q0, _, qh) = fh_cost_curves(gamma, mu);
            qh - q0
        }),
    ];
    for &gamma in &gammas {
        for (pair, diff) in &differences {
            for window in grid.windows(2) {
                let (a, b) = (window[0], window[1]);
                if diff(gamma, a).signum() != diff(gamma, b).signum() {
                    if let Some(mu) = find_crossing(|mu| diff(gamma, mu), a, b) {
                        crossings.push(format!("{},{pair},{}", fmt_f64(gamma), fmt_f64(mu)));
                    }
                }
            }
        }
    }
    crossings.write(&out_dir.join("costs_crossings.csv"))?;
    Ok(())
}
