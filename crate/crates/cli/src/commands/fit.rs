//! Multi-exponential fits over a decay CSV: model selection, single- and
//! dual-exponential extrapolation biases, and outlier flags.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use qem_core::extrap::{fit_multi_exp, is_fit_outlier, select_model, ExpDecayModel};

use crate::output::{fmt_f64, parse_field_f64, read_csv, CsvFile};
use crate::CliError;

struct FitRow {
    observable: String,
    selected: ExpDecayModel,
    eps: Option<(f64, f64)>,
    truth: Option<f64>,
}

pub fn run(input: &Path, k_max: usize, tol: f64, out_dir: &Path) -> Result<(), CliError> {
    if k_max == 0 {
        return Err(CliError::Config("--k-max must be positive".into()));
    }
    let (header, rows) = read_csv(input)?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| columns.iter().position(|c| *c == name);
    let (obs_col, mu_col, val_col) = match (col("observable"), col("mu"), col("expectation")) {
        (Some(o), Some(m), Some(v)) => (o, m, v),
        _ => {
            return Err(CliError::Config(format!(
                "{}: expected columns observable,mu,expectation",
                input.display()
            )))
        }
    };
    let truth_col = col("truth");

    type Series = (Vec<(f64, f64)>, Option<f64>);
    let mut grouped: BTreeMap<String, Series> = BTreeMap::new();
    for row in &rows {
        let observable = row
            .get(obs_col)
            .ok_or_else(|| CliError::Config(format!("{}: short row", input.display())))?
            .clone();
        let mu = parse_field_f64(row, mu_col, input)?;
        let value = parse_field_f64(row, val_col, input)?;
        let truth = truth_col
            .map(|c| parse_field_f64(row, c, input))
            .transpose()?;
        let entry = grouped.entry(observable).or_default();
        entry.0.push((mu, value));
        entry.1 = truth;
    }

    let fitted: Vec<Result<FitRow, CliError>> = grouped
        .par_iter()
        .map(|(observable, (points, truth))| {
            let selected = select_model(points, k_max, tol)?;
            let eps = match truth {
                Some(t) => {
                    let e1 = (fit_multi_exp(points, 1)?.zero_noise() - t).abs();
                    let e2 = if points.len() >= 4 {
                        (fit_multi_exp(points, 2)?.zero_noise() - t).abs()
                    } else {
                        e1
                    };
                    Some((e1, e2))
                }
                None => None,
            };
            Ok(FitRow {
                observable: observable.clone(),
                selected,
                eps,
                truth: *truth,
            })
        })
        .collect();

    let input_hash = crate::output::fnv1a(&std::fs::read(input).map_err(CliError::Io)?);
    let mut csv = CsvFile::new(
        "fit",
        0,
        input_hash,
        "observable,k,a1,gamma1,a2,gamma2,residual,estimate,truth,eps1,eps2,ratio,warning,outlier",
    );
    for row in fitted {
        let row = row?;
        let comps = row.selected.components();
        let comp = |i: usize| -> (String, String) {
            comps
                .get(i)
                .map(|(a, g)| (fmt_f64(*a), fmt_f64(*g)))
                .unwrap_or_default()
        };
        let (a1, g1) = comp(0);
        let (a2, g2) = comp(1);
        let truth_str = row.truth.map(fmt_f64).unwrap_or_default();
        let (eps1, eps2, ratio, outlier) = match row.eps {
            Some((e1, e2)) => (
                fmt_f64(e1),
                fmt_f64(e2),
                fmt_f64(e1 / e2.max(f64::MIN_POSITIVE)),
                is_fit_outlier(row.selected.warning(), e1, e2, row.truth),
            ),
            None => (
                String::new(),
                String::new(),
                String::new(),
                row.selected.warning(),
            ),
        };
        csv.push(format!(
            "{},{},{a1},{g1},{a2},{g2},{},{},{truth_str},{eps1},{eps2},{ratio},{},{}",
            row.observable,
            row.selected.k(),
            fmt_f64(row.selected.residual()),
            fmt_f64(row.selected.zero_noise()),
            u8::from(row.selected.warning()),
            u8::from(outlier),
        ));
    }

    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("decay");
    let name = format!("fit_{}.csv", stem.strip_prefix("decay_").unwrap_or(stem));
    csv.write(&out_dir.join(name))?;
    Ok(())
}
