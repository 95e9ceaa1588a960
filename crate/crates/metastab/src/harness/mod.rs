//! Scenario orchestration: sweeps over fluxes, viscosities and layer
//! positions, exponential fits, and flat-file output.

pub mod config;
mod modules;
pub mod output;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use config::{FluxSpec, Module, Numerics, ScenarioConfig};
pub use output::{emit_plots, write_outputs};

use crate::error::{invalid, Error, Result};
use crate::numerics::fit::{linear_fit, LinearFit};

/// Column-named numeric table written as one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: String,
    pub module: Module,
    /// Scenario key to metric name to value.
    pub records: BTreeMap<String, BTreeMap<String, f64>>,
    pub fits: BTreeMap<String, LinearFit>,
    pub tables: BTreeMap<String, Table>,
}

impl SweepResult {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty() && self.tables.is_empty()
    }

    /// Metric lookup; panics with the missing key for test diagnostics.
    pub fn metric(&self, key: &str, name: &str) -> f64 {
        match self.records.get(key).and_then(|m| m.get(name)) {
            Some(v) => *v,
            None => panic!("no metric '{name}' under '{key}'"),
        }
    }

    /// Records whose key starts with `prefix`, in key order.
    pub fn with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a String, &'a BTreeMap<String, f64>)> + 'a {
        self.records.iter().filter(move |(k, _)| k.starts_with(prefix))
    }
}

/// Least-squares line through `(xs, ys)`; needs four points and distinct abscissae.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return invalid("fit needs equally many abscissae and ordinates");
    }
    if xs.len() < 4 {
        return invalid(format!("fit needs at least 4 points, got {}", xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return invalid("fit data must be finite");
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(hi - lo > 1e-12 * hi.abs().max(1.0)) {
        return invalid("fit abscissae are degenerate");
    }
    Ok(linear_fit(xs, ys))
}

fn with_key(key: &str, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{key}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{key}: {m}")),
    }
}

/// Runs every work item on a pool of `jobs` threads and merges by key.
pub fn run_scenario(config: &ScenarioConfig, jobs: usize) -> Result<SweepResult> {
    config.validate()?;
    let items = modules::plan(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let outputs: Vec<modules::ItemOutput> = pool.install(|| {
        items
            .par_iter()
            .map(|it| modules::run_item(config, it).map_err(|e| with_key(&it.key, e)))
            .collect::<Result<_>>()
    })?;
    let mut result = SweepResult {
        scenario: config.name.clone(),
        module: config.module,
        records: BTreeMap::new(),
        fits: BTreeMap::new(),
        tables: BTreeMap::new(),
    };
    for out in outputs {
        result.records.extend(out.records);
        result.tables.extend(out.tables);
    }
    add_fits(config, &mut result)?;
    Ok(result)
}

/// `ln|metric|` against `1/eps` for every flux and layer position with enough viscosities.
fn add_fits(config: &ScenarioConfig, result: &mut SweepResult) -> Result<()> {
    let metrics: &[&str] = match config.module {
        Module::Spectrum => &["lambda1", "lambda1_step_grid"],
        Module::Manifold => &["kappa_gap"],
        _ => return Ok(()),
    };
    for f in &config.fluxes {
        for &xi in &config.xi0 {
            let keys: Vec<String> = config
                .epsilons
                .iter()
                .map(|&e| format!("{}/eps={e}/xi={xi}", f.label))
                .collect();
            if keys.len() < 4 {
                continue;
            }
            for &name in metrics {
                let xs: Vec<f64> = config.epsilons.iter().map(|e| 1.0 / e).collect();
                let vals: Vec<f64> = keys.iter().map(|k| result.metric(k, name).abs()).collect();
                // exact zeros come from symmetric positions and have no exponent to fit
                if vals.contains(&0.0) {
                    continue;
                }
                let ys: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
                let fit = fit_exponential(&xs, &ys).map_err(|e| with_key(&format!("{}/xi={xi}", f.label), e))?;
                result.fits.insert(format!("{name}/{}/xi={xi}", f.label), fit);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_fit() {
        let xs = [2.0, 4.0, 5.0, 10.0];
        let ys: Vec<f64> = xs.iter().map(|x| -x).collect();
        let fit = fit_exponential(&xs, &ys).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-14 && fit.intercept.abs() < 1e-13 && fit.residual < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_exponential(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).is_err());
        assert!(fit_exponential(&[1.0; 4], &[0.0, 1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn empty_selection_is_a_no_op() {
        let cfg = ScenarioConfig::parse("[scenario]\nname = idle\nmodule = none\n").unwrap();
        let r = run_scenario(&cfg, 2).unwrap();
        assert!(r.is_empty() && r.fits.is_empty());
    }
}
