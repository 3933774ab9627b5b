//! Seeded Monte Carlo campaigns: per-trial estimation, prefix error curves
//! and fit-constant comparisons.
//!
//! Trials run in parallel, but every trial draws from its own substreams and
//! results are collected in trial order, so output does not depend on the
//! thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{
    classical_crlb, crlb_theta, fisher_matrix, noiseless_crlb, query_count, QueryAccounting,
};
use crate::likelihood::{mle_estimate, EstimationResult, EstimatorConfig};
use crate::model::Schedule;
use crate::ortho::OrthoParams;
use crate::sampling::{sample_trial, substream, CountData, TrueModelSpec, AUX_SLOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMode {
    /// Fresh `c_k ~ U[0, 1)` for every trial, from the trial's auxiliary stream.
    #[serde(rename = "random-per-trial")]
    RandomPerTrial,
}

/// Integration constants used by the fit: fixed, or drawn per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitC {
    Fixed(OrthoParams),
    Mode(FitMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub true_model: TrueModelSpec,
    pub fit_c: FitC,
    pub schedule: Schedule,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub query_accounting: QueryAccounting,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain {
                name: "trials",
                value: 0.0,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        self.true_model.validate(&self.schedule)?;
        if let FitC::Fixed(c) = &self.fit_c {
            c.check_len(&self.schedule)?;
        }
        if self.estimator.grid_points < 2 {
            return Err(Error::InvalidGrid(
                "at least two grid points are required".into(),
            ));
        }
        Ok(())
    }

    /// Fit constants for one trial.
    pub fn fit_c_for(&self, trial: u64) -> OrthoParams {
        match &self.fit_c {
            FitC::Fixed(c) => c.clone(),
            FitC::Mode(FitMode::RandomPerTrial) => {
                let mut rng = substream(self.master_seed, trial, AUX_SLOT);
                let c = (0..self.schedule.len())
                    .map(|_| rng.random::<f64>())
                    .collect();
                OrthoParams::new(c).expect("uniform draws lie in [0, 1)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub counts: CountData,
    pub fit_c: OrthoParams,
    pub result: EstimationResult,
}

pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let counts = sample_trial(
                &config.true_model,
                &config.schedule,
                config.master_seed,
                trial,
            )?;
            let fit_c = config.fit_c_for(trial);
            let result = mle_estimate(&counts, &fit_c, config.estimator)?;
            Ok(TrialRecord {
                trial,
                counts,
                fit_c,
                result,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub prefix: usize,
    pub n_queries: u64,
    /// Over non-degenerate trials; NaN when there are none.
    pub rmse: f64,
    /// Variance bounds; NaN where the model bound is undefined.
    pub crlb_model: f64,
    pub crlb_classical: f64,
    pub crlb_noiseless: f64,
    pub n_trials: usize,
    pub n_degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub rows: Vec<ErrorRow>,
}

impl ErrorCurve {
    pub fn last(&self) -> &ErrorRow {
        self.rows.last().expect("curves have at least one row")
    }
}

/// Root-mean-square error over non-degenerate results, with their count.
pub fn rmse(results: &[EstimationResult], theta: f64) -> (f64, usize) {
    let used: Vec<f64> = results
        .iter()
        .filter(|r| !r.degenerate)
        .map(|r| (r.theta_hat - theta).powi(2))
        .collect();
    if used.is_empty() {
        return (f64::NAN, 0);
    }
    let n = used.len();
    ((used.iter().sum::<f64>() / n as f64).sqrt(), n)
}

/// Variance bound at the true parameters, ignoring any readout bias.
fn model_crlb(spec: &TrueModelSpec, schedule: &Schedule) -> f64 {
    spec.amplitudes(schedule)
        .and_then(|beta| fisher_matrix(spec.theta, &beta, schedule))
        .and_then(|j| crlb_theta(&j))
        .unwrap_or(f64::NAN)
}

fn curve_row(
    config: &ExperimentConfig,
    prefix: usize,
    results: &[EstimationResult],
) -> Result<ErrorRow> {
    let schedule = config.schedule.prefix(prefix)?;
    let n_queries = query_count(&schedule, config.query_accounting);
    let (rmse, used) = rmse(results, config.true_model.theta);
    Ok(ErrorRow {
        prefix,
        n_queries,
        rmse,
        crlb_model: model_crlb(&config.true_model, &schedule),
        crlb_classical: classical_crlb(n_queries)?,
        crlb_noiseless: noiseless_crlb(&schedule, schedule.n_shot() + schedule.n_shot_prime())?,
        n_trials: results.len(),
        n_degenerate: results.len() - used,
    })
}

/// Error curve over schedule prefixes. Each prefix re-estimates from the
/// leading entries of the same sampled records.
pub fn error_curve(config: &ExperimentConfig) -> Result<ErrorCurve> {
    let trials = run_trials(config)?;
    error_curve_from(config, &trials)
}

pub fn error_curve_from(config: &ExperimentConfig, trials: &[TrialRecord]) -> Result<ErrorCurve> {
    let full = config.schedule.len();
    let mut rows = Vec::with_capacity(full);
    for prefix in 1..=full {
        let results: Vec<EstimationResult> = if prefix == full {
            trials.iter().map(|t| t.result).collect()
        } else {
            trials
                .par_iter()
                .map(|t| {
                    let counts = t.counts.prefix(prefix)?;
                    mle_estimate(&counts, &t.fit_c.prefix(prefix), config.estimator)
                })
                .collect::<Result<_>>()?
        };
        rows.push(curve_row(config, prefix, &results)?);
    }
    Ok(ErrorCurve { rows })
}

/// Estimates from two fit-constant vectors on the same sampled records.
pub fn compare_fits(
    config: &ExperimentConfig,
    c_a: &OrthoParams,
    c_b: &OrthoParams,
) -> Result<Vec<(EstimationResult, EstimationResult)>> {
    config.validate()?;
    c_a.check_len(&config.schedule)?;
    c_b.check_len(&config.schedule)?;
    (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let counts = sample_trial(
                &config.true_model,
                &config.schedule,
                config.master_seed,
                trial,
            )?;
            Ok((
                mle_estimate(&counts, c_a, config.estimator)?,
                mle_estimate(&counts, c_b, config.estimator)?,
            ))
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
