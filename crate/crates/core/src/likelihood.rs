//! Joint Grover + ancillary log-likelihood and its one-dimensional profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::model::{ancillary_index, grover_index, oscillation, NoiseVector, THETA_MAX};
use crate::optimize::maximize_bounded;
use crate::ortho::{OrthoParams, Profile};
use crate::sampling::Observations;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROBABILITY_EPS: f64 = 1e-12;

/// Spread below which the scanned profile is considered flat.
pub const FLAT_TOLERANCE: f64 = 1e-12;
/// Points in the local scan that precedes bracketed refinement.
const REFINE_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn full(points: usize) -> Self {
        Self {
            lo: 0.0,
            hi: THETA_MAX,
            points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidGrid(format!(
                "{} points, need at least 2",
                self.points
            )));
        }
        check_range("grid.lo", self.lo, 0.0, THETA_MAX)?;
        check_range("grid.hi", self.hi, 0.0, THETA_MAX)?;
        if self.lo >= self.hi {
            return Err(Error::InvalidGrid(format!(
                "lo = {} is not below hi = {}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Uniform scan points over `[0, pi/2]`.
    pub grid_points: usize,
    /// Absolute tolerance of the bracketed refinement.
    pub refine_tolerance: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            grid_points: 10_000,
            refine_tolerance: 1e-7,
        }
    }
}

impl EstimatorConfig {
    /// Four points per period of the fastest oscillation, `cos(2 (2m+1) theta)`.
    pub fn minimum_grid_points(max_power: u32) -> usize {
        4 * (2 * max_power as usize + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: f64,
    pub log_likelihood_at_max: f64,
    pub scan_resolution: f64,
    pub refined: bool,
    /// The profile was flat over the whole scan.
    pub degenerate: bool,
}

#[inline]
fn bernoulli_term(ones: f64, shots: f64, p: f64) -> f64 {
    let p = p.clamp(PROBABILITY_EPS, 1.0 - PROBABILITY_EPS);
    ones * p.ln() + (shots - ones) * (-p).ln_1p()
}

/// Log-likelihood with raw per-entry amplitudes.
///
/// Amplitudes may exceed 1 as long as the probabilities stay admissible
/// (the analytic orthogonal solution does). Binomial coefficients are
/// omitted.
pub fn log_likelihood_amplitudes<O>(obs: &O, theta: f64, amplitudes: &[f64]) -> Result<f64>
where
    O: Observations + ?Sized,
{
    let schedule = obs.schedule();
    if amplitudes.len() != schedule.len() {
        return Err(Error::DimensionMismatch {
            what: "noise vector",
            expected: schedule.len(),
            got: amplitudes.len(),
        });
    }
    let n = f64::from(schedule.n_shot());
    let n_prime = f64::from(schedule.n_shot_prime());
    let mut total = 0.0;
    for (k, (&m, &beta)) in schedule.powers().iter().zip(amplitudes).enumerate() {
        total += bernoulli_term(obs.grover(k), n, oscillation(theta, beta, grover_index(m)));
        if let Some(l) = obs.ancillary(k) {
            total += bernoulli_term(l, n_prime, oscillation(theta, beta, ancillary_index(m)));
        }
    }
    Ok(total)
}

pub fn log_likelihood<O>(obs: &O, theta: f64, beta: &NoiseVector) -> Result<f64>
where
    O: Observations + ?Sized,
{
    check_range("theta", theta, 0.0, THETA_MAX)?;
    log_likelihood_amplitudes(obs, theta, beta.as_slice())
}

/// Profile objective: the joint log-likelihood with every `beta_k` slaved to
/// `theta` through the orthogonal coordinates `c` (analytic solution).
pub fn ortho_log_likelihood<O>(obs: &O, theta: f64, c: &OrthoParams) -> Result<f64>
where
    O: Observations + ?Sized,
{
    profile_log_likelihood(obs, theta, c, Profile::Analytic)
}

pub fn profile_log_likelihood<O>(
    obs: &O,
    theta: f64,
    c: &OrthoParams,
    profile: Profile,
) -> Result<f64>
where
    O: Observations + ?Sized,
{
    check_range("theta", theta, 0.0, THETA_MAX)?;
    let beta = c.profile_amplitudes(theta, obs.schedule(), profile)?;
    log_likelihood_amplitudes(obs, theta, &beta)
}

/// Profile objective on a uniform grid, in grid order.
pub fn likelihood_scan<O>(obs: &O, c: &OrthoParams, grid: Grid) -> Result<Vec<(f64, f64)>>
where
    O: Observations + Sync + ?Sized,
{
    profile_scan(obs, c, grid, Profile::Analytic)
}

pub fn profile_scan<O>(
    obs: &O,
    c: &OrthoParams,
    grid: Grid,
    profile: Profile,
) -> Result<Vec<(f64, f64)>>
where
    O: Observations + Sync + ?Sized,
{
    grid.validate()?;
    c.check_len(obs.schedule())?;
    (0..grid.points)
        .into_par_iter()
        .map(|i| {
            let theta = grid.point(i);
            profile_log_likelihood(obs, theta, c, profile).map(|v| (theta, v))
        })
        .collect()
}

/// Index of the largest value; ties go to the first.
fn argmax(values: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(_, v)) in values.iter().enumerate() {
        if v > values[best].1 {
            best = i;
        }
    }
    best
}

/// Half-width of the local refinement window around the global scan winner:
/// a quarter period of the fastest Grover oscillation.
pub fn refine_half_width(schedule: &crate::model::Schedule) -> f64 {
    let max_m = schedule.powers().iter().copied().max().unwrap_or(0);
    std::f64::consts::PI / (4.0 * grover_index(max_m))
}

/// Maximum-likelihood estimate of `theta`.
///
/// The global scan over `[0, pi/2]` uses the profile with amplitudes capped
/// at 1, which rejects aliased maxima that only fit with unphysical
/// amplitudes. The estimate itself maximizes the analytic profile within
/// [`refine_half_width`] of the scan winner: a fine local scan, then Brent
/// refinement inside its winning bracket.
///
/// Ties on the grid go to the smallest `theta`. A flat scan returns the grid
/// midpoint with `degenerate` set.
pub fn mle_estimate<O>(
    obs: &O,
    c: &OrthoParams,
    config: EstimatorConfig,
) -> Result<EstimationResult>
where
    O: Observations + Sync + ?Sized,
{
    if config.refine_tolerance.is_nan() || config.refine_tolerance <= 0.0 {
        return Err(Error::Domain {
            name: "refine_tolerance",
            value: config.refine_tolerance,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    let grid = Grid::full(config.grid_points);
    let scan = profile_scan(obs, c, grid, Profile::Admissible)?;
    let best = argmax(&scan);
    let lowest = scan.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);

    if scan[best].1 - lowest < FLAT_TOLERANCE {
        let mid = 0.5 * (grid.lo + grid.hi);
        return Ok(EstimationResult {
            theta_hat: mid,
            log_likelihood_at_max: ortho_log_likelihood(obs, mid, c)?,
            scan_resolution: grid.step(),
            refined: false,
            degenerate: true,
        });
    }

    let h = refine_half_width(obs.schedule());
    let window = Grid {
        lo: (scan[best].0 - h).max(0.0),
        hi: (scan[best].0 + h).min(THETA_MAX),
        points: REFINE_POINTS,
    };
    let local = profile_scan(obs, c, window, Profile::Analytic)?;
    let j = argmax(&local);
    let refined = maximize_bounded(
        |t| ortho_log_likelihood(obs, t, c).unwrap_or(f64::NEG_INFINITY),
        local[j.saturating_sub(1)].0,
        local[(j + 1).min(local.len() - 1)].0,
        config.refine_tolerance,
        500,
    );
    let (theta_hat, value) = if refined.value >= local[j].1 {
        (refined.x, refined.value)
    } else {
        local[j]
    };
    Ok(EstimationResult {
        theta_hat,
        log_likelihood_at_max: value,
        scan_resolution: grid.step(),
        refined: true,
        degenerate: false,
    })
}
