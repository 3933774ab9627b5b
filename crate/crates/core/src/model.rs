//! Closed-form hit probabilities of the Grover circuit `G^m` and the
//! ancillary circuit `R·G^(m-1)` under the per-depth amplitude-decay model.
//!
//! Both circuits measure the last qubit and report the probability of the
//! outcome `1`:
//!
//! ```text
//! grover:    p = 1/2 - (beta/2) cos(2 (2m + 1) theta)
//! ancillary: q = 1/2 - (beta/2) cos(2 (2m - 3) theta)
//! ```
//!
//! `beta = 1` is the noiseless oscillation, `beta = 0` the fully mixed state.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Upper end of the amplitude-angle domain.
pub const THETA_MAX: f64 = FRAC_PI_2;

/// Amplification schedule: Grover powers `m_k` and the shot counts used on
/// the Grover (`n_shot`) and ancillary (`n_shot_prime`) circuits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", deny_unknown_fields)]
pub struct Schedule {
    m: Vec<u32>,
    n_shot: u32,
    n_shot_prime: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    m: Vec<u32>,
    n_shot: u32,
    n_shot_prime: u32,
}

impl TryFrom<RawSchedule> for Schedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        Schedule::new(raw.m, raw.n_shot, raw.n_shot_prime)
    }
}

impl Schedule {
    pub fn new(m: Vec<u32>, n_shot: u32, n_shot_prime: u32) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::InvalidSchedule("no Grover powers given".into()));
        }
        if n_shot == 0 || n_shot_prime == 0 {
            return Err(Error::InvalidSchedule(
                "shot counts must be positive".into(),
            ));
        }
        Ok(Self {
            m,
            n_shot,
            n_shot_prime,
        })
    }

    /// Exponentially increasing schedule `m_k = 2^(k-1)`, `k = 1..=len`.
    pub fn exponential(len: usize, n_shot: u32, n_shot_prime: u32) -> Result<Self> {
        if len > 31 {
            return Err(Error::InvalidSchedule(format!("2^{} overflows", len - 1)));
        }
        Self::new(
            (0..len as u32).map(|k| 1 << k).collect(),
            n_shot,
            n_shot_prime,
        )
    }

    pub fn powers(&self) -> &[u32] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn n_shot(&self) -> u32 {
        self.n_shot
    }

    pub fn n_shot_prime(&self) -> u32 {
        self.n_shot_prime
    }

    /// Whether entry `k` also runs the ancillary circuit (requires `m_k >= 1`).
    pub fn has_ancillary(&self, k: usize) -> bool {
        self.m[k] >= 1
    }

    /// The first `len` entries, same shot counts.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.m.len() {
            return Err(Error::InvalidSchedule(format!(
                "prefix length {len} not in 1..={}",
                self.m.len()
            )));
        }
        Self::new(self.m[..len].to_vec(), self.n_shot, self.n_shot_prime)
    }
}

/// Per-entry oscillation amplitudes `beta_k`, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NoiseVector(Vec<f64>);

impl NoiseVector {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        for &b in &beta {
            check_range("beta", b, 0.0, 1.0)?;
        }
        Ok(Self(beta))
    }

    pub fn uniform(beta: f64, len: usize) -> Result<Self> {
        Self::new(vec![beta; len])
    }

    /// `beta_k = exp(-kappa m_k)` for every schedule entry.
    pub fn depolarizing(spec: DepolarizingSpec, schedule: &Schedule) -> Self {
        Self(
            schedule
                .powers()
                .iter()
                .map(|&m| depolarizing_beta(spec, m))
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for NoiseVector {
    type Error = Error;

    fn try_from(beta: Vec<f64>) -> Result<Self> {
        Self::new(beta)
    }
}

impl From<NoiseVector> for Vec<f64> {
    fn from(v: NoiseVector) -> Self {
        v.0
    }
}

/// Decay rate `kappa >= 0` per Grover application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DepolarizingSpec {
    kappa: f64,
}

impl DepolarizingSpec {
    pub fn new(kappa: f64) -> Result<Self> {
        check_range("kappa", kappa, 0.0, f64::INFINITY)?;
        Ok(Self { kappa })
    }

    /// Rate matching a per-application depolarizing probability `lambda`,
    /// `kappa = -ln(1 - lambda)`.
    pub fn from_channel_probability(lambda: f64) -> Result<Self> {
        check_range("lambda", lambda, 0.0, 1.0)?;
        Self::new(-(-lambda).ln_1p())
    }

    pub fn kappa(self) -> f64 {
        self.kappa
    }
}

impl TryFrom<f64> for DepolarizingSpec {
    type Error = Error;

    fn try_from(kappa: f64) -> Result<Self> {
        Self::new(kappa)
    }
}

impl From<DepolarizingSpec> for f64 {
    fn from(s: DepolarizingSpec) -> Self {
        s.kappa
    }
}

/// Signed oscillation index of the Grover circuit, `2m + 1`.
pub(crate) fn grover_index(m: u32) -> f64 {
    2.0 * f64::from(m) + 1.0
}

/// Signed oscillation index of the ancillary circuit, `2m - 3`.
pub(crate) fn ancillary_index(m: u32) -> f64 {
    2.0 * f64::from(m) - 3.0
}

/// `1/2 - (amplitude/2) cos(2 index theta)` without range checks.
#[inline]
pub(crate) fn oscillation(theta: f64, amplitude: f64, index: f64) -> f64 {
    0.5 - 0.5 * amplitude * (2.0 * index * theta).cos()
}

fn check_theta(theta: f64) -> Result<f64> {
    check_range("theta", theta, 0.0, THETA_MAX)
}

/// Hit probability of `G^m |Psi>` under amplitude decay `beta`.
pub fn grover_prob(theta: f64, beta: f64, m: u32) -> Result<f64> {
    check_theta(theta)?;
    check_range("beta", beta, 0.0, 1.0)?;
    Ok(oscillation(theta, beta, grover_index(m)))
}

/// Hit probability of the ancillary circuit `R·G^(m-1) |Psi>`; the phase
/// lags the Grover circuit by two iterations.
pub fn ancillary_prob(theta: f64, beta: f64, m: u32) -> Result<f64> {
    check_theta(theta)?;
    check_range("beta", beta, 0.0, 1.0)?;
    if m == 0 {
        return Err(Error::AncillaryUndefined);
    }
    Ok(oscillation(theta, beta, ancillary_index(m)))
}

pub fn depolarizing_beta(spec: DepolarizingSpec, m: u32) -> f64 {
    (-spec.kappa * f64::from(m)).exp()
}
