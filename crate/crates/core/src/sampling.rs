//! Seeded measurement records.
//!
//! Every circuit (Grover or ancillary, per schedule entry, per trial) draws
//! from its own ChaCha8 stream, selected from the master seed by
//! `(trial << 20) | slot`. Records are therefore identical whatever order or
//! thread the trials run on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::model::{
    ancillary_index, grover_index, oscillation, DepolarizingSpec, NoiseVector, Schedule, THETA_MAX,
};

const SLOT_BITS: u32 = 20;
/// Stream slot reserved for per-trial auxiliary draws (random fit constants).
pub(crate) const AUX_SLOT: u64 = (1 << SLOT_BITS) - 1;

/// Independent random stream for circuit `slot` of trial `trial`.
pub fn substream(master_seed: u64, trial: u64, slot: u64) -> ChaCha8Rng {
    debug_assert!(slot <= AUX_SLOT);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((trial << SLOT_BITS) | slot);
    rng
}

/// Read access shared by sampled and expected counts.
pub trait Observations {
    fn schedule(&self) -> &Schedule;
    fn grover(&self, k: usize) -> f64;
    fn ancillary(&self, k: usize) -> Option<f64>;
}

/// Counts of outcome `1` per schedule entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountData {
    schedule: Schedule,
    grover_ones: Vec<u32>,
    ancillary_ones: Vec<Option<u32>>,
}

/// On-disk form of a count record; the schedule comes from the run config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRecord {
    pub grover_ones: Vec<u32>,
    pub ancillary_ones: Vec<Option<u32>>,
}

impl CountData {
    pub fn new(
        schedule: Schedule,
        grover_ones: Vec<u32>,
        ancillary_ones: Vec<Option<u32>>,
    ) -> Result<Self> {
        let len = schedule.len();
        for (what, got) in [
            ("grover counts", grover_ones.len()),
            ("ancillary counts", ancillary_ones.len()),
        ] {
            if got != len {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: len,
                    got,
                });
            }
        }
        for k in 0..len {
            if grover_ones[k] > schedule.n_shot() {
                return Err(Error::InvalidCounts(format!(
                    "grover count {} exceeds {} shots at entry {k}",
                    grover_ones[k],
                    schedule.n_shot()
                )));
            }
            match (schedule.has_ancillary(k), ancillary_ones[k]) {
                (true, Some(l)) if l > schedule.n_shot_prime() => {
                    return Err(Error::InvalidCounts(format!(
                        "ancillary count {l} exceeds {} shots at entry {k}",
                        schedule.n_shot_prime()
                    )))
                }
                (true, Some(_)) | (false, None) => {}
                (true, None) => {
                    return Err(Error::InvalidCounts(format!(
                        "missing ancillary count at entry {k}"
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::InvalidCounts(format!(
                        "entry {k} has m = 0 and cannot carry an ancillary count"
                    )))
                }
            }
        }
        Ok(Self {
            schedule,
            grover_ones,
            ancillary_ones,
        })
    }

    pub fn from_record(schedule: Schedule, record: CountRecord) -> Result<Self> {
        Self::new(schedule, record.grover_ones, record.ancillary_ones)
    }

    pub fn to_record(&self) -> CountRecord {
        CountRecord {
            grover_ones: self.grover_ones.clone(),
            ancillary_ones: self.ancillary_ones.clone(),
        }
    }

    pub fn grover_ones(&self) -> &[u32] {
        &self.grover_ones
    }

    pub fn ancillary_ones(&self) -> &[Option<u32>] {
        &self.ancillary_ones
    }

    /// Record restricted to the first `len` schedule entries.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        Ok(Self {
            schedule: self.schedule.prefix(len)?,
            grover_ones: self.grover_ones[..len].to_vec(),
            ancillary_ones: self.ancillary_ones[..len].to_vec(),
        })
    }
}

impl Observations for CountData {
    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn grover(&self, k: usize) -> f64 {
        f64::from(self.grover_ones[k])
    }

    fn ancillary(&self, k: usize) -> Option<f64> {
        self.ancillary_ones[k].map(f64::from)
    }
}

/// Real-valued mean counts `n_shot p` and `n_shot' q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCounts {
    schedule: Schedule,
    pub grover: Vec<f64>,
    pub ancillary: Vec<Option<f64>>,
}

impl Observations for ExpectedCounts {
    fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn grover(&self, k: usize) -> f64 {
        self.grover[k]
    }

    fn ancillary(&self, k: usize) -> Option<f64> {
        self.ancillary[k]
    }
}

/// How the true oscillation amplitude depends on the schedule entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrueNoise {
    /// One amplitude per schedule entry.
    ExplicitBeta { beta: NoiseVector },
    /// `beta_k = exp(-kappa m_k)`.
    Depolarizing { kappa: DepolarizingSpec },
    /// Piecewise-linear `beta(m)` through `(m, beta)` knots, held constant
    /// beyond the end knots.
    CustomCurve { points: Vec<(f64, f64)> },
}

/// Generating model for synthetic records. It may lie outside the fitting
/// family (readout bias), which is what mismatch studies exercise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueModelSpec {
    pub theta: f64,
    pub noise: TrueNoise,
    /// Symmetric flip probability of the measured bit, in `[0, 0.5)`.
    #[serde(default)]
    pub readout_bias: f64,
}

impl TrueModelSpec {
    pub fn depolarizing(theta: f64, kappa: f64) -> Result<Self> {
        Ok(Self {
            theta,
            noise: TrueNoise::Depolarizing {
                kappa: DepolarizingSpec::new(kappa)?,
            },
            readout_bias: 0.0,
        })
    }

    pub fn explicit(theta: f64, beta: NoiseVector) -> Self {
        Self {
            theta,
            noise: TrueNoise::ExplicitBeta { beta },
            readout_bias: 0.0,
        }
    }

    pub fn with_readout_bias(mut self, bias: f64) -> Self {
        self.readout_bias = bias;
        self
    }

    pub fn validate(&self, schedule: &Schedule) -> Result<()> {
        check_range("theta", self.theta, 0.0, THETA_MAX)?;
        if !(0.0..0.5).contains(&self.readout_bias) {
            return Err(Error::Domain {
                name: "readout_bias",
                value: self.readout_bias,
                lo: 0.0,
                hi: 0.5,
            });
        }
        self.amplitudes(schedule).map(|_| ())
    }

    /// True `beta_k` for each schedule entry (readout bias not included).
    pub fn amplitudes(&self, schedule: &Schedule) -> Result<NoiseVector> {
        match &self.noise {
            TrueNoise::ExplicitBeta { beta } => {
                if beta.len() != schedule.len() {
                    return Err(Error::DimensionMismatch {
                        what: "explicit beta",
                        expected: schedule.len(),
                        got: beta.len(),
                    });
                }
                Ok(beta.clone())
            }
            TrueNoise::Depolarizing { kappa } => Ok(NoiseVector::depolarizing(*kappa, schedule)),
            TrueNoise::CustomCurve { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidDistribution(
                        "custom curve has no knots".into(),
                    ));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidDistribution(
                        "custom curve knots must have increasing m".into(),
                    ));
                }
                NoiseVector::new(
                    schedule
                        .powers()
                        .iter()
                        .map(|&m| interpolate(points, f64::from(m)))
                        .collect(),
                )
            }
        }
    }

    /// Per-entry `(p_k, q_k)` including readout bias; `q_k` is `None` for
    /// `m_k = 0`.
    pub fn probabilities(&self, schedule: &Schedule) -> Result<Vec<(f64, Option<f64>)>> {
        self.validate(schedule)?;
        let beta = self.amplitudes(schedule)?;
        let b = self.readout_bias;
        let flip = |p: f64| (1.0 - b) * p + b * (1.0 - p);
        Ok(schedule
            .powers()
            .iter()
            .zip(beta.as_slice())
            .map(|(&m, &beta)| {
                let p = flip(oscillation(self.theta, beta, grover_index(m)));
                let q = (m >= 1).then(|| flip(oscillation(self.theta, beta, ancillary_index(m))));
                (p, q)
            })
            .collect())
    }
}

fn interpolate(points: &[(f64, f64)], m: f64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if m <= first.0 {
        return first.1;
    }
    if m >= last.0 {
        return last.1;
    }
    let i = points.partition_point(|p| p.0 <= m);
    let (a, b) = (points[i - 1], points[i]);
    a.1 + (b.1 - a.1) * (m - a.0) / (b.0 - a.0)
}

/// Number of `u < p` events among `shots` uniform draws.
fn binomial<R: Rng>(rng: &mut R, shots: u32, p: f64) -> u32 {
    (0..shots).filter(|_| rng.random::<f64>() < p).count() as u32
}

/// Counts for trial `trial` of a campaign seeded with `master_seed`.
pub fn sample_trial(
    spec: &TrueModelSpec,
    schedule: &Schedule,
    master_seed: u64,
    trial: u64,
) -> Result<CountData> {
    let probs = spec.probabilities(schedule)?;
    let mut grover = Vec::with_capacity(schedule.len());
    let mut ancillary = Vec::with_capacity(schedule.len());
    for (k, (p, q)) in probs.into_iter().enumerate() {
        let slot = 2 * k as u64;
        grover.push(binomial(
            &mut substream(master_seed, trial, slot),
            schedule.n_shot(),
            p,
        ));
        ancillary.push(q.map(|q| {
            binomial(
                &mut substream(master_seed, trial, slot + 1),
                schedule.n_shot_prime(),
                q,
            )
        }));
    }
    CountData::new(schedule.clone(), grover, ancillary)
}

/// Single record; identical to trial 0 of a campaign with the same seed.
pub fn sample_counts(spec: &TrueModelSpec, schedule: &Schedule, seed: u64) -> Result<CountData> {
    sample_trial(spec, schedule, seed, 0)
}

pub fn expected_counts(spec: &TrueModelSpec, schedule: &Schedule) -> Result<ExpectedCounts> {
    let n = f64::from(schedule.n_shot());
    let n_prime = f64::from(schedule.n_shot_prime());
    let (grover, ancillary) = spec
        .probabilities(schedule)?
        .into_iter()
        .map(|(p, q)| (n * p, q.map(|q| n_prime * q)))
        .unzip();
    Ok(ExpectedCounts {
        schedule: schedule.clone(),
        grover,
        ancillary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn lis() -> Schedule {
        Schedule::exponential(8, 50, 50).unwrap()
    }

    #[test]
    fn certain_outcomes() {
        let schedule = Schedule::new(vec![0], 37, 5).unwrap();
        let spec = TrueModelSpec::depolarizing(FRAC_PI_2, 0.0).unwrap();
        let counts = sample_counts(&spec, &schedule, 9).unwrap();
        assert_eq!(counts.grover_ones(), &[37]);
        assert_eq!(counts.ancillary_ones(), &[None]);

        let schedule = Schedule::new(vec![1, 3, 8], 40, 40).unwrap();
        let spec = TrueModelSpec::depolarizing(0.0, 0.0).unwrap();
        let counts = sample_counts(&spec, &schedule, 1).unwrap();
        assert_eq!(counts.grover_ones(), &[0, 0, 0]);
        assert_eq!(counts.ancillary_ones(), &[Some(0), Some(0), Some(0)]);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = TrueModelSpec::depolarizing(0.35, 0.01).unwrap();
        let a = sample_counts(&spec, &lis(), 42).unwrap();
        let b = sample_counts(&spec, &lis(), 42).unwrap();
        assert_eq!(a, b);
        let c = sample_counts(&spec, &lis(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trials_use_distinct_streams() {
        let spec = TrueModelSpec::depolarizing(0.35, 0.01).unwrap();
        let a = sample_trial(&spec, &lis(), 7, 0).unwrap();
        let b = sample_trial(&spec, &lis(), 7, 1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn expected_count_examples() {
        let schedule = Schedule::new(vec![0, 1, 5], 50, 30).unwrap();
        let flat = TrueModelSpec::explicit(0.3, NoiseVector::uniform(0.0, 3).unwrap());
        let e = expected_counts(&flat, &schedule).unwrap();
        assert!(e.grover.iter().all(|&g| g == 25.0));
        assert_eq!(e.ancillary, vec![None, Some(15.0), Some(15.0)]);

        let schedule = Schedule::new(vec![0], 50, 50).unwrap();
        let spec = TrueModelSpec::depolarizing(FRAC_PI_4, 0.3).unwrap();
        let e = expected_counts(&spec, &schedule).unwrap();
        assert!((e.grover[0] - 25.0).abs() < 1e-13);

        let theta = 0.35;
        let schedule = Schedule::new(vec![4], 50, 50).unwrap();
        let spec = TrueModelSpec::depolarizing(theta, 0.01).unwrap();
        let e = expected_counts(&spec, &schedule).unwrap();
        let direct = 50.0 * (0.5 - (-0.04f64).exp() * (18.0 * theta).cos() / 2.0);
        assert!((e.grover[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn readout_bias_shifts_offset() {
        let schedule = Schedule::new(vec![0], 100, 100).unwrap();
        let spec = TrueModelSpec::depolarizing(0.0, 0.0)
            .unwrap()
            .with_readout_bias(0.02);
        let (p, _) = spec.probabilities(&schedule).unwrap()[0];
        assert!((p - 0.02).abs() < 1e-15);
        let bad = TrueModelSpec::depolarizing(0.3, 0.0)
            .unwrap()
            .with_readout_bias(0.5);
        assert!(bad.validate(&schedule).is_err());
    }

    #[test]
    fn custom_curve_interpolates() {
        let schedule = Schedule::new(vec![0, 5, 10, 20, 40], 10, 10).unwrap();
        let spec = TrueModelSpec {
            theta: 0.3,
            noise: TrueNoise::CustomCurve {
                points: vec![(0.0, 1.0), (10.0, 0.8), (30.0, 0.2)],
            },
            readout_bias: 0.0,
        };
        let b = spec.amplitudes(&schedule).unwrap();
        let expect = [1.0, 0.9, 0.8, 0.5, 0.2];
        for (x, y) in b.as_slice().iter().zip(expect) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn count_validation() {
        let schedule = Schedule::new(vec![0, 2], 10, 10).unwrap();
        assert!(CountData::new(schedule.clone(), vec![1, 2], vec![None, Some(3)]).is_ok());
        assert!(CountData::new(schedule.clone(), vec![1], vec![None, Some(3)]).is_err());
        assert!(CountData::new(schedule.clone(), vec![11, 2], vec![None, Some(3)]).is_err());
        assert!(CountData::new(schedule.clone(), vec![1, 2], vec![Some(1), Some(3)]).is_err());
        assert!(CountData::new(schedule, vec![1, 2], vec![None, None]).is_err());
    }

    #[test]
    fn binomial_matches_bernoulli_accumulation() {
        for (seed, p) in [(3u64, 0.1), (4, 0.5), (5, 0.93)] {
            let schedule = Schedule::new(vec![1], 17, 17).unwrap();
            let mut rng = substream(seed, 0, 0);
            let fast = binomial(&mut rng, schedule.n_shot(), p);
            let mut rng = substream(seed, 0, 0);
            let mut slow = 0;
            for _ in 0..schedule.n_shot() {
                let bit = rng.random::<f64>() < p;
                slow += u32::from(bit);
            }
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn frequencies_converge() {
        let shots = 10_000;
        let schedule = Schedule::new(vec![0, 1, 3, 7], shots, shots).unwrap();
        let spec = TrueModelSpec::depolarizing(0.35, 0.05).unwrap();
        let probs = spec.probabilities(&schedule).unwrap();
        for seed in [1, 2, 3] {
            let counts = sample_counts(&spec, &schedule, seed).unwrap();
            for (k, (p, q)) in probs.iter().enumerate() {
                let tol = |p: f64| 5.0 * (p * (1.0 - p) / f64::from(shots)).sqrt();
                let freq = counts.grover(k) / f64::from(shots);
                assert!((freq - p).abs() < tol(*p));
                if let (Some(q), Some(l)) = (q, counts.ancillary(k)) {
                    assert!((l / f64::from(shots) - q).abs() < tol(*q));
                }
            }
        }
    }
}
