//! Orthogonalized nuisance coordinates.
//!
//! For every schedule entry the amplitude `beta_k` is tied to the amplitude
//! angle through the conserved quantity
//!
//! ```text
//! (1 - A_p(theta) beta^2) (1 - A_q(theta) beta^2) = c_k
//! A_p = cos^2(2 (2m + 1) theta),   A_q = cos^2(2 (2m - 3) theta)
//! ```
//!
//! Along a curve of constant `c_k` the score for `theta` is uncorrelated with
//! the score for `c_k` (equal Grover and ancillary shot counts), so the
//! likelihood can be maximized over `theta` alone with any fixed `c`.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::model::{ancillary_index, grover_index, Schedule};

/// Free constants `c_k in [0, 1]`, one per schedule entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrthoParams(Vec<f64>);

impl OrthoParams {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        for &ck in &c {
            check_range("c", ck, 0.0, 1.0)?;
        }
        Ok(Self(c))
    }

    pub fn uniform(c: f64, len: usize) -> Result<Self> {
        Self::new(vec![c; len])
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

    pub fn prefix(&self, len: usize) -> Self {
        Self(self.0[..len].to_vec())
    }

    /// Amplitudes along the orthogonal solution at `theta`.
    ///
    /// Entries with `m_k = 0` carry no nuisance and stay at `beta = 1`;
    /// degenerate points give `beta = 0`.
    pub fn profile_amplitudes(
        &self,
        theta: f64,
        schedule: &Schedule,
        profile: Profile,
    ) -> Result<Vec<f64>> {
        self.check_len(schedule)?;
        schedule
            .powers()
            .iter()
            .zip(&self.0)
            .map(|(&m, &c)| {
                if m == 0 {
                    return Ok(1.0);
                }
                let beta = beta_from_c(theta, c, m)?.beta;
                Ok(match profile {
                    Profile::Analytic => beta,
                    Profile::Admissible => beta.min(1.0),
                })
            })
            .collect()
    }

    pub(crate) fn check_len(&self, schedule: &Schedule) -> Result<()> {
        if self.0.len() != schedule.len() {
            return Err(Error::DimensionMismatch {
                what: "ortho params",
                expected: schedule.len(),
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for OrthoParams {
    type Error = Error;

    fn try_from(c: Vec<f64>) -> Result<Self> {
        Self::new(c)
    }
}

impl From<OrthoParams> for Vec<f64> {
    fn from(p: OrthoParams) -> Self {
        p.0
    }
}

/// Which amplitudes the profile likelihood uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// The analytic solution, which may exceed 1 while keeping every
    /// probability admissible.
    Analytic,
    /// Capped at the physical maximum `beta = 1`.
    Admissible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationFactors {
    pub a_p: f64,
    pub a_q: f64,
}

impl OscillationFactors {
    pub fn is_degenerate(&self) -> bool {
        self.a_p + self.a_q == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSolution {
    pub beta: f64,
    /// `A_p = A_q = 0`: both probabilities are 1/2 whatever `beta` is.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPartials {
    pub dbeta_dtheta: f64,
    pub dbeta_dc: f64,
}

fn check_m(m: u32) -> Result<()> {
    if m == 0 {
        Err(Error::AncillaryUndefined)
    } else {
        Ok(())
    }
}

pub fn oscillation_factors(theta: f64, m: u32) -> Result<OscillationFactors> {
    check_m(m)?;
    let cp = (2.0 * grover_index(m) * theta).cos();
    let cq = (2.0 * ancillary_index(m) * theta).cos();
    Ok(OscillationFactors {
        a_p: cp * cp,
        a_q: cq * cq,
    })
}

fn factor_derivatives(theta: f64, m: u32) -> (f64, f64) {
    let jp = grover_index(m);
    let jq = ancillary_index(m);
    (
        -2.0 * jp * (4.0 * jp * theta).sin(),
        -2.0 * jq * (4.0 * jq * theta).sin(),
    )
}

/// Smaller root of the quadratic in `beta^2`, which is the root keeping both
/// probabilities inside `[0, 1]`.
///
/// Evaluated as `beta^2 = 2 (1 - c) / (s + sqrt((A_p - A_q)^2 + 4 A_p A_q c))`
/// with `s = A_p + A_q`; the discriminant is written as a sum of
/// non-negative terms so it never rounds below zero.
pub fn beta_from_c(theta: f64, c: f64, m: u32) -> Result<BetaSolution> {
    check_range("c", c, 0.0, 1.0)?;
    Ok(solve_beta(oscillation_factors(theta, m)?, c))
}

fn solve_beta(f: OscillationFactors, c: f64) -> BetaSolution {
    let s = f.a_p + f.a_q;
    if s == 0.0 {
        return BetaSolution {
            beta: 0.0,
            degenerate: true,
        };
    }
    let d = f.a_p - f.a_q;
    let disc = d * d + 4.0 * f.a_p * f.a_q * c;
    let beta_sq = 2.0 * (1.0 - c) / (s + disc.sqrt());
    BetaSolution {
        beta: beta_sq.sqrt(),
        degenerate: false,
    }
}

/// Bracket product `(1 - A_p beta^2)(1 - A_q beta^2)`.
pub fn c_from_beta(theta: f64, beta: f64, m: u32) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    check_range("beta", beta, 0.0, f64::MAX)?;
    let f = oscillation_factors(theta, m)?;
    let bsq = beta * beta;
    let fp = 1.0 - f.a_p * bsq;
    let fq = 1.0 - f.a_q * bsq;
    if fp < -SLACK || fq < -SLACK {
        return Err(Error::OutOfBranch { beta });
    }
    Ok(fp.max(0.0) * fq.max(0.0))
}

/// Implicit derivatives of `beta(theta, c)`.
///
/// `c = 1` is the constant solution `beta = 0` where the implicit function
/// theorem does not apply; that case is reported as
/// [`Error::SingularDerivative`] and callers treat it as zero partials.
pub fn beta_partials(theta: f64, c: f64, m: u32) -> Result<BetaPartials> {
    let sol = beta_from_c(theta, c, m)?;
    let f = oscillation_factors(theta, m)?;
    let (dap, daq) = factor_derivatives(theta, m);
    let b = sol.beta;
    let bsq = b * b;
    let fp = 1.0 - f.a_p * bsq;
    let fq = 1.0 - f.a_q * bsq;
    let df_dbeta = -2.0 * b * (f.a_p * fq + f.a_q * fp);
    if df_dbeta == 0.0 || !df_dbeta.is_finite() {
        return Err(Error::SingularDerivative);
    }
    let df_dtheta = -bsq * (dap * fq + daq * fp);
    Ok(BetaPartials {
        dbeta_dtheta: -df_dtheta / df_dbeta,
        dbeta_dc: 1.0 / df_dbeta,
    })
}

/// Relative residual of the orthogonality differential equation
///
/// ```text
/// beta' (A_p/(1 - A_p beta^2) + A_q/(1 - A_q beta^2))
///     = -(beta/2) (A_p'/(1 - A_p beta^2) + A_q'/(1 - A_q beta^2))
/// ```
///
/// at the analytic solution, scaled by the larger side's magnitude (or 1).
pub fn ode_residual(theta: f64, c: f64, m: u32) -> Result<f64> {
    let b = beta_from_c(theta, c, m)?.beta;
    let partials = beta_partials(theta, c, m)?;
    let f = oscillation_factors(theta, m)?;
    let (dap, daq) = factor_derivatives(theta, m);
    let gp = 1.0 / (1.0 - f.a_p * b * b);
    let gq = 1.0 / (1.0 - f.a_q * b * b);
    let lhs = partials.dbeta_dtheta * (f.a_p * gp + f.a_q * gq);
    let rhs = -0.5 * b * (dap * gp + daq * gq);
    Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0))
}
