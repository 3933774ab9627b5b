//! Fisher information in the original `(theta, beta_1..beta_M)` and the
//! orthogonalized `(theta, c_1..c_M)` coordinates, and the derived
//! Cramér–Rao bounds.
//!
//! No circuit couples two different `beta_k`, so the original matrix has
//! arrow structure: nonzeros only on the first row, first column and the
//! diagonal. The bound on `theta` then reduces to an O(M) Schur complement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ancillary_index, grover_index, NoiseVector, Schedule};
use crate::ortho::{beta_from_c, beta_partials, OrthoParams};

/// `1 - beta^2 A` below this is treated as a boundary probability.
const BOUNDARY: f64 = 1e-14;
/// Relative size below which a Schur complement counts as zero.
const IDENTIFIABILITY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    /// Nonzeros only on row 0, column 0 and the diagonal.
    Arrow,
    Dense,
}

/// Symmetric `(M+1) x (M+1)` information matrix, row-major; index 0 is
/// `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    dim: usize,
    entries: Vec<f64>,
    structure: Structure,
}

impl FisherMatrix {
    pub fn from_dense(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                what: "matrix entries",
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Ok(Self {
            dim,
            entries,
            structure: Structure::Dense,
        })
    }

    fn zeros(dim: usize, structure: Structure) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
            structure,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
        self.entries[j * self.dim + i] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Same entries, treated as a general matrix.
    pub fn to_dense(&self) -> Self {
        Self {
            structure: Structure::Dense,
            ..self.clone()
        }
    }

    /// Largest `|J_1k| / sqrt(J_11 J_kk)` over nuisance entries with nonzero
    /// diagonal.
    pub fn max_normalized_coupling(&self) -> f64 {
        let j11 = self.get(0, 0);
        (1..self.dim)
            .filter(|&k| self.get(k, k) > 0.0 && j11 > 0.0)
            .map(|k| self.get(0, k).abs() / (j11 * self.get(k, k)).sqrt())
            .fold(0.0, f64::max)
    }
}

struct SlotInfo {
    theta_theta: f64,
    theta_beta: f64,
    beta_beta: f64,
}

/// Per-shot Bernoulli information `(d_a p)(d_b p) / (p (1 - p))` of one
/// oscillation `p = 1/2 - (beta/2) cos(2 j theta)`, scaled by `shots`.
fn oscillation_info(theta: f64, beta: f64, index: f64, shots: f64) -> Option<SlotInfo> {
    let phi = 2.0 * index * theta;
    let (s, c) = phi.sin_cos();
    let a = c * c;
    let denom = 1.0 - beta * beta * a;
    if denom < BOUNDARY {
        return None;
    }
    Some(SlotInfo {
        theta_theta: shots * 4.0 * beta * beta * index * index * s * s / denom,
        theta_beta: -shots * 2.0 * beta * index * s * c / denom,
        beta_beta: shots * a / denom,
    })
}

/// Fisher matrix for arbitrary admissible amplitudes (may exceed 1).
pub fn fisher_matrix_amplitudes(
    theta: f64,
    amplitudes: &[f64],
    schedule: &Schedule,
) -> Result<FisherMatrix> {
    if amplitudes.len() != schedule.len() {
        return Err(Error::DimensionMismatch {
            what: "noise vector",
            expected: schedule.len(),
            got: amplitudes.len(),
        });
    }
    let n = f64::from(schedule.n_shot());
    let n_prime = f64::from(schedule.n_shot_prime());
    let mut j = FisherMatrix::zeros(schedule.len() + 1, Structure::Arrow);
    let mut j11 = 0.0;
    for (k, (&m, &beta)) in schedule.powers().iter().zip(amplitudes).enumerate() {
        let mut parts = vec![oscillation_info(theta, beta, grover_index(m), n)];
        if m >= 1 {
            parts.push(oscillation_info(theta, beta, ancillary_index(m), n_prime));
        }
        let (mut tt, mut tb, mut bb) = (0.0, 0.0, 0.0);
        for part in parts {
            let part = part.ok_or(Error::DivergentInformation { slot: k })?;
            tt += part.theta_theta;
            tb += part.theta_beta;
            bb += part.beta_beta;
        }
        j11 += tt;
        j.set_sym(0, k + 1, tb);
        j.set_sym(k + 1, k + 1, bb);
    }
    j.set_sym(0, 0, j11);
    Ok(j)
}

pub fn fisher_matrix(theta: f64, beta: &NoiseVector, schedule: &Schedule) -> Result<FisherMatrix> {
    crate::error::check_range("theta", theta, 0.0, crate::model::THETA_MAX)?;
    fisher_matrix_amplitudes(theta, beta.as_slice(), schedule)
}

/// `J_xi = T^T J T`, with `T` the Jacobian of `(theta, beta)` with respect to
/// `(theta, c)` along the analytic orthogonal solution.
///
/// Slots with `c_k = 1` (constant `beta = 0`), `m_k = 0` (no nuisance) or a
/// degenerate point contribute zero Jacobian columns. The first-row
/// off-diagonals vanish only when `n_shot == n_shot_prime`.
pub fn fisher_orthogonalized(
    theta: f64,
    c: &OrthoParams,
    schedule: &Schedule,
) -> Result<FisherMatrix> {
    c.check_len(schedule)?;
    let dim = schedule.len() + 1;
    let mut beta = Vec::with_capacity(schedule.len());
    let mut dtheta = Vec::with_capacity(schedule.len());
    let mut dc = Vec::with_capacity(schedule.len());
    for (&m, &ck) in schedule.powers().iter().zip(c.as_slice()) {
        if m == 0 {
            beta.push(1.0);
            dtheta.push(0.0);
            dc.push(0.0);
            continue;
        }
        let sol = beta_from_c(theta, ck, m)?;
        beta.push(sol.beta);
        if sol.degenerate || ck == 1.0 {
            dtheta.push(0.0);
            dc.push(0.0);
        } else {
            let p = beta_partials(theta, ck, m)?;
            dtheta.push(p.dbeta_dtheta);
            dc.push(p.dbeta_dc);
        }
    }
    let j = fisher_matrix_amplitudes(theta, &beta, schedule)?;

    // T has T[0][0] = 1, T[k][0] = d beta_k / d theta, T[k][k] = d beta_k / d c_k.
    let mut jx = FisherMatrix::zeros(dim, Structure::Arrow);
    let mut j11 = j.get(0, 0);
    for k in 1..dim {
        let (t, d) = (dtheta[k - 1], dc[k - 1]);
        j11 += 2.0 * t * j.get(0, k) + t * t * j.get(k, k);
        jx.set_sym(0, k, d * (j.get(0, k) + t * j.get(k, k)));
        jx.set_sym(k, k, d * d * j.get(k, k));
    }
    jx.set_sym(0, 0, j11);
    Ok(jx)
}

/// `(J^-1)_11`: the variance bound on `theta` per experiment.
pub fn crlb_theta(j: &FisherMatrix) -> Result<f64> {
    match j.structure() {
        Structure::Arrow => {
            // Double-double accumulation: the complement can be a tiny
            // fraction of J_11.
            let j11 = j.get(0, 0);
            let mut schur = Dd::from(j11);
            for k in 1..j.dim() {
                let (off, diag) = (j.get(0, k), j.get(k, k));
                if diag > 0.0 {
                    schur = schur.sub(Dd::square(off).div(diag));
                } else if off != 0.0 {
                    return Err(Error::NotIdentifiable(f64::NEG_INFINITY));
                }
            }
            let schur = schur.value();
            if schur.is_nan() || schur <= IDENTIFIABILITY * j11.abs() {
                return Err(Error::NotIdentifiable(schur));
            }
            Ok(1.0 / schur)
        }
        Structure::Dense => Ok(refined_solve(j.dim(), j.entries(), 0)?[0]),
    }
}

/// Double-double number `hi + lo`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }
}

impl Dd {
    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn product(a: f64, b: f64) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn square(a: f64) -> Self {
        Self::product(a, a)
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Self::two_sum(s.hi, lo)
    }

    fn sub(self, o: Self) -> Self {
        self.add(Self {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    fn div(self, d: f64) -> Self {
        let q = self.hi / d;
        let r = self.sub(Self::product(q, d));
        let q2 = (r.hi + r.lo) / d;
        Self::two_sum(q, q2)
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Solves `J x = e_col` by Gauss–Jordan followed by two rounds of iterative
/// refinement with residuals accumulated in double-double.
fn refined_solve(dim: usize, entries: &[f64], col: usize) -> Result<Vec<f64>> {
    let inv = dense_inverse(dim, entries)?;
    let mut x: Vec<f64> = (0..dim).map(|i| inv[i * dim + col]).collect();
    for _ in 0..2 {
        let residual: Vec<f64> = (0..dim)
            .map(|i| {
                let mut acc = Dd::from(if i == col { 1.0 } else { 0.0 });
                for (k, xk) in x.iter().enumerate() {
                    acc = acc.sub(Dd::product(entries[i * dim + k], *xk));
                }
                acc.value()
            })
            .collect();
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += (0..dim)
                .map(|k| inv[i * dim + k] * residual[k])
                .sum::<f64>();
        }
    }
    Ok(x)
}

/// Gauss–Jordan inverse with partial pivoting, row-major.
pub fn dense_inverse(dim: usize, entries: &[f64]) -> Result<Vec<f64>> {
    let width = 2 * dim;
    let mut aug = vec![0.0; dim * width];
    for i in 0..dim {
        aug[i * width..i * width + dim].copy_from_slice(&entries[i * dim..(i + 1) * dim]);
        aug[i * width + dim + i] = 1.0;
    }
    let scale = entries.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&a, &b| {
                aug[a * width + col]
                    .abs()
                    .total_cmp(&aug[b * width + col].abs())
            })
            .unwrap();
        let pv = aug[pivot * width + col];
        if pv.abs() <= 1e-14 * scale {
            return Err(Error::NotIdentifiable(pv));
        }
        if pivot != col {
            for x in 0..width {
                aug.swap(pivot * width + x, col * width + x);
            }
        }
        for x in 0..width {
            aug[col * width + x] /= pv;
        }
        for row in 0..dim {
            if row == col {
                continue;
            }
            let factor = aug[row * width + col];
            if factor != 0.0 {
                for x in 0..width {
                    aug[row * width + x] -= factor * aug[col * width + x];
                }
            }
        }
    }
    Ok((0..dim)
        .flat_map(|i| aug[i * width + dim..(i + 1) * width].to_vec())
        .collect())
}

/// Classical sampling bound: each `m = 0` noiseless shot carries Fisher
/// information 4 about `theta`, whatever `theta` is.
pub fn classical_crlb(n_queries: u64) -> Result<f64> {
    if n_queries == 0 {
        return Err(Error::Domain {
            name: "n_queries",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    Ok(1.0 / (4.0 * n_queries as f64))
}

/// Noiseless Grover-only bound, `shots_per_k` shots on every entry.
pub fn noiseless_crlb(schedule: &Schedule, shots_per_k: u32) -> Result<f64> {
    if shots_per_k == 0 {
        return Err(Error::InvalidSchedule(
            "shots_per_k must be positive".into(),
        ));
    }
    let sum: f64 = schedule
        .powers()
        .iter()
        .map(|&m| grover_index(m).powi(2))
        .sum();
    Ok(1.0 / (4.0 * f64::from(shots_per_k) * sum))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryAccounting {
    /// `sum_k n_shot (2 m_k + 1)`: Grover circuits only.
    #[default]
    GroverOnly,
    /// Adds `n_shot' (2 m_k - 1)` per ancillary circuit.
    Strict,
}

pub fn query_count(schedule: &Schedule, accounting: QueryAccounting) -> u64 {
    let n = u64::from(schedule.n_shot());
    let n_prime = u64::from(schedule.n_shot_prime());
    schedule
        .powers()
        .iter()
        .map(|&m| {
            let m = u64::from(m);
            let grover = n * (2 * m + 1);
            match accounting {
                QueryAccounting::Strict if m >= 1 => grover + n_prime * (2 * m - 1),
                _ => grover,
            }
        })
        .sum()
}
