//! Exact density-matrix simulation of the state preparation, Grover and
//! ancillary operators under a global depolarizing channel.
//!
//! Basis index is `2 j + b`, where `j` runs over the `n` index qubits and `b`
//! is the last (flag) qubit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_range, Error, Result};
use crate::model::THETA_MAX;

pub type CMatrix = DMatrix<Complex64>;

pub const MAX_INDEX_QUBITS: u32 = 6;
const PROBABILITY_CLIP: f64 = 1e-14;
const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    G,
    R,
    Uf,
}

#[derive(Debug, Clone)]
pub struct CircuitModel {
    n: u32,
    op_a: CMatrix,
    op_g: CMatrix,
    op_r: CMatrix,
    op_uf: CMatrix,
    op_u0: CMatrix,
    theta_encoded: f64,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn check_qubits(n: u32) -> Result<usize> {
    if n == 0 || n > MAX_INDEX_QUBITS {
        return Err(Error::Domain {
            name: "n",
            value: f64::from(n),
            lo: 1.0,
            hi: f64::from(MAX_INDEX_QUBITS),
        });
    }
    Ok(1usize << (n + 1))
}

/// Real orthogonal matrix whose first column is `v` (unit norm).
fn householder_with_first_column(v: &[f64]) -> DMatrix<f64> {
    let d = v.len();
    let mut u: Vec<f64> = v.to_vec();
    // Reflect e_0 onto v: H = I - 2 w w^T / (w^T w), w = e_0 - v.
    u[0] -= 1.0;
    for x in u.iter_mut() {
        *x = -*x;
    }
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    let mut h = DMatrix::<f64>::identity(d, d);
    if norm2 > 1e-30 {
        for i in 0..d {
            for j in 0..d {
                h[(i, j)] -= 2.0 * u[i] * u[j] / norm2;
            }
        }
    }
    h
}

impl CircuitModel {
    /// Builds all operators from an arbitrary unitary state preparation.
    pub fn from_state_preparation(n: u32, op_a: CMatrix) -> Result<Self> {
        let d = check_qubits(n)?;
        if op_a.nrows() != d || op_a.ncols() != d {
            return Err(Error::DimensionMismatch {
                what: "state preparation",
                expected: d,
                got: op_a.nrows(),
            });
        }
        let mut op_u0 = CMatrix::identity(d, d);
        op_u0[(0, 0)] = c(-1.0);
        let op_uf = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| {
            if i % 2 == 0 {
                c(1.0)
            } else {
                c(-1.0)
            }
        }));
        let op_r = -(&op_a * &op_u0 * op_a.adjoint());
        let op_g = &op_r * &op_uf;
        let s: f64 = (0..d / 2).map(|j| op_a[(2 * j + 1, 0)].norm_sqr()).sum();
        let theta_encoded = s.clamp(0.0, 1.0).sqrt().asin();
        Ok(Self {
            n,
            op_a,
            op_g,
            op_r,
            op_uf,
            op_u0,
            theta_encoded,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << (self.n + 1)
    }

    pub fn theta_encoded(&self) -> f64 {
        self.theta_encoded
    }

    pub fn op_a(&self) -> &CMatrix {
        &self.op_a
    }

    pub fn op_g(&self) -> &CMatrix {
        &self.op_g
    }

    pub fn op_r(&self) -> &CMatrix {
        &self.op_r
    }

    pub fn op_uf(&self) -> &CMatrix {
        &self.op_uf
    }

    pub fn op_u0(&self) -> &CMatrix {
        &self.op_u0
    }

    fn op(&self, op: Op) -> &CMatrix {
        match op {
            Op::G => &self.op_g,
            Op::R => &self.op_r,
            Op::Uf => &self.op_uf,
        }
    }

    /// Multiplies the largest-magnitude entry of the ancillary operator by
    /// `e^{i phase}`. Negative control for the identity checks.
    pub fn corrupt_ancillary(&mut self, phase: f64) {
        let (mut best, mut at) = (-1.0, (0, 0));
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                let v = self.op_r[(i, j)].norm();
                if v > best {
                    best = v;
                    at = (i, j);
                }
            }
        }
        self.op_r[at] *= Complex64::from_polar(1.0, phase);
    }
}

/// `A = T (P x I)`, where `P` prepares `sum_j sqrt(r_j)|j>` and `T` rotates
/// `sqrt(f_j)` onto the flag qubit conditioned on `j`.
pub fn build_sum_circuit(n: u32, f_values: &[f64], r_values: &[f64]) -> Result<CircuitModel> {
    let d = check_qubits(n)?;
    let half = d / 2;
    for (what, v) in [("f_values", f_values), ("r_values", r_values)] {
        if v.len() != half {
            return Err(Error::DimensionMismatch {
                what,
                expected: half,
                got: v.len(),
            });
        }
    }
    if f_values.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidDistribution(
            "f values must lie in [0, 1]".into(),
        ));
    }
    if r_values.iter().any(|r| r.is_nan() || *r < 0.0) {
        return Err(Error::InvalidDistribution(
            "r values must be non-negative".into(),
        ));
    }
    let total: f64 = r_values.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "r values sum to {total}"
        )));
    }

    let amplitudes: Vec<f64> = r_values.iter().map(|r| r.sqrt()).collect();
    let p = householder_with_first_column(&amplitudes);
    let mut pi = CMatrix::zeros(d, d);
    let mut t = CMatrix::zeros(d, d);
    for j in 0..half {
        for jp in 0..half {
            for b in 0..2 {
                pi[(2 * j + b, 2 * jp + b)] = c(p[(j, jp)]);
            }
        }
        let (s, co) = (f_values[j].sqrt(), (1.0 - f_values[j]).sqrt());
        t[(2 * j, 2 * j)] = c(co);
        t[(2 * j, 2 * j + 1)] = c(-s);
        t[(2 * j + 1, 2 * j)] = c(s);
        t[(2 * j + 1, 2 * j + 1)] = c(co);
    }
    CircuitModel::from_state_preparation(n, t * pi)
}

/// Unitary built from layers of random U(2) rotations on every index pair.
pub fn random_unitary(dim: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = CMatrix::identity(dim, dim);
    for _ in 0..3 {
        for a in 0..dim {
            for b in a + 1..dim {
                let angle = rng.random::<f64>() * THETA_MAX;
                let (alpha, beta, gamma) = (
                    rng.random::<f64>() * std::f64::consts::TAU,
                    rng.random::<f64>() * std::f64::consts::TAU,
                    rng.random::<f64>() * std::f64::consts::TAU,
                );
                let g = Complex64::from_polar(1.0, gamma);
                let m00 = g * Complex64::from_polar(angle.cos(), alpha);
                let m01 = g * Complex64::from_polar(angle.sin(), beta);
                let m10 = -g * Complex64::from_polar(angle.sin(), -beta);
                let m11 = g * Complex64::from_polar(angle.cos(), -alpha);
                for col in 0..dim {
                    let (x, y) = (u[(a, col)], u[(b, col)]);
                    u[(a, col)] = m00 * x + m01 * y;
                    u[(b, col)] = m10 * x + m11 * y;
                }
            }
        }
    }
    u
}

pub fn random_circuit(n: u32, seed: u64) -> Result<CircuitModel> {
    let d = check_qubits(n)?;
    CircuitModel::from_state_preparation(n, random_unitary(d, seed))
}

#[derive(Debug, Clone)]
pub struct DensityState {
    rho: CMatrix,
}

impl DensityState {
    pub fn initial(circuit: &CircuitModel) -> Self {
        let psi = circuit.op_a.column(0).into_owned();
        Self {
            rho: &psi * psi.adjoint(),
        }
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rho.clone().symmetric_eigenvalues().min()
    }

    fn conjugate(&mut self, u: &CMatrix) {
        self.rho = u * &self.rho * u.adjoint();
    }

    fn depolarize(&mut self, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let d = self.rho.nrows();
        self.rho *= c(1.0 - lambda);
        for i in 0..d {
            self.rho[(i, i)] += c(lambda / d as f64);
        }
    }

    /// One step of the sequence. `Uf` is applied noiselessly.
    pub fn apply(&mut self, circuit: &CircuitModel, op: Op, lambda: f64) {
        self.conjugate(circuit.op(op));
        if op != Op::Uf {
            self.depolarize(lambda);
        }
    }
}

pub fn evolve(circuit: &CircuitModel, sequence: &[Op], lambda: f64) -> Result<DensityState> {
    check_range("lambda", lambda, 0.0, 1.0)?;
    let mut state = DensityState::initial(circuit);
    for &op in sequence {
        state.apply(circuit, op, lambda);
    }
    Ok(state)
}

/// Probability of reading 1 on the flag qubit.
pub fn hit_probability(state: &DensityState) -> f64 {
    let d = state.rho.nrows();
    let p: f64 = (0..d / 2)
        .map(|j| state.rho[(2 * j + 1, 2 * j + 1)].re)
        .sum();
    if (-PROBABILITY_CLIP..0.0).contains(&p) {
        0.0
    } else if p > 1.0 && p <= 1.0 + PROBABILITY_CLIP {
        1.0
    } else {
        p
    }
}

fn max_entry_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Max-entry norm of `R G^{m-1} - Uf G^{m-2}`.
pub fn verify_ancillary_identity(circuit: &CircuitModel, m: u32) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain {
            name: "m",
            value: f64::from(m),
            lo: 2.0,
            hi: f64::INFINITY,
        });
    }
    let d = circuit.dim();
    let mut g_pow = CMatrix::identity(d, d);
    for _ in 0..m - 2 {
        g_pow = &circuit.op_g * g_pow;
    }
    let rhs = &circuit.op_uf * &g_pow;
    let lhs = &circuit.op_r * (&circuit.op_g * g_pow);
    Ok(max_entry_diff(&lhs, &rhs))
}

/// Largest `max |U U^dagger - I|` over the operators of a circuit.
pub fn unitarity_residual(circuit: &CircuitModel) -> f64 {
    let id = CMatrix::identity(circuit.dim(), circuit.dim());
    [
        &circuit.op_a,
        &circuit.op_g,
        &circuit.op_r,
        &circuit.op_uf,
        &circuit.op_u0,
    ]
    .iter()
    .map(|u| max_entry_diff(&(*u * u.adjoint()), &id))
    .fold(0.0, f64::max)
}

fn analytic(theta: f64, amplitude: f64, index: f64) -> f64 {
    0.5 - 0.5 * amplitude * (2.0 * index * theta).cos()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub grover_residual: f64,
    pub ancillary_residual: f64,
    pub identity_residual: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl OracleReport {
    pub fn max_residual(&self) -> f64 {
        self.grover_residual
            .max(self.ancillary_residual)
            .max(self.identity_residual)
    }

    fn merge(&mut self, other: &Self) {
        self.grover_residual = self.grover_residual.max(other.grover_residual);
        self.ancillary_residual = self.ancillary_residual.max(other.ancillary_residual);
        self.identity_residual = self.identity_residual.max(other.identity_residual);
        self.trace_error = self.trace_error.max(other.trace_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }
}

/// Compares simulated hit probabilities against the closed forms for every
/// `m <= m_max` and checks the ancillary identity for `2 <= m <= m_max`.
pub fn check_circuit(circuit: &CircuitModel, lambda: f64, m_max: u32) -> Result<OracleReport> {
    check_range("lambda", lambda, 0.0, 1.0)?;
    let theta = circuit.theta_encoded();
    let mut report = OracleReport {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let track = |state: &DensityState, report: &mut OracleReport| {
        report.trace_error = report.trace_error.max((state.trace() - 1.0).abs());
        report.min_eigenvalue = report.min_eigenvalue.min(state.min_eigenvalue());
    };

    // state after m Grover steps, reused for the ancillary circuit at m + 1
    let mut state = DensityState::initial(circuit);
    track(&state, &mut report);
    for m in 0..=m_max {
        let beta = (1.0 - lambda).powi(m as i32);
        let p = hit_probability(&state);
        report.grover_residual = report
            .grover_residual
            .max((p - analytic(theta, beta, 2.0 * f64::from(m) + 1.0)).abs());

        if m < m_max {
            let mut anc = state.clone();
            anc.apply(circuit, Op::R, lambda);
            track(&anc, &mut report);
            let q = hit_probability(&anc);
            let beta_anc = beta * (1.0 - lambda);
            report.ancillary_residual = report
                .ancillary_residual
                .max((q - analytic(theta, beta_anc, 2.0 * f64::from(m + 1) - 3.0)).abs());

            state.apply(circuit, Op::G, lambda);
            track(&state, &mut report);
        }
    }

    let d = circuit.dim();
    let mut g_pow = CMatrix::identity(d, d);
    for _ in 2..=m_max {
        let next = &circuit.op_g * &g_pow;
        let lhs = &circuit.op_r * &next;
        let rhs = &circuit.op_uf * &g_pow;
        report.identity_residual = report.identity_residual.max(max_entry_diff(&lhs, &rhs));
        g_pow = next;
    }
    Ok(report)
}

/// Oracle suite on the sum circuit `f_j = sin^2(pi j / 10)`, uniform `r`, and
/// a randomized state preparation of the same size.
pub fn oracle_suite(
    n: u32,
    lambda: f64,
    m_max: u32,
    seed: u64,
    corrupt: bool,
) -> Result<OracleReport> {
    let half = 1usize << n;
    check_qubits(n)?;
    let f: Vec<f64> = (0..half)
        .map(|j| (std::f64::consts::PI * j as f64 / 10.0).sin().powi(2))
        .collect();
    let r = vec![1.0 / half as f64; half];
    let mut circuits = vec![build_sum_circuit(n, &f, &r)?, random_circuit(n, seed)?];
    if corrupt {
        for circuit in circuits.iter_mut() {
            circuit.corrupt_ancillary(0.1);
        }
    }
    let mut report = OracleReport {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    for circuit in &circuits {
        report.merge(&check_circuit(circuit, lambda, m_max)?);
    }
    Ok(report)
}
