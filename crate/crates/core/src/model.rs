//! Shared value types.
//!
//! Rate matrices use the `w[dest][src]` convention: `w[n][m]` is the rate of
//! the transition `m → n`, so the master equation reads `dp/dt = G·p` with
//! the generator `G` built column by column.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries may dip below zero by this much from rounding.
pub const TOL_NEGATIVE_PROBABILITY: f64 = 1e-12;
/// Allowed deviation of `Σ p_i` from one.
pub const TOL_SUM: f64 = 1e-9;

/// A normalized occupation vector over `n ≥ 2` states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    entries: DVector<f64>,
}

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(entries))
    }

    pub fn from_vector(entries: DVector<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidProbability(format!(
                "need at least 2 states, got {}",
                entries.len()
            )));
        }
        for (i, &x) in entries.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidProbability(format!("entry {} is not finite", i + 1)));
            }
            if x < -TOL_NEGATIVE_PROBABILITY {
                return Err(Error::InvalidProbability(format!("entry {} is negative ({x})", i + 1)));
            }
        }
        let sum = entries.sum();
        if (sum - 1.0).abs() > TOL_SUM {
            return Err(Error::InvalidProbability(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self { entries })
    }

    /// Uniform distribution over `n` states.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn as_slice(&self) -> &[f64] {
        self.entries.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.entries.iter().copied().collect()
    }
}

/// One of the six named rates of a 3-state system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Param {
    pub const ALL: [Param; 6] = [Param::A, Param::B, Param::C, Param::D, Param::E, Param::F];

    /// 0-based `(dest, src)` position in the rate matrix.
    pub fn position(self) -> (usize, usize) {
        match self {
            Param::A => (1, 0),
            Param::B => (2, 0),
            Param::C => (0, 1),
            Param::D => (2, 1),
            Param::E => (0, 2),
            Param::F => (1, 2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::A => "a",
            Param::B => "b",
            Param::C => "c",
            Param::D => "d",
            Param::E => "e",
            Param::F => "f",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Param::A),
            "b" => Ok(Param::B),
            "c" => Ok(Param::C),
            "d" => Ok(Param::D),
            "e" => Ok(Param::E),
            "f" => Ok(Param::F),
            other => Err(Error::BadAxis(format!("unknown rate name {other:?}; expected one of a,b,c,d,e,f"))),
        }
    }
}

/// Nonnegative transition rates with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    w: DMatrix<f64>,
}

impl RateMatrix {
    /// Validate a row-major `rows[dest][src]` array.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::BadShape(format!("need at least 2 states, got {n}")));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::BadShape(format!(
                "row {} has {} entries, expected {n}",
                i + 1,
                row.len()
            )));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if n < 2 || w.ncols() != n {
            return Err(Error::BadShape(format!("expected a square matrix with n ≥ 2, got {}×{}", w.nrows(), w.ncols())));
        }
        for i in 0..n {
            for j in 0..n {
                let x = w[(i, j)];
                if !x.is_finite() {
                    return Err(Error::NonFinite(i + 1, j + 1));
                }
                if i == j {
                    if x != 0.0 {
                        return Err(Error::NonzeroDiagonal(i + 1));
                    }
                } else if x < 0.0 {
                    return Err(Error::NegativeRate(i + 1, j + 1));
                }
            }
        }
        Ok(Self { w })
    }

    /// 3-state rates from the named parameters `(a, b, c, d, e, f)`.
    pub fn from_abcdef(rates: [f64; 6]) -> Result<Self> {
        let mut w = DMatrix::zeros(3, 3);
        for (p, x) in Param::ALL.iter().zip(rates) {
            w[p.position()] = x;
        }
        Self::from_matrix(w)
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Rate of the transition `src → dest` (0-based).
    pub fn rate(&self, dest: usize, src: usize) -> f64 {
        self.w[(dest, src)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.w)
    }

    /// Named 3-state rate; panics unless `n == 3`.
    pub fn param(&self, p: Param) -> f64 {
        assert_eq!(self.n(), 3, "named rates exist only for 3-state systems");
        self.w[p.position()]
    }

    /// `(a, b, c, d, e, f)`, or `None` unless `n == 3`.
    pub fn abcdef(&self) -> Option<[f64; 6]> {
        (self.n() == 3).then(|| Param::ALL.map(|p| self.w[p.position()]))
    }

    /// Copy with one named rate replaced.
    pub fn with_param(&self, p: Param, value: f64) -> Result<Self> {
        if self.n() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: self.n() });
        }
        let mut w = self.w.clone();
        w[p.position()] = value;
        Self::from_matrix(w)
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|&x| x == 0.0)
    }
}

/// Matrix form of the master equation: off-diagonal `m[i][j] = w[i][j]`,
/// diagonal `m[j][j] = −Σ_{i≠j} w[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    m: DMatrix<f64>,
}

impl Generator {
    pub fn from_rates(w: &RateMatrix) -> Self {
        let mut m = w.matrix().clone();
        for j in 0..m.ncols() {
            let out: f64 = (0..m.nrows()).filter(|&i| i != j).map(|i| m[(i, j)]).sum();
            m[(j, j)] = -out;
        }
        Self { m }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Off-diagonal part as a rate matrix.
    pub fn rates(&self) -> RateMatrix {
        let mut w = self.m.clone();
        w.fill_diagonal(0.0);
        RateMatrix { w }
    }

    pub fn apply(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.m * p
    }
}

/// `S(p) = ½ pᵀΣp` with symmetric Σ.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticEntropy {
    sigma: DMatrix<f64>,
}

impl QuadraticEntropy {
    /// Accepts a symmetric matrix as is, without gauge fixing.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        if n < 2 || sigma.ncols() != n {
            return Err(Error::BadShape("entropy matrix must be square with n ≥ 2".into()));
        }
        if sigma != sigma.transpose() {
            return Err(Error::DomainError("entropy matrix is not symmetric".into()));
        }
        Ok(Self { sigma })
    }

    /// Symmetrize, then shift by a multiple of the all-ones matrix so that
    /// `sigma[n−2][n−1] = 0` (0-based).
    pub fn canonical(sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        if n < 2 || sigma.ncols() != n {
            return Err(Error::BadShape("entropy matrix must be square with n ≥ 2".into()));
        }
        let sym = (&sigma + sigma.transpose()) * 0.5;
        let shift = sym[(n - 2, n - 1)];
        let mut s = sym.map(|x| x - shift);
        s[(n - 2, n - 1)] = 0.0;
        s[(n - 1, n - 2)] = 0.0;
        Ok(Self { sigma: s })
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        0.5 * p.dot(&(&self.sigma * p))
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.sigma * p
    }
}

/// An entropy `S` plus antisymmetric `K` such that `dp/dt = (n·P + K)·∇S`.
#[derive(Debug, Clone, PartialEq)]
pub struct QtDecomposition {
    pub entropy: QuadraticEntropy,
    pub k: DMatrix<f64>,
    /// Coefficient of `[[0,1,−1],[−1,0,1],[1,−1,0]]` in `K`; 3-state only.
    pub r: Option<f64>,
    /// Frobenius norm of `(n·P + K)Σ − G` for the generator it was fitted to.
    pub residual: f64,
}

impl QtDecomposition {
    pub fn n(&self) -> usize {
        self.entropy.n()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        self.entropy.matrix()
    }

    /// `n·P + K` with `P = I − J/n`.
    pub fn operator(&self) -> DMatrix<f64> {
        let n = self.n();
        projector(n) * n as f64 + &self.k
    }

    /// JSON document `{"n", "sigma", "k", "r", "residual"}`.
    pub fn to_json(&self) -> QtDecompositionJson {
        QtDecompositionJson {
            n: self.n(),
            sigma: matrix_rows(self.sigma()),
            k: matrix_rows(&self.k),
            r: self.r,
            residual: self.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QtDecompositionJson {
    pub n: usize,
    pub sigma: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub r: Option<f64>,
    pub residual: f64,
}

/// Eigenvalues of a generator with the structural zero identified.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInfo {
    /// Sorted by descending real part, then ascending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    pub zero_index: usize,
    /// `−max Re λ` over the nonzero eigenvalues; 0 when there are none.
    pub gap: f64,
    pub null_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxationKind {
    Monotonic,
    Oscillatory,
    Boundary,
}

impl RelaxationKind {
    /// One-letter code used in CSV and JSON output.
    pub fn code(self) -> &'static str {
        match self {
            RelaxationKind::Monotonic => "M",
            RelaxationKind::Oscillatory => "O",
            RelaxationKind::Boundary => "B",
        }
    }
}

/// Verdict of the 3-state discriminant test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationClass {
    pub kind: RelaxationKind,
    pub discriminant: f64,
    pub xi: f64,
    pub eta: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvwCoordinates {
    pub k_c: f64,
    pub l: f64,
    pub m_c: f64,
    pub omega: f64,
    pub u: f64,
    pub v: f64,
}

/// `P = I − J/n`.
pub fn projector(n: usize) -> DMatrix<f64> {
    let off = -1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + off } else { off })
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_unit_rates_are_valid() {
        let w = RateMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(w.n(), 2);
    }

    #[test]
    fn negative_rate_is_reported_one_based() {
        let err = RateMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap_err();
        assert_eq!(err, Error::NegativeRate(1, 2));
    }

    #[test]
    fn nonzero_diagonal_and_shape_errors() {
        let err = RateMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.5]]).unwrap_err();
        assert_eq!(err, Error::NonzeroDiagonal(2));
        assert!(matches!(
            RateMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0]]),
            Err(Error::BadShape(_))
        ));
        assert!(matches!(RateMatrix::from_rows(&[vec![0.0]]), Err(Error::BadShape(_))));
        assert!(matches!(
            RateMatrix::from_rows(&[vec![0.0, f64::NAN], vec![1.0, 0.0]]),
            Err(Error::NonFinite(1, 2))
        ));
    }

    #[test]
    fn named_accessors_follow_dest_src_convention() {
        let rows = vec![vec![0.0, 3.0, 5.0], vec![1.0, 0.0, 6.0], vec![2.0, 4.0, 0.0]];
        let w = RateMatrix::from_rows(&rows).unwrap();
        assert_eq!(w.abcdef(), Some([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(w.param(Param::A), w.rate(1, 0));
        assert_eq!(RateMatrix::from_abcdef([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(), w);
        // input untouched
        assert_eq!(rows[0][1], 3.0);
    }

    #[test]
    fn two_state_generator() {
        let w = RateMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = Generator::from_rates(&w);
        assert_eq!(g.matrix(), &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    }

    #[test]
    fn cyclic_generator_by_hand() {
        let w = RateMatrix::from_abcdef([1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let g = Generator::from_rates(&w);
        let expected = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 1.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        assert_eq!(g.matrix(), &expected);
    }

    #[test]
    fn zero_rates_give_zero_generator() {
        let w = RateMatrix::from_matrix(DMatrix::zeros(4, 4)).unwrap();
        assert!(Generator::from_rates(&w).matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn generator_readback_is_identity_off_diagonal() {
        let w = RateMatrix::from_abcdef([0.3, 1.5, 0.0, 2.25, 0.125, 7.0]).unwrap();
        assert_eq!(Generator::from_rates(&w).rates(), w);
    }

    #[test]
    fn probability_vector_checks() {
        assert!(ProbabilityVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.0 + 1e-13, -1e-13]).is_ok());
        assert!(ProbabilityVector::new(vec![1.1, -0.1]).is_err());
        assert!(ProbabilityVector::new(vec![1.0]).is_err());
    }

    #[test]
    fn canonical_gauge_zeroes_last_off_diagonal() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let e = QuadraticEntropy::canonical(s).unwrap();
        assert_eq!(e.matrix()[(1, 2)], 0.0);
        assert_eq!(e.matrix()[(0, 0)], -4.0);
        assert_eq!(e.matrix(), &e.matrix().transpose());
    }

    #[test]
    fn param_parsing() {
        assert_eq!("e".parse::<Param>().unwrap(), Param::E);
        assert!(matches!("z".parse::<Param>(), Err(Error::BadAxis(_))));
    }
}
