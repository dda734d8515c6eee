//! Stationary states, spectra and structural properties of master equations.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Generator, ProbabilityVector, RateMatrix, SpectralInfo};

/// Relative tolerance for the symmetry, double stochasticity and detailed
/// balance flags.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Symmetry properties of a rate matrix and its stationary state.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub symmetric: bool,
    pub doubly_stochastic: bool,
    pub detailed_balance: bool,
    pub stationary: ProbabilityVector,
    pub null_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReportJson {
    pub symmetric: bool,
    pub doubly_stochastic: bool,
    pub detailed_balance: bool,
    pub stationary: Vec<f64>,
    pub null_dim: usize,
}

impl StructureReport {
    pub fn to_json(&self) -> StructureReportJson {
        StructureReportJson {
            symmetric: self.symmetric,
            doubly_stochastic: self.doubly_stochastic,
            detailed_balance: self.detailed_balance,
            stationary: self.stationary.to_vec(),
            null_dim: self.null_dim,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralInfoJson {
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub zero_index: usize,
    pub gap: f64,
    pub null_dim: usize,
}

impl SpectralInfo {
    pub fn to_json(&self) -> SpectralInfoJson {
        SpectralInfoJson {
            eigenvalues: self.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            zero_index: self.zero_index,
            gap: self.gap,
            null_dim: self.null_dim,
        }
    }

    /// Eigenvalues other than the structural zero.
    pub fn nonzero(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.zero_index)
            .map(|(_, &z)| z)
            .collect()
    }
}

/// Dimension of the generator's null space.
pub fn null_dim(g: &Generator) -> usize {
    linalg::null_dim(g.matrix())
}

/// The unique `p⁰` with `G·p⁰ = 0`, `Σ p⁰ = 1`.
///
/// Solved as least squares on `G` with a row of ones appended; a degenerate
/// zero eigenvalue (reducible chain) is an error rather than an arbitrary pick.
pub fn stationary_distribution(g: &Generator) -> Result<ProbabilityVector> {
    let n = g.n();
    let nd = null_dim(g);
    if nd != 1 {
        return Err(Error::NonUniqueStationary(nd));
    }
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(g.matrix());
    a.row_mut(n).fill(1.0);
    let mut b = DVector::zeros(n + 1);
    b[n] = 1.0;
    let (p, _) = linalg::lstsq(&a, &b);
    ProbabilityVector::from_vector(p)
}

/// Sum of the principal 2×2 minors; for `n = 3` the constant term of the
/// quadratic factor of the characteristic polynomial.
pub fn principal_minor_sum(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut q = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            q += m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)];
        }
    }
    q
}

fn eigen_order(x: &Complex64, y: &Complex64) -> Ordering {
    y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im))
}

/// All eigenvalues, sorted by descending real part then ascending imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(eigen_order);
    ev
}

pub fn spectrum(g: &Generator) -> SpectralInfo {
    let eigenvalues = eigenvalues(g.matrix());
    let null_dim = null_dim(g);
    let mut by_modulus: Vec<usize> = (0..eigenvalues.len()).collect();
    by_modulus.sort_by(|&i, &j| eigenvalues[i].norm().total_cmp(&eigenvalues[j].norm()).then(i.cmp(&j)));
    let zero_index = by_modulus[0];
    let zeros = null_dim.max(1);
    let gap = by_modulus[zeros..]
        .iter()
        .map(|&i| eigenvalues[i].re)
        .fold(None, |acc: Option<f64>, re| Some(acc.map_or(re, |a| a.max(re))))
        .map_or(0.0, |re| -re);
    SpectralInfo { eigenvalues, zero_index, gap, null_dim }
}

fn close(x: f64, y: f64, scale: f64) -> bool {
    (x - y).abs() <= STRUCTURE_TOL * scale
}

pub fn is_symmetric(w: &RateMatrix) -> bool {
    let m = w.matrix();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (0..w.n()).all(|i| (0..i).all(|j| close(m[(i, j)], m[(j, i)], scale)))
}

/// Total in-rate equals total out-rate for every state.
pub fn is_doubly_stochastic(w: &RateMatrix) -> bool {
    let m = w.matrix();
    let scale = m.amax().max(f64::MIN_POSITIVE) * w.n() as f64;
    (0..w.n()).all(|s| close(m.row(s).sum(), m.column(s).sum(), scale))
}

/// `p_n·W(n→m) = p_m·W(m→n)` for all pairs.
pub fn satisfies_detailed_balance(w: &RateMatrix, p: &ProbabilityVector, tol: f64) -> bool {
    let m = w.matrix();
    let p = p.as_slice();
    let pmax = p.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let scale = (m.amax() * pmax).max(f64::MIN_POSITIVE);
    (0..w.n()).all(|i| (0..i).all(|j| (p[j] * m[(i, j)] - p[i] * m[(j, i)]).abs() <= tol * scale))
}

pub fn classify_structure(w: &RateMatrix) -> Result<StructureReport> {
    let g = Generator::from_rates(w);
    let stationary = stationary_distribution(&g)?;
    Ok(StructureReport {
        symmetric: is_symmetric(w),
        doubly_stochastic: is_doubly_stochastic(w),
        detailed_balance: satisfies_detailed_balance(w, &stationary, STRUCTURE_TOL),
        null_dim: 1,
        stationary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates2(w12: f64, w21: f64) -> RateMatrix {
        RateMatrix::from_rows(&[vec![0.0, w12], vec![w21, 0.0]]).unwrap()
    }

    fn close_vec(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn two_state_stationary() {
        let p = stationary_distribution(&Generator::from_rates(&rates2(2.0, 1.0))).unwrap();
        assert!(close_vec(p.as_slice(), &[2.0 / 3.0, 1.0 / 3.0], 1e-14));
    }

    #[test]
    fn symmetric_three_state_is_uniform() {
        let w = RateMatrix::from_abcdef([0.7, 0.2, 0.7, 1.3, 0.2, 1.3]).unwrap();
        let p = stationary_distribution(&Generator::from_rates(&w)).unwrap();
        assert!(close_vec(p.as_slice(), &[1.0 / 3.0; 3], 1e-14));
    }

    #[test]
    fn learning_model_rates_stationary() {
        let w = RateMatrix::from_abcdef([1.0, 0.0, 0.0, 2.0, 3.0, 1.0]).unwrap();
        let p = stationary_distribution(&Generator::from_rates(&w)).unwrap();
        assert!(close_vec(p.as_slice(), &[0.5, 1.0 / 3.0, 1.0 / 6.0], 1e-14));
    }

    #[test]
    fn reducible_chain_is_rejected() {
        // states 1 and 2 never exchange with 3
        let w = RateMatrix::from_abcdef([1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let err = stationary_distribution(&Generator::from_rates(&w)).unwrap_err();
        assert_eq!(err, Error::NonUniqueStationary(2));
        assert_eq!(
            stationary_distribution(&Generator::from_rates(&rates2(0.0, 0.0))).unwrap_err(),
            Error::NonUniqueStationary(2)
        );
    }

    #[test]
    fn cyclic_spectrum() {
        let w = RateMatrix::from_abcdef([1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let s = spectrum(&Generator::from_rates(&w));
        let h = 3f64.sqrt() / 2.0;
        let expected = [Complex64::new(0.0, 0.0), Complex64::new(-1.5, -h), Complex64::new(-1.5, h)];
        for (z, e) in s.eigenvalues.iter().zip(expected) {
            assert!((z - e).norm() < 1e-12, "{z} vs {e}");
        }
        assert_eq!(s.zero_index, 0);
        assert_eq!(s.null_dim, 1);
        assert!((s.gap - 1.5).abs() < 1e-12);
    }

    #[test]
    fn two_state_spectrum() {
        let s = spectrum(&Generator::from_rates(&rates2(1.0, 1.0)));
        assert!(s.eigenvalues[0].norm() < 1e-14);
        assert!((s.eigenvalues[1] - Complex64::new(-2.0, 0.0)).norm() < 1e-14);
        assert!((s.gap - 2.0).abs() < 1e-14);
    }

    #[test]
    fn secular_roots_for_one_to_six() {
        let w = RateMatrix::from_abcdef([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = Generator::from_rates(&w);
        assert_eq!(principal_minor_sum(g.matrix()), 94.0);
        // λ² + 21λ + 94 = 0
        let r = (441.0f64 - 376.0).sqrt();
        let roots = [(-21.0 + r) / 2.0, (-21.0 - r) / 2.0];
        let nz = spectrum(&g).nonzero();
        for (z, e) in nz.iter().zip(roots) {
            assert!(z.im.abs() < 1e-12 && (z.re - e).abs() < 1e-12, "{z} vs {e}");
        }
    }

    #[test]
    fn structure_flags() {
        let sym = RateMatrix::from_abcdef([0.5, 0.25, 0.5, 2.0, 0.25, 2.0]).unwrap();
        let rep = classify_structure(&sym).unwrap();
        assert!(rep.symmetric && rep.doubly_stochastic && rep.detailed_balance);
        assert!(close_vec(rep.stationary.as_slice(), &[1.0 / 3.0; 3], 1e-14));

        let cyc = RateMatrix::from_abcdef([1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let rep = classify_structure(&cyc).unwrap();
        assert!(!rep.symmetric && rep.doubly_stochastic && !rep.detailed_balance);

        let rep = classify_structure(&rates2(2.0, 1.0)).unwrap();
        assert!(rep.detailed_balance && !rep.doubly_stochastic && !rep.symmetric);
    }

    #[test]
    fn structure_propagates_reducibility() {
        let w = RateMatrix::from_abcdef([1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(classify_structure(&w), Err(Error::NonUniqueStationary(2))));
    }
}
