//! Three-state learning model with arousal-dependent rates.
//!
//! States: 1 untrained, 2 partially trained (habit), 3 well trained. Arousal
//! `k` scales the primary-learning rate `a = a1·k` and the habit-loss rate
//! `f = f1·k`; secondary learning `d` and forgetting `e` do not depend on it.
//! The stationary well-trained probability
//!
//! ```text
//! ρ₃⁰(k) = a1·d·k / (d·e + a1·(d+e)·k + a1·f1·k²)
//! ```
//!
//! is an inverted U in `k` with its peak at `k_opt = √(d·e / (a1·f1))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ProbabilityVector, RateMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YdParams {
    a1: f64,
    f1: f64,
    d: f64,
    e: f64,
}

impl YdParams {
    pub fn new(a1: f64, f1: f64, d: f64, e: f64) -> Result<Self> {
        for (name, v) in [("a1", a1), ("f1", f1), ("d", d), ("e", e)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::DomainError(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(Self { a1, f1, d, e })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn f1(&self) -> f64 {
        self.f1
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn e(&self) -> f64 {
        self.e
    }
}

fn check_arousal(k: f64) -> Result<()> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::DomainError(format!("arousal must be finite and nonnegative, got {k}")));
    }
    Ok(())
}

/// `(a, b, c, d, e, f) = (a1·k, 0, 0, d, e, f1·k)`.
pub fn yd_rates(params: &YdParams, k: f64) -> Result<RateMatrix> {
    check_arousal(k)?;
    RateMatrix::from_abcdef([params.a1 * k, 0.0, 0.0, params.d, params.e, params.f1 * k])
}

/// Unnormalized stationary weights and their sum.
fn weights(params: &YdParams, k: f64) -> ([f64; 3], f64) {
    let YdParams { d, e, .. } = *params;
    let a = params.a1 * k;
    let f = params.f1 * k;
    let w = [d * e, a * (e + f), a * d];
    (w, d * e + a * (d + e + f))
}

pub fn yd_stationary(params: &YdParams, k: f64) -> Result<ProbabilityVector> {
    check_arousal(k)?;
    let (w, denom) = weights(params, k);
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    ProbabilityVector::new(w.iter().map(|x| x / denom).collect())
}

/// Stationary probabilities sampled over arousal.
#[derive(Debug, Clone, PartialEq)]
pub struct YdCurve {
    pub k_grid: Vec<f64>,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub rho3: Vec<f64>,
}

/// `ρ₃⁰(k)` from the closed form.
pub fn rho3(params: &YdParams, k: f64) -> Result<f64> {
    let YdParams { a1, f1, d, e } = *params;
    let denom = d * e + a1 * (d + e) * k + a1 * f1 * k * k;
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    Ok(a1 * d * k / denom)
}

pub fn yd_curve(params: &YdParams, k_min: f64, k_max: f64, steps: usize) -> Result<YdCurve> {
    if !(k_min >= 0.0 && k_min < k_max && k_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 ≤ k_min < k_max, got [{k_min}, {k_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument("curve needs at least 2 points".into()));
    }
    let last = steps - 1;
    let k_grid: Vec<f64> = (0..steps)
        .map(|i| if i == last { k_max } else { k_min + (k_max - k_min) * i as f64 / last as f64 })
        .collect();
    let mut curve = YdCurve {
        rho1: Vec::with_capacity(steps),
        rho2: Vec::with_capacity(steps),
        rho3: Vec::with_capacity(steps),
        k_grid,
    };
    for &k in &curve.k_grid {
        let (w, denom) = weights(params, k);
        if !(denom > 0.0) {
            return Err(Error::DegenerateDenominator);
        }
        curve.rho1.push(w[0] / denom);
        curve.rho2.push(w[1] / denom);
        curve.rho3.push(rho3(params, k)?);
    }
    Ok(curve)
}

/// `k_opt = √(d·e / (a1·f1))`.
pub fn yd_optimal_arousal(params: &YdParams) -> Result<f64> {
    let prod = params.a1 * params.f1;
    if prod == 0.0 {
        return Err(Error::ZeroRateProduct);
    }
    Ok((params.d * params.e / prod).sqrt())
}

/// Both sides of the balance condition `(d+e)/√(de) = (f1−a1)/√(f1·a1)`,
/// under which the arousal-optimal rates satisfy `a+d+e = b+c+f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub omega_at_kopt: f64,
}

/// Relative tolerance for `lhs = rhs` and for the `ω(k_opt) = 0` cross-check.
pub const CONSISTENCY_TOL: f64 = 1e-9;

pub fn yd_consistency(params: &YdParams) -> Result<ConsistencyReport> {
    let YdParams { a1, f1, d, e } = *params;
    if !(d * e > 0.0) {
        return Err(Error::DomainError("consistency needs d·e > 0".into()));
    }
    if !(a1 * f1 > 0.0) {
        return Err(Error::DomainError("consistency needs a1·f1 > 0".into()));
    }
    let lhs = (d + e) / (d * e).sqrt();
    let rhs = (f1 - a1) / (f1 * a1).sqrt();
    let satisfied = (lhs - rhs).abs() <= CONSISTENCY_TOL * lhs.abs().max(1.0);
    let k_opt = yd_optimal_arousal(params)?;
    let omega_at_kopt = (a1 * k_opt + d + e) - f1 * k_opt;
    // ω(k_opt) = √(de)·(lhs − rhs)
    let omega_zero = omega_at_kopt.abs() <= CONSISTENCY_TOL * (d + e).max(1.0);
    if omega_zero != satisfied {
        return Err(Error::DomainError(format!(
            "ω(k_opt) = {omega_at_kopt:e} disagrees with lhs − rhs = {:e}",
            lhs - rhs
        )));
    }
    Ok(ConsistencyReport { lhs, rhs, satisfied, omega_at_kopt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a1: f64, f1: f64, d: f64, e: f64) -> YdParams {
        YdParams::new(a1, f1, d, e).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rates_substitution() {
        let w = yd_rates(&params(1.0, 1.0, 1.0, 1.0), 1.0).unwrap();
        assert_eq!(w.abcdef(), Some([1.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
        let w = yd_rates(&params(1.0, 1.0, 2.0, 3.0), 1.0).unwrap();
        assert_eq!(w.abcdef(), Some([1.0, 0.0, 0.0, 2.0, 3.0, 1.0]));
        let w = yd_rates(&params(1.5, 2.0, 2.0, 3.0), 0.0).unwrap();
        assert_eq!(w.abcdef(), Some([0.0, 0.0, 0.0, 2.0, 3.0, 0.0]));
        assert!(yd_rates(&params(1.0, 1.0, 1.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn stationary_examples() {
        let p = yd_stationary(&params(1.0, 1.0, 2.0, 3.0), 1.0).unwrap();
        for (x, y) in p.as_slice().iter().zip([0.5, 1.0 / 3.0, 1.0 / 6.0]) {
            assert!(close(*x, y, 1e-15));
        }
        let p = yd_stationary(&params(1.0, 1.0, 1.0, 1.0), 1.0).unwrap();
        assert_eq!(p.as_slice(), &[0.25, 0.5, 0.25]);
        let p = yd_stationary(&params(1.0, 1.0, 1.0, 2.0), 0.0).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_denominator() {
        assert_eq!(yd_stationary(&params(1.0, 1.0, 1.0, 0.0), 0.0), Err(Error::DegenerateDenominator));
        assert_eq!(yd_curve(&params(1.0, 1.0, 0.0, 1.0), 0.0, 1.0, 3), Err(Error::DegenerateDenominator));
    }

    #[test]
    fn curve_values() {
        let p = params(1.0, 1.0, 1.0, 1.0);
        let curve = yd_curve(&p, 0.0, 4.0, 5).unwrap();
        assert_eq!(curve.k_grid, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(curve.rho3[0], 0.0);
        assert!(close(curve.rho3[1], 0.25, 1e-15));
        assert!(close(curve.rho3[4], 0.16, 1e-15));
        for i in 0..5 {
            assert!(close(curve.rho1[i] + curve.rho2[i] + curve.rho3[i], 1.0, 1e-12));
        }
        assert!(yd_curve(&p, 1.0, 1.0, 5).is_err());
        assert!(yd_curve(&p, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn optimal_arousal_examples() {
        assert_eq!(yd_optimal_arousal(&params(1.0, 1.0, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(yd_optimal_arousal(&params(1.0, 1.0, 4.0, 1.0)).unwrap(), 2.0);
        let s = 3.0 + 2.0 * 2f64.sqrt();
        let k = yd_optimal_arousal(&params(1.0, s, 1.0, 1.0)).unwrap();
        assert!(close(k, 2f64.sqrt() - 1.0, 1e-15));
        assert_eq!(yd_optimal_arousal(&params(0.0, 1.0, 1.0, 1.0)), Err(Error::ZeroRateProduct));
    }

    #[test]
    fn consistency_examples() {
        let s = 3.0 + 2.0 * 2f64.sqrt();
        let rep = yd_consistency(&params(1.0, s, 1.0, 1.0)).unwrap();
        assert!(close(rep.lhs, 2.0, 1e-12) && close(rep.rhs, 2.0, 1e-12));
        assert!(rep.satisfied);
        assert!(rep.omega_at_kopt.abs() < 1e-9);

        let rep = yd_consistency(&params(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.satisfied), (2.0, 0.0, false));

        assert!(matches!(yd_consistency(&params(1.0, 1.0, 0.0, 1.0)), Err(Error::DomainError(_))));
        assert!(matches!(yd_consistency(&params(0.0, 1.0, 1.0, 1.0)), Err(Error::DomainError(_))));
    }

    #[test]
    fn negative_parameters_rejected() {
        assert!(YdParams::new(-1.0, 1.0, 1.0, 1.0).is_err());
        assert!(YdParams::new(1.0, f64::NAN, 1.0, 1.0).is_err());
    }
}
