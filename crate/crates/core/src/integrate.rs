//! Time evolution of master equations, with conservation and entropy monitors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Generator, ProbabilityVector, QtDecomposition};
use crate::pme;

/// Eigenvector matrices with a larger condition number are treated as defective.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e12;
/// Default relative threshold of [`extrema_count`].
pub const DEFAULT_EXTREMA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Spectral solution `p(t) = Σ c_j e^{λ_j t} v_j`.
    Exact,
    /// Fixed-step classical Runge–Kutta.
    Rk4,
}

/// Transient part of an exact solution, stored with its slowest decay
/// factored out: `p(t) = p_static + e^{−decay_rate·t}·scaled(t)`.
///
/// Keeps the deviation from the stationary state at full relative precision
/// long after it has dropped below the resolution of `p(t)` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledTransient {
    pub decay_rate: f64,
    pub scaled: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Raw states; the sum is never renormalized, see [`Trajectory::max_sum_drift`].
    pub states: Vec<Vec<f64>>,
    pub method: Method,
    /// Present for [`Method::Exact`].
    pub transient: Option<ScaledTransient>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// `max_t |Σ p(t) − 1|`.
    pub fn max_sum_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least two points")
    }
}

/// Eigenpairs of a generator with the coefficients of one initial state.
#[derive(Debug, Clone)]
pub struct ModalSolution {
    pub values: Vec<Complex64>,
    /// Eigenvectors as columns.
    pub vectors: DMatrix<Complex64>,
    pub coefficients: DVector<Complex64>,
    pub null_dim: usize,
}

impl ModalSolution {
    pub fn new(g: &Generator, p0: &DVector<f64>) -> Result<Self> {
        let n = g.n();
        let m = g.matrix();
        let values = pme::eigenvalues(m);
        let scale = m.amax().max(1.0);
        let cluster_tol = 1e-8 * scale;
        let mc: DMatrix<Complex64> = m.map(|x| Complex64::new(x, 0.0));

        let mut vectors = DMatrix::<Complex64>::zeros(n, n);
        let mut assigned = vec![false; n];
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let members: Vec<usize> = (i..n)
                .filter(|&j| !assigned[j] && (values[j] - values[i]).norm() <= cluster_tol)
                .collect();
            let mean = members.iter().map(|&j| values[j]).sum::<Complex64>() / members.len() as f64;
            let shifted = &mc - DMatrix::<Complex64>::identity(n, n) * mean;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.expect("right singular vectors requested");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
            for (slot, &j) in members.iter().enumerate() {
                let v = v_t.row(order[slot]).adjoint();
                let r = (&mc * &v - &v * values[j]).norm();
                if r > 1e-7 * scale {
                    return Err(Error::DefectiveGenerator(f64::INFINITY));
                }
                vectors.set_column(j, &v);
                assigned[j] = true;
            }
        }

        let sv = vectors.clone().singular_values();
        let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
        if !(cond <= MAX_EIGENVECTOR_CONDITION) {
            return Err(Error::DefectiveGenerator(cond));
        }
        let rhs: DVector<Complex64> = p0.map(|x| Complex64::new(x, 0.0));
        let coefficients = vectors
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::DefectiveGenerator(cond))?;
        Ok(Self { values, vectors, coefficients, null_dim: pme::null_dim(g) })
    }

    /// Indices of the structural zero modes (the `null_dim` smallest |λ|).
    fn zero_modes(&self) -> Vec<bool> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].norm().total_cmp(&self.values[b].norm()));
        let mut zero = vec![false; self.values.len()];
        for &i in order.iter().take(self.null_dim.max(1)) {
            zero[i] = true;
        }
        zero
    }

    /// `Re Σ_j c_j e^{(λ_j + shift) t} v_j` over the selected modes.
    fn combine(&self, t: f64, shift: f64, select: impl Fn(usize) -> bool) -> Vec<f64> {
        let n = self.vectors.nrows();
        let mut out = vec![0.0; n];
        for j in (0..self.values.len()).filter(|&j| select(j)) {
            let weight = self.coefficients[j] * ((self.values[j] + shift) * t).exp();
            for (i, o) in out.iter_mut().enumerate() {
                *o += (weight * self.vectors[(i, j)]).re;
            }
        }
        out
    }

    pub fn state_at(&self, t: f64) -> Vec<f64> {
        self.combine(t, 0.0, |_| true)
    }
}

fn check_inputs(g: &Generator, p0: &ProbabilityVector, t_end: f64, steps: usize) -> Result<()> {
    if p0.n() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), got: p0.n() });
    }
    if steps < 1 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be positive and finite, got {t_end}")));
    }
    Ok(())
}

/// Evolve `p0` over `[0, t_end]` sampled at `steps + 1` uniform points.
pub fn integrate(
    g: &Generator,
    p0: &ProbabilityVector,
    t_end: f64,
    steps: usize,
    method: Method,
) -> Result<Trajectory> {
    check_inputs(g, p0, t_end, steps)?;
    let dt = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| if k == steps { t_end } else { k as f64 * dt }).collect();
    match method {
        Method::Exact => integrate_exact(g, p0, times),
        Method::Rk4 => Ok(integrate_rk4(g, p0, times, dt)),
    }
}

fn integrate_exact(g: &Generator, p0: &ProbabilityVector, times: Vec<f64>) -> Result<Trajectory> {
    let modes = ModalSolution::new(g, p0.as_vector())?;
    let zero = modes.zero_modes();
    let decay_rate = (0..zero.len())
        .filter(|&j| !zero[j])
        .map(|j| -modes.values[j].re)
        .fold(f64::INFINITY, f64::min);
    let decay_rate = if decay_rate.is_finite() { decay_rate.max(0.0) } else { 0.0 };

    let fixed = modes.combine(0.0, 0.0, |j| zero[j]);
    let mut states = Vec::with_capacity(times.len());
    let mut scaled = Vec::with_capacity(times.len());
    for &t in &times {
        let s = modes.combine(t, decay_rate, |j| !zero[j]);
        let damp = (-decay_rate * t).exp();
        states.push(fixed.iter().zip(&s).map(|(a, b)| a + damp * b).collect());
        scaled.push(s);
    }
    // the modal sum reproduces p0 only to rounding; report it exactly
    states[0] = p0.to_vec();
    Ok(Trajectory {
        times,
        states,
        method: Method::Exact,
        transient: Some(ScaledTransient { decay_rate, scaled }),
    })
}

fn integrate_rk4(g: &Generator, p0: &ProbabilityVector, times: Vec<f64>, dt: f64) -> Trajectory {
    let m = g.matrix();
    let mut p = p0.as_vector().clone();
    let mut states = Vec::with_capacity(times.len());
    states.push(p.iter().copied().collect());
    for _ in 1..times.len() {
        let k1 = m * &p;
        let k2 = m * (&p + &k1 * (dt / 2.0));
        let k3 = m * (&p + &k2 * (dt / 2.0));
        let k4 = m * (&p + &k3 * dt);
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        states.push(p.iter().copied().collect());
    }
    Trajectory { times, states, method: Method::Rk4, transient: None }
}

/// Conserved quantity and entropies along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSeries {
    /// `H = Σ p_i`.
    pub h_vals: Vec<f64>,
    /// `½ pᵀΣp`, when a decomposition is supplied.
    pub s_vals: Option<Vec<f64>>,
    /// `−Σ p_i ln p_i` with `0·ln 0 = 0`.
    pub s_bs_vals: Vec<f64>,
}

pub fn boltzmann_shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum::<f64>() + 0.0
}

pub fn monitor(traj: &Trajectory, qt: Option<&QtDecomposition>) -> Result<MonitorSeries> {
    if let Some(qt) = qt {
        if qt.n() != traj.n() {
            return Err(Error::DimensionMismatch { expected: traj.n(), got: qt.n() });
        }
    }
    let h_vals = traj.states.iter().map(|s| s.iter().sum()).collect();
    let s_vals = qt.map(|qt| {
        traj.states
            .iter()
            .map(|s| qt.entropy.value(&DVector::from_column_slice(s)))
            .collect()
    });
    let s_bs_vals = traj.states.iter().map(|s| boltzmann_shannon(s)).collect();
    Ok(MonitorSeries { h_vals, s_vals, s_bs_vals })
}

/// Largest single-step decrease of a series (0 when nondecreasing).
pub fn max_decrease(series: &[f64]) -> f64 {
    series.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

fn count_sign_changes(diffs: impl Iterator<Item = f64>, threshold: f64) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for d in diffs.filter(|d| d.abs() > threshold) {
        if last != 0.0 && d.signum() != last.signum() {
            changes += 1;
        }
        last = d;
    }
    changes
}

/// Number of interior extrema of one component: strict sign changes of its
/// discrete derivative, ignoring steps smaller than `tol` relative to the
/// component's magnitude (default [`DEFAULT_EXTREMA_TOL`]).
///
/// Exact trajectories are differenced through their scaled transient, so
/// the threshold is relative to the current transient envelope rather than
/// to `max |p|`.
///
/// Panics if `component` is out of range.
pub fn extrema_count(traj: &Trajectory, component: usize, tol: Option<f64>) -> usize {
    assert!(component < traj.n(), "component {component} out of range");
    if traj.len() < 3 {
        return 0;
    }
    let tol = tol.unwrap_or(DEFAULT_EXTREMA_TOL);
    match &traj.transient {
        Some(tr) => {
            let s: Vec<f64> = tr.scaled.iter().map(|row| row[component]).collect();
            let scale = s.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let diffs = (0..s.len() - 1).map(|k| {
                let dt = traj.times[k + 1] - traj.times[k];
                (-tr.decay_rate * dt).exp() * s[k + 1] - s[k]
            });
            count_sign_changes(diffs, tol * scale)
        }
        None => {
            let p = traj.component(component);
            let scale = p.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            count_sign_changes(p.windows(2).map(|w| w[1] - w[0]), tol * scale)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RateMatrix;

    fn gen2(w12: f64, w21: f64) -> Generator {
        Generator::from_rates(&RateMatrix::from_rows(&[vec![0.0, w12], vec![w21, 0.0]]).unwrap())
    }

    fn cyclic() -> Generator {
        Generator::from_rates(&RateMatrix::from_abcdef([1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap())
    }

    #[test]
    fn two_state_closed_form() {
        let g = gen2(1.0, 1.0);
        let p0 = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let expected = 0.5 + 0.5 * (-2.0f64).exp();
        for method in [Method::Exact, Method::Rk4] {
            let tr = integrate(&g, &p0, 1.0, 1000, method).unwrap();
            assert!((tr.last()[0] - expected).abs() < 1e-12, "{method:?}");
            assert_eq!(tr.len(), 1001);
            assert_eq!(*tr.times.last().unwrap(), 1.0);
        }
    }

    #[test]
    fn stationary_start_stays_put() {
        let g = gen2(2.0, 1.0);
        let p0 = ProbabilityVector::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let tr = integrate(&g, &p0, 5.0, 50, Method::Exact).unwrap();
        for s in &tr.states {
            assert!((s[0] - 2.0 / 3.0).abs() < 1e-14 && (s[1] - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cyclic_oscillation_frequency() {
        // p1(t) = 1/3 + e^{-3t/2}(2/3 cos(√3 t/2)); zero crossings of p1 − 1/3 are π/√3 apart
        let g = cyclic();
        let p0 = ProbabilityVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let tr = integrate(&g, &p0, 4.0, 400, Method::Exact).unwrap();
        let w = 3f64.sqrt() / 2.0;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let exact = 1.0 / 3.0 + (2.0 / 3.0) * (-1.5 * t).exp() * (w * t).cos();
            assert!((s[0] - exact).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn symmetric_unit_rates_handle_repeated_eigenvalue() {
        let g = Generator::from_rates(&RateMatrix::from_abcdef([1.0; 6]).unwrap());
        let p0 = ProbabilityVector::new(vec![0.6, 0.3, 0.1]).unwrap();
        let ex = integrate(&g, &p0, 2.0, 200, Method::Exact).unwrap();
        let rk = integrate(&g, &p0, 2.0, 2000, Method::Rk4).unwrap();
        for (a, b) in ex.last().iter().zip(rk.last()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn jordan_block_is_defective() {
        // a = d = 1: eigenvalue −1 twice with a single eigenvector
        let g = Generator::from_rates(&RateMatrix::from_abcdef([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap());
        let p0 = ProbabilityVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            integrate(&g, &p0, 1.0, 10, Method::Exact),
            Err(Error::DefectiveGenerator(_))
        ));
        assert!(integrate(&g, &p0, 1.0, 10, Method::Rk4).is_ok());
    }

    #[test]
    fn bad_arguments() {
        let g = gen2(1.0, 1.0);
        let p0 = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        assert!(integrate(&g, &p0, 1.0, 0, Method::Rk4).is_err());
        assert!(integrate(&g, &p0, 0.0, 10, Method::Rk4).is_err());
        let p3 = ProbabilityVector::uniform(3).unwrap();
        assert!(matches!(integrate(&g, &p3, 1.0, 10, Method::Rk4), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn monitors() {
        let g = Generator::from_rates(&RateMatrix::from_abcdef([0.5, 0.2, 0.5, 0.9, 0.2, 0.9]).unwrap());
        let p0 = ProbabilityVector::new(vec![0.9, 0.1, 0.0]).unwrap();
        let tr = integrate(&g, &p0, 10.0, 500, Method::Exact).unwrap();
        let mon = monitor(&tr, None).unwrap();
        assert!(mon.h_vals.iter().all(|h| (h - 1.0).abs() < 1e-12));
        assert!(mon.s_vals.is_none());
        assert!(max_decrease(&mon.s_bs_vals) <= 1e-12);
        // 0·ln 0 at t = 0
        assert!((mon.s_bs_vals[0] - boltzmann_shannon(&[0.9, 0.1])).abs() < 1e-15);
    }

    #[test]
    fn extrema_on_simple_series() {
        let make = |vals: Vec<f64>| Trajectory {
            times: (0..vals.len()).map(|k| k as f64).collect(),
            states: vals.iter().map(|&v| vec![v, 1.0 - v]).collect(),
            method: Method::Rk4,
            transient: None,
        };
        assert_eq!(extrema_count(&make(vec![0.9, 0.7, 0.6, 0.55, 0.52]), 0, None), 0);
        assert_eq!(extrema_count(&make(vec![0.2, 0.5, 0.4, 0.45, 0.3]), 0, None), 3);
        // ripple below the threshold is ignored
        assert_eq!(extrema_count(&make(vec![0.5, 0.4, 0.3, 0.3 + 1e-14, 0.3]), 0, None), 0);
        assert_eq!(extrema_count(&make(vec![0.5, 0.4]), 0, None), 0);
    }

    #[test]
    fn cyclic_trajectory_has_repeated_extrema() {
        let p0 = ProbabilityVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let tr = integrate(&cyclic(), &p0, 20.0, 4000, Method::Exact).unwrap();
        assert!((0..3).any(|i| extrema_count(&tr, i, None) >= 2));
    }
}
