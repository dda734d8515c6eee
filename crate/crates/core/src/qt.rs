//! Quasithermodynamic decomposition of a master equation.
//!
//! Given a generator `G`, find a symmetric entropy matrix `Σ` and an
//! antisymmetric `K` with `K·1 = 0` such that
//!
//! ```text
//! G = (n·P + K)·Σ,   P = I − J/n
//! ```
//!
//! so that `dp/dt = (n·P + K)·∇S` with `S(p) = ½ pᵀΣp`. The symmetric part
//! `n·P` makes `S` nondecreasing; `K` redistributes probability without
//! producing entropy; `1ᵀ(n·P + K) = 0` conserves `H = Σ p_i`.
//!
//! For three states `K = r·R` with `R = [[0,1,−1],[−1,0,1],[1,−1,0]]` and
//! `r = ω/ξ`, `ω = (a+d+e) − (b+c+f)`, `ξ = a+b+c+d+e+f`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{antisymmetric_basis, complement_basis, flatten, lstsq};
use crate::model::{projector, Generator, QtDecomposition, QuadraticEntropy, RateMatrix};

/// Residual below which a numeric decomposition is accepted, relative to
/// `max(1, ‖G‖_F)`.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
/// Linear systems with a larger condition number are reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

const MAX_NEWTON_ITERATIONS: usize = 50;
const MAX_ALTERNATING_ITERATIONS: usize = 500;

/// The 3-state rotation generator `[[0,1,−1],[−1,0,1],[1,−1,0]]`.
pub fn rotation3() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0])
}

/// Free parameters of the representation: a gauge-fixed symmetric `Σ` plus
/// an antisymmetric `K` vanishing on the all-ones vector.
pub fn unknown_count(n: usize) -> usize {
    (n * (n + 1) / 2 - 1) + (n - 1) * (n.saturating_sub(2)) / 2
}

/// Independent rates of an `n`-state master equation.
pub fn rate_parameter_count(n: usize) -> usize {
    n * (n - 1)
}

/// `(n·P + K)·Σ·p`.
pub fn qt_vector_field(qt: &QtDecomposition, p: &[f64]) -> Result<DVector<f64>> {
    if p.len() != qt.n() {
        return Err(Error::DimensionMismatch { expected: qt.n(), got: p.len() });
    }
    let grad = qt.entropy.gradient(&DVector::from_column_slice(p));
    Ok(qt.operator() * grad)
}

/// Rate of change of `S` at `p`: `∇Sᵀ(n·P + K)∇S`, which equals `n·∇SᵀP∇S ≥ 0`.
pub fn entropy_production(qt: &QtDecomposition, p: &[f64]) -> Result<f64> {
    let grad = qt.entropy.gradient(&DVector::from_column_slice(p));
    let field = qt_vector_field(qt, p)?;
    Ok(grad.dot(&field))
}

/// `‖(n·P + K)Σ − G‖_F`.
pub fn reconstruction_residual(qt: &QtDecomposition, g: &Generator) -> Result<f64> {
    if qt.n() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), got: qt.n() });
    }
    Ok((qt.operator() * qt.sigma() - g.matrix()).norm())
}

fn finish(sigma: DMatrix<f64>, k: DMatrix<f64>, g: &Generator) -> Result<QtDecomposition> {
    let n = g.n();
    let r = (n == 3).then(|| k[(0, 1)]);
    let mut qt = QtDecomposition { entropy: QuadraticEntropy::canonical(sigma)?, k, r, residual: 0.0 };
    qt.residual = reconstruction_residual(&qt, g)?;
    Ok(qt)
}

fn zero_decomposition(n: usize) -> Result<QtDecomposition> {
    Ok(QtDecomposition {
        entropy: QuadraticEntropy::new(DMatrix::zeros(n, n))?,
        k: DMatrix::zeros(n, n),
        r: (n == 3).then_some(0.0),
        residual: 0.0,
    })
}

/// Two states: `Σ = diag(−W21, −W12)`, `K = 0`.
pub fn decompose_2state(w: &RateMatrix) -> Result<QtDecomposition> {
    if w.n() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: w.n() });
    }
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![-w.rate(1, 0), -w.rate(0, 1)]));
    finish(sigma, DMatrix::zeros(2, 2), &Generator::from_rates(w))
}

/// Entropy coefficients of a 3-state decomposition in the `γ = 0` gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeStateCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
}

impl ThreeStateCoefficients {
    pub fn from_decomposition(qt: &QtDecomposition) -> Option<Self> {
        let s = qt.sigma();
        Some(Self {
            a: s[(0, 0)],
            b: s[(1, 1)],
            c: s[(2, 2)],
            alpha: s[(0, 1)],
            beta: s[(0, 2)],
            r: qt.r?,
        })
    }
}

/// `(b+c+f)/(a+d+e)`; `r = (1−κ)/(1+κ)`.
pub fn kappa(w: &RateMatrix) -> Option<f64> {
    let [a, b, c, d, e, f] = w.abcdef()?;
    Some((b + c + f) / (a + d + e))
}

/// Closed forms of `α, β, B, C` given `r` (β with the `f` rate, which is
/// what direct elimination gives).
pub fn closed_form_coefficients(w: &RateMatrix, r: f64) -> Option<(f64, f64, f64, f64)> {
    let [_, _, c, d, e, f] = w.abcdef()?;
    let den = 3.0 + r * r;
    let alpha = ((1.0 + r) * c - (1.0 - r) * d) / den;
    let beta = ((1.0 - r) * e - (1.0 + r) * f) / den;
    let big_b = (-2.0 * d - (1.0 - r) * c) / den;
    let big_c = (-2.0 * f - (1.0 + r) * e) / den;
    Some((alpha, beta, big_b, big_c))
}

/// Three states: `r = ω/ξ` in closed form, then the entropy coefficients
/// by [`fit_entropy_3state`]. All-zero rates give `Σ = 0, r = 0` with a
/// warning.
pub fn decompose_3state(w: &RateMatrix) -> Result<QtDecomposition> {
    let [a, b, c, d, e, f] = w.abcdef().ok_or(Error::DimensionMismatch { expected: 3, got: w.n() })?;
    let xi = a + b + c + d + e + f;
    if xi == 0.0 {
        log::warn!("all rates are zero; returning the trivial decomposition");
        return zero_decomposition(3);
    }
    let omega = (a + d + e) - (b + c + f);
    fit_entropy_3state(w, omega / xi)
}

/// For a given `r`, the five entropy coefficients `(A, B, C, α, β)` that
/// best match the nine component equations, in the least squares sense.
/// The residual is zero only for the right `r`.
pub fn fit_entropy_3state(w: &RateMatrix, r: f64) -> Result<QtDecomposition> {
    if w.n() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: w.n() });
    }
    let k = (rotation3() * r).map(|x| x + 0.0);
    let op = projector(3) * 3.0 + &k;
    let g = Generator::from_rates(w);

    // Σ basis in the γ = 0 gauge: A, B, C, α, β
    let slots = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2)];
    let mut design = DMatrix::zeros(9, slots.len());
    for (col, &(i, j)) in slots.iter().enumerate() {
        let mut unit = DMatrix::zeros(3, 3);
        unit[(i, j)] = 1.0;
        unit[(j, i)] = 1.0;
        design.set_column(col, &flatten(&(&op * unit)));
    }
    let (x, cond) = lstsq(&design, &flatten(g.matrix()));
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SolveFailed(cond));
    }
    let mut sigma = DMatrix::zeros(3, 3);
    for (&(i, j), &v) in slots.iter().zip(x.iter()) {
        sigma[(i, j)] = v;
        sigma[(j, i)] = v;
    }
    let mut qt = finish(sigma, k, &g)?;
    qt.r = Some(r);
    Ok(qt)
}

/// Parametrization of `(Σ, K)` used by the iterative solvers: the upper
/// triangle of `Σ` minus the gauge entry, then the coefficients of `K` in
/// the antisymmetric basis.
struct Unknowns {
    n: usize,
    sigma_slots: Vec<(usize, usize)>,
    k_basis: Vec<DMatrix<f64>>,
    np: DMatrix<f64>,
}

impl Unknowns {
    fn new(n: usize) -> Self {
        let mut sigma_slots = Vec::new();
        for i in 0..n {
            for j in i..n {
                if (i, j) != (n - 2, n - 1) {
                    sigma_slots.push((i, j));
                }
            }
        }
        Self { n, sigma_slots, k_basis: antisymmetric_basis(n), np: projector(n) * n as f64 }
    }

    fn unit(&self, (i, j): (usize, usize)) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.n, self.n);
        u[(i, j)] = 1.0;
        u[(j, i)] = 1.0;
        u
    }

    fn sigma_from(&self, x: &[f64]) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &v) in self.sigma_slots.iter().zip(x) {
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
        s
    }

    fn sigma_params(&self, s: &DMatrix<f64>) -> Vec<f64> {
        self.sigma_slots.iter().map(|&ij| s[ij]).collect()
    }

    fn k_from(&self, c: &[f64]) -> DMatrix<f64> {
        self.k_basis
            .iter()
            .zip(c)
            .fold(DMatrix::zeros(self.n, self.n), |acc, (b, &x)| acc + b * x)
    }

    /// Coefficients of an admissible `K` (the basis is orthogonal with
    /// squared Frobenius norm 2 per element).
    fn k_params(&self, k: &DMatrix<f64>) -> Vec<f64> {
        self.k_basis.iter().map(|b| b.dot(k) / 2.0).collect()
    }

    fn operator(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.np + k
    }

    /// Σ minimizing the residual for a fixed `K`.
    fn solve_sigma(&self, k: &DMatrix<f64>, g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
        let op = self.operator(k);
        let mut design = DMatrix::zeros(self.n * self.n, self.sigma_slots.len());
        for (col, &ij) in self.sigma_slots.iter().enumerate() {
            design.set_column(col, &flatten(&(&op * self.unit(ij))));
        }
        let (x, cond) = lstsq(&design, &flatten(g));
        (self.sigma_from(x.as_slice()), cond)
    }

    /// `K` minimizing the residual for a fixed Σ.
    fn solve_k(&self, sigma: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
        if self.k_basis.is_empty() {
            return DMatrix::zeros(self.n, self.n);
        }
        let mut design = DMatrix::zeros(self.n * self.n, self.k_basis.len());
        for (col, b) in self.k_basis.iter().enumerate() {
            design.set_column(col, &flatten(&(b * sigma)));
        }
        let rhs = flatten(&(g - &self.np * sigma));
        let (c, _) = lstsq(&design, &rhs);
        self.k_from(c.as_slice())
    }

    fn residual(&self, sigma: &DMatrix<f64>, k: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
        (self.operator(k) * sigma - g).norm()
    }

    /// Damped Gauss–Newton on the joint bilinear residual.
    fn polish(&self, sigma: DMatrix<f64>, k: DMatrix<f64>, g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, usize) {
        let ns = self.sigma_slots.len();
        let mut x: Vec<f64> = self.sigma_params(&sigma);
        x.extend(self.k_params(&k));
        let mut sigma = self.sigma_from(&x[..ns]);
        let mut k = self.k_from(&x[ns..]);
        let mut res = self.residual(&sigma, &k, g);
        let floor = 1e-15 * g.norm().max(1.0);
        let mut iterations = 0;
        while iterations < MAX_NEWTON_ITERATIONS && res > floor {
            iterations += 1;
            let op = self.operator(&k);
            let mut jac = DMatrix::zeros(self.n * self.n, x.len());
            for (col, &ij) in self.sigma_slots.iter().enumerate() {
                jac.set_column(col, &flatten(&(&op * self.unit(ij))));
            }
            for (col, b) in self.k_basis.iter().enumerate() {
                jac.set_column(ns + col, &flatten(&(b * &sigma)));
            }
            let f = flatten(&(&op * &sigma - g));
            let (step, _) = lstsq(&jac, &(-f));
            let mut scale = 1.0;
            let mut improved = false;
            while scale > 1e-6 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
                let ts = self.sigma_from(&trial[..ns]);
                let tk = self.k_from(&trial[ns..]);
                let tr = self.residual(&ts, &tk, g);
                if tr < res {
                    x = trial;
                    sigma = ts;
                    k = tk;
                    res = tr;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (sigma, k, iterations)
    }

    /// Alternate the two linear solves starting from `K = 0`.
    fn alternate(&self, g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, usize) {
        let mut k = DMatrix::zeros(self.n, self.n);
        let (mut sigma, _) = self.solve_sigma(&k, g);
        let mut res = self.residual(&sigma, &k, g);
        let mut it = 0;
        while it < MAX_ALTERNATING_ITERATIONS {
            it += 1;
            k = self.solve_k(&sigma, g);
            sigma = self.solve_sigma(&k, g).0;
            let next = self.residual(&sigma, &k, g);
            if next >= res * (1.0 - 1e-12) {
                break;
            }
            res = next;
        }
        (sigma, k, it)
    }
}

/// Linear reduction on the complement of the all-ones vector.
///
/// With an orthonormal basis `Q` of `1⊥`, write `g = QᵀGQ`, `h = QᵀG·1/√n`
/// and `K = Q·k·Qᵀ`. Then `(n·I + k)·s = g` must have a symmetric solution
/// `s`, which holds exactly when `k·gᵀ + g·k = n·(g − gᵀ)`: a linear system
/// for the antisymmetric `k`. The rest of Σ follows from `(n·I + k)·σ₁ = h`.
/// Returns `None` when the system for `k` is singular.
fn reduce_on_complement(g: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    let m = n - 1;
    let q = complement_basis(n);
    let gq = q.transpose() * g * &q;
    let e = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let h = q.transpose() * g * &e;

    let mut k_small = DMatrix::zeros(m, m);
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
    if !pairs.is_empty() {
        let mut design = DMatrix::zeros(m * m, pairs.len());
        for (col, &(a, b)) in pairs.iter().enumerate() {
            let mut unit = DMatrix::zeros(m, m);
            unit[(a, b)] = 1.0;
            unit[(b, a)] = -1.0;
            design.set_column(col, &flatten(&(&unit * gq.transpose() + &gq * &unit)));
        }
        let rhs = flatten(&((&gq - gq.transpose()) * n as f64));
        let (c, cond) = lstsq(&design, &rhs);
        if !(cond <= MAX_CONDITION) {
            return None;
        }
        for (&(a, b), &v) in pairs.iter().zip(c.iter()) {
            k_small[(a, b)] = v;
            k_small[(b, a)] = -v;
        }
    }
    let lu = (DMatrix::identity(m, m) * n as f64 + &k_small).lu();
    let s = lu.solve(&gq)?;
    let s = (&s + s.transpose()) * 0.5;
    let sigma1 = lu.solve(&h)?;
    let cross = &q * &sigma1 * e.transpose();
    let sigma = &q * s * q.transpose() + &cross + cross.transpose();
    let k = &q * k_small * q.transpose();
    Some((sigma, k))
}

/// General `N`: solve `(N·P + K)·Σ = G` numerically.
///
/// The linear reduction gives the starting point, damped Gauss–Newton
/// polishes it; when the reduction is singular (reducible chains) the
/// solver alternates linear solves for Σ and `K` from `K = 0` instead. The
/// result is accepted only if the residual is below [`ACCEPT_RESIDUAL`].
pub fn decompose_nstate(w: &RateMatrix) -> Result<QtDecomposition> {
    let n = w.n();
    assert_eq!(
        unknown_count(n),
        rate_parameter_count(n),
        "unknowns must match the rate parameters"
    );
    let g = Generator::from_rates(w);
    let gm = g.matrix();
    let unknowns = Unknowns::new(n);
    let (start, mut iterations) = match reduce_on_complement(gm) {
        Some(sk) => (sk, 0),
        None => {
            let (s, k, it) = unknowns.alternate(gm);
            ((s, k), it)
        }
    };
    let sigma = QuadraticEntropy::canonical(start.0)?.matrix().clone();
    let (sigma, k, newton) = unknowns.polish(sigma, start.1, gm);
    iterations += newton;
    let qt = finish(sigma, k, &g)?;
    if qt.residual > ACCEPT_RESIDUAL * gm.norm().max(1.0) {
        return Err(Error::NoConvergence { residual: qt.residual, iterations });
    }
    Ok(qt)
}

/// Closed form for `n ≤ 3`, [`decompose_nstate`] otherwise.
pub fn decompose(w: &RateMatrix) -> Result<QtDecomposition> {
    match w.n() {
        2 => decompose_2state(w),
        3 => decompose_3state(w),
        _ => decompose_nstate(w),
    }
}
