//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which a singular value counts as zero.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Minimum-norm least squares solution of `a·x = b` and the condition number
/// of `a` over its numerically nonzero singular values.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = RANK_TOL * smax.max(f64::MIN_POSITIVE);
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let x = svd
        .solve(b, cutoff)
        .expect("svd computed with both U and V");
    (x, cond)
}

/// Number of singular values below `RANK_TOL·σ_max` (all of them for a zero matrix).
pub(crate) fn null_dim(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return a.ncols();
    }
    let short = a.ncols().saturating_sub(sv.len());
    short + sv.iter().filter(|&&s| s <= RANK_TOL * smax).count()
}

/// Orthonormal basis of the complement of the all-ones vector (Helmert
/// basis), as the columns of an `n × (n−1)` matrix.
pub(crate) fn complement_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n - 1);
    for col in 0..n - 1 {
        let k = (col + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        for row in 0..=col {
            q[(row, col)] = 1.0 / norm;
        }
        q[(col + 1, col)] = -k / norm;
    }
    q
}

/// Basis `q_α q_βᵀ − q_β q_αᵀ` (α < β) of antisymmetric matrices that
/// annihilate the all-ones vector from both sides.
pub(crate) fn antisymmetric_basis(n: usize) -> Vec<DMatrix<f64>> {
    let q = complement_basis(n);
    let mut out = Vec::new();
    for a in 0..n - 1 {
        for b in a + 1..n - 1 {
            let qa = q.column(a);
            let qb = q.column(b);
            out.push(qa * qb.transpose() - qb * qa.transpose());
        }
    }
    out
}

pub(crate) fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.len(), m.iter().copied())
}
