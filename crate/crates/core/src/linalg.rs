//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `m x = b`, returning `None` for (numerically) singular systems.
pub(crate) fn solve(m: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = m.lu();
    let x = lu.solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Orthonormal basis of the orthogonal complement of the unit vector `d`.
pub(crate) fn complement_basis(d: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = d.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n.saturating_sub(1));
    let mut candidates: Vec<usize> = (0..n).collect();
    // start from the axes least aligned with d
    candidates.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    for i in candidates {
        if basis.len() + 1 == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        e -= d * d.dot(&e);
        for b in &basis {
            e -= b * b.dot(&e);
        }
        let len = e.norm();
        if len > 1e-8 {
            basis.push(e / len);
        }
    }
    basis
}
