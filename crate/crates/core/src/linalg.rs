//! Small dense helpers for Gram matrices of tangent sets.

use crate::{lit, Real};

/// Outcome of a diagonally pivoted Cholesky factorization `PᵀGP = LLᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotedCholesky<T> {
    /// Squared diagonal of `L` in pivot order (the Schur-complement pivots).
    pub pivots: Vec<T>,
    pub order: Vec<usize>,
    /// `max pivot / min pivot`; infinite when the factorization broke down.
    pub condition: T,
}

impl<T: Real> PivotedCholesky<T> {
    /// `ln det G`, or `-∞` if a pivot was non-positive.
    pub fn log_det(&self) -> T {
        if self.pivots.iter().any(|&d| !(d > T::zero())) {
            return T::neg_infinity();
        }
        self.pivots.iter().map(|d| d.ln()).sum()
    }

    pub fn is_singular(&self, max_condition: T) -> bool {
        !(self.condition <= max_condition)
    }
}

/// Factorizes a symmetric positive semi-definite matrix, choosing the largest
/// remaining diagonal entry as pivot at every step. Stops early (leaving zero
/// pivots) once the remaining diagonal is non-positive.
pub fn pivoted_cholesky<T: Real>(g: &[Vec<T>]) -> PivotedCholesky<T> {
    let n = g.len();
    let mut a: Vec<Vec<T>> = g.to_vec();
    let mut order: Vec<usize> = (0..n).collect();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| {
                a[i][i]
                    .partial_cmp(&a[j][j])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(k);
        a.swap(k, p);
        for row in a.iter_mut() {
            row.swap(k, p);
        }
        order.swap(k, p);
        let d = a[k][k];
        if !(d > T::zero()) {
            pivots.extend(std::iter::repeat(T::zero()).take(n - k));
            break;
        }
        pivots.push(d);
        let l = d.sqrt();
        for i in k + 1..n {
            a[i][k] = a[i][k] / l;
        }
        for i in k + 1..n {
            for j in k + 1..=i {
                let v = a[i][j] - a[i][k] * a[j][k];
                a[i][j] = v;
                a[j][i] = v;
            }
        }
    }
    let max = pivots.iter().cloned().fold(T::zero(), T::max);
    let min = pivots.iter().cloned().fold(T::infinity(), T::min);
    let condition = if min > T::zero() {
        max / min
    } else {
        T::infinity()
    };
    PivotedCholesky {
        pivots,
        order,
        condition,
    }
}

/// `sqrt(det G)` of a Gram matrix, or zero once its condition number exceeds
/// `max_condition`.
pub fn gram_sqrt_det<T: Real>(g: &[Vec<T>], max_condition: T) -> T {
    if g.is_empty() {
        return T::one();
    }
    let f = pivoted_cholesky(g);
    if f.is_singular(max_condition) {
        return T::zero();
    }
    (f.log_det() * lit(0.5)).exp()
}
