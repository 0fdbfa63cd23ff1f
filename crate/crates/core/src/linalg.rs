//! Small dense factorizations used by the GP code.
//!
//! Matrices are `ndarray` arrays; all routines are generic over [`Scalar`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::scalar::Scalar;

/// Diagonal jitter values tried, in order, when a plain Cholesky fails.
pub const JITTER_LADDER: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Lower Cholesky factor of a symmetric matrix. `None` if a pivot is not
/// strictly positive.
pub fn cholesky<T: Scalar>(a: &ArrayView2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Cholesky with the [`JITTER_LADDER`] escalation. Returns the factor and the
/// jitter that was added to the diagonal (zero when none was needed).
pub fn cholesky_jittered<T: Scalar>(a: &ArrayView2<T>) -> Option<(Array2<T>, T)> {
    if let Some(l) = cholesky(a) {
        return Some((l, T::zero()));
    }
    let mut work = a.to_owned();
    let mut added = T::zero();
    for &jitter in JITTER_LADDER.iter() {
        let jitter = T::lit(jitter);
        for i in 0..work.nrows() {
            work[[i, i]] += jitter - added;
        }
        added = jitter;
        if let Some(l) = cholesky(&work.view()) {
            return Some((l, jitter));
        }
    }
    None
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &ArrayView2<T>, b: &ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transpose<T: Scalar>(l: &ArrayView2<T>, b: &ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `L X = B` column by column.
pub fn solve_lower_matrix<T: Scalar>(l: &ArrayView2<T>, b: &ArrayView2<T>) -> Array2<T> {
    let mut out = Array2::<T>::zeros(b.raw_dim());
    for (j, col) in b.axis_iter(Axis(1)).enumerate() {
        out.column_mut(j).assign(&solve_lower(l, &col));
    }
    out
}

/// Solves `(L Lᵀ) x = b`.
pub fn cho_solve<T: Scalar>(l: &ArrayView2<T>, b: &ArrayView1<T>) -> Array1<T> {
    let y = solve_lower(l, b);
    solve_lower_transpose(l, &y.view())
}

/// `(L Lᵀ)⁻¹` from its Cholesky factor.
pub fn cho_inverse<T: Scalar>(l: &ArrayView2<T>) -> Array2<T> {
    let n = l.nrows();
    let linv = solve_lower_matrix(l, &Array2::<T>::eye(n).view());
    linv.t().dot(&linv)
}

/// Rank-revealing factorization `A ≈ F Fᵀ` of a positive semidefinite matrix.
///
/// `factor` is `n × rank` with rows in the original order; `pivots[k]` is the
/// row whose diagonal was eliminated at step `k`, so the rows
/// `pivots[..rank]` of `factor` form a lower-triangular block.
#[derive(Debug, Clone)]
pub struct PivotedCholesky<T> {
    pub factor: Array2<T>,
    pub pivots: Vec<usize>,
    pub rank: usize,
}

impl<T: Scalar> PivotedCholesky<T> {
    /// Stops once the largest remaining diagonal is at most `tol`.
    pub fn new(a: &ArrayView2<T>, tol: T) -> Self {
        let n = a.nrows();
        let mut residual: Vec<T> = (0..n).map(|i| a[[i, i]]).collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut factor = Array2::<T>::zeros((n, n));
        let mut rank = 0;
        for k in 0..n {
            // first index wins ties so duplicated rows keep their original order
            let mut best = k;
            for i in (k + 1)..n {
                if residual[order[i]] > residual[order[best]] {
                    best = i;
                }
            }
            if !(residual[order[best]] > tol) {
                break;
            }
            order.swap(k, best);
            let p = order[k];
            let pivot = residual[p].sqrt();
            factor[[p, k]] = pivot;
            for &q in order.iter().skip(k + 1) {
                let mut s = a[[q, p]];
                for m in 0..k {
                    s -= factor[[q, m]] * factor[[p, m]];
                }
                let v = s / pivot;
                factor[[q, k]] = v;
                residual[q] -= v * v;
            }
            rank += 1;
        }
        let factor = factor.slice(ndarray::s![.., ..rank]).to_owned();
        order.truncate(rank);
        PivotedCholesky {
            factor,
            pivots: order,
            rank,
        }
    }

    /// Solves `B w = rhs[pivots]` where `B` is the leading lower-triangular
    /// block (rows `pivots`) of the factor. Returns a `rank`-vector.
    pub fn solve_leading(&self, rhs: &ArrayView1<T>) -> Array1<T> {
        let mut w = Array1::<T>::zeros(self.rank);
        for k in 0..self.rank {
            let p = self.pivots[k];
            let mut s = rhs[p];
            for m in 0..k {
                s -= self.factor[[p, m]] * w[m];
            }
            w[k] = s / self.factor[[p, k]];
        }
        w
    }
}
