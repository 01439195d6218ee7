//! Small dense linear algebra shared by the solvers.
//!
//! SVD and Cholesky factorisations come from nalgebra; per-voxel solves use
//! allocation-free routines on plain slices.

use nalgebra::DMatrix;

/// Relative threshold under which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Singular values of `m` in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Truncated-SVD Moore-Penrose pseudo-inverse. Singular values below
/// `RANK_TOL * sigma_max` are dropped, which yields the minimum-norm
/// least-squares solution for rank-deficient or wide matrices.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut pinv = DMatrix::zeros(m.ncols(), m.nrows());
    if smax == 0.0 {
        return pinv;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= RANK_TOL * smax {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..m.ncols() {
            let vik = vt[(k, i)] * inv;
            if vik == 0.0 {
                continue;
            }
            for j in 0..m.nrows() {
                pinv[(i, j)] += vik * u[(j, k)];
            }
        }
    }
    pinv
}

/// Row-major copy of a matrix.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// `out = a * x` for a row-major `rows x cols` matrix.
#[inline]
pub fn matvec(a: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &a[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (&aij, &xj) in row.iter().zip(x) {
            acc += aij * xj;
        }
        *o = acc;
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix, row-major.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Vec<f64>,
    n: usize,
}

impl CholeskyFactor {
    pub fn new(a: &DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let chol = a.clone().cholesky()?;
        Some(Self { l: row_major(&chol.l()), n })
    }

    /// Solves `L L^T x = b` in place.
    #[inline]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (l, n) = (&self.l, self.n);
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                acc -= l[i * n + k] * b[k];
            }
            b[i] = acc / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in i + 1..n {
                acc -= l[k * n + i] * b[k];
            }
            b[i] = acc / l[i * n + i];
        }
    }
}

/// Solves the dense system `a x = b` (row-major `n x n`) by Gaussian
/// elimination with partial pivoting. Returns `None` when a pivot falls
/// below `1e-13` times the largest entry of `a`.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    for i in (0..n).rev() {
        let mut acc = b[i];
        for k in i + 1..n {
            acc -= a[i * n + k] * b[k];
        }
        b[i] = acc / a[i * n + i];
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_wide_matrix_is_right_inverse() {
        let m = DMatrix::from_row_slice(2, 3, &[0.5, 0.2, 0.3, 0.5, 0.8, 0.7]);
        let p = pseudo_inverse(&m);
        let id = &m * &p;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn pinv_truncates_rank_deficiency() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let p = pseudo_inverse(&m);
        // pinv of the all-0.5 matrix is the all-0.5 matrix
        assert!((p - DMatrix::from_element(2, 2, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn cholesky_and_dense_solves_agree() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let chol = CholeskyFactor::new(&a).unwrap();
        let mut x1 = vec![1.0, 2.0, 3.0];
        chol.solve_in_place(&mut x1);
        let mut a2 = row_major(&a);
        let mut x2 = vec![1.0, 2.0, 3.0];
        solve_dense(&mut a2, &mut x2, 3).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-13);
        }
        let mut sing = vec![1.0, 2.0, 2.0, 4.0];
        assert!(solve_dense(&mut sing, &mut [1.0, 1.0], 2).is_none());
    }
}
