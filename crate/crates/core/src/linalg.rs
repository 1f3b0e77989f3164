//! Small dense linear-algebra helpers shared by the analysis modules.
//!
//! Every rank decision goes through [`singular_cutoff`]: a singular value
//! counts as zero when it is at most `RANK_RTOL` times the largest one, and a
//! matrix whose largest singular value is negligible against the supplied
//! reference scale is treated as the zero matrix.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for rank and null-space decisions.
pub const RANK_RTOL: f64 = 1e-10;

/// Below `ZERO_RTOL * scale` the whole matrix is considered zero.
const ZERO_RTOL: f64 = 1e-14;

pub fn padded(m: &DMatrix<f64>) -> DMatrix<f64> {
    // nalgebra returns a thin SVD; pad with zero rows so V is square.
    if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        let mut p = DMatrix::zeros(m.ncols(), m.ncols());
        p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        p
    }
}

fn singular_cutoff(sigma: &DVector<f64>, scale: f64) -> f64 {
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if smax <= ZERO_RTOL * scale.max(f64::MIN_POSITIVE) {
        f64::INFINITY
    } else {
        RANK_RTOL * smax
    }
}

/// Numerical rank of `m`.
pub fn rank(m: &DMatrix<f64>, scale: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = padded(m).svd(false, false);
    let cut = singular_cutoff(&svd.singular_values, scale);
    svd.singular_values.iter().filter(|&&s| s > cut).count()
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let svd = padded(m).svd(false, true);
    let cut = singular_cutoff(&svd.singular_values, scale);
    let v_t = svd.v_t.expect("requested V^T");
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    canonical_basis(&columns_to_matrix(n, &cols))
}

/// Orthonormal basis of the column span of `m`.
pub fn column_span(m: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let cut = singular_cutoff(&svd.singular_values, scale);
    let u = svd.u.expect("requested U");
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    canonical_basis(&columns_to_matrix(m.nrows(), &cols))
}

pub fn columns_to_matrix(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Canonical orthonormal basis of the span of the (independent) columns of
/// `basis`: reduced row echelon form of the transposed basis, followed by
/// Gram-Schmidt in pivot order. The result depends only on the subspace.
pub fn canonical_basis(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let k = basis.ncols();
    let n = basis.nrows();
    if k == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut rows = basis.transpose();
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == k {
            break;
        }
        let (best, val) =
            (pivot_row..k)
                .map(|r| (r, rows[(r, col)].abs()))
                .fold(
                    (pivot_row, -1.0),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
        if val <= 1e-9 {
            continue;
        }
        rows.swap_rows(pivot_row, best);
        let p = rows[(pivot_row, col)];
        for c in 0..n {
            rows[(pivot_row, c)] /= p;
        }
        for r in 0..k {
            if r != pivot_row {
                let factor = rows[(r, col)];
                if factor != 0.0 {
                    for c in 0..n {
                        let v = rows[(pivot_row, c)];
                        rows[(r, c)] -= factor * v;
                    }
                }
            }
        }
        pivot_row += 1;
    }
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(k);
    for r in 0..pivot_row {
        let mut v = rows.row(r).transpose();
        for u in &out {
            let d = u.dot(&v);
            v -= u * d;
        }
        let nrm = v.norm();
        if nrm > 1e-12 {
            out.push(v / nrm);
        }
    }
    columns_to_matrix(n, &out)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = RANK_RTOL * smax;
    svd.solve(b, eps.max(f64::MIN_POSITIVE))
        .expect("U and V^T were computed")
}

/// Component of `v` orthogonal to the column span of `basis` (least squares).
pub fn reject(v: &DVector<f64>, basis: &DMatrix<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return v.clone();
    }
    let coeffs = lstsq(basis, v);
    v - basis * coeffs
}

/// True when every column of `sub` lies in the span of `sup`.
pub fn span_contains(sup: &DMatrix<f64>, sub: &DMatrix<f64>, tol: f64) -> bool {
    (0..sub.ncols()).all(|j| {
        let c = sub.column(j).into_owned();
        reject(&c, sup).norm() <= tol * (1.0 + c.norm())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_zero_matrix_is_everything() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(null_space(&m, 1.0).ncols(), 3);
        assert_eq!(rank(&m, 1.0), 0);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, 1.0);
        assert_eq!(ns.ncols(), 2);
        assert!((m * ns).norm() < 1e-14);
    }

    #[test]
    fn canonical_basis_is_independent_of_spanning_set() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, -1.0]);
        let ca = canonical_basis(&a);
        let cb = canonical_basis(&b);
        assert!((ca - cb).norm() < 1e-12);
    }

    #[test]
    fn lstsq_handles_rank_deficiency() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let x = lstsq(&a, &b);
        assert!((x - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-12);
    }
}
