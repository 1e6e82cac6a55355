//! Small dense complex helpers over nalgebra, on row-major `Vec<Vec<_>>` matrices.

use nalgebra::DMatrix;

use crate::frontend::C64;

pub type Rows = Vec<Vec<C64>>;

pub fn to_matrix(rows: &[Vec<C64>]) -> DMatrix<C64> {
    let cols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c])
}

pub fn from_matrix(m: &DMatrix<C64>) -> Rows {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

/// Descending singular values.
pub fn singular_values(rows: &[Vec<C64>]) -> Vec<f64> {
    let mut s: Vec<f64> = to_matrix(rows).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Every singular value at least `tol * sigma_max` (and the matrix nonzero).
pub fn full_rank(rows: &[Vec<C64>], tol: f64) -> bool {
    let s = singular_values(rows);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) => max > 0.0 && min.is_finite() && min >= tol * max,
        _ => false,
    }
}

/// Moore-Penrose inverse, or `None` when [`full_rank`] fails.
pub fn pinv(rows: &[Vec<C64>], tol: f64) -> Option<Rows> {
    if !full_rank(rows, tol) {
        return None;
    }
    let svd = to_matrix(rows).svd(true, true);
    let max = svd.singular_values.max();
    svd.pseudo_inverse(tol * max).ok().map(|m| from_matrix(&m))
}

pub fn matmul(a: &[Vec<C64>], b: &[Vec<C64>]) -> Rows {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| (0..inner).map(|k| row[k] * b[k][c]).sum())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inverse_of_two_by_two() {
        let h = vec![vec![c(1.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]];
        let v = pinv(&h, 1e-9).unwrap();
        let p = matmul(&v, &h);
        for (i, row) in p.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                assert!((x - c(f64::from(u8::from(i == j)), 0.0)).norm() < 1e-12);
            }
        }
        assert!((singular_values(&h)[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tall_left_inverse() {
        let h = vec![vec![c(1.0, 0.0)], vec![c(0.0, 1.0)], vec![c(2.0, 0.0)]];
        let v = pinv(&h, 1e-9).unwrap();
        assert_eq!((v.len(), v[0].len()), (1, 3));
        assert!((matmul(&v, &h)[0][0] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let h = vec![vec![c(1.0, 1.0), c(2.0, 2.0)], vec![c(0.5, 0.5), c(1.0, 1.0)]];
        assert!(!full_rank(&h, 1e-9));
        assert!(pinv(&h, 1e-9).is_none());
        assert!(!full_rank(&[vec![c(0.0, 0.0)]], 1e-9));
    }
}
