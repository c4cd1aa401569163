//! Small dense solver used to place followers from their weights.

use alloc::vec::Vec;

use crate::geom::Vec2;

/// Solves `A x = b` for a square row-major `A` with planar right-hand
/// sides, using Gaussian elimination with partial pivoting. Returns `None`
/// when a pivot falls below `1e-12` in magnitude.
pub(crate) fn solve_planar(mut a: Vec<Vec<f64>>, mut b: Vec<Vec2>) -> Option<Vec<Vec2>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            libm::fabs(a[i][col])
                .partial_cmp(&libm::fabs(a[j][col]))
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if libm::fabs(a[pivot][col]) < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= factor * p;
            }
            let pivot_rhs = b[col];
            b[row] -= pivot_rhs * factor;
        }
    }
    let mut x = alloc::vec![Vec2::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= x[k] * a[row][k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let b = vec![Vec2::new(2.0, 4.0), Vec2::new(3.0, 3.0)];
        let x = solve_planar(a, b).unwrap();
        assert!((x[0] - Vec2::new(2.0, 1.0)).norm() < 1e-15);
        assert!((x[1] - Vec2::new(1.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_is_none() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_planar(a, vec![Vec2::ZERO; 2]).is_none());
    }
}
