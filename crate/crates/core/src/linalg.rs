//! Dense complex matrix exponential for small generators.

use nalgebra::DMatrix;
use num_complex::Complex64;

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a Taylor core.
///
/// The scaled matrix has 1-norm at most 1/2, where 24 Taylor terms reach
/// double precision.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / Complex64::new(2f64.powi(squarings), 0.0);

    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        result += &term;
        if one_norm(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_generator() {
        let t = 0.7_f64;
        let g = DMatrix::from_row_slice(
            2,
            2,
            &[0.0, -t, t, 0.0].map(|x| Complex64::new(x, 0.0)),
        );
        let e = expm(&g);
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-15);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-15);
        assert!((e[(0, 1)].re + t.sin()).abs() < 1e-15);
    }

    #[test]
    fn diagonal_phases_and_large_norm() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.0, 40.0),
            Complex64::new(-3.0, 0.0),
        ]));
        let e = expm(&g);
        assert!((e[(0, 0)] - Complex64::from_polar(1.0, 40.0)).norm() < 1e-12);
        assert!((e[(1, 1)].re - (-3f64).exp()).abs() < 1e-14);
    }
}
