//! Special functions and dense SPD linear algebra.
//!
//! Everything here is a pure function of its inputs. Matrices are small and
//! dense (dimension well under a hundred), so the kernels favour exactness
//! over blocking or sparsity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const TAIL_FLUSH: f64 = 1e-300;
const SYMMETRY_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-12;
const POWER_ITER_CAP: usize = 10_000;

/// Standard normal CDF Φ(x).
///
/// Evaluated as `erfc(-x/√2)/2`, which keeps full relative accuracy in the
/// lower tail. Values below 1e-300 are flushed to zero.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("std_normal_cdf of non-finite {x}")));
    }
    Ok(normal_cdf(x))
}

/// Standard normal density φ(x).
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("std_normal_pdf of non-finite {x}")));
    }
    Ok(normal_pdf(x))
}

/// Unchecked Φ. Infinite arguments map to 0 or 1; NaN propagates.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    let p = 0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2);
    if p < TAIL_FLUSH {
        0.0
    } else {
        p.min(1.0)
    }
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Dense square matrix, row-major. Serializes as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Shape("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self::diagonal(&vec![s; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    /// True when every off-diagonal entry has magnitude at most `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j).abs() <= tol))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, v.len())?;
        Ok((0..self.dim).map(|i| dot(self.row(i), v)).collect())
    }

    /// vᵀ·M·v.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        Ok(dot(v, &self.mul_vec(v)?))
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.rows()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape(format!("expected length {expected}, got {got}")));
    }
    Ok(())
}

/// Cholesky factor `L` (lower triangular, positive diagonal) with `L·Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// L·Lᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k_max = i.min(j);
                data[i * n + j] = (0..=k_max).map(|k| self.l(i, k) * self.l(j, k)).sum();
            }
        }
        Matrix { dim: n, data }
    }

    /// L·v, used to colour standard normal draws.
    pub fn lower_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|k| self.l(i, k) * v[k]).sum())
            .collect()
    }
}

pub fn cholesky(matrix: &Matrix) -> Result<SpdFactor> {
    let n = matrix.dim();
    let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (matrix.get(i, j) - matrix.get(j, i)).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Domain(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(matrix.get(i, i)));
    let threshold = PIVOT_TOL * max_diag;

    let mut lower = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = matrix.get(j, j);
        for k in 0..j {
            pivot -= lower[j * n + k] * lower[j * n + k];
        }
        if !(pivot > threshold) {
            return Err(Error::NotSpd { pivot: j, value: pivot });
        }
        let ljj = pivot.sqrt();
        lower[j * n + j] = ljj;
        for i in (j + 1)..n {
            // lower-triangle entries only; symmetry was checked above
            let mut s = matrix.get(i, j);
            for k in 0..j {
                s -= lower[i * n + k] * lower[j * n + k];
            }
            lower[i * n + j] = s / ljj;
        }
    }
    Ok(SpdFactor { dim: n, lower })
}

/// Solves (L·Lᵀ)x = v by forward then back substitution.
pub fn spd_solve(factor: &SpdFactor, v: &[f64]) -> Result<Vec<f64>> {
    let n = factor.dim;
    check_len(n, v.len())?;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s = v[i] - (0..i).map(|k| factor.l(i, k) * y[k]).sum::<f64>();
        y[i] = s / factor.l(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s = y[i] - ((i + 1)..n).map(|k| factor.l(k, i) * x[k]).sum::<f64>();
        x[i] = s / factor.l(i, i);
    }
    Ok(x)
}

/// √(vᵀ Σ⁻¹ v) given the factor of Σ.
pub fn mahalanobis_inv_norm(factor: &SpdFactor, v: &[f64]) -> Result<f64> {
    let x = spd_solve(factor, v)?;
    Ok(dot(v, &x).max(0.0).sqrt())
}

/// Largest eigenvalue of Σ⁻¹ by power iteration on `v ↦ Σ⁻¹v`.
pub fn spd_lambda_max(factor: &SpdFactor) -> f64 {
    let n = factor.dim;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * (i as f64 + 1.0) / n as f64).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..POWER_ITER_CAP {
        let w = spd_solve(factor, &v).expect("dimension is fixed by the factor");
        let next = dot(&v, &w);
        v = w;
        normalize(&mut v);
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Independent reference for Φ: Maclaurin series of erf near zero,
    // Lentz continued fraction for erfc in the tail.
    fn reference_cdf(x: f64) -> f64 {
        let t = x / std::f64::consts::SQRT_2;
        if t.abs() < 2.0 {
            let mut term = t;
            let mut sum = t;
            let mut k = 0.0;
            loop {
                k += 1.0;
                term *= -t * t / k;
                let add = term / (2.0 * k + 1.0);
                sum += add;
                if add.abs() < 1e-18 {
                    break;
                }
            }
            0.5 * (1.0 + sum * 2.0 / std::f64::consts::PI.sqrt())
        } else {
            let a = t.abs();
            // erfc(a) = exp(-a²)/√π · 1/(a + 1/2/(a + 1/(a + 3/2/(a + ...))))
            let mut f = a;
            let mut c = a;
            let mut d = 0.0;
            for k in 1..5000 {
                let an = k as f64 / 2.0;
                d = a + an * d;
                d = 1.0 / d;
                c = a + an / c;
                let delta = c * d;
                f *= delta;
                if (delta - 1.0).abs() < 1e-16 {
                    break;
                }
            }
            let erfc = (-a * a).exp() / std::f64::consts::PI.sqrt() / f;
            if t > 0.0 {
                1.0 - 0.5 * erfc
            } else {
                0.5 * erfc
            }
        }
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        assert!(close(std_normal_cdf(-1.0).unwrap(), 0.15865525393, 1e-11));
        assert!(close(std_normal_cdf(40.0).unwrap(), 1.0, 1e-15));
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_matches_reference() {
        let mut x = -9.0;
        while x <= 9.0 {
            let got = std_normal_cdf(x).unwrap();
            let want = reference_cdf(x);
            assert!(close(got, want, 1e-12), "x={x}: {got} vs {want}");
            if x < -3.0 {
                assert!(((got - want) / want).abs() < 1e-12, "relative tail error at {x}");
            }
            x += 0.0625;
        }
    }

    #[test]
    fn cdf_symmetry_and_tail_flush() {
        for i in 0..400 {
            let x = -10.0 + i as f64 * 0.05;
            let s = std_normal_cdf(x).unwrap() + std_normal_cdf(-x).unwrap();
            assert!(close(s, 1.0, 1e-14), "x={x}");
        }
        assert_eq!(std_normal_cdf(-40.0).unwrap(), 0.0);
    }

    #[test]
    fn pdf_examples() {
        assert!(close(std_normal_pdf(0.0).unwrap(), 0.3989422804, 1e-10));
        assert!(close(std_normal_pdf(1.0).unwrap(), 0.2419707245, 1e-10));
        assert_eq!(std_normal_pdf(-1.7).unwrap(), std_normal_pdf(1.7).unwrap());
        assert!(std_normal_pdf(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn cholesky_examples() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(f.reconstruct(), Matrix::identity(3));
        for i in 0..3 {
            assert_eq!(f.l(i, i), 1.0);
        }

        let a = Matrix::from_rows(vec![vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let f = cholesky(&a).unwrap();
        assert!(close(f.l(0, 0), 2.0, 1e-15));
        assert!(close(f.l(1, 0), 1.0, 1e-15));
        assert!(close(f.l(1, 1), 2f64.sqrt(), 1e-15));
        assert_eq!(f.l(0, 1), 0.0);

        let bad = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match cholesky(&bad) {
            Err(Error::NotSpd { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_rejects_asymmetry() {
        let a = Matrix::from_rows(vec![vec![2.0, 1.0], vec![0.5, 2.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::Domain(_))));
    }

    #[test]
    fn solve_examples() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(spd_solve(&f, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

        let f = cholesky(&Matrix::scaled_identity(3, 3.0)).unwrap();
        let x = spd_solve(&f, &[1.5, 2.0, 4.0]).unwrap();
        for (g, w) in x.iter().zip([0.5, 2.0 / 3.0, 4.0 / 3.0]) {
            assert!(close(*g, w, 1e-15));
        }

        let a = Matrix::from_rows(vec![vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let x = spd_solve(&cholesky(&a).unwrap(), &[2.0, 1.0]).unwrap();
        assert!(close(x[0], 0.5, 1e-15) && close(x[1], 0.0, 1e-15));

        assert!(matches!(spd_solve(&f, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn mahalanobis_examples() {
        let f = cholesky(&Matrix::identity(2)).unwrap();
        assert!(close(mahalanobis_inv_norm(&f, &[3.0, 4.0]).unwrap(), 5.0, 1e-15));
        let f = cholesky(&Matrix::scaled_identity(3, 3.0)).unwrap();
        let n = mahalanobis_inv_norm(&f, &[1.5, 2.0, 4.0]).unwrap();
        assert!(close(n, (22.25f64 / 3.0).sqrt(), 1e-14));
        assert!(close(n, 2.723_355_773_061_365, 1e-15));
        assert_eq!(mahalanobis_inv_norm(&f, &[0.0; 3]).unwrap(), 0.0);
        assert!(mahalanobis_inv_norm(&f, &[0.0; 2]).is_err());
    }

    #[test]
    fn lambda_max_examples() {
        let f = cholesky(&Matrix::scaled_identity(3, 3.0)).unwrap();
        assert!(((spd_lambda_max(&f) - 1.0 / 3.0) * 3.0).abs() < 1e-8);
        let f = cholesky(&Matrix::diagonal(&[1.0, 4.0])).unwrap();
        assert!((spd_lambda_max(&f) - 1.0).abs() < 1e-8);
        let a = Matrix::from_rows(vec![vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let want = 2.0 / (7.0 - 17f64.sqrt());
        let got = spd_lambda_max(&cholesky(&a).unwrap());
        assert!(((got - want) / want).abs() < 1e-8, "{got} vs {want}");
        assert!((want - 0.695_194_101_601_104).abs() < 1e-12);
    }

    #[test]
    fn matrix_serde_rows() {
        let m = Matrix::from_rows(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[2.0,0.5],[0.5,1.0]]");
        let back: Matrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Matrix>("[[1.0,2.0],[3.0]]").is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn spd_matrix() -> impl Strategy<Value = Matrix> {
            (1usize..7).prop_flat_map(|n| {
                (Just(n), prop::collection::vec(-2.0f64..2.0, n * n), 0.1f64..2.0)
            })
            .prop_map(|(n, a, shift)| {
                let mut rows = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        let s: f64 = (0..n).map(|k| a[k * n + i] * a[k * n + j]).sum();
                        rows[i][j] = s + if i == j { shift * n as f64 } else { 0.0 };
                    }
                }
                Matrix::from_rows(rows).unwrap()
            })
        }

        proptest! {
            #[test]
            fn cdf_monotone(x in -12.0f64..12.0, dx in 0.0f64..3.0) {
                prop_assert!(normal_cdf(x) <= normal_cdf(x + dx));
            }

            #[test]
            fn cdf_derivative_is_pdf(x in -6.0f64..6.0) {
                let h = 1e-5;
                let fd = (normal_cdf(x + h) - normal_cdf(x - h)) / (2.0 * h);
                prop_assert!((fd - normal_pdf(x)).abs() < 1e-6);
            }

            #[test]
            fn cholesky_reconstructs(m in spd_matrix()) {
                let f = cholesky(&m).unwrap();
                let r = f.reconstruct();
                let scale = m.max_abs();
                for i in 0..m.dim() {
                    prop_assert!(f.l(i, i) > 0.0);
                    for j in 0..m.dim() {
                        prop_assert!((r.get(i, j) - m.get(i, j)).abs() <= 1e-12 * scale);
                    }
                }
            }

            #[test]
            fn solve_residual_and_norm_identity(m in spd_matrix(), seed in prop::collection::vec(-5.0f64..5.0, 6)) {
                let f = cholesky(&m).unwrap();
                let v = &seed[..m.dim()];
                let x = spd_solve(&f, v).unwrap();
                let back = m.mul_vec(&x).unwrap();
                let vinf = norm_inf(v).max(1e-300);
                for (b, vi) in back.iter().zip(v) {
                    prop_assert!((b - vi).abs() <= 1e-10 * vinf);
                }
                let n = mahalanobis_inv_norm(&f, v).unwrap();
                let inner = dot(v, &x);
                prop_assert_eq!(n, inner.max(0.0).sqrt());
                prop_assert!((n * n - inner).abs() <= 4.0 * f64::EPSILON * inner.abs());
            }
        }
    }
}
