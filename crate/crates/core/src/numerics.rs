//! Dense SPD factorization, solves and seeded random orthogonal matrices.
//!
//! The Cholesky kernel itself is faer's; this module adds the symmetry check,
//! the diagonal-jitter escalation policy and the vector-level API the
//! estimators need.

use faer::Side;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{seeds, Error, Mat, Result};

/// Diagonal jitter strategy for [`spd_factor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JitterPolicy {
    /// Factor `A` as given.
    None,
    /// Try `A` first, then `A + base·10^t·I` for `t = 0..max_tries`.
    /// `base = None` means `1e-12 · trace(A) / dim`.
    Auto { max_tries: u32, base: Option<f64> },
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy::Auto {
            max_tries: 6,
            base: None,
        }
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Mat<f64>,
    jitter_applied: f64,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &Mat<f64> {
        &self.lower
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    /// `log det(A + jitter·I)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.lower[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `L y = v` in place.
    pub fn forward_solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        let mut rhs = Mat::from_fn(v.len(), 1, |i, _| v[i]);
        self.lower.solve_lower_triangular_in_place(&mut rhs);
        Ok(rhs.col(0).iter().copied().collect())
    }

    /// Solves `(A + jitter·I) X = B` column by column.
    pub fn solve_mat(&self, b: &Mat<f64>) -> Result<Mat<f64>> {
        self.check_len(b.nrows())?;
        let mut x = b.clone();
        self.lower.solve_lower_triangular_in_place(&mut x);
        self.lower
            .transpose()
            .solve_upper_triangular_in_place(&mut x);
        Ok(x)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::input(format!(
                "vector of length {len} does not match factor dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

fn max_abs(a: &Mat<f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for v in a.col(j).iter() {
            m = m.max(v.abs());
        }
    }
    m
}

/// Cholesky-factors a symmetric matrix, escalating diagonal jitter per policy.
pub fn spd_factor(a: &Mat<f64>, policy: JitterPolicy) -> Result<SpdFactor> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::input(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = max_abs(a);
    if !scale.is_finite() {
        return Err(Error::input("matrix has non-finite entries"));
    }
    let tol = 1e-10 * scale;
    for j in 0..n {
        for i in (j + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return Err(Error::input(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    a[(i, j)],
                    a[(j, i)]
                )));
            }
        }
    }

    let attempt = |jitter: f64| -> Option<SpdFactor> {
        let shifted;
        let target = if jitter == 0.0 {
            a
        } else {
            shifted = Mat::from_fn(n, n, |i, j| a[(i, j)] + if i == j { jitter } else { 0.0 });
            &shifted
        };
        let llt = target.llt(Side::Lower).ok()?;
        let lower = llt.L().to_owned();
        let diag_ok = (0..n).all(|i| lower[(i, i)] > 0.0 && lower[(i, i)].is_finite());
        diag_ok.then_some(SpdFactor {
            lower,
            jitter_applied: jitter,
        })
    };

    if let Some(f) = attempt(0.0) {
        return Ok(f);
    }
    match policy {
        JitterPolicy::None => Err(Error::numerical(
            "matrix is not positive definite (no jitter allowed)",
        )),
        JitterPolicy::Auto { max_tries, base } => {
            let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
            let base = base.unwrap_or(1e-12 * trace / n as f64);
            if !(base > 0.0) {
                return Err(Error::numerical(format!(
                    "matrix is not positive definite and jitter base {base} is not positive"
                )));
            }
            let mut last = 0.0;
            for t in 0..max_tries {
                last = base * 10f64.powi(t as i32);
                if let Some(f) = attempt(last) {
                    return Ok(f);
                }
            }
            Err(Error::numerical(format!(
                "factorization failed after {max_tries} jitter attempts (last jitter {last:e})"
            )))
        }
    }
}

/// Solves `(A + jitter·I) x = b`.
pub fn spd_solve(f: &SpdFactor, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = f.solve_mat(&rhs)?;
    Ok(x.col(0).iter().copied().collect())
}

/// `vᵀ (A + jitter·I)⁻¹ v`, clamped at zero.
pub fn quadratic_form(v: &[f64], f: &SpdFactor) -> Result<f64> {
    let x = spd_solve(f, v)?;
    let q: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(q.max(0.0))
}

/// Haar-distributed random orthogonal matrix of size `dim`.
///
/// A seeded standard-normal matrix is QR-factored and each column of `Q` is
/// multiplied by the sign of the matching diagonal entry of `R`.
pub fn random_unitary(dim: usize, seed: u64) -> Result<Mat<f64>> {
    if dim == 0 {
        return Err(Error::input("random_unitary needs dim >= 1"));
    }
    let mut rng = seeds::rng(seed);
    let mut g = Mat::<f64>::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            g[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn mat(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn seeded_spd(dim: usize, seed: u64) -> Mat<f64> {
        let mut rng = seeds::rng(seed);
        let b = Mat::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut a = &b * b.transpose();
        for i in 0..dim {
            a[(i, i)] += 1.0;
        }
        a
    }

    #[test]
    fn identity_factor() {
        let f = spd_factor(&Mat::identity(3, 3), JitterPolicy::None).unwrap();
        assert_eq!(f.jitter_applied(), 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.lower()[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn two_by_two_factor_and_solve() {
        let a = mat(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let f = spd_factor(&a, JitterPolicy::None).unwrap();
        let l = f.lower();
        assert!((l[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((l[(1, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
        let x = spd_solve(&f, &[8.0, 7.0]).unwrap();
        assert!((x[0] - 1.25).abs() < 1e-14 && (x[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn solve_examples() {
        let f = spd_factor(&Mat::identity(3, 3), JitterPolicy::None).unwrap();
        assert_eq!(spd_solve(&f, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let two = Mat::from_fn(5, 5, |i, j| if i == j { 2.0 } else { 0.0 });
        let f = spd_factor(&two, JitterPolicy::None).unwrap();
        for v in spd_solve(&f, &[1.0; 5]).unwrap() {
            assert!((v - 0.5).abs() < 1e-15);
        }
        assert!(spd_solve(&f, &[1.0; 4]).is_err());
    }

    #[test]
    fn quadratic_form_examples() {
        let f = spd_factor(&Mat::identity(2, 2), JitterPolicy::None).unwrap();
        assert_eq!(quadratic_form(&[0.0, 0.0], &f).unwrap(), 0.0);
        assert!((quadratic_form(&[3.0, 4.0], &f).unwrap() - 25.0).abs() < 1e-12);
        let two = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.0 });
        let f = spd_factor(&two, JitterPolicy::None).unwrap();
        assert!((quadratic_form(&[2.0, 0.0], &f).unwrap() - 2.0).abs() < 1e-14);
        assert!(quadratic_form(&[1.0], &f).is_err());
    }

    #[test]
    fn zero_matrix_fails_without_jitter() {
        let z = Mat::<f64>::zeros(3, 3);
        assert!(matches!(spd_factor(&z, JitterPolicy::None), Err(Error::Numerical(_))));
        // trace is zero so the default jitter base is unusable too
        assert!(matches!(spd_factor(&z, JitterPolicy::default()), Err(Error::Numerical(_))));
    }

    #[test]
    fn asymmetric_is_input_error() {
        let a = mat(&[&[1.0, 0.5], &[0.4, 1.0]]);
        assert!(matches!(spd_factor(&a, JitterPolicy::None), Err(Error::Input(_))));
    }

    #[test]
    fn singular_gram_gets_jitter() {
        // duplicated samples: rank one all-ones matrix
        let a = Mat::from_fn(4, 4, |_, _| 1.0);
        let f = spd_factor(&a, JitterPolicy::default()).unwrap();
        assert!(f.jitter_applied() > 0.0);
        let err = spd_factor(
            &a,
            JitterPolicy::Auto {
                max_tries: 2,
                base: Some(-1.0),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn failure_reports_last_jitter() {
        let a = mat(&[&[1.0, 0.0], &[0.0, -5.0]]);
        let err = spd_factor(
            &a,
            JitterPolicy::Auto {
                max_tries: 3,
                base: Some(1e-3),
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("1e-1"), "{err}");
    }

    #[test]
    fn reconstruction_and_residual() {
        for (dim, seed) in [(5, 1), (20, 2), (50, 3), (200, 4)] {
            let a = seeded_spd(dim, seed);
            let f = spd_factor(&a, JitterPolicy::None).unwrap();
            let l = f.lower();
            let rec = l * l.transpose();
            let err = max_abs(&(&rec - &a));
            assert!(err <= 1e-8 * max_abs(&a), "dim {dim}: {err}");

            let b: Vec<f64> = (0..dim).map(|i| (i as f64).sin()).collect();
            let x = spd_solve(&f, &b).unwrap();
            let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res: f64 = (0..dim)
                .map(|i| {
                    let ax: f64 = (0..dim).map(|j| a[(i, j)] * x[j]).sum();
                    (ax - b[i]).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-7 * bn, "dim {dim}: residual {res}");
        }
    }

    #[test]
    fn log_det_matches_diagonal() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let f = spd_factor(&a, JitterPolicy::None).unwrap();
        assert!((f.log_det() - 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn unitary_examples() {
        let u = random_unitary(1, 9).unwrap();
        assert_eq!(u[(0, 0)].abs(), 1.0);
        assert!(random_unitary(0, 1).is_err());
        let a = random_unitary(3, 11).unwrap();
        let b = random_unitary(3, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_unitary(3, 12).unwrap());
    }

    proptest! {
        #[test]
        fn quadratic_form_is_forward_norm(dim in 1usize..30, seed in any::<u64>()) {
            let a = seeded_spd(dim, seed);
            let f = spd_factor(&a, JitterPolicy::None).unwrap();
            let v: Vec<f64> = (0..dim).map(|i| ((seed % 97) as f64 + i as f64).cos()).collect();
            let y = f.forward_solve(&v).unwrap();
            let norm: f64 = y.iter().map(|t| t * t).sum();
            let q = quadratic_form(&v, &f).unwrap();
            prop_assert!((q - norm).abs() <= 1e-10 * norm.max(1.0));
        }

        #[test]
        fn unitary_is_orthogonal(dim in 1usize..12, seed in any::<u64>()) {
            let u = random_unitary(dim, seed).unwrap();
            let utu = u.transpose() * &u;
            for i in 0..dim {
                let col_norm: f64 = u.col(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((col_norm - 1.0).abs() <= 1e-12);
                for j in 0..dim {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((utu[(i, j)] - target).abs() <= 1e-10);
                }
            }
        }
    }
}
