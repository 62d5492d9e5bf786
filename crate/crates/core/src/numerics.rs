//! Dense linear-algebra kernels. Matrices are nalgebra types; the
//! nonsymmetric eigensolver is faer's.
//!
//! Everything above this module talks to these four entry points plus a few
//! helpers, so swapping the backend only touches this file.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{PsaError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors, one column per eigenvalue, when requested.
    pub eigenvectors: Option<CMatrix>,
}

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub u: Option<CMatrix>,
    pub v: Option<CMatrix>,
}

impl SvdResult {
    pub fn min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// Full spectrum of a real square matrix.
pub fn eig_real(matrix: &RMatrix) -> Result<EigenResult> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok(EigenResult {
            eigenvalues: vec![],
            eigenvectors: None,
        });
    }
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| matrix[(i, j)]);
    let eigenvalues = m
        .eigenvalues()
        .map_err(|_| PsaError::EigensolverFailure(n))?;
    if eigenvalues
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(PsaError::EigensolverFailure(n));
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors: None,
    })
}

/// Spectrum plus right eigenvectors, each recovered as the smallest right
/// singular vector of `A - lambda I`.
pub fn eig_real_with_vectors(matrix: &RMatrix) -> Result<EigenResult> {
    let mut res = eig_real(matrix)?;
    let n = matrix.nrows();
    let a = to_complex(matrix);
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &lam) in res.eigenvalues.iter().enumerate() {
        let shifted = &a - CMatrix::identity(n, n) * lam;
        let (_, v) = smallest_singular_pair(&shifted);
        vecs.set_column(k, &v);
    }
    res.eigenvectors = Some(vecs);
    Ok(res)
}

pub fn svd_complex(matrix: &CMatrix, vectors: bool) -> SvdResult {
    let svd = matrix.clone().svd(vectors, vectors);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let (u, v) = if vectors {
        let u_raw = svd.u.expect("left vectors requested");
        let vt_raw = svd.v_t.expect("right vectors requested");
        let u = CMatrix::from_columns(&order.iter().map(|&i| u_raw.column(i)).collect::<Vec<_>>());
        let v = CMatrix::from_columns(
            &order
                .iter()
                .map(|&i| vt_raw.row(i).adjoint())
                .collect::<Vec<_>>(),
        );
        (Some(u), Some(v))
    } else {
        (None, None)
    };
    SvdResult {
        singular_values,
        u,
        v,
    }
}

pub fn singular_values(matrix: &CMatrix) -> Vec<f64> {
    svd_complex(matrix, false).singular_values
}

/// Smallest singular value and its unit right singular vector.
pub fn smallest_singular_pair(matrix: &CMatrix) -> (f64, CVector) {
    let n = matrix.ncols();
    // Tall-or-square guarantees `v` spans the full column space.
    let svd = svd_complex(matrix, true);
    let v = svd.v.expect("vectors requested");
    let idx = svd.singular_values.len() - 1;
    let s = if matrix.nrows() < n {
        0.0
    } else {
        svd.singular_values[idx]
    };
    (s, v.column(idx.min(n - 1)).into_owned())
}

pub fn solve_complex(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(PsaError::DimensionMismatch(format!(
            "solve: {}x{} against {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let scale = a
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if (0..u.nrows()).any(|i| u[(i, i)].norm() <= scale * f64::EPSILON * 1e-2) {
        return Err(PsaError::SingularMatrix);
    }
    lu.solve(b).ok_or(PsaError::SingularMatrix)
}

/// Minimizer of `||J x + r||_2` for `J` with full column rank.
pub fn least_squares_real(j: &RMatrix, r: &RVector) -> Result<RVector> {
    let cols = j.ncols();
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * (j.nrows().max(cols) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < cols {
        return Err(PsaError::RankDeficient { rank, cols });
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut coeffs = u.transpose() * r;
    for (c, s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c /= *s;
    }
    Ok(-(vt.transpose() * coeffs))
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &RMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Rotate `x` so its largest-magnitude entry is real and positive.
pub fn fix_phase(x: &mut CVector) {
    let Some((_, &pivot)) = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
    else {
        return;
    };
    if pivot.norm() > 0.0 {
        let rot = pivot.conj() / pivot.norm();
        x.iter_mut().for_each(|z| *z *= rot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn eig_diagonal() {
        let ev = sorted(
            eig_real(&RMatrix::from_diagonal(&RVector::from_vec(vec![
                3.0, 1.0, 2.0,
            ])))
            .unwrap()
            .eigenvalues,
        );
        for (z, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(z.re, want, epsilon = 1e-14);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eig_rotation_is_plus_minus_j() {
        let ev = sorted(
            eig_real(&RMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))
                .unwrap()
                .eigenvalues,
        );
        assert_abs_diff_eq!(ev[0].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[0].im.abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!((ev[0].im + ev[1].im), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_companion() {
        // lambda^2 - 3 lambda + 2 = (lambda - 1)(lambda - 2)
        let c = RMatrix::from_row_slice(2, 2, &[3.0, -2.0, 1.0, 0.0]);
        let ev = sorted(eig_real(&c).unwrap().eigenvalues);
        assert_abs_diff_eq!(ev[0].re, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ev[1].re, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn eigenvectors_have_small_backward_error() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let a = RMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let res = eig_real_with_vectors(&a).unwrap();
        let v = res.eigenvectors.unwrap();
        let ac = to_complex(&a);
        for (k, lam) in res.eigenvalues.iter().enumerate() {
            let x = v.column(k);
            let r = &ac * x - x * *lam;
            assert!(r.norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let s = singular_values(&CMatrix::identity(3, 3));
        assert!(s.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(0.0, 4.0),
        ]));
        let s = singular_values(&d);
        assert_abs_diff_eq!(s[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn svd_rank_one() {
        let u = CVector::from_vec(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
            Complex64::new(0.0, 0.0),
        ]);
        let v = CVector::from_vec(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let s = singular_values(&(&u * v.adjoint()));
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-14);
        assert!(s[1] < 1e-14 && s[2] < 1e-14);
    }

    #[test]
    fn svd_reconstructs() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let a = CMatrix::from_fn(5, 4, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let svd = svd_complex(&a, true);
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let u = svd.u.unwrap();
        let v = svd.v.unwrap();
        let k = svd.singular_values.len();
        let s = CMatrix::from_diagonal(&CVector::from_iterator(
            k,
            svd.singular_values.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let rec = u.columns(0, k) * s * v.columns(0, k).adjoint();
        assert!((rec - &a).norm() < 1e-13 * a.norm());
    }

    #[test]
    fn solve_identity_diagonal_random() {
        let b = CMatrix::from_fn(3, 1, |i, _| Complex64::new(i as f64, 1.0));
        assert_eq!(solve_complex(&CMatrix::identity(3, 3), &b).unwrap(), b);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![Complex64::new(2.0, 0.0); 3]));
        let x = solve_complex(&d, &b).unwrap();
        assert!((x * Complex64::new(2.0, 0.0) - &b).norm() < 1e-15);

        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let a = CMatrix::from_fn(5, 5, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = CMatrix::from_fn(5, 2, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
        let x = solve_complex(&a, &b).unwrap();
        assert!((&a * x - &b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn solve_singular_is_error() {
        let a = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert_eq!(
            solve_complex(&a, &CMatrix::identity(2, 1)),
            Err(PsaError::SingularMatrix)
        );
    }

    #[test]
    fn least_squares_square_and_consistent() {
        let j = RMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let r = RVector::from_vec(vec![2.0, 8.0]);
        let x = least_squares_real(&j, &r).unwrap();
        assert_abs_diff_eq!(x[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], -2.0, epsilon = 1e-15);

        let j = RMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let r = RVector::from_vec(vec![-1.0, -2.0, -3.0]);
        let x = least_squares_real(&j, &r).unwrap();
        assert!((&j * &x + &r).norm() < 1e-14);
    }

    #[test]
    fn least_squares_orthogonality() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let j = RMatrix::from_fn(9, 4, |_, _| rng.gen_range(-1.0..1.0));
        let r = RVector::from_fn(9, |_, _| rng.gen_range(-1.0..1.0));
        let x = least_squares_real(&j, &r).unwrap();
        let res = &j * &x + &r;
        assert!((j.transpose() * res).norm() <= 100.0 * f64::EPSILON * j.norm() * r.norm());
    }

    #[test]
    fn least_squares_rank_deficient() {
        let j = RMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let err = least_squares_real(&j, &RVector::zeros(3)).unwrap_err();
        assert_eq!(err, PsaError::RankDeficient { rank: 1, cols: 2 });
    }
}
