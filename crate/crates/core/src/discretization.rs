//! Spectral collocation of the delay equation on scaled Chebyshev extremal
//! points, giving the finite-dimensional state matrix `A_N`, the input map
//! `B_N`, and the rational approximants `p_N(-tau; lambda)` of
//! `exp(-lambda tau)` that make `F_N(lambda)^{-1}` the transfer function of
//! `(A_N, B_N, B_N^T)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{PsaError, Result};
use crate::model::{ComplexPoint, TimeDelaySystem};
use crate::numerics::{self, CMatrix, CVector, RMatrix};

/// Default number of collocation intervals.
pub const DEFAULT_N: usize = 15;

/// Mesh `theta_{-N} < ... < theta_0 = 0` on `[-tau_max, 0]`, stored in
/// increasing order (index `k` holds `theta_{k-N}`).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub points: Vec<f64>,
    pub barycentric_weights: Vec<f64>,
    pub tau_max: f64,
}

impl Mesh {
    pub fn order(&self) -> usize {
        self.points.len() - 1
    }
}

/// `theta_{N,i} = (tau_max / 2) (cos(i pi / N) - 1)` for `i = -N..0`.
pub fn chebyshev_mesh(n: usize, tau_max: f64) -> Result<Mesh> {
    if n < 1 {
        return Err(PsaError::InvalidN(n));
    }
    if tau_max <= 0.0 || !tau_max.is_finite() {
        return Err(PsaError::NonpositiveDelay {
            index: 0,
            value: tau_max,
        });
    }
    let points = (0..=n)
        .map(|k| {
            // sin((N - 2k) pi / 2N) == cos(k pi / N), but exactly symmetric
            let x = ((n as f64 - 2.0 * k as f64) * PI / (2.0 * n as f64)).sin();
            0.5 * tau_max * (-x - 1.0)
        })
        .collect();
    let barycentric_weights = (0..=n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    Ok(Mesh {
        points,
        barycentric_weights,
        tau_max,
    })
}

/// `D[i][k] = l'_k(theta_i)`; diagonal from the negative row sum.
pub fn differentiation_matrix(mesh: &Mesh) -> RMatrix {
    let x = &mesh.points;
    let w = &mesh.barycentric_weights;
    let np1 = x.len();
    let mut d = RMatrix::zeros(np1, np1);
    for i in 0..np1 {
        let mut row_sum = 0.0;
        for k in 0..np1 {
            if i != k {
                let v = (w[k] / w[i]) / (x[i] - x[k]);
                d[(i, k)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Lagrange basis values `[l_{-N}(t), ..., l_0(t)]` by the barycentric formula.
pub fn lagrange_values(mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
    let lo = -mesh.tau_max;
    let slack = 1e-14 * mesh.tau_max;
    if !(t >= lo - slack && t <= slack) {
        return Err(PsaError::OutOfInterval { t, lo });
    }
    let t = t.clamp(lo, 0.0);
    let np1 = mesh.points.len();
    if let Some(hit) = mesh.points.iter().position(|&p| p == t) {
        let mut e = vec![0.0; np1];
        e[hit] = 1.0;
        return Ok(e);
    }
    let terms: Vec<f64> = mesh
        .points
        .iter()
        .zip(&mesh.barycentric_weights)
        .map(|(&p, &w)| w / (t - p))
        .collect();
    let denom: f64 = terms.iter().sum();
    Ok(terms.into_iter().map(|x| x / denom).collect())
}

/// The assembled discretization of one system at one order `N`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub d: RMatrix,
    pub a_n: RMatrix,
    pub b_n: RMatrix,
    pub system: TimeDelaySystem,
    /// Row `i - 1` holds `lagrange_values(-tau_i)` for delay `i >= 1`.
    delay_basis: Vec<Vec<f64>>,
}

impl Discretization {
    pub fn order(&self) -> usize {
        self.mesh.order()
    }

    pub fn d11(&self) -> RMatrix {
        let n = self.order();
        self.d.view((0, 0), (n, n)).into_owned()
    }

    pub fn d12(&self) -> RMatrix {
        let n = self.order();
        self.d.view((0, n), (n, 1)).into_owned()
    }

    /// Dimension `n (N + 1)` of `A_N`.
    pub fn dim(&self) -> usize {
        self.a_n.nrows()
    }
}

/// Builds `A_N` and `B_N`. Delay-free systems accept `N = 0`, giving
/// `A_N = A_0`; with `N >= 1` they use a unit-length mesh.
pub fn assemble(sys: &TimeDelaySystem, n_order: usize) -> Result<Discretization> {
    let n = sys.n();
    if n_order == 0 {
        if !sys.is_delay_free() {
            return Err(PsaError::InvalidN(0));
        }
        let mesh = Mesh {
            points: vec![0.0],
            barycentric_weights: vec![1.0],
            tau_max: 0.0,
        };
        return Ok(Discretization {
            mesh,
            d: RMatrix::zeros(1, 1),
            a_n: sys.matrices()[0].clone(),
            b_n: RMatrix::identity(n, n),
            system: sys.clone(),
            delay_basis: vec![],
        });
    }
    let tau_max = if sys.is_delay_free() {
        1.0
    } else {
        sys.tau_max()
    };
    let mesh = chebyshev_mesh(n_order, tau_max)?;
    let d = differentiation_matrix(&mesh);
    let delay_basis = sys.delays()[1..]
        .iter()
        .map(|&tau| lagrange_values(&mesh, -tau))
        .collect::<Result<Vec<_>>>()?;

    let np1 = n_order + 1;
    let dim = n * np1;
    let mut a_n = RMatrix::zeros(dim, dim);
    for i in 0..n_order {
        for k in 0..np1 {
            let dik = d[(i, k)];
            if dik != 0.0 {
                for r in 0..n {
                    a_n[(i * n + r, k * n + r)] = dik;
                }
            }
        }
    }
    let bottom = n_order * n;
    for k in 0..np1 {
        let mut gamma = if k == n_order {
            sys.matrices()[0].clone()
        } else {
            RMatrix::zeros(n, n)
        };
        for (a, basis) in sys.matrices()[1..].iter().zip(&delay_basis) {
            if basis[k] != 0.0 {
                gamma += a * basis[k];
            }
        }
        a_n.view_mut((bottom, k * n), (n, n)).copy_from(&gamma);
    }
    let mut b_n = RMatrix::zeros(dim, n);
    b_n.view_mut((bottom, 0), (n, n)).fill_with_identity();

    Ok(Discretization {
        mesh,
        d,
        a_n,
        b_n,
        system: sys.clone(),
        delay_basis,
    })
}

/// `p_N` at the interior mesh points and at `-tau` for one `lambda`.
#[derive(Debug, Clone)]
pub struct RationalExp {
    /// `[p_N(theta_{-N}; lambda), ..., p_N(theta_{-1}; lambda)]`.
    pub nodes: CVector,
    /// `p_N(-tau; lambda)`.
    pub at_delay: Complex64,
}

/// Solves `(lambda I - D11) x = D12`, the node values of `p_N(.; lambda)`.
fn node_values(disc: &Discretization, lambda: ComplexPoint) -> Result<CVector> {
    let n = disc.order();
    let mut m = numerics::to_complex(&disc.d11()) * Complex64::new(-1.0, 0.0);
    for i in 0..n {
        m[(i, i)] += lambda;
    }
    let rhs = numerics::to_complex(&disc.d12());
    numerics::solve_complex(&m, &rhs)
        .map(|x| x.column(0).into_owned())
        .map_err(|_| PsaError::SingularResolvent {
            re: lambda.re,
            im: lambda.im,
        })
}

fn combine(basis: &[f64], nodes: &CVector) -> Complex64 {
    let n = nodes.len();
    nodes
        .iter()
        .zip(basis)
        .fold(Complex64::new(basis[n], 0.0), |acc, (x, &l)| acc + x * l)
}

pub fn eval_rational_exp(
    disc: &Discretization,
    tau: f64,
    lambda: ComplexPoint,
) -> Result<RationalExp> {
    if disc.order() == 0 {
        return Ok(RationalExp {
            nodes: CVector::zeros(0),
            at_delay: Complex64::new(1.0, 0.0),
        });
    }
    let basis = lagrange_values(&disc.mesh, -tau)?;
    let nodes = node_values(disc, lambda)?;
    let at_delay = combine(&basis, &nodes);
    Ok(RationalExp { nodes, at_delay })
}

/// `p_N(-tau; lambda)`, the rational approximant of `exp(-lambda tau)`.
pub fn eval_pn(disc: &Discretization, tau: f64, lambda: ComplexPoint) -> Result<Complex64> {
    eval_rational_exp(disc, tau, lambda).map(|r| r.at_delay)
}

/// `F_N(lambda) = lambda I - A_0 - sum_i A_i p_N(-tau_i; lambda)`.
pub fn eval_fn(disc: &Discretization, lambda: ComplexPoint) -> Result<CMatrix> {
    let sys = &disc.system;
    let n = sys.n();
    let mut f = CMatrix::identity(n, n) * lambda - numerics::to_complex(&sys.matrices()[0]);
    if sys.is_delay_free() {
        return Ok(f);
    }
    let nodes = node_values(disc, lambda)?;
    for (a, basis) in sys.matrices()[1..].iter().zip(&disc.delay_basis) {
        let p = combine(basis, &nodes);
        f.zip_apply(a, |fz, x| *fz -= p * x);
    }
    Ok(f)
}

/// `B_N^T (lambda I - A_N)^{-1} B_N`.
pub fn transfer_function(disc: &Discretization, lambda: ComplexPoint) -> Result<CMatrix> {
    let dim = disc.dim();
    let mut m = numerics::to_complex(&disc.a_n) * Complex64::new(-1.0, 0.0);
    for i in 0..dim {
        m[(i, i)] += lambda;
    }
    let b = numerics::to_complex(&disc.b_n);
    let x = numerics::solve_complex(&m, &b).map_err(|_| PsaError::SingularResolvent {
        re: lambda.re,
        im: lambda.im,
    })?;
    Ok(b.transpose() * x)
}

/// Eigenvalues of `A_N`, i.e. the characteristic roots of `F_N`.
pub fn roots_fn(disc: &Discretization) -> Result<Vec<Complex64>> {
    Ok(numerics::eig_real(&disc.a_n)?.eigenvalues)
}

/// `alpha(F_N)`: the largest real part among the eigenvalues of `A_N`.
pub fn spectral_abscissa_fn(disc: &Discretization) -> Result<f64> {
    Ok(roots_fn(disc)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_system;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn scalar(values: &[f64], delays: &[f64]) -> TimeDelaySystem {
        TimeDelaySystem::new(
            delays.to_vec(),
            values
                .iter()
                .map(|&v| RMatrix::from_element(1, 1, v))
                .collect(),
        )
        .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mesh_examples() {
        assert_eq!(
            chebyshev_mesh(2, 1.0).unwrap().points,
            vec![-1.0, -0.5, 0.0]
        );
        assert_eq!(chebyshev_mesh(1, 2.0).unwrap().points, vec![-2.0, 0.0]);
        let m = chebyshev_mesh(4, 1.0).unwrap();
        assert_abs_diff_eq!(m.points[2], -0.5, epsilon = 1e-15);
        for (k, &p) in m.points.iter().enumerate() {
            let i = k as f64 - 4.0;
            assert_abs_diff_eq!(p, 0.5 * ((i * PI / 4.0).cos() - 1.0), epsilon = 1e-15);
        }
        assert_eq!(chebyshev_mesh(0, 1.0), Err(PsaError::InvalidN(0)));
    }

    #[test]
    fn mesh_invariants() {
        for n in 1..30 {
            let m = chebyshev_mesh(n, 0.7).unwrap();
            assert_eq!(*m.points.last().unwrap(), 0.0);
            assert!(m.points.windows(2).all(|w| w[0] < w[1]));
            assert_abs_diff_eq!(m.points[0], -0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn differentiation_n1() {
        let tau = 0.8;
        let d = differentiation_matrix(&chebyshev_mesh(1, tau).unwrap());
        let want = RMatrix::from_row_slice(2, 2, &[-1.0 / tau, 1.0 / tau, -1.0 / tau, 1.0 / tau]);
        assert!((d - want).abs().max() < 1e-15);
    }

    #[test]
    fn differentiation_exact_on_polynomials() {
        for n in [1, 2, 5, 10, 15, 20] {
            let mesh = chebyshev_mesh(n, 1.3).unwrap();
            let d = differentiation_matrix(&mesh);
            for row in d.row_iter() {
                assert!(row.sum().abs() < 1e-13);
            }
            for k in 1..=n {
                let vals = RMatrix::from_fn(n + 1, 1, |i, _| mesh.points[i].powi(k as i32));
                let deriv = &d * vals;
                for i in 0..=n {
                    let want = k as f64 * mesh.points[i].powi(k as i32 - 1);
                    let err = (deriv[(i, 0)] - want).abs();
                    assert!(
                        err <= 1e-10 * want.abs().max(1.0),
                        "n={n} k={k} i={i} err={err}"
                    );
                }
            }
        }
    }

    #[test]
    fn lagrange_cardinal_and_partition() {
        let mesh = chebyshev_mesh(7, 2.0).unwrap();
        for (k, &p) in mesh.points.iter().enumerate() {
            let v = lagrange_values(&mesh, p).unwrap();
            for (j, x) in v.iter().enumerate() {
                assert_eq!(*x, if j == k { 1.0 } else { 0.0 });
            }
        }
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        for _ in 0..50 {
            let t = rng.gen_range(-2.0..0.0);
            let s: f64 = lagrange_values(&mesh, t).unwrap().iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-13);
        }
        let lin = chebyshev_mesh(1, 3.0).unwrap();
        let v = lagrange_values(&lin, -1.5).unwrap();
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.5, epsilon = 1e-15);
        assert!(matches!(
            lagrange_values(&lin, 0.1),
            Err(PsaError::OutOfInterval { .. })
        ));
        assert!(matches!(
            lagrange_values(&lin, -3.1),
            Err(PsaError::OutOfInterval { .. })
        ));
    }

    #[test]
    fn assemble_delay_free() {
        let a0 = RMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -3.0]);
        let sys = TimeDelaySystem::delay_free(a0.clone()).unwrap();
        for n in [0, 1, 4] {
            let disc = assemble(&sys, n).unwrap();
            let bottom = disc.a_n.view((2 * n, 0), (2, 2 * (n + 1))).into_owned();
            for k in 0..n {
                assert!(bottom.view((0, 2 * k), (2, 2)).iter().all(|&x| x == 0.0));
            }
            assert_eq!(bottom.view((0, 2 * n), (2, 2)).into_owned(), a0);
            let roots = roots_fn(&disc).unwrap();
            for want in [-1.0, -3.0] {
                assert!(roots.iter().any(|z| (z - c(want, 0.0)).norm() < 1e-10));
            }
        }
    }

    #[test]
    fn assemble_scalar_one_delay_n1() {
        let (a0, a1, tau) = (0.3, -0.7, 0.9);
        let disc = assemble(&scalar(&[a0, a1], &[0.0, tau]), 1).unwrap();
        let want = RMatrix::from_row_slice(2, 2, &[-1.0 / tau, 1.0 / tau, a1, a0]);
        assert!((&disc.a_n - want).abs().max() < 1e-15);
    }

    #[test]
    fn input_matrix_layout() {
        let sys = TimeDelaySystem::new(vec![0.0, 1.0], vec![RMatrix::identity(2, 2); 2]).unwrap();
        let disc = assemble(&sys, 2).unwrap();
        assert_eq!(disc.b_n.shape(), (6, 2));
        assert_eq!(
            disc.b_n.view((4, 0), (2, 2)).into_owned(),
            RMatrix::identity(2, 2)
        );
        assert!(disc.b_n.view((0, 0), (4, 2)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pn_examples() {
        let sys = scalar(&[0.0, 1.0], &[0.0, 1.0]);
        for n in [1, 3, 15] {
            let disc = assemble(&sys, n).unwrap();
            for tau in [0.0, 0.3, 1.0] {
                let p = eval_pn(&disc, tau, c(0.0, 0.0)).unwrap();
                assert_abs_diff_eq!(p.re, 1.0, epsilon = 1e-13);
                assert_abs_diff_eq!(p.im, 0.0, epsilon = 1e-13);
            }
        }
        let disc = assemble(&scalar(&[0.0, 1.0], &[0.0, 2.0]), 1).unwrap();
        for lam in [c(0.5, 0.0), c(-0.2, 1.3), c(3.0, -2.0)] {
            let p = eval_pn(&disc, 2.0, lam).unwrap();
            let want = Complex64::new(1.0, 0.0) / (lam * 2.0 + 1.0);
            assert_relative_eq!((p - want).norm(), 0.0, epsilon = 1e-14);
        }
        let disc = assemble(&sys, 15).unwrap();
        let p = eval_pn(&disc, 1.0, c(0.3, 0.0)).unwrap();
        assert!((p - c((-0.3f64).exp(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pn_is_proper() {
        let disc = assemble(&scalar(&[0.0, 1.0], &[0.0, 1.0]), 10).unwrap();
        let p = eval_pn(&disc, 1.0, c(1e6, 0.0)).unwrap();
        assert!(p.norm() < 1e-5, "{p}");
    }

    #[test]
    fn pn_converges_spectrally() {
        let sys = scalar(&[0.0, 1.0], &[0.0, 1.0]);
        let d5 = assemble(&sys, 5).unwrap();
        let d10 = assemble(&sys, 10).unwrap();
        for lam in [c(1.0, 1.0), c(-1.5, 0.5), c(0.0, 2.0), c(1.2, -1.4)] {
            for tau in [0.25, 0.6, 1.0] {
                let exact = (-lam * tau).exp();
                let e5 = (eval_pn(&d5, tau, lam).unwrap() - exact).norm();
                let e10 = (eval_pn(&d10, tau, lam).unwrap() - exact).norm();
                assert!(e10 * 10.0 <= e5, "lam={lam} tau={tau}: {e5} -> {e10}");
            }
        }
    }

    #[test]
    fn fn_examples() {
        let free =
            TimeDelaySystem::delay_free(RMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]))
                .unwrap();
        let disc = assemble(&free, 3).unwrap();
        let lam = c(0.4, -1.1);
        assert!(
            (eval_fn(&disc, lam).unwrap() - crate::model::eval_characteristic(&free, lam)).norm()
                < 1e-15
        );

        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let sys = random_system(&mut rng, 3, 3);
        let disc = assemble(&sys, 6).unwrap();
        let f0 = eval_fn(&disc, c(0.0, 0.0)).unwrap();
        assert!((f0 - crate::model::eval_characteristic(&sys, c(0.0, 0.0))).norm() < 1e-12);

        let disc = assemble(&scalar(&[0.0, 1.0], &[0.0, 1.0]), 1).unwrap();
        let f = eval_fn(&disc, c(1.0, 0.0)).unwrap()[(0, 0)];
        assert_abs_diff_eq!(f.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn spectral_abscissa_examples() {
        let free = TimeDelaySystem::delay_free(RMatrix::from_diagonal(
            &nalgebra::DVector::from_vec(vec![-1.0, -3.0]),
        ))
        .unwrap();
        assert_abs_diff_eq!(
            spectral_abscissa_fn(&assemble(&free, 0).unwrap()).unwrap(),
            -1.0,
            epsilon = 1e-14
        );

        // Principal roots from Newton on lambda + exp(-lambda) = 0 and
        // lambda - exp(-lambda) = 0 (see the oracle fixtures).
        let neg = assemble(&scalar(&[0.0, -1.0], &[0.0, 1.0]), 15).unwrap();
        assert_abs_diff_eq!(
            spectral_abscissa_fn(&neg).unwrap(),
            -0.318131505204764,
            epsilon = 1e-6
        );
        let pos = assemble(&scalar(&[0.0, 1.0], &[0.0, 1.0]), 15).unwrap();
        assert_abs_diff_eq!(
            spectral_abscissa_fn(&pos).unwrap(),
            0.567143290409784,
            epsilon = 1e-6
        );
    }

    #[test]
    fn transfer_function_matches_rational_form() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let sys = random_system(&mut rng, 4, 3);
            let n = rng.gen_range(1..=12);
            let disc = assemble(&sys, n).unwrap();
            let alpha = spectral_abscissa_fn(&disc).unwrap();
            let lam = c(
                alpha + 0.1 + rng.gen_range(0.0..2.0),
                rng.gen_range(-5.0..5.0),
            );
            let g = transfer_function(&disc, lam).unwrap();
            let finv = numerics::solve_complex(
                &eval_fn(&disc, lam).unwrap(),
                &CMatrix::identity(sys.n(), sys.n()),
            )
            .unwrap();
            assert!((&g - &finv).norm() <= 1e-8 * finv.norm());
        }
    }
}
