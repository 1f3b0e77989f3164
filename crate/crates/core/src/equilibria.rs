//! Relative equilibria: points where `d(J^xi - H) = f theta`, i.e. where the
//! conformal field coincides with an infinitesimal generator.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{integrate, DynamicsError, IntegratorSpec};
use crate::lie::{ray_isotropy_algebra, Covector, LieError};
use crate::linalg::{lstsq, null_space, reject};
use crate::phase::{ConformalSystem, PhasePoint};
use crate::reduction::RAY_T_MIN;

/// Residual bound for an accepted relative equilibrium.
pub const RE_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100;
const LAMBDA_INIT: f64 = 1e-3;
const STOP_TOL: f64 = 1e-14;
const WEAK_GENERATOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriaError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial guess is not finite")]
    NonFinite,
    #[error("solver stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("converged momentum is not on the open ray (t = {t:e})")]
    RaySign { t: f64 },
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEquilibrium {
    pub x: PhasePoint,
    /// Velocity in the coordinates of the full algebra.
    pub xi: DVector<f64>,
    /// Velocity in the basis of the ray isotropy algebra used by the solver.
    pub xi_coeffs: DVector<f64>,
    pub residual: f64,
    pub t: f64,
}

/// Row of the `equilibria` report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumRow {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub residual: f64,
    pub flow_error: f64,
}

/// `(d(J^xi - H)/dq - f p, d(J^xi - H)/dp)`.
pub fn re_residual(system: &ConformalSystem, x: &PhasePoint, xi: &DVector<f64>) -> DVector<f64> {
    let a = system.action().matrix(xi);
    let (hq, hp) = system.hamiltonian().gradient(x);
    let f = system.f(x);
    let rq = a.transpose() * &x.p - hq - &x.p * f;
    let rp = &a * &x.q - hp;
    PhasePoint { q: rq, p: rp }.stacked()
}

fn ray_residual(system: &ConformalSystem, perp: &DMatrix<f64>, x: &PhasePoint) -> DVector<f64> {
    perp * system.momentum_map(x).0
}

struct Problem<'a> {
    system: &'a ConformalSystem,
    basis: &'a DMatrix<f64>,
    perp: DMatrix<f64>,
}

impl Problem<'_> {
    fn n2(&self) -> usize {
        2 * self.system.dim()
    }

    fn split(&self, u: &DVector<f64>) -> (PhasePoint, DVector<f64>) {
        let n2 = self.n2();
        let x = PhasePoint::from_stacked(&u.rows(0, n2).into_owned());
        let c = u.rows(n2, u.len() - n2).into_owned();
        (x, c)
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let (x, c) = self.split(u);
        let r = re_residual(self.system, &x, &(self.basis * &c));
        let g = ray_residual(self.system, &self.perp, &x);
        let mut out = DVector::zeros(r.len() + g.len());
        out.rows_mut(0, r.len()).copy_from(&r);
        out.rows_mut(r.len(), g.len()).copy_from(&g);
        out
    }

    fn jacobian(&self, u: &DVector<f64>, r0_len: usize) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(r0_len, u.len());
        for i in 0..u.len() {
            let h = 1e-7 * (1.0 + u[i].abs());
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            jac.set_column(i, &((self.residual(&up) - self.residual(&um)) / (2.0 * h)));
        }
        jac
    }
}

/// Levenberg-Marquardt on `re_residual` augmented with the ray constraint,
/// with `xi` restricted to the ray isotropy algebra of `mu`.
pub fn solve_re(
    system: &ConformalSystem,
    mu: &Covector,
    x_init: &PhasePoint,
    xi_init: &DVector<f64>,
) -> Result<RelativeEquilibrium, EquilibriaError> {
    let basis = ray_isotropy_algebra(system.algebra(), mu)?.basis;
    solve_re_with_basis(system, mu, &basis, x_init, xi_init)
}

/// As [`solve_re`] with an explicit basis (columns) of the velocity subspace.
pub fn solve_re_with_basis(
    system: &ConformalSystem,
    mu: &Covector,
    basis: &DMatrix<f64>,
    x_init: &PhasePoint,
    xi_init: &DVector<f64>,
) -> Result<RelativeEquilibrium, EquilibriaError> {
    let d = system.algebra().dim();
    if mu.dim() != d {
        return Err(EquilibriaError::DimensionMismatch {
            expected: d,
            got: mu.dim(),
        });
    }
    if xi_init.len() != d {
        return Err(EquilibriaError::DimensionMismatch {
            expected: d,
            got: xi_init.len(),
        });
    }
    if x_init.dim() != system.dim() {
        return Err(EquilibriaError::DimensionMismatch {
            expected: system.dim(),
            got: x_init.dim(),
        });
    }
    if !x_init.is_finite() || xi_init.iter().any(|v| !v.is_finite()) {
        return Err(EquilibriaError::NonFinite);
    }
    let row = DMatrix::from_row_slice(1, d, mu.coords());
    let perp = null_space(&row, mu.norm()).transpose();
    let problem = Problem {
        system,
        basis,
        perp: perp.clone(),
    };
    let n2 = problem.n2();
    let mut u = DVector::zeros(n2 + basis.ncols());
    u.rows_mut(0, n2).copy_from(&x_init.stacked());
    u.rows_mut(n2, basis.ncols())
        .copy_from(&lstsq(basis, xi_init));
    let mut iterations = 0;
    u = levenberg_marquardt(&problem, u, &mut iterations);
    let (mut x, c) = problem.split(&u);
    let mut xi = basis * c;

    // Velocity directions whose generator nearly vanishes at the candidate
    // leave the residual almost flat, and the iteration can creep along them
    // instead of converging. Freeze them at zero and solve again.
    if let Some(strong) = strong_directions(system, basis, &x) {
        let reduced_basis = basis * &strong;
        let weak_part = reject(&xi, &reduced_basis).norm();
        if weak_part > 1e-12 * (1.0 + xi.norm()) {
            let frozen = Problem {
                system,
                basis: &reduced_basis,
                perp,
            };
            let mut v = DVector::zeros(n2 + reduced_basis.ncols());
            v.rows_mut(0, n2).copy_from(&x.stacked());
            v.rows_mut(n2, reduced_basis.ncols())
                .copy_from(&lstsq(&reduced_basis, &xi));
            let v = levenberg_marquardt(&frozen, v, &mut iterations);
            if frozen.residual(&v).norm() <= problem.residual(&u).norm().max(RE_TOL) {
                let (y, c) = frozen.split(&v);
                x = y;
                xi = &reduced_basis * c;
            }
        }
    }

    let xi = minimal_velocity(system, &x, &xi);
    let residual = re_residual(system, &x, &xi).norm();
    let ray = ray_residual(system, &problem.perp, &x).norm();
    if residual > RE_TOL || ray > RE_TOL {
        return Err(EquilibriaError::NotConverged {
            iterations,
            residual: residual.max(ray),
        });
    }
    let t = system.momentum_map(&x).0.dot(&mu.0) / mu.0.norm_squared();
    if t <= RAY_T_MIN {
        return Err(EquilibriaError::RaySign { t });
    }
    Ok(RelativeEquilibrium {
        xi_coeffs: lstsq(basis, &xi),
        x,
        xi,
        residual,
        t,
    })
}

/// Smallest `xi` with the same residual: the residual is affine in `xi`, so
/// directions whose generator vanishes at `x` are removed.
fn minimal_velocity(system: &ConformalSystem, x: &PhasePoint, xi: &DVector<f64>) -> DVector<f64> {
    let d = xi.len();
    let mut gens = DMatrix::zeros(2 * system.dim(), d);
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        gens.set_column(i, &system.generator(&e, x).stacked());
    }
    let free = null_space(&gens, 1.0 + x.norm());
    reject(xi, &free)
}

/// Coefficient directions (columns) whose generators at `x` are not small,
/// or `None` when every direction is strong.
fn strong_directions(
    system: &ConformalSystem,
    basis: &DMatrix<f64>,
    x: &PhasePoint,
) -> Option<DMatrix<f64>> {
    let r = basis.ncols();
    if r == 0 {
        return None;
    }
    let mut gens = DMatrix::zeros(2 * system.dim(), r);
    for i in 0..r {
        gens.set_column(
            i,
            &system.generator(&basis.column(i).into_owned(), x).stacked(),
        );
    }
    let svd = crate::linalg::padded(&gens).svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let cut = WEAK_GENERATOR * (1.0 + x.norm());
    let keep: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if keep.len() == r {
        None
    } else {
        Some(crate::linalg::columns_to_matrix(r, &keep))
    }
}

fn levenberg_marquardt(
    problem: &Problem<'_>,
    mut u: DVector<f64>,
    iterations: &mut usize,
) -> DVector<f64> {
    let mut r = problem.residual(&u);
    let mut lambda = LAMBDA_INIT;
    let start = *iterations;
    while r.norm() > STOP_TOL && *iterations - start < MAX_ITER {
        *iterations += 1;
        let jac = problem.jacobian(&u, r.len());
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e12 {
            let mut m = jtj.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += lambda;
            }
            let Some(ch) = m.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let trial = &u - ch.solve(&g);
            let rt = problem.residual(&trial);
            if rt.norm().is_finite() && rt.norm() < r.norm() {
                u = trial;
                r = rt;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    u
}

/// Concurrent multi-start version of [`solve_re`].
pub fn solve_re_multistart(
    system: &ConformalSystem,
    mu: &Covector,
    starts: &[(PhasePoint, DVector<f64>)],
) -> Vec<Result<RelativeEquilibrium, EquilibriaError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = starts
            .iter()
            .map(|(x, xi)| s.spawn(move || solve_re(system, mu, x, xi)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    })
}

/// Sup distance between the integrated trajectory from `re.x` and the orbit
/// curve `exp(t xi) . x`.
pub fn verify_re_flow(
    system: &ConformalSystem,
    re: &RelativeEquilibrium,
    t_final: f64,
    dt: f64,
) -> Result<f64, EquilibriaError> {
    if t_final == 0.0 {
        return Ok(0.0);
    }
    let traj = integrate(
        system,
        &re.x,
        &IntegratorSpec::rk4(dt.min(t_final), t_final),
    )?;
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, x)| x.distance(&system.action().act(&(&re.xi * *t), &re.x)))
        .fold(0.0, f64::max))
}

/// Largest `|Phi_{t + tau}(x) - g Phi_t(x)|` over `t` in `[0, horizon]`, with
/// `g = exp(xi)`. `tau` and `horizon` are rounded to multiples of `dt`.
pub fn relative_periodic_defect(
    system: &ConformalSystem,
    x: &PhasePoint,
    xi: &DVector<f64>,
    tau: f64,
    horizon: f64,
    dt: f64,
) -> Result<f64, EquilibriaError> {
    let shift = (tau / dt).round() as usize;
    let span = (horizon / dt).round() as usize;
    let total = (shift + span).max(1);
    let traj = integrate(system, x, &IntegratorSpec::rk4(dt, total as f64 * dt))?;
    Ok((0..=span)
        .map(|i| traj.states[i + shift].distance(&system.action().act(xi, &traj.states[i])))
        .fold(0.0, f64::max))
}

pub fn is_relative_periodic(
    system: &ConformalSystem,
    x: &PhasePoint,
    xi: &DVector<f64>,
    tau: f64,
    horizon: f64,
    dt: f64,
    tol: f64,
) -> Result<bool, EquilibriaError> {
    Ok(relative_periodic_defect(system, x, xi, tau, horizon, dt)? <= tol)
}

/// Member of the Rayleigh family: `q_2 = (0, alpha)`, `p_2 = (-alpha, 0)`.
pub fn rayleigh_family_point(alpha: f64) -> PhasePoint {
    PhasePoint::new(vec![0.0, 0.0, 0.0, alpha], vec![0.0, 0.0, -alpha, 0.0])
}

/// Distance to the closure of the Rayleigh family
/// `{q_1 = p_1 = 0, p_2 = A q_2}`, `A` the quarter rotation.
pub fn rayleigh_family_distance(x: &PhasePoint) -> f64 {
    let a_q2 = [-x.q[3], x.q[2]];
    let d2 = (x.p[2] - a_q2[0]).powi(2) + (x.p[3] - a_q2[1]).powi(2);
    (x.q[0].powi(2) + x.q[1].powi(2) + x.p[0].powi(2) + x.p[1].powi(2) + d2 / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xi(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn mu() -> Covector {
        Covector::new(vec![0.0, 1.0])
    }

    #[test]
    fn family_has_zero_residual() {
        let sys = ConformalSystem::rayleigh4();
        for alpha in [0.5, 1.0, 2.0, 5.0] {
            let r = re_residual(&sys, &rayleigh_family_point(alpha), &xi(0.0, 1.0));
            assert!(r.amax() <= 1e-12);
        }
    }

    #[test]
    fn residual_nonzero_without_velocity() {
        // Critical point of H in q with p != 0 and f != 0: first block is -f p.
        let sys = ConformalSystem::harmonic(2, 0.5);
        let x = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let r = re_residual(&sys, &x, &DVector::zeros(1));
        assert_eq!(r[0], -0.5);
    }

    #[test]
    fn residual_vanishes_iff_field_is_generator() {
        let sys = ConformalSystem::rayleigh4();
        let x = rayleigh_family_point(1.3);
        let v = sys.conformal_field(&x);
        let g = sys.generator(&xi(0.0, 1.0), &x);
        assert!((v.stacked() - g.stacked()).amax() <= 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = PhasePoint::new(
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let w = xi(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let r = re_residual(&sys, &x, &w);
            let diff = sys.generator(&w, &x).stacked() - sys.conformal_field(&x).stacked();
            assert!(r.norm() > 1e-6 && diff.norm() > 1e-6);
            assert!((r.norm() - diff.norm()).abs() <= 1e-12);
        }
    }

    #[test]
    fn solver_converges_to_family() {
        let sys = ConformalSystem::rayleigh4();
        let x0 = PhasePoint::new(vec![0.1, -0.1, 0.05, 0.9], vec![0.1, 0.0, -1.1, 0.05]);
        let re = solve_re(&sys, &mu(), &x0, &xi(0.1, 0.9)).unwrap();
        assert!(re.residual <= RE_TOL);
        assert!(rayleigh_family_distance(&re.x) <= 1e-8);
        assert!((re.xi.clone() - xi(0.0, 1.0)).amax() <= 1e-8);
    }

    #[test]
    fn solver_exact_start() {
        let sys = ConformalSystem::rayleigh4();
        let x = rayleigh_family_point(1.0);
        let re = solve_re(&sys, &mu(), &x, &xi(0.0, 1.0)).unwrap();
        assert_eq!(re.x, x);
        assert_eq!(re.residual, 0.0);
    }

    #[test]
    fn solver_rejects_trivial_point() {
        let sys = ConformalSystem::rayleigh4();
        let x = PhasePoint::new(vec![0.0, 0.01, 0.0, 0.0], vec![0.01, 0.0, 0.0, 0.0]);
        assert!(solve_re(&sys, &mu(), &x, &xi(0.0, 1.0)).is_err());
    }

    #[test]
    fn flow_stays_on_orbit() {
        let sys = ConformalSystem::rayleigh4();
        let re = solve_re(&sys, &mu(), &rayleigh_family_point(1.0), &xi(0.0, 1.0)).unwrap();
        assert_eq!(verify_re_flow(&sys, &re, 0.0, 1e-3).unwrap(), 0.0);
        assert!(verify_re_flow(&sys, &re, 1.0, 1e-3).unwrap() <= 1e-6);

        // Circular orbit of the undamped isotropic oscillator.
        let h = ConformalSystem::harmonic(2, 0.0);
        let x = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 1.0]);
        let re = solve_re(
            &h,
            &Covector::new(vec![1.0]),
            &x,
            &DVector::from_vec(vec![0.5]),
        )
        .unwrap();
        assert!((re.xi[0] - 1.0).abs() < 1e-8);
        assert!(verify_re_flow(&h, &re, 1.0, 1e-3).unwrap() <= 1e-6);
    }

    #[test]
    fn relative_periodicity() {
        use std::f64::consts::PI;
        let h = ConformalSystem::harmonic(2, 0.0);
        let x = PhasePoint::new(vec![1.0, 0.3], vec![-0.2, 0.5]);
        let dt = 2.0 * PI / 2000.0;
        assert!(is_relative_periodic(&h, &x, &DVector::zeros(1), 2.0 * PI, 1.0, dt, 1e-8).unwrap());
        assert!(!is_relative_periodic(&h, &x, &DVector::zeros(1), PI, 1.0, dt, 1e-8).unwrap());
        let sys = ConformalSystem::rayleigh4();
        let tau = 0.5;
        let ok = is_relative_periodic(
            &sys,
            &rayleigh_family_point(1.0),
            &xi(0.0, tau),
            tau,
            1.0,
            1e-3,
            1e-8,
        )
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn basis_independence() {
        let sys = ConformalSystem::rayleigh4();
        let x0 = PhasePoint::new(vec![0.05, 0.0, 0.1, 1.1], vec![0.0, 0.02, -0.9, 0.1]);
        let a = solve_re(&sys, &mu(), &x0, &xi(0.0, 0.8)).unwrap();
        let other = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        let b = solve_re_with_basis(&sys, &mu(), &other, &x0, &xi(0.0, 0.8)).unwrap();
        assert!((&other * &b.xi_coeffs - &b.xi).amax() <= 1e-9);
        assert!((a.xi - b.xi).amax() <= 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn family_distance_vanishes_on_rotated_family(alpha in 0.1f64..5.0, angle in -3.0f64..3.0) {
            let sys = ConformalSystem::rayleigh4();
            let x = sys.action().act(&xi(0.7, angle), &rayleigh_family_point(alpha));
            prop_assert!(rayleigh_family_distance(&x) <= 1e-12 * (1.0 + alpha));
            prop_assert!(re_residual(&sys, &x, &xi(0.0, 1.0)).amax() <= 1e-12 * (1.0 + alpha));
        }
    }
}
