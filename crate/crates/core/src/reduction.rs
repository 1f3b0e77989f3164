//! Numerical ray reduction.
//!
//! A [`RayConstraint`] describes `J^{-1}(R+ mu)` for a conformal system. Points
//! are pulled onto it by a minimum-norm Newton iteration, and the kernel group
//! `K_mu` is removed with a [`TorusSlice`]: for a torus acting diagonally on
//! complex coordinates the slice makes a fixed set of "designated" coordinates
//! real and positive.
//!
//! Complex coordinates of a phase point are the consecutive pairs of the
//! stacked vector `(q, p)`, so on `R^8 = T*(R^2 x R^2)` they read
//! `(q_1, q_2, p_1, p_2)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{integrate, DynamicsError, IntegratorSpec};
use crate::lie::{
    check_reduction_hypotheses, kernel_algebra, Covector, HypothesisReport, LieError, Subalgebra,
};
use crate::linalg::{lstsq, null_space, rank};
use crate::phase::{omega, ConformalSystem, PhasePoint};

/// Designated coordinates with modulus below this are orbifold points.
pub const GAUGE_RADIUS_TOL: f64 = 1e-9;
/// Ray parameter must exceed this.
pub const RAY_T_MIN: f64 = 1e-8;
/// Singular-value threshold in the transversality test.
pub const TRANSVERSALITY_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const SAMPLE_ATTEMPTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("mu must be nonzero")]
    ZeroMu,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "Newton projection did not converge in {iterations} iterations (residual {residual:e})"
    )]
    Projection { iterations: usize, residual: f64 },
    #[error("momentum lies on the negative side of the ray (t = {t:e})")]
    RaySign { t: f64 },
    #[error("no gauge slice: {0}")]
    NoSlice(String),
    #[error("designated coordinate {coordinate} has radius {radius:e}; orbifold point")]
    Gauge { coordinate: usize, radius: f64 },
    #[error("gauge fixing failed at t = {time}: {source}")]
    GaugeAlongTrajectory {
        time: f64,
        #[source]
        source: Box<ReductionError>,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("could not sample a constraint point after {0} attempts")]
    Sampling(usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Complex coordinates `z_j = x_{2j} + i x_{2j+1}` of a stacked real vector.
pub fn to_complex(v: &DVector<f64>) -> Vec<Complex64> {
    (0..v.len() / 2)
        .map(|j| Complex64::new(v[2 * j], v[2 * j + 1]))
        .collect()
}

pub fn from_complex(z: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * z.len(), z.iter().flat_map(|c| [c.re, c.im]))
}

/// Gauge slice for a torus acting by `z_j -> exp(i (E^T s)_j) z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusSlice {
    weights: DMatrix<f64>,
    designated: Vec<usize>,
    designated_inv_t: DMatrix<f64>,
}

impl TorusSlice {
    /// `weights` is `k' x m`: row `a` holds the weights of kernel generator `a`.
    /// The designated coordinates are the lowest-index columns that keep the
    /// designated block nonsingular.
    pub fn new(weights: DMatrix<f64>) -> Result<Self, ReductionError> {
        let (k, m) = weights.shape();
        let scale = weights.amax().max(1.0);
        let mut designated = Vec::with_capacity(k);
        for j in 0..m {
            if designated.len() == k {
                break;
            }
            let mut cand = designated.clone();
            cand.push(j);
            if rank(&weights.select_columns(&cand), scale) == cand.len() {
                designated = cand;
            }
        }
        if designated.len() < k {
            return Err(ReductionError::NoSlice(
                "kernel weights are linearly dependent".into(),
            ));
        }
        let block = weights.select_columns(&designated);
        let designated_inv_t = block
            .transpose()
            .try_inverse()
            .ok_or_else(|| ReductionError::NoSlice("singular designated block".into()))?;
        Ok(TorusSlice {
            weights,
            designated,
            designated_inv_t,
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn designated(&self) -> &[usize] {
        &self.designated
    }

    pub fn kernel_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn act(&self, s: &DVector<f64>, z: &[Complex64]) -> Vec<Complex64> {
        let phase = self.weights.transpose() * s;
        z.iter()
            .zip(phase.iter())
            .map(|(zj, &a)| zj * Complex64::from_polar(1.0, a))
            .collect()
    }

    /// Generator of kernel basis element `a` at `z`: `i E_a ⊙ z`.
    pub fn generator(&self, a: usize, z: &[Complex64]) -> Vec<Complex64> {
        z.iter()
            .enumerate()
            .map(|(j, zj)| Complex64::i() * self.weights[(a, j)] * zj)
            .collect()
    }

    fn check_radii(&self, z: &[Complex64]) -> Result<(), ReductionError> {
        let scale = 1.0 + z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for &d in &self.designated {
            let radius = z[d].norm();
            if radius <= GAUGE_RADIUS_TOL * scale {
                return Err(ReductionError::Gauge {
                    coordinate: d,
                    radius,
                });
            }
        }
        Ok(())
    }

    /// Group parameters `s` taking `z` into the slice.
    pub fn gauge_parameters(&self, z: &[Complex64]) -> Result<DVector<f64>, ReductionError> {
        self.check_radii(z)?;
        let args = DVector::from_iterator(
            self.designated.len(),
            self.designated.iter().map(|&d| z[d].arg()),
        );
        Ok(-(&self.designated_inv_t * args))
    }

    pub fn fix(&self, z: &[Complex64]) -> Result<Vec<Complex64>, ReductionError> {
        let s = self.gauge_parameters(z)?;
        let mut out = self.act(&s, z);
        for &d in &self.designated {
            out[d] = Complex64::new(out[d].norm(), 0.0);
        }
        Ok(out)
    }

    /// Derivative of [`TorusSlice::fix`] at `z` in the direction `v`.
    pub fn differential(
        &self,
        z: &[Complex64],
        v: &[Complex64],
    ) -> Result<Vec<Complex64>, ReductionError> {
        let s = self.gauge_parameters(z)?;
        let fixed = self.act(&s, z);
        let dargs = DVector::from_iterator(
            self.designated.len(),
            self.designated
                .iter()
                .map(|&d| (v[d] * z[d].conj()).im / z[d].norm_sqr()),
        );
        let ds = -(&self.designated_inv_t * dargs);
        let dphase = self.weights.transpose() * ds;
        Ok(self
            .act(&s, v)
            .into_iter()
            .zip(fixed.iter().zip(dphase.iter()))
            .map(|(a, (f, &dp))| a + Complex64::i() * dp * f)
            .collect())
    }

    pub fn in_slice(&self, z: &[Complex64], tol: f64) -> bool {
        self.designated
            .iter()
            .all(|&d| z[d].im.abs() <= tol && z[d].re >= 0.0)
    }
}

/// `J^{-1}(R+ mu)` for a conformal system.
#[derive(Debug, Clone)]
pub struct RayConstraint {
    system: ConformalSystem,
    mu: Covector,
    perp: DMatrix<f64>,
    kernel: Subalgebra,
    slice: Option<TorusSlice>,
}

/// A gauge-fixed representative of a point of the reduced space.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub point: PhasePoint,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DimensionReport {
    pub ambient: usize,
    pub constraint: usize,
    pub kernel: usize,
    pub reduced: usize,
    /// `2n - p - d + 2` with `p = dim k_mu + 1`, `d = dim g`.
    pub formula: usize,
}

impl DimensionReport {
    pub fn consistent(&self) -> bool {
        self.reduced == self.formula && self.constraint == self.reduced + self.kernel
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackReport {
    pub samples: usize,
    pub max_discrepancy: f64,
    pub max_degeneracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub scenario: String,
    pub mu: Vec<f64>,
    pub dims: DimensionReport,
    pub hypotheses: HypothesisReport,
    pub pullback_error: f64,
    pub degeneracy_error: f64,
    pub pi_related_error: Option<f64>,
}

impl RayConstraint {
    pub fn new(system: ConformalSystem, mu: Covector) -> Result<Self, ReductionError> {
        let d = system.algebra().dim();
        if mu.dim() != d {
            return Err(ReductionError::DimensionMismatch {
                expected: d,
                got: mu.dim(),
            });
        }
        if mu.is_zero() {
            return Err(ReductionError::ZeroMu);
        }
        let kernel = kernel_algebra(system.algebra(), &mu)?;
        let row = DMatrix::from_row_slice(1, d, mu.coords());
        let perp = null_space(&row, mu.norm()).transpose();
        let slice = match system.action().torus_weights() {
            Some(w) => {
                let full = DMatrix::from_fn(w.nrows(), 2 * w.ncols(), |i, j| w[(i, j % w.ncols())]);
                Some(TorusSlice::new(kernel.basis.transpose() * full)?)
            }
            None => None,
        };
        Ok(RayConstraint {
            system,
            mu,
            perp,
            kernel,
            slice,
        })
    }

    pub fn system(&self) -> &ConformalSystem {
        &self.system
    }

    pub fn mu(&self) -> &Covector {
        &self.mu
    }

    pub fn kernel(&self) -> &Subalgebra {
        &self.kernel
    }

    pub fn slice(&self) -> Option<&TorusSlice> {
        self.slice.as_ref()
    }

    /// `t(x) = <J(x), mu> / <mu, mu>`.
    pub fn t(&self, x: &PhasePoint) -> f64 {
        let j = self.system.momentum_map(x);
        j.0.dot(&self.mu.0) / self.mu.0.norm_squared()
    }

    /// Components of `J(x)` orthogonal to `mu`, in an orthonormal basis of `mu^perp`.
    pub fn residual(&self, x: &PhasePoint) -> DVector<f64> {
        &self.perp * self.system.momentum_map(x).0
    }

    pub fn residual_jacobian(&self, x: &PhasePoint) -> DMatrix<f64> {
        &self.perp * self.system.momentum_jacobian(x)
    }

    fn residual_tol(&self, x: &PhasePoint) -> f64 {
        NEWTON_TOL * (1.0 + self.system.momentum_map(x).norm())
    }

    /// Whether `x` satisfies the constraint invariants.
    pub fn contains(&self, x: &PhasePoint) -> bool {
        let j = self.system.momentum_map(x);
        let t = self.t(x);
        (&j.0 - &self.mu.0 * t).norm() <= 1e-10 * (1.0 + j.norm()) && t > RAY_T_MIN
    }

    /// Minimum-norm Newton iteration onto `J^{-1}(R+ mu)`.
    pub fn project_to_ray(&self, x: &PhasePoint) -> Result<PhasePoint, ReductionError> {
        if x.dim() != self.system.dim() {
            return Err(ReductionError::DimensionMismatch {
                expected: self.system.dim(),
                got: x.dim(),
            });
        }
        let mut y = x.clone();
        let mut r = self.residual(&y);
        let mut iterations = 0;
        while r.norm() > self.residual_tol(&y) {
            if iterations == NEWTON_MAX_ITER {
                return Err(ReductionError::Projection {
                    iterations,
                    residual: r.norm(),
                });
            }
            let step = lstsq(&self.residual_jacobian(&y), &r);
            y = PhasePoint::from_stacked(&(y.stacked() - step));
            if !y.is_finite() {
                return Err(ReductionError::Projection {
                    iterations,
                    residual: f64::INFINITY,
                });
            }
            r = self.residual(&y);
            iterations += 1;
        }
        let t = self.t(&y);
        if t <= RAY_T_MIN {
            return Err(ReductionError::RaySign { t });
        }
        Ok(y)
    }

    /// Local freeness of `K_mu` at a constraint point: `dJ` restricted to
    /// `mu^perp` has full rank, and `t(x) > 0`.
    pub fn transversality_check(&self, x: &PhasePoint) -> bool {
        if self.t(x) <= RAY_T_MIN {
            return false;
        }
        let d = self.residual_jacobian(x);
        if d.nrows() == 0 {
            return true;
        }
        let sv = d.transpose().svd(false, false).singular_values;
        sv.iter().cloned().fold(f64::INFINITY, f64::min) > TRANSVERSALITY_TOL
    }

    fn require_slice(&self) -> Result<&TorusSlice, ReductionError> {
        self.slice.as_ref().ok_or_else(|| {
            ReductionError::NoSlice("the action is not a torus of plane rotations".into())
        })
    }

    pub fn gauge_fix(&self, x: &PhasePoint) -> Result<ReducedState, ReductionError> {
        let slice = self.require_slice()?;
        let z = to_complex(&x.stacked());
        let fixed = slice.fix(&z)?;
        Ok(ReducedState {
            point: PhasePoint::from_stacked(&from_complex(&fixed)),
            t: self.t(x),
        })
    }

    /// Kernel-group element `exp(sum s_a kappa_a)` applied to `x`.
    pub fn kernel_act(&self, s: &DVector<f64>, x: &PhasePoint) -> PhasePoint {
        let xi = &self.kernel.basis * s;
        self.system.action().act(&xi, x)
    }

    /// Projects a stacked vector onto the tangent space of the constraint at `x`.
    pub fn tangent_projection(&self, x: &PhasePoint, v: &DVector<f64>) -> DVector<f64> {
        let d = self.residual_jacobian(x);
        if d.nrows() == 0 {
            return v.clone();
        }
        v - d.transpose() * lstsq(&(&d * d.transpose()), &(&d * v))
    }

    /// Kernel generators at `x`, as columns of stacked vectors.
    pub fn kernel_generators(&self, x: &PhasePoint) -> DMatrix<f64> {
        let n2 = 2 * self.system.dim();
        let mut g = DMatrix::zeros(n2, self.kernel.dim());
        for a in 0..self.kernel.dim() {
            let xi = self.kernel.basis.column(a).into_owned();
            g.set_column(a, &self.system.generator(&xi, x).stacked());
        }
        g
    }

    /// Removes the kernel-generator component by least squares.
    pub fn horizontal(&self, x: &PhasePoint, v: &DVector<f64>) -> DVector<f64> {
        crate::linalg::reject(v, &self.kernel_generators(x))
    }

    /// Random constraint point: Gaussian draw followed by Newton projection,
    /// retried until transversal and off the orbifold locus.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PhasePoint, ReductionError> {
        let n = self.system.dim();
        for _ in 0..SAMPLE_ATTEMPTS {
            let x = PhasePoint {
                q: DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
                p: DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
            };
            if let Ok(y) = self.project_to_ray(&x) {
                let gauge_ok = self
                    .slice
                    .as_ref()
                    .is_none_or(|s| s.check_radii(&to_complex(&y.stacked())).is_ok());
                if self.transversality_check(&y) && gauge_ok {
                    return Ok(y);
                }
            }
        }
        Err(ReductionError::Sampling(SAMPLE_ATTEMPTS))
    }

    pub fn dimension_report(&self) -> DimensionReport {
        let n2 = 2 * self.system.dim();
        let d = self.system.algebra().dim();
        let k = self.kernel.dim();
        let constraint = n2 - (d - 1);
        DimensionReport {
            ambient: n2,
            constraint,
            kernel: k,
            reduced: constraint - k,
            formula: n2 + 2 - (k + 1) - d,
        }
    }

    pub fn hypotheses(&self) -> Result<HypothesisReport, ReductionError> {
        Ok(check_reduction_hypotheses(self.system.algebra(), &self.mu)?)
    }
}

/// Pullback identity `pi^* omega_red = i^* omega` on sampled constraint
/// points and tangent pairs, plus the degeneracy `omega(xi_M, v) = 0` for
/// `xi` in the kernel algebra. Sample `i` uses the seed `seed + i`.
pub fn reduced_form_pullback_error(
    constraint: &RayConstraint,
    samples: usize,
    seed: u64,
) -> Result<PullbackReport, ReductionError> {
    let slice = constraint.require_slice()?;
    let n2 = 2 * constraint.system.dim();
    let mut report = PullbackReport {
        samples,
        max_discrepancy: 0.0,
        max_degeneracy: 0.0,
    };
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let x = constraint.sample_point(&mut rng)?;
        let z = to_complex(&x.stacked());
        let mut draw = || {
            let v = DVector::from_fn(n2, |_, _| rng.sample(StandardNormal));
            constraint.tangent_projection(&x, &v)
        };
        let v = draw();
        let w = draw();
        let push = |u: &DVector<f64>| -> Result<DVector<f64>, ReductionError> {
            let h = constraint.horizontal(&x, u);
            Ok(from_complex(&slice.differential(&z, &to_complex(&h))?))
        };
        let reduced = omega(&push(&v)?, &push(&w)?);
        report.max_discrepancy = report.max_discrepancy.max((omega(&v, &w) - reduced).abs());
        let gens = constraint.kernel_generators(&x);
        for a in 0..gens.ncols() {
            let g = gens.column(a).into_owned();
            report.max_degeneracy = report
                .max_degeneracy
                .max(omega(&g, &v).abs())
                .max(omega(&g, &w).abs());
        }
    }
    Ok(report)
}

/// Coordinates of the reduced Rayleigh system from a gauge-fixed ambient
/// point: `q = (a, q_2)`, `p = (b, p_2)` where `q_1 = (a, 0)`, `p_1 = (b, 0)`.
pub fn rayleigh_reduced_coords(x: &PhasePoint) -> PhasePoint {
    PhasePoint::new(vec![x.q[0], x.q[2], x.q[3]], vec![x.p[0], x.p[2], x.p[3]])
}

pub fn rayleigh_reduced_embed(y: &PhasePoint) -> PhasePoint {
    PhasePoint::new(
        vec![y.q[0], 0.0, y.q[1], y.q[2]],
        vec![y.p[0], 0.0, y.p[1], y.p[2]],
    )
}

fn check_rayleigh_kernel(constraint: &RayConstraint) -> Result<(), ReductionError> {
    let b = &constraint.kernel.basis;
    let ok = constraint.system.name() == "rayleigh4" && b.ncols() == 1 && b[(1, 0)].abs() <= 1e-12;
    if ok {
        Ok(())
    } else {
        Err(ReductionError::Unsupported(
            "a reduced model is available only for rayleigh4 with mu on the second axis".into(),
        ))
    }
}

/// Sup-norm distance between the gauge-fixed ambient trajectory and the
/// trajectory of the reduced system started at the gauge-fixed `x0`.
pub fn pi_relatedness_error(
    constraint: &RayConstraint,
    x0: &PhasePoint,
    spec: &IntegratorSpec,
) -> Result<f64, ReductionError> {
    let (ambient, reduced) = pi_related_curves(constraint, x0, spec)?;
    Ok(ambient
        .iter()
        .zip(&reduced)
        .map(|(a, b)| (a.stacked() - b.stacked()).amax())
        .fold(0.0, f64::max))
}

/// The two reduced curves compared by [`pi_relatedness_error`].
pub fn pi_related_curves(
    constraint: &RayConstraint,
    x0: &PhasePoint,
    spec: &IntegratorSpec,
) -> Result<(Vec<PhasePoint>, Vec<PhasePoint>), ReductionError> {
    check_rayleigh_kernel(constraint)?;
    let traj = integrate(&constraint.system, x0, spec)?;
    let mut ambient = Vec::with_capacity(traj.len());
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let fixed = constraint
            .gauge_fix(x)
            .map_err(|e| ReductionError::GaugeAlongTrajectory {
                time: *t,
                source: Box::new(e),
            })?;
        ambient.push(rayleigh_reduced_coords(&fixed.point));
    }
    let reduced_system = ConformalSystem::rayleigh4_reduced();
    let reduced = integrate(&reduced_system, &ambient[0], spec)?;
    Ok((ambient, reduced.states))
}
