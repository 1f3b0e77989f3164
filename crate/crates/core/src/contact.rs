//! Round spheres `S^{2m-1} ⊂ C^m` with weighted torus actions.
//!
//! Points and tangent vectors are real `2m`-vectors holding consecutive
//! `(Re z_j, Im z_j)` pairs. Conventions:
//!
//! * contact form `eta_z(v) = <-i z, v>` (real inner product), Reeb field `-i z`;
//! * `d eta = -2 omega_std` with `omega_std(a, b) = <i a, b>`;
//! * generator of `xi` in the torus algebra: `xi_M(z) = -i (xi^T W) ⊙ z`, so that
//!   `eta(xi_M) = <W |z|^2, xi>` and the momentum map is `J(z) = W |z|^2`;
//! * symplectic cone `S x R+` with form `d(r^2 eta)` and momentum `r^2 J`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::lie::{check_reduction_hypotheses, kernel_algebra, Covector, LieAlgebra, LieError};
use crate::linalg::{lstsq, null_space, reject};
use crate::reduction::{from_complex, to_complex, ReductionError, TorusSlice};

/// Tolerance on `|z| = 1` for stored sphere points.
pub const SPHERE_TOL: f64 = 1e-12;
/// Tangency tolerance for cone tangent vectors.
pub const TANGENCY_TOL: f64 = 1e-10;
/// Residual bound `|J(z) - t mu|` for sampled level-set points.
pub const LEVEL_TOL: f64 = 1e-10;
const MIN_RAY_T: f64 = 1e-8;
const MAX_REJECTION_RATE: f64 = 0.999;
const REEB_SAMPLES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point is not on the unit sphere (|z| = {norm})")]
    NotOnSphere { norm: f64 },
    #[error("vector is not tangent (defect {defect:e})")]
    NotTangent { defect: f64 },
    #[error("invalid sphere: {0}")]
    Invalid(String),
    #[error("unknown sphere scenario {0:?}")]
    UnknownScenario(String),
    #[error("mu must be nonzero")]
    ZeroMu,
    #[error("level set J^-1(R+ mu) is empty")]
    Infeasible,
    #[error("rejection rate exceeded 99.9% ({rejected} rejected, {accepted} accepted)")]
    Sampling { rejected: usize, accepted: usize },
    #[error("reduction hypotheses fail for this mu")]
    Hypotheses,
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactSphere {
    m: usize,
    weights: DMatrix<f64>,
}

/// A catalog sphere together with its default `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereScenario {
    pub key: String,
    pub sphere: ContactSphere,
    pub mu: Covector,
}

impl SphereScenario {
    /// `s7-unweighted`, `s7-weighted:<l0>:<l1>`, `s3-cone`.
    pub fn from_catalog(key: &str) -> Result<Self, ContactError> {
        let unknown = || ContactError::UnknownScenario(key.to_string());
        let (sphere, mu) = match key {
            "s7-unweighted" => (
                ContactSphere::new(
                    4,
                    DMatrix::from_row_slice(2, 4, &[-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]),
                )?,
                vec![1.0, 1.0],
            ),
            "s3-cone" => (
                ContactSphere::new(2, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]))?,
                vec![1.0],
            ),
            _ => {
                let parts: Vec<&str> = key.split(':').collect();
                if parts.len() != 3 || parts[0] != "s7-weighted" {
                    return Err(unknown());
                }
                let l0: f64 = parts[1].parse().map_err(|_| unknown())?;
                let l1: f64 = parts[2].parse().map_err(|_| unknown())?;
                if !(l0 > 0.0 && l1 > 0.0 && l0.is_finite() && l1.is_finite()) {
                    return Err(ContactError::Invalid("weights must be positive".into()));
                }
                (
                    ContactSphere::new(
                        4,
                        DMatrix::from_row_slice(2, 4, &[l0, 0.0, 0.0, 0.0, 0.0, l1, 0.0, 0.0]),
                    )?,
                    vec![1.0, 1.0],
                )
            }
        };
        Ok(SphereScenario {
            key: key.to_string(),
            sphere,
            mu: Covector::new(mu),
        })
    }
}

/// Point of the symplectic cone `S x R+`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    pub base: DVector<f64>,
    pub r: f64,
}

/// Tangent vector to the cone: sphere part plus radial component.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeTangent {
    pub sphere: DVector<f64>,
    pub radial: f64,
}

fn times_i(v: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(
        v.len(),
        |k, _| if k % 2 == 0 { -v[k + 1] } else { v[k - 1] },
    )
}

/// `eta_z(v) = <-i z, v>`; also the ambient extension to `C^m`.
pub fn eta(z: &DVector<f64>, v: &DVector<f64>) -> f64 {
    -times_i(z).dot(v)
}

/// `omega_std(a, b) = sum dx_j ∧ dy_j (a, b)`.
pub fn omega_std(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    times_i(a).dot(b)
}

/// Exterior derivative of `eta`, the constant form `-2 omega_std`.
pub fn d_eta(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    -2.0 * omega_std(u, v)
}

/// `d eta(u, v) = D_u(eta(v)) - D_v(eta(u))` by central differences of the
/// ambient extension of `eta` with constant vector fields.
pub fn d_eta_finite_difference(
    z: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    h: f64,
) -> f64 {
    let deriv = |dir: &DVector<f64>, arg: &DVector<f64>| {
        (eta(&(z + dir * h), arg) - eta(&(z - dir * h), arg)) / (2.0 * h)
    };
    deriv(u, v) - deriv(v, u)
}

/// Symplectic cone form `d(r^2 eta) = 2 r dr ∧ eta + r^2 d eta`.
pub fn cone_form_eval(
    cp: &ConePoint,
    v1: &ConeTangent,
    v2: &ConeTangent,
) -> Result<f64, ContactError> {
    for v in [v1, v2] {
        if v.sphere.len() != cp.base.len() {
            return Err(ContactError::DimensionMismatch {
                expected: cp.base.len(),
                got: v.sphere.len(),
            });
        }
        let defect = cp.base.dot(&v.sphere).abs();
        if defect > TANGENCY_TOL * (1.0 + v.sphere.norm()) {
            return Err(ContactError::NotTangent { defect });
        }
    }
    Ok(cone_form_unchecked(cp, v1, v2))
}

fn cone_form_unchecked(cp: &ConePoint, v1: &ConeTangent, v2: &ConeTangent) -> f64 {
    let r = cp.r;
    2.0 * r * (v1.radial * eta(&cp.base, &v2.sphere) - v2.radial * eta(&cp.base, &v1.sphere))
        + r * r * d_eta(&v1.sphere, &v2.sphere)
}

impl ContactSphere {
    /// `weights` is `k x m`: row `i` holds the weights of torus generator `i`.
    pub fn new(m: usize, weights: DMatrix<f64>) -> Result<Self, ContactError> {
        if m == 0 {
            return Err(ContactError::Invalid(
                "complex dimension must be positive".into(),
            ));
        }
        if weights.ncols() != m {
            return Err(ContactError::DimensionMismatch {
                expected: m,
                got: weights.ncols(),
            });
        }
        if weights.nrows() == 0 {
            return Err(ContactError::Invalid(
                "at least one torus generator is required".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(ContactError::Invalid("weights must be finite".into()));
        }
        Ok(ContactSphere { m, weights })
    }

    pub fn complex_dim(&self) -> usize {
        self.m
    }

    pub fn torus_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn algebra(&self) -> LieAlgebra {
        LieAlgebra::abelian(self.torus_dim())
    }

    pub fn check_point(&self, z: &DVector<f64>) -> Result<(), ContactError> {
        if z.len() != 2 * self.m {
            return Err(ContactError::DimensionMismatch {
                expected: 2 * self.m,
                got: z.len(),
            });
        }
        let norm = z.norm();
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(ContactError::NotOnSphere { norm });
        }
        Ok(())
    }

    /// Unit vector from complex coordinates.
    pub fn point(&self, z: &[Complex64]) -> Result<DVector<f64>, ContactError> {
        let v = from_complex(z);
        let n = v.norm();
        if z.len() != self.m || n == 0.0 {
            return Err(ContactError::Invalid(
                "need m nonzero complex coordinates".into(),
            ));
        }
        Ok(v / n)
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::<f64>::from_fn(2 * self.m, |_, _| rng.sample(StandardNormal)).normalize()
    }

    /// `|z_j|^2` for each complex coordinate.
    pub fn moduli_sq(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.m, |j, _| z[2 * j].powi(2) + z[2 * j + 1].powi(2))
    }

    /// Coordinate weights `xi^T W`.
    pub fn coordinate_weights(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.weights.transpose() * xi
    }

    pub fn reeb_field(&self, z: &DVector<f64>) -> DVector<f64> {
        -times_i(z)
    }

    /// Exact Reeb flow `z -> exp(-i t) z`.
    pub fn reeb_flow(&self, z: &DVector<f64>, t: f64) -> DVector<f64> {
        let rot = Complex64::from_polar(1.0, -t);
        from_complex(&to_complex(z).iter().map(|c| c * rot).collect::<Vec<_>>())
    }

    /// `xi_M(z) = -i (xi^T W) ⊙ z`.
    pub fn generator(&self, xi: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let w = self.coordinate_weights(xi);
        let iz = times_i(z);
        DVector::from_fn(2 * self.m, |k, _| -w[k / 2] * iz[k])
    }

    /// Torus element `exp(xi)`: `z_j -> exp(-i (xi^T W)_j) z_j`.
    pub fn torus_act(&self, xi: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let w = self.coordinate_weights(xi);
        let zc = to_complex(z);
        from_complex(
            &zc.iter()
                .zip(w.iter())
                .map(|(c, &wj)| c * Complex64::from_polar(1.0, -wj))
                .collect::<Vec<_>>(),
        )
    }

    /// `J(z) = W |z|^2`.
    pub fn contact_momentum(&self, z: &DVector<f64>) -> Covector {
        Covector(&self.weights * self.moduli_sq(z))
    }

    /// Differential of `J_i` applied to `v`: rows of the returned matrix are `dJ_i`.
    pub fn momentum_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.torus_dim(), 2 * self.m, |i, k| {
            2.0 * self.weights[(i, k / 2)] * z[k]
        })
    }

    /// `max_t |J(Phi^R_t(z)) - J(z)|` over a uniform grid of `[0, t_final]`.
    pub fn reeb_invariance_error(&self, z: &DVector<f64>, t_final: f64) -> f64 {
        if t_final == 0.0 {
            return 0.0;
        }
        let j0 = self.contact_momentum(z).0;
        (0..=REEB_SAMPLES)
            .map(|i| {
                let t = t_final * i as f64 / REEB_SAMPLES as f64;
                (self.contact_momentum(&self.reeb_flow(z, t)).0 - &j0).amax()
            })
            .fold(0.0, f64::max)
    }

    /// Representative of the Hopf class: the last nonzero coordinate is made real positive.
    pub fn hopf_project(&self, z: &DVector<f64>) -> DVector<f64> {
        let zc = to_complex(z);
        let Some(last) = zc.iter().rposition(|c| c.norm() > 1e-12) else {
            return z.clone();
        };
        let rot = Complex64::from_polar(1.0, -zc[last].arg());
        let mut out: Vec<Complex64> = zc.iter().map(|c| c * rot).collect();
        out[last] = Complex64::new(zc[last].norm(), 0.0);
        from_complex(&out)
    }

    /// Cone momentum `r^2 J(z)`, the momentum of the lifted action for `theta = r^2 eta`.
    pub fn cone_momentum(&self, cp: &ConePoint) -> Covector {
        Covector(self.contact_momentum(&cp.base).0 * (cp.r * cp.r))
    }

    /// Kernel algebra of `mu` inside the torus algebra, as columns.
    pub fn kernel_basis(&self, mu: &Covector) -> Result<DMatrix<f64>, ContactError> {
        self.check_mu(mu)?;
        Ok(kernel_algebra(&self.algebra(), mu)?.basis)
    }

    fn check_mu(&self, mu: &Covector) -> Result<(), ContactError> {
        if mu.dim() != self.torus_dim() {
            return Err(ContactError::DimensionMismatch {
                expected: self.torus_dim(),
                got: mu.dim(),
            });
        }
        if mu.is_zero() {
            return Err(ContactError::ZeroMu);
        }
        Ok(())
    }

    /// Gauge slice for the kernel group in this module's sign convention.
    pub fn kernel_slice(&self, mu: &Covector) -> Result<TorusSlice, ContactError> {
        let kappa = self.kernel_basis(mu)?;
        Ok(TorusSlice::new(-(kappa.transpose() * &self.weights))?)
    }

    fn perp(&self, mu: &Covector) -> DMatrix<f64> {
        let row = DMatrix::from_row_slice(1, mu.dim(), mu.coords());
        null_space(&row, mu.norm()).transpose()
    }

    /// Ray parameter `t = <J, mu> / |mu|^2`.
    pub fn ray_parameter(&self, z: &DVector<f64>, mu: &Covector) -> f64 {
        self.contact_momentum(z).0.dot(&mu.0) / mu.0.norm_squared()
    }

    pub fn level_residual(&self, z: &DVector<f64>, mu: &Covector) -> f64 {
        let t = self.ray_parameter(z, mu);
        (self.contact_momentum(z).0 - &mu.0 * t).norm()
    }

    /// Largest ray parameter on the level set, by linear programming over the
    /// simplex of `|z_j|^2`; `None` when the level set is empty.
    pub fn max_ray_parameter(&self, mu: &Covector) -> Result<Option<f64>, ContactError> {
        self.check_mu(mu)?;
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let s: Vec<_> = (0..self.m)
            .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
            .collect();
        let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        for i in 0..self.torus_dim() {
            let mut expr: Vec<(minilp::Variable, f64)> = s
                .iter()
                .enumerate()
                .map(|(j, &v)| (v, self.weights[(i, j)]))
                .collect();
            expr.push((t, -mu.0[i]));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 0.0);
        }
        let ones: Vec<(minilp::Variable, f64)> = s.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
        match lp.solve() {
            Ok(sol) if sol.objective() > MIN_RAY_T => Ok(Some(sol.objective())),
            Ok(_) | Err(minilp::Error::Infeasible) => Ok(None),
            Err(minilp::Error::Unbounded) => {
                Err(ContactError::Invalid("unbounded ray parameter".into()))
            }
        }
    }

    /// One attempt at a level-set point: Gaussian direction, moduli projected
    /// onto `{P_perp W s = 0, sum s = 1}`, phases kept.
    fn try_level_point<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mu: &Covector,
        constraints: &DMatrix<f64>,
        rhs: &DVector<f64>,
    ) -> Option<DVector<f64>> {
        let z = self.random_point(rng);
        let s = self.moduli_sq(&z);
        let correction = lstsq(constraints, &(constraints * &s - rhs));
        let s = s - correction;
        if s.iter().any(|&v| v < 0.0) {
            return None;
        }
        let zc = to_complex(&z);
        let out: Vec<Complex64> = zc
            .iter()
            .zip(s.iter())
            .map(|(c, &sj)| {
                let phase = if c.norm() > 0.0 {
                    c / c.norm()
                } else {
                    Complex64::new(1.0, 0.0)
                };
                phase * sj.sqrt()
            })
            .collect();
        let point = from_complex(&out).normalize();
        let ok = self.ray_parameter(&point, mu) > MIN_RAY_T
            && self.level_residual(&point, mu) <= LEVEL_TOL
            && (point.norm() - 1.0).abs() <= SPHERE_TOL;
        ok.then_some(point)
    }

    fn level_constraints(&self, mu: &Covector) -> (DMatrix<f64>, DVector<f64>) {
        let pw = self.perp(mu) * &self.weights;
        let rows = pw.nrows() + 1;
        let mut c = DMatrix::zeros(rows, self.m);
        c.view_mut((0, 0), (pw.nrows(), self.m)).copy_from(&pw);
        c.row_mut(rows - 1).fill(1.0);
        let mut b = DVector::zeros(rows);
        b[rows - 1] = 1.0;
        (c, b)
    }

    /// Sample of `J^{-1}(R+ mu)`; point `i` uses the generator seeded with `seed + i`.
    pub fn sample_ray_level(
        &self,
        mu: &Covector,
        count: usize,
        seed: u64,
    ) -> Result<ConstraintSampleSet, ContactError> {
        if self.max_ray_parameter(mu)?.is_none() {
            return Err(ContactError::Infeasible);
        }
        let (c, b) = self.level_constraints(mu);
        let mut points = Vec::with_capacity(count);
        let mut rejected = 0usize;
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            loop {
                if let Some(z) = self.try_level_point(&mut rng, mu, &c, &b) {
                    points.push(z);
                    break;
                }
                rejected += 1;
                let accepted = points.len();
                let total = rejected + accepted + 1;
                if total >= 1000 && rejected as f64 / total as f64 > MAX_REJECTION_RATE {
                    return Err(ContactError::Sampling { rejected, accepted });
                }
            }
        }
        Ok(ConstraintSampleSet {
            points,
            seed,
            count,
            rejected,
        })
    }

    /// Projection of `v` onto the tangent space of `J^{-1}(R+ mu) ∩ S` at `z`.
    pub fn level_tangent_projection(
        &self,
        z: &DVector<f64>,
        mu: &Covector,
        v: &DVector<f64>,
    ) -> DVector<f64> {
        let dj = self.perp(mu) * self.momentum_jacobian(z);
        let mut d = DMatrix::zeros(dj.nrows() + 1, 2 * self.m);
        d.view_mut((0, 0), (dj.nrows(), 2 * self.m)).copy_from(&dj);
        d.row_mut(dj.nrows()).copy_from(&z.transpose());
        v - d.transpose() * lstsq(&(&d * d.transpose()), &(&d * v))
    }

    fn kernel_generators(&self, kappa: &DMatrix<f64>, z: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(2 * self.m, kappa.ncols());
        for a in 0..kappa.ncols() {
            g.set_column(a, &self.generator(&kappa.column(a).into_owned(), z));
        }
        g
    }
}

/// Sampled points of `J^{-1}(R+ mu)` with sampler bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSampleSet {
    pub points: Vec<DVector<f64>>,
    pub seed: u64,
    pub count: usize,
    pub rejected: usize,
}

impl ConstraintSampleSet {
    pub fn rejection_rate(&self) -> f64 {
        let total = self.rejected + self.points.len();
        if total == 0 {
            0.0
        } else {
            self.rejected as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub samples: usize,
    pub max_discrepancy: f64,
    /// Largest `|Omega(xi_C, V) + dPhi^xi(V)|` for torus generators.
    pub max_momentum_defect: f64,
}

fn sample_cone_radius<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.5..2.0)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Cone form on horizontal tangent pairs at lifted constraint points versus
/// the cone form of the reduced contact space at the image point, where the
/// reduced contact data are read off the kernel slice.
pub fn cone_compatibility_error(
    sphere: &ContactSphere,
    mu: &Covector,
    samples: usize,
    seed: u64,
) -> Result<CompatibilityReport, ContactError> {
    let hyp = check_reduction_hypotheses(&sphere.algebra(), mu)?;
    if !hyp.all_hold() {
        return Err(ContactError::Hypotheses);
    }
    let kappa = sphere.kernel_basis(mu)?;
    let slice = sphere.kernel_slice(mu)?;
    let set = sphere.sample_ray_level(mu, samples, seed)?;
    let n2 = 2 * sphere.complex_dim();
    let mut report = CompatibilityReport {
        samples,
        max_discrepancy: 0.0,
        max_momentum_defect: 0.0,
    };
    for (i, z) in set.points.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64) ^ 0x9e37_79b9);
        let cp = ConePoint {
            base: z.clone(),
            r: sample_cone_radius(&mut rng),
        };
        let gens = sphere.kernel_generators(&kappa, z);
        let mut horizontal = || ConeTangent {
            sphere: reject(
                &sphere.level_tangent_projection(z, mu, &gaussian(&mut rng, n2)),
                &gens,
            ),
            radial: rng.sample(StandardNormal),
        };
        let v = horizontal();
        let w = horizontal();
        let lhs = cone_form_eval(&cp, &v, &w)?;

        let zc = to_complex(z);
        let image = ConePoint {
            base: from_complex(&slice.fix(&zc)?),
            r: cp.r,
        };
        let push = |u: &ConeTangent| -> Result<ConeTangent, ContactError> {
            Ok(ConeTangent {
                sphere: from_complex(&slice.differential(&zc, &to_complex(&u.sphere))?),
                radial: u.radial,
            })
        };
        let rhs = cone_form_eval(&image, &push(&v)?, &push(&w)?)?;
        report.max_discrepancy = report.max_discrepancy.max((lhs - rhs).abs());

        for k in 0..sphere.torus_dim() {
            let mut xi = DVector::zeros(sphere.torus_dim());
            xi[k] = 1.0;
            let gen = ConeTangent {
                sphere: sphere.generator(&xi, z),
                radial: 0.0,
            };
            let omega = cone_form_eval(&cp, &gen, &v)?;
            let r = cp.r;
            let jk = sphere.contact_momentum(z).0[k];
            let d_phi = 2.0 * r * v.radial * jk
                + r * r * (sphere.momentum_jacobian(z).row(k) * &v.sphere)[0];
            report.max_momentum_defect = report.max_momentum_defect.max((omega + d_phi).abs());
        }
    }
    Ok(report)
}

/// `max |Omega_{(z, 2r)}(v, w) - 4 Omega_{(z, r)}(v, w)| / (1 + |4 Omega_{(z, r)}(v, w)|)`
/// over sphere-tangent pairs with no radial part.
pub fn cone_homogeneity_error(sphere: &ContactSphere, samples: usize, seed: u64) -> f64 {
    let n2 = 2 * sphere.complex_dim();
    (0..samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let z = sphere.random_point(&mut rng);
            let r = sample_cone_radius(&mut rng);
            let mut tangent = || {
                let v = gaussian(&mut rng, n2);
                ConeTangent {
                    sphere: &v - &z * z.dot(&v),
                    radial: 0.0,
                }
            };
            let (v, w) = (tangent(), tangent());
            let at = |r: f64| cone_form_unchecked(&ConePoint { base: z.clone(), r }, &v, &w);
            let base = 4.0 * at(r);
            (at(2.0 * r) - base).abs() / (1.0 + base.abs())
        })
        .fold(0.0, f64::max)
}

/// On the cone `C^m \ 0`, horizontal tangent vectors of the lifted constraint
/// set form a complex subspace; returns the largest failure of `i v` to be
/// tangent and horizontal.
pub fn horizontal_complex_invariance_error(
    sphere: &ContactSphere,
    mu: &Covector,
    samples: usize,
    seed: u64,
) -> Result<f64, ContactError> {
    let kappa = sphere.kernel_basis(mu)?;
    let set = sphere.sample_ray_level(mu, samples, seed)?;
    let n2 = 2 * sphere.complex_dim();
    let perp = sphere.perp(mu);
    let mut worst = 0.0f64;
    for (i, z) in set.points.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let x = z * sample_cone_radius(&mut rng);
        let normals = (&perp * sphere.momentum_jacobian(&x)).transpose();
        let gens = sphere.kernel_generators(&kappa, &x);
        let mut block = DMatrix::zeros(n2, normals.ncols() + gens.ncols());
        block
            .view_mut((0, 0), (n2, normals.ncols()))
            .copy_from(&normals);
        block
            .view_mut((0, normals.ncols()), (n2, gens.ncols()))
            .copy_from(&gens);
        let v = reject(&gaussian(&mut rng, n2), &block);
        let iv = times_i(&v);
        let defect = (block.transpose() * &iv).amax() / (1.0 + x.norm());
        worst = worst.max(defect / v.norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn s7() -> SphereScenario {
        SphereScenario::from_catalog("s7-unweighted").unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reeb_on_circle() {
        let s = ContactSphere::new(1, DMatrix::from_row_slice(1, 1, &[1.0])).unwrap();
        let z = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(s.reeb_field(&z).as_slice(), &[0.0, -1.0]);
    }

    #[test]
    fn momentum_examples() {
        let sc = s7();
        let z = sc
            .sphere
            .point(&[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert_eq!(sc.sphere.contact_momentum(&z).coords(), &[1.0, 0.0]);
        let eq = sc
            .sphere
            .point(&[c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)])
            .unwrap();
        assert!(sc.sphere.contact_momentum(&eq).0[0].abs() < 1e-15);
        let w = SphereScenario::from_catalog("s7-weighted:1:2").unwrap();
        assert_eq!(w.sphere.contact_momentum(&z).coords(), &[0.0, 2.0]);
    }

    #[test]
    fn catalog_errors() {
        assert!(SphereScenario::from_catalog("s5").is_err());
        assert!(SphereScenario::from_catalog("s7-weighted:1").is_err());
        assert!(SphereScenario::from_catalog("s7-weighted:-1:2").is_err());
        assert!(ContactSphere::new(2, DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn check_point_rejects_off_sphere() {
        let sc = s7();
        assert!(sc
            .sphere
            .check_point(&DVector::from_element(8, 1.0))
            .is_err());
        assert!(sc
            .sphere
            .check_point(&DVector::from_element(6, 0.0))
            .is_err());
    }

    #[test]
    fn reeb_invariance_and_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for key in ["s7-unweighted", "s7-weighted:1:2"] {
            let sc = SphereScenario::from_catalog(key).unwrap();
            let z = sc.sphere.random_point(&mut rng);
            assert_eq!(sc.sphere.reeb_invariance_error(&z, 0.0), 0.0);
            assert!(sc.sphere.reeb_invariance_error(&z, 2.0 * PI) <= 1e-12);
            assert!((sc.sphere.reeb_flow(&z, 2.0 * PI) - &z).amax() <= 1e-15);
        }
    }

    #[test]
    fn hopf_examples() {
        let s = ContactSphere::new(2, DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        let z = s
            .point(&[c(0.0, 0.0), Complex64::from_polar(1.0, 0.7)])
            .unwrap();
        let h = s.hopf_project(&z);
        assert!((h - DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0])).amax() <= 1e-15);
    }

    #[test]
    fn cone_form_examples() {
        let sc = s7();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = sc.sphere.random_point(&mut rng);
        let cp = ConePoint {
            base: z.clone(),
            r: 1.0,
        };
        let radial = ConeTangent {
            sphere: DVector::zeros(8),
            radial: 1.0,
        };
        let reeb = ConeTangent {
            sphere: sc.sphere.reeb_field(&z),
            radial: 0.0,
        };
        assert!((cone_form_eval(&cp, &radial, &reeb).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(cone_form_eval(&cp, &reeb, &reeb).unwrap(), 0.0);
        assert_eq!(cone_form_eval(&cp, &radial, &radial).unwrap(), 0.0);

        // Contact-distribution vectors: orthogonal to z and to i z.
        let mut dist = || {
            let v = gaussian(&mut rng, 8);
            ConeTangent {
                sphere: reject(
                    &v,
                    &crate::linalg::columns_to_matrix(8, &[z.clone(), times_i(&z)]),
                ),
                radial: 0.0,
            }
        };
        let (v, w) = (dist(), dist());
        assert!(eta(&z, &v.sphere).abs() < 1e-14);
        let val = cone_form_eval(&cp, &v, &w).unwrap();
        assert!((val - d_eta(&v.sphere, &w.sphere)).abs() < 1e-14);

        let bad = ConeTangent {
            sphere: z.clone(),
            radial: 0.0,
        };
        assert!(matches!(
            cone_form_eval(&cp, &bad, &v),
            Err(ContactError::NotTangent { .. })
        ));
    }

    #[test]
    fn lp_feasibility() {
        let sc = s7();
        let tmax = sc.sphere.max_ray_parameter(&sc.mu).unwrap().unwrap();
        // |z1|^2 - |z0|^2 = t and |z2|^2 + |z3|^2 = t leave t <= 1/2.
        assert!((tmax - 0.5).abs() < 1e-9);
        let w = SphereScenario::from_catalog("s7-weighted:1:2").unwrap();
        assert!(w
            .sphere
            .max_ray_parameter(&Covector::new(vec![-1.0, -1.0]))
            .unwrap()
            .is_none());
        assert!(matches!(
            w.sphere
                .sample_ray_level(&Covector::new(vec![-1.0, -1.0]), 10, 1),
            Err(ContactError::Infeasible)
        ));
    }

    #[test]
    fn sampler_examples() {
        let sc = s7();
        let set = sc.sphere.sample_ray_level(&sc.mu, 1000, 1).unwrap();
        assert_eq!(set.points.len(), 1000);
        for z in &set.points {
            assert!(sc.sphere.check_point(z).is_ok());
            assert!(sc.sphere.level_residual(z, &sc.mu) <= LEVEL_TOL);
            assert!(sc.sphere.ray_parameter(z, &sc.mu) > 0.0);
        }
        assert!(sc
            .sphere
            .sample_ray_level(&sc.mu, 0, 1)
            .unwrap()
            .points
            .is_empty());
        assert_eq!(
            sc.sphere.sample_ray_level(&sc.mu, 20, 3).unwrap(),
            sc.sphere.sample_ray_level(&sc.mu, 20, 3).unwrap()
        );
    }

    #[test]
    fn cone_compatibility_catalog_and_nontrivial_kernel() {
        let sc = SphereScenario::from_catalog("s3-cone").unwrap();
        let rep = cone_compatibility_error(&sc.sphere, &sc.mu, 100, 7).unwrap();
        assert!(
            rep.max_discrepancy <= 1e-8 && rep.max_momentum_defect <= 1e-10,
            "{rep:?}"
        );

        let s = ContactSphere::new(2, DMatrix::identity(2, 2)).unwrap();
        let mu = Covector::new(vec![1.0, 1.0]);
        assert_eq!(s.kernel_basis(&mu).unwrap().ncols(), 1);
        let rep = cone_compatibility_error(&s, &mu, 100, 7).unwrap();
        assert!(
            rep.max_discrepancy <= 1e-8 && rep.max_momentum_defect <= 1e-10,
            "{rep:?}"
        );
    }

    #[test]
    fn cone_homogeneity() {
        let sc = SphereScenario::from_catalog("s3-cone").unwrap();
        assert!(cone_homogeneity_error(&sc.sphere, 100, 7) <= 1e-10);
    }

    #[test]
    fn horizontal_spaces_are_complex() {
        let sc = s7();
        assert!(horizontal_complex_invariance_error(&sc.sphere, &sc.mu, 50, 2).unwrap() <= 1e-10);
        let s = ContactSphere::new(2, DMatrix::identity(2, 2)).unwrap();
        assert!(
            horizontal_complex_invariance_error(&s, &Covector::new(vec![1.0, 1.0]), 50, 2).unwrap()
                <= 1e-10
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn reeb_identities(seed in 0u64..1_000_000) {
            let sc = s7();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = sc.sphere.random_point(&mut rng);
            let r = sc.sphere.reeb_field(&z);
            prop_assert!((eta(&z, &r) - 1.0).abs() <= 1e-12);
            prop_assert!(z.dot(&r).abs() <= 1e-12);
            let v = gaussian(&mut rng, 8);
            let v = &v - &z * z.dot(&v);
            prop_assert!(d_eta(&r, &v).abs() <= 1e-12);
            let u = gaussian(&mut rng, 8);
            let fd = d_eta_finite_difference(&z, &u, &v, 1e-5);
            prop_assert!((fd - d_eta(&u, &v)).abs() <= 1e-6 * (1.0 + u.norm() * v.norm()));
        }

        #[test]
        fn momentum_is_eta_of_generator(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for key in ["s7-unweighted", "s7-weighted:1:2", "s3-cone"] {
                let sc = SphereScenario::from_catalog(key).unwrap();
                let z = sc.sphere.random_point(&mut rng);
                let xi = gaussian(&mut rng, sc.sphere.torus_dim());
                let lhs = sc.sphere.contact_momentum(&z).pair(&xi);
                prop_assert!((lhs - eta(&z, &sc.sphere.generator(&xi, &z))).abs() <= 1e-12 * (1.0 + xi.norm()));
            }
        }

        #[test]
        fn momentum_constant_on_fibres_and_orbits(seed in 0u64..1_000_000, theta in -10.0f64..10.0) {
            let sc = SphereScenario::from_catalog("s7-weighted:1:2").unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = sc.sphere.random_point(&mut rng);
            let j = sc.sphere.contact_momentum(&z).0;
            let rot = sc.sphere.reeb_flow(&z, theta);
            let h1 = sc.sphere.hopf_project(&z);
            let h2 = sc.sphere.hopf_project(&rot);
            prop_assert!((&h1 - &h2).amax() <= 1e-12);
            prop_assert!((sc.sphere.contact_momentum(&h1).0 - &j).amax() <= 1e-12);
            prop_assert!((sc.sphere.hopf_project(&h1) - &h1).amax() <= 1e-15);
            let g = sc.sphere.torus_act(&gaussian(&mut rng, 2), &z);
            prop_assert!((sc.sphere.contact_momentum(&g).0 - &j).amax() <= 1e-12);
        }

        #[test]
        fn cone_form_antisymmetric_bilinear(seed in 0u64..1_000_000, a in -3.0f64..3.0) {
            let sc = s7();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = sc.sphere.random_point(&mut rng);
            let cp = ConePoint { base: z.clone(), r: sample_cone_radius(&mut rng) };
            let mut t = || {
                let v = gaussian(&mut rng, 8);
                ConeTangent { sphere: &v - &z * z.dot(&v), radial: rng.sample(StandardNormal) }
            };
            let (u, v, w) = (t(), t(), t());
            let f = |x: &ConeTangent, y: &ConeTangent| cone_form_eval(&cp, x, y).unwrap();
            prop_assert!((f(&u, &v) + f(&v, &u)).abs() <= 1e-12);
            let comb = ConeTangent { sphere: &u.sphere * a + &w.sphere, radial: u.radial * a + w.radial };
            prop_assert!((f(&comb, &v) - a * f(&u, &v) - f(&w, &v)).abs() <= 1e-11 * (1.0 + a.abs()));
        }
    }
}
