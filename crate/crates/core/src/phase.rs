//! Canonical phase space `R^{2n}` with `theta = p dq`, cotangent lifts of
//! linear configuration actions, their momentum maps, and conformal
//! Hamiltonian vector fields `(dq, dp) = (dH/dp, -dH/dq - f p)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use thiserror::Error;

use crate::lie::{Covector, LieAlgebra};

/// Tolerance on `dH(xi_M)` and `df(xi_M)` for the sampled invariance check.
pub const INVARIANCE_TOL: f64 = 1e-8;
/// Tolerance on `[A_i, A_j] - sum_k c_ijk A_k`.
pub const CLOSURE_TOL: f64 = 1e-10;
const INVARIANCE_SAMPLES: usize = 20;
const INVARIANCE_SEED: u64 = 0x5eed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("generators do not close under the declared structure constants (defect {0:e})")]
    Closure(f64),
    #[error("{field} is not invariant under generator {generator} (defect {defect:e})")]
    NotInvariant {
        field: &'static str,
        generator: usize,
        defect: f64,
    },
    #[error("unknown system {0:?}")]
    UnknownSystem(String),
    #[error("invalid system definition: {0}")]
    Invalid(String),
}

/// A point `(q, p)` of the canonical phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have the same length");
        PhasePoint {
            q: DVector::from_vec(q),
            p: DVector::from_vec(p),
        }
    }

    pub fn zeros(n: usize) -> Self {
        PhasePoint {
            q: DVector::zeros(n),
            p: DVector::zeros(n),
        }
    }

    /// Splits a stacked `(q, p)` vector of length `2n`.
    pub fn from_stacked(v: &DVector<f64>) -> Self {
        let n = v.len() / 2;
        PhasePoint {
            q: v.rows(0, n).into_owned(),
            p: v.rows(n, n).into_owned(),
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.q.len();
        let mut v = DVector::zeros(2 * n);
        v.rows_mut(0, n).copy_from(&self.q);
        v.rows_mut(n, n).copy_from(&self.p);
        v
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        (self.q.norm_squared() + self.p.norm_squared()).sqrt()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        (self.stacked() - other.stacked()).norm()
    }

    pub fn axpy(&self, a: f64, v: &TangentVector) -> PhasePoint {
        PhasePoint {
            q: &self.q + &v.dq * a,
            p: &self.p + &v.dp * a,
        }
    }
}

/// A tangent vector `(dq, dp)` at a phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub dq: DVector<f64>,
    pub dp: DVector<f64>,
}

impl TangentVector {
    pub fn zeros(n: usize) -> Self {
        TangentVector {
            dq: DVector::zeros(n),
            dp: DVector::zeros(n),
        }
    }

    pub fn from_stacked(v: &DVector<f64>) -> Self {
        let x = PhasePoint::from_stacked(v);
        TangentVector { dq: x.q, dp: x.p }
    }

    pub fn stacked(&self) -> DVector<f64> {
        PhasePoint {
            q: self.dq.clone(),
            p: self.dp.clone(),
        }
        .stacked()
    }

    pub fn norm(&self) -> f64 {
        (self.dq.norm_squared() + self.dp.norm_squared()).sqrt()
    }
}

/// Canonical symplectic form `omega = sum dq_i ∧ dp_i` on stacked vectors.
pub fn omega(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let n = v.len() / 2;
    (0..n).map(|i| v[i] * w[n + i] - v[n + i] * w[i]).sum()
}

/// Liouville form `theta = p dq` at `x`.
pub fn theta(x: &PhasePoint, v: &TangentVector) -> f64 {
    x.p.dot(&v.dq)
}

/// A smooth function on phase space with its gradient `(dF/dq, dF/dp)`.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn value(&self, x: &PhasePoint) -> f64;

    fn gradient(&self, x: &PhasePoint) -> (DVector<f64>, DVector<f64>) {
        finite_difference_gradient(|y| self.value(y), x)
    }

    /// `Some(k)` when the field is the constant `k`.
    fn constant_value(&self) -> Option<f64> {
        None
    }
}

/// Central differences with step `1e-6 (1 + |x|)`.
pub fn finite_difference_gradient<F: Fn(&PhasePoint) -> f64>(
    f: F,
    x: &PhasePoint,
) -> (DVector<f64>, DVector<f64>) {
    let h = 1e-6 * (1.0 + x.norm());
    let base = x.stacked();
    let g = DVector::from_fn(base.len(), |i, _| {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += h;
        minus[i] -= h;
        (f(&PhasePoint::from_stacked(&plus)) - f(&PhasePoint::from_stacked(&minus))) / (2.0 * h)
    });
    let n = x.dim();
    (g.rows(0, n).into_owned(), g.rows(n, n).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _: &PhasePoint) -> f64 {
        self.0
    }

    fn gradient(&self, x: &PhasePoint) -> (DVector<f64>, DVector<f64>) {
        (DVector::zeros(x.dim()), DVector::zeros(x.dim()))
    }

    fn constant_value(&self) -> Option<f64> {
        Some(self.0)
    }
}

/// One term `c * prod q_i^a_i * prod p_i^b_i`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Monomial {
    #[serde(rename = "c")]
    pub coeff: f64,
    pub q: Vec<u32>,
    pub p: Vec<u32>,
}

/// Polynomial in `(q, p)` with an exact gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(n: usize, terms: Vec<Monomial>) -> Result<Self, PhaseError> {
        for t in &terms {
            if t.q.len() != n || t.p.len() != n {
                return Err(PhaseError::Invalid(format!(
                    "monomial exponent lists must have length {n}"
                )));
            }
        }
        Ok(Polynomial { n, terms })
    }

    /// `weight * sum` of the squares of the selected coordinates.
    pub fn sum_of_squares(n: usize, q_idx: &[usize], p_idx: &[usize], weight: f64) -> Self {
        let mut terms = Vec::new();
        for &i in q_idx {
            let mut q = vec![0; n];
            q[i] = 2;
            terms.push(Monomial {
                coeff: weight,
                q,
                p: vec![0; n],
            });
        }
        for &i in p_idx {
            let mut p = vec![0; n];
            p[i] = 2;
            terms.push(Monomial {
                coeff: weight,
                q: vec![0; n],
                p,
            });
        }
        Polynomial { n, terms }
    }

    /// `H = (|q|^2 + |p|^2) / 2`.
    pub fn harmonic(n: usize) -> Self {
        let all: Vec<usize> = (0..n).collect();
        Self::sum_of_squares(n, &all, &all, 0.5)
    }

    fn eval_term(t: &Monomial, x: &PhasePoint) -> f64 {
        let mut v = t.coeff;
        for i in 0..x.dim() {
            v *= x.q[i].powi(t.q[i] as i32) * x.p[i].powi(t.p[i] as i32);
        }
        v
    }

    fn derivative_term(t: &Monomial, x: &PhasePoint, var: usize, is_p: bool) -> f64 {
        let e = if is_p { t.p[var] } else { t.q[var] };
        if e == 0 {
            return 0.0;
        }
        let mut v = t.coeff * e as f64;
        for i in 0..x.dim() {
            let (eq, ep) = (t.q[i], t.p[i]);
            let eq = if !is_p && i == var { eq - 1 } else { eq };
            let ep = if is_p && i == var { ep - 1 } else { ep };
            v *= x.q[i].powi(eq as i32) * x.p[i].powi(ep as i32);
        }
        v
    }
}

impl ScalarField for Polynomial {
    fn value(&self, x: &PhasePoint) -> f64 {
        debug_assert_eq!(x.dim(), self.n);
        self.terms.iter().map(|t| Self::eval_term(t, x)).sum()
    }

    fn gradient(&self, x: &PhasePoint) -> (DVector<f64>, DVector<f64>) {
        let dq = DVector::from_fn(self.n, |i, _| {
            self.terms
                .iter()
                .map(|t| Self::derivative_term(t, x, i, false))
                .sum()
        });
        let dp = DVector::from_fn(self.n, |i, _| {
            self.terms
                .iter()
                .map(|t| Self::derivative_term(t, x, i, true))
                .sum()
        });
        (dq, dp)
    }

    fn constant_value(&self) -> Option<f64> {
        if self
            .terms
            .iter()
            .all(|t| t.q.iter().chain(t.p.iter()).all(|&e| e == 0))
        {
            Some(self.terms.iter().map(|t| t.coeff).sum())
        } else {
            None
        }
    }
}

/// A field given by a closure; the gradient uses central differences.
pub struct FnField {
    name: String,
    f: Box<dyn Fn(&PhasePoint) -> f64 + Send + Sync>,
}

impl FnField {
    pub fn new(name: &str, f: impl Fn(&PhasePoint) -> f64 + Send + Sync + 'static) -> Self {
        FnField {
            name: name.to_string(),
            f: Box::new(f),
        }
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnField({})", self.name)
    }
}

impl ScalarField for FnField {
    fn value(&self, x: &PhasePoint) -> f64 {
        (self.f)(x)
    }
}

/// Linear configuration action `xi_Q(q) = (sum xi_i A_i) q`, lifted to
/// `T*Q` as `(dq, dp) = (A_xi q, -A_xi^T p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConfigAction {
    n: usize,
    generators: Vec<DMatrix<f64>>,
}

/// The 2x2 infinitesimal rotation `[[0, -1], [1, 0]]`.
pub fn rotation_generator() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

impl LinearConfigAction {
    pub fn new(n: usize, generators: Vec<DMatrix<f64>>) -> Result<Self, PhaseError> {
        for a in &generators {
            if a.nrows() != n || a.ncols() != n {
                return Err(PhaseError::DimensionMismatch {
                    expected: n,
                    got: a.nrows(),
                });
            }
        }
        Ok(LinearConfigAction { n, generators })
    }

    /// Independent rotations of the coordinate planes `(q_{2j}, q_{2j+1})`,
    /// generator `i` rotating the planes listed in `planes[i]` with the given weights.
    pub fn plane_rotations(n: usize, planes: &[Vec<(usize, f64)>]) -> Self {
        let gens = planes
            .iter()
            .map(|list| {
                let mut a = DMatrix::zeros(n, n);
                for &(plane, w) in list {
                    a.view_mut((2 * plane, 2 * plane), (2, 2))
                        .copy_from(&(rotation_generator() * w));
                }
                a
            })
            .collect();
        LinearConfigAction {
            n,
            generators: gens,
        }
    }

    pub fn config_dim(&self) -> usize {
        self.n
    }

    pub fn algebra_dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    pub fn matrix(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (g, &c) in self.generators.iter().zip(xi.iter()) {
            a += g * c;
        }
        a
    }

    /// Largest entry of `[A_i, A_j] - sum_k c_ijk A_k`.
    pub fn closure_defect(&self, alg: &LieAlgebra) -> f64 {
        let k = self.generators.len();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let (a, b) = (&self.generators[i], &self.generators[j]);
                let mut d = a * b - b * a;
                for (l, g) in self.generators.iter().enumerate() {
                    d -= g * alg.constant(i, j, l);
                }
                worst = worst.max(d.amax());
            }
        }
        worst
    }

    /// Group element `exp(xi)` acting on a phase point.
    pub fn act(&self, xi: &DVector<f64>, x: &PhasePoint) -> PhasePoint {
        let a = self.matrix(xi);
        let g = a.clone().exp();
        let g_inv_t = (-a.transpose()).exp();
        PhasePoint {
            q: g * &x.q,
            p: g_inv_t * &x.p,
        }
    }

    /// Weights of the action viewed as a torus acting on the complex
    /// coordinates `q_{2j} + i q_{2j+1}`, when every generator is a sum of
    /// weighted plane rotations. Row `i` holds the weights of generator `i`.
    pub fn torus_weights(&self) -> Option<DMatrix<f64>> {
        if !self.n.is_multiple_of(2) {
            return None;
        }
        let m = self.n / 2;
        let mut w = DMatrix::zeros(self.generators.len(), m);
        for (i, a) in self.generators.iter().enumerate() {
            let mut rebuilt = DMatrix::zeros(self.n, self.n);
            for j in 0..m {
                let wij = a[(2 * j + 1, 2 * j)];
                w[(i, j)] = wij;
                rebuilt
                    .view_mut((2 * j, 2 * j), (2, 2))
                    .copy_from(&(rotation_generator() * wij));
            }
            if (&rebuilt - a).amax() > 1e-14 {
                return None;
            }
        }
        Some(w)
    }
}

/// `xi_M(x)` for the cotangent-lifted action.
pub fn infinitesimal_generator(
    action: &LinearConfigAction,
    xi: &DVector<f64>,
    x: &PhasePoint,
) -> Result<TangentVector, PhaseError> {
    if xi.len() != action.algebra_dim() {
        return Err(PhaseError::DimensionMismatch {
            expected: action.algebra_dim(),
            got: xi.len(),
        });
    }
    if x.dim() != action.n {
        return Err(PhaseError::DimensionMismatch {
            expected: action.n,
            got: x.dim(),
        });
    }
    let a = action.matrix(xi);
    Ok(TangentVector {
        dq: &a * &x.q,
        dp: -(a.transpose() * &x.p),
    })
}

/// Hamiltonian `H`, conformal parameter `f` and a linear symmetry.
#[derive(Debug, Clone)]
pub struct ConformalSystem {
    name: String,
    hamiltonian: Arc<dyn ScalarField>,
    conformal: Arc<dyn ScalarField>,
    action: LinearConfigAction,
    algebra: LieAlgebra,
}

impl ConformalSystem {
    /// Validates generator closure and samples the invariance of `H` and `f`.
    pub fn new(
        name: &str,
        hamiltonian: Arc<dyn ScalarField>,
        conformal: Arc<dyn ScalarField>,
        action: LinearConfigAction,
        algebra: LieAlgebra,
    ) -> Result<Self, PhaseError> {
        if algebra.dim() != action.algebra_dim() {
            return Err(PhaseError::DimensionMismatch {
                expected: algebra.dim(),
                got: action.algebra_dim(),
            });
        }
        let defect = action.closure_defect(&algebra);
        if defect > CLOSURE_TOL {
            return Err(PhaseError::Closure(defect));
        }
        let sys = ConformalSystem {
            name: name.to_string(),
            hamiltonian,
            conformal,
            action,
            algebra,
        };
        sys.check_invariance()?;
        Ok(sys)
    }

    fn check_invariance(&self) -> Result<(), PhaseError> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(INVARIANCE_SEED);
        for _ in 0..INVARIANCE_SAMPLES {
            let x = PhasePoint {
                q: DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
                p: DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
            };
            for i in 0..self.action.algebra_dim() {
                let mut xi = DVector::zeros(self.action.algebra_dim());
                xi[i] = 1.0;
                let gen = infinitesimal_generator(&self.action, &xi, &x)?;
                for (label, field) in [("H", &self.hamiltonian), ("f", &self.conformal)] {
                    let (gq, gp) = field.gradient(&x);
                    let d = gq.dot(&gen.dq) + gp.dot(&gen.dp);
                    let scale = 1.0 + (gq.norm_squared() + gp.norm_squared()).sqrt() * gen.norm();
                    if d.abs() > INVARIANCE_TOL * scale {
                        return Err(PhaseError::NotInvariant {
                            field: label,
                            generator: i,
                            defect: d.abs(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Catalog systems: `rayleigh4`, `rayleigh4-reduced`, `harmonic:<n>:<k>`.
    pub fn from_catalog(key: &str) -> Result<Self, PhaseError> {
        match key {
            "rayleigh4" => Ok(Self::rayleigh4()),
            "rayleigh4-reduced" => Ok(Self::rayleigh4_reduced()),
            _ => {
                let parts: Vec<&str> = key.split(':').collect();
                if parts.len() == 3 && parts[0] == "harmonic" {
                    let n: usize = parts[1]
                        .parse()
                        .map_err(|_| PhaseError::UnknownSystem(key.to_string()))?;
                    let k: f64 = parts[2]
                        .parse()
                        .map_err(|_| PhaseError::UnknownSystem(key.to_string()))?;
                    if n == 0 || !k.is_finite() {
                        return Err(PhaseError::UnknownSystem(key.to_string()));
                    }
                    Ok(Self::harmonic(n, k))
                } else {
                    Err(PhaseError::UnknownSystem(key.to_string()))
                }
            }
        }
    }

    /// `H = (|q|^2 + |p|^2)/2`, `f = |q_1|^2 + |p_1|^2` on `T*(R^2 x R^2)`,
    /// with the lifted rotations of both planes.
    pub fn rayleigh4() -> Self {
        let action = LinearConfigAction::plane_rotations(4, &[vec![(0, 1.0)], vec![(1, 1.0)]]);
        ConformalSystem::new(
            "rayleigh4",
            Arc::new(Polynomial::harmonic(4)),
            Arc::new(Polynomial::sum_of_squares(4, &[0, 1], &[0, 1], 1.0)),
            action,
            LieAlgebra::abelian(2),
        )
        .expect("rayleigh4 is well formed")
    }

    /// The reduced Rayleigh system on the gauge slice `q_1 = (a, 0)`, `p_1 = (b, 0)`:
    /// coordinates `q = (a, q_2)`, `p = (b, p_2)`, `H = |.|^2 / 2`, `f = a^2 + b^2`,
    /// with the residual rotation of the second plane.
    pub fn rayleigh4_reduced() -> Self {
        let mut a = DMatrix::zeros(3, 3);
        a.view_mut((1, 1), (2, 2)).copy_from(&rotation_generator());
        ConformalSystem::new(
            "rayleigh4-reduced",
            Arc::new(Polynomial::harmonic(3)),
            Arc::new(Polynomial::sum_of_squares(3, &[0], &[0], 1.0)),
            LinearConfigAction::new(3, vec![a]).expect("3x3 generator"),
            LieAlgebra::abelian(1),
        )
        .expect("reduced rayleigh system is well formed")
    }

    /// Harmonic oscillator with constant `f = k` and rotations of the
    /// planes `(q_0, q_1), (q_2, q_3), ...`; for `n = 1` the action is trivial.
    pub fn harmonic(n: usize, k: f64) -> Self {
        let action = if n >= 2 {
            let planes: Vec<Vec<(usize, f64)>> = (0..n / 2).map(|j| vec![(j, 1.0)]).collect();
            LinearConfigAction::plane_rotations(n, &planes)
        } else {
            LinearConfigAction::new(n, vec![DMatrix::zeros(n, n)]).expect("zero generator")
        };
        let algebra = LieAlgebra::abelian(action.algebra_dim());
        ConformalSystem::new(
            &format!("harmonic:{n}:{k}"),
            Arc::new(Polynomial::harmonic(n)),
            Arc::new(Constant(k)),
            action,
            algebra,
        )
        .expect("harmonic system is well formed")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Configuration dimension `n`.
    pub fn dim(&self) -> usize {
        self.action.config_dim()
    }

    pub fn action(&self) -> &LinearConfigAction {
        &self.action
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn hamiltonian(&self) -> &dyn ScalarField {
        self.hamiltonian.as_ref()
    }

    pub fn conformal(&self) -> &dyn ScalarField {
        self.conformal.as_ref()
    }

    pub fn energy(&self, x: &PhasePoint) -> f64 {
        self.hamiltonian.value(x)
    }

    pub fn f(&self, x: &PhasePoint) -> f64 {
        self.conformal.value(x)
    }

    pub fn generator(&self, xi: &DVector<f64>, x: &PhasePoint) -> TangentVector {
        let a = self.action.matrix(xi);
        TangentVector {
            dq: &a * &x.q,
            dp: -(a.transpose() * &x.p),
        }
    }

    /// `J(x)_i = theta(e_i M) = p . (A_i q)`.
    pub fn momentum_map(&self, x: &PhasePoint) -> Covector {
        Covector(DVector::from_iterator(
            self.action.algebra_dim(),
            self.action
                .generators()
                .iter()
                .map(|a| x.p.dot(&(a * &x.q))),
        ))
    }

    /// Jacobian of `J` with respect to the stacked `(q, p)`; row `i` is `dJ_i`.
    pub fn momentum_jacobian(&self, x: &PhasePoint) -> DMatrix<f64> {
        let n = self.dim();
        let k = self.action.algebra_dim();
        let mut m = DMatrix::zeros(k, 2 * n);
        for (i, a) in self.action.generators().iter().enumerate() {
            let dq = a.transpose() * &x.p;
            let dp = a * &x.q;
            for j in 0..n {
                m[(i, j)] = dq[j];
                m[(i, n + j)] = dp[j];
            }
        }
        m
    }

    /// `X^f_H(x) = (dH/dp, -dH/dq - f(x) p)`.
    pub fn conformal_field(&self, x: &PhasePoint) -> TangentVector {
        let (hq, hp) = self.hamiltonian.gradient(x);
        let f = self.conformal.value(x);
        TangentVector {
            dq: hp,
            dp: -hq - &x.p * f,
        }
    }

    /// Plain Hamiltonian field `X_H`.
    pub fn hamiltonian_field(&self, x: &PhasePoint) -> TangentVector {
        let (hq, hp) = self.hamiltonian.gradient(x);
        TangentVector { dq: hp, dp: -hq }
    }

    /// Time derivative of `J` along the conformal flow, `-f(x) J(x)`.
    pub fn momentum_decay_rate(&self, x: &PhasePoint) -> Covector {
        let j = self.momentum_map(x);
        Covector(j.0 * -self.f(x))
    }
}

/// Free-function forms of the system operations.
pub fn momentum_map(system: &ConformalSystem, x: &PhasePoint) -> Covector {
    system.momentum_map(x)
}

pub fn conformal_field(system: &ConformalSystem, x: &PhasePoint) -> TangentVector {
    system.conformal_field(x)
}

pub fn momentum_decay_rate(system: &ConformalSystem, x: &PhasePoint) -> Covector {
    system.momentum_decay_rate(x)
}
