//! Finite-dimensional Lie algebras given by structure constants, and the
//! linear algebra of a covector `mu` in the dual: isotropy, kernel and ray
//! isotropy subalgebras, the reduction hypotheses, the tangent dimension of
//! the cone over the coadjoint orbit, and the `omega_minus` two-form at the
//! identity.
//!
//! Sign convention for the coadjoint action:
//! `<ad*_xi mu, eta> := <mu, [xi, eta]>`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;

/// Tolerance for the Jacobi identity, relative to `max(1, max|c|^2)`.
pub const JACOBI_TOL: f64 = 1e-12;
/// Tolerance used for subspace inclusion and ideal checks.
pub const SUBSPACE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("structure constants are not antisymmetric at ({i}, {j}, {k})")]
    NotAntisymmetric { i: usize, j: usize, k: usize },
    #[error("Jacobi identity fails: defect {defect:e}")]
    Jacobi { defect: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("cannot parse algebra: {0}")]
    Parse(String),
}

/// Nonzero bracket `[e_i, e_j] = sum c e_k` as `(i, j, [(k, c), ...])`.
pub type Bracket = (usize, usize, Vec<(usize, f64)>);

/// A Lie algebra `g` with basis `e_0..e_{d-1}` and `[e_i, e_j] = sum_k c[i][j][k] e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    c: Vec<f64>,
}

impl LieAlgebra {
    /// Builds an algebra from a dense `d^3` array in `[i][j][k]` order,
    /// checking antisymmetry exactly and the Jacobi identity.
    pub fn new(dim: usize, structure_constants: Vec<f64>) -> Result<Self, LieError> {
        if dim == 0 {
            return Err(LieError::Domain(
                "algebra dimension must be positive".into(),
            ));
        }
        if structure_constants.len() != dim * dim * dim {
            return Err(LieError::DimensionMismatch {
                expected: dim * dim * dim,
                got: structure_constants.len(),
            });
        }
        let alg = LieAlgebra {
            dim,
            c: structure_constants,
        };
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    if alg.constant(i, j, k) != -alg.constant(j, i, k) {
                        return Err(LieError::NotAntisymmetric { i, j, k });
                    }
                }
            }
        }
        let defect = alg.jacobi_defect();
        let scale = alg.c.iter().fold(1.0f64, |m, v| m.max(v * v));
        if defect > JACOBI_TOL * scale {
            return Err(LieError::Jacobi { defect });
        }
        Ok(alg)
    }

    /// Builds an algebra from the nonzero brackets `[e_i, e_j] = sum c e_k`, `i < j`.
    pub fn from_brackets(dim: usize, brackets: &[Bracket]) -> Result<Self, LieError> {
        let mut c = vec![0.0; dim * dim * dim];
        for (i, j, terms) in brackets {
            let (i, j) = (*i, *j);
            if i >= j || j >= dim {
                return Err(LieError::Parse(format!(
                    "bracket indices ({i}, {j}) must satisfy i < j < {dim}"
                )));
            }
            for &(k, v) in terms {
                if k >= dim {
                    return Err(LieError::Parse(format!("result index {k} out of range")));
                }
                c[(i * dim + j) * dim + k] += v;
                c[(j * dim + i) * dim + k] -= v;
            }
        }
        Self::new(dim, c)
    }

    pub fn abelian(dim: usize) -> Self {
        LieAlgebra {
            dim,
            c: vec![0.0; dim * dim * dim],
        }
    }

    /// sl(2,R) in the basis (h, e, f): [h,e] = 2e, [h,f] = -2f, [e,f] = h.
    pub fn sl2() -> Self {
        Self::from_brackets(
            3,
            &[
                (0, 1, vec![(1, 2.0)]),
                (0, 2, vec![(2, -2.0)]),
                (1, 2, vec![(0, 1.0)]),
            ],
        )
        .expect("sl2 is a Lie algebra")
    }

    /// so(3) with [e_i, e_j] = eps_ijk e_k.
    pub fn so3() -> Self {
        Self::from_brackets(
            3,
            &[
                (0, 1, vec![(2, 1.0)]),
                (0, 2, vec![(1, -1.0)]),
                (1, 2, vec![(0, 1.0)]),
            ],
        )
        .expect("so3 is a Lie algebra")
    }

    /// Catalog lookup: `sl2`, `so3`, `abelian:<d>`.
    pub fn from_catalog(key: &str) -> Result<Self, LieError> {
        match key {
            "sl2" => Ok(Self::sl2()),
            "so3" => Ok(Self::so3()),
            _ => {
                if let Some(d) = key.strip_prefix("abelian:") {
                    let d: usize = d.parse().map_err(|_| {
                        LieError::Parse(format!("bad abelian dimension in {key:?}"))
                    })?;
                    if d == 0 {
                        return Err(LieError::Domain(
                            "algebra dimension must be positive".into(),
                        ));
                    }
                    Ok(Self::abelian(d))
                } else {
                    Err(LieError::Parse(format!("unknown algebra {key:?}")))
                }
            }
        }
    }

    /// Parses `{"dim": d, "brackets": [[i, j, [k, c], ...], ...]}`.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, LieError> {
        let bad = |m: &str| LieError::Parse(m.to_string());
        let dim = value
            .get("dim")
            .and_then(|d| d.as_u64())
            .ok_or_else(|| bad("missing integer field \"dim\""))? as usize;
        let mut brackets = Vec::new();
        if let Some(list) = value.get("brackets") {
            let list = list
                .as_array()
                .ok_or_else(|| bad("\"brackets\" must be an array"))?;
            for entry in list {
                let entry = entry
                    .as_array()
                    .ok_or_else(|| bad("each bracket must be an array [i, j, [k, c], ...]"))?;
                if entry.len() < 2 {
                    return Err(bad("bracket entry needs at least i and j"));
                }
                let idx = |v: &serde_json::Value| {
                    v.as_u64()
                        .map(|x| x as usize)
                        .ok_or_else(|| bad("bracket indices must be nonnegative integers"))
                };
                let i = idx(&entry[0])?;
                let j = idx(&entry[1])?;
                let mut terms = Vec::new();
                for t in &entry[2..] {
                    let t = t
                        .as_array()
                        .filter(|t| t.len() == 2)
                        .ok_or_else(|| bad("bracket terms must be [k, coefficient] pairs"))?;
                    let k = idx(&t[0])?;
                    let v = t[1]
                        .as_f64()
                        .ok_or_else(|| bad("coefficient must be a number"))?;
                    terms.push((k, v));
                }
                brackets.push((i, j, terms));
            }
        }
        Self::from_brackets(dim, &brackets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    pub fn max_abs_constant(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for i in 0..d {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..d {
                    out[k] += w * self.constant(i, j, k);
                }
            }
        }
        out
    }

    /// Largest absolute Jacobi defect over all basis triples.
    pub fn jacobi_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for m in 0..d {
                        let mut s = 0.0;
                        for l in 0..d {
                            s += self.constant(i, j, l) * self.constant(l, k, m)
                                + self.constant(j, k, l) * self.constant(l, i, m)
                                + self.constant(k, i, l) * self.constant(l, j, m);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Structure constants in a new basis `f_a = sum_i p[(i, a)] e_i`.
    pub fn change_basis(&self, p: &DMatrix<f64>) -> Result<Self, LieError> {
        let d = self.dim;
        if p.nrows() != d || p.ncols() != d {
            return Err(LieError::DimensionMismatch {
                expected: d,
                got: p.nrows(),
            });
        }
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| LieError::Domain("change of basis is singular".into()))?;
        let mut c = vec![0.0; d * d * d];
        for a in 0..d {
            for b in a + 1..d {
                let br = self.bracket(&p.column(a).into_owned(), &p.column(b).into_owned());
                let coords = &p_inv * br;
                for k in 0..d {
                    c[(a * d + b) * d + k] = coords[k];
                    c[(b * d + a) * d + k] = -coords[k];
                }
            }
        }
        Self::new(d, c)
    }

    /// Direct sum of two algebras.
    pub fn direct_sum(&self, other: &LieAlgebra) -> LieAlgebra {
        let (d1, d2) = (self.dim, other.dim);
        let d = d1 + d2;
        let mut c = vec![0.0; d * d * d];
        for i in 0..d1 {
            for j in 0..d1 {
                for k in 0..d1 {
                    c[(i * d + j) * d + k] = self.constant(i, j, k);
                }
            }
        }
        for i in 0..d2 {
            for j in 0..d2 {
                for k in 0..d2 {
                    c[((i + d1) * d + j + d1) * d + k + d1] = other.constant(i, j, k);
                }
            }
        }
        LieAlgebra { dim: d, c }
    }

    /// Matrix of `xi -> ad*_xi mu`, column `i` is `ad*_{e_i} mu`.
    pub fn coadjoint_matrix(&self, mu: &Covector) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |eta, i| {
            (0..d).map(|k| mu.0[k] * self.constant(i, eta, k)).sum()
        })
    }

    fn scale_for(&self, mu: &Covector) -> f64 {
        self.max_abs_constant().max(1.0) * mu.norm().max(f64::MIN_POSITIVE)
    }

    fn check_dim(&self, n: usize) -> Result<(), LieError> {
        if n != self.dim {
            Err(LieError::DimensionMismatch {
                expected: self.dim,
                got: n,
            })
        } else {
            Ok(())
        }
    }

    /// Random algebra of dimension `d`: a direct sum of simple, nilpotent and
    /// solvable blocks, written in a random basis. Jacobi holds by construction
    /// and is re-verified by [`LieAlgebra::new`].
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> LieAlgebra {
        let mut blocks: Vec<LieAlgebra> = Vec::new();
        let mut remaining = dim;
        while remaining > 0 {
            let choice = rng.random_range(0..5);
            let block = match choice {
                0 if remaining >= 3 => Self::sl2(),
                1 if remaining >= 3 => Self::so3(),
                2 if remaining >= 3 => {
                    // Heisenberg: [x, y] = z
                    Self::from_brackets(3, &[(0, 1, vec![(2, 1.0)])]).expect("heisenberg")
                }
                3 if remaining >= 2 => {
                    // R acting on R^n by a random derivation D.
                    let n = rng.random_range(1..remaining.min(4));
                    let mut br = Vec::new();
                    for i in 0..n {
                        let terms = (0..n)
                            .map(|j| (j + 1, rng.sample::<f64, _>(StandardNormal)))
                            .collect();
                        br.push((0, i + 1, terms));
                    }
                    Self::from_brackets(n + 1, &br).expect("semidirect product")
                }
                _ => Self::abelian(1),
            };
            remaining -= block.dim;
            blocks.push(block);
        }
        let mut alg = blocks.remove(0);
        for b in blocks {
            alg = alg.direct_sum(&b);
        }
        loop {
            let p = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let det = p.determinant().abs();
            if det > 0.1 {
                if let Ok(a) = alg.change_basis(&p) {
                    return a;
                }
            }
        }
    }
}

/// An element `mu` of the dual algebra, in the dual basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector(pub DVector<f64>);

impl Covector {
    pub fn new(coords: Vec<f64>) -> Self {
        Covector(DVector::from_vec(coords))
    }

    pub fn zeros(d: usize) -> Self {
        Covector(DVector::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn pair(&self, xi: &DVector<f64>) -> f64 {
        self.0.dot(xi)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn coords(&self) -> &[f64] {
        self.0.as_slice()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubalgebraKind {
    Isotropy,
    Kernel,
    RayIsotropy,
    KerMu,
}

/// A subspace of `g`, stored as a canonical orthonormal basis (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Subalgebra {
    pub basis: DMatrix<f64>,
    pub kind: SubalgebraKind,
}

impl Subalgebra {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        (0..self.dim())
            .map(|j| self.basis.column(j).into_owned())
            .collect()
    }

    /// Subspace inclusion `self ⊆ other`.
    pub fn is_contained_in(&self, other: &Subalgebra) -> bool {
        linalg::span_contains(&other.basis, &self.basis, SUBSPACE_TOL)
    }
}

/// `ad*_xi mu`, the covector `eta -> <mu, [xi, eta]>`.
pub fn coadjoint(alg: &LieAlgebra, xi: &DVector<f64>, mu: &Covector) -> Result<Covector, LieError> {
    alg.check_dim(xi.len())?;
    alg.check_dim(mu.dim())?;
    Ok(Covector(alg.coadjoint_matrix(mu) * xi))
}

fn require_nonzero(mu: &Covector) -> Result<(), LieError> {
    if mu.is_zero() {
        Err(LieError::Domain(
            "the ray through mu = 0 is undefined".into(),
        ))
    } else {
        Ok(())
    }
}

/// `g_mu = { xi : ad*_xi mu = 0 }`.
pub fn isotropy_algebra(alg: &LieAlgebra, mu: &Covector) -> Result<Subalgebra, LieError> {
    alg.check_dim(mu.dim())?;
    let m = alg.coadjoint_matrix(mu);
    Ok(Subalgebra {
        basis: linalg::null_space(&m, alg.scale_for(mu)),
        kind: SubalgebraKind::Isotropy,
    })
}

/// `k_mu = ker(mu restricted to g_mu)`.
pub fn kernel_algebra(alg: &LieAlgebra, mu: &Covector) -> Result<Subalgebra, LieError> {
    let iso = isotropy_algebra(alg, mu)?;
    if iso.dim() == 0 {
        return Ok(Subalgebra {
            basis: DMatrix::zeros(alg.dim(), 0),
            kind: SubalgebraKind::Kernel,
        });
    }
    let functional = mu.0.transpose() * &iso.basis;
    let row = DMatrix::from_row_slice(1, iso.dim(), functional.as_slice());
    let coeffs = linalg::null_space(&row, mu.norm());
    Ok(Subalgebra {
        basis: linalg::canonical_basis(&(&iso.basis * coeffs)),
        kind: SubalgebraKind::Kernel,
    })
}

/// `ker mu` as a subspace of `g`.
pub fn ker_mu(alg: &LieAlgebra, mu: &Covector) -> Result<Subalgebra, LieError> {
    alg.check_dim(mu.dim())?;
    let row = DMatrix::from_row_slice(1, mu.dim(), mu.coords());
    Ok(Subalgebra {
        basis: linalg::null_space(&row, mu.norm()),
        kind: SubalgebraKind::KerMu,
    })
}

fn orthogonal_to_mu(mu: &Covector) -> DMatrix<f64> {
    let u = &mu.0 / mu.norm();
    DMatrix::identity(mu.dim(), mu.dim()) - &u * u.transpose()
}

/// `g_{R+mu} = { xi : ad*_xi mu ∈ R mu }`.
pub fn ray_isotropy_algebra(alg: &LieAlgebra, mu: &Covector) -> Result<Subalgebra, LieError> {
    alg.check_dim(mu.dim())?;
    require_nonzero(mu)?;
    let m = orthogonal_to_mu(mu) * alg.coadjoint_matrix(mu);
    Ok(Subalgebra {
        basis: linalg::null_space(&m, alg.scale_for(mu)),
        kind: SubalgebraKind::RayIsotropy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub dim_ker_mu: usize,
    pub dim_isotropy: usize,
    pub dim_kernel_alg: usize,
    pub dim_ray_isotropy: usize,
    /// `ker mu + g_mu = g`.
    pub sum_condition_holds: bool,
    /// `[g_mu, k_mu] ⊆ k_mu`.
    pub kernel_is_ideal_in_isotropy: bool,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.sum_condition_holds && self.kernel_is_ideal_in_isotropy
    }
}

pub fn check_reduction_hypotheses(
    alg: &LieAlgebra,
    mu: &Covector,
) -> Result<HypothesisReport, LieError> {
    require_nonzero(mu)?;
    let kmu = ker_mu(alg, mu)?;
    let iso = isotropy_algebra(alg, mu)?;
    let kern = kernel_algebra(alg, mu)?;
    let ray = ray_isotropy_algebra(alg, mu)?;

    let mut joined = DMatrix::zeros(alg.dim(), kmu.dim() + iso.dim());
    joined
        .view_mut((0, 0), (alg.dim(), kmu.dim()))
        .copy_from(&kmu.basis);
    joined
        .view_mut((0, kmu.dim()), (alg.dim(), iso.dim()))
        .copy_from(&iso.basis);
    let sum_condition_holds = linalg::rank(&joined, 1.0) == alg.dim();

    let scale = alg.max_abs_constant().max(1.0);
    let kernel_is_ideal_in_isotropy = iso.vectors().iter().all(|a| {
        kern.vectors().iter().all(|b| {
            let br = alg.bracket(a, b);
            linalg::reject(&br, &kern.basis).norm() <= SUBSPACE_TOL * scale
        })
    });

    Ok(HypothesisReport {
        dim_ker_mu: kmu.dim(),
        dim_isotropy: iso.dim(),
        dim_kernel_alg: kern.dim(),
        dim_ray_isotropy: ray.dim(),
        sum_condition_holds,
        kernel_is_ideal_in_isotropy,
    })
}

/// Dimension of `T_mu O_{R+mu} = { ad*_xi mu + r mu }`.
pub fn cone_orbit_tangent_dim(alg: &LieAlgebra, mu: &Covector) -> Result<usize, LieError> {
    alg.check_dim(mu.dim())?;
    require_nonzero(mu)?;
    let m = alg.coadjoint_matrix(mu);
    let d = alg.dim();
    let mut aug = DMatrix::zeros(d, d + 1);
    aug.view_mut((0, 0), (d, d)).copy_from(&m);
    aug.set_column(d, &mu.0);
    Ok(linalg::rank(&aug, alg.scale_for(mu)))
}

/// The two-form `omega_minus` at the identity of the cone orbit, on tangent
/// vectors `(xi1, r1)` and `(xi2, r2)`:
/// `-<r mu, [xi1, xi2]> + r2 <r mu, xi1> - r1 <r mu, xi2>`.
pub fn omega_minus_eval(
    alg: &LieAlgebra,
    mu: &Covector,
    r: f64,
    xi1: &DVector<f64>,
    r1: f64,
    xi2: &DVector<f64>,
    r2: f64,
) -> Result<f64, LieError> {
    alg.check_dim(mu.dim())?;
    alg.check_dim(xi1.len())?;
    alg.check_dim(xi2.len())?;
    require_nonzero(mu)?;
    if r.is_nan() || r <= 0.0 {
        return Err(LieError::Domain(format!(
            "ray parameter must be positive, got {r}"
        )));
    }
    let rmu = &mu.0 * r;
    Ok(-rmu.dot(&alg.bracket(xi1, xi2)) + r2 * rmu.dot(xi1) - r1 * rmu.dot(xi2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn mu(x: &[f64]) -> Covector {
        Covector::new(x.to_vec())
    }

    fn assert_span(sub: &Subalgebra, expected: &[&[f64]]) {
        assert_eq!(sub.dim(), expected.len(), "dimension of {:?}", sub.kind);
        let cols: Vec<DVector<f64>> = expected.iter().map(|e| v(e)).collect();
        let m = linalg::columns_to_matrix(sub.basis.nrows(), &cols);
        assert!(linalg::span_contains(&sub.basis, &m, 1e-12));
        assert!(linalg::span_contains(&m, &sub.basis, 1e-12));
    }

    #[test]
    fn coadjoint_sl2_by_hand() {
        // <e*, [h, eta]>: eta = e gives 2, others 0.
        let out = coadjoint(
            &LieAlgebra::sl2(),
            &v(&[1.0, 0.0, 0.0]),
            &mu(&[0.0, 1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(out.coords(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn coadjoint_trivial_cases() {
        let zero = coadjoint(&LieAlgebra::so3(), &v(&[0.0; 3]), &mu(&[1.0, 2.0, 3.0])).unwrap();
        assert!(zero.is_zero());
        let ab = coadjoint(&LieAlgebra::abelian(2), &v(&[1.0, 3.0]), &mu(&[1.0, 2.0])).unwrap();
        assert!(ab.is_zero());
    }

    #[test]
    fn coadjoint_dimension_mismatch() {
        let err = coadjoint(&LieAlgebra::so3(), &v(&[1.0, 0.0]), &mu(&[1.0, 0.0, 0.0]));
        assert!(matches!(err, Err(LieError::DimensionMismatch { .. })));
    }

    #[test]
    fn isotropy_examples() {
        let sl2 = LieAlgebra::sl2();
        assert_span(
            &isotropy_algebra(&sl2, &mu(&[0.0, 1.0, 0.0])).unwrap(),
            &[&[0.0, 0.0, 1.0]],
        );
        assert_eq!(
            isotropy_algebra(&LieAlgebra::abelian(4), &mu(&[1.0, 0.0, 2.0, 0.0]))
                .unwrap()
                .dim(),
            4
        );
        assert_span(
            &isotropy_algebra(&LieAlgebra::so3(), &mu(&[0.0, 0.0, 1.0])).unwrap(),
            &[&[0.0, 0.0, 1.0]],
        );
    }

    #[test]
    fn kernel_examples() {
        assert_span(
            &kernel_algebra(&LieAlgebra::sl2(), &mu(&[0.0, 1.0, 0.0])).unwrap(),
            &[&[0.0, 0.0, 1.0]],
        );
        assert_span(
            &kernel_algebra(&LieAlgebra::abelian(2), &mu(&[0.0, 1.0])).unwrap(),
            &[&[1.0, 0.0]],
        );
        assert_eq!(
            kernel_algebra(&LieAlgebra::so3(), &mu(&[0.0, 0.0, 1.0]))
                .unwrap()
                .dim(),
            0
        );
    }

    #[test]
    fn ray_isotropy_examples() {
        assert_span(
            &ray_isotropy_algebra(&LieAlgebra::sl2(), &mu(&[0.0, 1.0, 0.0])).unwrap(),
            &[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]],
        );
        assert_eq!(
            ray_isotropy_algebra(&LieAlgebra::abelian(3), &mu(&[1.0, 1.0, 0.0]))
                .unwrap()
                .dim(),
            3
        );
        assert_span(
            &ray_isotropy_algebra(&LieAlgebra::so3(), &mu(&[0.0, 0.0, 1.0])).unwrap(),
            &[&[0.0, 0.0, 1.0]],
        );
        assert!(matches!(
            ray_isotropy_algebra(&LieAlgebra::so3(), &mu(&[0.0; 3])),
            Err(LieError::Domain(_))
        ));
    }

    #[test]
    fn hypotheses_examples() {
        let r = check_reduction_hypotheses(&LieAlgebra::sl2(), &mu(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(
            (r.dim_ker_mu, r.dim_isotropy, r.dim_ray_isotropy),
            (2, 1, 2)
        );
        assert!(!r.sum_condition_holds);
        let r = check_reduction_hypotheses(&LieAlgebra::abelian(2), &mu(&[0.0, 1.0])).unwrap();
        assert!(r.sum_condition_holds && r.kernel_is_ideal_in_isotropy);
        let r = check_reduction_hypotheses(&LieAlgebra::so3(), &mu(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!((r.dim_ker_mu, r.dim_isotropy, r.dim_kernel_alg), (2, 1, 0));
        assert!(r.sum_condition_holds);
        assert!(check_reduction_hypotheses(&LieAlgebra::so3(), &mu(&[0.0; 3])).is_err());
    }

    #[test]
    fn cone_orbit_examples() {
        assert_eq!(
            cone_orbit_tangent_dim(&LieAlgebra::sl2(), &mu(&[0.0, 1.0, 0.0])).unwrap(),
            2
        );
        assert_eq!(
            cone_orbit_tangent_dim(&LieAlgebra::abelian(3), &mu(&[0.0, 1.0, 0.0])).unwrap(),
            1
        );
        assert_eq!(
            cone_orbit_tangent_dim(&LieAlgebra::so3(), &mu(&[0.0, 0.0, 1.0])).unwrap(),
            3
        );
    }

    #[test]
    fn omega_minus_examples() {
        let so3 = LieAlgebra::so3();
        let m = mu(&[0.0, 0.0, 1.0]);
        let e = |i: usize| {
            let mut x = DVector::zeros(3);
            x[i] = 1.0;
            x
        };
        assert_eq!(
            omega_minus_eval(&so3, &m, 1.0, &e(0), 0.0, &e(1), 0.0).unwrap(),
            -1.0
        );
        assert_eq!(
            omega_minus_eval(&so3, &m, 2.0, &e(2), 0.0, &DVector::zeros(3), 1.0).unwrap(),
            2.0
        );
        let x = v(&[0.3, -1.0, 2.0]);
        assert_eq!(
            omega_minus_eval(&so3, &m, 1.5, &x, 0.7, &x, 0.7).unwrap(),
            0.0
        );
        assert!(omega_minus_eval(&so3, &m, 0.0, &x, 0.0, &x, 0.0).is_err());
    }

    #[test]
    fn parse_json_and_catalog() {
        let j: serde_json::Value = serde_json::from_str(
            r#"{"dim": 3, "brackets": [[0,1,[1,2.0]],[0,2,[2,-2.0]],[1,2,[0,1.0]]]}"#,
        )
        .unwrap();
        assert_eq!(LieAlgebra::from_json(&j).unwrap(), LieAlgebra::sl2());
        assert_eq!(LieAlgebra::from_catalog("abelian:4").unwrap().dim(), 4);
        assert!(LieAlgebra::from_catalog("abelian:0").is_err());
        assert!(LieAlgebra::from_catalog("e8").is_err());
        let bad: serde_json::Value =
            serde_json::from_str(r#"{"dim": 3, "brackets": [[1,0,[2,1.0]]]}"#).unwrap();
        assert!(LieAlgebra::from_json(&bad).is_err());
    }

    #[test]
    fn jacobi_violation_rejected() {
        // [e0,e1]=e1, [e1,e2]=e0, [e0,e2]=0 fails Jacobi.
        let err = LieAlgebra::from_brackets(3, &[(0, 1, vec![(1, 1.0)]), (1, 2, vec![(0, 1.0)])]);
        assert!(matches!(err, Err(LieError::Jacobi { .. })));
    }

    #[test]
    fn random_algebras_satisfy_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=8 {
            let a = LieAlgebra::random(&mut rng, d);
            assert_eq!(a.dim(), d);
            assert!(a.jacobi_defect() <= JACOBI_TOL * a.max_abs_constant().powi(2).max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn subalgebra_chain_and_dimension_formula(seed in 0u64..10_000, d in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alg = LieAlgebra::random(&mut rng, d);
            let m = Covector(DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)));
            let iso = isotropy_algebra(&alg, &m).unwrap();
            let ker = kernel_algebra(&alg, &m).unwrap();
            let ray = ray_isotropy_algebra(&alg, &m).unwrap();
            prop_assert!(ker.is_contained_in(&iso));
            prop_assert!(iso.is_contained_in(&ray));
            for k in ker.vectors() {
                prop_assert!(m.pair(&k).abs() <= 1e-10 * m.norm());
            }
            let cone = cone_orbit_tangent_dim(&alg, &m).unwrap();
            prop_assert_eq!(cone + ray.dim(), d + 1);
        }

        #[test]
        fn omega_minus_bilinear_antisymmetric(
            seed in 0u64..10_000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alg = LieAlgebra::so3();
            let g = |rng: &mut ChaCha8Rng| DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let m = Covector(g(&mut rng));
            let (x1, x2, x3) = (g(&mut rng), g(&mut rng), g(&mut rng));
            let (r1, r2, r3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let w = |xa: &DVector<f64>, ra: f64, xb: &DVector<f64>, rb: f64| {
                omega_minus_eval(&alg, &m, 1.3, xa, ra, xb, rb).unwrap()
            };
            prop_assert!((w(&x1, r1, &x2, r2) + w(&x2, r2, &x1, r1)).abs() <= 1e-12);
            let lin = w(&(&x1 * a + &x3 * b), a * r1 + b * r3, &x2, r2);
            let expect = a * w(&x1, r1, &x2, r2) + b * w(&x3, r3, &x2, r2);
            prop_assert!((lin - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }

        #[test]
        fn coadjoint_pairing_antisymmetry(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let alg = LieAlgebra::random(&mut rng, 5);
            let g = |rng: &mut ChaCha8Rng| DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
            let m = Covector(g(&mut rng));
            let (x, y) = (g(&mut rng), g(&mut rng));
            let s = coadjoint(&alg, &x, &m).unwrap().pair(&y) + coadjoint(&alg, &y, &m).unwrap().pair(&x);
            prop_assert!(s.abs() <= 1e-10 * (1.0 + alg.max_abs_constant()));
        }
    }
}
