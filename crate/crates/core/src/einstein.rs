//! Constancy test for the norm of the wedge of holomorphic kernel generators
//! over the ray level set of a torus action on a sphere.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

pub use crate::contact::ConstraintSampleSet;
use crate::contact::{ContactError, ContactSphere};
use crate::dynamics::format_float;
use crate::lie::Covector;

/// Relative standard deviation below which the norm counts as constant.
pub const CONSTANCY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EinsteinError {
    #[error("wedge norm is not finite")]
    NonFinite,
    #[error("generator has {got} components, torus has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Contact(#[from] ContactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Constant,
    NonConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EinsteinVerdict {
    pub norm_values: Vec<f64>,
    pub mean: f64,
    pub relative_std: f64,
    /// `(max - min) / mean`.
    pub relative_range: f64,
    pub verdict: Verdict,
    pub threshold: f64,
    /// Kernel algebra basis vectors used for the wedge.
    pub kernel_basis: Vec<Vec<f64>>,
}

fn check_xi(sphere: &ContactSphere, xi: &DVector<f64>) -> Result<(), EinsteinError> {
    if xi.len() != sphere.torus_dim() {
        return Err(EinsteinError::DimensionMismatch {
            expected: sphere.torus_dim(),
            got: xi.len(),
        });
    }
    Ok(())
}

/// Squared norm of the holomorphic extension of `xi_M` at `z`: `sum_j w_j^2 |z_j|^2`
/// with `w = W^T xi`.
pub fn holomorphic_norm_sq(
    sphere: &ContactSphere,
    xi: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<f64, EinsteinError> {
    check_xi(sphere, xi)?;
    sphere.check_point(z)?;
    let w = sphere.coordinate_weights(xi);
    Ok(w.component_mul(&w).dot(&sphere.moduli_sq(z)))
}

/// `sqrt(det G)` with `G_ab` the inner products of the holomorphic extensions
/// of the basis generators at `z`. An empty basis has norm 1.
///
/// `G = M^T M` with `M_ja = w_aj |z_j|`, so the norm is `|det R|` for `M = QR`;
/// this avoids the cancellation of forming `G` for nearly dependent generators.
pub fn multivector_norm(
    sphere: &ContactSphere,
    basis: &[DVector<f64>],
    z: &DVector<f64>,
) -> Result<f64, EinsteinError> {
    sphere.check_point(z)?;
    for xi in basis {
        check_xi(sphere, xi)?;
    }
    if basis.is_empty() {
        return Ok(1.0);
    }
    let m = sphere.complex_dim();
    if basis.len() > m {
        return Ok(0.0);
    }
    let moduli = sphere.moduli_sq(z).map(f64::sqrt);
    let mut cols = DMatrix::zeros(m, basis.len());
    for (a, xi) in basis.iter().enumerate() {
        cols.set_column(a, &sphere.coordinate_weights(xi).component_mul(&moduli));
    }
    let norm = cols
        .qr()
        .r()
        .diagonal()
        .iter()
        .map(|r| r.abs())
        .product::<f64>();
    if !norm.is_finite() {
        return Err(EinsteinError::NonFinite);
    }
    Ok(norm)
}

/// Samples `J^{-1}(R+ mu)`, evaluates the wedge norm of the kernel algebra
/// basis and tests it for constancy.
pub fn einstein_verdict(
    sphere: &ContactSphere,
    mu: &Covector,
    count: usize,
    seed: u64,
) -> Result<EinsteinVerdict, EinsteinError> {
    let samples = sphere.sample_ray_level(mu, count, seed)?;
    einstein_verdict_on(sphere, mu, &samples)
}

pub fn einstein_verdict_on(
    sphere: &ContactSphere,
    mu: &Covector,
    samples: &ConstraintSampleSet,
) -> Result<EinsteinVerdict, EinsteinError> {
    let kappa = sphere.kernel_basis(mu)?;
    let basis: Vec<DVector<f64>> = kappa.column_iter().map(|c| c.into_owned()).collect();
    let norm_values = samples
        .points
        .iter()
        .map(|z| multivector_norm(sphere, &basis, z))
        .collect::<Result<Vec<_>, _>>()?;
    let (mean, relative_std, relative_range) = spread(&norm_values);
    Ok(EinsteinVerdict {
        norm_values,
        mean,
        relative_std,
        relative_range,
        verdict: if relative_std <= CONSTANCY_THRESHOLD {
            Verdict::Constant
        } else {
            Verdict::NonConstant
        },
        threshold: CONSTANCY_THRESHOLD,
        kernel_basis: basis.iter().map(|b| b.iter().copied().collect()).collect(),
    })
}

/// Mean, population standard deviation over `|mean|`, and range over `|mean|`.
fn spread(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if mean.abs() == 0.0 {
        let flat = if max == min { 0.0 } else { f64::INFINITY };
        return (mean, flat, flat);
    }
    (mean, var.sqrt() / mean.abs(), (max - min) / mean.abs())
}

/// Rows `re_z0,im_z0,...,norm`.
pub fn samples_csv(samples: &ConstraintSampleSet, verdict: &EinsteinVerdict) -> String {
    let Some(first) = samples.points.first() else {
        return "norm\n".to_string();
    };
    let m = first.len() / 2;
    let mut header: Vec<String> = (0..m)
        .flat_map(|j| [format!("re_z{j}"), format!("im_z{j}")])
        .collect();
    header.push("norm".into());
    let mut out = header.join(",");
    out.push('\n');
    for (z, norm) in samples.points.iter().zip(&verdict.norm_values) {
        let row: Vec<String> = z
            .iter()
            .chain(std::iter::once(norm))
            .map(|&v| format_float(v))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::SphereScenario;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn unweighted_generator_has_unit_norm() {
        let sc = SphereScenario::from_catalog("s7-unweighted").unwrap();
        let xi = dv(&[-1.0, 1.0]);
        assert_eq!(
            sc.sphere.coordinate_weights(&xi).as_slice(),
            &[1.0, -1.0, 1.0, 1.0]
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let z = sc.sphere.random_point(&mut rng);
            assert!((holomorphic_norm_sq(&sc.sphere, &xi, &z).unwrap() - 1.0).abs() <= 1e-14);
            assert_eq!(
                holomorphic_norm_sq(&sc.sphere, &dv(&[0.0, 0.0]), &z).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn weighted_generator_norm() {
        // Kernel generator (1, -1) has coordinate weights (l0, -l1, 0, 0).
        let sc = SphereScenario::from_catalog("s7-weighted:1:2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = sc.sphere.sample_ray_level(&sc.mu, 50, 4).unwrap();
        for z in &set.points {
            let s = sc.sphere.moduli_sq(z);
            let n = holomorphic_norm_sq(&sc.sphere, &dv(&[1.0, -1.0]), z).unwrap();
            // On the level set |z0|^2 = 2 |z1|^2, so the norm is sqrt(6) |z1|.
            assert!((n.sqrt() - 6f64.sqrt() * s[1].sqrt()).abs() <= 1e-10);
        }
        let z = sc.sphere.random_point(&mut rng);
        let n = holomorphic_norm_sq(&sc.sphere, &dv(&[0.0, 1.0]), &z).unwrap();
        assert!((n.sqrt() - 2.0 * sc.sphere.moduli_sq(&z)[1].sqrt()).abs() <= 1e-14);
    }

    #[test]
    fn equal_weights_match_closed_form() {
        // l0 = l1 = l: the kernel generator norm is sqrt(2) |l| |z1| on the level set.
        let sc = SphereScenario::from_catalog("s7-weighted:3:3").unwrap();
        let set = sc.sphere.sample_ray_level(&sc.mu, 50, 9).unwrap();
        for z in &set.points {
            let n = holomorphic_norm_sq(&sc.sphere, &dv(&[1.0, -1.0]), z)
                .unwrap()
                .sqrt();
            let z1 = sc.sphere.moduli_sq(z)[1].sqrt();
            assert!((n - 2f64.sqrt() * 3.0 * z1).abs() <= 1e-10);
        }
    }

    #[test]
    fn multivector_examples() {
        let sc = SphereScenario::from_catalog("s7-unweighted").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = sc.sphere.random_point(&mut rng);
        let xi = dv(&[0.3, -1.2]);
        let single = multivector_norm(&sc.sphere, std::slice::from_ref(&xi), &z).unwrap();
        assert!((single - holomorphic_norm_sq(&sc.sphere, &xi, &z).unwrap().sqrt()).abs() <= 1e-15);

        // The two rows of W have disjoint support: diagonal Gram.
        let (a, b) = (dv(&[1.0, 0.0]), dv(&[0.0, 1.0]));
        let pair = multivector_norm(&sc.sphere, &[a.clone(), b.clone()], &z).unwrap();
        let prod = holomorphic_norm_sq(&sc.sphere, &a, &z).unwrap().sqrt()
            * holomorphic_norm_sq(&sc.sphere, &b, &z).unwrap().sqrt();
        assert!((pair - prod).abs() <= 1e-14);

        let zero = multivector_norm(&sc.sphere, &[a.clone(), dv(&[0.0, 0.0])], &z).unwrap();
        assert_eq!(zero, 0.0);
        assert_eq!(multivector_norm(&sc.sphere, &[], &z).unwrap(), 1.0);
        assert!(multivector_norm(&sc.sphere, &[dv(&[1.0])], &z).is_err());
    }

    #[test]
    fn verdict_examples() {
        let sc = SphereScenario::from_catalog("s7-unweighted").unwrap();
        let v = einstein_verdict(&sc.sphere, &sc.mu, 1000, 1).unwrap();
        assert_eq!(v.verdict, Verdict::Constant);
        assert!(v.relative_std <= 1e-9);
        assert_eq!(v.kernel_basis.len(), 1);

        let sc = SphereScenario::from_catalog("s7-weighted:1:2").unwrap();
        let v = einstein_verdict(&sc.sphere, &sc.mu, 1000, 1).unwrap();
        assert_eq!(v.verdict, Verdict::NonConstant);
        assert!(v.relative_range >= 0.1);

        let sc = SphereScenario::from_catalog("s3-cone").unwrap();
        let v = einstein_verdict(&sc.sphere, &sc.mu, 100, 1).unwrap();
        assert!(v.kernel_basis.is_empty());
        assert!(v.norm_values.iter().all(|&n| n == 1.0));
        assert_eq!(v.verdict, Verdict::Constant);

        let bad = Covector::new(vec![-1.0, -1.0]);
        assert!(einstein_verdict(&sc.sphere, &Covector::new(vec![-1.0]), 10, 1).is_err());
        let w = SphereScenario::from_catalog("s7-weighted:1:2").unwrap();
        assert!(matches!(
            einstein_verdict(&w.sphere, &bad, 10, 1),
            Err(EinsteinError::Contact(ContactError::Infeasible))
        ));
    }

    #[test]
    fn verdicts_stable_across_seeds() {
        for seed in 1..=10 {
            for (key, expected) in [
                ("s7-unweighted", Verdict::Constant),
                ("s7-weighted:1:2", Verdict::NonConstant),
            ] {
                let sc = SphereScenario::from_catalog(key).unwrap();
                assert_eq!(
                    einstein_verdict(&sc.sphere, &sc.mu, 1000, seed)
                        .unwrap()
                        .verdict,
                    expected
                );
            }
        }
    }

    #[test]
    fn csv_layout() {
        let sc = SphereScenario::from_catalog("s3-cone").unwrap();
        let set = sc.sphere.sample_ray_level(&sc.mu, 3, 1).unwrap();
        let v = einstein_verdict_on(&sc.sphere, &sc.mu, &set).unwrap();
        let csv = samples_csv(&set, &v);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "re_z0,im_z0,re_z1,im_z1,norm");
        assert_eq!(lines.len(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn norm_is_torus_invariant(seed in 0u64..1_000_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for key in ["s7-unweighted", "s7-weighted:1:2"] {
                let sc = SphereScenario::from_catalog(key).unwrap();
                let z = sc.sphere.random_point(&mut rng);
                let basis: Vec<DVector<f64>> = (0..2).map(|_| dv(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])).collect();
                let g = dv(&[rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0)]);
                let gz = sc.sphere.torus_act(&g, &z).normalize();
                let a = multivector_norm(&sc.sphere, &basis, &z).unwrap();
                let b = multivector_norm(&sc.sphere, &basis, &gz).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            }
        }

        #[test]
        fn norm_scales_multilinearly(seed in 0u64..1_000_000, c in -5.0f64..5.0, k in 1usize..3) {
            let sc = SphereScenario::from_catalog("s7-unweighted").unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = sc.sphere.random_point(&mut rng);
            let basis: Vec<DVector<f64>> = (0..k).map(|_| dv(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])).collect();
            let scaled: Vec<DVector<f64>> = basis.iter().map(|b| b * c).collect();
            let a = multivector_norm(&sc.sphere, &basis, &z).unwrap();
            let b = multivector_norm(&sc.sphere, &scaled, &z).unwrap();
            prop_assert!((b - c.abs().powi(k as i32) * a).abs() <= 1e-12 * (1.0 + b));
        }
    }
}
