//! Cross-module checks: dynamics, reduction and equilibria on shared systems.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rayreduce::dynamics::{integrate, IntegratorSpec};
use rayreduce::equilibria::{rayleigh_family_point, re_residual, solve_re, verify_re_flow};
use rayreduce::lie::Covector;
use rayreduce::phase::{ConformalSystem, PhasePoint};
use rayreduce::reduction::{rayleigh_reduced_coords, rayleigh_reduced_embed, RayConstraint};

fn rayleigh_constraint() -> RayConstraint {
    RayConstraint::new(ConformalSystem::rayleigh4(), Covector::new(vec![0.0, 1.0])).unwrap()
}

#[test]
fn sampled_constraint_points_stay_on_the_ray() {
    let c = rayleigh_constraint();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let x = c.sample_point(&mut rng).unwrap();
        let traj = integrate(c.system(), &x, &IntegratorSpec::rk4(1e-2, 1.0)).unwrap();
        for y in &traj.states {
            assert!(c.residual(y).amax() <= 1e-9);
            assert!(c.t(y) > 0.0);
        }
    }
}

#[test]
fn gauge_fixed_points_embed_back() {
    let c = rayleigh_constraint();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let x = c.sample_point(&mut rng).unwrap();
        let fixed = c.gauge_fix(&x).unwrap().point;
        let back = rayleigh_reduced_embed(&rayleigh_reduced_coords(&fixed));
        assert!(back.distance(&fixed) <= 1e-12);
        let m = c.system().momentum_map(&fixed);
        let m0 = c.system().momentum_map(&x);
        assert!((m.0 - m0.0).amax() <= 1e-10);
    }
}

#[test]
fn family_equilibria_move_along_orbits() {
    let sys = ConformalSystem::rayleigh4();
    let mu = Covector::new(vec![0.0, 1.0]);
    let x = rayleigh_family_point(1.5);
    let re = solve_re(&sys, &mu, &x, &DVector::from_vec(vec![0.0, 1.0])).unwrap();
    assert!(re_residual(&sys, &re.x, &re.xi).amax() <= 1e-10);
    assert!(verify_re_flow(&sys, &re, 2.0, 1e-3).unwrap() <= 1e-6);
    // f vanishes on the family, so the energy is conserved.
    let traj = integrate(&sys, &re.x, &IntegratorSpec::rk4(1e-3, 2.0)).unwrap();
    let e0 = sys.energy(&re.x);
    assert!(traj
        .states
        .iter()
        .all(|y| (sys.energy(y) - e0).abs() <= 1e-10));
}

#[test]
fn reduced_system_matches_ambient_decay() {
    let c = rayleigh_constraint();
    let x0 = PhasePoint::new(vec![0.6, 0.8, 0.0, 1.0], vec![0.12, 0.16, -1.0, 0.3]);
    let y0 = rayleigh_reduced_coords(&c.gauge_fix(&x0).unwrap().point);
    let spec = IntegratorSpec::rk4(1e-3, 1.0);
    let amb = integrate(c.system(), &x0, &spec).unwrap();
    let red = integrate(&ConformalSystem::rayleigh4_reduced(), &y0, &spec).unwrap();
    for (a, b) in amb.f_integral.iter().zip(&red.f_integral) {
        assert!((a - b).abs() <= 1e-10);
    }
}
