//! Fixed-step integration of conformal Hamiltonian flows and the checks that
//! run on the resulting trajectories.
//!
//! Two integrators are available. `Rk4` is the classical fourth-order method
//! applied to the conformal field, with `F = ∫ f` carried as an extra state
//! component so the quadrature has the same order as the trajectory.
//! `ConformalSplit` needs a constant `f = k`: a kick/drift/kick leapfrog for
//! `X_H` followed by the exact scaling `p <- exp(-k dt) p`.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::{ConformalSystem, PhasePoint, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    ConformalSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub method: Method,
    pub dt: f64,
    pub t_final: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid integrator spec: {0}")]
    InvalidSpec(String),
    #[error("initial state has dimension {got}, system expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial state is not finite")]
    NonFiniteInitial,
    #[error("conformal_split requires a constant f")]
    NonConstantF,
    #[error("state became non-finite after t = {last_valid_time}")]
    NonFinite { last_valid_time: f64 },
}

impl IntegratorSpec {
    pub fn rk4(dt: f64, t_final: f64) -> Self {
        IntegratorSpec {
            method: Method::Rk4,
            dt,
            t_final,
        }
    }

    pub fn conformal_split(dt: f64, t_final: f64) -> Self {
        IntegratorSpec {
            method: Method::ConformalSplit,
            dt,
            t_final,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DynamicsError::InvalidSpec(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(DynamicsError::InvalidSpec(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.dt > self.t_final {
            return Err(DynamicsError::InvalidSpec(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }

    /// Number of steps; the step actually taken is `t_final / steps`.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

/// Sampled solution with the cumulative integral of `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub f_integral: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> &PhasePoint {
        &self.states[0]
    }

    pub fn last(&self) -> &PhasePoint {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }
}

pub fn integrate(
    system: &ConformalSystem,
    x0: &PhasePoint,
    spec: &IntegratorSpec,
) -> Result<Trajectory, DynamicsError> {
    spec.validate()?;
    if x0.dim() != system.dim() {
        return Err(DynamicsError::DimensionMismatch {
            expected: system.dim(),
            got: x0.dim(),
        });
    }
    if !x0.is_finite() {
        return Err(DynamicsError::NonFiniteInitial);
    }
    let k = match spec.method {
        Method::Rk4 => None,
        Method::ConformalSplit => Some(
            system
                .conformal()
                .constant_value()
                .ok_or(DynamicsError::NonConstantF)?,
        ),
    };
    let n_steps = spec.steps();
    let h = spec.t_final / n_steps as f64;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        f_integral: Vec::with_capacity(n_steps + 1),
    };
    traj.times.push(0.0);
    traj.states.push(x0.clone());
    traj.f_integral.push(0.0);
    let mut x = x0.clone();
    let mut big_f = 0.0;
    for i in 1..=n_steps {
        let t = i as f64 * h;
        match k {
            None => {
                let (next, df) = rk4_step(system, &x, h);
                x = next;
                big_f += df;
            }
            Some(k) => {
                x = split_step(system, &x, h, k);
                big_f = k * t;
            }
        }
        if !x.is_finite() || !big_f.is_finite() {
            return Err(DynamicsError::NonFinite {
                last_valid_time: traj.times[i - 1],
            });
        }
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.f_integral.push(big_f);
    }
    Ok(traj)
}

/// Integrates several initial conditions on scoped threads.
pub fn integrate_batch(
    system: &ConformalSystem,
    initial: &[PhasePoint],
    spec: &IntegratorSpec,
) -> Vec<Result<Trajectory, DynamicsError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = initial
            .iter()
            .map(|x0| s.spawn(move || integrate(system, x0, spec)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("integration thread panicked"))
            .collect()
    })
}

fn rk4_step(system: &ConformalSystem, x: &PhasePoint, h: f64) -> (PhasePoint, f64) {
    let k1 = system.conformal_field(x);
    let f1 = system.f(x);
    let x2 = x.axpy(0.5 * h, &k1);
    let k2 = system.conformal_field(&x2);
    let f2 = system.f(&x2);
    let x3 = x.axpy(0.5 * h, &k2);
    let k3 = system.conformal_field(&x3);
    let f3 = system.f(&x3);
    let x4 = x.axpy(h, &k3);
    let k4 = system.conformal_field(&x4);
    let f4 = system.f(&x4);
    let incr = TangentVector {
        dq: (&k1.dq + &k2.dq * 2.0 + &k3.dq * 2.0 + &k4.dq) / 6.0,
        dp: (&k1.dp + &k2.dp * 2.0 + &k3.dp * 2.0 + &k4.dp) / 6.0,
    };
    (x.axpy(h, &incr), h * (f1 + 2.0 * f2 + 2.0 * f3 + f4) / 6.0)
}

fn split_step(system: &ConformalSystem, x: &PhasePoint, h: f64, k: f64) -> PhasePoint {
    let ham = system.hamiltonian();
    let (hq, _) = ham.gradient(x);
    let mut y = PhasePoint {
        q: x.q.clone(),
        p: &x.p - hq * (0.5 * h),
    };
    let (_, hp) = ham.gradient(&y);
    y.q += hp * h;
    let (hq, _) = ham.gradient(&y);
    y.p -= hq * (0.5 * h);
    y.p *= (-k * h).exp();
    y
}

fn predicted_momentum(j0: &DVector<f64>, f_integral: f64) -> DVector<f64> {
    j0 * (-f_integral).exp()
}

/// Row-wise normalized deviation of `J` from `exp(-∫f) J(x0)`.
fn residual_at(j: &DVector<f64>, pred: &DVector<f64>, j0: &DVector<f64>) -> f64 {
    (0..j.len())
        .map(|i| (j[i] - pred[i]).abs() / (1.0 + j0[i].abs()))
        .fold(0.0, f64::max)
}

/// `max_{t, i} |J_i(x(t)) - exp(-∫_0^t f) J_i(x(0))| / (1 + |J_i(x(0))|)`.
pub fn decay_residual(system: &ConformalSystem, traj: &Trajectory) -> f64 {
    let j0 = system.momentum_map(traj.initial()).0;
    traj.states
        .iter()
        .zip(&traj.f_integral)
        .map(|(x, &big_f)| {
            residual_at(
                &system.momentum_map(x).0,
                &predicted_momentum(&j0, big_f),
                &j0,
            )
        })
        .fold(0.0, f64::max)
}

/// Centered-difference check of `dH/dt = -f (p . dH/dp)`.
///
/// Uses the fourth-order five-point stencil on samples with two neighbours on
/// each side (uniform steps), and the three-point stencil on shorter runs.
pub fn dissipation_check(system: &ConformalSystem, traj: &Trajectory) -> f64 {
    let h: Vec<f64> = traj.states.iter().map(|x| system.energy(x)).collect();
    let len = traj.len();
    let residual = |i: usize, rate: f64| {
        let x = &traj.states[i];
        let (_, hp) = system.hamiltonian().gradient(x);
        let expect = -system.f(x) * x.p.dot(&hp);
        (rate - expect).abs() / (1.0 + h[i].abs())
    };
    if len >= 5 {
        (2..len - 2)
            .map(|i| {
                let step = (traj.times[i + 2] - traj.times[i - 2]) / 4.0;
                let rate = (h[i - 2] - 8.0 * h[i - 1] + 8.0 * h[i + 1] - h[i + 2]) / (12.0 * step);
                residual(i, rate)
            })
            .fold(0.0, f64::max)
    } else {
        (1..len.saturating_sub(1))
            .map(|i| {
                residual(
                    i,
                    (h[i + 1] - h[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]),
                )
            })
            .fold(0.0, f64::max)
    }
}

/// CSV with one row per sample: time, state, `H`, `f`, `J`, predicted `J`
/// and the row residual. Numbers carry 17 significant digits.
pub fn trajectory_csv(system: &ConformalSystem, traj: &Trajectory) -> String {
    let n = system.dim();
    let k = system.algebra().dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.push("H".into());
    header.push("f".into());
    header.extend((1..=k).map(|i| format!("J{i}")));
    header.extend((1..=k).map(|i| format!("Jpred{i}")));
    header.push("residual".into());
    let mut out = header.join(",");
    out.push('\n');
    let j0 = system.momentum_map(traj.initial()).0;
    for ((t, x), &big_f) in traj.times.iter().zip(&traj.states).zip(&traj.f_integral) {
        let j = system.momentum_map(x).0;
        let pred = predicted_momentum(&j0, big_f);
        let mut row: Vec<f64> = vec![*t];
        row.extend(x.q.iter());
        row.extend(x.p.iter());
        row.push(system.energy(x));
        row.push(system.f(x));
        row.extend(j.iter());
        row.extend(pred.iter());
        row.push(residual_at(&j, &pred, &j0));
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Scientific notation with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}
