//! Swing-equation dynamics of an n-bus grid with droop-controlled inverters.
//!
//! Each bus `i` follows
//!
//! ```text
//! dθ_i/dt = ω_i
//! M_i dω_i/dt = p_i - p_e,i - D_i ω_i - k_i ω_i
//! p_e,i = Σ_{j≠i} B_ij sin(θ_i - θ_j)
//! ```
//!
//! where `k_i ω_i` is the inverter's droop response. The droop vector is passed
//! separately from [`GridParams`] so that attacks can substitute coefficients
//! step by step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod equilibrium;

pub use equilibrium::{solve_equilibrium, solve_equilibrium_report, EquilibriumReport};

/// Any state component whose magnitude exceeds this is treated as divergence.
pub const OVERFLOW_THRESHOLD: f64 = 1e6;

/// Static physical description of the grid, all in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    /// `M_i > 0`.
    pub inertia: Vec<f64>,
    /// `D_i >= 0`.
    pub damping: Vec<f64>,
    /// Symmetric, zero diagonal, nonnegative off-diagonal.
    pub susceptance: Vec<Vec<f64>>,
    /// Net injections `p_i`.
    pub injection: Vec<f64>,
    /// Designed droop coefficients `k_i`.
    pub droop: Vec<f64>,
}

impl GridParams {
    pub fn n(&self) -> usize {
        self.inertia.len()
    }

    /// Checks every structural invariant. Field paths in errors are relative
    /// to the parameter block (`inertia[2]`, `susceptance[0][1]`, ...).
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::config("inertia", "at least one bus is required"));
        }
        for (name, v) in [
            ("damping", &self.damping),
            ("injection", &self.injection),
            ("droop", &self.droop),
        ] {
            if v.len() != n {
                return Err(Error::config(
                    name,
                    format!("expected {n} entries, found {}", v.len()),
                ));
            }
        }
        for (name, v) in [
            ("inertia", &self.inertia),
            ("damping", &self.damping),
            ("injection", &self.injection),
            ("droop", &self.droop),
        ] {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::config(format!("{name}[{i}]"), "value must be finite"));
            }
        }
        if let Some(i) = self.inertia.iter().position(|&m| m <= 0.0) {
            return Err(Error::config(
                format!("inertia[{i}]"),
                format!("inertia must be positive, found {}", self.inertia[i]),
            ));
        }
        if let Some(i) = self.damping.iter().position(|&d| d < 0.0) {
            return Err(Error::config(
                format!("damping[{i}]"),
                format!("damping must be nonnegative, found {}", self.damping[i]),
            ));
        }
        if self.susceptance.len() != n {
            return Err(Error::config(
                "susceptance",
                format!("expected {n} rows, found {}", self.susceptance.len()),
            ));
        }
        for (i, row) in self.susceptance.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(
                    format!("susceptance[{i}]"),
                    format!("expected {n} columns, found {}", row.len()),
                ));
            }
            for (j, &b) in row.iter().enumerate() {
                let field = format!("susceptance[{i}][{j}]");
                if !b.is_finite() {
                    return Err(Error::config(field, "value must be finite"));
                }
                if i == j && b != 0.0 {
                    return Err(Error::config(field, "diagonal must be zero"));
                }
                if b < 0.0 {
                    return Err(Error::config(field, "susceptance must be nonnegative"));
                }
                if b != self.susceptance[j][i] {
                    return Err(Error::config(
                        field,
                        format!("matrix must be symmetric, B[{j}][{i}] = {}", self.susceptance[j][i]),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Phase angles (rad) and frequency deviations (pu) of every bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl GridState {
    pub fn zeros(n: usize) -> Self {
        GridState {
            theta: vec![0.0; n],
            omega: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// Index of the first component that is non-finite or beyond
    /// [`OVERFLOW_THRESHOLD`].
    pub fn first_diverged_bus(&self) -> Option<usize> {
        let bad = |x: &f64| !x.is_finite() || x.abs() > OVERFLOW_THRESHOLD;
        let a = self.theta.iter().position(bad);
        let b = self.omega.iter().position(bad);
        match (a, b) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// States at `t = 0, dt, 2dt, ...`; `states[0]` is the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<GridState>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn last(&self) -> &GridState {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

fn check_len(field: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::config(
            field,
            format!("dimension mismatch: expected {expected}, found {found}"),
        ));
    }
    Ok(())
}

/// Line power flowing out of each bus: `p_e,i = Σ_{j≠i} B_ij sin(θ_i - θ_j)`.
pub fn electrical_power(params: &GridParams, theta: &[f64]) -> Result<Vec<f64>> {
    check_len("theta", params.n(), theta.len())?;
    Ok(electrical_power_unchecked(params, theta))
}

pub(crate) fn electrical_power_unchecked(params: &GridParams, theta: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(&params.susceptance)
        .map(|(&ti, row)| {
            row.iter()
                .zip(theta)
                .filter(|(&b, _)| b != 0.0)
                .map(|(&b, &tj)| b * (ti - tj).sin())
                .sum()
        })
        .collect()
}

/// Inverter output under a droop rule, `k_i ω_i`.
pub fn droop_power(k_effective: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
    check_len("omega", k_effective.len(), omega.len())?;
    Ok(k_effective.iter().zip(omega).map(|(k, w)| k * w).collect())
}

/// Time derivatives `(dθ, dω)` of the swing equation under the given droop vector.
pub fn derivatives(
    params: &GridParams,
    state: &GridState,
    k_effective: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = params.n();
    check_len("state.theta", n, state.theta.len())?;
    check_len("state.omega", n, state.omega.len())?;
    check_len("k_effective", n, k_effective.len())?;

    let p_e = electrical_power_unchecked(params, &state.theta);
    let p_ibr = droop_power(k_effective, &state.omega)?;
    let mut domega = Vec::with_capacity(n);
    for i in 0..n {
        let bracket =
            params.injection[i] - p_e[i] - params.damping[i] * state.omega[i] - p_ibr[i];
        let d = bracket / params.inertia[i];
        if !d.is_finite() {
            return Err(Error::NumericOverflow { bus: i, step: None });
        }
        domega.push(d);
    }
    Ok((state.omega.clone(), domega))
}

/// One explicit-Euler step `x + dt·f(x)`.
pub fn euler_step(
    params: &GridParams,
    state: &GridState,
    k_effective: &[f64],
    dt: f64,
) -> Result<GridState> {
    if dt.is_nan() || dt < 0.0 {
        return Err(Error::config("dt", format!("timestep must be nonnegative, found {dt}")));
    }
    let (dtheta, domega) = derivatives(params, state, k_effective)?;
    let next = GridState {
        theta: state.theta.iter().zip(&dtheta).map(|(x, d)| x + dt * d).collect(),
        omega: state.omega.iter().zip(&domega).map(|(x, d)| x + dt * d).collect(),
    };
    match next.first_diverged_bus() {
        Some(bus) => Err(Error::NumericOverflow { bus, step: None }),
        None => Ok(next),
    }
}

/// Integrates `steps` Euler steps from `initial`.
///
/// `schedule[t]` is the droop vector applied on the transition `t -> t+1`;
/// without a schedule the designed droop is used throughout. On divergence the
/// returned [`Error::SimulationAborted`] carries the finite prefix.
pub fn simulate(
    params: &GridParams,
    initial: &GridState,
    steps: usize,
    dt: f64,
    schedule: Option<&[Vec<f64>]>,
) -> Result<Trajectory> {
    params.validate()?;
    check_len("initial.theta", params.n(), initial.theta.len())?;
    check_len("initial.omega", params.n(), initial.omega.len())?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::config("dt", format!("timestep must be positive, found {dt}")));
    }
    if let Some(s) = schedule {
        check_len("schedule", steps, s.len())?;
    }

    let mut states = Vec::with_capacity(steps + 1);
    states.push(initial.clone());
    for t in 0..steps {
        let k = schedule.map_or(params.droop.as_slice(), |s| s[t].as_slice());
        match euler_step(params, &states[t], k, dt) {
            Ok(next) => states.push(next),
            Err(Error::NumericOverflow { bus, .. }) => {
                return Err(Error::SimulationAborted {
                    step: t + 1,
                    source: Box::new(Error::NumericOverflow { bus, step: Some(t + 1) }),
                    partial: Box::new(Trajectory { dt, states }),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory { dt, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn two_bus(p: f64) -> GridParams {
        GridParams {
            inertia: vec![1.0, 1.0],
            damping: vec![1.0, 1.0],
            susceptance: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            injection: vec![p, -p],
            droop: vec![1.0, 1.0],
        }
    }

    fn single_bus() -> GridParams {
        GridParams {
            inertia: vec![1.0],
            damping: vec![1.0],
            susceptance: vec![vec![0.0]],
            injection: vec![0.0],
            droop: vec![0.0],
        }
    }

    #[test]
    fn electrical_power_two_bus() {
        let p = two_bus(0.0);
        assert_eq!(electrical_power(&p, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let pe = electrical_power(&p, &[FRAC_PI_2, 0.0]).unwrap();
        assert_eq!(pe, vec![1.0, -1.0]);
    }

    #[test]
    fn electrical_power_rejects_wrong_length() {
        let err = electrical_power(&two_bus(0.0), &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn droop_power_cases() {
        assert_eq!(droop_power(&[2.0], &[0.5]).unwrap(), vec![1.0]);
        assert_eq!(droop_power(&[3.0, -7.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(droop_power(&[-1.0], &[0.1]).unwrap(), vec![-0.1]);
        assert!(droop_power(&[1.0], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn derivatives_single_bus_by_hand() {
        let s = GridState { theta: vec![0.0], omega: vec![0.01] };
        let (dth, dom) = derivatives(&single_bus(), &s, &[0.0]).unwrap();
        assert_eq!(dth, vec![0.01]);
        assert_eq!(dom, vec![-0.01]);
    }

    #[test]
    fn derivatives_vanish_at_equilibrium_for_any_droop() {
        let p = two_bus(0.5);
        let eq = solve_equilibrium(&p).unwrap();
        for k in [[-1.0, 0.0], [5.0, 1.0]] {
            let (dth, dom) = derivatives(&p, &eq, &k).unwrap();
            assert_eq!(dth, vec![0.0, 0.0]);
            assert!(dom.iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn doubling_inertia_halves_acceleration() {
        let mut p = two_bus(0.3);
        let s = GridState { theta: vec![0.2, -0.1], omega: vec![0.05, -0.02] };
        let (_, a) = derivatives(&p, &s, &[1.0, 1.0]).unwrap();
        p.inertia[1] *= 2.0;
        let (_, b) = derivatives(&p, &s, &[1.0, 1.0]).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1] / 2.0, b[1]);
    }

    #[test]
    fn derivatives_report_overflow_bus() {
        let mut p = two_bus(0.0);
        p.injection[1] = f64::MAX;
        let s = GridState { theta: vec![0.0, 0.0], omega: vec![0.0, -1e300] };
        let err = derivatives(&p, &s, &[0.0, f64::MAX]).unwrap_err();
        assert!(matches!(err, Error::NumericOverflow { bus: 1, .. }), "{err}");
    }

    #[test]
    fn euler_step_cases() {
        let p = single_bus();
        let s = GridState { theta: vec![0.0], omega: vec![0.01] };
        assert_eq!(euler_step(&p, &s, &[0.0], 0.0).unwrap(), s);
        let next = euler_step(&p, &s, &[0.0], 0.01).unwrap();
        assert!((next.theta[0] - 1.0e-4).abs() < 1e-18);
        assert!((next.omega[0] - 0.0099).abs() < 1e-18);
        assert!(euler_step(&p, &s, &[0.0], -0.01).is_err());
    }

    #[test]
    fn euler_step_flags_threshold_crossing() {
        let p = single_bus();
        let s = GridState { theta: vec![0.0], omega: vec![1e6] };
        // strong negative droop pushes ω from 1e6 to ~3e6 in one step
        let err = euler_step(&p, &s, &[-200.0], 0.01).unwrap_err();
        assert!(matches!(err, Error::NumericOverflow { bus: 0, .. }));
    }

    #[test]
    fn simulate_zero_steps_and_fixed_point() {
        let p = two_bus(0.5);
        let eq = solve_equilibrium(&p).unwrap();
        let traj = simulate(&p, &eq, 0, 0.01, None).unwrap();
        assert_eq!(traj.states, vec![eq.clone()]);
        let traj = simulate(&p, &eq, 100, 0.01, None).unwrap();
        assert_eq!(traj.states.len(), 101);
        for s in &traj.states {
            assert!(s.omega.iter().all(|w| w.abs() <= 1e-12));
        }
    }

    #[test]
    fn simulate_checks_schedule_length() {
        let p = two_bus(0.0);
        let sched = vec![vec![1.0, 1.0]; 3];
        assert!(simulate(&p, &GridState::zeros(2), 4, 0.01, Some(&sched)).is_err());
    }

    #[test]
    fn simulate_returns_partial_trajectory_on_divergence() {
        let p = single_bus();
        let s = GridState { theta: vec![0.0], omega: vec![1.0] };
        let sched = vec![vec![-1000.0]; 50];
        match simulate(&p, &s, 50, 0.01, Some(&sched)) {
            Err(Error::SimulationAborted { step, partial, .. }) => {
                assert_eq!(partial.states.len(), step);
                assert!(partial.last().first_diverged_bus().is_none());
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn validation_names_offending_field() {
        let mut p = two_bus(0.0);
        p.inertia[1] = -1.0;
        match p.validate().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "inertia[1]"),
            e => panic!("{e}"),
        }
        let mut p = two_bus(0.0);
        p.susceptance[0][1] = 2.0;
        assert!(p.validate().is_err());
        let mut p = two_bus(0.0);
        p.damping.push(0.0);
        assert!(p.validate().is_err());
    }

    #[allow(clippy::needless_range_loop)]
    fn ring(n: usize) -> GridParams {
        let mut b = vec![vec![0.0; n]; n];
        for i in 0..n {
            let j = (i + 1) % n;
            if i != j {
                b[i][j] = 1.0 + i as f64 * 0.1;
                b[j][i] = b[i][j];
            }
        }
        GridParams {
            inertia: vec![1.0; n],
            damping: vec![0.5; n],
            susceptance: b,
            injection: vec![0.0; n],
            droop: vec![1.0; n],
        }
    }

    proptest! {
        #[test]
        fn power_is_antisymmetric(theta in proptest::collection::vec(-3.2f64..3.2, 3..8)) {
            let p = ring(theta.len());
            let pe = electrical_power(&p, &theta).unwrap();
            prop_assert!(pe.iter().sum::<f64>().abs() < 1e-12);
        }

        #[test]
        fn simulate_is_bit_reproducible(
            theta in proptest::collection::vec(-0.1f64..0.1, 4),
            omega in proptest::collection::vec(-0.1f64..0.1, 4),
        ) {
            let p = ring(4);
            let s = GridState { theta, omega };
            let a = simulate(&p, &s, 50, 0.01, None).unwrap();
            let b = simulate(&p, &s, 50, 0.01, None).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
