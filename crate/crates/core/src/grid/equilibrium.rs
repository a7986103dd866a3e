//! Power-flow equilibrium `p_i = p_e,i(θ*)`, `ω* = 0`, by damped Newton
//! iteration on the angles of buses `1..n` with bus 0 fixed at `θ_0 = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{electrical_power_unchecked, GridParams, GridState};
use crate::error::{Error, Result};

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub state: GridState,
    /// `max_i |p_i - p_e,i(θ*)|` over all buses, reference included.
    pub residual_inf_norm: f64,
    pub iterations: usize,
}

fn mismatch(params: &GridParams, theta: &[f64]) -> Vec<f64> {
    let pe = electrical_power_unchecked(params, theta);
    params.injection.iter().zip(pe).map(|(p, e)| p - e).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Jacobian of the reduced mismatch `f_i = p_i - p_e,i` for `i, j >= 1`.
fn reduced_jacobian(params: &GridParams, theta: &[f64]) -> DMatrix<f64> {
    let n = params.n();
    let b = &params.susceptance;
    DMatrix::from_fn(n - 1, n - 1, |r, c| {
        let (i, j) = (r + 1, c + 1);
        if i == j {
            -(0..n)
                .filter(|&m| m != i)
                .map(|m| b[i][m] * (theta[i] - theta[m]).cos())
                .sum::<f64>()
        } else {
            b[i][j] * (theta[i] - theta[j]).cos()
        }
    })
}

pub fn solve_equilibrium(params: &GridParams) -> Result<GridState> {
    solve_equilibrium_report(params).map(|r| r.state)
}

pub fn solve_equilibrium_report(params: &GridParams) -> Result<EquilibriumReport> {
    params.validate()?;
    let n = params.n();
    let mut theta = vec![0.0; n];
    let mut f = mismatch(params, &theta);
    let mut norm = inf_norm(&f);

    for iteration in 0..=MAX_ITERATIONS {
        if norm <= RESIDUAL_TOLERANCE {
            return Ok(EquilibriumReport {
                state: GridState { theta, omega: vec![0.0; n] },
                residual_inf_norm: norm,
                iterations: iteration,
            });
        }
        if n == 1 || iteration == MAX_ITERATIONS {
            break;
        }

        let jac = reduced_jacobian(params, &theta);
        let rhs = DVector::from_iterator(n - 1, f[1..].iter().map(|x| -x));
        let Some(delta) = jac.lu().solve(&rhs) else {
            return Err(Error::InfeasibleEquilibrium(format!(
                "singular Jacobian at iteration {iteration}"
            )));
        };

        // Backtrack on the reduced residual; bus 0 only balances once Σp = 0.
        let reduced = inf_norm(&f[1..]);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = std::iter::once(0.0)
                .chain(theta[1..].iter().zip(delta.iter()).map(|(t, d)| t + step * d))
                .collect();
            let f_trial = mismatch(params, &trial);
            if inf_norm(&f_trial[1..]) < (1.0 - 1e-4 * step) * reduced {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        let Some((t, ft)) = accepted else {
            if reduced <= RESIDUAL_TOLERANCE {
                // Reduced system solved but the reference bus cannot balance.
                break;
            }
            return Err(Error::InfeasibleEquilibrium(format!(
                "line search stalled at iteration {iteration} with residual {norm:e}"
            )));
        };
        theta = t;
        f = ft;
        norm = inf_norm(&f);
    }

    Err(Error::InfeasibleEquilibrium(format!(
        "no convergence within {MAX_ITERATIONS} iterations, residual {norm:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus(p: f64) -> GridParams {
        GridParams {
            inertia: vec![1.0, 1.0],
            damping: vec![0.0, 0.0],
            susceptance: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            injection: vec![p, -p],
            droop: vec![1.0, 1.0],
        }
    }

    #[test]
    fn zero_injection_gives_flat_angles() {
        let eq = solve_equilibrium(&two_bus(0.0)).unwrap();
        assert_eq!(eq, GridState::zeros(2));
    }

    #[test]
    fn two_bus_matches_arcsin() {
        let r = solve_equilibrium_report(&two_bus(0.5)).unwrap();
        assert_eq!(r.state.theta[0], 0.0);
        let diff = r.state.theta[0] - r.state.theta[1];
        assert!((diff - 0.5f64.asin()).abs() < 1e-10, "{diff}");
        assert!(r.residual_inf_norm <= RESIDUAL_TOLERANCE);
        assert_eq!(r.state.omega, vec![0.0, 0.0]);
    }

    #[test]
    fn over_capacity_injection_is_infeasible() {
        let err = solve_equilibrium(&two_bus(2.0)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleEquilibrium(_)), "{err}");
    }

    #[test]
    fn unbalanced_injection_is_infeasible() {
        let mut p = two_bus(0.5);
        p.injection[0] = 0.6;
        assert!(matches!(
            solve_equilibrium(&p).unwrap_err(),
            Error::InfeasibleEquilibrium(_)
        ));
        let single = GridParams {
            inertia: vec![1.0],
            damping: vec![0.0],
            susceptance: vec![vec![0.0]],
            injection: vec![0.1],
            droop: vec![0.0],
        };
        assert!(solve_equilibrium(&single).is_err());
    }

    #[test]
    fn meshed_network_residual_within_tolerance() {
        let b = vec![
            vec![0.0, 2.0, 1.0, 0.0],
            vec![2.0, 0.0, 1.5, 1.0],
            vec![1.0, 1.5, 0.0, 2.5],
            vec![0.0, 1.0, 2.5, 0.0],
        ];
        let p = GridParams {
            inertia: vec![1.0; 4],
            damping: vec![0.1; 4],
            susceptance: b,
            injection: vec![0.8, -0.3, 0.4, -0.9],
            droop: vec![1.0; 4],
        };
        let r = solve_equilibrium_report(&p).unwrap();
        assert_eq!(r.state.theta[0], 0.0);
        let res = mismatch(&p, &r.state.theta);
        assert!(inf_norm(&res) <= RESIDUAL_TOLERANCE);
    }
}
