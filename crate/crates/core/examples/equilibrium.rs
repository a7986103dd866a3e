// Solves the power-flow equilibrium of a loaded variant of the shipped
// system and checks that it is a fixed point of the dynamics.

use fdi_grid::defaults::default_grid;
use fdi_grid::grid::{simulate, solve_equilibrium_report};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = default_grid();
    params.injection = vec![0.6, -0.3, 0.4, -0.5, 0.2, -0.1, 0.3, -0.4, 0.1, -0.3];

    let report = solve_equilibrium_report(&params)?;
    println!(
        "converged in {} Newton iterations, residual {:.2e}",
        report.iterations, report.residual_inf_norm
    );
    for (i, theta) in report.state.theta.iter().enumerate() {
        println!("  theta_{i} = {theta:+.6}");
    }

    let traj = simulate(&params, &report.state, 500, 0.01, None)?;
    let drift = traj.states.iter().flat_map(|s| &s.omega).fold(0.0f64, |m, w| m.max(w.abs()));
    println!("max |omega| over 500 steps from equilibrium: {drift:.2e}");

    params.injection[0] = 50.0;
    params.injection[1] = -50.0 - 0.3;
    match solve_equilibrium_report(&params) {
        Err(e) => println!("overloaded network: {e}"),
        Ok(_) => println!("overloaded network unexpectedly solved"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("equilibrium example failed");
}
