//! Subcritical case: a local minimizer inside the ball and a mountain-pass
//! solution above it.

use fracsemi::barriers::{subsolution, subsolution_threshold};
use fracsemi::spectral::principal_eigenpair;
use fracsemi::variational::{choose_rho_mu, minimize_in_ball, mountain_pass_with, verify_solution, CutoffNonlinearity, MountainPassOptions};
use fracsemi::{DiscreteFracLap, Grid};

fn main() -> fracsemi::Result<()> {
    let (s, q, r, alpha1) = (0.25, 0.5, 2.0, 1.5);
    let a = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, 256)?, s)?;
    let eig = principal_eigenpair(&a, 1e-11)?;
    let lambda = 2.0 * subsolution_threshold(&a, &eig, q, alpha1, 1e-4)?.lambda_star;
    let nl = CutoffNonlinearity::new(lambda, 0.0, q, r, s, subsolution(&eig, lambda, alpha1, q)?)?;
    let mu = 0.5 * choose_rho_mu(&nl, &a)?.mu_lambda;
    let nl = nl.with_mu(mu)?;
    let th = choose_rho_mu(&nl, &a)?;
    println!("lambda = {lambda:.5}, mu = {mu:.4e}, rho = {:.4e}", th.rho);

    let u0 = minimize_in_ball(&nl, &a, th.rho, 1e-6)?;
    let mp = mountain_pass_with(&nl, &a, &u0.solution, th.rho, 1e-4, &MountainPassOptions::default())?;
    for (name, rep) in [("minimizer", &u0), ("mountain pass", &mp.report)] {
        let chk = verify_solution(&nl, &a, &rep.solution, 1e-5)?;
        println!(
            "{name:>13}: energy {:+.6e}, gradient {:.1e}, residual {:.1e}, max {:.4e}, verified {}",
            rep.energy.unwrap_or(f64::NAN),
            rep.gradient_inf.unwrap_or(f64::NAN),
            chk.uncut_residual_inf,
            rep.solution.max(),
            chk.passed
        );
    }
    println!(
        "separation {:.3e}, Morse index {}, {} deformation sweeps",
        mp.separation,
        mp.morse_index,
        mp.level_trace.len()
    );
    Ok(())
}
