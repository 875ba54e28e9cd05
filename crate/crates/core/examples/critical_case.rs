//! Critical exponent `r = 2_s^* - 1`: only the minimizer is sought, below
//! both parameter thresholds.

use fracsemi::barriers::{subsolution, subsolution_threshold};
use fracsemi::spectral::principal_eigenpair;
use fracsemi::variational::{choose_rho_mu, critical_exponent, minimize_in_ball, mountain_pass, verify_solution, CutoffNonlinearity};
use fracsemi::{DiscreteFracLap, Grid};

fn main() -> fracsemi::Result<()> {
    let (s, q, alpha1) = (0.25, 0.5, 1.5);
    let r = critical_exponent(s)? - 1.0;
    let a = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, 256)?, s)?;
    let eig = principal_eigenpair(&a, 1e-11)?;
    let lambda = 2.0 * subsolution_threshold(&a, &eig, q, alpha1, 1e-4)?.lambda_star;
    let nl = CutoffNonlinearity::new(lambda, 0.0, q, r, s, subsolution(&eig, lambda, alpha1, q)?)?;
    let th = choose_rho_mu(&nl, &a)?;
    let mu = 0.5 * th.mu_lambda.min(th.mu0_critical);
    let nl = nl.with_mu(mu)?;
    let th = choose_rho_mu(&nl, &a)?;
    println!("r = {r}, mu_lambda = {:.3e}, mu0 = {:.3e}, mu = {mu:.3e}", th.mu_lambda, th.mu0_critical);

    let rep = minimize_in_ball(&nl, &a, th.rho, 1e-6)?;
    let chk = verify_solution(&nl, &a, &rep.solution, 1e-5)?;
    println!(
        "minimizer: energy {:+.6e}, residual {:.1e}, verified {}",
        rep.energy.unwrap_or(f64::NAN),
        chk.uncut_residual_inf,
        chk.passed
    );
    match mountain_pass(&nl, &a, &rep.solution, th.rho, 1e-4) {
        Ok(_) => println!("mountain pass unexpectedly accepted"),
        Err(e) => println!("mountain pass declined: {e}"),
    }
    Ok(())
}
