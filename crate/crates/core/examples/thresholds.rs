//! Radius and parameter thresholds of the cut-off functional, with the
//! embedding constants they are built from.

use fracsemi::barriers::{subsolution, subsolution_threshold};
use fracsemi::spectral::principal_eigenpair;
use fracsemi::variational::{choose_rho_mu, CutoffNonlinearity};
use fracsemi::{DiscreteFracLap, Grid};

fn main() -> fracsemi::Result<()> {
    let (s, q, alpha1) = (0.25, 0.5, 1.5);
    let a = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, 256)?, s)?;
    let eig = principal_eigenpair(&a, 1e-11)?;
    let star = subsolution_threshold(&a, &eig, q, alpha1, 1e-4)?.lambda_star;
    for r in [1.5, 2.0, 3.0] {
        let lambda = 2.0 * star;
        let nl = CutoffNonlinearity::new(lambda, 0.0, q, r, s, subsolution(&eig, lambda, alpha1, q)?)?;
        let th = choose_rho_mu(&nl, &a)?;
        println!(
            "r = {r}: rho = {:.4e}, mu_lambda = {:.4e}, mu0 = {:.4e}, S_1 = {:.4}, S_(r+1) = {:.4}, S_crit = {:.4}{}",
            th.rho,
            th.mu_lambda,
            th.mu0_critical,
            th.embed_1,
            th.embed_r1,
            th.embed_crit,
            if nl.is_critical() { " (critical)" } else { "" }
        );
    }
    Ok(())
}
