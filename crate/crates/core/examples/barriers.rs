//! Subsolution threshold, the boundary profile `h`, and an ordered pair of
//! barriers above the threshold.

use fracsemi::barriers::{compute_h, solve_sublinear, subsolution_threshold, torsion, BarrierSet};
use fracsemi::spectral::principal_eigenpair;
use fracsemi::{DiscreteFracLap, Grid};

fn main() -> fracsemi::Result<()> {
    let (s, q, alpha1, alpha2) = (0.25, 0.5, 1.5, 2.5);
    let a = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, 512)?, s)?;
    let eig = principal_eigenpair(&a, 1e-11)?;
    let th = subsolution_threshold(&a, &eig, q, alpha1, 1e-4)?;
    println!("lambda* = {:.6} (fails at {:.6})", th.lambda_star, th.lambda_fail);
    println!("ordered from lambda = {:.6}", th.lambda_ordered);

    let h = compute_h(&a, &eig)?;
    println!("h: min {:.4}, max {:.4}, route deviation {:.2e}", h.h.min(), h.h.max(), h.max_rel_dev);

    let psi = torsion(&a, 1e-11)?;
    let z1 = solve_sublinear(&a, 1.0, q, 1e-12)?;
    for mult in [1.0, 2.0, 10.0] {
        let lambda = mult * th.lambda_star.max(th.lambda_ordered);
        let b = BarrierSet::build(&a, &eig, &psi, &z1, lambda, q, alpha1, alpha2)?;
        println!(
            "lambda = {lambda:9.4}: sub margin {:10.3e}, super margin {:10.3e}, gap {:10.3e}, certified {}",
            b.margins.subsolution,
            b.margins.supersolution,
            b.margins.ordering_gap,
            b.certified()
        );
    }
    Ok(())
}
