//! Positive solution of the problem without the superlinear term, by
//! monotone iteration from the subsolution, and the same limit from above.

use fracsemi::barriers::{solve_sublinear, subsolution, subsolution_threshold};
use fracsemi::semipositone::{monotone_iterate, Direction};
use fracsemi::spectral::principal_eigenpair;
use fracsemi::{DiscreteFracLap, Grid};

fn main() -> fracsemi::Result<()> {
    let (s, q, alpha1) = (0.25, 0.5, 1.5);
    let a = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, 512)?, s)?;
    let eig = principal_eigenpair(&a, 1e-11)?;
    let lambda = 2.0 * subsolution_threshold(&a, &eig, q, alpha1, 1e-4)?.lambda_star;
    let lower = subsolution(&eig, lambda, alpha1, q)?;
    let upper = solve_sublinear(&a, lambda, q, 1e-10)?;
    let up = monotone_iterate(&a, lambda, 0.0, q, 2.0, &lower, &upper, Direction::Ascend, 1e-10)?;
    let down = monotone_iterate(&a, lambda, 0.0, q, 2.0, &lower, &upper, Direction::Descend, 1e-10)?;
    println!("lambda = {lambda:.6}");
    for (name, r) in [("from below", &up), ("from above", &down)] {
        println!(
            "{name}: {} iterations, residual {:.1e}, min {:.4}, max {:.4}, decay exponent {:.3}",
            r.iterations,
            r.residual_inf,
            r.min_value,
            r.solution.max(),
            r.decay_exponent.unwrap_or(f64::NAN)
        );
    }
    println!("gap between the limits {:.2e}", up.solution.sub(&down.solution)?.sup_norm());
    Ok(())
}
