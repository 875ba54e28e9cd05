//! Brackets the smallest parameter for which a positive solution is
//! detected, on a sequence of grids.

use fracsemi::semipositone::estimate_lambda0;
use fracsemi::{DiscreteFracLap, Grid};

fn main() -> fracsemi::Result<()> {
    for n in [64, 128, 256, 512] {
        let a = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, n)?, 0.25)?;
        let br = estimate_lambda0(&a, 0.5, 1e-4)?;
        println!(
            "n = {n:4}: lambda0 in [{:.5}, {:.5}] after {} detector runs",
            br.lambda_lo,
            br.lambda_hi,
            br.trace.len()
        );
    }
    Ok(())
}
