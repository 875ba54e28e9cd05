//! Principal eigenpair by inverse power iteration, and the `L²` embedding
//! constant that it determines.

use fracsemi::spectral::{embedding_constant, principal_eigenpair};
use fracsemi::{DiscreteFracLap, Grid};

fn main() -> fracsemi::Result<()> {
    for s in [0.25, 0.5, 0.75] {
        let a = DiscreteFracLap::assemble(Grid::new(-1.0, 1.0, 512)?, s)?;
        let eig = principal_eigenpair(&a, 1e-11)?;
        let s2 = embedding_constant(&a, 2.0, 1e-9)?;
        println!(
            "s = {s}: lambda1 = {:.8}, residual {:.1e}, {} iterations, S_2 sqrt(lambda1) = {:.10}",
            eig.lambda1,
            eig.residual,
            eig.iterations,
            s2 * eig.lambda1.sqrt()
        );
    }
    Ok(())
}
