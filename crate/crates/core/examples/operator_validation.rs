//! Checks the discrete operator against the closed-form identities
//! `(-Δ)^s (1-x²)^s₊ = Γ(1+2s)` and its torsion counterpart.

use fracsemi::barriers::torsion;
use fracsemi::fraclap::getoor_constant;
use fracsemi::{DiscreteFracLap, FieldFunction, Grid};

fn main() -> fracsemi::Result<()> {
    let s = 0.5;
    let gamma = getoor_constant(s)?;
    println!("s = {s}, exact constant {gamma:.6}");
    println!("{:>6} {:>14} {:>14}", "n", "operator dev", "torsion err");
    for n in [128, 256, 512, 1024] {
        let grid = Grid::new(-1.0, 1.0, n)?;
        let a = DiscreteFracLap::assemble(grid, s)?;
        let bump = FieldFunction::from_fn(grid, |x| (1.0 - x * x).max(0.0).powf(s))?;
        let applied = a.apply(&bump)?;
        let psi = torsion(&a, 1e-11)?;
        let (mut dev, mut err) = (0.0_f64, 0.0_f64);
        for j in 0..n {
            let x = grid.node(j);
            if x.abs() <= 0.9 {
                dev = dev.max((applied.values()[j] / gamma - 1.0).abs());
                err = err.max((psi.values()[j] * gamma / bump.values()[j] - 1.0).abs());
            }
        }
        println!("{n:>6} {dev:>14.3e} {err:>14.3e}");
    }
    Ok(())
}
