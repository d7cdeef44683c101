//! Drive requirements for Pockels-cell frequency shifters.

use polshift::hardware::{plan_cells, required_slew, residual_fidelity, PockelsCell};
use polshift::Error;

fn main() -> polshift::Result<()> {
    let reference = PockelsCell::reference();
    println!(
        "S = 1 μeV with α = {} rad/V needs dV/dt = {:.2} V/ns",
        reference.alpha,
        required_slew(1.0, reference.alpha)?
    );

    let catalog = [
        reference,
        PockelsCell::new("fast-low-voltage", 0.052, 200.0, 50.0)?,
        PockelsCell::new("weak-driver", 0.052, 50.0, 10.0)?,
    ];
    for s in [0.5, 1.0, 5.0] {
        for cell in &catalog {
            match plan_cells(s, cell, 5.0) {
                Ok(p) => println!(
                    "S = {s} μeV, {}: {} cell(s), {:.1} V/ns each, peak {:.1} V",
                    cell.name, p.n_cells, p.per_cell_slew, p.peak_voltage
                ),
                Err(Error::Infeasible { constraint, required_cells, .. }) => println!(
                    "S = {s} μeV, {}: infeasible ({constraint} needs {required_cells} cells)",
                    cell.name
                ),
                Err(e) => return Err(e),
            }
        }
    }

    println!("\nresidual fidelity versus ramp window (S = 1 μeV, Γ = 1/ns):");
    for w in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        println!("  {w:>5.1} ns  {:.6}", residual_fidelity(1.0, 1.0, w)?);
    }
    Ok(())
}
