//! Polarization entanglement of the cascade pair versus fine-structure
//! splitting: reduced density matrix, fidelity to Φ⁺ and concurrence.

use polshift::spectra::{FrequencyGrid, QDotParams};
use polshift::state::{concurrence, fidelity_phi_plus, reduce_polarization, TwoPhotonState};

fn main() -> polshift::Result<()> {
    println!("{:>8} {:>10} {:>12} {:>10}", "S (μeV)", "F(Φ⁺)", "concurrence", "|overlap|");
    for s in [0.0, 0.25, 0.5, 1.0, 2.0, 5.0] {
        let params = QDotParams::reference(s, 1.0)?;
        let grid = FrequencyGrid::for_params(&params, 400.0, 1024)?;
        let state = TwoPhotonState::cascade(&grid, &params)?;
        let rho = reduce_polarization(&state)?;
        println!(
            "{s:>8.2} {:>10.6} {:>12.6} {:>10.6}",
            fidelity_phi_plus(&rho),
            concurrence(&rho)?,
            state.coherence().norm()
        );
    }

    let params = QDotParams::reference(1.0, 1.0)?;
    let grid = FrequencyGrid::for_params(&params, 400.0, 1024)?;
    let rho = reduce_polarization(&TwoPhotonState::cascade(&grid, &params)?)?;
    println!("\nρ at S = 1 μeV (basis HH, HV, VH, VV):\n{:.4}", rho.matrix());
    Ok(())
}
