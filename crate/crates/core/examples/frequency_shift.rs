//! Compensating the splitting with the polarization-selective shift
//! U(−S, +S), on a grid where S/ħ is a whole number of steps and on one
//! where it is not.

use polshift::compensation::{compensate, separability_residual};
use polshift::spectra::{FrequencyGrid, QDotParams};
use polshift::state::{fidelity_phi_plus, reduce_polarization, TwoPhotonState};

fn main() -> polshift::Result<()> {
    let params = QDotParams::reference(1.0, 1.0)?;
    for (label, grid) in [
        ("whole-step", FrequencyGrid::with_exact_splitting(&params, 400.0, 1024)?),
        ("fractional", FrequencyGrid::for_params(&params, 400.0, 1024)?),
    ] {
        let state = TwoPhotonState::cascade(&grid, &params)?;
        let before = fidelity_phi_plus(&reduce_polarization(&state)?);
        let out = compensate(&state, &params)?;
        let after = fidelity_phi_plus(&reduce_polarization(&out.state)?);
        let d = &out.diagnostics;
        println!(
            "{label:>10}: steps ({:.3}, {:.3}), exact {}, wrapped mass {:.2e}",
            d.steps.0, d.steps.1, d.exact, d.wrapped_mass
        );
        println!(
            "            F(Φ⁺) {before:.6} -> {after:.12}, residual {:.2e}",
            separability_residual(&out.state).residual
        );
    }
    Ok(())
}
