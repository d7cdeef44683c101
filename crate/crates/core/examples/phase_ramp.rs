//! The same compensation in the emission-time picture: linear phase ramps
//! on the V mode, with the modulators on for the whole wave train or
//! switched off at a time T.

use polshift::compensation::compensate;
use polshift::spectra::{FrequencyGrid, QDotParams};
use polshift::state::{fidelity_phi_plus, reduce_polarization, TwoPhotonState};
use polshift::time_domain::{apply_ramp, PhaseRamp, TemporalState};

fn main() -> polshift::Result<()> {
    let params = QDotParams::reference(1.0, 1.0)?;
    let grid = FrequencyGrid::for_params(&params, 200.0, 1024)?;
    let state = TwoPhotonState::cascade(&grid, &params)?;
    let temporal = TemporalState::from_frequency(&state);
    let tg = temporal.v.grid;
    println!("time window [{:.3}, {:.3}] ns, dt = {:.4} ns", tg.t_min(), tg.t_max(), tg.dt());

    let by_shift = compensate(&state, &params)?.state;
    let ramp = PhaseRamp::canonical_full(&params, &tg)?;
    let by_ramp = apply_ramp(&temporal, &ramp).to_frequency()?;
    println!("fidelity between shift and ramp pictures: {:.12}", by_shift.fidelity(&by_ramp)?);

    println!("\n{:>8} {:>10}", "T (ns)", "F(Φ⁺)");
    for t_off in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let r = PhaseRamp::new(ramp.rate1, ramp.rate2, tg.t_min(), t_off)?;
        let partial = apply_ramp(&temporal, &r).to_frequency()?;
        println!("{t_off:>8.1} {:>10.6}", fidelity_phi_plus(&reduce_polarization(&partial)?));
    }
    Ok(())
}
