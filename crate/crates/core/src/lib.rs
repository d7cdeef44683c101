//! Polarization-dependent frequency-shift compensation for cascade photon
//! pairs.
//!
//! A biexciton–exciton cascade emits two photons whose joint spectrum
//! depends on the decay path: the H and V paths differ by the fine-structure
//! splitting. That which-path information lowers polarization entanglement.
//! Shifting photon 1 of the V path by `−S` and photon 2 by `+S` makes the
//! two spectra identical and restores a maximally entangled state.
//!
//! Frequencies are angular frequencies in rad/ns, times in ns, energies in
//! μeV.

mod error;
mod fft;

pub mod cli;
pub mod compensation;
pub mod hardware;
pub mod reshape;
pub mod spectra;
pub mod state;
pub mod time_domain;

pub use error::{Error, Result};
pub use spectra::{FrequencyGrid, Path, PhysConstants, QDotParams, SpectralAmplitude};
pub use state::{PolDensityMatrix, TwoPhotonState};
