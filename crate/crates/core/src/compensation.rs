//! Polarization-dependent frequency shift `U(Δ1, Δ2)`: the identity on
//! `|HH⟩` components, a translation `(ω1, ω2) → (ω1 + Δ1/ħ, ω2 + Δ2/ħ)` on
//! `|VV⟩` components.
//!
//! Amplitudes live on a periodic grid, so translations are circular and
//! exactly unitary. Content that crosses the grid edge reappears on the
//! other side; its mass is reported in [`ShiftDiagnostics`], and a shift
//! that wraps more than [`MAX_WRAPPED_MASS`] is refused.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::{FrequencyGrid, PhysConstants, QDotParams, SpectralAmplitude};
use crate::state::TwoPhotonState;
use crate::time_domain::shift_spectrum;

/// A shift is treated as a whole number of grid steps below this fraction.
pub const SNAP_TOLERANCE: f64 = 1e-6;
/// Wrapped mass above which a warning is raised.
pub const WRAP_WARNING: f64 = 1e-6;
/// Wrapped mass above which the shift is refused.
pub const MAX_WRAPPED_MASS: f64 = 1e-3;

/// Frequency shifts applied to the V-polarized photons, μeV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSpec {
    pub delta1: f64,
    pub delta2: f64,
}

impl ShiftSpec {
    pub const ZERO: ShiftSpec = ShiftSpec {
        delta1: 0.0,
        delta2: 0.0,
    };

    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        if !(delta1.is_finite() && delta2.is_finite()) {
            return Err(Error::Parameter(format!("shift must be finite, got ({delta1}, {delta2})")));
        }
        Ok(Self { delta1, delta2 })
    }

    /// From angular-frequency shifts in rad/ns.
    pub fn from_rates(rate1: f64, rate2: f64) -> Self {
        Self {
            delta1: PhysConstants::rate_to_energy(rate1),
            delta2: PhysConstants::rate_to_energy(rate2),
        }
    }

    /// `(Δ1/ħ, Δ2/ħ)` in rad/ns.
    pub fn rates(&self) -> (f64, f64) {
        (
            PhysConstants::energy_to_rate(self.delta1),
            PhysConstants::energy_to_rate(self.delta2),
        )
    }

    pub fn compose(&self, other: &ShiftSpec) -> ShiftSpec {
        ShiftSpec {
            delta1: self.delta1 + other.delta1,
            delta2: self.delta2 + other.delta2,
        }
    }

    pub fn inverse(&self) -> ShiftSpec {
        ShiftSpec {
            delta1: -self.delta1,
            delta2: -self.delta2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftDiagnostics {
    /// Shift in grid steps along each axis.
    pub steps: (f64, f64),
    /// Both components snapped to whole steps (pure index roll).
    pub exact: bool,
    /// Probability mass carried across the grid edge.
    pub wrapped_mass: f64,
    pub warning: bool,
}

#[derive(Debug, Clone)]
pub struct ShiftOutcome {
    pub state: TwoPhotonState,
    pub diagnostics: ShiftDiagnostics,
}

/// Translate a single amplitude: `a(ω) → a(ω − (shift1, shift2))`, shifts
/// in rad/ns.
pub fn shift_amplitude(
    a: &SpectralAmplitude,
    shift1: f64,
    shift2: f64,
) -> Result<(SpectralAmplitude, ShiftDiagnostics)> {
    let grid = a.grid;
    let half = 0.5 * grid.span;
    if shift1.abs() > half || shift2.abs() > half {
        return Err(Error::Range(format!(
            "shift ({shift1}, {shift2}) rad/ns exceeds half the grid span {half}"
        )));
    }
    let steps = (shift1 / grid.step(), shift2 / grid.step());
    let snapped = (snap(steps.0), snap(steps.1));
    let wrapped_mass = wrapped_mass(a, steps);
    if wrapped_mass > MAX_WRAPPED_MASS {
        return Err(Error::Range(format!(
            "shift wraps {wrapped_mass:.3e} of the amplitude across the grid edge"
        )));
    }

    let shifted = match snapped {
        (Some(k1), Some(k2)) => roll(a, k1, k2),
        _ => shift_spectrum(a, shift1, shift2),
    };
    Ok((
        shifted,
        ShiftDiagnostics {
            steps,
            exact: snapped.0.is_some() && snapped.1.is_some(),
            wrapped_mass,
            warning: wrapped_mass > WRAP_WARNING,
        },
    ))
}

fn snap(steps: f64) -> Option<i64> {
    let r = steps.round();
    ((steps - r).abs() < SNAP_TOLERANCE).then_some(r as i64)
}

/// `out[i][j] = a[i − k1][j − k2]`, indices mod n.
fn roll(a: &SpectralAmplitude, k1: i64, k2: i64) -> SpectralAmplitude {
    let n = a.grid.n as i64;
    let src = |i: usize, k: i64| (i as i64 - k).rem_euclid(n) as usize;
    let values = Array2::from_shape_fn(a.values.dim(), |(i, j)| a.values[[src(i, k1), src(j, k2)]]);
    SpectralAmplitude {
        grid: a.grid,
        values,
        narrow_grid: a.narrow_grid,
    }
}

/// Mass in the rows and columns that move across the edge.
fn wrapped_mass(a: &SpectralAmplitude, steps: (f64, f64)) -> f64 {
    let n = a.grid.n;
    let dw = a.grid.step();
    let band = |s: f64| -> Box<dyn Fn(usize) -> bool> {
        let w = (s.abs().ceil() as usize).min(n);
        if s > 0.0 {
            Box::new(move |i| i >= n - w)
        } else if s < 0.0 {
            Box::new(move |i| i < w)
        } else {
            Box::new(|_| false)
        }
    };
    let (in1, in2) = (band(steps.0), band(steps.1));
    a.values
        .indexed_iter()
        .filter(|((i, j), _)| in1(*i) || in2(*j))
        .map(|(_, v)| v.norm_sqr())
        .sum::<f64>()
        * dw
        * dw
}

/// `U(Δ1, Δ2)`: the H amplitude is passed through untouched; the V
/// amplitude becomes `Φ_V(ω1 − Δ1/ħ, ω2 − Δ2/ħ)`.
pub fn apply_shift(state: &TwoPhotonState, shift: &ShiftSpec) -> Result<ShiftOutcome> {
    let (r1, r2) = shift.rates();
    let (v, diagnostics) = shift_amplitude(state.phi_v(), r1, r2)?;
    Ok(ShiftOutcome {
        state: TwoPhotonState::new(state.phi_h().clone(), v)?,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separability {
    /// `1 − |⟨phi_h|phi_v⟩|`; zero exactly when polarization factors out.
    pub residual: f64,
    /// `arg⟨phi_h|phi_v⟩`, rad.
    pub phase: f64,
}

pub fn separability_residual(state: &TwoPhotonState) -> Separability {
    let c = state.coherence();
    Separability {
        residual: (1.0 - c.norm()).clamp(0.0, 1.0),
        phase: c.arg(),
    }
}

/// `U(−S, +S)`.
pub fn optimal_shift_for_qdot(params: &QDotParams) -> ShiftSpec {
    ShiftSpec {
        delta1: -params.splitting,
        delta2: params.splitting,
    }
}

/// Compensate a cascade state with its canonical shift.
pub fn compensate(state: &TwoPhotonState, params: &QDotParams) -> Result<ShiftOutcome> {
    apply_shift(state, &optimal_shift_for_qdot(params))
}

/// Largest pointwise difference between two amplitudes on one grid.
pub fn max_abs_difference(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    Ok(a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

/// `phi_v` multiplied by a global phase, for checking that the shift
/// commutes with it.
pub fn with_v_phase(state: &TwoPhotonState, phase: f64) -> Result<TwoPhotonState> {
    TwoPhotonState::new(
        state.phi_h().clone(),
        state.phi_v().scaled(Complex64::from_polar(1.0, phase)),
    )
}

/// Whether S/ħ is a whole number of steps of `grid`.
pub fn splitting_on_grid(params: &QDotParams, grid: &FrequencyGrid) -> bool {
    snap(params.splitting_rate() / grid.step()).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{eval_phi, Path};

    fn setup(s: f64, n: usize) -> (QDotParams, FrequencyGrid, TwoPhotonState) {
        let p = QDotParams::reference(s, 1.0).unwrap();
        let g = FrequencyGrid::with_exact_splitting(&p, 400.0, n).unwrap();
        let st = TwoPhotonState::cascade(&g, &p).unwrap();
        (p, g, st)
    }

    #[test]
    fn zero_shift_is_identity() {
        let (_, _, st) = setup(1.0, 128);
        let out = apply_shift(&st, &ShiftSpec::ZERO).unwrap();
        assert_eq!(out.state, st);
        assert!(out.diagnostics.exact);
        assert_eq!(out.diagnostics.wrapped_mass, 0.0);
    }

    #[test]
    fn canonical_shift_maps_v_onto_h() {
        let (p, g, st) = setup(1.0, 512);
        assert!(splitting_on_grid(&p, &g));
        let out = compensate(&st, &p).unwrap();
        assert!(out.diagnostics.exact);
        assert_eq!(out.state.phi_h(), st.phi_h());
        let diff = max_abs_difference(out.state.phi_h(), out.state.phi_v()).unwrap();
        let peak = st.phi_h().values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        // Carrier frequencies ~10⁶ rad/ns limit node positions to ~1e-9 Γ.
        assert!(diff < 1e-9 * peak, "{diff}");
        assert!(separability_residual(&out.state).residual < 1e-9);
    }

    #[test]
    fn pointwise_identity_on_raw_amplitudes() {
        // Φ_V(ω1 + S/ħ, ω2 − S/ħ) = Φ_H(ω1, ω2) node by node.
        let p = QDotParams::reference(2.0, 1.0).unwrap();
        let g = FrequencyGrid::with_exact_splitting(&p, 400.0, 256).unwrap();
        let k = (p.splitting_rate() / g.step()).round() as usize;
        for sampling in [crate::spectra::Sampling::Pointwise, crate::spectra::Sampling::BandLimited] {
            let h = crate::spectra::eval_phi_sampled(Path::H, &g, &p, sampling).unwrap();
            let v = crate::spectra::eval_phi_sampled(Path::V, &g, &p, sampling).unwrap();
            for i in 0..g.n - k {
                for j in k..g.n {
                    let d = (v.values[[i + k, j - k]] - h.values[[i, j]]).norm();
                    assert!(d <= 1e-9 * h.values[[i, j]].norm(), "({i},{j}) {d}");
                }
            }
        }
    }

    #[test]
    fn shifts_compose() {
        let (_, g, st) = setup(1.0, 128);
        let dw = PhysConstants::rate_to_energy(g.step());
        let a = ShiftSpec::new(2.0 * dw, -dw).unwrap();
        let b = ShiftSpec::new(-0.5 * dw, 3.25 * dw).unwrap();
        let two = apply_shift(&apply_shift(&st, &a).unwrap().state, &b).unwrap().state;
        let one = apply_shift(&st, &a.compose(&b)).unwrap().state;
        assert!(max_abs_difference(two.phi_v(), one.phi_v()).unwrap() < 1e-12);

        let back = apply_shift(&apply_shift(&st, &b).unwrap().state, &b.inverse()).unwrap().state;
        assert!(max_abs_difference(back.phi_v(), st.phi_v()).unwrap() < 1e-12);
    }

    #[test]
    fn fractional_shift_preserves_norm_and_commutes_with_phase() {
        let (_, _, st) = setup(0.7, 128);
        let shift = ShiftSpec::new(-0.37, 1.91).unwrap();
        let out = apply_shift(&st, &shift).unwrap();
        assert!(!out.diagnostics.exact);
        assert!((out.state.norm_sqr() - 1.0).abs() < 1e-9);

        let rotated = apply_shift(&with_v_phase(&st, 0.8).unwrap(), &shift).unwrap().state;
        let expected = with_v_phase(&out.state, 0.8).unwrap();
        assert!(max_abs_difference(rotated.phi_v(), expected.phi_v()).unwrap() < 1e-13);
    }

    #[test]
    fn oversized_shift_is_a_range_error() {
        let (_, g, st) = setup(1.0, 64);
        let too_far = PhysConstants::rate_to_energy(0.6 * g.span);
        assert!(matches!(apply_shift(&st, &ShiftSpec::new(too_far, 0.0).unwrap()), Err(Error::Range(_))));
    }

    #[test]
    fn wrapping_too_much_mass_is_refused() {
        // A narrow grid leaves heavy tails at the edges.
        let p = QDotParams::reference(1.0, 1.0).unwrap();
        let g = FrequencyGrid::for_params(&p, 20.0, 64).unwrap();
        let st = TwoPhotonState::cascade(&g, &p).unwrap();
        let big = PhysConstants::rate_to_energy(0.4 * g.span);
        assert!(matches!(apply_shift(&st, &ShiftSpec::new(big, big).unwrap()), Err(Error::Range(_))));
    }

    #[test]
    fn uncompensated_residual_matches_closed_form() {
        let p = QDotParams::reference(1.0, 1.0).unwrap();
        let g = FrequencyGrid::for_params(&p, 400.0, 1024).unwrap();
        let st = TwoPhotonState::cascade(&g, &p).unwrap();
        let r = separability_residual(&st);
        let closed = Complex64::new(1.0, 0.0) / Complex64::new(1.0, -p.splitting_rate());
        assert!((r.residual - (1.0 - closed.norm())).abs() < 1e-3);
        assert!((r.residual - 0.4501).abs() < 1e-3);
        assert!((r.phase - closed.arg()).abs() < 1e-3);
    }

    #[test]
    fn identical_paths_have_zero_residual() {
        let p = QDotParams::reference(0.0, 1.0).unwrap();
        let g = FrequencyGrid::for_params(&p, 100.0, 64).unwrap();
        let h = eval_phi(Path::H, &g, &p).unwrap().normalize().unwrap();
        let st = TwoPhotonState::new(h.clone(), h).unwrap();
        assert!(separability_residual(&st).residual < 1e-12);
    }

    #[test]
    fn optimal_shift_values() {
        let p = QDotParams::reference(0.0, 1.0).unwrap();
        assert_eq!(optimal_shift_for_qdot(&p), ShiftSpec::new(0.0, 0.0).unwrap());
        let p = p.with_splitting(1.0);
        assert_eq!(optimal_shift_for_qdot(&p), ShiftSpec::new(-1.0, 1.0).unwrap());
        let flipped = optimal_shift_for_qdot(&p.with_splitting(-1.0));
        assert_eq!(flipped, optimal_shift_for_qdot(&p).inverse());
    }
}
