//! Emission-time picture of the photon pair and polarization-selective
//! linear phase ramps.
//!
//! Fourier convention: `f(t) = (1/√2π) ∫ F(ω) e^{−iωt} dω`. Multiplying
//! `f` by `e^{iΔt}` maps the spectrum to `F(ω + Δ)`, i.e. moves spectral
//! content down by Δ. A ramp with rate `+S/ħ` on photon 1 therefore
//! realizes the frequency shift `−S`, and rate `−S/ħ` on photon 2 the
//! shift `+S`.
//!
//! Positions along the frozen wave train are represented as emission times
//! (`t = x/c`), so no speed of light appears anywhere.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::fft2_inplace;
use crate::spectra::{FrequencyGrid, Path, QDotParams, SpectralAmplitude};
use crate::state::TwoPhotonState;

/// Time grid dual to a [`FrequencyGrid`]: same `n`, `dt = 2π/span`, and
/// node `m` at `t = (m − origin)·dt`, so `t = 0` is always a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    freq: FrequencyGrid,
    origin: usize,
}

impl TimeGrid {
    /// Dual grid with one sixteenth of the nodes at negative times.
    pub fn dual_of(freq: &FrequencyGrid) -> Self {
        Self {
            freq: *freq,
            origin: freq.n / 16,
        }
    }

    pub fn with_origin(freq: &FrequencyGrid, origin: usize) -> Result<Self> {
        if origin >= freq.n {
            return Err(Error::Parameter(format!(
                "time origin index {origin} outside grid of {} nodes",
                freq.n
            )));
        }
        Ok(Self { freq: *freq, origin })
    }

    pub fn frequency_grid(&self) -> &FrequencyGrid {
        &self.freq
    }

    pub fn n(&self) -> usize {
        self.freq.n
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        2.0 * PI / self.freq.span
    }

    #[inline]
    pub fn time(&self, m: usize) -> f64 {
        (m as f64 - self.origin as f64) * self.dt()
    }

    pub fn t_min(&self) -> f64 {
        self.time(0)
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.n() - 1)
    }

    pub fn axis(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n(), |m| self.time(m))
    }

    fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!("time grids differ: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Joint temporal amplitude in ns⁻¹, indexed `[t1 node, t2 node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalAmplitude {
    pub grid: TimeGrid,
    pub values: Array2<Complex64>,
    /// Set by [`analytic_temporal`] when the grid ends before 5/Γ.
    pub short_window: bool,
}

impl TemporalAmplitude {
    pub fn norm_sqr(&self) -> f64 {
        let dt = self.grid.dt();
        let total: f64 = self
            .values
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        total * dt * dt
    }

    pub fn overlap(&self, other: &TemporalAmplitude) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let dt = self.grid.dt();
        let total: Complex64 = self
            .values
            .rows()
            .into_iter()
            .zip(other.values.rows())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>())
            .sum();
        Ok(total * dt * dt)
    }

    /// Multiply by the separable phase `e^{i(p1(t1) + p2(t2))}`.
    fn modulate(&mut self, p1: &[Complex64], p2: &[Complex64]) {
        for (row, f1) in self.values.rows_mut().into_iter().zip(p1) {
            for (v, f2) in row.into_iter().zip(p2) {
                *v *= f1 * f2;
            }
        }
    }
}

/// `e^{∓iωt}` carrier with the ω·t product formed once per node.
fn phasor(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Spectral amplitude to the emission-time picture on the default dual grid.
pub fn to_time(a: &SpectralAmplitude) -> TemporalAmplitude {
    to_time_on(a, &TimeGrid::dual_of(&a.grid)).expect("dual grid matches by construction")
}

pub fn to_time_on(a: &SpectralAmplitude, grid: &TimeGrid) -> Result<TemporalAmplitude> {
    a.grid.ensure_same(grid.frequency_grid())?;
    let g = &a.grid;
    let n = g.n;
    let m0 = grid.origin() as f64;

    // ω_k t_m = c·t_m − π(m − m0) + 2π k (m − m0)/n
    let pre: Vec<Complex64> = (0..n)
        .map(|k| phasor(2.0 * PI * (k as f64) * m0 / n as f64))
        .collect();
    let post1 = post_factors(grid, g.center1, -1.0);
    let post2 = post_factors(grid, g.center2, -1.0);

    let mut data = a.values.clone();
    Zip::indexed(&mut data).for_each(|(k1, k2), v| *v *= pre[k1] * pre[k2]);
    fft2_inplace(&mut data, FftDirection::Forward);

    let dw = g.step();
    let scale = dw * dw / (2.0 * PI);
    let mut out = TemporalAmplitude {
        grid: *grid,
        values: data,
        short_window: false,
    };
    let post1: Vec<_> = post1.iter().map(|p| p * scale).collect();
    out.modulate(&post1, &post2);
    Ok(out)
}

/// `(−1)^{m−m0} e^{sign·i·c·t_m}`.
fn post_factors(grid: &TimeGrid, center: f64, sign: f64) -> Vec<Complex64> {
    (0..grid.n())
        .map(|m| {
            let parity = if (m + grid.origin()).is_multiple_of(2) { 1.0 } else { -1.0 };
            parity * phasor(sign * center * grid.time(m))
        })
        .collect()
}

/// Like [`to_time`], but with the time window placed so that its wrap-around
/// cut falls on the node where the content is weakest. Needed for content
/// that is not causal, e.g. pulses centered on `t = 0`.
pub fn to_time_quiet(a: &SpectralAmplitude) -> TemporalAmplitude {
    let first = to_time(a);
    let (n, m0) = (first.grid.n(), first.grid.origin());
    let mut mass = vec![0.0; n];
    for ((m1, m2), v) in first.values.indexed_iter() {
        let p = v.norm_sqr();
        mass[m1] += p;
        mass[m2] += p;
    }
    let quietest = mass
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (m, &p)| if p < acc.1 { (m, p) } else { acc })
        .0;
    if quietest == 0 {
        return first;
    }
    drop(first);
    let origin = (m0 + n - quietest) % n;
    to_time_on(a, &TimeGrid::with_origin(&a.grid, origin).expect("origin below n")).expect("same grid")
}

/// Inverse of [`to_time_on`].
pub fn to_frequency(a: &TemporalAmplitude) -> SpectralAmplitude {
    let grid = a.grid;
    let g = grid.frequency_grid();
    let n = g.n;
    let m0 = grid.origin() as f64;

    let pre1 = post_factors(&grid, g.center1, 1.0);
    let pre2 = post_factors(&grid, g.center2, 1.0);
    let mut work = a.clone();
    work.modulate(&pre1, &pre2);
    let mut data = work.values;
    fft2_inplace(&mut data, FftDirection::Inverse);

    let dt = grid.dt();
    let scale = dt * dt / (2.0 * PI);
    let post: Vec<Complex64> = (0..n)
        .map(|k| phasor(-2.0 * PI * (k as f64) * m0 / n as f64))
        .collect();
    Zip::indexed(&mut data).for_each(|(k1, k2), v| *v *= post[k1] * post[k2] * scale);

    SpectralAmplitude {
        grid: *g,
        values: data,
        narrow_grid: false,
    }
}

/// Closed-form emission-time amplitude of one decay path:
/// `−√2Γ e^{−Γ t1} e^{−Γ(t2−t1)/2} e^{−i(ω_{p1} t1 + ω_{p2} t2)}` on
/// `0 ≤ t1 ≤ t2`, zero elsewhere. Nodes on the edges `t1 = 0` and
/// `t2 = t1` carry a factor 1/√2 each (the trapezoid weight for |f|²),
/// matching the band-limited spectral sampling.
pub fn analytic_temporal(path: Path, grid: &TimeGrid, params: &QDotParams) -> Result<TemporalAmplitude> {
    params.validate()?;
    let gamma = params.gamma;
    let (c1, c2) = params.line_centers(path);
    let n = grid.n();
    let m0 = grid.origin();
    let dt = grid.dt();

    let edge = |steps: usize| if steps == 0 { FRAC_1_SQRT_2 } else { 1.0 };
    let carrier1: Vec<_> = (0..n).map(|m| phasor(-c1 * grid.time(m))).collect();
    let carrier2: Vec<_> = (0..n).map(|m| phasor(-c2 * grid.time(m))).collect();

    let amp = -(2f64.sqrt()) * gamma;
    let values = Array2::from_shape_fn((n, n), |(m1, m2)| {
        if m1 < m0 || m2 < m1 {
            return Complex64::new(0.0, 0.0);
        }
        let k1 = m1 - m0;
        let k2 = m2 - m1;
        let envelope = amp
            * edge(k1)
            * edge(k2)
            * (-gamma * (k1 as f64) * dt - 0.5 * gamma * (k2 as f64) * dt).exp();
        carrier1[m1] * carrier2[m2] * envelope
    });

    Ok(TemporalAmplitude {
        grid: *grid,
        values,
        short_window: grid.t_min() > 0.0 || grid.t_max() < 5.0 / gamma,
    })
}

/// Linear phase ramps on the V-polarized mode of each photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRamp {
    /// Phase slope on photon 1, rad/ns.
    pub rate1: f64,
    /// Phase slope on photon 2, rad/ns.
    pub rate2: f64,
    /// Modulator-on interval `[t_on, t_off]`, ns.
    pub window: (f64, f64),
}

impl PhaseRamp {
    pub fn new(rate1: f64, rate2: f64, t_on: f64, t_off: f64) -> Result<Self> {
        if t_on.partial_cmp(&t_off) != Some(std::cmp::Ordering::Less) || !rate1.is_finite() || !rate2.is_finite() {
            return Err(Error::Parameter(format!(
                "phase ramp needs finite rates and t_on < t_off, got [{t_on}, {t_off}]"
            )));
        }
        Ok(Self {
            rate1,
            rate2,
            window: (t_on, t_off),
        })
    }

    /// Rates `(+S/ħ, −S/ħ)` over the given window.
    pub fn canonical(params: &QDotParams, t_on: f64, t_off: f64) -> Result<Self> {
        let rate = params.splitting_rate();
        Self::new(rate, -rate, t_on, t_off)
    }

    /// Canonical rates with the modulators on for the whole time grid.
    pub fn canonical_full(params: &QDotParams, grid: &TimeGrid) -> Result<Self> {
        Self::canonical(params, grid.t_min(), grid.t_max())
    }

    fn gate(&self, rate: f64, grid: &TimeGrid) -> Vec<Complex64> {
        let (on, off) = self.window;
        (0..grid.n())
            .map(|m| {
                let t = grid.time(m);
                if t >= on && t <= off {
                    phasor(rate * t)
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .collect()
    }
}

/// Both polarization paths in the emission-time picture.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalState {
    pub h: TemporalAmplitude,
    pub v: TemporalAmplitude,
}

impl TemporalState {
    pub fn from_frequency(state: &TwoPhotonState) -> Self {
        Self {
            h: to_time(state.phi_h()),
            v: to_time(state.phi_v()),
        }
    }

    pub fn to_frequency(&self) -> Result<TwoPhotonState> {
        TwoPhotonState::new(to_frequency(&self.h), to_frequency(&self.v))
    }

    pub fn norm_sqr(&self) -> f64 {
        0.5 * (self.h.norm_sqr() + self.v.norm_sqr())
    }
}

/// Multiply the V component by `e^{i·rate1·t1}·e^{i·rate2·t2}`, each factor
/// applied only while its own photon's time lies in the window. The H
/// component is untouched.
pub fn apply_ramp(state: &TemporalState, ramp: &PhaseRamp) -> TemporalState {
    let grid = state.v.grid;
    let mut v = state.v.clone();
    v.modulate(&ramp.gate(ramp.rate1, &grid), &ramp.gate(ramp.rate2, &grid));
    TemporalState {
        h: state.h.clone(),
        v,
    }
}

/// Band-limited translation `F(ω) → F(ω − Δ)` with `Δ = (shift1, shift2)`
/// in rad/ns, done as a linear phase in the time picture. Exact for whole
/// grid steps; otherwise exact for content that vanishes at the window cut.
pub fn shift_spectrum(a: &SpectralAmplitude, shift1: f64, shift2: f64) -> SpectralAmplitude {
    let mut t = to_time_quiet(a);
    let grid = t.grid;
    let p1: Vec<_> = (0..grid.n()).map(|m| phasor(-shift1 * grid.time(m))).collect();
    let p2: Vec<_> = (0..grid.n()).map(|m| phasor(-shift2 * grid.time(m))).collect();
    t.modulate(&p1, &p2);
    let mut out = to_frequency(&t);
    out.narrow_grid = a.narrow_grid;
    out
}

/// Which-path coherence left when the photon-2 compensation covers only
/// delays `τ ≤ window` after photon 1:
/// `∫₀^T Γe^{−Γτ}dτ + ∫_T^∞ Γe^{−Γτ}e^{iSτ/ħ}dτ`.
pub fn truncated_coherence(splitting: f64, gamma: f64, window: f64) -> Complex64 {
    let rate = splitting / crate::spectra::PhysConstants::HBAR;
    if window.is_infinite() {
        return Complex64::new(1.0, 0.0);
    }
    let t = window.max(0.0);
    let z = Complex64::new(gamma, -rate);
    let compensated = 1.0 - (-gamma * t).exp();
    compensated + gamma * (-z * t).exp() / z
}
