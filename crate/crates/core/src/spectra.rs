//! Quantum-dot parameters, frequency grids and the joint spectral
//! amplitudes of the two cascade decay paths.
//!
//! Units throughout: energies in μeV, times in ns, angular frequencies in
//! rad/ns. [`PhysConstants`] is the only place where μeV and rad/ns meet.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Physical constants in the crate's unit system.
#[derive(Debug, Clone, Copy)]
pub struct PhysConstants;

impl PhysConstants {
    /// Reduced Planck constant in μeV·ns.
    pub const HBAR: f64 = 0.658_211_956_9;

    /// Energy in μeV to angular frequency in rad/ns.
    #[inline]
    pub fn energy_to_rate(energy_uev: f64) -> f64 {
        energy_uev / Self::HBAR
    }

    /// Angular frequency in rad/ns to energy in μeV.
    #[inline]
    pub fn rate_to_energy(rate: f64) -> f64 {
        rate * Self::HBAR
    }
}

/// Decay path of the cascade, labelled by the photon polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Path {
    H,
    V,
}

/// Transition frequencies, fine-structure splitting and decay rate of a
/// quantum dot. Only transition frequencies are stored; absolute level
/// energies never enter the amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QDotParams {
    /// Biexciton to ground-state total transition frequency, rad/ns.
    pub omega0: f64,
    /// X_H to ground-state transition frequency, rad/ns.
    pub omega_h2: f64,
    /// Fine-structure splitting S, μeV.
    pub splitting: f64,
    /// Decay rate Γ shared by all four transitions, 1/ns.
    pub gamma: f64,
}

impl QDotParams {
    pub fn new(omega0: f64, omega_h2: f64, splitting: f64, gamma: f64) -> Result<Self> {
        let params = Self {
            omega0,
            omega_h2,
            splitting,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    /// A dot emitting its exciton photon near 830 nm with a 3 meV
    /// biexciton binding energy. Handy for examples and tests.
    pub fn reference(splitting: f64, gamma: f64) -> Result<Self> {
        // 1239.841984 eV·nm / 830 nm, in μeV.
        let exciton_uev = 1.239_841_984e9 / 830.0;
        let omega_h2 = PhysConstants::energy_to_rate(exciton_uev);
        let omega_h1 = PhysConstants::energy_to_rate(exciton_uev - 3000.0);
        Self::new(omega_h1 + omega_h2, omega_h2, splitting, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!(
                "decay rate Gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        for (name, v) in [
            ("omega0", self.omega0),
            ("omegaH2", self.omega_h2),
            ("S", self.splitting),
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// S/ħ in rad/ns.
    pub fn splitting_rate(&self) -> f64 {
        PhysConstants::energy_to_rate(self.splitting)
    }

    /// X_V to ground-state transition frequency; sits S/ħ below X_H.
    pub fn omega_v2(&self) -> f64 {
        self.omega_h2 - self.splitting_rate()
    }

    /// First (biexciton) photon line center on the H path.
    pub fn omega_h1(&self) -> f64 {
        self.omega0 - self.omega_h2
    }

    pub fn omega_v1(&self) -> f64 {
        self.omega0 - self.omega_v2()
    }

    /// Line centers (photon 1, photon 2) of a decay path.
    pub fn line_centers(&self, path: Path) -> (f64, f64) {
        match path {
            Path::H => (self.omega_h1(), self.omega_h2),
            Path::V => (self.omega_v1(), self.omega_v2()),
        }
    }

    pub fn with_splitting(&self, splitting: f64) -> Self {
        Self { splitting, ..*self }
    }
}

/// Square uniform grid over (ω1, ω2). Axis k holds
/// `center_k - span/2 + j·dω` for `j in 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub center1: f64,
    pub center2: f64,
    /// Full width of each axis, rad/ns.
    pub span: f64,
    /// Points per axis; a power of two, at least 16.
    pub n: usize,
}

impl FrequencyGrid {
    pub const DEFAULT_SPAN_GAMMAS: f64 = 800.0;
    pub const DEFAULT_N: usize = 4096;

    pub fn new(center1: f64, center2: f64, span: f64, n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if !(span > 0.0 && span.is_finite()) {
            return Err(Error::Parameter(format!("grid span must be positive, got {span}")));
        }
        if !(center1.is_finite() && center2.is_finite()) {
            return Err(Error::Parameter("grid centers must be finite".into()));
        }
        Ok(Self {
            center1,
            center2,
            span,
            n,
        })
    }

    /// Grid centered on the H-path line centers with `span_gammas · Γ` width.
    pub fn for_params(params: &QDotParams, span_gammas: f64, n: usize) -> Result<Self> {
        let (c1, c2) = params.line_centers(Path::H);
        Self::new(c1, c2, span_gammas * params.gamma, n)
    }

    /// 800 Γ span, 4096 points per axis.
    pub fn default_for(params: &QDotParams) -> Result<Self> {
        Self::for_params(params, Self::DEFAULT_SPAN_GAMMAS, Self::DEFAULT_N)
    }

    /// Like [`FrequencyGrid::for_params`], but with the span nudged so that
    /// S/ħ is a whole number of grid steps.
    pub fn with_exact_splitting(params: &QDotParams, span_gammas: f64, n: usize) -> Result<Self> {
        let base = Self::for_params(params, span_gammas, n)?;
        let rate = params.splitting_rate().abs();
        if rate == 0.0 {
            return Ok(base);
        }
        let steps = (rate / base.step()).round().max(1.0);
        Self::new(base.center1, base.center2, n as f64 * rate / steps, n)
    }

    /// Grid spacing dω.
    #[inline]
    pub fn step(&self) -> f64 {
        self.span / self.n as f64
    }

    /// Position of node `j` relative to the axis center.
    #[inline]
    pub fn offset(&self, j: usize) -> f64 {
        -0.5 * self.span + j as f64 * self.step()
    }

    pub fn omega1(&self, j: usize) -> f64 {
        self.center1 + self.offset(j)
    }

    pub fn omega2(&self, j: usize) -> f64 {
        self.center2 + self.offset(j)
    }

    pub fn axis1(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n, |j| self.omega1(j))
    }

    pub fn axis2(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n, |j| self.omega2(j))
    }

    pub fn center(&self, axis: GridAxis) -> f64 {
        match axis {
            GridAxis::One => self.center1,
            GridAxis::Two => self.center2,
        }
    }

    /// True when `[lo, hi]` lies inside the axis range.
    fn covers(&self, axis: GridAxis, lo: f64, hi: f64) -> bool {
        let c = self.center(axis);
        lo >= c - 0.5 * self.span && hi <= c + 0.5 * self.span - self.step()
    }

    pub(crate) fn ensure_same(&self, other: &FrequencyGrid) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!(
                "frequency grids differ: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// Photon axis of a joint amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridAxis {
    One,
    Two,
}

impl GridAxis {
    pub(crate) fn index(self) -> usize {
        match self {
            GridAxis::One => 0,
            GridAxis::Two => 1,
        }
    }
}

/// How the continuous amplitude is turned into grid values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Exact spectrum of the emission-time wave train sampled at the dual
    /// time step `2π/span`, with the jump samples (t1 = 0 and t2 = t1)
    /// weighted by 1/√2 so that grid sums integrate like the trapezoid rule.
    /// Periodic over the grid, so whole-step translations are exact.
    #[default]
    BandLimited,
    /// Literal node values of the Lorentzian product. Tails beyond the span
    /// are lost (about 2.4e-3 of the norm at 800 Γ).
    Pointwise,
}

/// Complex joint spectral amplitude on a [`FrequencyGrid`], in (rad/ns)⁻¹,
/// indexed `[ω1 node, ω2 node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude {
    pub grid: FrequencyGrid,
    pub values: Array2<Complex64>,
    /// Set when the grid does not reach ±5Γ around the line centers.
    pub narrow_grid: bool,
}

impl SpectralAmplitude {
    pub fn new(grid: FrequencyGrid, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != (grid.n, grid.n) {
            return Err(Error::Shape(format!(
                "values are {:?}, grid expects {}x{}",
                values.dim(),
                grid.n,
                grid.n
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric("amplitude has non-finite entries".into()));
        }
        Ok(Self {
            grid,
            values: values.as_standard_layout().into_owned(),
            narrow_grid: false,
        })
    }

    /// Separable amplitude `f(ω1)·g(ω2)`.
    pub fn separable(
        grid: FrequencyGrid,
        f: impl Fn(f64) -> Complex64,
        g: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let a: Vec<_> = (0..grid.n).map(|j| f(grid.omega1(j))).collect();
        let b: Vec<_> = (0..grid.n).map(|j| g(grid.omega2(j))).collect();
        Self::new(grid, Array2::from_shape_fn((grid.n, grid.n), |(i, j)| a[i] * b[j]))
    }

    /// `∑|values|² dω²`.
    pub fn norm_sqr(&self) -> f64 {
        let dw = self.grid.step();
        // Row sums first keeps rounding at O(n·ε) on n×n grids.
        let total: f64 = self
            .values
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        total * dw * dw
    }

    /// Rescale by a positive real factor to unit norm.
    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_sqr();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate(format!(
                "cannot normalize amplitude with squared norm {norm}"
            )));
        }
        let mut out = self.clone();
        out.values.mapv_inplace(|v| v / norm.sqrt());
        Ok(out)
    }

    /// `⟨self|other⟩ = ∑ conj(self)·other dω²`.
    pub fn overlap(&self, other: &SpectralAmplitude) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let dw = self.grid.step();
        let rows = self
            .values
            .rows()
            .into_iter()
            .zip(other.values.rows())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>());
        Ok(rows.sum::<Complex64>() * dw * dw)
    }

    /// Probability density over one photon's frequency, integrating the
    /// other out: `p(ω_k) = ∑_other |values|² dω`.
    pub fn marginal(&self, axis: GridAxis) -> Array1<f64> {
        let dw = self.grid.step();
        // Summing over the other axis.
        let other = Axis(1 - axis.index());
        self.values.map(|v| v.norm_sqr()).sum_axis(other) * dw
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.values.mapv_inplace(|v| v * factor);
        out
    }
}

/// Joint spectral amplitude of one decay path:
/// `(√2Γ/2π)·[ω1+ω2−ω0+iΓ]⁻¹·[ω2−ω_{p,2}+iΓ/2]⁻¹`, band-limited sampling.
pub fn eval_phi(path: Path, grid: &FrequencyGrid, params: &QDotParams) -> Result<SpectralAmplitude> {
    eval_phi_sampled(path, grid, params, Sampling::BandLimited)
}

pub fn eval_phi_sampled(
    path: Path,
    grid: &FrequencyGrid,
    params: &QDotParams,
    sampling: Sampling,
) -> Result<SpectralAmplitude> {
    params.validate()?;
    let gamma = params.gamma;
    let (c1, c2) = params.line_centers(path);
    let n = grid.n;
    let dw = grid.step();

    // ω1+ω2−ω0 at nodes (i, j) depends only on i+j, and ω2−ω_{p,2} only on j.
    // Centers are subtracted before adding offsets to keep precision when
    // the optical frequencies are ~1e6 rad/ns.
    let sum_base = (grid.center1 + grid.center2 - params.omega0) - grid.span;
    let det_base = (grid.center2 - c2) - 0.5 * grid.span;

    let factor: Box<dyn Fn(f64, f64) -> Complex64> = match sampling {
        Sampling::Pointwise => Box::new(|x, a| 1.0 / Complex64::new(x, a)),
        Sampling::BandLimited => {
            let dt = 2.0 * PI / grid.span;
            Box::new(move |x, a| band_limited_pole(x, a, dt))
        }
    };
    let sum_factor: Vec<Complex64> = (0..2 * n - 1)
        .map(|k| factor(sum_base + k as f64 * dw, gamma))
        .collect();
    let det_factor: Vec<Complex64> = (0..n)
        .map(|j| factor(det_base + j as f64 * dw, 0.5 * gamma))
        .collect();

    let prefactor = 2f64.sqrt() * gamma / (2.0 * PI);
    let values = Array2::from_shape_fn((n, n), |(i, j)| {
        prefactor * sum_factor[i + j] * det_factor[j]
    });

    let margin = 5.0 * gamma;
    let narrow = !(grid.covers(GridAxis::One, c1 - margin, c1 + margin)
        && grid.covers(GridAxis::Two, c2 - margin, c2 + margin));

    let mut amp = SpectralAmplitude::new(*grid, values)?;
    amp.narrow_grid = narrow;
    Ok(amp)
}

/// Grid-periodic counterpart of `1/(x + ia)`: the Fourier sum of
/// `−i·e^{−a t}` over `t = m·dt, m ≥ 0`, with the `t = 0` sample weighted
/// by 1/√2. Tends to `1/(x + ia)` as `dt → 0`.
pub(crate) fn band_limited_pole(x: f64, a: f64, dt: f64) -> Complex64 {
    let q = Complex64::new(-a * dt, x * dt).exp();
    Complex64::new(0.0, -dt) * (FRAC_1_SQRT_2 + q / (1.0 - q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(s: f64) -> QDotParams {
        QDotParams::reference(s, 1.0).unwrap()
    }

    #[test]
    fn hbar_conversion() {
        assert_relative_eq!(PhysConstants::energy_to_rate(1.0), 1.519_267_447, epsilon = 1e-9);
        assert_relative_eq!(PhysConstants::rate_to_energy(PhysConstants::energy_to_rate(3.7)), 3.7);
    }

    #[test]
    fn derived_frequencies() {
        let p = params(2.0);
        assert_relative_eq!(p.omega_h2 - p.omega_v2(), 2.0 / PhysConstants::HBAR, epsilon = 1e-9);
        assert_relative_eq!(p.omega_h1() + p.omega_h2, p.omega0);
        assert!(QDotParams::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(QDotParams::new(0.0, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(0.0, 0.0, 10.0, 8).is_err());
        assert!(FrequencyGrid::new(0.0, 0.0, 10.0, 48).is_err());
        assert!(FrequencyGrid::new(0.0, 0.0, 0.0, 64).is_err());
        let g = FrequencyGrid::new(1.0, 2.0, 64.0, 64).unwrap();
        assert_eq!(g.step(), 1.0);
        assert_eq!(g.omega1(0), 1.0 - 32.0);
        assert_eq!(g.omega2(32), 2.0);
    }

    #[test]
    fn exact_splitting_grid_has_integer_steps() {
        let p = params(1.3);
        let g = FrequencyGrid::with_exact_splitting(&p, 800.0, 1024).unwrap();
        let steps = p.splitting_rate() / g.step();
        assert!((steps - steps.round()).abs() < 1e-9);
        assert!((g.span / 800.0 - 1.0).abs() < 0.2);
    }

    #[test]
    fn degenerate_excitons_give_identical_paths() {
        let p = params(0.0);
        let g = FrequencyGrid::for_params(&p, 200.0, 128).unwrap();
        for sampling in [Sampling::BandLimited, Sampling::Pointwise] {
            let h = eval_phi_sampled(Path::H, &g, &p, sampling).unwrap();
            let v = eval_phi_sampled(Path::V, &g, &p, sampling).unwrap();
            assert_eq!(h.values, v.values);
        }
    }

    #[test]
    fn pointwise_value_at_line_center() {
        let gamma = 1.7;
        let p = QDotParams::reference(1.0, gamma).unwrap();
        // Grid whose node n/2 lands exactly on both H line centers.
        let g = FrequencyGrid::for_params(&p, 100.0, 64).unwrap();
        let h = eval_phi_sampled(Path::H, &g, &p, Sampling::Pointwise).unwrap();
        let v = h.values[[32, 32]];
        let expected = -(2f64.sqrt()) / (PI * gamma);
        assert!((v.re - expected).abs() < 1e-9 * expected.abs(), "{v}");
        assert!(v.im.abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn band_limited_pole_approaches_lorentzian() {
        let dt = 1e-4;
        for &(x, a) in &[(0.0, 1.0), (2.5, 0.5), (-7.0, 1.0)] {
            let exact = 1.0 / Complex64::new(x, a);
            let bl = band_limited_pole(x, a, dt);
            assert!((bl - exact).norm() < 1e-3 * exact.norm(), "{bl} vs {exact}");
        }
    }

    #[test]
    fn narrow_grid_is_flagged() {
        let p = params(1.0);
        let g = FrequencyGrid::for_params(&p, 6.0, 64).unwrap();
        assert!(eval_phi(Path::H, &g, &p).unwrap().narrow_grid);
        let g = FrequencyGrid::for_params(&p, 100.0, 64).unwrap();
        assert!(!eval_phi(Path::H, &g, &p).unwrap().narrow_grid);
    }

    #[test]
    fn normalize_edge_cases() {
        let p = params(1.0);
        let g = FrequencyGrid::for_params(&p, 200.0, 256).unwrap();
        let h = eval_phi(Path::H, &g, &p).unwrap().normalize().unwrap();
        assert!((h.norm_sqr() - 1.0).abs() < 1e-12);
        let again = h.normalize().unwrap();
        for (a, b) in again.values.iter().zip(h.values.iter()) {
            assert!((a - b).norm() <= 1e-15 * b.norm().max(1e-300) + 1e-300);
        }
        let tripled = h.scaled(Complex64::new(3.0, 0.0)).normalize().unwrap();
        for (a, b) in tripled.values.iter().zip(h.values.iter()) {
            assert!((a - b).norm() <= 1e-14 * b.norm() + 1e-300);
        }
        let zero = h.scaled(Complex64::new(0.0, 0.0));
        assert!(matches!(zero.normalize(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn overlap_rejects_mismatched_grids() {
        let p = params(1.0);
        let g1 = FrequencyGrid::for_params(&p, 200.0, 64).unwrap();
        let g2 = FrequencyGrid::for_params(&p, 100.0, 64).unwrap();
        let a = eval_phi(Path::H, &g1, &p).unwrap();
        let b = eval_phi(Path::H, &g2, &p).unwrap();
        assert!(matches!(a.overlap(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn overlap_is_conjugate_symmetric() {
        let p = params(0.8);
        let g = FrequencyGrid::for_params(&p, 200.0, 128).unwrap();
        let h = eval_phi(Path::H, &g, &p).unwrap();
        let v = eval_phi(Path::V, &g, &p).unwrap();
        let hv = h.overlap(&v).unwrap();
        let vh = v.overlap(&h).unwrap();
        assert!((hv - vh.conj()).norm() < 1e-14);
    }

    #[test]
    fn marginal_of_product_state_and_fubini() {
        let g = FrequencyGrid::new(0.0, 0.0, 40.0, 128).unwrap();
        let f = |w: f64| Complex64::new((-w * w / 4.0).exp(), 0.0);
        let gfn = |w: f64| Complex64::from_polar((-(w - 1.0).powi(2)).exp(), 0.3 * w);
        let a = SpectralAmplitude::separable(g, f, gfn).unwrap().normalize().unwrap();
        let dw = g.step();
        let nf: f64 = (0..g.n).map(|j| f(g.omega1(j)).norm_sqr()).sum::<f64>() * dw;
        let ng: f64 = (0..g.n).map(|j| gfn(g.omega2(j)).norm_sqr()).sum::<f64>() * dw;
        let m1 = a.marginal(GridAxis::One);
        let m2 = a.marginal(GridAxis::Two);
        for j in 0..g.n {
            assert!((m1[j] - f(g.omega1(j)).norm_sqr() / nf).abs() < 1e-12);
            assert!((m2[j] - gfn(g.omega2(j)).norm_sqr() / ng).abs() < 1e-12);
        }
        assert!((m1.sum() * dw - a.norm_sqr()).abs() < 1e-9);
        assert!((m2.sum() * dw - a.norm_sqr()).abs() < 1e-9);
    }

    #[test]
    fn photon_two_marginal_peaks_at_line_center() {
        let p = params(1.0);
        let g = FrequencyGrid::for_params(&p, 200.0, 512).unwrap();
        for path in [Path::H, Path::V] {
            let a = eval_phi(path, &g, &p).unwrap().normalize().unwrap();
            let m = a.marginal(GridAxis::Two);
            let (arg, _) = m
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
            let (_, c2) = p.line_centers(path);
            assert!((g.omega2(arg) - c2).abs() <= 0.5 * g.step() + 1e-9);
        }
    }
}
