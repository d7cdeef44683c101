//! Two-photon polarization⊗frequency state, its polarization reduction and
//! entanglement measures on the reduced 2-qubit density matrix.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::{eval_phi_sampled, FrequencyGrid, Path, QDotParams, Sampling, SpectralAmplitude};

/// Tolerance on the unit norm of each path amplitude.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// `(|HH⟩⊗phi_h + |VV⟩⊗phi_v)/√2`. The 1/√2 is implicit; each path
/// amplitude is unit-norm on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    phi_h: SpectralAmplitude,
    phi_v: SpectralAmplitude,
}

impl TwoPhotonState {
    pub fn new(phi_h: SpectralAmplitude, phi_v: SpectralAmplitude) -> Result<Self> {
        phi_h.grid.ensure_same(&phi_v.grid)?;
        for (name, amp) in [("H", &phi_h), ("V", &phi_v)] {
            let norm = amp.norm_sqr();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Parameter(format!(
                    "{name}-path amplitude must be unit-norm, has squared norm {norm}"
                )));
            }
        }
        Ok(Self { phi_h, phi_v })
    }

    /// Normalizes both amplitudes before assembling the state.
    pub fn from_unnormalized(phi_h: SpectralAmplitude, phi_v: SpectralAmplitude) -> Result<Self> {
        Self::new(phi_h.normalize()?, phi_v.normalize()?)
    }

    /// The biexciton cascade state of a quantum dot, band-limited sampling.
    pub fn cascade(grid: &FrequencyGrid, params: &QDotParams) -> Result<Self> {
        Self::cascade_sampled(grid, params, Sampling::BandLimited)
    }

    pub fn cascade_sampled(grid: &FrequencyGrid, params: &QDotParams, sampling: Sampling) -> Result<Self> {
        Self::from_unnormalized(
            eval_phi_sampled(Path::H, grid, params, sampling)?,
            eval_phi_sampled(Path::V, grid, params, sampling)?,
        )
    }

    pub fn phi_h(&self) -> &SpectralAmplitude {
        &self.phi_h
    }

    pub fn phi_v(&self) -> &SpectralAmplitude {
        &self.phi_v
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.phi_h.grid
    }

    pub fn into_parts(self) -> (SpectralAmplitude, SpectralAmplitude) {
        (self.phi_h, self.phi_v)
    }

    /// `⟨phi_h|phi_v⟩`, the which-path coherence.
    pub fn coherence(&self) -> Complex64 {
        self.phi_h
            .overlap(&self.phi_v)
            .expect("state amplitudes share a grid")
    }

    /// Squared norm of the full state, `(‖phi_h‖² + ‖phi_v‖²)/2`.
    pub fn norm_sqr(&self) -> f64 {
        0.5 * (self.phi_h.norm_sqr() + self.phi_v.norm_sqr())
    }

    /// `|⟨self|other⟩|²` between two pure states on the same grid.
    pub fn fidelity(&self, other: &TwoPhotonState) -> Result<f64> {
        let hh = self.phi_h.overlap(&other.phi_h)?;
        let vv = self.phi_v.overlap(&other.phi_v)?;
        Ok((0.5 * (hh + vv)).norm_sqr())
    }
}

/// Index of a two-photon polarization basis state in `{HH, HV, VH, VV}`.
pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

/// 4×4 polarization density matrix in the basis `{HH, HV, VH, VV}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolDensityMatrix {
    matrix: Matrix4<Complex64>,
}

impl PolDensityMatrix {
    pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
    pub const TRACE_TOLERANCE: f64 = 1e-12;
    pub const PSD_TOLERANCE: f64 = 1e-10;

    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: Matrix4<Complex64>) -> Result<Self> {
        let rho = Self { matrix };
        rho.check()?;
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` for a pure 2-qubit state given by its amplitudes.
    pub fn pure(amplitudes: [Complex64; 4]) -> Result<Self> {
        let psi = nalgebra::Vector4::from(amplitudes);
        Self::new(psi * psi.adjoint())
    }

    /// `|Φ⁺⟩⟨Φ⁺|`.
    pub fn phi_plus() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Self::pure([a, z, z, a]).expect("Bell state is a valid density matrix")
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3]]
    }

    /// Largest deviation from Hermiticity, `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        (self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > Self::HERMITIAN_TOLERANCE {
            return Err(Error::Numeric(format!("density matrix not Hermitian (error {herm:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > Self::TRACE_TOLERANCE {
            return Err(Error::Numeric(format!("density matrix trace is {tr}")));
        }
        let min = self.eigenvalues()[0];
        if min < -Self::PSD_TOLERANCE {
            return Err(Error::Numeric(format!(
                "density matrix not positive semidefinite (eigenvalue {min:e})"
            )));
        }
        Ok(())
    }
}

/// Trace out both photons' frequencies.
///
/// Only the HH and VV populations and their coherence survive:
/// `ρ_{HH,HH} = ‖phi_h‖²/2`, `ρ_{VV,VV} = ‖phi_v‖²/2` and
/// `ρ_{HH,VV} = ⟨phi_v|phi_h⟩/2`.
pub fn reduce_polarization(state: &TwoPhotonState) -> Result<PolDensityMatrix> {
    let h = state.phi_h();
    let v = state.phi_v();
    let coherence = v.overlap(h)?;
    let mut m = Matrix4::<Complex64>::zeros();
    m[(HH, HH)] = Complex64::new(0.5 * h.norm_sqr(), 0.0);
    m[(VV, VV)] = Complex64::new(0.5 * v.norm_sqr(), 0.0);
    m[(HH, VV)] = 0.5 * coherence;
    m[(VV, HH)] = 0.5 * coherence.conj();
    PolDensityMatrix::new(m)
}

/// `⟨Φ⁺|ρ|Φ⁺⟩` with `|Φ⁺⟩ = (|HH⟩ + |VV⟩)/√2`.
pub fn fidelity_phi_plus(rho: &PolDensityMatrix) -> f64 {
    let m = rho.matrix();
    let f = 0.5 * (m[(HH, HH)] + m[(VV, VV)] + m[(HH, VV)] + m[(VV, HH)]);
    f.re.clamp(0.0, 1.0)
}

/// Wootters concurrence.
///
/// With `ρ = WW†`, the λᵢ are the singular values of `Wᵀ(σy⊗σy)W` in
/// decreasing order (equivalently the square roots of the eigenvalues of
/// `ρρ̃`), and `C = max(0, λ₁ − λ₂ − λ₃ − λ₄)`. Working with singular values
/// avoids the square root of rounding-level eigenvalues, so `C` keeps
/// full precision.
pub fn concurrence(rho: &PolDensityMatrix) -> Result<f64> {
    let m = *rho.matrix();
    let eig = SymmetricEigen::new(m);
    let (min, max) = eig
        .eigenvalues
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    if min < -PolDensityMatrix::PSD_TOLERANCE {
        return Err(Error::Numeric(format!(
            "concurrence needs a positive semidefinite matrix (eigenvalue {min:e})"
        )));
    }

    // Eigenvalues below the solver's resolution are indistinguishable from 0.
    let floor = 16.0 * f64::EPSILON * max.max(0.0);
    let weights = eig
        .eigenvalues
        .map(|l| Complex64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0));
    let w = eig.eigenvectors * Matrix4::from_diagonal(&weights);
    let tau = w.transpose() * spin_flip() * w;

    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// `σy ⊗ σy` in the `{HH, HV, VH, VV}` basis.
fn spin_flip() -> Matrix4<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let mut f = Matrix4::<Complex64>::zeros();
    f[(HH, VV)] = -one;
    f[(VV, HH)] = -one;
    f[(HV, VH)] = one;
    f[(VH, HV)] = one;
    f
}
