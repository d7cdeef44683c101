//! Run configuration, read from a TOML file.

use std::path::{Path as FsPath, PathBuf};

use serde::Deserialize;

use crate::hardware::{PockelsCell, DEFAULT_MAX_CELLS};
use crate::spectra::{FrequencyGrid, QDotParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub qdot: QDotSection,
    #[serde(default)]
    pub grid: GridSection,
    /// Pockels cell catalog. Absent means the built-in reference cell.
    pub cells: Option<Vec<CellSection>>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub hardware: HardwareSection,
    pub reshape: Option<ReshapeSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QDotSection {
    /// Fine-structure splitting, μeV.
    #[serde(rename = "S")]
    pub splitting: f64,
    /// Decay rate, 1/ns.
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    /// rad/ns; defaults to the 830 nm reference dot.
    pub omega0: Option<f64>,
    #[serde(rename = "omegaH2")]
    pub omega_h2: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_span")]
    pub span_gammas: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Adjust the span so that S/ħ is a whole number of steps.
    #[serde(default)]
    pub exact_splitting: bool,
}

fn default_span() -> f64 {
    FrequencyGrid::DEFAULT_SPAN_GAMMAS
}

fn default_n() -> usize {
    FrequencyGrid::DEFAULT_N
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            span_gammas: default_span(),
            n: default_n(),
            exact_splitting: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub name: String,
    /// rad/V.
    pub alpha: f64,
    /// V/ns.
    pub max_slew: f64,
    /// V.
    pub max_voltage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepParameter {
    S,
    Gamma,
}

impl SweepParameter {
    pub fn label(self) -> &'static str {
        match self {
            SweepParameter::S => "S",
            SweepParameter::Gamma => "Gamma",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSection {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| self.start + (self.stop - self.start) * k as f64 / last)
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSection {
    /// Ramp duration, ns.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    /// Longest window in the residual-fidelity curve, in units of 1/Γ.
    #[serde(default = "default_curve_stop")]
    pub curve_stop_gammas: f64,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_window() -> f64 {
    5.0
}

fn default_max_cells() -> usize {
    DEFAULT_MAX_CELLS
}

fn default_curve_stop() -> f64 {
    10.0
}

fn default_curve_points() -> usize {
    41
}

impl Default for HardwareSection {
    fn default() -> Self {
        Self {
            window: default_window(),
            max_cells: default_max_cells(),
            curve_stop_gammas: default_curve_stop(),
            curve_points: default_curve_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum PathName {
    H,
    V,
}

/// One joint spectral amplitude for the reshape command. Offsets are in
/// rad/ns relative to the grid centers.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpectrumSpec {
    /// Cascade amplitude of the configured dot, optionally with its own
    /// decay rate and line-center offsets.
    Cascade {
        #[serde(default = "default_path")]
        path: PathName,
        #[serde(rename = "Gamma")]
        gamma: Option<f64>,
        #[serde(default)]
        offset1: f64,
        #[serde(default)]
        offset2: f64,
    },
    /// Separable Gaussian with amplitude widths `sigma_k` and linear
    /// spectral phases `slope_k·ω_k`.
    Gaussian {
        #[serde(default)]
        offset1: f64,
        #[serde(default)]
        offset2: f64,
        sigma1: f64,
        sigma2: f64,
        #[serde(default)]
        slope1: f64,
        #[serde(default)]
        slope2: f64,
    },
}

fn default_path() -> PathName {
    PathName::H
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReshapeSection {
    pub a: SpectrumSpec,
    pub b: SpectrumSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{key} must be positive, got {v}"))
            }
        };
        positive("qdot.Gamma", self.qdot.gamma)?;
        if !self.qdot.splitting.is_finite() || self.qdot.splitting < 0.0 {
            return Err(format!("qdot.S must be non-negative, got {}", self.qdot.splitting));
        }
        positive("grid.span_gammas", self.grid.span_gammas)?;
        if self.grid.n < 16 || !self.grid.n.is_power_of_two() {
            return Err(format!("grid.n must be a power of two ≥ 16, got {}", self.grid.n));
        }
        if let Some(cells) = &self.cells {
            for c in cells {
                positive(&format!("cells.{}.alpha", c.name), c.alpha)?;
                positive(&format!("cells.{}.max_slew", c.name), c.max_slew)?;
                positive(&format!("cells.{}.max_voltage", c.name), c.max_voltage)?;
            }
        }
        if let Some(s) = &self.sweep {
            if s.steps < 2 {
                return Err(format!("sweep.steps must be at least 2, got {}", s.steps));
            }
            if !(s.start.is_finite() && s.stop.is_finite()) {
                return Err("sweep.start and sweep.stop must be finite".into());
            }
            let lowest = s.start.min(s.stop);
            match s.parameter {
                SweepParameter::S if lowest < 0.0 => return Err("sweep over S must stay non-negative".into()),
                SweepParameter::Gamma if lowest <= 0.0 => return Err("sweep over Gamma must stay positive".into()),
                _ => {}
            }
        }
        positive("hardware.window", self.hardware.window)?;
        positive("hardware.curve_stop_gammas", self.hardware.curve_stop_gammas)?;
        if self.hardware.max_cells == 0 {
            return Err("hardware.max_cells must be at least 1".into());
        }
        if self.hardware.curve_points < 2 {
            return Err("hardware.curve_points must be at least 2".into());
        }
        if let Some(r) = &self.reshape {
            for (key, spec) in [("reshape.a", &r.a), ("reshape.b", &r.b)] {
                match spec {
                    SpectrumSpec::Cascade { gamma, .. } => {
                        if let Some(g) = gamma {
                            positive(&format!("{key}.Gamma"), *g)?;
                        }
                    }
                    SpectrumSpec::Gaussian { sigma1, sigma2, .. } => {
                        positive(&format!("{key}.sigma1"), *sigma1)?;
                        positive(&format!("{key}.sigma2"), *sigma2)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn qdot_params(&self) -> crate::Result<QDotParams> {
        let q = &self.qdot;
        let reference = QDotParams::reference(q.splitting, q.gamma)?;
        QDotParams::new(
            q.omega0.unwrap_or(reference.omega0),
            q.omega_h2.unwrap_or(reference.omega_h2),
            q.splitting,
            q.gamma,
        )
    }

    pub fn frequency_grid(&self, params: &QDotParams) -> crate::Result<FrequencyGrid> {
        if self.grid.exact_splitting {
            FrequencyGrid::with_exact_splitting(params, self.grid.span_gammas, self.grid.n)
        } else {
            FrequencyGrid::for_params(params, self.grid.span_gammas, self.grid.n)
        }
    }

    /// Cell catalog; `None` for an explicitly empty list.
    pub fn catalog(&self) -> crate::Result<Option<Vec<PockelsCell>>> {
        match &self.cells {
            None => Ok(Some(vec![PockelsCell::reference()])),
            Some(cells) if cells.is_empty() => Ok(None),
            Some(cells) => cells
                .iter()
                .map(|c| PockelsCell::new(c.name.clone(), c.alpha, c.max_slew, c.max_voltage))
                .collect::<crate::Result<Vec<_>>>()
                .map(Some),
        }
    }
}
