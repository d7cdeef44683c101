//! Electro-optic drive planning: the voltage slew that turns a Pockels cell
//! into a serrodyne frequency shifter, how many cells in series a given
//! splitting needs, and what a finite modulation window costs in fidelity.
//!
//! A cell imposes `φ(t) = α·V(t)` on the V-polarized mode, so a linear
//! ramp with slew `dV/dt` shifts the frequency by `α·dV/dt`. Compensating
//! a splitting S needs `dV/dt = S/(ħα)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::spectra::PhysConstants;
use crate::time_domain::truncated_coherence;

#[derive(Debug, Clone, PartialEq)]
pub struct PockelsCell {
    pub name: String,
    /// Phase sensitivity, rad/V.
    pub alpha: f64,
    /// Driver slew limit, V/ns.
    pub max_slew: f64,
    /// Driver voltage limit, V.
    pub max_voltage: f64,
    /// Set when the driver limits are not measured values.
    pub placeholder_limits: bool,
}

impl PockelsCell {
    pub fn new(name: impl Into<String>, alpha: f64, max_slew: f64, max_voltage: f64) -> Result<Self> {
        let cell = Self {
            name: name.into(),
            alpha,
            max_slew,
            max_voltage,
            placeholder_limits: false,
        };
        for (field, v) in [("alpha", alpha), ("max_slew", max_slew), ("max_voltage", max_voltage)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "cell '{}': {field} must be positive, got {v}",
                    cell.name
                )));
            }
        }
        Ok(cell)
    }

    /// Commercial cell with 52 mrad/V at 830 nm. Slew and voltage limits
    /// are placeholders.
    pub fn reference() -> Self {
        Self {
            name: "52mrad-830nm".into(),
            alpha: 0.052,
            max_slew: 50.0,
            max_voltage: 300.0,
            placeholder_limits: true,
        }
    }
}

/// Driver limit that decides a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    MaxSlew,
    MaxVoltage,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::MaxSlew => "max_slew",
            Constraint::MaxVoltage => "max_voltage",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampPlan {
    pub n_cells: usize,
    /// Slew magnitude driven into each cell, V/ns.
    pub per_cell_slew: f64,
    /// Ramp duration, ns.
    pub window: f64,
    /// `per_cell_slew × window`, V.
    pub peak_voltage: f64,
    /// `n_cells × α × per_cell_slew`, rad/ns.
    pub achieved_rate: f64,
}

/// Upper bound on cells in series along one photon's path.
pub const DEFAULT_MAX_CELLS: usize = 4;

/// `(S/ħ)/α` in V/ns. Signed: the sign gives the ramp direction.
pub fn required_slew(splitting: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("phase sensitivity must be positive, got {alpha}")));
    }
    Ok(PhysConstants::energy_to_rate(splitting) / alpha)
}

pub fn plan_cells(splitting: f64, cell: &PockelsCell, window: f64) -> Result<RampPlan> {
    plan_cells_limited(splitting, cell, window, DEFAULT_MAX_CELLS)
}

/// Fewest identical cells in series whose per-cell slew and peak voltage
/// both fit the driver limits.
pub fn plan_cells_limited(splitting: f64, cell: &PockelsCell, window: f64, max_cells: usize) -> Result<RampPlan> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::Parameter(format!("ramp window must be positive, got {window}")));
    }
    if max_cells == 0 {
        return Err(Error::Parameter("max_cells must be at least 1".into()));
    }
    let slew = required_slew(splitting, cell.alpha)?.abs();

    let cells_for = |total: f64, limit: f64| -> usize {
        // Smallest n with total/n ≤ limit, robust to rounding at exact ratios.
        let mut n = (total / limit).ceil().max(1.0) as usize;
        while n > 1 && total / (n - 1) as f64 <= limit {
            n -= 1;
        }
        while total / n as f64 > limit {
            n += 1;
        }
        n
    };
    let by_slew = cells_for(slew, cell.max_slew);
    let by_voltage = cells_for(slew * window, cell.max_voltage);
    let needed = by_slew.max(by_voltage);

    if needed > max_cells {
        let constraint = if by_voltage > by_slew {
            Constraint::MaxVoltage
        } else {
            Constraint::MaxSlew
        };
        return Err(Error::Infeasible {
            constraint,
            required_cells: needed,
            max_cells,
        });
    }

    let per_cell_slew = slew / needed as f64;
    Ok(RampPlan {
        n_cells: needed,
        per_cell_slew,
        window,
        peak_voltage: per_cell_slew * window,
        achieved_rate: needed as f64 * cell.alpha * per_cell_slew,
    })
}

/// Φ⁺ fidelity when the compensating ramp lasts only `window` ns after the
/// wave-packet onset: `(1 + Re O_T)/2`.
pub fn residual_fidelity(splitting: f64, gamma: f64, window: f64) -> Result<f64> {
    if window.is_nan() || window < 0.0 {
        return Err(Error::Parameter(format!("window must be non-negative, got {window}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("decay rate must be positive, got {gamma}")));
    }
    Ok(0.5 * (1.0 + truncated_coherence(splitting, gamma, window).re))
}
