//! Indistinguishability maximization for two arbitrary joint spectral
//! amplitudes: a rigid frequency shift, then per-photon monotone frequency
//! warps that match the magnitude marginals, then removal of a separable
//! per-photon spectral phase.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::FftDirection;

use crate::compensation::{shift_amplitude, ShiftSpec};
use crate::error::{Error, Result};
use crate::fft::fft2_inplace;
use crate::spectra::{GridAxis, SpectralAmplitude};
use crate::time_domain::{to_frequency, to_time_quiet, TemporalAmplitude};

/// Coarse scan stride in grid steps.
pub const SCAN_STRIDE: usize = 4;
/// Finest refinement step in grid steps.
pub const REFINE_RESOLUTION: f64 = 1.0 / 16.0;
/// Rank-1 phase coherence required to call a phase difference separable.
pub const SEPARABILITY_THRESHOLD: f64 = 0.99;
/// Slack allowed when checking that a step does not lower the overlap.
pub const MONOTONE_SLACK: f64 = 1e-6;

/// Objective values of the coarse shift scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftScan {
    pub stride: usize,
    /// Shift, in grid steps, of lattice index 0 on each axis.
    pub first: i64,
    /// `values[[p, q]]` is the objective at steps
    /// `(first + stride·p, first + stride·q)`.
    pub values: Array2<f64>,
}

impl ShiftScan {
    pub fn steps_at(&self, p: usize, q: usize) -> (i64, i64) {
        let s = self.stride as i64;
        (self.first + s * p as i64, self.first + s * q as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidShift {
    /// Shift to apply to `b`, μeV.
    pub shift: ShiftSpec,
    /// Same shift in grid steps.
    pub steps: (f64, f64),
    /// `∑|a|·|shifted b| dω²` at the returned shift.
    pub objective: f64,
    pub scan: ShiftScan,
}

/// Rigid shift of `b` maximizing `∑|a|·|b(ω − Δ)| dω²`.
///
/// Every shift on a lattice of [`SCAN_STRIDE`] steps is scored at once via
/// an FFT cross-correlation; the best lattice point is then refined by a
/// pattern search down to [`REFINE_RESOLUTION`] steps. Ties resolve to the
/// lexicographically smallest shift.
pub fn best_rigid_shift(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<RigidShift> {
    a.grid.ensure_same(&b.grid)?;
    let grid = a.grid;
    let n = grid.n;
    let dw = grid.step();

    let mag_a = a.values.mapv(|v| v.norm());
    let mag_b = b.values.mapv(|v| v.norm());
    if mag_a.sum() == 0.0 || mag_b.sum() == 0.0 {
        return Err(Error::Degenerate("shift search needs nonzero amplitudes".into()));
    }

    // c[k] = ∑_x |a|[x]·|b|[x − k] = IDFT(â·conj(b̂))[k] / n².
    let mut fa = mag_a.mapv(|v| Complex64::new(v, 0.0));
    let mut fb = mag_b.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut fa, FftDirection::Forward);
    fft2_inplace(&mut fb, FftDirection::Forward);
    Zip::from(&mut fa).and(&fb).for_each(|x, y| *x *= y.conj());
    drop(fb);
    fft2_inplace(&mut fa, FftDirection::Inverse);
    let norm = dw * dw / (n * n) as f64;
    let corr = fa.mapv(|v| v.re * norm);
    drop(fa);

    let at = |k1: i64, k2: i64| {
        let m = n as i64;
        corr[[k1.rem_euclid(m) as usize, k2.rem_euclid(m) as usize]]
    };

    let lattice = n / SCAN_STRIDE;
    let first = -(n as i64) / 2;
    let mut scan = ShiftScan {
        stride: SCAN_STRIDE,
        first,
        values: Array2::zeros((lattice, lattice)),
    };
    let mut best = (0usize, 0usize);
    let mut best_val = f64::NEG_INFINITY;
    for p in 0..lattice {
        for q in 0..lattice {
            let (k1, k2) = scan.steps_at(p, q);
            let v = at(k1, k2);
            scan.values[[p, q]] = v;
            if v > best_val {
                best_val = v;
                best = (p, q);
            }
        }
    }

    let (k1, k2) = scan.steps_at(best.0, best.1);
    let mut pos = (k1 as f64, k2 as f64);
    let mut evaluator = FractionalObjective::new(&mag_a, b);
    let mut objective = |s: (f64, f64)| -> f64 {
        if s.0.fract() == 0.0 && s.1.fract() == 0.0 {
            at(s.0 as i64, s.1 as i64)
        } else {
            evaluator.eval(s)
        }
    };

    let mut step = SCAN_STRIDE as f64 / 2.0;
    while step >= REFINE_RESOLUTION {
        for _ in 0..64 {
            let mut moved = false;
            let mut cand_best = best_val;
            let mut cand_pos = pos;
            for d1 in [-step, 0.0, step] {
                for d2 in [-step, 0.0, step] {
                    if d1 == 0.0 && d2 == 0.0 {
                        continue;
                    }
                    let s = (pos.0 + d1, pos.1 + d2);
                    if s.0.abs() > (n / 2) as f64 || s.1.abs() > (n / 2) as f64 {
                        continue;
                    }
                    let v = objective(s);
                    if v > cand_best {
                        cand_best = v;
                        cand_pos = s;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
            best_val = cand_best;
            pos = cand_pos;
        }
        step /= 2.0;
    }

    Ok(RigidShift {
        shift: ShiftSpec::from_rates(pos.0 * dw, pos.1 * dw),
        steps: pos,
        objective: best_val,
        scan,
    })
}

/// `∑|a|·|b(ω − s·dω)| dω²` at fractional step shifts, via the time picture.
struct FractionalObjective<'a> {
    mag_a: &'a Array2<f64>,
    b_time: TemporalAmplitude,
    dw: f64,
}

impl<'a> FractionalObjective<'a> {
    fn new(mag_a: &'a Array2<f64>, b: &SpectralAmplitude) -> Self {
        Self {
            mag_a,
            b_time: to_time_quiet(b),
            dw: b.grid.step(),
        }
    }

    fn eval(&mut self, steps: (f64, f64)) -> f64 {
        let grid = self.b_time.grid;
        let (r1, r2) = (steps.0 * self.dw, steps.1 * self.dw);
        let p1: Vec<_> = (0..grid.n()).map(|m| Complex64::from_polar(1.0, -r1 * grid.time(m))).collect();
        let p2: Vec<_> = (0..grid.n()).map(|m| Complex64::from_polar(1.0, -r2 * grid.time(m))).collect();
        let mut t = self.b_time.clone();
        Zip::indexed(&mut t.values).for_each(|(i, j), v| *v *= p1[i] * p2[j]);
        let shifted = to_frequency(&t);
        let total: f64 = self
            .mag_a
            .rows()
            .into_iter()
            .zip(shifted.values.rows())
            .map(|(x, y)| x.iter().zip(y.iter()).map(|(m, z)| m * z.norm()).sum::<f64>())
            .sum();
        total * self.dw * self.dw
    }
}

/// Monotone map of one frequency axis, tabulated on the grid nodes in
/// index units (node `j` sits at `origin + j·step`).
#[derive(Debug, Clone, PartialEq)]
pub struct AxisWarp {
    origin: f64,
    step: f64,
    /// `F_a⁻¹(F_b(j))`: where b's content at node j ends up.
    forward: Vec<f64>,
    /// `F_b⁻¹(F_a(j))`: where the warped amplitude at node j samples b.
    inverse: Vec<f64>,
    /// `d inverse / dj`.
    jacobian: Vec<f64>,
    /// Target marginal (index-unit density), used to weight diagnostics.
    weight: Vec<f64>,
}

impl AxisWarp {
    fn to_omega(&self, x: f64) -> f64 {
        self.origin + x * self.step
    }

    fn interp(table: &[f64], x: f64) -> Option<f64> {
        let last = table.len() - 1;
        if !(x >= 0.0 && x <= last as f64) {
            return None;
        }
        let i = (x.floor() as usize).min(last - 1);
        let f = x - i as f64;
        Some(table[i] + f * (table[i + 1] - table[i]))
    }

    /// ω → ω′ moving b's content onto a's; identity outside the grid.
    pub fn apply(&self, omega: f64) -> f64 {
        let x = (omega - self.origin) / self.step;
        Self::interp(&self.forward, x).map_or(omega, |y| self.to_omega(y))
    }

    /// Inverse map ω′ → ω; identity outside the grid.
    pub fn apply_inverse(&self, omega: f64) -> f64 {
        let x = (omega - self.origin) / self.step;
        Self::interp(&self.inverse, x).map_or(omega, |y| self.to_omega(y))
    }

    /// `(node ω, warped ω)` pairs.
    pub fn table(&self) -> Vec<(f64, f64)> {
        self.forward
            .iter()
            .enumerate()
            .map(|(j, &y)| (self.to_omega(j as f64), self.to_omega(y)))
            .collect()
    }

    /// Mean `|ω − inverse(ω)|` weighted by the target marginal, rad/ns.
    pub fn mean_displacement(&self) -> f64 {
        let total: f64 = self.weight.iter().sum();
        self.inverse
            .iter()
            .enumerate()
            .zip(&self.weight)
            .map(|((j, &x), w)| w * (x - j as f64).abs())
            .sum::<f64>()
            / total
            * self.step
    }

    fn build(target: &[f64], source: &[f64], origin: f64, step: f64) -> (Self, bool) {
        let (ct, reg_t) = Cdf::new(target);
        let (cs, reg_s) = Cdf::new(source);
        let n = target.len();
        let forward: Vec<f64> = (0..n).map(|j| ct.inverse(cs.at_node(j))).collect();
        let inverse: Vec<f64> = (0..n).map(|j| cs.inverse(ct.at_node(j))).collect();
        let jacobian = inverse
            .iter()
            .enumerate()
            .map(|(j, &x)| ct.density[j] / cs.density_at(x))
            .collect();
        (
            Self {
                origin,
                step,
                forward,
                inverse,
                jacobian,
                weight: ct.density.clone(),
            },
            reg_t || reg_s,
        )
    }
}

/// Position in a distribution, kept as both the mass below and the mass
/// above so that either tail is resolved to full relative precision.
#[derive(Debug, Clone, Copy)]
struct Quantile {
    below: f64,
    above: f64,
}

/// Piecewise-constant density on unit cells centered on the nodes.
struct Cdf {
    density: Vec<f64>,
    /// `below[c]`: mass left of cell c.
    below: Vec<f64>,
    /// `above[c]`: mass from cell c rightwards; `above[n] = 0`.
    above: Vec<f64>,
}

impl Cdf {
    const FLOOR: f64 = 1e-14;

    fn new(marginal: &[f64]) -> (Self, bool) {
        let peak = marginal.iter().copied().fold(0.0, f64::max);
        let floor = Self::FLOOR * peak;
        let mut regularized = false;
        let mut density: Vec<f64> = marginal
            .iter()
            .map(|&p| {
                if p < floor || !p.is_finite() {
                    regularized = true;
                    floor
                } else {
                    p
                }
            })
            .collect();
        let total: f64 = density.iter().sum();
        density.iter_mut().for_each(|p| *p /= total);
        let n = density.len();
        let mut below = vec![0.0; n + 1];
        let mut above = vec![0.0; n + 1];
        for c in 0..n {
            below[c + 1] = below[c] + density[c];
            above[n - 1 - c] = above[n - c] + density[n - 1 - c];
        }
        (Self { density, below, above }, regularized)
    }

    fn at_node(&self, j: usize) -> Quantile {
        let half = 0.5 * self.density[j];
        Quantile {
            below: self.below[j] + half,
            above: self.above[j + 1] + half,
        }
    }

    /// Index-unit position at quantile `q`, solved from the nearer tail.
    fn inverse(&self, q: Quantile) -> f64 {
        let n = self.density.len();
        if q.below <= q.above {
            let c = self.below.partition_point(|&e| e <= q.below).saturating_sub(1).min(n - 1);
            let frac = ((q.below - self.below[c]) / self.density[c]).clamp(0.0, 1.0);
            c as f64 - 0.5 + frac
        } else {
            // `above` is decreasing: first cell whose right-edge mass ≤ q.above.
            let c = self.above[1..].partition_point(|&e| e > q.above).min(n - 1);
            let frac = ((q.above - self.above[c + 1]) / self.density[c]).clamp(0.0, 1.0);
            c as f64 + 0.5 - frac
        }
    }

    /// Density linearly interpolated between nodes.
    fn density_at(&self, x: f64) -> f64 {
        let last = self.density.len() - 1;
        let x = x.clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        let f = x - i as f64;
        (1.0 - f) * self.density[i] + f * self.density[i + 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpFunctions {
    pub warp1: AxisWarp,
    pub warp2: AxisWarp,
    /// A marginal had (near-)empty cells and was floored to keep the CDF
    /// strictly increasing.
    pub regularized: bool,
}

/// Per-axis warps from cumulative-distribution matching of the marginals:
/// `warp_k = F_{a,k}⁻¹ ∘ F_{b,k}`.
pub fn match_magnitudes(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<WarpFunctions> {
    a.grid.ensure_same(&b.grid)?;
    let grid = a.grid;
    let mut regularized = false;
    let mut axis = |ax: GridAxis| -> Result<AxisWarp> {
        let ma = a.marginal(ax);
        let mb = b.marginal(ax);
        if !(ma.sum() > 0.0 && mb.sum() > 0.0) {
            return Err(Error::Degenerate("magnitude matching needs nonzero marginals".into()));
        }
        let origin = grid.center(ax) - 0.5 * grid.span;
        let (w, reg) = AxisWarp::build(ma.as_slice().unwrap(), mb.as_slice().unwrap(), origin, grid.step());
        regularized |= reg;
        Ok(w)
    };
    let warp1 = axis(GridAxis::One)?;
    let warp2 = axis(GridAxis::Two)?;
    Ok(WarpFunctions {
        warp1,
        warp2,
        regularized,
    })
}

/// Catmull-Rom weights and source indices for position `x` (index units);
/// indices outside the grid are dropped.
fn cubic_taps(x: f64, n: usize) -> Vec<(usize, f64)> {
    let base = x.floor();
    let f = x - base;
    let (f2, f3) = (f * f, f * f * f);
    let w = [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ];
    (0..4)
        .filter_map(|k| {
            let idx = base as i64 - 1 + k as i64;
            (idx >= 0 && (idx as usize) < n && w[k] != 0.0).then_some((idx as usize, w[k]))
        })
        .collect()
}

/// Pull `b` back through the warps with the density-preserving factor:
/// `b′(ω1, ω2) = √(J1 J2) · b(inv1(ω1), inv2(ω2))`.
pub fn apply_warp(b: &SpectralAmplitude, warps: &WarpFunctions) -> SpectralAmplitude {
    let n = b.grid.n;
    let taps1: Vec<_> = warps.warp1.inverse.iter().map(|&x| cubic_taps(x, n)).collect();
    let taps2: Vec<_> = warps.warp2.inverse.iter().map(|&x| cubic_taps(x, n)).collect();

    let mut rows = Array2::<Complex64>::zeros((n, n));
    for (i, mut out) in rows.rows_mut().into_iter().enumerate() {
        for &(src, w) in &taps1[i] {
            out.scaled_add(Complex64::new(w, 0.0), &b.values.row(src));
        }
    }

    let scale1: Vec<f64> = warps.warp1.jacobian.iter().map(|j| j.sqrt()).collect();
    let scale2: Vec<f64> = warps.warp2.jacobian.iter().map(|j| j.sqrt()).collect();
    let mut values = Array2::<Complex64>::zeros((n, n));
    for ((i, mut out), src) in values.rows_mut().into_iter().enumerate().zip(rows.rows()) {
        for (j, v) in out.iter_mut().enumerate() {
            let acc: Complex64 = taps2[j].iter().map(|&(k, w)| src[k] * w).sum();
            *v = acc * (scale1[i] * scale2[j]);
        }
    }
    SpectralAmplitude {
        grid: b.grid,
        values,
        narrow_grid: b.narrow_grid,
    }
}

/// Correction phases per photon, applied as `b·e^{i(phase1(ω1) + phase2(ω2))}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfiles {
    pub phase1: Vec<f64>,
    pub phase2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFlattening {
    pub profiles: PhaseProfiles,
    /// `|∑ conj(a)·b·e^{i(p1+p2)}| / ∑|a||b|`; 1 when the phase difference is
    /// exactly separable.
    pub separability: f64,
    /// `separability ≥ SEPARABILITY_THRESHOLD`. When false the profiles are
    /// still the best separable correction found, but only partial.
    pub separable: bool,
    pub iterations: usize,
}

/// Separable phase profiles maximizing `Re⟨a| b·e^{i(p1+p2)}⟩`, by
/// alternating exact maximization over each photon's profile.
pub fn flatten_phase(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<PhaseFlattening> {
    a.grid.ensure_same(&b.grid)?;
    let n = a.grid.n;
    let mut cross = a.values.clone();
    Zip::from(&mut cross).and(&b.values).for_each(|x, y| *x = x.conj() * y);
    let total_weight: f64 = cross.iter().map(|z| z.norm()).sum();
    if total_weight == 0.0 {
        return Err(Error::Degenerate("amplitudes do not overlap anywhere".into()));
    }

    let arg_or_zero = |z: Complex64| if z.norm() > 0.0 { -z.arg() } else { 0.0 };
    let mut p1 = vec![0.0; n];
    let mut p2 = vec![0.0; n];
    let mut objective = f64::NEG_INFINITY;
    let mut iterations = 0;
    for it in 1..=200 {
        iterations = it;
        let e2: Vec<_> = p2.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        for (i, row) in cross.rows().into_iter().enumerate() {
            let s: Complex64 = row.iter().zip(&e2).map(|(c, e)| c * e).sum();
            p1[i] = arg_or_zero(s);
        }
        let e1: Vec<_> = p1.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        let mut cols = vec![Complex64::new(0.0, 0.0); n];
        for (row, e) in cross.rows().into_iter().zip(&e1) {
            for (acc, c) in cols.iter_mut().zip(row.iter()) {
                *acc += c * e;
            }
        }
        for (j, s) in cols.iter().enumerate() {
            p2[j] = arg_or_zero(*s);
        }
        let value: f64 = cols.iter().map(|s| s.norm()).sum();
        let improved = value - objective;
        objective = value;
        if improved <= 1e-13 * value.abs() {
            break;
        }
    }

    // Fix the p1 + c, p2 − c gauge at photon 2's strongest column.
    let col_weight: Vec<f64> = (0..n).map(|j| cross.column(j).iter().map(|z| z.norm()).sum()).collect();
    let anchor = col_weight
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (j, &w)| if w > acc.1 { (j, w) } else { acc })
        .0;
    let c = p2[anchor];
    p2.iter_mut().for_each(|p| *p = wrap_phase(*p - c));
    p1.iter_mut().for_each(|p| *p = wrap_phase(*p + c));

    let e2: Vec<_> = p2.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    let aligned: Complex64 = cross
        .rows()
        .into_iter()
        .zip(&p1)
        .map(|(row, &q1)| Complex64::from_polar(1.0, q1) * row.iter().zip(&e2).map(|(c, e)| c * e).sum::<Complex64>())
        .sum();
    let separability = aligned.norm() / total_weight;

    Ok(PhaseFlattening {
        profiles: PhaseProfiles { phase1: p1, phase2: p2 },
        separability,
        separable: separability >= SEPARABILITY_THRESHOLD,
        iterations,
    })
}

fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

pub fn apply_phase(b: &SpectralAmplitude, profiles: &PhaseProfiles) -> SpectralAmplitude {
    let e1: Vec<_> = profiles.phase1.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    let e2: Vec<_> = profiles.phase2.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    let mut out = b.clone();
    Zip::indexed(&mut out.values).for_each(|(i, j), v| *v *= e1[i] * e2[j]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initial,
    Shift,
    Warp,
    Phase,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::Shift => "shift",
            Stage::Warp => "warp",
            Stage::Phase => "phase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    /// `⟨a|b⟩` after this stage.
    pub overlap: Complex64,
    /// False when the stage would have lowered `|⟨a|b⟩|` and was skipped.
    pub applied: bool,
    /// Squared norm of the candidate before renormalization.
    pub norm_before: f64,
}

#[derive(Debug, Clone)]
pub struct ThreeStepReport {
    pub stages: Vec<StageRecord>,
    pub shift: RigidShift,
    pub warps: WarpFunctions,
    pub phases: PhaseFlattening,
}

impl ThreeStepReport {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.overlap.norm()).collect()
    }

    pub fn final_overlap(&self) -> Complex64 {
        self.stages.last().map(|s| s.overlap).unwrap_or_default()
    }

    /// Overlap magnitude never drops by more than [`MONOTONE_SLACK`].
    pub fn is_monotone(&self) -> bool {
        self.magnitudes().windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK)
    }
}

#[derive(Debug, Clone)]
pub struct ThreeStepOutcome {
    pub corrected: SpectralAmplitude,
    pub report: ThreeStepReport,
}

/// Shift, warp and phase-flatten `b` towards `a`. Both inputs are
/// normalized first. A stage that would reduce `|⟨a|b⟩|` is recorded but
/// not applied.
pub fn three_step(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<ThreeStepOutcome> {
    a.grid.ensure_same(&b.grid)?;
    let a = a.normalize()?;
    let mut current = b.normalize()?;
    let mut stages = vec![StageRecord {
        stage: Stage::Initial,
        overlap: a.overlap(&current)?,
        applied: true,
        norm_before: 1.0,
    }];

    let mut advance = |stage: Stage, candidate: SpectralAmplitude, current: &mut SpectralAmplitude| -> Result<()> {
        let norm_before = candidate.norm_sqr();
        let candidate = candidate.normalize()?;
        let overlap = a.overlap(&candidate)?;
        let previous = stages.last().expect("initial stage recorded").overlap;
        let applied = overlap.norm() >= previous.norm() - MONOTONE_SLACK;
        if applied {
            *current = candidate;
        }
        stages.push(StageRecord {
            stage,
            overlap: if applied { overlap } else { previous },
            applied,
            norm_before,
        });
        Ok(())
    };

    let shift = best_rigid_shift(&a, &current)?;
    let (r1, r2) = shift.shift.rates();
    let (shifted, _) = shift_amplitude(&current, r1, r2)?;
    advance(Stage::Shift, shifted, &mut current)?;

    let warps = match_magnitudes(&a, &current)?;
    let warped = apply_warp(&current, &warps);
    advance(Stage::Warp, warped, &mut current)?;

    let phases = flatten_phase(&a, &current)?;
    let flattened = apply_phase(&current, &phases.profiles);
    advance(Stage::Phase, flattened, &mut current)?;

    Ok(ThreeStepOutcome {
        corrected: current,
        report: ThreeStepReport {
            stages,
            shift,
            warps,
            phases,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::FrequencyGrid;

    fn gauss(grid: FrequencyGrid, c1: f64, c2: f64, s1: f64, s2: f64) -> SpectralAmplitude {
        SpectralAmplitude::separable(
            grid,
            move |w| Complex64::new((-(w - c1).powi(2) / (4.0 * s1 * s1)).exp(), 0.0),
            move |w| Complex64::new((-(w - c2).powi(2) / (4.0 * s2 * s2)).exp(), 0.0),
        )
        .unwrap()
        .normalize()
        .unwrap()
    }

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(0.0, 0.0, 64.0, 128).unwrap()
    }

    #[test]
    fn identical_inputs_need_no_shift() {
        let a = gauss(grid(), 1.0, -2.0, 1.5, 1.0);
        let r = best_rigid_shift(&a, &a).unwrap();
        assert_eq!(r.steps, (0.0, 0.0));
        assert_eq!(r.shift, ShiftSpec::from_rates(0.0, 0.0));
    }

    #[test]
    fn recovers_gaussian_offset() {
        // Closed form: two equal-width Gaussians overlap best when aligned.
        let g = grid();
        let a = gauss(g, 0.0, 0.0, 1.0, 1.5);
        let (d1, d2) = (3.3, -5.1);
        let b = gauss(g, d1, d2, 1.0, 1.5);
        let r = best_rigid_shift(&a, &b).unwrap();
        let (r1, r2) = r.shift.rates();
        let tol = REFINE_RESOLUTION * g.step();
        assert!((r1 + d1).abs() <= tol, "{r1}");
        assert!((r2 + d2).abs() <= tol, "{r2}");
        let max_scan = r.scan.values.iter().copied().fold(f64::MIN, f64::max);
        assert!(r.objective >= max_scan);
    }

    #[test]
    fn zero_amplitude_is_degenerate() {
        let a = gauss(grid(), 0.0, 0.0, 1.0, 1.0);
        let z = a.scaled(Complex64::new(0.0, 0.0));
        assert!(matches!(best_rigid_shift(&a, &z), Err(Error::Degenerate(_))));
        assert!(matches!(match_magnitudes(&a, &z), Err(Error::Degenerate(_))));
        assert!(matches!(flatten_phase(&a, &z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn identity_warp_for_identical_inputs() {
        let a = gauss(grid(), 0.5, -0.5, 2.0, 3.0);
        let w = match_magnitudes(&a, &a).unwrap();
        // Deep in the tails the CDF is flat and its inverse ill-conditioned.
        for warp in [&w.warp1, &w.warp2] {
            let peak = warp.weight.iter().copied().fold(0.0, f64::max);
            for ((x, y), p) in warp.table().into_iter().zip(&warp.weight) {
                if *p > 1e-10 * peak {
                    assert!((x - y).abs() < 1e-9, "{x} -> {y}");
                }
            }
        }
        let warped = apply_warp(&a, &w);
        let d = a.values.iter().zip(warped.values.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 1e-9);
    }

    #[test]
    fn rigid_offset_warp_is_constant_shift() {
        let g = grid();
        let a = gauss(g, 0.0, 0.0, 2.0, 2.0);
        let b = gauss(g, 3.0 * g.step(), -5.0 * g.step(), 2.0, 2.0);
        let w = match_magnitudes(&a, &b).unwrap();
        for j in 48..80 {
            let x = g.omega1(j);
            assert!((w.warp1.apply(x) - (x - 3.0 * g.step())).abs() < 1e-6, "node {j}");
            let x = g.omega2(j);
            assert!((w.warp2.apply(x) - (x + 5.0 * g.step())).abs() < 1e-6, "node {j}");
        }
    }

    #[test]
    fn warp_maps_widths() {
        let g = FrequencyGrid::new(0.0, 0.0, 80.0, 256).unwrap();
        let a = gauss(g, 0.0, 0.0, 1.0, 2.0);
        let b = gauss(g, 0.0, 0.0, 2.0, 1.0);
        let w = match_magnitudes(&a, &b).unwrap();
        assert!(w.regularized);
        // b is twice as wide on axis 1: b's content at ω lands at ω/2.
        assert!((w.warp1.apply(2.0) - 1.0).abs() < 0.02);
        assert!((w.warp2.apply(1.0) - 2.0).abs() < 0.02);
        let warped = apply_warp(&b, &w).normalize().unwrap();
        let ov = a.overlap(&warped).unwrap();
        assert!(ov.norm() > 1.0 - 1e-4, "{ov}");
    }

    #[test]
    fn planted_linear_phase_is_recovered() {
        let g = grid();
        let a = gauss(g, 0.0, 0.0, 2.0, 2.0);
        let (c1, c2) = (0.7, -0.4);
        let b = SpectralAmplitude::new(
            g,
            Array2::from_shape_fn((g.n, g.n), |(i, j)| {
                a.values[[i, j]] * Complex64::from_polar(1.0, c1 * g.omega1(i) + c2 * g.omega2(j))
            }),
        )
        .unwrap();
        let f = flatten_phase(&a, &b).unwrap();
        assert!(f.separable);
        assert!((f.separability - 1.0).abs() < 1e-9);
        let slope = |p: &[f64], axis: &dyn Fn(usize) -> f64| {
            // Unwrap over the well-weighted middle and fit a line.
            let idx: Vec<usize> = (54..74).collect();
            let mut un = vec![p[idx[0]]];
            for w in idx.windows(2) {
                let mut d = p[w[1]] - p[w[0]];
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                un.push(un.last().unwrap() + d);
            }
            let xs: Vec<f64> = idx.iter().map(|&k| axis(k)).collect();
            let mx = xs.iter().sum::<f64>() / xs.len() as f64;
            let my = un.iter().sum::<f64>() / un.len() as f64;
            xs.iter().zip(&un).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
                / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
        };
        assert!((slope(&f.profiles.phase1, &|k| g.omega1(k)) + c1).abs() < 1e-9);
        assert!((slope(&f.profiles.phase2, &|k| g.omega2(k)) + c2).abs() < 1e-9);
        let corrected = apply_phase(&b, &f.profiles);
        let ov = a.overlap(&corrected).unwrap();
        assert!(ov.arg().abs() < 1e-3);
        assert!((ov.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_phase_gives_constant_profiles() {
        let a = gauss(grid(), 0.0, 0.0, 2.0, 2.0);
        let b = a.scaled(Complex64::from_polar(1.0, 1.1));
        let f = flatten_phase(&a, &b).unwrap();
        let first = f.profiles.phase1[0] + f.profiles.phase2[0];
        for i in 0..grid().n {
            assert!((wrap_phase(f.profiles.phase1[i] + f.profiles.phase2[0] - first)).abs() < 1e-9);
            assert!((wrap_phase(f.profiles.phase1[0] + f.profiles.phase2[i] - first)).abs() < 1e-9);
        }
        assert!((wrap_phase(first + 1.1)).abs() < 1e-9);
    }

    #[test]
    fn non_separable_phase_is_reported() {
        let g = grid();
        let a = gauss(g, 0.0, 0.0, 3.0, 3.0);
        let b = SpectralAmplitude::new(
            g,
            Array2::from_shape_fn((g.n, g.n), |(i, j)| {
                a.values[[i, j]] * Complex64::from_polar(1.0, 0.8 * g.omega1(i) * g.omega2(j))
            }),
        )
        .unwrap();
        let f = flatten_phase(&a, &b).unwrap();
        assert!(!f.separable);
        assert!(f.separability < SEPARABILITY_THRESHOLD);
    }

    #[test]
    fn three_step_on_identical_inputs_is_trivial() {
        let a = gauss(grid(), 0.0, 1.0, 2.0, 1.5);
        let out = three_step(&a, &a).unwrap();
        for s in &out.report.stages {
            assert!((s.overlap.norm() - 1.0).abs() < 1e-9, "{:?}", s);
        }
        assert!(out.report.is_monotone());
    }

    #[test]
    fn three_step_aligns_shifted_and_stretched_gaussians() {
        let g = FrequencyGrid::new(0.0, 0.0, 80.0, 256).unwrap();
        let a = gauss(g, 0.0, 0.0, 1.0, 1.0);
        let b = gauss(g, 4.0, -3.0, 2.0, 1.5);
        let out = three_step(&a, &b).unwrap();
        let m = out.report.magnitudes();
        assert!(out.report.is_monotone(), "{m:?}");
        assert!(m[3] > 0.999, "{m:?}");
        assert!((out.corrected.norm_sqr() - 1.0).abs() < 1e-9);
    }
}
