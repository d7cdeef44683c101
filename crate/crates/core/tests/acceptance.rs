//! Acceptance checks. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::fs;
use std::path::Path as FsPath;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use num_complex::Complex64;
use polshift::cli::{self, Args};
use polshift::compensation::{compensate, separability_residual};
use polshift::hardware::{plan_cells, required_slew, residual_fidelity, PockelsCell};
use polshift::reshape::three_step;
use polshift::spectra::{eval_phi, FrequencyGrid, Path, PhysConstants, QDotParams};
use polshift::state::{concurrence, fidelity_phi_plus, reduce_polarization, TwoPhotonState};
use polshift::time_domain::{to_frequency, to_time};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const SPAN: f64 = 800.0;
const N: usize = 4096;

/// Splitting in μeV giving `S/ħ = ratio·Γ`.
fn splitting_for(ratio: f64, gamma: f64) -> f64 {
    PhysConstants::rate_to_energy(ratio * gamma)
}

fn closed_form_overlap(p: &QDotParams) -> Complex64 {
    Complex64::new(p.gamma, 0.0) / Complex64::new(p.gamma, -p.splitting_rate())
}

fn slew() -> Outcome {
    let v = required_slew(1.0, 0.052).map_err(err)?;
    check((28.0..=31.0).contains(&v), format!("required slew {v:.4} V/ns, want [28, 31]"))
}

fn voltage() -> Outcome {
    let plan = plan_cells(1.0, &PockelsCell::reference(), 5.0).map_err(err)?;
    check(
        plan.peak_voltage <= 300.0,
        format!("peak voltage {:.2} V over {} cell(s), want ≤ 300", plan.peak_voltage, plan.n_cells),
    )
}

fn completeness() -> Outcome {
    let mut worst_f = 1.0f64;
    let mut worst_r = 0.0f64;
    for ratio in [0.5, 1.0, 2.0, 5.0] {
        let p = QDotParams::reference(splitting_for(ratio, 1.0), 1.0).map_err(err)?;
        let g = FrequencyGrid::with_exact_splitting(&p, SPAN, N).map_err(err)?;
        let st = TwoPhotonState::cascade(&g, &p).map_err(err)?;
        let out = compensate(&st, &p).map_err(err)?;
        drop(st);
        if !out.diagnostics.exact {
            return Err(format!("S/ħΓ = {ratio}: shift not exact on snapped grid"));
        }
        worst_f = worst_f.min(fidelity_phi_plus(&reduce_polarization(&out.state).map_err(err)?));
        worst_r = worst_r.max(separability_residual(&out.state).residual);
    }

    let p = QDotParams::reference(1.0, 1.0).map_err(err)?;
    let g = FrequencyGrid::for_params(&p, SPAN, N).map_err(err)?;
    let st = TwoPhotonState::cascade(&g, &p).map_err(err)?;
    let out = compensate(&st, &p).map_err(err)?;
    drop(st);
    if out.diagnostics.exact {
        return Err("fractional case unexpectedly on-grid".into());
    }
    let frac_f = fidelity_phi_plus(&reduce_polarization(&out.state).map_err(err)?);

    check(
        1.0 - worst_f <= 1e-9 && worst_r <= 1e-9 && 1.0 - frac_f <= 1e-3,
        format!("exact: 1−F {:.2e}, residual {worst_r:.2e}; fractional: 1−F {:.2e}", 1.0 - worst_f, 1.0 - frac_f),
    )
}

fn coherence_oracle() -> Outcome {
    let mut worst_c = 0.0f64;
    let mut worst_f = 0.0f64;
    for k in 0..=10 {
        let ratio = 0.5 * k as f64;
        let p = QDotParams::reference(splitting_for(ratio, 1.0), 1.0).map_err(err)?;
        let g = FrequencyGrid::for_params(&p, SPAN, N).map_err(err)?;
        let st = TwoPhotonState::cascade(&g, &p).map_err(err)?;
        let c = st.coherence();
        let f = fidelity_phi_plus(&reduce_polarization(&st).map_err(err)?);
        let oracle = closed_form_overlap(&p);
        let d = p.splitting_rate() / p.gamma;
        worst_c = worst_c.max((c.re - oracle.re).abs()).max((c.im - oracle.im).abs());
        worst_f = worst_f.max((f - 0.5 * (1.0 + 1.0 / (1.0 + d * d))).abs());
    }
    check(
        worst_c <= 1e-3 && worst_f <= 1e-3,
        format!("max component error {worst_c:.2e}, max fidelity error {worst_f:.2e}, want ≤ 1e-3"),
    )
}

fn picture_equivalence() -> Outcome {
    let p = QDotParams::reference(1.0, 1.0).map_err(err)?;
    let g = FrequencyGrid::for_params(&p, SPAN, N).map_err(err)?;
    let eq = cli::equivalence(&p, &g).map_err(err)?;
    check(
        1.0 - eq.fidelity_between <= 1e-6,
        format!("1 − mutual fidelity {:.2e}, want ≤ 1e-6", 1.0 - eq.fidelity_between),
    )
}

fn truncated_window() -> Outcome {
    let (s, gamma) = (1.0, 1.0);
    let windows: Vec<f64> = (0..20).map(|k| 10.0 / gamma * k as f64 / 19.0).collect();
    let values = windows
        .iter()
        .map(|&t| residual_fidelity(s, gamma, t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    let d = PhysConstants::energy_to_rate(s) / gamma;
    let at_zero = (values[0] - 0.5 * (1.0 + 1.0 / (1.0 + d * d))).abs();
    let at_five = residual_fidelity(s, gamma, 5.0 / gamma).map_err(err)?;
    check(
        monotone && at_zero <= 1e-6 && at_five > 0.99,
        format!("monotone {monotone}, |F(0) − closed form| {at_zero:.2e}, F(5/Γ) {at_five:.6}"),
    )
}

fn concurrence_check() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = rng.gen_range(0.0..5.0);
        let gamma = rng.gen_range(0.2..5.0);
        let p = QDotParams::reference(s, gamma).map_err(err)?;
        let g = FrequencyGrid::for_params(&p, 200.0, 256).map_err(err)?;
        let st = TwoPhotonState::cascade(&g, &p).map_err(err)?;
        let c = concurrence(&reduce_polarization(&st).map_err(err)?).map_err(err)?;
        worst = worst.max((c - st.coherence().norm()).abs());
    }
    check(worst <= 1e-9, format!("max |C − |overlap|| {worst:.2e} over 100 samples, want ≤ 1e-9"))
}

fn reshape() -> Outcome {
    let p = QDotParams::reference(1.0, 1.0).map_err(err)?;
    let g = FrequencyGrid::for_params(&p, 200.0, 1024).map_err(err)?;
    let a = eval_phi(Path::H, &g, &p).map_err(err)?.normalize().map_err(err)?;
    let wide = QDotParams {
        omega0: p.omega0 + 6.0 * p.gamma,
        omega_h2: p.omega_h2 + 3.0 * p.gamma,
        splitting: 0.0,
        gamma: 2.0 * p.gamma,
    };
    let b = eval_phi(Path::H, &g, &wide).map_err(err)?;
    let r = three_step(&a, &b).map_err(err)?.report;
    let all_applied = r.stages.iter().all(|s| s.applied);
    let lorentz = r.final_overlap().norm();

    let st = TwoPhotonState::cascade(&g, &p).map_err(err)?;
    let cascade = three_step(st.phi_h(), st.phi_v()).map_err(err)?.report;
    let step1 = cascade.stages[1].overlap.norm();

    let mags: Vec<String> = r.magnitudes().iter().map(|m| format!("{m:.5}")).collect();
    check(
        lorentz >= 0.995 && r.is_monotone() && all_applied && step1 >= 1.0 - 1e-3 && cascade.is_monotone(),
        format!(
            "Lorentzian pair stages [{}], all applied {all_applied}; cascade pair after shift {step1:.6}",
            mags.join(", ")
        ),
    )
}

fn invariants() -> Outcome {
    let p = QDotParams::reference(1.0, 1.0).map_err(err)?;
    let g = FrequencyGrid::for_params(&p, SPAN, N).map_err(err)?;

    let raw = eval_phi(Path::H, &g, &p).map_err(err)?;
    let raw_err = (raw.norm_sqr() - 1.0).abs();
    drop(raw);

    let st = TwoPhotonState::cascade(&g, &p).map_err(err)?;
    let mut analytic_err = (st.norm_sqr() - 1.0).abs();
    let shifted = compensate(&st, &p).map_err(err)?.state;
    analytic_err = analytic_err.max((shifted.norm_sqr() - 1.0).abs());
    drop(shifted);

    let mut parseval = 0.0f64;
    for a in [st.phi_h(), st.phi_v()] {
        let t = to_time(a);
        parseval = parseval.max((t.norm_sqr() - a.norm_sqr()).abs());
        let back = to_frequency(&t);
        parseval = parseval.max((back.norm_sqr() - t.norm_sqr()).abs());
    }

    let rho = reduce_polarization(&st).map_err(err)?;
    drop(st);
    let herm = rho.hermiticity_error();
    let trace = (rho.trace() - 1.0).norm();
    let min_eig = rho.eigenvalues().iter().copied().fold(f64::MAX, f64::min);
    let rho_ok = rho.check().is_ok() && herm <= 1e-12 && trace <= 1e-9 && min_eig >= -1e-12;

    let identical = csv_runs_identical()?;

    check(
        analytic_err <= 1e-9 && raw_err <= 2e-3 && parseval <= 1e-12 && rho_ok && identical,
        format!(
            "norm: analytic {analytic_err:.1e}, raw grid {raw_err:.1e}; Parseval {parseval:.1e}; \
             ρ hermiticity {herm:.1e}, trace {trace:.1e}, min eigenvalue {min_eig:.1e}; CSV identical {identical}"
        ),
    )
}

const CSV_CONFIG: &str = r#"
[qdot]
S = 1.0
Gamma = 1.0

[grid]
span_gammas = 200.0
n = 256
exact_splitting = true

[sweep]
parameter = "S"
start = 0.0
stop = 3.0
steps = 4

[reshape]
a = { kind = "cascade", path = "H" }
b = { kind = "cascade", path = "V" }
"#;

fn csv_runs_identical() -> Result<bool, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = dir.path().join("run.toml");
    fs::write(&config, CSV_CONFIG).map_err(err)?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        for cmd in ["spectra", "fidelity-sweep", "hardware-plan", "equivalence", "reshape"] {
            let args = Args::try_parse_from([
                "polshift",
                cmd,
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .map_err(err)?;
            cli::run(&args).map_err(err)?;
        }
        outputs.push(read_csvs(&out)?);
    }
    Ok(!outputs[0].is_empty() && outputs[0] == outputs[1])
}

fn read_csvs(dir: &FsPath) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.push((name, fs::read(&path).map_err(err)?));
        }
    }
    files.sort();
    Ok(files)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("hardware slew", slew),
        ("voltage budget", voltage),
        ("compensation completeness", completeness),
        ("uncompensated coherence", coherence_oracle),
        ("picture equivalence", picture_equivalence),
        ("truncated window", truncated_window),
        ("concurrence cross-check", concurrence_check),
        ("reshape end-to-end", reshape),
        ("invariants", invariants),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {} {name}: {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
