//! Joint spectra of the two decay paths and their marginals.
//!
//! Run with `cargo run --release --example cascade_spectra`.

use polshift::spectra::{eval_phi, FrequencyGrid, GridAxis, Path, QDotParams};

fn main() -> polshift::Result<()> {
    let params = QDotParams::reference(1.0, 1.0)?;
    let grid = FrequencyGrid::for_params(&params, 400.0, 1024)?;

    println!("S/ħ = {:.6} rad/ns, grid step {:.6} rad/ns", params.splitting_rate(), grid.step());
    for path in [Path::H, Path::V] {
        let raw = eval_phi(path, &grid, &params)?;
        let phi = raw.normalize()?;
        let m2 = phi.marginal(GridAxis::Two);
        let peak = (0..grid.n).max_by(|&i, &j| m2[i].total_cmp(&m2[j])).unwrap();
        let (_, line2) = params.line_centers(path);
        println!(
            "{path:?}: raw norm {:.6}, photon-2 peak at center {:+.4} rad/ns (line at {:+.4})",
            raw.norm_sqr(),
            grid.offset(peak),
            line2 - grid.center2
        );
    }

    let h = eval_phi(Path::H, &grid, &params)?.normalize()?;
    let v = eval_phi(Path::V, &grid, &params)?.normalize()?;
    let ov = h.overlap(&v)?;
    println!("<Φ_H|Φ_V> = {:.6} {:+.6}i  (|·| = {:.6})", ov.re, ov.im, ov.norm());
    Ok(())
}
