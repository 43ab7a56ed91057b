//! Reconstructs one noisy dataset with each global solver and prints a
//! quality table.

use std::time::Instant;

use loctomo::{
    apply_poisson_noise, downsample, fbp, fista_tv, ista_wavelet, make_analytic_filter, mse,
    shepp_logan, simulate_data, sirt, sirt_box, ssim, FilterKind, ImageGrid, NoiseSpec,
    ProjectionGeometry, Result, SinogramFilter, SolverConfig, SsimOptions,
};

const N: usize = 64;
// attenuation per pixel; the densest path keeps about e^-3 of the beam
const SCALE: f64 = 0.15;

fn report(truth: &ImageGrid, name: &str, img: &ImageGrid, t: Instant) -> Result<()> {
    let m = mse(truth, img, None)?;
    let s = ssim(truth, img, None, &SsimOptions::default())?;
    println!("{name:<14} {m:>12.3e} {s:>8.3} {:>9.2?}", t.elapsed());
    Ok(())
}

fn main() -> Result<()> {
    let geom = ProjectionGeometry::equiangular(92, 90, N, 1.0)?;
    let mut hi = shepp_logan(2 * N)?;
    for v in hi.values_mut() {
        *v *= SCALE;
    }
    let truth = downsample(&hi, 2)?;
    let clean = simulate_data(&hi, 2, &geom)?;
    let p = apply_poisson_noise(&clean, &NoiseSpec::new(1e3, 7)?)?;

    let cfg = SolverConfig::new(150);
    println!("{:<14} {:>12} {:>8} {:>9}", "method", "mse", "ssim", "time");

    let t = Instant::now();
    let filter = make_analytic_filter(FilterKind::RamLak, geom.n_detectors())?;
    let x = fbp(&p, &SinogramFilter::Analytic(&filter), &geom, None)?;
    report(&truth, "fbp ram-lak", &x, t)?;

    let t = Instant::now();
    let x = sirt(&p, &geom, &cfg, None)?;
    report(&truth, "sirt", &x, t)?;

    let t = Instant::now();
    let x = sirt_box(&p, &geom, &cfg, 0.0, SCALE)?;
    report(&truth, "sirt box", &x, t)?;

    let t = Instant::now();
    let x = ista_wavelet(&p, &geom, &cfg, 2e-4, 3)?;
    report(&truth, "ista wavelet", &x, t)?;

    let t = Instant::now();
    let x = fista_tv(&p, &geom, &cfg, 5e-4, 60)?;
    report(&truth, "fista tv", &x, t)?;

    Ok(())
}
