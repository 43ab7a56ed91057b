//! Tunes the TV regularization weight against ground truth with the
//! derivative-free search, then scores the winner.

use loctomo::{
    apply_poisson_noise, downsample, fista_tv, mse, optimize_param, shepp_logan, simulate_data,
    ssim, NoiseSpec, ProjectionGeometry, Result, SolverConfig, SsimOptions,
};

const N: usize = 64;
const SCALE: f64 = 0.15;
const BUDGET: usize = 12;

fn main() -> Result<()> {
    let geom = ProjectionGeometry::equiangular(92, 90, N, 1.0)?;
    let mut hi = shepp_logan(2 * N)?;
    for v in hi.values_mut() {
        *v *= SCALE;
    }
    let truth = downsample(&hi, 2)?;
    let clean = simulate_data(&hi, 2, &geom)?;
    let p = apply_poisson_noise(&clean, &NoiseSpec::new(1e3, 13)?)?;

    let cfg = SolverConfig::new(100);
    println!("{:>12} {:>12}", "lambda", "mse");
    let (best_lambda, best_mse) = optimize_param(
        |lambda| {
            let x = fista_tv(&p, &geom, &cfg, lambda, 40).unwrap();
            let m = mse(&truth, &x, None).unwrap();
            println!("{lambda:>12.4e} {m:>12.4e}");
            m
        },
        (1e-6, 1e-1),
        BUDGET,
    )?;

    let x = fista_tv(&p, &geom, &cfg, best_lambda, 40)?;
    let s = ssim(&truth, &x, None, &SsimOptions::default())?;
    println!("best after {BUDGET} evaluations: lambda {best_lambda:.4e}, mse {best_mse:.4e}, ssim {s:.3}");
    Ok(())
}
