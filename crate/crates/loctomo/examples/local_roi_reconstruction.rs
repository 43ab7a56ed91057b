//! Reconstructs a small region of interest through the local engine and
//! compares score and cost against the cropped global solutions.

use std::time::Instant;

use loctomo::{
    apply_poisson_noise, build_conv_cache, compute_sirt_filters, disc_precorrect, downsample,
    fista_tv, local_fista_tv, local_sirt, mse, shepp_logan, simulate_data, sirt, ImageGrid,
    LocalOptions, NoiseSpec, ProjectionGeometry, Region, Result, SolverConfig,
};

const N: usize = 128;
const SCALE: f64 = 0.08;
const ITERATIONS: usize = 80;
const LAMBDA_TV: f64 = 3e-4;
const FGP: usize = 40;

fn main() -> Result<()> {
    let geom = ProjectionGeometry::equiangular(184, 128, N, 1.0)?;
    let mut hi = shepp_logan(2 * N)?;
    for v in hi.values_mut() {
        *v *= SCALE;
    }
    let truth = downsample(&hi, 2)?;
    let clean = simulate_data(&hi, 2, &geom)?;
    let p = apply_poisson_noise(&clean, &NoiseSpec::new(1e3, 11)?)?;

    // an off-center window over the right ventricle
    let region = Region::square(40, 72, 32, N)?;
    let cfg = SolverConfig::new(ITERATIONS);
    let opts = LocalOptions::default();

    let t = Instant::now();
    let bank = compute_sirt_filters(&geom, ITERATIONS, None)?;
    let (p_corr, _) = disc_precorrect(&p, &geom)?;
    let cache = build_conv_cache(&p_corr, &bank)?;
    println!("setup (bank + cache): {:.2?}", t.elapsed());

    let crop_mse = |img: &ImageGrid| mse(&truth, img, Some(&region));

    let t = Instant::now();
    let g_sirt = sirt(&p, &geom, &cfg, None)?;
    let t_global = t.elapsed();
    let t = Instant::now();
    let l_sirt = local_sirt(&p, &geom, &region, &cfg, &bank, Some(&cache), &opts)?;
    let t_local = t.elapsed();
    println!(
        "sirt    global mse {:.3e} ({t_global:.2?}), local mse {:.3e} ({t_local:.2?})",
        crop_mse(&g_sirt)?,
        crop_mse(&l_sirt)?
    );

    let t = Instant::now();
    let g_tv = fista_tv(&p, &geom, &cfg, LAMBDA_TV, FGP)?;
    let t_global = t.elapsed();
    let t = Instant::now();
    let l_tv = local_fista_tv(&p, &geom, &region, &cfg, LAMBDA_TV, FGP, &bank, Some(&cache), &opts)?;
    let t_local = t.elapsed();
    println!(
        "tv      global mse {:.3e} ({t_global:.2?}), local mse {:.3e} ({t_local:.2?})",
        crop_mse(&g_tv)?,
        crop_mse(&l_tv)?
    );

    // the cache carries every convolved sinogram, so a second region is
    // almost free
    let elsewhere = Region::square(72, 32, 32, N)?;
    let t = Instant::now();
    let _ = local_fista_tv(&p, &geom, &elsewhere, &cfg, LAMBDA_TV, FGP, &bank, Some(&cache), &opts)?;
    println!("second region, warm cache: {:.2?}", t.elapsed());

    Ok(())
}
