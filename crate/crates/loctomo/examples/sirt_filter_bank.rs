//! Builds a SIRT-matching filter bank, round-trips it through the LTFB
//! format, and measures how closely filtered backprojection with entry k
//! tracks k SIRT iterations.

use std::time::Instant;

use loctomo::{
    compute_sirt_filters, fbp, forward_project, read_filter_bank, shepp_logan, sirt,
    write_filter_bank, ProjectionGeometry, Result, SinogramFilter, SolverConfig,
};

const N: usize = 64;
const BANK_DEPTH: usize = 50;

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn main() -> Result<()> {
    let geom = ProjectionGeometry::equiangular(92, 90, N, 1.0)?;

    let t = Instant::now();
    let bank = compute_sirt_filters(&geom, BANK_DEPTH, None)?;
    println!("bank: {} filters, alpha {:.3e}, built in {:.2?}", BANK_DEPTH, bank.alpha(), t.elapsed());

    let path = std::env::temp_dir().join("sirt_filters.ltfb");
    write_filter_bank(&path, &bank)?;
    let reloaded = read_filter_bank(&path, N, geom.detector_spacing())?;
    let bytes = std::fs::metadata(&path)?.len();
    println!("ltfb round trip: {bytes} bytes, alpha preserved {}", reloaded.alpha() == bank.alpha());

    // one filtered backprojection approximates k iterations of sirt; the
    // gap grows with k because the kernels are held angle-stationary
    let phantom = shepp_logan(N)?;
    let p = forward_project(&phantom, &geom)?;
    println!("{:>4} {:>12} {:>10}", "k", "rel l2 gap", "fbp time");
    for k in [5, 25, BANK_DEPTH] {
        let t = Instant::now();
        let fast = fbp(&p, &SinogramFilter::Bank(&reloaded, k), &geom, None)?;
        let fbp_time = t.elapsed();
        let slow = sirt(&p, &geom, &SolverConfig { iterations: k, alpha: None }, None)?;
        let gap = rel_l2(fast.values(), slow.values());
        println!("{k:>4} {:>11.2}% {fbp_time:>10.2?}", 100.0 * gap);
    }

    std::fs::remove_file(&path)?;
    Ok(())
}
