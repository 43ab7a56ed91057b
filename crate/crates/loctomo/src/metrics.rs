//! Region-restricted reconstruction quality metrics and 1D parameter search.

use crate::error::{Error, Result};
use crate::geometry::{ImageGrid, Region};

fn check_sizes(a: &ImageGrid, b: &ImageGrid, region: Option<&Region>) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::DimensionMismatch(format!(
            "image sizes differ: {} vs {}",
            a.size(),
            b.size()
        )));
    }
    if let Some(reg) = region {
        if reg.grid_size() != a.size() {
            return Err(Error::DimensionMismatch(format!(
                "region is defined on a {} grid, images are {}",
                reg.grid_size(),
                a.size()
            )));
        }
    }
    Ok(())
}

/// Mean squared difference over the region (whole grid if absent).
pub fn mse(a: &ImageGrid, b: &ImageGrid, region: Option<&Region>) -> Result<f64> {
    check_sizes(a, b, region)?;
    match region {
        None => {
            let s: f64 = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            Ok(s / a.values().len() as f64)
        }
        Some(reg) => {
            let mut s = 0.0;
            for r in reg.row0()..reg.row_end() {
                for c in reg.col0()..reg.col_end() {
                    let d = a.get(r, c) - b.get(r, c);
                    s += d * d;
                }
            }
            Ok(s / reg.n_pixels() as f64)
        }
    }
}

/// SSIM parameters. `dynamic_range = None` uses `max - min` of the first
/// image argument (treat it as the ground truth); a constant first image
/// falls back to a range of one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimOptions {
    pub dynamic_range: Option<f64>,
    pub window_size: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimOptions {
    fn default() -> Self {
        Self { dynamic_range: None, window_size: 11, window_sigma: 1.5, k1: 0.01, k2: 0.03 }
    }
}

/// Mean local SSIM over the region with a Gaussian window. Windows are
/// clipped at the grid border and renormalized, so a pixel's local
/// statistics always use unit total weight.
pub fn ssim(a: &ImageGrid, b: &ImageGrid, region: Option<&Region>, opts: &SsimOptions) -> Result<f64> {
    check_sizes(a, b, region)?;
    if opts.window_size == 0 || opts.window_size % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "window size must be odd and positive, got {}",
            opts.window_size
        )));
    }
    if !(opts.window_sigma > 0.0) {
        return Err(Error::InvalidParameter("window sigma must be positive".into()));
    }
    let l = match opts.dynamic_range {
        Some(l) if l > 0.0 => l,
        Some(l) => {
            return Err(Error::InvalidParameter(format!("dynamic range must be positive, got {l}")))
        }
        None => {
            let lo = a.values().iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = a.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        }
    };
    let c1 = (opts.k1 * l) * (opts.k1 * l);
    let c2 = (opts.k2 * l) * (opts.k2 * l);

    let half = (opts.window_size / 2) as isize;
    let weights: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * opts.window_sigma * opts.window_sigma)).exp())
        .collect();

    let n = a.size();
    let reg = match region {
        Some(r) => *r,
        None => Region::full(n),
    };
    let mut total = 0.0;
    for r in reg.row0()..reg.row_end() {
        for c in reg.col0()..reg.col_end() {
            let (mut w_sum, mut ma, mut mb, mut maa, mut mbb, mut mab) =
                (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for (wi, i) in (-half..=half).enumerate() {
                let rr = r as isize + i;
                if rr < 0 || rr >= n as isize {
                    continue;
                }
                for (wj, j) in (-half..=half).enumerate() {
                    let cc = c as isize + j;
                    if cc < 0 || cc >= n as isize {
                        continue;
                    }
                    let w = weights[wi] * weights[wj];
                    let (x, y) = (a.get(rr as usize, cc as usize), b.get(rr as usize, cc as usize));
                    w_sum += w;
                    ma += w * x;
                    mb += w * y;
                    maa += w * x * x;
                    mbb += w * y * y;
                    mab += w * x * y;
                }
            }
            ma /= w_sum;
            mb /= w_sum;
            let va = maa / w_sum - ma * ma;
            let vb = mbb / w_sum - mb * mb;
            let cov = mab / w_sum - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / reg.n_pixels() as f64)
}

/// Nelder-Mead over `log10(param)` within `bounds`, spending exactly
/// `budget` objective evaluations; returns the best evaluated point.
pub fn optimize_param(
    mut objective: impl FnMut(f64) -> f64,
    bounds: (f64, f64),
    budget: usize,
) -> Result<(f64, f64)> {
    let (low, high) = bounds;
    if !(low.is_finite() && high.is_finite() && low > 0.0 && low < high) {
        return Err(Error::InvalidParameter(format!(
            "bounds must satisfy 0 < low < high, got ({low}, {high})"
        )));
    }
    if budget < 3 {
        return Err(Error::InvalidParameter(format!("budget must be >= 3, got {budget}")));
    }
    let (lo, hi) = (low.log10(), high.log10());
    let clamp = |t: f64| t.clamp(lo, hi);

    let mut evals = 0usize;
    let mut best = (f64::NAN, f64::INFINITY);
    let mut eval = |t: f64, evals: &mut usize, best: &mut (f64, f64)| {
        let v = objective(10f64.powf(t));
        *evals += 1;
        if v < best.1 {
            *best = (t, v);
        }
        v
    };

    let mid = 0.5 * (lo + hi);
    let second = clamp(if mid + 0.5 <= hi { mid + 0.5 } else { mid - 0.5 });
    let mut s = [(mid, eval(mid, &mut evals, &mut best)), (second, f64::NAN)];
    if evals < budget {
        s[1].1 = eval(s[1].0, &mut evals, &mut best);
    } else {
        return Ok((10f64.powf(best.0), best.1));
    }

    while evals < budget {
        if s[1].1 < s[0].1 {
            s.swap(0, 1);
        }
        let (b, w) = (s[0], s[1]);
        let xr = clamp(b.0 + (b.0 - w.0));
        let fr = eval(xr, &mut evals, &mut best);
        if fr < b.1 {
            if evals < budget {
                let xe = clamp(b.0 + 2.0 * (b.0 - w.0));
                let fe = eval(xe, &mut evals, &mut best);
                s[1] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else {
                s[1] = (xr, fr);
            }
        } else if fr < w.1 {
            s[1] = (xr, fr);
        } else if evals < budget {
            // contraction and two-point shrink coincide: both move the worst
            // point to the evaluated midpoint
            let xc = 0.5 * (b.0 + w.0);
            let fc = eval(xc, &mut evals, &mut best);
            s[1] = (xc, fc);
        }
        if (s[0].0 - s[1].0).abs() < 1e-14 {
            break;
        }
    }
    Ok((10f64.powf(best.0), best.1))
}
