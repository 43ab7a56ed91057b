//! Global iterative reconstruction: SIRT and its box-constrained, l1-wavelet,
//! and TV-regularized variants. These are the reference methods the local
//! engine approximates.

use crate::error::{Error, Result};
use crate::geometry::{ImageGrid, ProjectionGeometry, Sinogram};
use crate::projector::{back_project, forward_project};
use crate::wavelet::{haar_forward, haar_inverse, soft_threshold_slice};

/// Prior term selection for regularized solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    None,
    Box { low: f64, high: f64 },
    WaveletL1 { lambda: f64, levels: usize },
    Tv { lambda: f64, fgp_iterations: usize },
}

impl PriorSpec {
    /// Default inner-iteration count for the TV proximal solver.
    pub const DEFAULT_FGP_ITERATIONS: usize = 100;

    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::None => Ok(()),
            PriorSpec::Box { low, high } => {
                if low > high {
                    Err(Error::InvalidParameter(format!(
                        "box bounds inverted: {low} > {high}"
                    )))
                } else {
                    Ok(())
                }
            }
            PriorSpec::WaveletL1 { lambda, levels } => {
                if !(lambda >= 0.0) {
                    Err(Error::InvalidParameter("lambda must be nonnegative".into()))
                } else if levels == 0 {
                    Err(Error::InvalidParameter("levels must be at least 1".into()))
                } else {
                    Ok(())
                }
            }
            PriorSpec::Tv { lambda, fgp_iterations } => {
                if !(lambda >= 0.0) {
                    Err(Error::InvalidParameter("lambda must be nonnegative".into()))
                } else if fgp_iterations == 0 {
                    Err(Error::InvalidParameter("fgp_iterations must be at least 1".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Iteration count and step size shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub iterations: usize,
    /// Step size; `None` resolves to `1/(N_theta * N_d)`.
    pub alpha: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { iterations: 200, alpha: None }
    }
}

impl SolverConfig {
    pub fn new(iterations: usize) -> Self {
        SolverConfig { iterations, ..Default::default() }
    }

    pub fn resolve_alpha(&self, geom: &ProjectionGeometry) -> Result<f64> {
        let alpha = self.alpha.unwrap_or_else(|| geom.default_alpha());
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size {alpha} not positive")));
        }
        Ok(alpha)
    }

    fn check(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration count must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_inputs(p: &Sinogram, geom: &ProjectionGeometry, cfg: &SolverConfig) -> Result<f64> {
    if p.geometry() != geom {
        return Err(Error::DimensionMismatch("sinogram geometry differs from solver geometry".into()));
    }
    cfg.check()?;
    cfg.resolve_alpha(geom)
}

// x += alpha * W'(p - W x)
fn sirt_sweep(x: &mut ImageGrid, p: &Sinogram, geom: &ProjectionGeometry, alpha: f64) -> Result<()> {
    let wx = forward_project(x, geom)?;
    let resid = Sinogram::from_raw(
        geom.clone(),
        p.values().iter().zip(wx.values()).map(|(a, b)| a - b).collect(),
    );
    let upd = back_project(&resid, geom)?;
    for (xv, uv) in x.values_mut().iter_mut().zip(upd.values()) {
        *xv += alpha * uv;
    }
    Ok(())
}

/// Plain SIRT: `n` iterations of `x += alpha * W'(p - W x)` from `x0`
/// (zero when omitted).
pub fn sirt(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    cfg: &SolverConfig,
    x0: Option<&ImageGrid>,
) -> Result<ImageGrid> {
    let alpha = check_inputs(p, geom, cfg)?;
    let mut x = match x0 {
        Some(img) if img.size() != geom.grid_size() => {
            return Err(Error::DimensionMismatch("start image size differs from grid".into()));
        }
        Some(img) => img.clone(),
        None => ImageGrid::zeros(geom.grid_size()),
    };
    for _ in 0..cfg.iterations {
        sirt_sweep(&mut x, p, geom, alpha)?;
    }
    Ok(x)
}

/// SIRT with the iterate clamped to `[low, high]` after every sweep.
pub fn sirt_box(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    cfg: &SolverConfig,
    low: f64,
    high: f64,
) -> Result<ImageGrid> {
    PriorSpec::Box { low, high }.validate()?;
    let alpha = check_inputs(p, geom, cfg)?;
    let mut x = ImageGrid::zeros(geom.grid_size());
    for _ in 0..cfg.iterations {
        sirt_sweep(&mut x, p, geom, alpha)?;
        for v in x.values_mut() {
            *v = v.clamp(low, high);
        }
    }
    Ok(x)
}

/// ISTA with an orthonormal Haar dictionary: every iteration applies one SIRT
/// sweep, then shrinks all wavelet coefficients by `lambda`.
pub fn ista_wavelet(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    cfg: &SolverConfig,
    lambda: f64,
    levels: usize,
) -> Result<ImageGrid> {
    PriorSpec::WaveletL1 { lambda, levels }.validate()?;
    let alpha = check_inputs(p, geom, cfg)?;
    let mut x = ImageGrid::zeros(geom.grid_size());
    for _ in 0..cfg.iterations {
        sirt_sweep(&mut x, p, geom, alpha)?;
        let mut w = haar_forward(&x, levels)?;
        soft_threshold_slice(&mut w, lambda);
        x = haar_inverse(&w, levels)?;
    }
    Ok(x)
}

// Forward differences with Neumann boundary: last row/column difference is 0.
fn grad_x(z: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        for c in 0..cols - 1 {
            out[r * cols + c] = z[r * cols + c + 1] - z[r * cols + c];
        }
        out[r * cols + cols - 1] = 0.0;
    }
}

fn grad_y(z: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows - 1 {
        for c in 0..cols {
            out[r * cols + c] = z[(r + 1) * cols + c] - z[r * cols + c];
        }
    }
    out[(rows - 1) * cols..].fill(0.0);
}

// Adjoint of (grad_x, grad_y): out = Dx' px + Dy' py.
fn grad_adjoint(px: &[f64], py: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 0.0;
            if c < cols - 1 {
                v -= px[r * cols + c];
            }
            if c > 0 {
                v += px[r * cols + c - 1];
            }
            if r < rows - 1 {
                v -= py[r * cols + c];
            }
            if r > 0 {
                v += py[(r - 1) * cols + c];
            }
            out[r * cols + c] = v;
        }
    }
}

/// TV proximal step on a row-major `rows x cols` array. Caller validates
/// `lambda` and `n_fgp`.
pub(crate) fn fgp_tv_rect(
    b: &[f64],
    rows: usize,
    cols: usize,
    lambda: f64,
    n_fgp: usize,
) -> Vec<f64> {
    if lambda == 0.0 {
        return b.to_vec();
    }
    let m = rows * cols;
    debug_assert_eq!(b.len(), m);
    let (mut px, mut py) = (vec![0.0; m], vec![0.0; m]);
    let (mut rx, mut ry) = (vec![0.0; m], vec![0.0; m]);
    let (mut gx, mut gy) = (vec![0.0; m], vec![0.0; m]);
    let mut z = vec![0.0; m];
    let mut t = 1.0f64;
    // ||grad||^2 <= 8, so 1/(8 lambda) is a safe dual step
    let step = 1.0 / (8.0 * lambda);
    for _ in 0..n_fgp {
        grad_adjoint(&rx, &ry, rows, cols, &mut z);
        for i in 0..m {
            z[i] = b[i] - lambda * z[i];
        }
        grad_x(&z, rows, cols, &mut gx);
        grad_y(&z, rows, cols, &mut gy);
        // Projected step off the momentum point; restart when it opposes the
        // previous step (heavily saturated duals stall the plain t-sequence).
        let mut dot = 0.0;
        for i in 0..m {
            let px_new = (rx[i] + step * gx[i]).clamp(-1.0, 1.0);
            let py_new = (ry[i] + step * gy[i]).clamp(-1.0, 1.0);
            dot += (rx[i] - px_new) * (px_new - px[i]);
            dot += (ry[i] - py_new) * (py_new - py[i]);
            rx[i] = px_new;
            ry[i] = py_new;
        }
        let t_next = if dot > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let mom = if dot > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for i in 0..m {
            let px_new = rx[i];
            let py_new = ry[i];
            rx[i] = px_new + mom * (px_new - px[i]);
            ry[i] = py_new + mom * (py_new - py[i]);
            px[i] = px_new;
            py[i] = py_new;
        }
        t = t_next;
    }
    grad_adjoint(&px, &py, rows, cols, &mut z);
    b.iter().zip(&z).map(|(bi, zi)| bi - lambda * zi).collect()
}

/// Anisotropic TV proximal operator: approximately solves
/// `argmin_z 0.5 ||z - image||^2 + lambda * ||grad z||_1` with `n_fgp`
/// fast-gradient-projection iterations on the dual.
pub fn fgp_tv_denoise(image: &ImageGrid, lambda: f64, n_fgp: usize) -> Result<ImageGrid> {
    PriorSpec::Tv { lambda, fgp_iterations: n_fgp }.validate()?;
    let n = image.size();
    let vals = fgp_tv_rect(image.values(), n, n, lambda, n_fgp);
    Ok(ImageGrid::from_raw(n, vals))
}

pub(crate) fn fista_tv_impl(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    cfg: &SolverConfig,
    lambda: f64,
    n_fgp: usize,
    momentum: bool,
) -> Result<ImageGrid> {
    PriorSpec::Tv { lambda, fgp_iterations: n_fgp }.validate()?;
    let alpha = check_inputs(p, geom, cfg)?;
    let n = geom.grid_size();
    let mut x_prev = ImageGrid::zeros(n);
    let mut y = ImageGrid::zeros(n);
    let mut t = 1.0f64;
    for _ in 0..cfg.iterations {
        sirt_sweep(&mut y, p, geom, alpha)?;
        let x = fgp_tv_denoise(&y, lambda, n_fgp)?;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = if momentum { (t - 1.0) / t_next } else { 0.0 };
        let vals = x
            .values()
            .iter()
            .zip(x_prev.values())
            .map(|(xc, xp)| xc + mom * (xc - xp))
            .collect();
        y = ImageGrid::from_raw(n, vals);
        x_prev = x;
        t = t_next;
    }
    Ok(x_prev)
}

/// FISTA with a TV prior: gradient sweep on the momentum point, proximal step
/// via [`fgp_tv_denoise`], standard `t_k` momentum sequence.
pub fn fista_tv(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    cfg: &SolverConfig,
    lambda: f64,
    n_fgp: usize,
) -> Result<ImageGrid> {
    fista_tv_impl(p, geom, cfg, lambda, n_fgp, true)
}
