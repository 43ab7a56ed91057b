//! Matched forward / back projection pair for parallel-beam geometry.
//!
//! The forward projector uses a Joseph-style kernel: every ray is walked along
//! its dominant axis (rows for near-vertical rays, columns for near-horizontal
//! ones), the crossing coordinate on the other axis is linearly interpolated
//! between the two adjacent pixels, and each step is weighted by the ray
//! length per step, `1/|cos theta|` or `1/|sin theta|`.
//!
//! The back projector is the exact algebraic transpose: it gathers, per
//! pixel, the same interpolation weights the forward pass would scatter, so
//! `<W x, y> == <x, W' y>` up to floating-point summation order. Both
//! directions parallelize over independent output slices (sinogram rows /
//! image rows), which keeps results bitwise identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ImageGrid, ProjectionGeometry, Region, Sinogram};

/// Rectangular sub-image buffer aligned to a [`Region`]. Local solvers keep
/// their working state in these so no pixel outside the padded region is ever
/// allocated, read or written.
#[derive(Debug, Clone)]
pub(crate) struct RectBuf {
    region: Region,
    data: Vec<f64>,
}

impl RectBuf {
    pub(crate) fn zeros(region: Region) -> Self {
        Self { region, data: vec![0.0; region.n_pixels()] }
    }

    pub(crate) fn from_image(img: &ImageGrid, region: Region) -> Self {
        let mut data = Vec::with_capacity(region.n_pixels());
        for r in region.row0()..region.row_end() {
            for c in region.col0()..region.col_end() {
                data.push(img.get(r, c));
            }
        }
        Self { region, data }
    }

    pub(crate) fn from_raw(region: Region, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), region.n_pixels());
        Self { region, data }
    }

    pub(crate) fn region(&self) -> Region {
        self.region
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Embeds the buffer into a full-size grid, zero outside the region.
    pub(crate) fn embed(&self) -> ImageGrid {
        let n = self.region.grid_size();
        let mut out = vec![0.0; n * n];
        for (i, row) in (self.region.row0()..self.region.row_end()).enumerate() {
            let src = &self.data[i * self.region.cols()..(i + 1) * self.region.cols()];
            let dst_base = row * n + self.region.col0();
            out[dst_base..dst_base + self.region.cols()].copy_from_slice(src);
        }
        ImageGrid::from_raw(n, out)
    }

    /// Copies the overlap of `self` with `target` into a grid-shaped output.
    pub(crate) fn write_into(&self, out: &mut ImageGrid, target: &Region) {
        for r in target.row0()..target.row_end() {
            for c in target.col0()..target.col_end() {
                let i = (r - self.region.row0()) * self.region.cols() + (c - self.region.col0());
                out.set(r, c, self.data[i]);
            }
        }
    }
}

// Per-angle trigonometry and stepping mode, hoisted out of the ray loops.
struct AngleCtx {
    sin_t: f64,
    cos_t: f64,
    // true: walk rows and interpolate columns (|cos| >= |sin|)
    row_step: bool,
    inv: f64,
}

impl AngleCtx {
    fn new(theta: f64) -> Self {
        let (sin_t, cos_t) = theta.sin_cos();
        let row_step = cos_t.abs() >= sin_t.abs();
        let inv = if row_step { 1.0 / cos_t.abs() } else { 1.0 / sin_t.abs() };
        Self { sin_t, cos_t, row_step, inv }
    }
}

#[inline]
fn grid_half(n: usize) -> f64 {
    (n as f64 - 1.0) / 2.0
}

#[inline]
fn det_center(nd: usize) -> f64 {
    (nd as f64 - 1.0) / 2.0
}

// Detector index range (inclusive) of rays that can touch `region` expanded
// by one pixel on each side, for one angle. Conservative by one extra bin.
fn detector_range(
    geom: &ProjectionGeometry,
    region: &Region,
    ctx: &AngleCtx,
) -> Option<(usize, usize)> {
    let half = grid_half(region.grid_size());
    let x_lo = region.col0() as f64 - half - 1.0;
    let x_hi = (region.col_end() - 1) as f64 - half + 1.0;
    let y_hi = half - region.row0() as f64 + 1.0;
    let y_lo = half - (region.row_end() - 1) as f64 - 1.0;
    let (cx_lo, cx_hi) = {
        let a = x_lo * ctx.cos_t;
        let b = x_hi * ctx.cos_t;
        if a <= b { (a, b) } else { (b, a) }
    };
    // sin >= 0 on [0, pi)
    let sy_lo = y_lo * ctx.sin_t;
    let sy_hi = y_hi * ctx.sin_t;
    let s_min = cx_lo + sy_lo.min(sy_hi);
    let s_max = cx_hi + sy_lo.max(sy_hi);
    let sp = geom.detector_spacing();
    let dc = det_center(geom.n_detectors());
    let lo = (s_min / sp + dc).floor() as isize - 1;
    let hi = (s_max / sp + dc).ceil() as isize + 1;
    let lo = lo.max(0);
    let hi = hi.min(geom.n_detectors() as isize - 1);
    if lo > hi {
        None
    } else {
        Some((lo as usize, hi as usize))
    }
}

// Forward-projects `get(r, c)` over `region`. Bins whose rays cannot touch
// the region are left at zero.
fn fwd_generic<F>(
    geom: &ProjectionGeometry,
    region: &Region,
    get: F,
) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let n = region.grid_size();
    let nd = geom.n_detectors();
    let sp = geom.detector_spacing();
    let half = grid_half(n);
    let dc = det_center(nd);
    let mut out = vec![0.0; geom.n_rays()];

    out.par_chunks_mut(nd).enumerate().for_each(|(a, row)| {
        let ctx = AngleCtx::new(geom.angles()[a]);
        let Some((d_lo, d_hi)) = detector_range(geom, region, &ctx) else {
            return;
        };
        if ctx.row_step {
            for d in d_lo..=d_hi {
                let s = (d as f64 - dc) * sp;
                let mut acc = 0.0;
                for r in region.row0()..region.row_end() {
                    let y = half - r as f64;
                    let xf = (s - y * ctx.sin_t) / ctx.cos_t + half;
                    let c0f = xf.floor();
                    let frac = xf - c0f;
                    let c0 = c0f as isize;
                    if c0 >= region.col0() as isize && (c0 as usize) < region.col_end() {
                        acc += get(r, c0 as usize) * (1.0 - frac);
                    }
                    let c1 = c0 + 1;
                    if c1 >= region.col0() as isize && (c1 as usize) < region.col_end() {
                        acc += get(r, c1 as usize) * frac;
                    }
                }
                row[d] = acc * ctx.inv;
            }
        } else {
            for d in d_lo..=d_hi {
                let s = (d as f64 - dc) * sp;
                let mut acc = 0.0;
                for c in region.col0()..region.col_end() {
                    let x = c as f64 - half;
                    let rf = half - (s - x * ctx.cos_t) / ctx.sin_t;
                    let r0f = rf.floor();
                    let frac = rf - r0f;
                    let r0 = r0f as isize;
                    if r0 >= region.row0() as isize && (r0 as usize) < region.row_end() {
                        acc += get(r0 as usize, c) * (1.0 - frac);
                    }
                    let r1 = r0 + 1;
                    if r1 >= region.row0() as isize && (r1 as usize) < region.row_end() {
                        acc += get(r1 as usize, c) * frac;
                    }
                }
                row[d] = acc * ctx.inv;
            }
        }
    });
    out
}

// Gathers, for every pixel of `region`, the transposed forward weights. The
// interpolation coordinate is recomputed from the detector position with the
// same expression the forward pass uses, so weights match bitwise.
fn bwd_rect(values: &[f64], geom: &ProjectionGeometry, region: &Region) -> Vec<f64> {
    let n = region.grid_size();
    let nd = geom.n_detectors();
    let sp = geom.detector_spacing();
    let half = grid_half(n);
    let dc = det_center(nd);
    let ctxs: Vec<AngleCtx> = geom.angles().iter().map(|&t| AngleCtx::new(t)).collect();
    let mut out = vec![0.0; region.n_pixels()];

    out.par_chunks_mut(region.cols()).enumerate().for_each(|(ri, orow)| {
        let r = region.row0() + ri;
        let y = half - r as f64;
        for (ci, o) in orow.iter_mut().enumerate() {
            let c = region.col0() + ci;
            let x = c as f64 - half;
            let mut acc = 0.0;
            for (a, ctx) in ctxs.iter().enumerate() {
                let s_center = x * ctx.cos_t + y * ctx.sin_t;
                let w_half = if ctx.row_step { ctx.cos_t.abs() } else { ctx.sin_t.abs() };
                let lo = (((s_center - w_half) / sp + dc).floor() as isize - 1).max(0);
                let hi = (((s_center + w_half) / sp + dc).ceil() as isize + 1)
                    .min(nd as isize - 1);
                if lo > hi {
                    continue;
                }
                let row = &values[a * nd..(a + 1) * nd];
                if ctx.row_step {
                    for d in lo as usize..=hi as usize {
                        let s = (d as f64 - dc) * sp;
                        let xf = (s - y * ctx.sin_t) / ctx.cos_t + half;
                        let c0f = xf.floor();
                        let frac = xf - c0f;
                        let c0 = c0f as isize;
                        if c0 == c as isize {
                            acc += row[d] * (1.0 - frac) * ctx.inv;
                        } else if c0 + 1 == c as isize {
                            acc += row[d] * frac * ctx.inv;
                        }
                    }
                } else {
                    for d in lo as usize..=hi as usize {
                        let s = (d as f64 - dc) * sp;
                        let rf = half - (s - x * ctx.cos_t) / ctx.sin_t;
                        let r0f = rf.floor();
                        let frac = rf - r0f;
                        let r0 = r0f as isize;
                        if r0 == r as isize {
                            acc += row[d] * (1.0 - frac) * ctx.inv;
                        } else if r0 + 1 == r as isize {
                            acc += row[d] * frac * ctx.inv;
                        }
                    }
                }
            }
            *o = acc;
        }
    });
    out
}

fn check_image(img: &ImageGrid, geom: &ProjectionGeometry) -> Result<()> {
    if img.size() != geom.grid_size() {
        return Err(Error::DimensionMismatch(format!(
            "image size {} does not match geometry grid size {}",
            img.size(),
            geom.grid_size()
        )));
    }
    Ok(())
}

fn check_sinogram(sino: &Sinogram, geom: &ProjectionGeometry) -> Result<()> {
    if sino.geometry() != geom {
        return Err(Error::GeometryMismatch(
            "sinogram was measured under a different geometry".into(),
        ));
    }
    Ok(())
}

fn check_region(region: &Region, geom: &ProjectionGeometry) -> Result<()> {
    if region.grid_size() != geom.grid_size() {
        return Err(Error::DimensionMismatch(format!(
            "region grid size {} does not match geometry grid size {}",
            region.grid_size(),
            geom.grid_size()
        )));
    }
    Ok(())
}

/// Line-integral forward projection `W x` of a full image.
pub fn forward_project(img: &ImageGrid, geom: &ProjectionGeometry) -> Result<Sinogram> {
    check_image(img, geom)?;
    let region = Region::full(geom.grid_size());
    let vals = fwd_generic(geom, &region, |r, c| img.get(r, c));
    Ok(Sinogram::from_raw(geom.clone(), vals))
}

/// Exact transpose `W' p` of [`forward_project`].
pub fn back_project(sino: &Sinogram, geom: &ProjectionGeometry) -> Result<ImageGrid> {
    check_sinogram(sino, geom)?;
    let region = Region::full(geom.grid_size());
    let vals = bwd_rect(sino.values(), geom, &region);
    Ok(ImageGrid::from_raw(geom.grid_size(), vals))
}

/// `W_L x = W (M_L x)`: projects only the pixels inside `region`, visiting
/// only the detector bins whose rays cross the region. Agrees with masking
/// then projecting, bit for bit.
pub fn forward_project_local(
    img: &ImageGrid,
    geom: &ProjectionGeometry,
    region: &Region,
) -> Result<Sinogram> {
    check_image(img, geom)?;
    check_region(region, geom)?;
    let vals = fwd_generic(geom, region, |r, c| img.get(r, c));
    Ok(Sinogram::from_raw(geom.clone(), vals))
}

/// `W_L' p = M_L (W' p)`: back-projects into `region` only; pixels outside
/// are zero.
pub fn back_project_local(
    sino: &Sinogram,
    geom: &ProjectionGeometry,
    region: &Region,
) -> Result<ImageGrid> {
    check_sinogram(sino, geom)?;
    check_region(region, geom)?;
    let vals = bwd_rect(sino.values(), geom, region);
    Ok(RectBuf::from_raw(*region, vals).embed())
}

// Rect-buffer counterparts used by the local reconstruction engine.
pub(crate) fn forward_rect(buf: &RectBuf, geom: &ProjectionGeometry) -> Sinogram {
    let region = buf.region();
    let vals = fwd_generic(geom, &region, |r, c| {
        buf.data()[(r - region.row0()) * region.cols() + (c - region.col0())]
    });
    Sinogram::from_raw(geom.clone(), vals)
}

pub(crate) fn back_rect(values: &[f64], geom: &ProjectionGeometry, region: Region) -> RectBuf {
    RectBuf::from_raw(region, bwd_rect(values, geom, &region))
}

/// Returns a copy of `img` with pixels outside (`keep_inside`) or inside
/// (`!keep_inside`) the region set to zero. The two masks of any region
/// partition the image: their sum restores it exactly.
pub fn apply_region_mask(img: &ImageGrid, region: &Region, keep_inside: bool) -> Result<ImageGrid> {
    if img.size() != region.grid_size() {
        return Err(Error::DimensionMismatch(format!(
            "region grid size {} does not match image size {}",
            region.grid_size(),
            img.size()
        )));
    }
    let n = img.size();
    let mut vals = if keep_inside { vec![0.0; n * n] } else { img.values().to_vec() };
    for r in region.row0()..region.row_end() {
        let base = r * n;
        for c in region.col0()..region.col_end() {
            vals[base + c] = if keep_inside { img.get(r, c) } else { 0.0 };
        }
    }
    Ok(ImageGrid::from_raw(n, vals))
}

/// Grows a region by `ceil(factor * extent)` pixels per side (per axis), then
/// clips the result to the grid. `factor = 0` returns the region unchanged.
pub fn pad_region(region: &Region, factor: f64) -> Result<Region> {
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pad factor must be finite and non-negative, got {factor}"
        )));
    }
    let pad_r = (factor * region.rows() as f64).ceil() as usize;
    let pad_c = (factor * region.cols() as f64).ceil() as usize;
    let row0 = region.row0().saturating_sub(pad_r);
    let col0 = region.col0().saturating_sub(pad_c);
    let row_end = (region.row_end() + pad_r).min(region.grid_size());
    let col_end = (region.col_end() + pad_c).min(region.grid_size());
    Region::new(row0, col0, row_end - row0, col_end - col0, region.grid_size())
}

/// Power-iteration estimate of `sigma_max(W)^2`, the largest eigenvalue of
/// `W'W`. Deterministic: the start vector is fixed. Useful to confirm a
/// relaxation factor satisfies `alpha <= 2 / sigma_max^2`.
pub fn projection_norm_sq(geom: &ProjectionGeometry, iterations: usize) -> Result<f64> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be >= 1".into()));
    }
    let n = geom.grid_size();
    let mut v: Vec<f64> = (0..n * n).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let img = ImageGrid::from_raw(n, v);
        let w = forward_project(&img, geom)?;
        lambda = w.values().iter().map(|x| x * x).sum::<f64>();
        v = back_project(&w, geom)?.into_values();
    }
    Ok(lambda)
}

#[cfg(test)]
pub(crate) mod test_oracles {
    //! Dense-matrix and ray-marching oracles shared by unit and integration
    //! tests. They deliberately avoid the production code paths: the dense
    //! transpose is materialized column by column, and the marching oracle
    //! integrates rays by brute-force sub-stepping.

    use super::*;

    /// Materializes W as a dense (n_rays x n_pixels) matrix by projecting
    /// every basis pixel.
    pub fn dense_matrix(geom: &ProjectionGeometry) -> Vec<Vec<f64>> {
        let n = geom.grid_size();
        let mut cols = Vec::with_capacity(n * n);
        for i in 0..n * n {
            let mut vals = vec![0.0; n * n];
            vals[i] = 1.0;
            let img = ImageGrid::from_raw(n, vals);
            cols.push(forward_project(&img, geom).unwrap().into_values());
        }
        // transpose to row-major (rays x pixels)
        let rays = geom.n_rays();
        let mut m = vec![vec![0.0; n * n]; rays];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[i][j] = v;
            }
        }
        m
    }

    pub fn dense_apply(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn dense_apply_transpose(m: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let cols = m[0].len();
        let mut out = vec![0.0; cols];
        for (row, &yi) in m.iter().zip(y) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }

    /// Brute-force ray integration of the bilinear interpolant of `img`,
    /// sub-stepping each ray at `step` pixels. Discretizes differently from
    /// the Joseph kernel, so comparisons carry a few percent of tolerance.
    pub fn marching_project(img: &ImageGrid, geom: &ProjectionGeometry, step: f64) -> Vec<f64> {
        let n = img.size();
        let half = grid_half(n);
        let extent = n as f64; // rays clipped to a circle covering the grid
        let mut out = vec![0.0; geom.n_rays()];
        for (a, &theta) in geom.angles().iter().enumerate() {
            let (sin_t, cos_t) = theta.sin_cos();
            for d in 0..geom.n_detectors() {
                let s = geom.detector_position(d);
                let mut acc = 0.0;
                let mut t = -extent;
                while t < extent {
                    // point = s * (cos, sin) + t * (-sin, cos)
                    let x = s * cos_t - t * sin_t + half;
                    let y_img = half - (s * sin_t + t * cos_t);
                    // bilinear sample with zero outside
                    let x0 = x.floor();
                    let y0 = y_img.floor();
                    let fx = x - x0;
                    let fy = y_img - y0;
                    let mut v = 0.0;
                    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
                        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
                            let xi = x0 + dx;
                            let yi = y0 + dy;
                            if xi >= 0.0 && xi < n as f64 && yi >= 0.0 && yi < n as f64 {
                                v += wy * wx * img.get(yi as usize, xi as usize);
                            }
                        }
                    }
                    acc += v * step;
                    t += step;
                }
                out[a * geom.n_detectors() + d] = acc;
            }
        }
        out
    }
}
