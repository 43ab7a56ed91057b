//! Binary file formats (LTRG grids, LTSG sinograms, LTFB filter banks) and
//! 16-bit PGM export.
//!
//! All integers are little-endian. Grid and sinogram payloads are stored as
//! f32; sinogram angles and the bank step size as f64. Every reader rejects
//! wrong magic, short files, and trailing bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::filters::FilterBank;
use crate::geometry::{ImageGrid, ProjectionGeometry, Sinogram};

const GRID_MAGIC: &[u8; 4] = b"LTRG";
const SINO_MAGIC: &[u8; 4] = b"LTSG";
const BANK_MAGIC: &[u8; 4] = b"LTFB";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::Format("file ends early".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        if self.take(4)? != expect {
            return Err(Error::Format(format!(
                "bad magic, expected {:?}",
                std::str::from_utf8(expect).unwrap()
            )));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32_array(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(4).ok_or_else(|| {
            Error::Format("payload size overflows".into())
        })?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

fn dim_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds format range")))
}

/// Writes an image as LTRG: magic, u32 rows, u32 cols, f32 row-major payload.
pub fn write_grid(path: impl AsRef<Path>, img: &ImageGrid) -> Result<()> {
    let n = img.size();
    let mut out = Vec::with_capacity(12 + 4 * n * n);
    out.extend_from_slice(GRID_MAGIC);
    put_u32(&mut out, dim_u32(n, "rows")?);
    put_u32(&mut out, dim_u32(n, "cols")?);
    put_f32s(&mut out, img.values());
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads an LTRG file; only square grids are accepted.
pub fn read_grid(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf);
    r.magic(GRID_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    if rows != cols {
        return Err(Error::Format(format!("grid is {rows} x {cols}, expected square")));
    }
    let vals = r.f32_array(rows.checked_mul(cols).ok_or_else(|| {
        Error::Format("grid size overflows".into())
    })?)?;
    r.finish()?;
    ImageGrid::new(rows, vals)
}

/// Writes a sinogram as LTSG: magic, u32 angle count, u32 detector count,
/// f64 angles, f32 angle-major payload.
pub fn write_sinogram(path: impl AsRef<Path>, p: &Sinogram) -> Result<()> {
    let g = p.geometry();
    let mut out = Vec::with_capacity(12 + 8 * g.n_angles() + 4 * g.n_rays());
    out.extend_from_slice(SINO_MAGIC);
    put_u32(&mut out, dim_u32(g.n_angles(), "angle count")?);
    put_u32(&mut out, dim_u32(g.n_detectors(), "detector count")?);
    for a in g.angles() {
        out.extend_from_slice(&a.to_le_bytes());
    }
    put_f32s(&mut out, p.values());
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads an LTSG file. The format stores angles and detector count only, so
/// the target grid size and detector spacing complete the geometry.
pub fn read_sinogram(
    path: impl AsRef<Path>,
    grid_size: usize,
    detector_spacing: f64,
) -> Result<Sinogram> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf);
    r.magic(SINO_MAGIC)?;
    let na = r.u32()? as usize;
    let nd = r.u32()? as usize;
    let mut angles = Vec::with_capacity(na);
    for _ in 0..na {
        angles.push(r.f64()?);
    }
    let vals = r.f32_array(na.checked_mul(nd).ok_or_else(|| {
        Error::Format("sinogram size overflows".into())
    })?)?;
    r.finish()?;
    let geom = ProjectionGeometry::new(nd, angles, grid_size, detector_spacing)?;
    Sinogram::new(geom, vals)
}

/// Writes a filter bank as LTFB: magic, u32 angle count, u32 detector count,
/// u32 filter count, f64 alpha, f32 payload in (k, angle, detector) order.
pub fn write_filter_bank(path: impl AsRef<Path>, bank: &FilterBank) -> Result<()> {
    let g = bank.geometry();
    let n = bank.n_iterations();
    let mut out = Vec::with_capacity(24 + 4 * n * g.n_rays());
    out.extend_from_slice(BANK_MAGIC);
    put_u32(&mut out, dim_u32(g.n_angles(), "angle count")?);
    put_u32(&mut out, dim_u32(g.n_detectors(), "detector count")?);
    put_u32(&mut out, dim_u32(n, "filter count")?);
    out.extend_from_slice(&bank.alpha().to_le_bytes());
    for k in 1..=n {
        put_f32s(&mut out, bank.filter(k)?);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads an LTFB file. The format records only the angle count; the bank is
/// rebuilt on the equiangular set over `[0, pi)` with the given grid size
/// and detector spacing.
pub fn read_filter_bank(
    path: impl AsRef<Path>,
    grid_size: usize,
    detector_spacing: f64,
) -> Result<FilterBank> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf);
    r.magic(BANK_MAGIC)?;
    let na = r.u32()? as usize;
    let nd = r.u32()? as usize;
    let n = r.u32()? as usize;
    let alpha = r.f64()?;
    let geom = ProjectionGeometry::equiangular(nd, na, grid_size, detector_spacing)?;
    let rays = geom.n_rays();
    let mut filters = Vec::with_capacity(n);
    for _ in 0..n {
        filters.push(r.f32_array(rays)?);
    }
    r.finish()?;
    FilterBank::from_parts(geom, alpha, filters)
}

/// Writes a 16-bit binary PGM (P5) with min-max windowing: the minimum value
/// maps to black, the maximum to white. Constant images come out black.
pub fn write_pgm(path: impl AsRef<Path>, img: &ImageGrid) -> Result<()> {
    let n = img.size();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in img.values() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let span = hi - lo;
    let mut out = format!("P5\n{n} {n}\n65535\n").into_bytes();
    out.reserve(2 * n * n);
    for v in img.values() {
        let s = if span > 0.0 { (((v - lo) / span) * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&s.to_be_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}
