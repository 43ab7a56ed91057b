//! Core data types shared by every module: projection geometry, image grids,
//! sinograms and rectangular grid regions.
//!
//! Conventions used throughout the crate:
//!
//! * The image is an `N x N` grid stored row-major. Pixel `(r, c)` has center
//!   coordinates `x = c - (N-1)/2`, `y = (N-1)/2 - r` in pixel units, so the
//!   rotation axis is the grid center and row 0 is the top of the image.
//! * A projection angle `theta` in `[0, pi)` measures rays with direction
//!   `(-sin theta, cos theta)`; the signed detector coordinate of a point `z`
//!   is `s = z . (cos theta, sin theta)`.
//! * Detector bin `d` (of `n_detectors`) has center `s = (d - (n_d-1)/2) * spacing`.

use crate::error::{Error, Result};

/// Parallel-beam acquisition geometry: detector layout, angle set and the
/// reconstruction grid the projector pairs it with.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGeometry {
    n_detectors: usize,
    angles: Vec<f64>,
    grid_size: usize,
    detector_spacing: f64,
}

impl ProjectionGeometry {
    /// Builds a geometry after validating every invariant: at least one angle,
    /// angles finite and inside `[0, pi)`, positive spacing and sizes.
    pub fn new(
        n_detectors: usize,
        angles: Vec<f64>,
        grid_size: usize,
        detector_spacing: f64,
    ) -> Result<Self> {
        if n_detectors == 0 {
            return Err(Error::DegenerateGeometry("n_detectors must be >= 1".into()));
        }
        if grid_size == 0 {
            return Err(Error::DegenerateGeometry("grid_size must be >= 1".into()));
        }
        if angles.is_empty() {
            return Err(Error::DegenerateGeometry("angle list must be non-empty".into()));
        }
        if !(detector_spacing.is_finite() && detector_spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "detector_spacing must be finite and positive, got {detector_spacing}"
            )));
        }
        for (i, &a) in angles.iter().enumerate() {
            if !a.is_finite() || !(0.0..std::f64::consts::PI).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "angle {i} = {a} outside [0, pi)"
                )));
            }
        }
        Ok(Self { n_detectors, angles, grid_size, detector_spacing })
    }

    /// `n` angles equally distributed over `[0, pi)`: `theta_k = k * pi / n`.
    pub fn equiangular(
        n_detectors: usize,
        n_angles: usize,
        grid_size: usize,
        detector_spacing: f64,
    ) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::DegenerateGeometry("n_angles must be >= 1".into()));
        }
        let angles = (0..n_angles)
            .map(|k| k as f64 * std::f64::consts::PI / n_angles as f64)
            .collect();
        Self::new(n_detectors, angles, grid_size, detector_spacing)
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    /// Number of rays (sinogram entries).
    pub fn n_rays(&self) -> usize {
        self.angles.len() * self.n_detectors
    }

    /// Default SIRT-style relaxation factor `1 / (n_angles * n_detectors)`.
    pub fn default_alpha(&self) -> f64 {
        1.0 / (self.n_rays() as f64)
    }

    /// Signed detector coordinate of bin `d`.
    pub fn detector_position(&self, d: usize) -> f64 {
        (d as f64 - (self.n_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
    }
}

/// Square `size x size` image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    size: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    /// Wraps row-major `values`; every value must be finite and
    /// `values.len() == size * size`.
    pub fn new(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "image expects {} values, got {}",
                size * size,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("image contains non-finite values".into()));
        }
        Ok(Self { size, values })
    }

    pub fn zeros(size: usize) -> Self {
        Self { size, values: vec![0.0; size * size] }
    }

    // Internal constructor for values produced by the crate's own arithmetic.
    pub(crate) fn from_raw(size: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), size * size);
        Self { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.size + col] = v;
    }
}

/// Sinogram: one row of `n_detectors` samples per projection angle, stored
/// angle-major, paired with the geometry it was measured under.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: ProjectionGeometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(geometry: ProjectionGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.n_rays() {
            return Err(Error::DimensionMismatch(format!(
                "sinogram expects {} values, got {}",
                geometry.n_rays(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sinogram contains non-finite values".into()));
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: ProjectionGeometry) -> Self {
        let n = geometry.n_rays();
        Self { geometry, values: vec![0.0; n] }
    }

    pub(crate) fn from_raw(geometry: ProjectionGeometry, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), geometry.n_rays());
        Self { geometry, values }
    }

    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The row of samples for angle index `a`.
    pub fn row(&self, a: usize) -> &[f64] {
        let nd = self.geometry.n_detectors;
        &self.values[a * nd..(a + 1) * nd]
    }

    #[inline]
    pub fn get(&self, a: usize, d: usize) -> f64 {
        self.values[a * self.geometry.n_detectors + d]
    }
}

/// Axis-aligned rectangular region of a `grid_size x grid_size` image.
///
/// Regions are usually square (`rows == cols`); clipping a padded region at
/// the grid border is the one place rectangles arise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    row0: usize,
    col0: usize,
    rows: usize,
    cols: usize,
    grid_size: usize,
}

impl Region {
    pub fn new(row0: usize, col0: usize, rows: usize, cols: usize, grid_size: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("region must be non-empty".into()));
        }
        if row0 + rows > grid_size || col0 + cols > grid_size {
            return Err(Error::InvalidParameter(format!(
                "region [{row0}+{rows}, {col0}+{cols}] exceeds grid of size {grid_size}"
            )));
        }
        Ok(Self { row0, col0, rows, cols, grid_size })
    }

    /// Square region of side `size` with top-left corner `(row0, col0)`.
    pub fn square(row0: usize, col0: usize, size: usize, grid_size: usize) -> Result<Self> {
        Self::new(row0, col0, size, size, grid_size)
    }

    /// The whole grid as a region.
    pub fn full(grid_size: usize) -> Self {
        Self { row0: 0, col0: 0, rows: grid_size, cols: grid_size, grid_size }
    }

    pub fn row0(&self) -> usize {
        self.row0
    }

    pub fn col0(&self) -> usize {
        self.col0
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Exclusive row end.
    pub fn row_end(&self) -> usize {
        self.row0 + self.rows
    }

    /// Exclusive column end.
    pub fn col_end(&self) -> usize {
        self.col0 + self.cols
    }

    pub fn n_pixels(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row0 && row < self.row_end() && col >= self.col0 && col < self.col_end()
    }

    /// True if `other` covers the same pixels of the same grid.
    pub fn covers_grid(&self) -> bool {
        self.row0 == 0 && self.col0 == 0 && self.rows == self.grid_size && self.cols == self.grid_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_rejects_bad_angles() {
        assert!(ProjectionGeometry::new(4, vec![0.0, std::f64::consts::PI], 4, 1.0).is_err());
        assert!(ProjectionGeometry::new(4, vec![-0.1], 4, 1.0).is_err());
        assert!(ProjectionGeometry::new(4, vec![f64::NAN], 4, 1.0).is_err());
        assert!(ProjectionGeometry::new(4, vec![], 4, 1.0).is_err());
        assert!(ProjectionGeometry::new(0, vec![0.0], 4, 1.0).is_err());
        assert!(ProjectionGeometry::new(4, vec![0.0], 4, 0.0).is_err());
    }

    #[test]
    fn equiangular_covers_half_turn() {
        let g = ProjectionGeometry::equiangular(8, 4, 8, 1.0).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.75].map(|t| t * std::f64::consts::PI);
        for (a, e) in g.angles().iter().zip(expect.iter()) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(g.default_alpha(), 1.0 / 32.0);
    }

    #[test]
    fn detector_positions_are_centered() {
        let g = ProjectionGeometry::equiangular(5, 1, 4, 2.0).unwrap();
        assert_eq!(g.detector_position(2), 0.0);
        assert_eq!(g.detector_position(0), -4.0);
        assert_eq!(g.detector_position(4), 4.0);
    }

    #[test]
    fn image_and_sinogram_validate_shape_and_finiteness() {
        assert!(ImageGrid::new(2, vec![0.0; 3]).is_err());
        assert!(ImageGrid::new(2, vec![0.0, f64::INFINITY, 0.0, 0.0]).is_err());
        let g = ProjectionGeometry::equiangular(3, 2, 4, 1.0).unwrap();
        assert!(Sinogram::new(g.clone(), vec![0.0; 5]).is_err());
        assert!(Sinogram::new(g, vec![0.0; 6]).is_ok());
    }

    #[test]
    fn region_bounds_are_checked() {
        assert!(Region::square(0, 0, 4, 4).is_ok());
        assert!(Region::square(1, 0, 4, 4).is_err());
        assert!(Region::square(0, 0, 0, 4).is_err());
        let r = Region::new(1, 2, 3, 2, 8).unwrap();
        assert!(r.contains(1, 2) && r.contains(3, 3));
        assert!(!r.contains(0, 2) && !r.contains(4, 2) && !r.contains(1, 4));
    }
}
