//! 2D parallel-beam tomography with regularized iterative solvers and a
//! local reconstruction engine.
//!
//! The global solvers ([`sirt`], [`sirt_box`], [`ista_wavelet`],
//! [`fista_tv`]) share one Joseph projector pair that is an exact algebraic
//! transpose ([`forward_project`], [`back_project`]). The local engine
//! replays `k` SIRT iterations as a single filtered backprojection with a
//! precomputed per-angle kernel bank ([`compute_sirt_filters`]) and confines
//! the prior and its data coupling to a padded window, so reconstructing a
//! region ([`local_sirt`], [`local_regularized`], [`local_fista_tv`]) or a
//! grid of tiles ([`tile_reconstruct`]) costs area, not grid size.
//!
//! ```
//! use loctomo::{
//!     build_conv_cache, compute_sirt_filters, disc_precorrect, forward_project, local_fista_tv,
//!     shepp_logan, LocalOptions, ProjectionGeometry, Region, SolverConfig,
//! };
//!
//! let geom = ProjectionGeometry::equiangular(48, 32, 32, 1.0)?;
//! let p = forward_project(&shepp_logan(32)?, &geom)?;
//! let bank = compute_sirt_filters(&geom, 20, None)?;
//! let (p_corr, _) = disc_precorrect(&p, &geom)?;
//! let cache = build_conv_cache(&p_corr, &bank)?;
//! let window = Region::square(8, 8, 16, 32)?;
//! let roi = local_fista_tv(
//!     &p,
//!     &geom,
//!     &window,
//!     &SolverConfig::new(20),
//!     1e-3,
//!     30,
//!     &bank,
//!     Some(&cache),
//!     &LocalOptions::default(),
//! )?;
//! assert_eq!(roi.size(), 32);
//! # Ok::<(), loctomo::Error>(())
//! ```

pub mod error;
pub mod filters;
pub mod geometry;
pub mod io;
pub mod local;
pub mod metrics;
pub mod projector;
pub mod simulate;
pub mod solvers;
pub mod wavelet;

pub use error::{Error, Result};
pub use filters::{
    compute_sirt_filters, convolve_sinogram, fbp, make_analytic_filter, AnalyticFilter,
    FilterBank, FilterKind, SinogramFilter,
};
pub use geometry::{ImageGrid, ProjectionGeometry, Region, Sinogram};
pub use io::{
    read_filter_bank, read_grid, read_sinogram, write_filter_bank, write_grid, write_pgm,
    write_sinogram,
};
pub use local::{
    build_conv_cache, disc_precorrect, local_fista_tv, local_regularized, local_sirt,
    local_split_states, pad_truncated, tile_reconstruct, ConvCache, DiscCorrection, LocalOptions,
    LocalState, PadMode,
};
pub use metrics::{mse, optimize_param, ssim, SsimOptions};
pub use projector::{back_project, forward_project};
pub use simulate::{
    apply_poisson_noise, binary_structured_phantom, downsample, shepp_logan, simulate_data,
    NoiseSpec,
};
pub use solvers::{
    fgp_tv_denoise, fista_tv, ista_wavelet, sirt, sirt_box, PriorSpec, SolverConfig,
};
pub use wavelet::{haar_forward, haar_inverse, max_levels, soft_threshold};
