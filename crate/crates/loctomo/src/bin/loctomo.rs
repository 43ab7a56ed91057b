//! Command-line front end: simulate data, compute filter banks, reconstruct
//! (globally, locally, or tiled), score results, and sweep lambda.
//!
//! Exit codes: 0 success, 2 usage or input validation error, 1 runtime
//! failure while writing outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use loctomo::{
    apply_poisson_noise, binary_structured_phantom, build_conv_cache, compute_sirt_filters,
    downsample, fbp, fista_tv, ista_wavelet, local_fista_tv, local_regularized, local_sirt,
    make_analytic_filter, mse, optimize_param, read_filter_bank, read_grid, read_sinogram,
    shepp_logan, simulate_data, sirt, sirt_box, ssim, tile_reconstruct, write_filter_bank,
    write_grid, write_pgm, write_sinogram, FilterBank, FilterKind, ImageGrid, LocalOptions,
    NoiseSpec, PriorSpec, Region, SinogramFilter, SolverConfig, SsimOptions,
};

#[derive(Parser)]
#[command(name = "loctomo", version, about = "2D parallel-beam tomography toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a phantom and simulate (optionally noisy) projection data
    Simulate(SimulateArgs),
    /// Compute a SIRT-approximating FBP filter bank
    Filters(FiltersArgs),
    /// Reconstruct a sinogram globally, locally, or tiled
    Reconstruct(ReconstructArgs),
    /// Score a reconstruction against ground truth (CSV on stdout)
    Score(ScoreArgs),
    /// Nelder-Mead lambda search (CSV on stdout)
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomKind {
    SheppLogan,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fbp,
    Sirt,
    SirtBox,
    IstaHaar,
    FistaTv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyticKind {
    RamLak,
    SheppLogan,
    Hann,
}

impl AnalyticKind {
    fn to_lib(self) -> FilterKind {
        match self {
            AnalyticKind::RamLak => FilterKind::RamLak,
            AnalyticKind::SheppLogan => FilterKind::SheppLogan,
            AnalyticKind::Hann => FilterKind::Hann,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMethod {
    IstaHaar,
    FistaTv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Mse,
    Ssim,
}

#[derive(Args)]
struct SimulateArgs {
    /// Phantom family
    #[arg(long, value_enum, default_value_t = PhantomKind::SheppLogan)]
    phantom: PhantomKind,
    /// Reconstruction grid size N
    #[arg(long)]
    n: usize,
    /// Number of projection angles over [0, pi)
    #[arg(long)]
    angles: usize,
    /// Number of detector bins
    #[arg(long)]
    detectors: usize,
    /// Detector spacing in pixel units
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Supersampling factor for the simulation
    #[arg(long, default_value_t = 4)]
    supersample: usize,
    /// Peak photon count; omit for noiseless data
    #[arg(long)]
    i0: Option<f64>,
    /// Seed for the phantom and the noise
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FiltersArgs {
    /// Number of projection angles over [0, pi)
    #[arg(long)]
    angles: usize,
    /// Number of detector bins
    #[arg(long)]
    detectors: usize,
    /// Reconstruction grid size N
    #[arg(long)]
    grid: usize,
    /// Detector spacing in pixel units
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Number of SIRT iterations the bank covers
    #[arg(long)]
    iterations: usize,
    /// Step size; defaults to 1/(angles * detectors)
    #[arg(long)]
    alpha: Option<f64>,
    /// Output filter bank file (.ltfb)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Input sinogram (.ltsg)
    #[arg(long)]
    sino: PathBuf,
    /// Reconstruction grid size N
    #[arg(long)]
    grid: usize,
    /// Detector spacing in pixel units
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, value_enum)]
    method: Method,
    /// Analytic filter for --method fbp
    #[arg(long, value_enum, default_value_t = AnalyticKind::RamLak)]
    filter: AnalyticKind,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Step size; defaults to 1/(angles * detectors)
    #[arg(long)]
    alpha: Option<f64>,
    /// Regularization weight (ista-haar, fista-tv)
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Box bounds "low,high" (sirt-box)
    #[arg(long, value_parser = parse_pair)]
    r#box: Option<(f64, f64)>,
    /// Wavelet decomposition levels (ista-haar)
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Inner iterations of the TV proximal solver
    #[arg(long, default_value_t = 100)]
    fgp_iterations: usize,
    /// Local region "row0,col0,size": reconstruct only this part
    #[arg(long, value_parser = parse_triplet)]
    local: Option<(usize, usize, usize)>,
    /// Tile size for tiled full-grid reconstruction
    #[arg(long)]
    tile: Option<usize>,
    /// Worker cap for tiling (default: LOCTOMO_THREADS, then all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Filter bank file (.ltfb); required for --local and --tile
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Disable the disc pre-correction of the local engine
    #[arg(long)]
    no_disc_correction: bool,
    /// Region padding fraction of the local engine
    #[arg(long, default_value_t = 0.125)]
    pad_factor: f64,
    /// Output grid file (.ltrg)
    #[arg(long)]
    out: PathBuf,
    /// Also export a windowed 16-bit PGM
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Reconstruction grid file (.ltrg)
    #[arg(long)]
    recon: PathBuf,
    /// Ground-truth grid file (.ltrg)
    #[arg(long)]
    truth: PathBuf,
    /// Restrict scoring to "row0,col0,size"
    #[arg(long, value_parser = parse_triplet)]
    region: Option<(usize, usize, usize)>,
}

#[derive(Args)]
struct SweepArgs {
    /// Input sinogram (.ltsg)
    #[arg(long)]
    sino: PathBuf,
    /// Ground-truth grid file (.ltrg)
    #[arg(long)]
    truth: PathBuf,
    /// Reconstruction grid size N
    #[arg(long)]
    grid: usize,
    /// Detector spacing in pixel units
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, value_enum)]
    method: SweepMethod,
    /// Quantity to optimize: minimize mse or maximize ssim
    #[arg(long, value_enum, default_value_t = Target::Mse)]
    metric: Target,
    /// Lower lambda bound
    #[arg(long, default_value_t = 1e-4)]
    low: f64,
    /// Upper lambda bound
    #[arg(long, default_value_t = 10.0)]
    high: f64,
    /// Exact number of objective evaluations
    #[arg(long, default_value_t = 20)]
    budget: usize,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Step size; defaults to 1/(angles * detectors)
    #[arg(long)]
    alpha: Option<f64>,
    /// Wavelet decomposition levels (ista-haar)
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Inner iterations of the TV proximal solver
    #[arg(long, default_value_t = 100)]
    fgp_iterations: usize,
    /// Sweep on a local region "row0,col0,size" (requires --bank)
    #[arg(long, value_parser = parse_triplet)]
    local: Option<(usize, usize, usize)>,
    /// Filter bank file (.ltfb)
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Disable the disc pre-correction of the local engine
    #[arg(long)]
    no_disc_correction: bool,
    /// Region padding fraction of the local engine
    #[arg(long, default_value_t = 0.125)]
    pad_factor: f64,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"low,high\", got {s:?}"));
    }
    let a = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn parse_triplet(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected \"row0,col0,size\", got {s:?}"));
    }
    let a = parts[0].trim().parse::<usize>().map_err(|e| e.to_string())?;
    let b = parts[1].trim().parse::<usize>().map_err(|e| e.to_string())?;
    let c = parts[2].trim().parse::<usize>().map_err(|e| e.to_string())?;
    Ok((a, b, c))
}

struct Failure {
    code: u8,
    msg: String,
}

type CmdResult = Result<(), Failure>;

fn usage_msg(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

// input-side problems: bad parameters, unreadable or inconsistent inputs
fn usage<T>(r: loctomo::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure { code: 2, msg: e.to_string() })
}

fn usage_at<T>(path: &std::path::Path, r: loctomo::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure { code: 2, msg: format!("{}: {e}", path.display()) })
}

// failures after the inputs were accepted (output writes)
fn runtime<T>(r: loctomo::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure { code: 1, msg: e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Filters(a) => cmd_filters(a),
        Cmd::Reconstruct(a) => cmd_reconstruct(a),
        Cmd::Score(a) => cmd_score(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    }
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    if a.supersample == 0 {
        return Err(usage_msg("--supersample must be at least 1"));
    }
    let fine_n = a
        .n
        .checked_mul(a.supersample)
        .ok_or_else(|| usage_msg("--n times --supersample overflows"))?;
    let phantom = match a.phantom {
        PhantomKind::SheppLogan => usage(shepp_logan(fine_n))?,
        PhantomKind::Binary => usage(binary_structured_phantom(fine_n, a.seed))?,
    };
    let geom = usage(loctomo::ProjectionGeometry::equiangular(
        a.detectors,
        a.angles,
        a.n,
        a.spacing,
    ))?;
    let mut p = usage(simulate_data(&phantom, a.supersample, &geom))?;
    if let Some(i0) = a.i0 {
        let spec = usage(NoiseSpec::new(i0, a.seed))?;
        p = usage(apply_poisson_noise(&p, &spec))?;
    }
    let truth = usage(downsample(&phantom, a.supersample))?;
    std::fs::create_dir_all(&a.out)
        .map_err(|e| Failure { code: 1, msg: format!("creating {}: {e}", a.out.display()) })?;
    runtime(write_grid(a.out.join("phantom.ltrg"), &phantom))?;
    runtime(write_grid(a.out.join("truth.ltrg"), &truth))?;
    runtime(write_sinogram(a.out.join("sino.ltsg"), &p))?;
    Ok(())
}

fn cmd_filters(a: FiltersArgs) -> CmdResult {
    let geom = usage(loctomo::ProjectionGeometry::equiangular(
        a.detectors,
        a.angles,
        a.grid,
        a.spacing,
    ))?;
    let bank = usage(compute_sirt_filters(&geom, a.iterations, a.alpha))?;
    runtime(write_filter_bank(&a.out, &bank))?;
    Ok(())
}

struct LocalSetup {
    bank: FilterBank,
    opts: LocalOptions,
}

fn load_bank(
    bank: &Option<PathBuf>,
    grid: usize,
    spacing: f64,
    pad_factor: f64,
    no_disc: bool,
    what: &str,
) -> Result<LocalSetup, Failure> {
    let path = bank.as_ref().ok_or_else(|| usage_msg(format!("--bank is required for {what}")))?;
    let bank = usage_at(path, read_filter_bank(path, grid, spacing))?;
    Ok(LocalSetup {
        bank,
        opts: LocalOptions { pad_factor, disc_correction: !no_disc },
    })
}

fn resolve_workers(flag: Option<usize>) -> Result<usize, Failure> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var("LOCTOMO_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| usage_msg(format!("LOCTOMO_THREADS must be a positive integer, got {s:?}"))),
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn iterative_prior(a: &ReconstructArgs) -> Result<PriorSpec, Failure> {
    Ok(match a.method {
        Method::Sirt => PriorSpec::None,
        Method::SirtBox => {
            let (low, high) =
                a.r#box.ok_or_else(|| usage_msg("--box low,high is required for sirt-box"))?;
            PriorSpec::Box { low, high }
        }
        Method::IstaHaar => PriorSpec::WaveletL1 { lambda: a.lambda, levels: a.levels },
        Method::FistaTv => PriorSpec::Tv { lambda: a.lambda, fgp_iterations: a.fgp_iterations },
        Method::Fbp => unreachable!("fbp handled before prior dispatch"),
    })
}

fn cmd_reconstruct(a: ReconstructArgs) -> CmdResult {
    if a.local.is_some() && a.tile.is_some() {
        return Err(usage_msg("--local and --tile are mutually exclusive"));
    }
    let p = usage_at(&a.sino, read_sinogram(&a.sino, a.grid, a.spacing))?;
    let geom = p.geometry().clone();
    let cfg = SolverConfig { iterations: a.iterations, alpha: a.alpha };

    let img = if let Some(tile) = a.tile {
        if matches!(a.method, Method::Fbp) {
            return Err(usage_msg("--tile applies to iterative methods, not fbp"));
        }
        let setup = load_bank(&a.bank, a.grid, a.spacing, a.pad_factor, a.no_disc_correction,
            "--tile")?;
        let prior = iterative_prior(&a)?;
        let workers = resolve_workers(a.workers)?;
        usage(tile_reconstruct(&p, &geom, &cfg, tile, &prior, &setup.bank, None, workers,
            &setup.opts))?
    } else if let Some((r0, c0, size)) = a.local {
        let region = usage(Region::square(r0, c0, size, a.grid))?;
        match a.method {
            Method::Fbp => {
                let f = usage(make_analytic_filter(a.filter.to_lib(), geom.n_detectors()))?;
                usage(fbp(&p, &SinogramFilter::Analytic(&f), &geom, Some(&region)))?
            }
            _ => {
                let setup = load_bank(&a.bank, a.grid, a.spacing, a.pad_factor,
                    a.no_disc_correction, "--local")?;
                let prior = iterative_prior(&a)?;
                match prior {
                    PriorSpec::None => usage(local_sirt(&p, &geom, &region, &cfg, &setup.bank,
                        None, &setup.opts))?,
                    PriorSpec::Tv { lambda, fgp_iterations } => {
                        usage(local_fista_tv(&p, &geom, &region, &cfg, lambda, fgp_iterations,
                            &setup.bank, None, &setup.opts))?
                    }
                    _ => usage(local_regularized(&p, &geom, &region, &cfg, &prior, &setup.bank,
                        None, &setup.opts))?,
                }
            }
        }
    } else {
        match a.method {
            Method::Fbp => {
                let f = usage(make_analytic_filter(a.filter.to_lib(), geom.n_detectors()))?;
                usage(fbp(&p, &SinogramFilter::Analytic(&f), &geom, None))?
            }
            Method::Sirt => usage(sirt(&p, &geom, &cfg, None))?,
            Method::SirtBox => {
                let (low, high) =
                    a.r#box.ok_or_else(|| usage_msg("--box low,high is required for sirt-box"))?;
                usage(sirt_box(&p, &geom, &cfg, low, high))?
            }
            Method::IstaHaar => usage(ista_wavelet(&p, &geom, &cfg, a.lambda, a.levels))?,
            Method::FistaTv => usage(fista_tv(&p, &geom, &cfg, a.lambda, a.fgp_iterations))?,
        }
    };

    runtime(write_grid(&a.out, &img))?;
    if let Some(pgm) = &a.pgm {
        runtime(write_pgm(pgm, &img))?;
    }
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> CmdResult {
    let recon = usage_at(&a.recon, read_grid(&a.recon))?;
    let truth = usage_at(&a.truth, read_grid(&a.truth))?;
    let region = match a.region {
        Some((r0, c0, size)) => Some(usage(Region::square(r0, c0, size, truth.size()))?),
        None => None,
    };
    let m = usage(mse(&recon, &truth, region.as_ref()))?;
    let s = usage(ssim(&truth, &recon, region.as_ref(), &SsimOptions::default()))?;
    println!("mse,ssim");
    println!("{m:?},{s:?}");
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let p = usage_at(&a.sino, read_sinogram(&a.sino, a.grid, a.spacing))?;
    let geom = p.geometry().clone();
    let truth = usage_at(&a.truth, read_grid(&a.truth))?;
    if truth.size() != a.grid {
        return Err(usage_msg(format!(
            "truth grid is {}, --grid says {}",
            truth.size(),
            a.grid
        )));
    }
    let cfg = SolverConfig { iterations: a.iterations, alpha: a.alpha };

    let local = match a.local {
        Some((r0, c0, size)) => {
            let setup = load_bank(&a.bank, a.grid, a.spacing, a.pad_factor,
                a.no_disc_correction, "--local")?;
            let region = usage(Region::square(r0, c0, size, a.grid))?;
            // one cache reused across all lambda evaluations; it must be
            // built on the same data the engine will filter
            let cache = if setup.opts.disc_correction {
                let (p_corr, _) = usage(loctomo::disc_precorrect(&p, &geom))?;
                usage(build_conv_cache(&p_corr, &setup.bank))?
            } else {
                usage(build_conv_cache(&p, &setup.bank))?
            };
            Some((setup, region, cache))
        }
        None => None,
    };

    let reconstruct = |lambda: f64| -> loctomo::Result<ImageGrid> {
        match &local {
            Some((setup, region, cache)) => match a.method {
                SweepMethod::IstaHaar => {
                    let prior = PriorSpec::WaveletL1 { lambda, levels: a.levels };
                    local_regularized(&p, &geom, region, &cfg, &prior, &setup.bank, Some(cache),
                        &setup.opts)
                }
                SweepMethod::FistaTv => local_fista_tv(&p, &geom, region, &cfg, lambda,
                    a.fgp_iterations, &setup.bank, Some(cache), &setup.opts),
            },
            None => match a.method {
                SweepMethod::IstaHaar => ista_wavelet(&p, &geom, &cfg, lambda, a.levels),
                SweepMethod::FistaTv => fista_tv(&p, &geom, &cfg, lambda, a.fgp_iterations),
            },
        }
    };
    let score_region = local.as_ref().map(|(_, region, _)| *region);

    println!("lambda,mse,ssim");
    let mut failure: Option<Failure> = None;
    let mut best: Option<(f64, f64, f64, f64)> = None;
    {
        let objective = |lambda: f64| -> f64 {
            if failure.is_some() {
                return f64::INFINITY;
            }
            let scored = reconstruct(lambda).and_then(|img| {
                let m = mse(&img, &truth, score_region.as_ref())?;
                let s = ssim(&truth, &img, score_region.as_ref(), &SsimOptions::default())?;
                Ok((m, s))
            });
            match scored {
                Ok((m, s)) => {
                    println!("{lambda:?},{m:?},{s:?}");
                    let value = match a.metric {
                        Target::Mse => m,
                        Target::Ssim => -s,
                    };
                    if best.as_ref().is_none_or(|b| value < b.0) {
                        best = Some((value, lambda, m, s));
                    }
                    value
                }
                Err(e) => {
                    failure = Some(Failure { code: 2, msg: e.to_string() });
                    f64::INFINITY
                }
            }
        };
        usage(optimize_param(objective, (a.low, a.high), a.budget).map(|_| ()))?;
    }
    if let Some(f) = failure {
        return Err(f);
    }
    let (_, lambda, m, s) = best.expect("budget >= 3 guarantees evaluations");
    println!("{lambda:?},{m:?},{s:?}");
    Ok(())
}
