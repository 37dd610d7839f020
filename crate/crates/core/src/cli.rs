//! Command-line front end: subcommand dispatch, artifact writing, run
//! manifests, and a content-addressed cache for expensive scans.

use crate::bifurcation::{self, ScanConfig};
use crate::equilibrium::{self, CloudMethod, CloudOptions};
use crate::error::{Error, Result};
use crate::family::MapFamily;
use crate::field::GridSpec;
use crate::lyapunov;
use crate::slicing;
use crate::stability;
use crate::C64;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const CACHE_ENV: &str = "POLYLIKE_CACHE";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "polylike", version, about = "Numerical dynamics of polynomial-like families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker thread count (default: logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Cache directory; overrides the POLYLIKE_CACHE environment variable.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Disable the field cache even if a cache directory is configured.
    #[arg(long, global = true)]
    pub no_cache: bool,
}

#[derive(Args, Debug)]
pub struct FamilyArg {
    /// Family description file.
    #[arg(long)]
    pub family: PathBuf,
}

#[derive(Args, Debug)]
pub struct ParamArg {
    /// Parameter value as "re,im"; repeat for multi-parameter families.
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub param: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lyapunov partial sums L_p at one parameter.
    Lyapunov {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        param: ParamArg,
        /// Pullback-tree depth controlling the estimate.
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Scan L_p over a parameter grid; writes field CSV and PGM.
    Scan {
        #[command(flatten)]
        family: FamilyArg,
        /// Grid as "re_min,re_max,im_min,im_max,n[,ny]".
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Which partial sum; 0 means p = k.
        #[arg(long, default_value_t = 0)]
        p: usize,
    },
    /// Scan plus discrete dd^c: current CSV/PGM and support cells.
    Bifurcation {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        p: usize,
        /// Relative support threshold.
        #[arg(long, default_value_t = bifurcation::DEFAULT_SUPPORT_TAU)]
        tau: f64,
    },
    /// Equilibrium-measure cloud at one parameter.
    Julia {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        param: ParamArg,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// Use the random-walk estimator with this many walkers.
        #[arg(long)]
        walkers: Option<usize>,
        /// Seed for stochastic estimators (mandatory with --walkers).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Periodic orbits of the given period at one parameter.
    Periodic {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        param: ParamArg,
        #[arg(long)]
        period: usize,
    },
    /// Hausdorff continuity scan with critical-membership verdicts.
    Stability {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 10)]
        depth: usize,
    },
    /// Horizontal-current slice checks over a parameter grid.
    SliceCheck {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Base atom in the fiber as "re,im" (repeat per coordinate).
        #[arg(long, required = true, allow_hyphen_values = true)]
        base: Vec<String>,
    },
    /// Fast internal consistency suite.
    Selftest,
}

/// Everything needed to reproduce a run; hashed for the cache key and the
/// manifest.
#[derive(Debug)]
pub struct RunConfig {
    pub argv: Vec<String>,
    pub out: PathBuf,
    pub cache_root: Option<PathBuf>,
}

impl RunConfig {
    /// Hash of the run-relevant arguments (everything but --out, --threads
    /// and cache plumbing, which do not affect artifact content).
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
        let mut skip_next = false;
        for arg in self.argv.iter().skip(1) {
            if skip_next {
                skip_next = false;
                continue;
            }
            if arg == "--out" || arg == "--threads" || arg == "--cache-dir" {
                skip_next = true;
                continue;
            }
            if arg == "--no-cache" {
                continue;
            }
            hasher.update(arg.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_complex(text: &str) -> Result<C64> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "expected \"re,im\", got `{text}`"
        )));
    }
    let re = parts[0].trim().parse::<f64>();
    let im = parts[1].trim().parse::<f64>();
    match (re, im) {
        (Ok(re), Ok(im)) => Ok(C64::new(re, im)),
        _ => Err(Error::InvalidConfig(format!("bad complex literal `{text}`"))),
    }
}

fn parse_params(family: &MapFamily, texts: &[String]) -> Result<Vec<C64>> {
    if texts.len() != family.param_dim() {
        return Err(Error::InvalidConfig(format!(
            "family has {} parameter(s), {} given",
            family.param_dim(),
            texts.len()
        )));
    }
    texts.iter().map(|t| parse_complex(t)).collect()
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::FamilyParse(_)
        | Error::ParameterOutsideDomain(_)
        | Error::UnsupportedFamily { .. }
        | Error::Io(_) => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

/// Top-level entry point; returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own usage/help text; --help and --version are
            // successful outcomes.
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = cli.threads {
        // Fails harmlessly if a pool is already installed (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let cache_root = if cli.no_cache {
        None
    } else {
        cli.cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
    };
    let config = RunConfig {
        argv: argv.to_vec(),
        out: cli.out.clone(),
        cache_root,
    };
    match execute(&cli, &config) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn execute(cli: &Cli, config: &RunConfig) -> Result<()> {
    let started = std::time::Instant::now();
    std::fs::create_dir_all(&config.out)?;
    let artifacts = match &cli.command {
        Command::Lyapunov {
            family,
            param,
            depth,
        } => cmd_lyapunov(&family.family, &param.param, *depth, config)?,
        Command::Scan {
            family,
            grid,
            depth,
            p,
        } => with_cache(config, &["scan.csv", "scan.pgm", "scan.pgm.txt"], || {
            cmd_scan(&family.family, grid, *depth, *p, config)
        })?,
        Command::Bifurcation {
            family,
            grid,
            depth,
            p,
            tau,
        } => with_cache(
            config,
            &[
                "field.csv",
                "field.pgm",
                "field.pgm.txt",
                "current.csv",
                "current.pgm",
                "current.pgm.txt",
                "support.csv",
            ],
            || cmd_bifurcation(&family.family, grid, *depth, *p, *tau, config),
        )?,
        Command::Julia {
            family,
            param,
            depth,
            walkers,
            seed,
        } => cmd_julia(&family.family, &param.param, *depth, *walkers, *seed, config)?,
        Command::Periodic {
            family,
            param,
            period,
        } => cmd_periodic(&family.family, &param.param, *period, config)?,
        Command::Stability {
            family,
            grid,
            depth,
        } => cmd_stability(&family.family, grid, *depth, config)?,
        Command::SliceCheck {
            family,
            grid,
            depth,
            base,
        } => cmd_slice_check(&family.family, grid, *depth, base, config)?,
        Command::Selftest => cmd_selftest()?,
    };
    write_manifest(config, &artifacts, started.elapsed().as_secs_f64())?;
    Ok(())
}

fn write_manifest(config: &RunConfig, artifacts: &[String], wall_time: f64) -> Result<()> {
    let path = config.out.join("manifest.txt");
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "command = {}", config.argv[1..].join(" "))?;
    writeln!(out, "config_hash = {}", config.config_hash())?;
    writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "wall_time_s = {wall_time:.3}")?;
    for a in artifacts {
        writeln!(out, "artifact = {a}")?;
    }
    Ok(())
}

/// Content-addressed cache wrapper: on a hit, artifacts are copied
/// byte-identically from the cache; on a miss (or corrupt entry) the
/// compute closure runs and its outputs are stored.
fn with_cache(
    config: &RunConfig,
    names: &[&str],
    compute: impl FnOnce() -> Result<Vec<String>>,
) -> Result<Vec<String>> {
    let Some(root) = &config.cache_root else {
        return compute();
    };
    let entry = root.join(config.config_hash());
    if entry.is_dir() {
        if names.iter().all(|n| entry.join(n).is_file()) {
            for n in names {
                std::fs::copy(entry.join(n), config.out.join(n))?;
            }
            return Ok(names.iter().map(|n| format!("{n} (cached)")).collect());
        }
        eprintln!("warning: corrupt cache entry {}, recomputing", entry.display());
    }
    let artifacts = compute()?;
    std::fs::create_dir_all(&entry)?;
    for n in names {
        let produced = config.out.join(n);
        if produced.is_file() {
            std::fs::copy(&produced, entry.join(n))?;
        }
    }
    Ok(artifacts)
}

fn cmd_lyapunov(
    family_path: &Path,
    params: &[String],
    depth: usize,
    config: &RunConfig,
) -> Result<Vec<String>> {
    let family = MapFamily::from_file(family_path)?;
    let s = parse_params(&family, params)?;
    let k = family.fiber_dim();
    let base_depth = 8;
    let n = depth.saturating_sub(base_depth).max(2) / 2;
    let mut lines = Vec::new();
    for p in 1..=k {
        let pair = lyapunov::partial_sums_spatial(
            &family,
            &s,
            p,
            base_depth,
            n.max(1),
            lyapunov::DEFAULT_STREAM_BUDGET,
        )?;
        let err = (pair.phi_2n - pair.phi_n).abs();
        println!("L_{p} = {:.6} +/- {:.1e}", pair.phi_2n, err);
        lines.push(format!("L_{p} = {:.17e} +/- {:.17e}", pair.phi_2n, err));
    }
    let path = config.out.join("lyapunov.txt");
    std::fs::write(&path, lines.join("\n") + "\n")?;
    Ok(vec!["lyapunov.txt".into()])
}

fn cmd_scan(
    family_path: &Path,
    grid: &str,
    depth: usize,
    p: usize,
    config: &RunConfig,
) -> Result<Vec<String>> {
    let family = MapFamily::from_file(family_path)?;
    let grid = GridSpec::parse(grid)?;
    let scan_config = ScanConfig {
        p,
        depth,
        ..ScanConfig::default()
    };
    let field = bifurcation::scan(&family, grid, &scan_config)?;
    field.save_csv(&config.out.join("scan.csv"))?;
    field.save_pgm(&config.out.join("scan.pgm"))?;
    Ok(vec!["scan.csv".into(), "scan.pgm".into()])
}

fn cmd_bifurcation(
    family_path: &Path,
    grid: &str,
    depth: usize,
    p: usize,
    tau: f64,
    config: &RunConfig,
) -> Result<Vec<String>> {
    let family = MapFamily::from_file(family_path)?;
    let grid = GridSpec::parse(grid)?;
    let scan_config = ScanConfig {
        p,
        depth,
        ..ScanConfig::default()
    };
    let field = bifurcation::scan(&family, grid, &scan_config)?;
    field.save_csv(&config.out.join("field.csv"))?;
    field.save_pgm(&config.out.join("field.pgm"))?;
    let current = bifurcation::ddc(&field);
    current.save_csv(&config.out.join("current.csv"))?;
    current.save_pgm(&config.out.join("current.pgm"))?;
    let sup = bifurcation::support(&current, tau)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(config.out.join("support.csv"))?);
    writeln!(out, "cell_center_re,cell_center_im,mass")?;
    for &(ix, iy) in &sup.cells {
        let z = current.cell_center(ix, iy);
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e}",
            z.re,
            z.im,
            current.masses[current.idx(ix, iy)]
        )?;
    }
    drop(out);
    println!(
        "total mass {:.6}, {} support cells in {} component(s), reliable: {}",
        current.total_mass(),
        sup.cells.len(),
        sup.components,
        current.reliable()
    );
    Ok(vec![
        "field.csv".into(),
        "field.pgm".into(),
        "current.csv".into(),
        "current.pgm".into(),
        "support.csv".into(),
    ])
}

fn cmd_julia(
    family_path: &Path,
    params: &[String],
    depth: usize,
    walkers: Option<usize>,
    seed: Option<u64>,
    config: &RunConfig,
) -> Result<Vec<String>> {
    let family = MapFamily::from_file(family_path)?;
    let s = parse_params(&family, params)?;
    let options = match walkers {
        Some(w) => CloudOptions {
            method: CloudMethod::Walk { walkers: w },
            seed: seed.ok_or_else(|| {
                Error::InvalidConfig("--seed is mandatory with --walkers".into())
            })?,
            ..CloudOptions::default()
        },
        None => CloudOptions::default(),
    };
    let base = equilibrium::default_base(&family);
    let cloud = equilibrium::equilibrium_cloud(&family, &s, depth, &base, &options)?;
    cloud.save_csv(&config.out.join("julia.csv"))?;
    cloud.save_sidecar(&config.out.join("julia.txt"))?;
    println!("{} atoms at depth {depth}", cloud.len());
    Ok(vec!["julia.csv".into(), "julia.txt".into()])
}

fn cmd_periodic(
    family_path: &Path,
    params: &[String],
    period: usize,
    config: &RunConfig,
) -> Result<Vec<String>> {
    let family = MapFamily::from_file(family_path)?;
    let s = parse_params(&family, params)?;
    let set = stability::periodic_points(&family, &s, period)?;
    if let Some(w) = &set.warning {
        eprintln!("warning: {w}");
    }
    let file = std::fs::File::create(config.out.join("orbits.csv"))?;
    stability::write_orbits_csv(&set.orbits, std::io::BufWriter::new(file))?;
    for orbit in &set.orbits {
        println!(
            "period {} at ({:.6},{:.6}): |multiplier| {:.6}, {}",
            orbit.period,
            orbit.points[0].re,
            orbit.points[0].im,
            orbit.multiplier.norm(),
            orbit.class.as_str()
        );
    }
    Ok(vec!["orbits.csv".into()])
}

fn cmd_stability(
    family_path: &Path,
    grid: &str,
    depth: usize,
    config: &RunConfig,
) -> Result<Vec<String>> {
    let family = MapFamily::from_file(family_path)?;
    let grid = GridSpec::parse(grid)?;
    let scan = stability::stability_scan(&family, grid, depth, 1 << 20)?;
    let field = &scan.hausdorff_field;
    let mut out = std::io::BufWriter::new(std::fs::File::create(config.out.join("stability.csv"))?);
    writeln!(out, "s_re,s_im,value,status,verdict")?;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let s = grid.node(ix, iy);
            let i = iy * grid.nx + ix;
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{},{}",
                s.re,
                s.im,
                field.values[i],
                field.status[i].as_str(),
                if scan.verdict[i] { "unstable-evidence" } else { "ok" }
            )?;
        }
    }
    drop(out);
    let flagged = scan.verdict.iter().filter(|v| **v).count();
    println!(
        "median neighbor distance {:.3e}, {flagged} node(s) with unstable evidence",
        scan.median_hausdorff
    );
    Ok(vec!["stability.csv".into()])
}

fn cmd_slice_check(
    family_path: &Path,
    grid: &str,
    depth: usize,
    base: &[String],
    config: &RunConfig,
) -> Result<Vec<String>> {
    let family = MapFamily::from_file(family_path)?;
    let grid = GridSpec::parse(grid)?;
    let atom: Vec<C64> = base
        .iter()
        .map(|t| parse_complex(t))
        .collect::<Result<_>>()?;
    if atom.len() != family.fiber_dim() {
        return Err(Error::InvalidConfig(format!(
            "fiber has dimension {}, base atom has {}",
            family.fiber_dim(),
            atom.len()
        )));
    }
    let current = slicing::build_current(&family, grid, &[atom], depth, 1 << 20)?;
    let mass = current.constant_mass()?;
    let center = C64::new(
        0.5 * (grid.re_min + grid.re_max),
        0.5 * (grid.im_min + grid.im_max),
    );
    let omega = move |s: C64| (-8.0 * (s - center).norm_sqr()).exp();
    let mut lines = vec![
        format!("mass = {mass:.17e}"),
        format!("support_radius = {:.17e}", current.support_radius()),
    ];
    let mut worst_rel = 0.0f64;
    for (name, psi) in slicing::test_functions() {
        let check = slicing::slice_formula_check(&current, |_, z| psi(z), omega);
        let rel = check.residual / check.scale.max(1e-300);
        worst_rel = worst_rel.max(rel);
        lines.push(format!(
            "formula[{name}]: lhs = {:.17e}, residual = {:.3e}",
            check.lhs, check.residual
        ));
        let (_, violations) = slicing::slice_psh_field(&current, |_, z| psi(z));
        lines.push(format!("submean[{name}]: {} violation(s)", violations.len()));
    }
    std::fs::write(config.out.join("slice-check.txt"), lines.join("\n") + "\n")?;
    println!(
        "slice mass {mass:.12}, worst relative formula residual {worst_rel:.3e}"
    );
    Ok(vec!["slice-check.txt".into()])
}

fn cmd_selftest() -> Result<Vec<String>> {
    let quadratic = MapFamily::parse(
        "kind = unicritical\ndegree = 2\nescape_radius = 7\nparam_domain = -2,1,-1.5,1.5\n",
    )?;
    let s = [C64::new(0.0, 0.0)];

    let base = equilibrium::default_base(&quadratic);
    let cloud =
        equilibrium::equilibrium_cloud(&quadratic, &s, 12, &base, &CloudOptions::default())?;
    let l1 = lyapunov::sum_via_jacobian(&quadratic, &s, &cloud)?;
    check("L_1(z^2) = log 2", (l1 - 2.0f64.ln()).abs() < 1e-3)?;

    let set = stability::periodic_points(&quadratic, &s, 1)?;
    check("z^2 has fixed points {0, 1}", set.orbits.len() == 2)?;

    let measure = stability::periodic_measure(&quadratic, &s, &set.orbits[1], 5, 1 << 20)?;
    check("periodic measure has 32 atoms", measure.len() == 32)?;

    let grid = GridSpec::parse("-1,1,-1,1,31")?;
    let field = crate::field::ScalarField::from_fn(grid, |z| z.norm_sqr());
    let current = bifurcation::ddc(&field);
    let h = grid.hx();
    let expect = (grid.nx - 2) as f64 * (grid.ny - 2) as f64 * 2.0 * h * h
        / std::f64::consts::PI;
    check(
        "ddc |s|^2 mass",
        (current.total_mass() - expect).abs() < 1e-10 * expect,
    )?;

    let slice_grid = GridSpec::parse("-0.1,0.1,-0.1,0.1,3")?;
    let current =
        slicing::build_current(&quadratic, slice_grid, &[vec![C64::new(2.0, 0.0)]], 6, 1 << 20)?;
    let mass = current.constant_mass()?;
    check("slice mass constant", (mass - 1.0).abs() < 1e-12)?;

    Ok(Vec::new())
}

fn check(label: &str, ok: bool) -> Result<()> {
    if ok {
        println!("selftest: {label}: ok");
        Ok(())
    } else {
        println!("selftest: {label}: FAILED");
        Err(Error::InvalidConfig(format!("selftest failed: {label}")))
    }
}
