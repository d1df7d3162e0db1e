//! `kslab`: command line driver for the spectral chemotaxis laboratory.
//!
//! Exit codes: 0 on success (a run that ends with a blow-up flag still
//! exits 0, the flag is a valid scientific outcome), 2 on configuration
//! errors, 3 when a non-finite value is detected during a run.

mod config;
mod output;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{parse_length, ExperimentConfig, Initial};
use kslab_core::{
    build_domain, disk_constants, lp_norm, rate_table, simulate, threshold_sweep,
    verify_lemma_suite, Domain, LemmaSuite, SimState, SpectralField, SweepCell,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "kslab",
    version,
    about = "Spectral laboratory for chemotaxis dynamics on Neumann boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Neumann Laplacian spectrum of a box domain.
    Eig(EigArgs),
    /// Print the linearized decay rates for a domain and mass level.
    Rates(RatesArgs),
    /// Evolve the exact linearized flow and write its norm trace.
    Linear(RunArgs),
    /// Run the nonlinear solver, write a norm trace and a JSON summary.
    Simulate(RunArgs),
    /// Classify decay against growth over a grid of mass levels.
    Sweep(SweepArgs),
    /// Run a verification suite and write its pass/fail report.
    Verify(VerifyArgs),
    /// Print spectral constants of the disk of a given radius.
    Disk(DiskArgs),
}

#[derive(Args)]
struct DomainArgs {
    /// Spatial dimension, 1 or 2.
    #[arg(long)]
    dim: Option<usize>,
    /// Edge lengths, comma separated; accepts pi expressions such as 2pi
    /// or pi/2. A single value is used for every axis.
    #[arg(long = "L", value_name = "L1[,L2]")]
    lengths: Option<String>,
    /// Grid points per axis, comma separated; a single value is used for
    /// every axis.
    #[arg(long = "N", value_name = "N1[,N2]")]
    grid: Option<String>,
}

impl DomainArgs {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if let Some(dim) = self.dim {
            config.dim = dim;
        }
        if let Some(raw) = &self.lengths {
            let values = parse_float_list(raw)?;
            write_axes(&mut config.lengths, &values, config.dim, "--L")?;
        }
        if let Some(raw) = &self.grid {
            let values: Vec<usize> = raw
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| anyhow!("bad grid size {s:?}")))
                .collect::<Result<_>>()?;
            write_axes(&mut config.grid, &values, config.dim, "--N")?;
        }
        Ok(())
    }
}

fn parse_float_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| parse_length(s).map_err(|e| anyhow!(e)))
        .collect()
}

fn write_axes<T: Copy>(target: &mut [T; 2], values: &[T], dim: usize, flag: &str) -> Result<()> {
    match values.len() {
        1 => {
            target[0] = values[0];
            if dim == 2 {
                target[1] = values[0];
            }
        }
        n if n == dim => target[..dim].copy_from_slice(values),
        n => return Err(anyhow!("{flag} expects 1 or {dim} values, got {n}")),
    }
    Ok(())
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Relaxation flag for the chemical equation, 0 or 1.
    #[arg(long)]
    gamma: Option<u8>,
    /// Mean density level M (ignored for bump data, where the mass fixes it).
    #[arg(long = "M")]
    m: Option<f64>,
    /// Initial data kind: random, modes, or bump.
    #[arg(long)]
    initial: Option<String>,
    /// Sup-norm amplitude of random initial data.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Cosine mode list for --initial modes: entries "k1:amp" or
    /// "k1,k2:amp" separated by semicolons.
    #[arg(long)]
    modes: Option<String>,
    /// Bump center coordinates, comma separated; accepts pi expressions.
    #[arg(long = "bump-center")]
    bump_center: Option<String>,
    /// Bump width.
    #[arg(long = "bump-sigma")]
    bump_sigma: Option<f64>,
    /// Total mass of the bump density.
    #[arg(long = "bump-mass")]
    bump_mass: Option<f64>,
    /// RNG seed for random initial data.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt0: Option<f64>,
    #[arg(long = "dt-min")]
    dt_min: Option<f64>,
    #[arg(long = "output-dt")]
    output_dt: Option<f64>,
    #[arg(long = "cfl-safety")]
    cfl_safety: Option<f64>,
    /// Dealiasing rule: two_thirds or none.
    #[arg(long)]
    dealias: Option<String>,
    /// Time stepper: imex_cnab2 or imex_euler.
    #[arg(long)]
    scheme: Option<String>,
    /// Sup-norm level that flags a run as blowing up.
    #[arg(long = "blowup-linf-threshold")]
    blowup_linf_threshold: Option<f64>,
    /// Start of the decay fit window.
    #[arg(long = "fit-lo")]
    fit_lo: Option<f64>,
    /// End of the decay fit window (defaults to t_end).
    #[arg(long = "fit-hi")]
    fit_hi: Option<f64>,
    /// Comma-separated norm columns to fit in the summary.
    #[arg(long = "fit-labels")]
    fit_labels: Option<String>,
    /// Config file; keys present in the file override the flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl RunArgs {
    fn build_config(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        self.domain.apply(&mut config)?;
        if let Some(v) = self.gamma {
            config.gamma = v;
        }
        if let Some(v) = self.m {
            config.m = v;
        }
        if let Some(kind) = &self.initial {
            config.initial = match kind.as_str() {
                "random" => Initial::Random,
                "modes" => Initial::Modes,
                "bump" => Initial::Bump,
                other => return Err(anyhow!("unknown initial kind {other:?}")),
            };
        }
        if let Some(v) = self.epsilon {
            config.epsilon = v;
        }
        if let Some(raw) = &self.modes {
            let mut scratch = ExperimentConfig::default();
            scratch
                .apply_text(&format!("modes = \"{raw}\"\n"))
                .map_err(|e| anyhow!(e))?;
            config.modes = scratch.modes;
        }
        if let Some(raw) = &self.bump_center {
            let values = parse_float_list(raw)?;
            write_axes(&mut config.bump_center, &values, config.dim, "--bump-center")?;
        }
        if let Some(v) = self.bump_sigma {
            config.bump_sigma = v;
        }
        if let Some(v) = self.bump_mass {
            config.bump_mass = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.t_end {
            config.t_end = v;
        }
        if let Some(v) = self.dt0 {
            config.dt0 = v;
        }
        if let Some(v) = self.dt_min {
            config.dt_min = v;
        }
        if let Some(v) = self.output_dt {
            config.output_dt = v;
        }
        if let Some(v) = self.cfl_safety {
            config.cfl_safety = v;
        }
        if let Some(v) = &self.dealias {
            config
                .apply_text(&format!("dealias = \"{v}\"\n"))
                .map_err(|e| anyhow!(e))?;
        }
        if let Some(v) = &self.scheme {
            config
                .apply_text(&format!("scheme = \"{v}\"\n"))
                .map_err(|e| anyhow!(e))?;
        }
        if let Some(v) = self.blowup_linf_threshold {
            config.blowup_linf_threshold = Some(v);
        }
        if let Some(v) = self.fit_lo {
            config.fit_lo = v;
        }
        if let Some(v) = self.fit_hi {
            config.fit_hi = Some(v);
        }
        if let Some(raw) = &self.fit_labels {
            config.fit_labels = raw
                .split(',')
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            config.apply_text(&text).map_err(|e| anyhow!(e))?;
        }
        config.validate().map_err(|e| anyhow!(e))?;
        Ok(config)
    }
}

#[derive(Args)]
struct EigArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Number of spectrum entries to print.
    #[arg(long, default_value_t = 10)]
    count: usize,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Mean density level M.
    #[arg(long = "M", default_value_t = 1.0)]
    m: f64,
    /// Use this first eigenvalue instead of deriving it from the box.
    #[arg(long)]
    lambda1: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// Relaxation flag for the chemical equation, 0 or 1.
    #[arg(long)]
    gamma: Option<u8>,
    /// Mass grid: a comma list or an inclusive range lo:step:hi.
    #[arg(long = "M-grid", value_name = "GRID")]
    m_grid: String,
    /// Optional comma list of scale factors; each entry rescales every
    /// edge length and contributes one row of cells.
    #[arg(long = "L-grid", value_name = "SCALES")]
    l_grid: Option<String>,
    /// Sup-norm amplitude of the random perturbation.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt0: Option<f64>,
    #[arg(long = "output-dt")]
    output_dt: Option<f64>,
    /// Config file; keys present in the file override the flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name (poincare, lmint, lpq_heat, lpq_gamma0, lpq_gamma1,
    /// energy_gamma0, energy_gamma1) or "all".
    suite: String,
    /// Directory for the JSON report.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiskArgs {
    /// Disk radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eig(args) => cmd_eig(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Linear(args) => cmd_run(args, true),
        Command::Simulate(args) => cmd_run(args, false),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Disk(args) => cmd_disk(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn build_box(config: &ExperimentConfig) -> Result<Domain> {
    Ok(build_domain(
        config.dim,
        &config.lengths[..config.dim],
        &config.grid[..config.dim],
    )?)
}

fn build_state(config: &ExperimentConfig, domain: &Domain) -> Result<SimState> {
    let with_level = |u: SpectralField| -> Result<SimState> {
        Ok(match config.gamma {
            0 => SimState::gamma0(u, config.m)?,
            _ => SimState::gamma1(u, domain.zero_field(), config.m)?,
        })
    };
    match config.initial {
        Initial::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut u = SpectralField::random_smooth(domain, &mut rng);
            let sup = lp_norm(&u, f64::INFINITY)?;
            for c in u.coeffs_mut() {
                *c *= config.epsilon / sup;
            }
            with_level(u)
        }
        Initial::Modes => {
            let mut u = domain.zero_field();
            for &(k1, k2, amp) in &config.modes {
                let index = [k1, k2];
                let mode = SpectralField::mode(domain, &index[..config.dim], amp)?;
                for (c, extra) in u.coeffs_mut().iter_mut().zip(mode.coeffs()) {
                    *c += extra;
                }
            }
            with_level(u)
        }
        Initial::Bump => {
            let rho = kslab_core::gaussian_bump(
                domain,
                &config.bump_center[..config.dim],
                config.bump_sigma,
                config.bump_mass,
            )?;
            Ok(SimState::from_density(config.gamma, &rho, None)?)
        }
    }
}

fn cmd_run(args: RunArgs, linear: bool) -> Result<u8> {
    let mut config = args.build_config()?;
    if linear {
        config.linear_only = true;
    }
    let hash = config.hash();
    let domain = build_box(&config)?;
    let mut state = build_state(&config, &domain)?;
    let record = simulate(&mut state, &config.solver_config())?;

    let window = config.fit_window(record.final_t);
    let fits = output::fit_columns(&record, &config.fit_labels, window);
    let stem = if linear { "linear" } else { "norms" };
    let csv_path = args.out.join(format!("{stem}.csv"));
    let json_path = args.out.join(if linear {
        "linear_summary.json".to_string()
    } else {
        "summary.json".to_string()
    });
    output::atomic_write(&csv_path, output::norms_csv(&record, &hash, config.seed).as_bytes())?;
    let summary = output::summary_json(&record, &fits, &hash, config.seed);
    output::atomic_write(&json_path, summary.as_bytes())?;
    print!("{summary}");
    Ok(if record.nan_detected { 3 } else { 0 })
}

fn cmd_eig(args: EigArgs) -> Result<u8> {
    let mut config = ExperimentConfig::default();
    args.domain.apply(&mut config)?;
    config.validate().map_err(|e| anyhow!(e))?;
    let domain = build_box(&config)?;
    let spectrum = domain.spectrum();
    println!("lambda1 = {}", spectrum.lambda1);
    println!("index lambda");
    for pair in spectrum.entries.iter().take(args.count) {
        let index = &pair.index[..domain.dim()];
        let label: Vec<String> = index.iter().map(usize::to_string).collect();
        println!("({}) {}", label.join(","), pair.lambda);
    }
    Ok(0)
}

fn cmd_rates(args: RatesArgs) -> Result<u8> {
    let mut config = ExperimentConfig::default();
    args.domain.apply(&mut config)?;
    config.validate().map_err(|e| anyhow!(e))?;
    let lambda1 = match args.lambda1 {
        Some(v) => v,
        None => config.lengths[..config.dim]
            .iter()
            .map(|l| (PI / l) * (PI / l))
            .fold(f64::INFINITY, f64::min),
    };
    let rates = rate_table(lambda1, args.m)?;
    println!("lambda1   = {}", rates.lambda1);
    println!("M         = {}", rates.m);
    println!("threshold = {}", rates.threshold);
    println!("mu0       = {}", rates.mu0);
    println!("mu1       = {}", rates.mu1);
    println!("delta0    = {}", rates.delta0);
    Ok(0)
}

fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = raw.split(':').collect();
    match parts.as_slice() {
        [_] => raw
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| anyhow!("bad grid value {s:?}")))
            .collect(),
        [lo, step, hi] => {
            let lo: f64 = lo.trim().parse().map_err(|_| anyhow!("bad grid start {lo:?}"))?;
            let step: f64 = step.trim().parse().map_err(|_| anyhow!("bad grid step {step:?}"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| anyhow!("bad grid end {hi:?}"))?;
            if step <= 0.0 || step.is_nan() || hi < lo {
                return Err(anyhow!("grid range needs lo <= hi and step > 0"));
            }
            let count = ((hi - lo) / step + 1.0 + 1e-9).floor() as usize;
            Ok((0..count).map(|i| lo + step * i as f64).collect())
        }
        _ => Err(anyhow!("grid must be a comma list or lo:step:hi")),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let mut config = ExperimentConfig {
        t_end: 8.0,
        dt0: 2e-3,
        output_dt: 0.1,
        ..Default::default()
    };
    args.domain.apply(&mut config)?;
    if let Some(v) = args.gamma {
        config.gamma = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.t_end {
        config.t_end = v;
    }
    if let Some(v) = args.dt0 {
        config.dt0 = v;
    }
    if let Some(v) = args.output_dt {
        config.output_dt = v;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        config.apply_text(&text).map_err(|e| anyhow!(e))?;
    }
    config.validate().map_err(|e| anyhow!(e))?;

    let m_grid = parse_grid(&args.m_grid)?;
    let scales = match &args.l_grid {
        Some(raw) => parse_grid(raw)?,
        None => vec![1.0],
    };
    let mut domains = Vec::new();
    for &scale in &scales {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(anyhow!("--L-grid entries must be positive, got {scale}"));
        }
        let lengths: Vec<f64> = config.lengths[..config.dim].iter().map(|l| l * scale).collect();
        domains.push(build_domain(config.dim, &lengths, &config.grid[..config.dim])?);
    }

    let hash = config.hash();
    let cells = threshold_sweep(
        &domains,
        &m_grid,
        config.gamma,
        config.epsilon,
        &config.solver_config(),
        config.seed,
    )?;
    output::atomic_write(
        &args.out.join("sweep.csv"),
        output::sweep_csv(&cells, &hash, config.seed).as_bytes(),
    )?;
    let width = cells
        .iter()
        .map(|c| format!("{}", c.m).len())
        .max()
        .unwrap_or(1);
    for SweepCell { m, lambda1, volume, outcome, fitted_rate } in &cells {
        println!(
            "M = {m:<width$} lambda1 = {lambda1:.6} volume = {volume:.6} {}: rate {fitted_rate:.6}",
            outcome.as_str(),
        );
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    let suites: Vec<LemmaSuite> = if args.suite == "all" {
        LemmaSuite::ALL.to_vec()
    } else {
        vec![LemmaSuite::from_str(&args.suite)?]
    };
    let mut reports = Vec::new();
    let mut all_passed = true;
    for suite in suites {
        let report = verify_lemma_suite(suite)?;
        all_passed &= report.passed;
        println!("{}: {}", report.suite, if report.passed { "pass" } else { "FAIL" });
        for check in &report.checks {
            println!(
                "  [{}] {} (observed {:.6e}, bound {:.6e})",
                if check.passed { "ok" } else { "violated" },
                check.label,
                check.observed,
                check.bound,
            );
        }
        reports.push(json!({
            "suite": report.suite,
            "passed": report.passed,
            "checks": report.checks.iter().map(|c| json!({
                "label": c.label,
                "passed": c.passed,
                "observed": c.observed,
                "bound": c.bound,
            })).collect::<Vec<_>>(),
        }));
    }
    let mut text = serde_json::to_string_pretty(&json!({
        "config_hash": config::hash_text(&format!("suite = \"{}\"\n", args.suite)),
        "seed": kslab_core::SUITE_SEED,
        "passed": all_passed,
        "suites": reports,
    }))
    .expect("report serializes");
    text.push('\n');
    output::atomic_write(&args.out.join("verify.json"), text.as_bytes())?;
    println!("overall: {}", if all_passed { "pass" } else { "FAIL" });
    Ok(0)
}

fn cmd_disk(args: DiskArgs) -> Result<u8> {
    let constants = disk_constants(args.radius)?;
    println!("radius              = {}", constants.radius);
    println!("j1_prime_zero       = {}", constants.j1_prime_zero);
    println!("lambda1             = {}", constants.lambda1);
    println!("area                = {}", constants.area);
    println!("lambda1 * area      = {}", constants.lambda1_times_area);
    println!("8 pi                = {}", constants.critical_mass_8pi);
    println!(
        "lambda1 * area {} 8 pi",
        if constants.below_critical { "<" } else { ">=" }
    );
    Ok(0)
}
