//! Command-line front end for the platoon braking simulator.

mod config;
mod report;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::FileConfig;
use platoon_core::dynamics::{simulate_run_recorded, Mode};
use platoon_core::gains::{headway_lower_bound, region_boundary, region_check, PlantParams, TransferFunction};
use platoon_core::montecarlo::{compare_topologies, run_campaign, CampaignConfig, CampaignError, CampaignVariant};
use platoon_core::oracle::{mc_vs_oracle, OracleError, MAX_COMBINATIONS};
use platoon_core::stochastic::{derive_stream_seed, generate_matrix};
use report::{sig6, write_file, write_manifest};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_DIVERGED: u8 = 4;
const EXIT_VALIDATION: u8 = 5;

#[derive(Parser)]
#[command(
    name = "platoon-sim",
    version,
    about = "Collision-safety campaigns for vehicle platoons under emergency braking"
)]
struct Cli {
    /// Config file (TOML, or a manifest.toml from an earlier run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for campaign iterations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check controller gains and export admissible-region boundaries.
    Gains(GainsArgs),
    /// Run a Monte Carlo safety campaign over the deceleration sweep.
    Campaign(CampaignArgs),
    /// Validate the estimator against exact enumeration (small platoons).
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GainsArgs {
    /// Boundary points per segment.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Sweep axes, e.g. --sweep r=1,2,3,4 (keys: r, d).
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Vec<String>,
    /// Report infeasible gains as a warning instead of an error.
    #[arg(long)]
    allow_infeasible_gains: bool,
}

#[derive(Args)]
struct CampaignArgs {
    /// Override mc.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override mc.iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Sweep axes, e.g. --sweep d=2,4,6 --sweep r=1,2,3 (cross product).
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Vec<String>,
    /// Override scenario.mode.
    #[arg(long, value_parser = ["coordinated", "uncoordinated"])]
    mode: Option<String>,
    /// Run coordinated variants even when their gains fail the
    /// string-stability region check.
    #[arg(long)]
    allow_infeasible_gains: bool,
    /// Dump the first iteration's trajectories per sweep point (large).
    #[arg(long)]
    dump_trajectories: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Override mc.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override mc.iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Leader deceleration to validate at (default: the support maximum).
    #[arg(long)]
    d0: Option<f64>,
    /// Confidence parameter for the Hoeffding gate.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Maps error kinds onto the documented exit codes.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<CampaignError>() {
            return match c {
                CampaignError::RunFailed { .. } => EXIT_DIVERGED,
                _ => EXIT_CONFIG,
            };
        }
        if let Some(o) = cause.downcast_ref::<OracleError>() {
            return match o {
                OracleError::BudgetExceeded { .. } => EXIT_CONFIG,
                OracleError::BadScenario(_) => EXIT_CONFIG,
                OracleError::Campaign(CampaignError::RunFailed { .. }) => EXIT_DIVERGED,
                OracleError::Campaign(_) => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<Infeasible>().is_some() {
            return EXIT_INFEASIBLE;
        }
        if cause.downcast_ref::<ValidationFailed>().is_some() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_CONFIG
}

#[derive(Debug)]
struct Infeasible(String);

#[derive(Debug)]
struct ValidationFailed(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for Infeasible {}

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for ValidationFailed {}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let out_dir = cli
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    match cli.command {
        Command::Gains(args) => cmd_gains(&cfg, &out_dir, args),
        Command::Campaign(args) => cmd_campaign(&cfg, &out_dir, args),
        Command::Validate(args) => cmd_validate(&cfg, &out_dir, args),
    }
}

/// Parsed `--sweep` axes; the cross product of `r` and `d` values defines
/// the campaign variants.
struct SweepAxes {
    r: Vec<usize>,
    d: Vec<f64>,
}

fn parse_sweeps(specs: &[String], cfg: &FileConfig) -> Result<SweepAxes> {
    let mut axes = SweepAxes {
        r: vec![cfg.topology.predecessors],
        d: vec![cfg.platoon.standstill_m],
    };
    for spec in specs {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| anyhow!("--sweep expects KEY=V1,V2,..., got {spec:?}"))?;
        match key {
            "r" => {
                axes.r = values
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().context("r values must be integers"))
                    .collect::<Result<_>>()?;
                if axes.r.is_empty() || axes.r.contains(&0) {
                    bail!("--sweep r values must be positive integers");
                }
            }
            "d" => {
                axes.d = values
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().context("d values must be numbers"))
                    .collect::<Result<_>>()?;
                if axes.d.is_empty() || axes.d.iter().any(|&d| !d.is_finite() || d <= 0.0) {
                    bail!("--sweep d values must be positive");
                }
            }
            other => bail!("unknown sweep key {other:?} (expected r or d)"),
        }
    }
    Ok(axes)
}

fn cmd_gains(cfg: &FileConfig, out_dir: &Path, args: GainsArgs) -> Result<()> {
    let axes = parse_sweeps(&args.sweep, cfg)?;
    let tau0 = cfg.scenario.tau0_s;
    let mut outputs = Vec::new();
    let mut any_infeasible = false;

    for &r in &axes.r {
        let mut line = format!("r={r}: ");
        match headway_lower_bound(tau0, cfg.gains.ka, r) {
            Ok(bound) => {
                let _ = write!(line, "headway bound {} s; ", sig6(bound));
            }
            Err(e) => {
                any_infeasible = true;
                println!("{line}{e}");
                continue;
            }
        }
        match cfg.gain_set(r) {
            Ok(gains) => match region_check(&gains, tau0) {
                Ok(rep) => {
                    let verdict = if rep.feasible { "feasible" } else { "INFEASIBLE" };
                    any_infeasible |= !rep.feasible;
                    let _ = write!(
                        line,
                        "(kv={}, kp={}) {} margins=({}, {})",
                        sig6(gains.kv),
                        sig6(gains.kp),
                        verdict,
                        sig6(rep.margin1),
                        sig6(rep.margin2)
                    );
                    let tf = TransferFunction::new(&gains, &PlantParams::new(tau0, tau0)?);
                    let sweep = tf.hinf_check(1e4, 100_000);
                    let _ = write!(line, "; peak |rH| = {}", sig6(sweep.max_gain));
                }
                Err(e) => {
                    any_infeasible = true;
                    let _ = write!(line, "{e}");
                }
            },
            Err(e) => {
                any_infeasible = true;
                let _ = write!(line, "{e}");
            }
        }
        println!("{line}");

        match region_boundary(cfg.gains.ka, r, cfg.gains.headway_s, tau0, args.samples) {
            Ok(boundary) => {
                outputs.push(write_file(
                    out_dir,
                    &format!("region-r{r}.txt"),
                    &report::region_file(&boundary),
                )?);
            }
            Err(e) => {
                any_infeasible = true;
                println!("r={r}: admissible region is empty: {e}");
                outputs.push(write_file(out_dir, &format!("region-r{r}.txt"), "")?);
            }
        }
    }

    outputs.push(write_manifest(out_dir, "gains", &outputs.clone(), cfg)?);
    if any_infeasible && !args.allow_infeasible_gains {
        return Err(Infeasible(
            "configured gains are infeasible for at least one topology (pass --allow-infeasible-gains to continue)"
                .into(),
        )
        .into());
    }
    Ok(())
}

fn cmd_campaign(cfg: &FileConfig, out_dir: &Path, args: CampaignArgs) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = args.iterations {
        cfg.mc.iterations = n;
    }
    if let Some(mode) = &args.mode {
        cfg.scenario.mode = mode.clone();
    }
    let axes = parse_sweeps(&args.sweep, &cfg)?;
    let dist = cfg.distribution()?;
    let mode = cfg.mode()?;

    // Coordinated variants must hold the string-stability region unless
    // explicitly waived.
    if mode == Mode::Coordinated {
        for &r in &axes.r {
            let gains = cfg.gain_set(r)?;
            let rep = region_check(&gains, cfg.scenario.tau0_s)
                .map_err(|e| Infeasible(format!("r={r}: {e}")))?;
            if !rep.feasible {
                let msg = format!(
                    "r={r}: gains outside the admissible region (margins {}, {})",
                    sig6(rep.margin1),
                    sig6(rep.margin2)
                );
                if args.allow_infeasible_gains {
                    eprintln!("warning: {msg}");
                } else {
                    return Err(Infeasible(msg).into());
                }
            }
        }
    }

    let mut variants = Vec::new();
    let mut rows: Vec<(usize, f64, platoon_core::montecarlo::SafetyMetrics)> = Vec::new();
    let mut outputs = Vec::new();
    for &r in &axes.r {
        for &d in &axes.d {
            let base = cfg.scenario(r, d)?;
            let mut campaign = CampaignConfig::new(base.clone(), dist.clone(), cfg.mc.iterations, cfg.mc.seed);
            if let Some(sweep) = &cfg.mc.d0_sweep_mps2 {
                campaign.d0_sweep = sweep.clone();
            }
            let metrics = run_campaign(&campaign)?;
            if args.dump_trajectories {
                for (di, m) in metrics.iter().enumerate() {
                    let stream = derive_stream_seed(cfg.mc.seed, di as u64);
                    let matrix = generate_matrix(&dist, 1, base.followers, stream);
                    let mut scenario = base.clone();
                    scenario.leader_decel = m.d0;
                    let mut text = String::from("step,vehicle,x_m,v_mps,a_mps2,u_mps2,u_sat_mps2,frozen\n");
                    simulate_run_recorded(&scenario, matrix.row(0), &mut |rec| {
                        let _ = writeln!(
                            text,
                            "{},{},{},{},{},{},{},{}",
                            rec.step,
                            rec.vehicle,
                            sig6(rec.x),
                            sig6(rec.v),
                            sig6(rec.a),
                            sig6(rec.u),
                            sig6(rec.u_sat),
                            rec.frozen as u8
                        );
                    })
                    .map_err(|e| anyhow!("trajectory run failed: {e}"))?;
                    outputs.push(write_file(
                        out_dir,
                        &format!("trajectories-r{r}-d{d}-D0-{di}.csv"),
                        &text,
                    )?);
                }
            }
            for m in &metrics {
                rows.push((r, d, *m));
            }
            variants.push(CampaignVariant {
                predecessors: r,
                standstill_m: d,
                metrics,
            });
        }
    }

    let row_refs: Vec<(usize, f64, &platoon_core::montecarlo::SafetyMetrics)> =
        rows.iter().map(|(r, d, m)| (*r, *d, m)).collect();
    let results = report::results_csv(&row_refs);
    print!("{results}");
    outputs.push(write_file(out_dir, "results.csv", &results)?);

    if variants.len() > 1 {
        let table = compare_topologies(variants)?;
        outputs.push(write_file(out_dir, "comparison.csv", &report::comparison_csv(&table))?);
    }
    write_manifest(out_dir, "campaign", &outputs, &cfg)?;
    Ok(())
}

fn cmd_validate(cfg: &FileConfig, out_dir: &Path, args: ValidateArgs) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
    }
    if let Some(n) = args.iterations {
        cfg.mc.iterations = n;
    }
    let dist = cfg.distribution()?;
    let combos = (dist.len() as u128).saturating_pow(cfg.platoon.followers as u32);
    if combos > MAX_COMBINATIONS {
        return Err(OracleError::BudgetExceeded { combinations: combos })
            .context("validation needs a small platoon (try platoon.followers <= 5)")?;
    }
    let base = cfg.scenario(cfg.topology.predecessors, cfg.platoon.standstill_m)?;
    let d0 = args.d0.unwrap_or_else(|| dist.upper());
    let report = mc_vs_oracle(&base, &dist, d0, cfg.mc.iterations, cfg.mc.seed, args.delta)?;

    let mut text = String::new();
    let _ = writeln!(text, "exact vs Monte Carlo at D0 = {} m/s^2", sig6(d0));
    let _ = writeln!(
        text,
        "  combinations enumerated: {}",
        report.exact.combinations
    );
    let _ = writeln!(
        text,
        "  P_exact = {}  P_mc = {}  |err| = {}",
        sig6(report.exact.p_collision),
        sig6(report.mc.p_collision),
        sig6(report.err_p)
    );
    let _ = writeln!(
        text,
        "  N_exact = {}  N_mc = {}  |err|/N = {}",
        sig6(report.exact.expected_collisions),
        sig6(report.mc.expected_collisions),
        sig6(report.err_collisions_normalized)
    );
    let _ = writeln!(
        text,
        "  S_sum_exact = {}  S_sum_mc = {}  |err| = {}",
        sig6(report.exact.severity_sum),
        sig6(report.mc.severity_sum),
        sig6(report.err_severity_sum)
    );
    let _ = writeln!(
        text,
        "  Hoeffding half-width at n = {}, delta = {}: {}",
        cfg.mc.iterations,
        args.delta,
        sig6(report.epsilon)
    );
    let _ = writeln!(text, "  verdict: {}", if report.passed { "PASS" } else { "FAIL" });
    print!("{text}");
    let out = write_file(out_dir, "validation.txt", &text)?;
    write_manifest(out_dir, "validate", &[out], &cfg)?;
    if !report.passed {
        return Err(ValidationFailed(format!(
            "estimator error exceeds the Hoeffding bound: err_p = {}, bound = {}",
            sig6(report.err_p),
            sig6(report.epsilon)
        ))
        .into());
    }
    Ok(())
}
