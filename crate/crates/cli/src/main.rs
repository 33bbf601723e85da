//! Command-line front end: single runs, Monte Carlo sweeps and paired
//! baseline-versus-virtual-target comparisons.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use vtguide_core::engagement::{run_engagement_observed, TrajectoryRecorder};
use vtguide_core::harness::{compare_cells, emit_reports, run_sweep, AggregateResult, CellResult, SweepSpec};
use vtguide_core::{run_engagement, EngagementConfig, PredictionMethod};

#[derive(Parser)]
#[command(name = "vtguide", version, about = "Many-vs-many missile engagement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one engagement.
    Run(RunArgs),
    /// Monte Carlo sweep over target counts, interceptor counts and methods.
    Sweep(SweepArgs),
    /// Paired straight-line versus virtual-target comparison.
    Compare(CompareArgs),
    /// Print the default configuration as TOML.
    Config,
}

/// Configuration file plus per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file; unspecified keys keep their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Trajectory samples per target (n_s).
    #[arg(long)]
    samples: Option<usize>,
    /// Prediction horizon points (n_t).
    #[arg(long)]
    horizon_steps: Option<usize>,
    /// Target maneuver amplitude bound, m/s².
    #[arg(long)]
    target_accel: Option<f64>,
    /// Simulation end time, s.
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    nav_gain: Option<f64>,
    /// Interceptor lateral acceleration limit, m/s².
    #[arg(long)]
    a_max: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<EngagementConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                EngagementConfig::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => EngagementConfig::default(),
        };
        if let Some(v) = self.samples {
            cfg.n_s = v;
        }
        if let Some(v) = self.horizon_steps {
            cfg.n_t = v;
        }
        if let Some(v) = self.target_accel {
            cfg.maneuver.a_lat_max_target = v;
        }
        if let Some(v) = self.t_max {
            cfg.t_max_s = v;
        }
        if let Some(v) = self.nav_gain {
            cfg.nav_gain = v;
        }
        if let Some(v) = self.a_max {
            cfg.a_max = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of targets (m).
    #[arg(long, short)]
    targets: Option<usize>,
    /// Number of interceptors (n).
    #[arg(long, short)]
    interceptors: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    method: Option<PredictionMethod>,
    /// Run seed; defaults to maneuver.rng_seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-step trajectory dump (CSV).
    #[arg(long)]
    traj_out: Option<PathBuf>,
    /// Full run result (JSON).
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Target counts, e.g. `1,2,4`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    targets: Vec<usize>,
    /// Interceptor counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    interceptors: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "straight_line,virtual_target")]
    methods: Vec<PredictionMethod>,
    /// Monte Carlo runs per cell.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "VTGUIDE_JOBS", default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, short, default_value_t = 2)]
    targets: usize,
    /// Interceptors for the virtual-target arm.
    #[arg(long, short, default_value_t = 5)]
    interceptors: usize,
    /// Interceptors for the straight-line arm; defaults to the target count.
    #[arg(long)]
    baseline_interceptors: Option<usize>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long, env = "VTGUIDE_JOBS", default_value_t = default_jobs())]
    jobs: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn parse_method(s: &str) -> Result<PredictionMethod, String> {
    s.parse().map_err(|e: vtguide_core::Error| e.to_string())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(m) = args.targets {
        cfg.m_targets = m;
    }
    if let Some(n) = args.interceptors {
        cfg.n_interceptors = n;
    }
    if let Some(method) = args.method {
        cfg.prediction_method = method;
    }
    let seed = args.seed.unwrap_or(cfg.maneuver.rng_seed);

    let result = match &args.traj_out {
        Some(path) => {
            let mut recorder = TrajectoryRecorder::new();
            let result = run_engagement_observed(&cfg, seed, &mut recorder)?;
            recorder.write_csv_file(path)?;
            result
        }
        None => run_engagement(&cfg, seed)?,
    };

    println!(
        "{} vs {} ({}), seed {}: {} hit(s), ended at {:.3} s",
        cfg.n_interceptors, cfg.m_targets, cfg.prediction_method, seed, result.hits, result.terminated_at_s
    );
    for h in &result.hit_records {
        println!(
            "  t={:8.3} s  interceptor {} -> target {}  miss {:.3} m",
            h.time_s, h.interceptor, h.target, h.miss_m
        );
    }
    if result.vt_undersubscribed {
        println!("  note: fewer interceptors than targets; VTs may lie between targets");
    }
    if let Some(path) = &args.json_out {
        let text = serde_json::to_string_pretty(&result)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn print_table(agg: &AggregateResult) {
    println!(
        "{:>3} {:>3} {:<15} {:>6} {:>7} {:>9} {:>17} {:>10}",
        "m", "n", "method", "runs", "hits", "fraction", "95% CI", "t_hit [s]"
    );
    for c in &agg.cells {
        match &c.error {
            Some(e) => println!("{:>3} {:>3} {:<15} FAILED: {e}", c.m, c.n, c.method.as_str()),
            None => println!(
                "{:>3} {:>3} {:<15} {:>6} {:>7} {:>9.4} [{:.4}, {:.4}] {:>10}",
                c.m,
                c.n,
                c.method.as_str(),
                c.runs,
                c.hits,
                c.fraction,
                c.ci_lo,
                c.ci_hi,
                c.mean_hit_time_s.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into())
            ),
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let spec = SweepSpec {
        m_values: args.targets,
        n_values: args.interceptors,
        methods: args.methods,
        n_mc: args.runs,
        base_seed: args.seed,
        base_config: args.config.load()?,
    };
    let agg = run_sweep(&spec, args.jobs)?;
    print_table(&agg);
    emit_reports(&agg, args.out_csv.as_deref(), args.out_json.as_deref())?;
    let failed = agg.failed_cells().count();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed");
    }
    Ok(failed == 0)
}

fn describe(label: &str, c: &CellResult) {
    println!(
        "{label:<28} {:>5}/{:<5} = {:.4}  95% CI [{:.4}, {:.4}]",
        c.hits, c.possible, c.fraction, c.ci_lo, c.ci_hi
    );
}

fn cmd_compare(args: CompareArgs) -> Result<bool> {
    let m = args.targets;
    let n_base = args.baseline_interceptors.unwrap_or(m);
    let base_config = args.config.load()?;
    let arms = [
        (n_base, PredictionMethod::StraightLine),
        (args.interceptors, PredictionMethod::VirtualTarget),
    ];
    let mut cells = Vec::new();
    let mut failed = false;
    for (n, method) in arms {
        let spec = SweepSpec {
            m_values: vec![m],
            n_values: vec![n],
            methods: vec![method],
            n_mc: args.runs,
            base_seed: args.seed,
            base_config: base_config.clone(),
        };
        let agg = run_sweep(&spec, args.jobs)?;
        let cell = agg.cells.into_iter().next().expect("one cell");
        if let Some(e) = &cell.error {
            eprintln!("{method} with n={n} failed: {e}");
            failed = true;
        }
        cells.push(cell);
    }
    if failed {
        return Ok(false);
    }
    let (base, vt) = (&cells[0], &cells[1]);
    describe(&format!("straight_line  m={m} n={n_base}"), base);
    describe(&format!("virtual_target m={m} n={}", args.interceptors), vt);
    let paired = compare_cells(vt, base)?;
    let overlap = vt.ci_lo <= base.ci_hi && base.ci_lo <= vt.ci_hi;
    println!(
        "paired runs: vt better {}, baseline better {}, ties {}; sign test p = {:.4}; CIs {}",
        paired.wins,
        paired.losses,
        paired.ties,
        paired.p_value,
        if overlap { "overlap" } else { "disjoint" }
    );
    if let Some(path) = &args.out_json {
        let doc = serde_json::json!({
            "baseline": base,
            "virtual_target": vt,
            "paired": paired,
            "base_seed": args.seed,
            "config": base_config,
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Config => {
            print!("{}", EngagementConfig::default().to_toml_string());
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

