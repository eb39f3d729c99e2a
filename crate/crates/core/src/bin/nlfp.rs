use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use nlfp::config;
use nlfp::output::{
    problem_header, write_field, write_manifest, write_series, write_snapshot, write_summary,
    write_trace, FileLog, RunManifest,
};
use nlfp::scenarios::{
    boundary_trace, k_label, k_sweep, run_confined, run_limit_problem, scenario, scenario_names,
    RunOptions, RunOutput, ScenarioConfig,
};
use nlfp::{Error, Result};

#[derive(Parser)]
#[command(name = "nlfp", version, about = "Confined nonlinear Fokker-Planck solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Registered scenario name.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<String>,
    /// TOML experiment file instead of a registered scenario.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    out: PathBuf,
    /// Also write the density at every observation time.
    #[arg(long)]
    snapshots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Limit problem plus one level k, or every configured level without --k.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<f64>,
    },
    /// Limit problem plus the integer levels k_min..=k_max.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k_min: u32,
        #[arg(long)]
        k_max: u32,
    },
    /// Bounded-domain problem only.
    Limit {
        #[command(flatten)]
        common: Common,
    },
    /// Parse and check an experiment file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    ListScenarios,
    /// Print the resolved TOML of a registered scenario.
    Show {
        #[arg(long)]
        scenario: String,
    },
}

fn resolve(src: &Source) -> Result<ScenarioConfig> {
    match (&src.scenario, &src.config) {
        (Some(name), _) => {
            let cfg = scenario(name)?;
            cfg.validate()?;
            Ok(cfg)
        }
        (None, Some(path)) => config::load(path),
        (None, None) => unreachable!("clap requires one source"),
    }
}

fn write_run(out: &RunOutput, dir: &Path, all_snapshots: bool, log: &mut FileLog) -> Result<()> {
    let header = problem_header(&out.problem);
    let mut h = header.clone();
    if out.k.is_some() {
        h.push(("buffer".into(), nlfp::output::fmt_f64(out.buffer)));
        h.push(("buffer_snapped".into(), out.buffer_snapped.to_string()));
    }
    write_series(&out.records, &h, &log.path(dir.join("series.csv")))?;
    write_field(
        &out.problem.grid,
        out.problem.potential.values(),
        "V",
        &h,
        &log.path(dir.join("potential.csv")),
    )?;
    write_snapshot(&out.initial, &h, &log.path(dir.join("initial.csv")))?;
    write_snapshot(&out.final_state, &h, &log.path(dir.join("final.csv")))?;
    if all_snapshots {
        for (n, s) in out.snapshots.iter().enumerate() {
            write_snapshot(s, &h, &log.path(dir.join(format!("snapshots/u_{n:04}.csv"))))?;
        }
    }
    if out.problem.grid.dim() == 2 {
        let tr = boundary_trace(&out.final_state, &out.omega)?;
        let th = vec![
            ("t".into(), nlfp::output::fmt_f64(out.final_state.t())),
            ("order".into(), "clockwise from (x_max, y_max); s = arc length along the boundary".into()),
        ];
        write_trace(&tr, &th, &log.path(dir.join("trace.csv")))?;
    }
    Ok(())
}

fn finish(cfg: &ScenarioConfig, command: &str, log: &FileLog, start: Instant) -> Result<()> {
    let manifest = RunManifest {
        scenario: cfg.name.clone(),
        command: command.into(),
        config: cfg.clone(),
        solver: cfg.solver_params(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files: log.entries()?,
    };
    write_manifest(&manifest, &log.root().join("manifest.json"))?;
    let text = config::to_toml(cfg)?;
    std::fs::write(log.root().join("config.toml"), text).map_err(|e| Error::io(log.root(), e))
}

/// Limit run, confined runs for `cfg.k_list`, summary and manifest.
fn sweep(cfg: &ScenarioConfig, common: &Common, command: &str) -> Result<()> {
    let start = Instant::now();
    let opts = RunOptions {
        keep_snapshots: common.snapshots,
        audit_energy: false,
    };
    let res = k_sweep(cfg, opts)?;
    let mut log = FileLog::new(&common.out);
    write_run(&res.limit, Path::new("limit"), common.snapshots, &mut log)?;
    let mut blowup = None;
    for (k, r) in &res.runs {
        match r {
            Ok(out) => write_run(out, Path::new(&k_label(*k)), common.snapshots, &mut log)?,
            Err(e) => {
                log::error!("k = {k}: {e}");
                if e.is_blowup() && blowup.is_none() {
                    blowup = Some(Error::Blowup {
                        t: f64::NAN,
                        detail: format!("k = {k}: {e}"),
                    });
                }
            }
        }
    }
    let header = vec![
        ("scenario".into(), cfg.name.clone()),
        ("t_final".into(), nlfp::output::fmt_f64(cfg.t_final)),
        ("norm".into(), "dx-weighted discrete L2 at t_final".into()),
    ];
    write_summary(&res.summary, &header, &log.path("summary.csv"))?;
    finish(cfg, command, &log, start)?;
    for row in &res.summary {
        println!(
            "k = {:>6}  l2_error_omega = {:<12}  l2_norm_outside = {:<12}  {}",
            row.k,
            row.l2_error_omega.map_or("-".into(), |v| format!("{v:.4e}")),
            row.l2_norm_outside.map_or("-".into(), |v| format!("{v:.4e}")),
            row.status
        );
    }
    if let Some(e) = blowup {
        return Err(e);
    }
    if let Some(Err(e)) = res.runs.into_iter().map(|(_, r)| r).find(|r| r.is_err()) {
        return Err(e);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ListScenarios => {
            for name in scenario_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Show { scenario: name } => {
            print!("{}", config::to_toml(&scenario(&name)?)?);
            Ok(())
        }
        Command::Validate { config: path } => {
            let cfg = config::load(&path)?;
            println!(
                "{}: ok ({}D, dx = {}, {} level(s))",
                cfg.name,
                cfg.dim,
                cfg.dx,
                cfg.k_list.len()
            );
            Ok(())
        }
        Command::Limit { common } => {
            let start = Instant::now();
            let cfg = resolve(&common.source)?;
            let opts = RunOptions {
                keep_snapshots: common.snapshots,
                audit_energy: false,
            };
            let out = run_limit_problem(&cfg, opts)?;
            let mut log = FileLog::new(&common.out);
            write_run(&out, Path::new("limit"), common.snapshots, &mut log)?;
            finish(&cfg, "limit", &log, start)
        }
        Command::Run { common, k } => {
            let mut cfg = resolve(&common.source)?;
            if let Some(k) = k {
                cfg.k_list = vec![k];
                cfg.validate()?;
            }
            if cfg.k_list.len() == 1 {
                let start = Instant::now();
                let opts = RunOptions {
                    keep_snapshots: common.snapshots,
                    audit_energy: false,
                };
                let limit = run_limit_problem(&cfg, RunOptions { keep_snapshots: true, ..opts })?;
                let out = run_confined(&cfg, cfg.k_list[0], Some(&limit.snapshots), opts)?;
                let mut log = FileLog::new(&common.out);
                write_run(&limit, Path::new("limit"), common.snapshots, &mut log)?;
                write_run(&out, Path::new(&out.label), common.snapshots, &mut log)?;
                finish(&cfg, "run", &log, start)
            } else {
                sweep(&cfg, &common, "run")
            }
        }
        Command::Sweep { common, k_min, k_max } => {
            let mut cfg = resolve(&common.source)?;
            if k_min > k_max {
                return Err(nlfp::ConfigError::at_key("k_min", format!("{k_min} exceeds k_max = {k_max}")).into());
            }
            cfg.k_list = (k_min..=k_max).map(f64::from).collect();
            cfg.validate()?;
            sweep(&cfg, &common, "sweep")
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_blowup() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
