//! Command-line front end: argument handling, run configuration and JSON reports.

pub mod args;
pub mod commands;
pub mod report;

use anyhow::{Context, Result};
use clap::Parser;
use torus_zeros::kernel::KernelConfig;
use torus_zeros::suites::default_tolerances;

use args::{parse_grid, parse_region, split_tolerances, Cli, Command};
use commands::{EvalArgs, Outcome};
use report::{RegionEcho, Report, RunConfig, SCHEMA_VERSION};

pub const THREADS_ENV: &str = "TORUS_ZEROS_THREADS";

const DEFAULT_REGION: [f64; 4] = [-1.0, 1.0, 0.1, 3.0];

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}='{v}' is not a thread count"))?;
        return Ok(n.max(1));
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Eval { .. } => "eval",
        Command::Verify { .. } => "verify",
        Command::Zeros { .. } => "zeros",
        Command::Trace { .. } => "trace",
        Command::HessianTable => "hessian-table",
    }
}

/// Builds the effective configuration with every default filled in.
pub fn run_config(cli: &Cli, overrides: &std::collections::BTreeMap<String, f64>) -> Result<RunConfig> {
    let [re_min, re_max, im_min, im_max] = match &cli.region {
        Some(r) => parse_region(r)?,
        None => DEFAULT_REGION,
    };
    let default_grid = match cli.command {
        Command::HessianTable => [16, 16],
        _ => [400, 400],
    };
    let grid = cli.grid.as_deref().map(parse_grid).transpose()?.unwrap_or(default_grid);
    let mut tolerances = default_tolerances();
    tolerances.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(RunConfig {
        region: RegionEcho { re_min, re_max, im_min, im_max },
        grid,
        tolerances,
        series_depth: KernelConfig::default().max_terms,
        thread_count: thread_count(cli.threads)?,
        output_dir: cli.out.as_ref().map(|p| p.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into()),
        seed: cli.seed.unwrap_or(0),
        format: cli.format,
    })
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::Eval { symbol, tau, z, k, c, level, expect } => commands::eval(
            &EvalArgs {
                symbol,
                tau,
                z: z.as_deref(),
                k: *k,
                c: c.as_deref(),
                level: *level,
                expect: expect.as_deref(),
            },
            cfg,
        ),
        Command::Verify { suite } => commands::verify(suite, cfg),
        Command::Zeros { k, c } => commands::zeros(*k, c, cfg),
        Command::Trace { curve } => commands::trace_cmd(curve, cfg),
        Command::HessianTable => commands::hessian_table(cfg),
    }
}

/// Runs one invocation. `args` includes the program name.
pub fn run(args: Vec<String>) -> Result<Report> {
    let (rest, overrides) = split_tolerances(args)?;
    let cli = Cli::try_parse_from(rest)?;
    let cfg = run_config(&cli, &overrides)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.thread_count).build()?;
    let out = pool.install(|| dispatch(&cli.command, &cfg))?;
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        command: command_name(&cli.command).into(),
        config_echo: cfg,
        records: out.records,
        pass: out.pass,
        summary: out.summary,
    })
}
