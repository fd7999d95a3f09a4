use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use clap::{Parser, Subcommand};
use wlf_core::analysis::{error_series, pca_report, write_pca_csv};
use wlf_core::config::ExperimentConfig;
use wlf_core::io::{read_manifest, read_run, write_run, ERRORS_FILE, PCA_FILE};
use wlf_core::scheduler::RunRecord;
use wlf_core::Error;

/// Predicts particle-distribution dynamics with optimal-transport tangent
/// fields inside a projective-integration loop.
#[derive(Parser)]
#[command(name = "wlf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config (or several seeds of it).
    Run {
        config: PathBuf,
        /// Seed override; a comma list runs each seed into `<out>/seed_<s>`.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// W2 error of an approximate run against a control run.
    Compare { control: PathBuf, approx: PathBuf },
    /// Sorted-location PCA of a 1-D control run, with approximate runs
    /// projected into the same basis.
    Pca {
        control: PathBuf,
        approx: Vec<PathBuf>,
        /// Fit on control snapshots this many seconds apart. Defaults to the
        /// first approximate run's period, or every snapshot without one.
        #[arg(long)]
        fit_stride: Option<f64>,
    },
}

/// Exit 2: bad input (config, parse, missing or mismatched runs).
/// Exit 1: anything that went wrong while computing.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn usage(err: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            err: err.into(),
        }
    }

    fn runtime(err: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            err: err.into(),
        }
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::Io(_) => Failure::usage(e),
        _ => Failure::runtime(e),
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("WLF_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::usage(anyhow::anyhow!(
            "WLF_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(Failure::runtime)
}

fn run_one(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let record = cfg.execute().map_err(classify)?;
    let dir = Path::new(&cfg.out);
    write_run(dir, cfg, &record).map_err(Failure::runtime)?;
    println!(
        "{}: {} micro steps, {} snapshots",
        dir.display(),
        record.micro_steps_used,
        record.snapshots.len()
    );
    Ok(())
}

fn cmd_run(config: &Path, seeds: &[u64], out: Option<&Path>, jobs: usize) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(config).map_err(classify)?;
    if let Some(out) = out {
        cfg.out = out.to_string_lossy().into_owned();
    }
    match seeds {
        [] => run_one(&cfg),
        [s] => {
            cfg.seed = *s;
            run_one(&cfg)
        }
        _ => {
            let base = PathBuf::from(&cfg.out);
            let configs: Vec<ExperimentConfig> = seeds
                .iter()
                .map(|&s| {
                    let mut c = cfg.clone();
                    c.seed = s;
                    c.out = base
                        .join(format!("seed_{s}"))
                        .to_string_lossy()
                        .into_owned();
                    c
                })
                .collect();
            let next = AtomicUsize::new(0);
            let first_failure: Mutex<Option<Failure>> = Mutex::new(None);
            std::thread::scope(|scope| {
                for _ in 0..jobs.clamp(1, configs.len()) {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(c) = configs.get(i) else { break };
                        if let Err(f) = run_one(c) {
                            let mut slot = first_failure.lock().expect("no poisoned lock");
                            if slot.is_none() {
                                *slot = Some(f);
                            }
                        }
                    });
                }
            });
            match first_failure.into_inner().expect("no poisoned lock") {
                Some(f) => Err(f),
                None => Ok(()),
            }
        }
    }
}

fn load_run(dir: &Path) -> Result<RunRecord, Failure> {
    read_run(dir)
        .map(|(_, record)| record)
        .with_context(|| format!("cannot load run {}", dir.display()))
        .map_err(Failure::usage)
}

fn cmd_compare(control: &Path, approx: &Path) -> Result<(), Failure> {
    let c = load_run(control)?;
    let a = load_run(approx)?;
    if c.dim() != a.dim() || c.snapshots[0].cloud.len() != a.snapshots[0].cloud.len() {
        return Err(Failure::usage(anyhow::anyhow!(
            "runs do not match: {} particles in {}-D vs {} particles in {}-D",
            c.snapshots[0].cloud.len(),
            c.dim(),
            a.snapshots[0].cloud.len(),
            a.dim()
        )));
    }
    let series = error_series(&c, &a).map_err(|e| match e {
        Error::NoSharedTimes => Failure::usage(e),
        e => Failure::runtime(e),
    })?;
    let path = approx.join(ERRORS_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(Failure::runtime)?);
    series.write_csv(&mut w).map_err(Failure::runtime)?;
    w.flush().map_err(Failure::runtime)?;
    println!("max W2 {}", series.max());
    println!("final W2 {}", series.last());
    Ok(())
}

fn cmd_pca(control: &Path, approx: &[PathBuf], fit_stride: Option<f64>) -> Result<(), Failure> {
    let c = load_run(control)?;
    let runs = approx
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(bad) = std::iter::once(&c).chain(&runs).find(|r| r.dim() != 1) {
        return Err(Failure::usage(anyhow::anyhow!(
            "pca needs 1-D runs, got dimension {}",
            bad.dim()
        )));
    }
    // default: sample the control curve at the first approximate run's period
    let fit_stride = match (fit_stride, approx.first()) {
        (Some(s), _) => Some(s),
        (None, Some(dir)) => read_manifest(dir)
            .map_err(Failure::usage)?
            .config
            .schedule()
            .map_err(Failure::usage)?
            .map(|s| s.delta()),
        (None, None) => None,
    };
    let refs: Vec<&RunRecord> = runs.iter().collect();
    let report = pca_report(&c, &refs, fit_stride).map_err(Failure::runtime)?;
    let path = control.join(PCA_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(Failure::runtime)?);
    write_pca_csv(&report.all_points(), &mut w).map_err(Failure::runtime)?;
    w.flush().map_err(Failure::runtime)?;
    let ratio = report.basis.explained_ratio();
    println!("explained variance {:.4} {:.4}", ratio[0], ratio[1]);
    if let Some(a) = report.median_turning_angle() {
        println!("median turning angle {a:.2} deg");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Run {
            config,
            seed,
            out,
            jobs,
        } => cmd_run(config, seed, out.as_deref(), *jobs),
        Command::Compare { control, approx } => cmd_compare(control, approx),
        Command::Pca {
            control,
            approx,
            fit_stride,
        } => cmd_pca(control, approx, *fit_stride),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
