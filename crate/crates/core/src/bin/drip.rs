use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drip::bccd::{drip_solve, SolveStatus};
use drip::experiments::{load_campaign, run_campaign};
use drip::metrics::MetricReport;
use drip::scenario::load_scenario;
use drip::signals::{lfm_chirp, CommBlock};
use drip::{array_model::Scene, DripError};

/// Design dual-function radar-communication waveforms.
#[derive(Parser)]
#[command(name = "drip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign and write its CSV files.
    Run {
        campaign: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Base seed; trial t uses seed + t.
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Solve one scenario and print its metrics.
    Solve {
        scenario: PathBuf,
        /// Also write the waveform, traces and residuals here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario `rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a scenario file without solving.
    Validate { scenario: PathBuf },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_TRIAL: u8 = 3;

fn fail(e: DripError) -> ExitCode {
    eprintln!("drip: {e}");
    ExitCode::from(if e.is_config_error() {
        EXIT_CONFIG
    } else if matches!(e, DripError::Io(_)) {
        EXIT_IO
    } else {
        EXIT_TRIAL
    })
}

fn run(
    campaign: &Path,
    out: PathBuf,
    seed: Option<u64>,
    trials: Option<usize>,
    threads: usize,
) -> ExitCode {
    let mut c = match load_campaign(campaign) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(s) = seed {
        c.base_seed = s;
    }
    if let Some(t) = trials {
        if t == 0 {
            return fail(DripError::Campaign("--trials must be positive".into()));
        }
        c.trials = t;
    }
    c.out_dir = out;
    match run_campaign(&c, threads) {
        Ok(r) => {
            println!(
                "{}: {} trials, {} converged, {} failed",
                c.name.name(),
                r.trials,
                r.converged,
                r.failures
            );
            for f in &r.files {
                println!("wrote {}", f.display());
            }
            if r.failures > 0 {
                ExitCode::from(EXIT_TRIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(e),
    }
}

fn solve(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let mut cfg = match load_scenario(path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let solved = CommBlock::draw(&cfg, cfg.rng_seed).and_then(|comm| {
        let x0 = lfm_chirp(&cfg);
        let res = drip_solve(&cfg, &comm, &x0)?;
        let scene = Scene::new(&cfg);
        let report = MetricReport::evaluate(
            res.waveform.matrix_form(),
            x0.vector_form().as_slice(),
            &comm,
            &res.beamformers,
            &scene,
        )?;
        Ok((res, report))
    });
    let (res, report) = match solved {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    println!("status = {}", res.status.name());
    println!("iterations = {}", res.iterations());
    println!(
        "objective = {:e}",
        res.objective_trace.last().copied().unwrap_or(f64::NAN)
    );
    println!("mui = {:e}", report.mui_energy);
    println!("sum_rate = {:.6}", report.sum_rate_bps_hz);
    println!("papr_db = {:.6}", report.papr_db);
    println!("similarity = {:.6}", report.similarity);
    for (q, s) in report.sinr_per_target_db.iter().enumerate() {
        println!("sinr_db_{q} = {s:.6}");
    }
    println!("max_residual = {:e}", res.max_residual());
    if let Some(dir) = out {
        if let Err(e) = res.write_bundle(&dir) {
            return fail(e.into());
        }
        println!("wrote {}", dir.display());
    }
    if res.status == SolveStatus::InnerFailure {
        ExitCode::from(EXIT_TRIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn validate(path: &Path) -> ExitCode {
    match load_scenario(path) {
        Ok(cfg) => {
            let scene = Scene::new(&cfg);
            println!(
                "ok: {} real unknowns, {} constraints",
                2 * scene.n_complex(),
                2 + scene.n_complex() + 1 + cfg.n_targets()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run {
            campaign,
            out,
            seed,
            trials,
            threads,
        } => run(&campaign, out, seed, trials, threads),
        Command::Solve {
            scenario,
            out,
            seed,
        } => solve(&scenario, out, seed),
        Command::Validate { scenario } => validate(&scenario),
    }
}
