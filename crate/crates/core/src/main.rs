use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ds2lab::blowup::{fit_blowup, DEFAULT_WINDOW};
use ds2lab::config::RunConfig;
use ds2lab::error::Result;
use ds2lab::harness::{configure_threads, exact_compare, run_experiment, write_exact_csv, ExactSolution};
use ds2lab::io::{read_series_csv, read_snapshot};
use ds2lab::profile::compare_with_lump;
use ds2lab::simplex::SimplexConfig;
use ds2lab::tracer::{axis_slice, fit_fourier_asymptotics, Axis, TracerConfig};

#[derive(Parser)]
#[command(name = "ds2lab", version, about = "Split-step spectral experiments for the focusing DS II equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run { config: PathBuf },
    /// Fit the blow-up law to the tail of a series file.
    Fit {
        series: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Fit the Fourier decay of a snapshot along one axis.
    Trace {
        snapshot: PathBuf,
        #[arg(long, default_value = "xi1")]
        axis: Axis,
        #[arg(long)]
        kmin: Option<f64>,
        #[arg(long)]
        kmax: Option<f64>,
    },
    /// Compare a snapshot's modulus with the rescaled lump.
    Profile { snapshot: PathBuf },
    /// Evolve and compare against a closed-form solution.
    Exact {
        config: PathBuf,
        #[arg(long)]
        solution: ExactSolution,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::from_file(&config)?;
            let report = run_experiment(&cfg)?;
            print!("{}", report.report.render());
            println!("output = {}", cfg.output_dir.display());
        }
        Command::Fit { series, window } => {
            let s = read_series_csv(&series)?;
            let fit = fit_blowup(&s.linf_series(), window, &SimplexConfig::default())?;
            println!("alpha = {}", fit.alpha);
            println!("gamma = {}", fit.gamma);
            println!("t_star = {}", fit.t_star);
            println!("residual = {}", fit.residual);
            println!("window = {}..{}", fit.window.0, fit.window.1);
        }
        Command::Trace { snapshot, axis, kmin, kmax } => {
            let (psi, meta) = read_snapshot(&snapshot)?;
            let grid = psi.grid().clone();
            let slice = axis_slice(&psi.forward_transform()?, axis)?;
            let cfg = TracerConfig::default();
            let (lo, hi) = cfg.k_window(&slice);
            let fit = fit_fourier_asymptotics(&slice, kmin.unwrap_or(lo), kmax.unwrap_or(hi), &cfg)?;
            println!("t = {}", meta.t);
            println!("mu = {}", fit.mu);
            println!("delta = {}", fit.delta);
            println!("k_range = {}..{}", fit.k_range.0, fit.k_range.1);
            println!("points = {}", fit.points_used);
            println!("rms = {}", fit.rms_residual);
            println!("m = {}", grid.m());
            println!("resolved = {}", fit.delta >= grid.m());
        }
        Command::Profile { snapshot } => {
            let (psi, meta) = read_snapshot(&snapshot)?;
            let (peak, frame, res) = compare_with_lump(&psi, meta.epsilon)?;
            println!("t = {}", meta.t);
            println!("peak.x = {}", peak.x0);
            println!("peak.y = {}", peak.y0);
            println!("peak.value = {}", peak.peak);
            println!("peak.multi = {}", peak.multi_peak);
            println!("L = {}", frame.l);
            println!("ratio = {}", res.ratio);
        }
        Command::Exact { config, solution } => {
            let cfg = RunConfig::from_file(&config)?;
            let cmp = exact_compare(&cfg, solution)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("exact_error.csv");
            write_exact_csv(&path, &cmp)?;
            println!("stop.reason = {}", cmp.stop.label());
            println!("records = {}", cmp.errors.len());
            println!("max_error = {}", cmp.max_error());
            println!("l2.max_drift = {}", cmp.series.max_l2_drift());
            println!("energy.max_abs_delta_e = {}", cmp.series.max_abs_delta_e());
            println!("output = {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads().and_then(|()| run(cli)) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
