//! `qfb` — run delayed-feedback preparation experiments, check the stability
//! certificate, and validate control Hamiltonians.

use anyhow::Context;
use clap::{Parser, Subcommand};
use qfb_core::{
    export_csv, max_stable_delay, preset, run_ensemble, search_feasible, validate_hamiltonians,
    ExperimentConfig, LmiProblem, SearchRanges,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qfb", version, about = "Delayed switching feedback for entangled-state preparation: trajectory ensembles, LMI stability checks, Hamiltonian validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded trajectory ensemble and export CSV results.
    Run {
        /// Named preset: fig1|fig2|fig3a|fig3b|fig4a|fig4b|fig5.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Flat key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to ./out or the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trajectory count override.
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Search the delay-dependent stability certificate at (tau, k).
    Lmi {
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        k: f64,
        /// Random starts for the feasibility search.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also bisect the largest certifiable delay for this gain.
        #[arg(long)]
        max_delay: bool,
        /// Bracket width for the max-delay bisection.
        #[arg(long, default_value_t = 0.05)]
        precision: f64,
    },
    /// Validate the structural conditions on the control Hamiltonians.
    Validate {
        /// Named preset: fig1|fig2|fig3a|fig3b|fig4a|fig4b|fig5.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Flat key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Random states per sampled family.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

fn load_config(
    preset_name: &Option<String>,
    config_path: &Option<PathBuf>,
) -> anyhow::Result<ExperimentConfig> {
    match (preset_name, config_path) {
        (Some(name), None) => Ok(preset(name)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            Ok(ExperimentConfig::parse(&text)?)
        }
        (None, None) => anyhow::bail!("provide either --preset NAME or --config FILE"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            preset,
            config,
            seed,
            out,
            trajectories,
        } => {
            let mut cfg = load_config(&preset, &config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(n) = trajectories {
                cfg.n_traj = n;
            }
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));

            let summary = run_ensemble(&cfg)?;
            let files = export_csv(&summary, &out_dir)?;
            let terminal = *summary.v_mean.last().unwrap_or(&f64::NAN);
            println!(
                "{} trajectories, horizon {}, terminal mean V = {:.6} ({:.2}s)",
                cfg.n_traj, cfg.horizon, terminal, summary.meta.wall_time_s
            );
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Lmi {
            tau,
            k,
            budget,
            seed,
            max_delay,
            precision,
        } => {
            let prob = LmiProblem::new(tau, k)?;
            let report = search_feasible(&prob, budget, &SearchRanges::default(), seed)?;
            if report.feasible {
                println!(
                    "feasible at tau = {tau}, k = {k}: max eigenvalue {:.6e} ({} evaluations)",
                    report.witness, report.evaluations
                );
                let c = report.candidate;
                println!(
                    "candidate: q = {:.6e}, r = {:.6e}, eps = {:.6e}, S = [{:.6e}, {:.6e}, {:.6e}]",
                    c.q, c.r, c.eps, c.s[0], c.s[1], c.s[2]
                );
            } else {
                println!(
                    "no certificate found within {} evaluations at tau = {tau}, k = {k}; \
                     best max eigenvalue {:.6e} (not a proof of infeasibility)",
                    report.evaluations, report.witness
                );
            }
            if max_delay {
                let bracket = max_stable_delay(k, precision, budget.max(500), seed)?;
                println!(
                    "largest certifiable delay for k = {k}: in [{:.4}, {:.4}] \
                     (monotonicity in tau assumed)",
                    bracket.feasible_tau, bracket.infeasible_tau
                );
            }
        }
        Command::Validate {
            preset,
            config,
            samples,
        } => {
            let cfg = load_config(&preset, &config)?;
            let spec = cfg.system()?;
            let report = validate_hamiltonians(&spec, samples)?;
            println!("hamiltonian validation passed");
            println!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = match err.downcast_ref::<qfb_core::Error>() {
                Some(e) => match e.category() {
                    "config" => 2,
                    "validation" => 3,
                    "numerical" => 4,
                    "infeasible" => 5,
                    "io" => 6,
                    _ => 1,
                },
                None => 1,
            };
            if let Some(e) = err.downcast_ref::<qfb_core::Error>() {
                eprintln!("error[{}]: {err:#}", e.category());
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}
