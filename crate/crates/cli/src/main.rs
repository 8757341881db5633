use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dlmnet::experiments::{run_beam_splitter, run_cnot_blocks, run_mzi, ExperimentConfig};
use dlmnet::netlist::parse_netlist;
use dlmnet::oracle;
use dlmnet::report::{emit_csv, ReportRow};
use dlmnet::{Alpha, OutputMode};
use num_complex::Complex64;

/// Event-by-event simulation of quantum interference with networks of
/// deterministic learning machines.
#[derive(Debug, Parser)]
#[command(name = "dlmnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Args)]
struct Opts {
    /// Learning parameter, 0 < alpha < 1.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Events per point.
    #[arg(long, global = true)]
    events: Option<usize>,
    #[arg(long, global = true, env = "DLMNET_SEED")]
    seed: Option<u64>,
    /// Replace the output machines by stochastic ones.
    #[arg(long, global = true)]
    stochastic: bool,
    /// Leading fraction of each point's events that is not counted.
    #[arg(long, global = true)]
    discard: Option<f64>,
    /// Write the CSV here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Draw fresh machines for every point.
    #[arg(long, global = true)]
    reinit_per_point: bool,
    /// Exit with status 1 unless every frequency lies within this distance
    /// of the quantum prediction.
    #[arg(long, global = true, value_name = "TOL")]
    check: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Beam splitter driven with random phase pairs.
    Bs {
        /// Probability of an event on input channel 0.
        #[arg(long, default_value_t = 0.5)]
        p0: f64,
        /// Number of random phase pairs.
        #[arg(long, default_value_t = 40)]
        pairs: usize,
    },
    /// Mach-Zehnder interferometer, sweeping the phase shift of arm 0.
    Mzi {
        #[arg(long, default_value_t = 0.0)]
        phi1: f64,
        #[arg(long, default_value_t = 10.0)]
        phi0_step: f64,
    },
    /// Hadamard-CNOT-Hadamard circuit for the four basis inputs.
    CnotCircuit {
        /// Events per basis input in a preceding, unreported pass.
        #[arg(long)]
        warmup: Option<usize>,
    },
    /// Run a network described by a netlist file.
    Run { netlist: PathBuf },
    /// Print quantum-theory predictions only.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    Bs {
        #[arg(long, default_value_t = 0.5)]
        p0: f64,
        #[arg(long, default_value_t = 0.0)]
        psi0: f64,
        #[arg(long, default_value_t = 0.0)]
        psi1: f64,
    },
    Mzi {
        #[arg(long, default_value_t = 0.0)]
        phi1: f64,
        #[arg(long, default_value_t = 10.0)]
        phi0_step: f64,
    },
    CnotCircuit,
}

enum Failure {
    Config(String),
    Check(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.to_string())
    }
}

fn config(opts: &Opts, base: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    let mut cfg = base;
    if let Some(a) = opts.alpha {
        cfg.alpha = Alpha::new(a)?;
    }
    if let Some(n) = opts.events {
        cfg.events_per_point = n;
    }
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if opts.stochastic {
        cfg.mode = OutputMode::Stochastic;
    }
    if let Some(d) = opts.discard {
        cfg.discard_fraction = d;
    }
    cfg.reinit_per_point |= opts.reinit_per_point;
    cfg.validate()?;
    Ok(cfg)
}

fn polar(r: f64, degrees: f64) -> Complex64 {
    Complex64::from_polar(r, degrees.to_radians())
}

fn real(v: f64) -> String {
    format!("{v:.6}")
}

fn oracle_csv(which: &OracleCommand) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match which {
        OracleCommand::Bs { p0, psi0, psi1 } => {
            if !(0.0..=1.0).contains(p0) {
                return Err(Failure::Config(format!("p0 = {p0} is not a probability")));
            }
            let (b0, b1) =
                oracle::bs_output(polar(p0.sqrt(), *psi0), polar((1.0 - p0).sqrt(), *psi1))?;
            w.write_record(["p_in", "psi0", "psi1", "p0", "p1"])?;
            w.write_record([*p0, *psi0, *psi1, b0.norm_sqr(), b1.norm_sqr()].map(real))?;
        }
        OracleCommand::Mzi { phi1, phi0_step } => {
            if !(*phi0_step > 0.0 && phi0_step.is_finite()) {
                return Err(Failure::Config(format!(
                    "phi0 step {phi0_step} must be positive"
                )));
            }
            w.write_record(["phi0", "phi1", "p0", "p1", "p2", "p3"])?;
            let n = (360.0 / phi0_step - 1e-9).ceil() as usize;
            for i in 0..n {
                let phi0 = i as f64 * phi0_step;
                let (c0, c1) = oracle::bs_output(polar(1.0, 0.0), polar(0.0, 0.0))?;
                let (b0, b1) = oracle::mzi_output(polar(1.0, 0.0), polar(0.0, 0.0), phi0, *phi1)?;
                w.write_record(
                    [
                        phi0,
                        *phi1,
                        c0.norm_sqr(),
                        c1.norm_sqr(),
                        b0.norm_sqr(),
                        b1.norm_sqr(),
                    ]
                    .map(real),
                )?;
            }
        }
        OracleCommand::CnotCircuit => {
            w.write_record(["qubit1", "qubit2", "p0", "p1", "p2", "p3"])?;
            for (q1, q2) in dlmnet::experiments::CNOT_TABLE_ORDER {
                let p = oracle::cnot_circuit_probabilities(q1, q2);
                let mut rec = vec![(q1 as u8).to_string(), (q2 as u8).to_string()];
                rec.extend(p.into_iter().map(real));
                w.write_record(&rec)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes)?)
}

fn check(rows: &[ReportRow], tol: f64) -> Result<(), Failure> {
    let mut worst: f64 = 0.0;
    for r in rows {
        let d = r.deviation.ok_or_else(|| {
            Failure::Config(format!("--check: `{}` has no quantum prediction", r.label))
        })?;
        worst = worst.max(d);
    }
    if worst <= tol {
        eprintln!("check passed: max deviation {worst:.6} <= {tol}");
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "check failed: max deviation {worst:.6} > {tol}"
        )))
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let opts = &cli.opts;
    let rows: Vec<ReportRow> = match &cli.command {
        Command::Oracle { which } => {
            if opts.check.is_some() {
                return Err(Failure::Config("--check needs a simulation".into()));
            }
            return write_out(opts, &oracle_csv(which)?);
        }
        Command::Bs { p0, pairs } => {
            let cfg = config(opts, ExperimentConfig::default())?;
            run_beam_splitter(&cfg, *p0, *pairs)?
                .iter()
                .map(Into::into)
                .collect()
        }
        Command::Mzi { phi1, phi0_step } => {
            let cfg = config(opts, ExperimentConfig::default())?;
            run_mzi(&cfg, *phi1, *phi0_step)?
                .iter()
                .map(Into::into)
                .collect()
        }
        Command::CnotCircuit { warmup } => {
            let base = ExperimentConfig {
                events_per_point: 200,
                discard_fraction: 0.5,
                ..Default::default()
            };
            let cfg = config(opts, base)?;
            let blocks: Vec<usize> = warmup
                .iter()
                .copied()
                .chain([cfg.events_per_point])
                .collect();
            let mut table = run_cnot_blocks(&cfg, &blocks)?;
            table
                .pop()
                .unwrap_or_default()
                .iter()
                .map(Into::into)
                .collect()
        }
        Command::Run { netlist } => {
            let text = fs::read_to_string(netlist)
                .map_err(|e| Failure::Config(format!("{}: {e}", netlist.display())))?;
            let doc = parse_netlist(&text)
                .map_err(|e| Failure::Config(format!("{}:{e}", netlist.display())))?;
            let cfg = config(opts, doc.config())?;
            doc.run(&cfg)?
        }
    };
    write_out(opts, &emit_csv(&rows)?)?;
    match opts.check {
        Some(tol) => check(&rows, tol),
        None => Ok(()),
    }
}

fn write_out(opts: &Opts, text: &str) -> Result<(), Failure> {
    match &opts.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
