use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use loopflow::io::{self, TraceSigns};
use loopflow::sizing::GAS_VELOCITY_BAND;
use loopflow::topology::loop_basis;
use loopflow::units::m3s_to_m3h;
use loopflow::{
    optimize_diameters, solve, validate, Error, FluidKind, Method, Network, SizingConfig,
    SizingTermination, SolverConfig,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "loopflow", version, about = "Flow distribution in looped gas and water pipe networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a network file and report its size and loop count
    Check { network: PathBuf },
    /// Solve for the pipe flows
    Solve(SolveArgs),
    /// Keep flows fixed and size diameters until every loop balances
    Size(SizeArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    network: PathBuf,
    #[arg(long, default_value = "node-loop")]
    method: Method,
    /// Write the iteration trace as CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SignsArg::Relative)]
    trace_signs: SignsArg,
    /// Write the final flows as CSV (input for `size --flows`)
    #[arg(long)]
    flows_out: Option<PathBuf>,
    /// Report node pressures
    #[arg(long)]
    pressures: bool,
    #[arg(long, default_value_t = 4e5)]
    source_pressure_pa: f64,
    /// Defaults to the node with the largest supply
    #[arg(long)]
    source_node: Option<u32>,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
    /// m³/h
    #[arg(long, default_value_t = 0.01)]
    flow_tolerance: f64,
    /// Pa² for gas, Pa for water
    #[arg(long)]
    residual_tolerance: Option<f64>,
    /// Halve updates that grow the loop residual tenfold
    #[arg(long)]
    damping: bool,
    /// Start from a random feasible pattern instead of the file's
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignsArg {
    /// Each cell signed against the previous iteration's direction
    Relative,
    /// Each cell signed against the pipe orientation in the file
    Reference,
}

#[derive(clap::Args)]
struct SizeArgs {
    network: PathBuf,
    /// Fixed flows (CSV `pipe,flow_m3h`); solved with node-loop when omitted
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Diameter bounds in metres, `lower,upper`
    #[arg(long, value_parser = parse_bounds, default_value = "0.01,2.0")]
    bounds: (f64, f64),
    /// Write the diameters of every sweep as CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the network with the sized diameters
    #[arg(long)]
    network_out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[arg(long)]
    residual_tolerance: Option<f64>,
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lower,upper`")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("lower bound: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("upper bound: {e}"))?;
    if !(lo > 0.0 && lo < hi) {
        return Err("bounds must satisfy 0 < lower < upper".into());
    }
    Ok((lo, hi))
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
    /// Report printed to stdout before the error.
    output: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            Error::Invalid(_)
            | Error::Disconnected
            | Error::Loops(_)
            | Error::Parse(_)
            | Error::InfeasibleFlows { .. }
            | Error::MissingFlow(_)
            | Error::UnknownNode(_) => EXIT_VALIDATION,
            _ => EXIT_NO_CONVERGENCE,
        };
        Failure { code, message: e.to_string(), output: String::new() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
        output: String::new(),
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
        output: String::new(),
    })
}

fn load(path: &Path) -> Result<Network, Failure> {
    Ok(io::parse_network_str(&read(path)?)?)
}

fn residual_unit(kind: FluidKind) -> &'static str {
    match kind {
        FluidKind::Gas => "Pa^2",
        FluidKind::Water => "Pa",
    }
}

fn check(path: &Path) -> Result<String, Failure> {
    let net = io::parse_network_unchecked(&read(path)?)?;
    let violations = validate(&net);
    if !violations.is_empty() {
        let mut msg = String::from("invalid network:");
        for v in &violations {
            write!(msg, "\n  {v}").unwrap();
        }
        return Err(Failure { code: EXIT_VALIDATION, message: msg, output: String::new() });
    }
    let basis = loop_basis(&net)?;
    let mut out = format!(
        "{} pipes, {} nodes, {} loops\nconnected\nfluid: {}\n",
        net.pipes().len(),
        net.nodes().len(),
        basis.len(),
        net.fluid().kind()
    );
    if net.explicit_loops().is_none() {
        out.push_str("note: no loops given, loops will be derived\n");
    }
    Ok(out)
}

fn solve_cmd(args: &SolveArgs) -> Result<String, Failure> {
    let net = load(&args.network)?;
    let config = SolverConfig {
        method: args.method,
        flow_tolerance: args.flow_tolerance,
        residual_tolerance: args.residual_tolerance,
        max_iterations: args.max_iterations,
        damping: args.damping,
        initial: match args.seed {
            Some(s) => loopflow::InitialGuess::Seeded(s),
            None => loopflow::InitialGuess::Network,
        },
        source_pressure: args.pressures.then_some(args.source_pressure_pa),
        source_node: args.source_node.map(loopflow::NodeId),
        ..SolverConfig::default()
    };
    let report = solve(&net, &config)?;

    if let Some(path) = &args.trace {
        let signs = match args.trace_signs {
            SignsArg::Relative => TraceSigns::RelativeToPrevious,
            SignsArg::Reference => TraceSigns::Reference,
        };
        write(path, &io::trace_csv(&report, signs))?;
    }
    if let Some(path) = &args.flows_out {
        write(path, &io::flows_csv(report.final_flows()))?;
    }

    let mut out = String::new();
    writeln!(out, "method: {}", args.method).unwrap();
    writeln!(out, "termination: {}", report.termination).unwrap();
    writeln!(out, "iterations: {}", report.update_count()).unwrap();
    writeln!(
        out,
        "max loop residual: {:.3e} {}",
        report.max_final_loop_residual(),
        residual_unit(net.fluid().kind())
    )
    .unwrap();
    writeln!(out, "{:>6} {:>12} {:>12}", "pipe", "flow_m3h", "velocity_m_s").unwrap();
    for (pipe, q) in report.final_flows().iter() {
        writeln!(out, "{:>6} {:>12.2} {:>12.2}", pipe, m3s_to_m3h(q), report.velocities[&pipe]).unwrap();
    }
    if let Some(pressures) = &report.node_pressures {
        writeln!(out, "{:>6} {:>14}", "node", "pressure_pa").unwrap();
        for (node, p) in pressures {
            writeln!(out, "{:>6} {:>14.1}", node, p).unwrap();
        }
        let negative: Vec<String> = pressures.iter().filter(|(_, &p)| p < 0.0).map(|(n, _)| n.to_string()).collect();
        if !negative.is_empty() {
            writeln!(
                out,
                "warning: negative pressure at nodes {}; the source pressure is too low for these flows",
                negative.join(", ")
            )
            .unwrap();
        }
    }

    if report.converged() {
        Ok(out)
    } else {
        Err(Failure {
            code: EXIT_NO_CONVERGENCE,
            message: format!("solver stopped: {}", report.termination),
            output: out,
        })
    }
}

fn size_cmd(args: &SizeArgs) -> Result<String, Failure> {
    let net = load(&args.network)?;
    let basis = loop_basis(&net)?;
    let flows = match &args.flows {
        Some(path) => io::parse_flows_csv(&net, &read(path)?)?,
        None => {
            let r = solve(&net, &SolverConfig::default())?;
            if !r.converged() {
                return Err(Failure {
                    code: EXIT_NO_CONVERGENCE,
                    message: format!("flow solve stopped: {}", r.termination),
                    output: String::new(),
                });
            }
            r.final_flows().clone()
        }
    };
    let mut config = SizingConfig::new(flows);
    config.diameter_bounds = args.bounds;
    config.max_iterations = args.max_iterations;
    config.residual_tolerance = args.residual_tolerance;
    let report = optimize_diameters(&net, &basis, &config)?;

    if let Some(path) = &args.trace {
        let mut csv = String::from("pipe");
        for k in 1..=report.iterations.len() {
            write!(csv, ",{k}").unwrap();
        }
        csv.push('\n');
        for (i, p) in net.pipes().iter().enumerate() {
            write!(csv, "{}", p.id).unwrap();
            for ds in &report.iterations {
                write!(csv, ",{:.6}", ds[i]).unwrap();
            }
            csv.push('\n');
        }
        write(path, &csv)?;
    }
    if let Some(path) = &args.network_out {
        write(path, &io::network_to_string(&report.apply(&net)))?;
    }

    let unit = residual_unit(net.fluid().kind());
    let mut out = String::new();
    writeln!(out, "termination: {}", report.termination).unwrap();
    writeln!(out, "sweeps: {}", report.iterations.len() - 1).unwrap();
    writeln!(out, "{:>6} {:>14}", "pipe", "diameter_m").unwrap();
    for (pipe, d) in &report.diameters {
        let mut mark = "";
        if report.tree_pipes.contains(pipe) {
            mark = "  (in no loop, unchanged)";
        } else if report.at_bounds.contains(pipe) {
            mark = "  (at bound)";
        }
        writeln!(out, "{:>6} {:>14.9}{mark}", pipe, d).unwrap();
    }
    if let Some(res) = report.loop_residuals.last() {
        for (l, r) in res.iter().enumerate() {
            writeln!(out, "loop {} residual: {:.3e} {unit}", l + 1, r).unwrap();
        }
    }
    if !report.velocity_flags.is_empty() {
        let (lo, hi) = GAS_VELOCITY_BAND;
        writeln!(out, "velocity advisory ({lo}-{hi} m/s recommended):").unwrap();
        for (pipe, v) in &report.velocity_flags {
            writeln!(out, "  pipe {pipe}: {v:.2} m/s").unwrap();
        }
    }

    match report.termination {
        SizingTermination::Converged => Ok(out),
        t => Err(Failure {
            code: EXIT_NO_CONVERGENCE,
            message: format!("sizing stopped: {t}"),
            output: out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { network } => check(network),
        Command::Solve(args) => solve_cmd(args),
        Command::Size(args) => size_cmd(args),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            print!("{}", f.output);
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
