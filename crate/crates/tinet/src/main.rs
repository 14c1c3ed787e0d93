use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use tinet::certify::{
    check_dissipativity, check_dissipativity_tabulated, check_negative_imaginary,
    check_passivity, check_positive_real, lyapunov_storage_at, solve_storage, CertificationReport,
    LyapunovRhs, OmegaSweep, SupplySpec, OMEGA_SWEEP_MAX, PSD_TOL,
};
use tinet::error::{Error, Result};
use tinet::modelfile::{
    export_model_file, parse_model_path, to_canonical_json, ParsedModel, StorageChoice,
};
use tinet::phonon::{
    dispersion, longwave_analysis, phase_velocity_sup, write_dispersion_csv, DISPERSION_CLAMP_TOL,
    PhaseVelocityWitness, SPHERE_SAMPLES,
};
use tinet::simulate::{
    phonon_wave_check, InputSignal, PulseInput, SineInput, TruncatedNetwork, ZeroInput,
};
use tinet::spectral::spectral_abscissa;
use tinet::stencil::circulant_frequencies;
use tinet::TorusGrid;

/// Analysis of translation-invariant networks of coupled linear systems:
/// operator norms, stability sweeps, energy-based certificates, phonon
/// dispersion, and time-domain simulation on periodic truncations.
#[derive(Parser)]
#[command(name = "tinet", version, about)]
struct Cli {
    /// Torus grid points per axis (default: 64 for nu <= 2, 16 beyond)
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Base tolerance for eigenvalue checks, scaled per point by
    /// 1 + matrix norm
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Worker threads for grid sweeps (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Dissipative,
    Passive,
    PositiveReal,
    NegativeImaginary,
}

#[derive(Subcommand)]
enum Command {
    /// Certify an energy property; exit 0 if it holds, 2 if it fails
    Certify {
        model: PathBuf,
        #[arg(long, value_enum)]
        property: PropertyArg,
        /// Largest |omega| of the frequency sweep
        #[arg(long, default_value_t = OMEGA_SWEEP_MAX)]
        omega_max: f64,
        /// Also write the report JSON to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phonon dispersion surface with phase-velocity and long-wave summary
    Dispersion {
        model: PathBuf,
        /// Write the surface CSV to this path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the network on a periodic truncation
    Simulate {
        model: PathBuf,
        /// Lattice period per axis
        #[arg(long = "L", default_value_t = 16)]
        period: usize,
        #[arg(long = "t-end", default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// zero | pulse | sine | phonon:K[,K...],BRANCH
        #[arg(long, default_value = "zero")]
        input: String,
        /// Input amplitude for pulse/sine/phonon
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// Lattice site receiving pulse/sine input (flat index)
        #[arg(long, default_value_t = 0)]
        site: usize,
        /// Input channel at that site
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Pulse window start
        #[arg(long = "t-on", default_value_t = 0.0)]
        t_on: f64,
        /// Pulse window end (sine: switch-off time, 0 = never)
        #[arg(long = "t-off", default_value_t = 1.0)]
        t_off: f64,
        /// Sine angular frequency
        #[arg(long, default_value_t = 1.0)]
        freq: f64,
        /// Write the trace CSV to this path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump the full state trajectory (binary + JSON sidecar)
        #[arg(long)]
        dump_state: Option<PathBuf>,
    },
    /// L2-induced operator norms of the four stencils
    Norms { model: PathBuf },
    /// Canonical explicit-form model JSON
    Export {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Certify { model, property, omega_max, out } => {
            cmd_certify(cli, model, *property, *omega_max, out.as_deref())
        }
        Command::Dispersion { model, out } => cmd_dispersion(cli, model, out.as_deref()),
        Command::Simulate {
            model,
            period,
            t_end,
            dt,
            input,
            amplitude,
            site,
            channel,
            t_on,
            t_off,
            freq,
            out,
            dump_state,
        } => cmd_simulate(
            cli,
            model,
            *period,
            *t_end,
            *dt,
            input,
            SignalParams {
                amplitude: *amplitude,
                site: *site,
                channel: *channel,
                t_on: *t_on,
                t_off: *t_off,
                freq: *freq,
            },
            out.as_deref(),
            dump_state.as_deref(),
        ),
        Command::Norms { model } => cmd_norms(cli, model),
        Command::Export { model, out } => cmd_export(model, out.as_deref()),
    }
}

fn grid_for(cli: &Cli, dim_nu: usize) -> Result<TorusGrid> {
    match cli.grid {
        Some(p) => TorusGrid::new(dim_nu, p),
        None => TorusGrid::default_for(dim_nu),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(())
}

fn cmd_certify(
    cli: &Cli,
    model_path: &Path,
    property: PropertyArg,
    omega_max: f64,
    out: Option<&Path>,
) -> Result<u8> {
    let parsed = parse_model_path(model_path)?;
    let model = &parsed.model;
    let grid = grid_for(cli, model.dim_nu())?;
    let tol = cli.tol.unwrap_or(PSD_TOL);
    let supply_or_identity = || -> Result<SupplySpec> {
        match &parsed.supply {
            Some(s) => Ok(s.clone()),
            None => {
                if model.input_dim() != model.output_dim() {
                    return Err(Error::InvalidArgument(
                        "no supply in the model file and r != m, so the identity default does not apply"
                            .into(),
                    ));
                }
                SupplySpec::identity(model.dim_nu(), model.input_dim())
            }
        }
    };
    let report: CertificationReport = match property {
        PropertyArg::Dissipative => {
            let supply = supply_or_identity()?;
            match &parsed.storage {
                Some(StorageChoice::Spec(storage)) => {
                    check_dissipativity(model, storage, &supply, &grid, tol)?
                }
                Some(StorageChoice::Lyapunov) => {
                    let (table, _) = solve_storage(model, &LyapunovRhs::Identity, &grid)?;
                    check_dissipativity_tabulated(model, &supply, &table, tol)?
                }
                None => {
                    return Err(Error::InvalidArgument(
                        "dissipativity needs a storage in the model file (a V stencil or \"lyapunov\")"
                            .into(),
                    ))
                }
            }
        }
        PropertyArg::Passive => {
            let supply = supply_or_identity()?;
            let sweep = OmegaSweep::log_symmetric(omega_max);
            check_passivity(model, &supply, &grid, &sweep, tol)?
        }
        PropertyArg::PositiveReal => {
            let sweep = OmegaSweep::log_symmetric(omega_max);
            check_positive_real(model, &grid, &sweep, tol)?
        }
        PropertyArg::NegativeImaginary => {
            let sweep = OmegaSweep::log_nonnegative(omega_max);
            check_negative_imaginary(model, &grid, &sweep, tol)?
        }
    };
    emit(out, &report.to_json())?;
    Ok(if report.verdict { 0 } else { 2 })
}

fn cmd_dispersion(cli: &Cli, model_path: &Path, out: Option<&Path>) -> Result<u8> {
    let parsed = parse_model_path(model_path)?;
    let Some(spec) = parsed.hamiltonian else {
        return Err(Error::InvalidArgument(
            "dispersion requires a Hamiltonian preset or (M,K) spec".into(),
        ));
    };
    let grid = grid_for(cli, spec.dim_nu())?;
    let tol = cli.tol.unwrap_or(DISPERSION_CLAMP_TOL);
    let surface = dispersion(&spec, &grid, tol)?;
    if let Some(path) = out {
        let file = std::fs::File::create(path)?;
        write_dispersion_csv(&surface, std::io::BufWriter::new(file))?;
    }
    let velocity = phase_velocity_sup(&spec, &grid)?;
    let longwave = longwave_analysis(&spec, SPHERE_SAMPLES)?;
    eprintln!(
        "dispersion: {} nodes, {} branches; phase velocity sup {:.6e} ({}); {}",
        grid.node_count(),
        spec.dof(),
        velocity.value,
        match &velocity.witness {
            PhaseVelocityWitness::LongWaveLimit => "long-wave limit".to_string(),
            PhaseVelocityWitness::GridNode(sigma) => format!("at sigma = {sigma:?}"),
        },
        velocity.detail,
    );
    let summary = serde_json::json!({
        "grid": grid,
        "branches": spec.dof(),
        "phase_velocity_sup": {
            "value": velocity.value,
            "grid_value": velocity.grid_value,
            "longwave_speed": velocity.longwave_speed,
            "witness": match &velocity.witness {
                PhaseVelocityWitness::LongWaveLimit => serde_json::json!("longwave_limit"),
                PhaseVelocityWitness::GridNode(sigma) => serde_json::json!(sigma),
            },
            "hypotheses_met": velocity.hypotheses_met,
            "detail": velocity.detail,
        },
        "longwave": {
            "sum_zero_residual": longwave.sum_zero_residual,
            "second_moment": longwave.second_moment,
            "longwave_speed": longwave.longwave_speed,
        },
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialization"));
    Ok(0)
}

struct SignalParams {
    amplitude: f64,
    site: usize,
    channel: usize,
    t_on: f64,
    t_off: f64,
    freq: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cli: &Cli,
    model_path: &Path,
    period: usize,
    t_end: f64,
    dt: f64,
    input: &str,
    signal: SignalParams,
    out: Option<&Path>,
    dump_state: Option<&Path>,
) -> Result<u8> {
    let parsed = parse_model_path(model_path)?;
    let model = parsed.model.clone();

    if let Some(rest) = input.strip_prefix("phonon:") {
        return cmd_simulate_phonon(&parsed, rest, period, t_end, dt, signal.amplitude, out, dump_state);
    }

    let mut tn = TruncatedNetwork::new(model.clone(), period)?;
    match &parsed.storage {
        None => {}
        Some(StorageChoice::Spec(storage)) => tn = tn.with_storage(storage)?,
        Some(StorageChoice::Lyapunov) => {
            let grid = grid_for(cli, model.dim_nu())?;
            let stability = spectral_abscissa(&model, &grid)?;
            if !stability.hurwitz {
                return Err(Error::PreconditionViolation(format!(
                    "\"lyapunov\" storage needs a Hurwitz model; abscissa {:.6e}",
                    stability.abscissa
                )));
            }
            let freqs = circulant_frequencies(model.dim_nu(), period);
            let symbols = lyapunov_storage_at(&model, &LyapunovRhs::Identity, &freqs)?;
            tn = tn.with_storage_symbols(&symbols)?;
        }
    }
    if let Some(supply) = &parsed.supply {
        if supply.is_static() {
            tn = tn.with_supply(supply)?;
        } else {
            return Err(Error::InvalidArgument(
                "trace instrumentation supports static supplies only".into(),
            ));
        }
    }

    let input_len = tn.input_len();
    let flat_index = signal.site * model.input_dim() + signal.channel;
    let signal_box: Box<dyn InputSignal> = match input {
        "zero" => Box::new(ZeroInput::new(input_len)),
        "pulse" => Box::new(PulseInput::new(
            input_len,
            flat_index,
            signal.amplitude,
            signal.t_on,
            signal.t_off,
        )?),
        "sine" => Box::new(SineInput::new(
            input_len,
            flat_index,
            signal.amplitude,
            signal.freq,
            (signal.t_off > 0.0).then_some(signal.t_off),
        )?),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown input \"{other}\"; use zero, pulse, sine, or phonon:K,BRANCH"
            )))
        }
    };

    let x0 = DVector::zeros(tn.state_len());
    let trace = tn.integrate(&x0, signal_box.as_ref(), t_end, dt)?;
    write_trace_outputs(&trace, out, dump_state)?;
    let work = trace.cumulative_work();
    let summary = serde_json::json!({
        "samples": trace.len(),
        "period": period,
        "dt": dt,
        "t_end": t_end,
        "final": {
            "x_norm": trace.states.last().map(|x| x.norm()),
            "y_norm": trace.outputs.last().map(|y| y.norm()),
            "hamiltonian": trace.hamiltonian.last(),
            "cumulative_work": work.last(),
        },
        "max_supply": trace.supply.iter().cloned().fold(0.0f64, f64::max),
        "min_cumulative_work": work.iter().cloned().fold(f64::INFINITY, f64::min),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialization"));
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate_phonon(
    parsed: &ParsedModel,
    spec_str: &str,
    period: usize,
    t_end: f64,
    dt: f64,
    amplitude: f64,
    out: Option<&Path>,
    dump_state: Option<&Path>,
) -> Result<u8> {
    let parts: Vec<&str> = spec_str.split(',').collect();
    if parts.len() < 2 {
        return Err(Error::InvalidArgument(
            "phonon input needs at least one wave index and a branch: phonon:K[,K...],BRANCH".into(),
        ));
    }
    let (k_parts, branch_part) = parts.split_at(parts.len() - 1);
    let k_index: std::result::Result<Vec<i64>, _> =
        k_parts.iter().map(|p| p.trim().parse::<i64>()).collect();
    let k_index = k_index
        .map_err(|e| Error::InvalidArgument(format!("phonon wave index: {e}")))?;
    let branch: usize = branch_part[0]
        .trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("phonon branch: {e}")))?;
    let report =
        phonon_wave_check(&parsed.model, period, &k_index, branch, amplitude, t_end, dt)?;
    write_trace_outputs(&report.trace, out, dump_state)?;
    let summary = serde_json::json!({
        "sigma": report.sigma,
        "omega": report.omega,
        "eigen_residual": report.eigen_residual,
        "max_relative_residual": report.max_relative_residual,
        "samples": report.trace.len(),
    });
    eprintln!(
        "phonon check: omega {:.6}, plane-wave residual {:.3e}",
        report.omega, report.max_relative_residual
    );
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialization"));
    Ok(0)
}

fn write_trace_outputs(
    trace: &tinet::simulate::SimulationTrace,
    out: Option<&Path>,
    dump_state: Option<&Path>,
) -> Result<()> {
    if let Some(path) = out {
        let file = std::fs::File::create(path)?;
        trace.write_csv(std::io::BufWriter::new(file))?;
    }
    if let Some(path) = dump_state {
        trace.write_state_binary(path)?;
    }
    Ok(())
}

fn cmd_norms(cli: &Cli, model_path: &Path) -> Result<u8> {
    let parsed = parse_model_path(model_path)?;
    let model = &parsed.model;
    let grid = grid_for(cli, model.dim_nu())?;
    let report = serde_json::json!({
        "grid": grid,
        "a": model.a().operator_norm(&grid)?,
        "b": model.b().operator_norm(&grid)?,
        "c": model.c().operator_norm(&grid)?,
        "d": model.d().operator_norm(&grid)?,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("norms serialization"));
    Ok(0)
}

fn cmd_export(model_path: &Path, out: Option<&Path>) -> Result<u8> {
    let parsed = parse_model_path(model_path)?;
    let exported = export_model_file(&parsed)?;
    emit(out, &to_canonical_json(&exported))?;
    Ok(0)
}
