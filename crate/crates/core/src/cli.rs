//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data or parse
//! error, 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamics::{corrupt, simulate};
use crate::error::{Error, ErrorKind, Result};
use crate::estimator::{calibrate, condition, estimate_object, ConditionOptions, ConditionedThrow, ProofBody, Weighting};
use crate::io::{
    read_throw, truth_path, write_json, write_sweep, write_throw, CalibrationFile, ResultFile, SecondsWindow,
    SimulateFile, SweepFile, TruthFile,
};
use crate::montecarlo::{run_sweep_with, workers_from_env};
use crate::signal::FilterSpec;
use crate::types::{InertiaTensor, KG_M2_TO_KG_MM2, M_TO_MM};

#[derive(Debug, Parser)]
#[command(name = "throw-inertia", version, about = "Inertia tensor and barycentre from spinning free-fall throws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a throw and write its CSV, metadata sidecar and ground truth.
    Simulate {
        /// JSON simulation config.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; the sidecar and truth files are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate the device from throws with and without a proof body.
    Calibrate(CalibrateArgs),
    /// Estimate the inertia and barycentre of an object from one throw.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo sensitivity sweep.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; defaults to THROW_INERTIA_WORKERS, then the CPU count.
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct Conditioning {
    /// Low-pass cutoff, Hz.
    #[arg(long, default_value_t = 20.0)]
    cutoff: f64,
    /// Seconds trimmed from each end of the free-fall window.
    #[arg(long, default_value_t = 0.05)]
    edge_trim: f64,
}

impl Conditioning {
    fn filter(&self) -> FilterSpec {
        FilterSpec::with_cutoff(self.cutoff)
    }
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Throws of the device alone.
    #[arg(long, num_args = 1.., required = true)]
    device_only: Vec<PathBuf>,
    /// Throws of the device carrying the proof body.
    #[arg(long, num_args = 1.., required = true)]
    proof: Vec<PathBuf>,
    /// Proof inertia about its barycentre in IMU axes, kg·m²: Ixx Ixy Iyy Ixz Iyz Izz.
    #[arg(long, num_args = 6, required = true, allow_negative_numbers = true)]
    proof_inertia: Vec<f64>,
    /// kg
    #[arg(long)]
    proof_mass: f64,
    /// kg
    #[arg(long)]
    device_mass: f64,
    #[command(flatten)]
    conditioning: Conditioning,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    throw: PathBuf,
    #[arg(long)]
    calibration: PathBuf,
    /// kg
    #[arg(long)]
    object_mass: f64,
    /// Free-fall window `start:end` in seconds; overrides the sidecar.
    #[arg(long)]
    window: Option<String>,
    /// Stationary window `start:end` in seconds used for bias removal.
    #[arg(long)]
    rest_window: Option<String>,
    /// Weight each sample by its spin rate.
    #[arg(long)]
    spin_weighting: bool,
    #[command(flatten)]
    conditioning: Conditioning,
    /// Result JSON; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status for an error category.
pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Sweep { spec, out_dir, workers } => cmd_sweep(&spec, &out_dir, workers),
    }
}

fn cmd_simulate(config: &Path, out: &Path) -> Result<()> {
    let file = SimulateFile::read(config)?;
    file.simulation
        .validate()
        .map_err(|e| Error::InvalidInput(format!("{}: simulation: {e}", config.display())))?;
    file.noise
        .validate()
        .map_err(|e| Error::InvalidInput(format!("{}: noise: {e}", config.display())))?;
    let rec = corrupt(&simulate(&file.simulation)?, &file.noise);
    write_throw(out, &rec)?;
    write_json(&truth_path(out), &TruthFile::new(&file.simulation))
}

fn load_conditioned(paths: &[PathBuf], opts: &ConditionOptions) -> Result<Vec<ConditionedThrow>> {
    paths
        .iter()
        .map(|p| {
            let rec = read_throw(p)?;
            condition(&rec, opts).map_err(|e| with_path(e, p))
        })
        .collect()
}

/// Prefixes data errors with the file they came from; numerical errors keep
/// their variant so the exit code is preserved.
fn with_path(e: Error, path: &Path) -> Error {
    match e.kind() {
        ErrorKind::Data => Error::Parse(format!("{}: {e}", path.display())),
        _ => e,
    }
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let opts = ConditionOptions {
        filter: args.conditioning.filter(),
        edge_trim: args.conditioning.edge_trim,
        ..ConditionOptions::default()
    };
    let theta: [f64; 6] = args
        .proof_inertia
        .as_slice()
        .try_into()
        .map_err(|_| Error::InvalidInput("--proof-inertia takes six values".into()))?;
    let proof = ProofBody {
        inertia: InertiaTensor::from_theta(theta),
        mass: args.proof_mass,
    };
    let device_only = load_conditioned(&args.device_only, &opts)?;
    let with_proof = load_conditioned(&args.proof, &opts)?;
    let cal = calibrate(&device_only, &with_proof, &proof, args.device_mass)?;
    let file = CalibrationFile::new(&cal, opts.filter);
    write_json(&args.out, &file)?;

    let mut stdout = std::io::stdout().lock();
    let d = cal.i_dev.scaled(KG_M2_TO_KG_MM2).theta();
    let x = cal.x_dev * M_TO_MM;
    let p = &cal.provenance;
    let _ = writeln!(stdout, "I_R_zz   {:.6e} kg m^2", cal.i_r_zz);
    let _ = writeln!(stdout, "I_dev    {:.3?} kg mm^2 [xx xy yy xz yz zz]", d);
    let _ = writeln!(stdout, "x_dev    [{:.3}, {:.3}, {:.3}] mm", x.x, x.y, x.z);
    let _ = writeln!(
        stdout,
        "residual device-only {:.4e}, proof {:.4e}, projection {:.4}",
        p.device_only_residual_rms, p.proof_residual_rms, p.projection_residual
    );
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let rec = read_throw(&args.throw)?;
    let cal = CalibrationFile::read(&args.calibration)?.calibration()?;
    let t0 = rec.t[0];
    let to_samples = |text: &Option<String>| -> Result<_> {
        text.as_deref()
            .map(|s| SecondsWindow::parse(s)?.to_samples(t0, rec.sample_rate))
            .transpose()
    };
    let opts = ConditionOptions {
        filter: args.conditioning.filter(),
        window: to_samples(&args.window)?,
        rest_window: to_samples(&args.rest_window)?,
        edge_trim: args.conditioning.edge_trim,
        weighting: if args.spin_weighting { Weighting::SpinRate } else { Weighting::Uniform },
    };
    let throw = condition(&rec, &opts)?;
    let est = estimate_object(&throw, &cal, args.object_mass, opts.weighting)?;
    let result = ResultFile::new(&est, &rec, opts.filter);
    match &args.out {
        Some(path) => write_json(path, &result)?,
        None => println!("{}", serde_json::to_string_pretty(&result)?),
    }
    if !est.object_positive_definite {
        eprintln!("warning: estimated object inertia is not positive-definite");
    }
    Ok(())
}

fn cmd_sweep(spec: &Path, out_dir: &Path, workers: Option<usize>) -> Result<()> {
    let file = SweepFile::read(spec)?;
    let sweep = &file.sweep;
    let total = sweep.grid.len();
    let result = run_sweep_with(sweep, workers.or_else(workers_from_env), |s| {
        let eps = s.epsilon.map(|e| format!("{:.3}%", 100.0 * e.percentile)).unwrap_or("-".into());
        let psi = s.psi_deg.map(|p| format!("{:.2} deg", p.percentile)).unwrap_or("-".into());
        eprintln!(
            "[{}/{total}] {} = {}: {} failures, p{} eps {eps}, psi {psi}{}",
            s.index + 1,
            serde_json::to_string(&sweep.parameter).unwrap_or_default().trim_matches('"'),
            s.value.label(),
            s.failures,
            sweep.percentile,
            if s.flagged { " (flagged)" } else { "" }
        );
    })?;
    write_sweep(out_dir, sweep, &result)
}
