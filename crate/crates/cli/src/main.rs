//! `vortex-lab`: reproducible experiments on the degree-one Ginzburg-Landau vortex.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vortex_core::dynamics::Scheme;
use vortex_core::fields::Family;
use vortex_core::VortexError;

use config::{ConfigLayer, ExperimentConfig, OUT_ENV};

#[derive(Parser)]
#[command(name = "vortex-lab", version, about = "Vortex profile, energy, coercivity and dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the radial profile and write the table with its JSON header.
    Profile {
        #[command(flatten)]
        common: Common,
    },
    /// Renormalized energy by both routes, P_R decay and the quadratic form.
    Energy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        field: FieldArgs,
        /// Cutoff scale of the decomposition.
        #[arg(long = "R")]
        r_scale: Option<f64>,
        /// Extrapolation tolerance of the truncation sweeps.
        #[arg(long)]
        energy_tol: Option<f64>,
    },
    /// Sector spectra, identity residuals and the dyadic window scan.
    Coercivity {
        #[command(flatten)]
        common: Common,
        #[arg(long = "R")]
        r_scale: Option<f64>,
        /// Radial grid refinement factor.
        #[arg(long)]
        refine: Option<usize>,
        /// Report a single sector.
        #[arg(long, allow_hyphen_values = true)]
        j: Option<i32>,
        /// Drop the orthogonality conditions.
        #[arg(long)]
        no_constraint: bool,
        #[arg(long)]
        j_max: Option<i32>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evolve a perturbed vortex and track its modulation parameters.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long)]
        snapshot_every: Option<f64>,
        /// Field snapshots every this many diagnostic rows (0 disables).
        #[arg(long)]
        snapshot_stride: Option<usize>,
        /// cn or rk4.
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Skip the modulation ODE track.
        #[arg(long)]
        no_ode: bool,
        /// Comma-separated amplitudes; one run each.
        #[arg(long, value_delimiter = ',')]
        amp_sweep: Option<Vec<f64>>,
    },
    /// Newton modulation of a single field.
    Modulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        field: FieldArgs,
        /// Initial guess bx,by,phi.
        #[arg(long, value_parser = parse_triple)]
        guess: Option<[f64; 3]>,
        #[arg(long)]
        alpha: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config; flags and the environment override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $VORTEX_LAB_OUT/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Profile artifact (profile.json) instead of solving.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Half-width of the box [-L, L]².
    #[arg(long = "L")]
    half_width: Option<f64>,
    /// Nodes per axis.
    #[arg(long = "N")]
    n: Option<usize>,
}

#[derive(Args)]
struct FieldArgs {
    /// family[:amplitude], family one of none, bump, random, sector-tail.
    #[arg(long, value_parser = parse_perturb)]
    perturb: Option<(Family, Option<f64>)>,
    #[arg(long)]
    width: Option<f64>,
    /// Perturbation center x,y.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    center: Option<[f64; 2]>,
    #[arg(long)]
    seed: Option<u64>,
    /// Vortex center x,y.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    shift: Option<[f64; 2]>,
    #[arg(long, allow_hyphen_values = true)]
    phase: Option<f64>,
}

fn parse_perturb(s: &str) -> Result<(Family, Option<f64>), String> {
    let (name, amp) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a.parse::<f64>().map_err(|e| format!("amplitude '{a}': {e}"))?)),
        None => (s, None),
    };
    Ok((name.parse::<Family>().map_err(|e| e.to_string())?, amp))
}

fn parse_list(s: &str, len: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != len {
        return Err(format!("expected {len} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_list(s, 2).map(|v| [v[0], v[1]])
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list(s, 3).map(|v| [v[0], v[1], v[2]])
}

impl Common {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            out: self.out.clone(),
            profile: self.profile.clone(),
            rmax: self.rmax,
            tol: self.tol,
            half_width: self.half_width,
            n: self.n,
            ..Default::default()
        }
    }
}

impl FieldArgs {
    fn apply(&self, l: &mut ConfigLayer) {
        if let Some((family, amp)) = self.perturb {
            l.family = Some(family);
            l.amplitude = amp.or(l.amplitude);
        }
        l.width = self.width;
        l.center = self.center;
        l.seed = self.seed;
        l.shift = self.shift;
        l.phase = self.phase;
    }
}

fn flag_layer(cmd: &Command) -> (&'static str, &Common, ConfigLayer) {
    match cmd {
        Command::Profile { common } => ("profile", common, common.layer()),
        Command::Energy { common, field, r_scale, energy_tol } => {
            let mut l = common.layer();
            field.apply(&mut l);
            l.r_scale = *r_scale;
            l.energy_tol = *energy_tol;
            ("energy", common, l)
        }
        Command::Coercivity { common, r_scale, refine, j, no_constraint, j_max, seed } => {
            let mut l = common.layer();
            l.r_scale = *r_scale;
            l.refine = *refine;
            l.j = *j;
            l.no_constraint = no_constraint.then_some(true);
            l.j_max = *j_max;
            l.seed = *seed;
            ("coercivity", common, l)
        }
        Command::Evolve {
            common,
            field,
            dt,
            t_final,
            snapshot_every,
            snapshot_stride,
            scheme,
            delta,
            alpha,
            no_ode,
            amp_sweep,
        } => {
            let mut l = common.layer();
            field.apply(&mut l);
            l.dt = *dt;
            l.t_final = *t_final;
            l.snapshot_every = *snapshot_every;
            l.snapshot_stride = *snapshot_stride;
            l.scheme = *scheme;
            l.delta = *delta;
            l.alpha = *alpha;
            l.track_ode = no_ode.then_some(false);
            l.amp_sweep = amp_sweep.clone();
            ("evolve", common, l)
        }
        Command::Modulate { common, field, guess, alpha } => {
            let mut l = common.layer();
            field.apply(&mut l);
            l.guess = *guess;
            l.alpha = *alpha;
            ("modulate", common, l)
        }
    }
}

fn resolve(cmd: &Command) -> vortex_core::Result<ExperimentConfig> {
    let (name, common, flags) = flag_layer(cmd);
    let file = match &common.config {
        Some(p) => ConfigLayer::read(p)?,
        None => ConfigLayer::default(),
    };
    let env_root = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    // A root from the environment outranks an output directory named in the file.
    let file = if env_root.is_some() { ConfigLayer { out: None, ..file } } else { file };
    ExperimentConfig::resolve(name, file.overlay(&flags), env_root)
}

fn exit_code(e: &VortexError) -> u8 {
    match e {
        VortexError::Numerical(_) | VortexError::SolverFailure { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(&cli.command).and_then(|cfg| commands::run(&cfg));
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("vortex-lab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
