//! The `kscontrol` command line: configuration layering, the four
//! subcommands and their CSV outputs, and the run manifest.

pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use kscontrol_core::optimizer::{search, SearchResult};
use kscontrol_core::tddft::{evolve, PropagationState};
use kscontrol_core::{homo_lumo, scf_ground_state, Error, Functionals, GroundState, Model};

use config::RunConfig;
use output::{key_values, real, Csv, OutputDir, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("SCF failure: {0}")]
    Scf(String),
    #[error("propagation failure: {0}")]
    Propagation(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Scf(_) => 3,
            CliError::Propagation(_) => 4,
            CliError::Io(_) | CliError::Numerical(_) => 1,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config-error",
            CliError::Scf(_) => "scf-failure",
            CliError::Propagation(_) => "propagation-failure",
            CliError::Io(_) => "io-error",
            CliError::Numerical(_) => "numerical-error",
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_)
            | Error::InvalidParameter { .. }
            | Error::InvalidProfile(_)
            | Error::SearchSpaceTooLarge(_) => CliError::Config(e.to_string()),
            Error::ScfNotConverged { .. } | Error::Eigensolver(_) => CliError::Scf(e.to_string()),
            Error::Propagation(_) => CliError::Propagation(e.to_string()),
            Error::GridMismatch { .. } | Error::InsufficientEigenpairs { .. } | Error::InfeasibleIncrement(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kscontrol", version, about = "Optimal control of HOMO-LUMO excitations in a 1D Kohn-Sham chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Self-consistent ground state: eigenvalues, density, HOMO and LUMO.
    GroundState,
    /// All excitation functionals of one doping profile.
    Evaluate,
    /// Stochastic search over doping profiles for one goal.
    Optimize,
    /// Real-time propagation of the HOMO-LUMO excitation.
    Evolve,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Evaluate => "evaluate",
            Command::Optimize => "optimize",
            Command::Evolve => "evolve",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Doping profile as 20 digits, e.g. 75748566666666577476.
    #[arg(long, global = true, value_name = "STR20")]
    pub profile: Option<String>,
    /// Search seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// charge-transfer, overlap, lifetime, bandgap-max or bandgap-target.
    #[arg(long, global = true, value_name = "GOAL")]
    pub goal: Option<String>,
    /// Target gap for bandgap-target, in Hartree.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub target: Option<f64>,
    /// Grid spacing in Bohr.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub dx: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Any configuration key, e.g. `--set scf.tol=1e-9`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Defaults < file < environment < `--set` < dedicated flags, then validation.
pub fn parse_config<I>(args: &CommonArgs, env: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        config.apply_file(path)?;
    }
    config.apply_env(env)?;
    config.apply_overrides(&args.overrides)?;
    if let Some(p) = &args.profile {
        config.set("run.profile", p)?;
    }
    if let Some(seed) = args.seed {
        config.schedule.seed = seed;
    }
    if let Some(goal) = &args.goal {
        config.set("goal.kind", goal)?;
    }
    if let Some(t) = args.target {
        config.target = Some(t);
    }
    if let Some(dx) = args.dx {
        config.dx = dx;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

/// What a finished run printed and where.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub lines: Vec<String>,
}

/// Runs one subcommand with the process environment.
pub fn run(cli: &Cli) -> Result<RunSummary, CliError> {
    run_with_env(cli, std::env::vars())
}

pub fn run_with_env<I>(cli: &Cli, env: I) -> Result<RunSummary, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let config = parse_config(&cli.common, env)?;
    let started = chrono::Utc::now().to_rfc3339();
    let mut out = OutputDir::create(&config.output_dir)?;
    let result = match cli.command {
        Command::GroundState => cmd_ground_state(&config, &mut out),
        Command::Evaluate => cmd_evaluate(&config, &mut out),
        Command::Optimize => cmd_optimize(&config, &mut out),
        Command::Evolve => cmd_evolve(&config, &mut out),
    };
    let (status, exit_code) = match &result {
        Ok(_) => ("ok", 0),
        Err(e) => (e.status(), e.exit_code()),
    };
    let manifest = RunManifest {
        tool: "kscontrol".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        status: status.into(),
        exit_code,
        seed: config.schedule.seed,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        config: config
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
            .collect(),
        outputs: out.files().to_vec(),
    };
    out.write_manifest(&manifest)?;
    result.map(|lines| RunSummary {
        output_dir: config.output_dir.clone(),
        lines,
    })
}

/// Solves the ground state; on non-convergence writes `scf_failure.txt`
/// with the last iterate.
fn ground_state(config: &RunConfig, model: &Model, out: &mut OutputDir) -> Result<GroundState, CliError> {
    let profile = config.profile()?;
    match scf_ground_state(model, &profile, &config.scf) {
        Ok(state) => Ok(state),
        Err(Error::ScfNotConverged {
            iterations,
            residual,
            last,
        }) => {
            let mut pairs = vec![
                ("profile", profile.to_string()),
                ("iterations", iterations.to_string()),
                ("residual", real(residual)),
                ("tolerance", real(config.scf.tol)),
            ];
            if let Some(gap) = last.gap() {
                pairs.push(("last_bandgap_ha", real(gap)));
            }
            out.write("scf_failure.txt", &key_values(&pairs))?;
            Err(CliError::Scf(format!(
                "profile {profile}: no convergence after {iterations} iterations (residual {residual:e})"
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_ground_state(config: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, CliError> {
    let model = config.model()?;
    let grid = model.grid();
    let state = ground_state(config, &model, out)?;
    let mu = model.nuclear_density(&config.profile()?)?;
    let pair = homo_lumo(&state)?;

    let mut csv = Csv::new(&["index", "energy_ha"]);
    for (i, e) in state.eigenvalues.iter().enumerate() {
        csv.row(&[(i + 1).to_string(), real(*e)]);
    }
    out.write("eigenvalues.csv", &csv.into_string())?;

    let mut csv = Csv::new(&["x_bohr", "rho_per_bohr", "mu_per_bohr", "v_ext_ha"]);
    for (j, &x) in grid.nodes().iter().enumerate() {
        csv.reals(&[x, state.density[j], mu[j], state.v_ext[j]]);
    }
    out.write("density.csv", &csv.into_string())?;

    let mut csv = Csv::new(&[
        "x_bohr",
        "homo_per_sqrt_bohr",
        "lumo_per_sqrt_bohr",
        "homo_density_per_bohr",
        "lumo_density_per_bohr",
    ]);
    for (j, &x) in grid.nodes().iter().enumerate() {
        let (h, l) = (pair.homo[j], pair.lumo[j]);
        csv.reals(&[x, h, l, h * h, l * l]);
    }
    out.write("orbitals.csv", &csv.into_string())?;

    Ok(vec![
        format!("profile    {}", config.profile()?),
        format!("iterations {}", state.iterations),
        format!("eps_homo   {}", real(pair.eps_h)),
        format!("eps_lumo   {}", real(pair.eps_l)),
        format!("bandgap    {}", real(pair.eps_l - pair.eps_h)),
    ])
}

fn functional_pairs(f: &Functionals) -> Vec<(&'static str, String)> {
    vec![
        ("charge_transfer_bohr", real(f.charge_transfer)),
        ("overlap", real(f.overlap)),
        ("lifetime_ha2", real(f.lifetime)),
        ("bandgap_ha", real(f.bandgap)),
        ("eps_homo_ha", real(f.eps_h)),
        ("eps_lumo_ha", real(f.eps_l)),
        ("com_homo_bohr", real(f.com_homo)),
        ("com_lumo_bohr", real(f.com_lumo)),
    ]
}

fn cmd_evaluate(config: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, CliError> {
    let model = config.model()?;
    let state = ground_state(config, &model, out)?;
    let f = Functionals::evaluate(model.grid(), &state, model.kernel())?;
    let mut pairs = vec![
        ("profile", config.profile()?.to_string()),
        ("scf_iterations", state.iterations.to_string()),
    ];
    pairs.extend(functional_pairs(&f));
    let text = key_values(&pairs);
    out.write("functionals.txt", &text)?;
    Ok(text.lines().map(str::to_string).collect())
}

fn cmd_optimize(config: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, CliError> {
    let model = config.model()?;
    let goal = config.goal()?;
    let result: SearchResult = search(&model, goal, &config.schedule, &config.scf)?;

    let mut pairs = vec![
        ("goal", goal.name().to_string()),
        ("target_ha", goal.target().map_or("none".into(), real)),
        ("seed", config.schedule.seed.to_string()),
        ("best_profile", result.best.to_string()),
        ("best_score", real(result.best_score)),
    ];
    pairs.extend(functional_pairs(&result.best_functionals));
    pairs.push(("candidates", result.log.len().to_string()));
    pairs.push(("scf_solves", result.evaluations.to_string()));
    let failed = result.log.iter().filter(|r| r.failed()).count();
    pairs.push(("failed_candidates", failed.to_string()));
    let text = key_values(&pairs);
    out.write("result.txt", &text)?;

    let mut csv = Csv::new(&["step", "profile", "score"]);
    for (step, (profile, score)) in result.trajectory.iter().enumerate() {
        csv.row(&[step.to_string(), profile.to_string(), real(*score)]);
    }
    out.write("trajectory.csv", &csv.into_string())?;

    let mut csv = Csv::new(&[
        "profile",
        "charge_transfer_bohr",
        "overlap",
        "lifetime_ha2",
        "bandgap_ha",
        "score",
        "step",
        "accepted",
    ]);
    for r in &result.log {
        let f = r.functionals.map_or([f64::NAN; 4], |f| [f.charge_transfer, f.overlap, f.lifetime, f.bandgap]);
        csv.row(&[
            r.profile.to_string(),
            real(f[0]),
            real(f[1]),
            real(f[2]),
            real(f[3]),
            real(r.score),
            r.step.to_string(),
            r.accepted.to_string(),
        ]);
    }
    out.write("scan.csv", &csv.into_string())?;

    Ok(text.lines().map(str::to_string).collect())
}

fn cmd_evolve(config: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>, CliError> {
    let model = config.model()?;
    let grid = model.grid();
    let state = ground_state(config, &model, out)?;
    let pair = homo_lumo(&state)?;
    let initial = PropagationState::excited(&state, &pair)?;
    let (trace, _) = evolve(&initial, &config.tddft, grid, &state.v_ext, model.kernel(), &state.density)
        .map_err(|e| CliError::Propagation(e.to_string()))?;
    let finite = trace
        .com_lumo
        .iter()
        .chain(&trace.com_hole)
        .chain(&trace.norm_drift)
        .chain(&trace.mass)
        .all(|v| v.is_finite());
    if !finite {
        return Err(CliError::Propagation("non-finite observable in the trace".into()));
    }

    let mut csv = Csv::new(&["t_au", "com_lumo_bohr", "com_hole_bohr", "norm_drift", "mass"]);
    for k in 0..trace.len() {
        csv.reals(&[trace.times[k], trace.com_lumo[k], trace.com_hole[k], trace.norm_drift[k], trace.mass[k]]);
    }
    out.write("trace.csv", &csv.into_string())?;

    let mut csv = Csv::new(&["t_au", "x_bohr", "drho_per_bohr"]);
    for (k, t) in trace.times.iter().enumerate() {
        for (j, &x) in grid.nodes().iter().enumerate() {
            csv.reals(&[*t, x, trace.density_minus_ground[k][j]]);
        }
    }
    out.write("density_movie.csv", &csv.into_string())?;

    let last = trace.len() - 1;
    let max_drift = trace.norm_drift.iter().fold(0.0_f64, |a, &b| a.max(b));
    Ok(vec![
        format!("profile        {}", config.profile()?),
        format!("steps          {}", config.tddft.steps()),
        format!("com_lumo_final {}", real(trace.com_lumo[last])),
        format!("com_hole_final {}", real(trace.com_hole[last])),
        format!("max_norm_drift {}", real(max_drift)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("kscontrol").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_parse_on_every_subcommand() {
        let c = cli(&["optimize", "--goal", "bandgap-target", "--target", "3.0", "--seed", "7", "--out", "o"]);
        assert_eq!(c.command, Command::Optimize);
        let config = parse_config(&c.common, Vec::new()).unwrap();
        assert_eq!(config.goal().unwrap().target(), Some(3.0));
        assert_eq!(config.schedule.seed, 7);
        assert_eq!(config.output_dir, PathBuf::from("o"));
    }

    #[test]
    fn dedicated_flags_win_over_set_and_env() {
        let c = cli(&["evaluate", "--set", "schedule.seed=3", "--seed", "5"]);
        let env = vec![("KSCONTROL_SCHEDULE_SEED".to_string(), "4".to_string())];
        assert_eq!(parse_config(&c.common, env).unwrap().schedule.seed, 5);
        let c = cli(&["evaluate", "--set", "schedule.seed=3"]);
        let env = vec![("KSCONTROL_SCHEDULE_SEED".to_string(), "4".to_string())];
        assert_eq!(parse_config(&c.common, env).unwrap().schedule.seed, 3);
    }

    #[test]
    fn profile_flag() {
        let c = cli(&["evaluate", "--profile", "75748566666666577476"]);
        let config = parse_config(&c.common, Vec::new()).unwrap();
        assert_eq!(config.profile().unwrap().to_string(), "75748566666666577476");
    }

    #[test]
    fn bad_spacing_is_a_config_error() {
        let c = cli(&["ground-state", "--dx", "0.003"]);
        let e = parse_config(&c.common, Vec::new()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Scf(String::new()).exit_code(), 3);
        assert_eq!(CliError::Propagation(String::new()).exit_code(), 4);
        let e: CliError = Error::Propagation("x".into()).into();
        assert_eq!(e.exit_code(), 4);
    }
}
