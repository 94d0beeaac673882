//! Command-line front end.
//!
//! Every subcommand reads an optional config file (reference parameters on a
//! 100-cell unit interval otherwise), applies `--set section.key=value`
//! overrides, writes its artifacts plus `manifest.json` into the output
//! directory and returns an exit status: 0 on success, 1 when a solver did
//! not converge (or a covering trial failed), 2 on configuration and usage
//! errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{format_errors, parse_with_overrides, RunConfig};
use crate::covering::cover_trials;
use crate::dynamics::{
    classify_solution, evolve, flatness, mimura_identity_check, newton_steady, newton_system,
    ordering_rigidity_probe, DiffusionPairing, EvolveOptions, NewtonOptions, ReducedSystem,
};
use crate::grid::Field;
use crate::io::{self, Manifest};
use crate::model::{constant_coexistence_state, mimura_states, total_population};
use crate::stability::{
    classify_constant_stability, linearized_matrix, mode_block, mode_spectrum,
    spectrum_closed_form, spectrum_numeric,
};
use crate::sweep::{estimate_thresholds, initial_state, run_sweep, Perturbation};
use crate::{seed, Error};

/// Largest pack count for which the dense eigensolver is also run.
const DENSE_SPECTRUM_MAX_PACKS: usize = 2000;

#[derive(Debug, Parser)]
#[command(name = "predpack", version, about = "N-pack predator / prey reaction-diffusion laboratory")]
struct Cli {
    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration entry, e.g. `--set model.beta=0.5`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides `solver.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PerturbationArg {
    Eigen,
    Noise,
}

impl From<PerturbationArg> for Perturbation {
    fn from(p: PerturbationArg) -> Self {
        match p {
            PerturbationArg::Eigen => Perturbation::Eigen,
            PerturbationArg::Noise => Perturbation::Noise,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PairingArg {
    Lemma,
    Model,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coexistence constant state, its residual and stability class.
    Constant,
    /// Eigenvalues of the linearization at the coexistence constant.
    Spectrum {
        /// Neumann mode index per axis; omit for the spatially uniform block.
        #[arg(long, value_delimiter = ',')]
        mode: Vec<usize>,
    },
    /// March the parabolic system in time.
    Evolve {
        /// Start from a JSON snapshot instead of a perturbed constant.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "eigen")]
        perturbation: PerturbationArg,
    },
    /// Solve for a steady state with damped Newton.
    Steady {
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "eigen")]
        perturbation: PerturbationArg,
    },
    /// Classify the (β, N) grid from the `[sweep]` section.
    Sweep {
        /// Also write sweep.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Randomized checks of the ball-covering multiplicity bound.
    Cover {
        /// Ambient dimension.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Number of balls.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Integral identity of the reduced (H, u) system at a Newton steady state.
    Identity {
        /// Competition in the reduced system; defaults to β(N−1)/N.
        #[arg(long)]
        beta_eff: Option<f64>,
        #[arg(long, value_enum, default_value = "lemma")]
        pairing: PairingArg,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Spectrum { .. } => "spectrum",
            Self::Evolve { .. } => "evolve",
            Self::Steady { .. } => "steady",
            Self::Sweep { .. } => "sweep",
            Self::Cover { .. } => "cover",
            Self::Identity { .. } => "identity",
        }
    }
}

/// Failure of a subcommand, carrying its exit status.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. } | Error::NonFinite { .. } => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

/// Runs the CLI with process stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs the CLI writing to the given streams; returns the exit status.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

struct Context {
    config: RunConfig,
    rendered: String,
    dir: PathBuf,
    seed: u64,
}

impl Context {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let text = match &cli.config {
            Some(path) => fs::read_to_string(path).map_err(|e| Failure {
                code: 2,
                message: format!("cannot read {}: {e}", path.display()),
            })?,
            None => RunConfig::default().render(),
        };
        let mut overrides = cli.set.clone();
        if let Some(dir) = &cli.out {
            overrides.push(format!("output.dir={}", dir.display()));
        }
        if let Some(s) = cli.seed {
            overrides.push(format!("solver.seed={s}"));
        }
        let config = parse_with_overrides(&text, &overrides).map_err(|errs| Failure {
            code: 2,
            message: format!("invalid configuration\n{}", format_errors(&errs)),
        })?;
        let rendered = config.render();
        let dir = config.output.dir.clone();
        let seed = config.solver.seed;
        Ok(Self {
            config,
            rendered,
            dir,
            seed,
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<String, Failure> {
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join(name), contents)?;
        Ok(name.to_string())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, Failure> {
        let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
        self.write(name, &text)
    }

    fn snapshot(&self, name: &str, s: &Field) -> Result<String, Failure> {
        fs::create_dir_all(&self.dir)?;
        io::write_snapshot(&self.dir.join(name), &self.config.model, s)?;
        Ok(name.to_string())
    }

    fn finish(&self, command: &str, outputs: Vec<String>) -> Result<(), Failure> {
        fs::create_dir_all(&self.dir)?;
        Manifest::new(command, &self.rendered, self.seed, outputs).write(&self.dir)?;
        Ok(())
    }

    fn start_state(&self, init: Option<&Path>, kind: PerturbationArg) -> Result<Field, Failure> {
        let p = &self.config.model;
        let g = &self.config.domain;
        match init {
            Some(path) => {
                let s = io::read_snapshot(path)?.into_field()?;
                if s.components.len() != p.packs + 1 || &s.grid != g {
                    return Err(Failure {
                        code: 2,
                        message: format!(
                            "snapshot {} does not match the configured grid and N",
                            path.display()
                        ),
                    });
                }
                Ok(s)
            }
            None => {
                let mut rng = seed::stream(self.seed, "initial", &[]);
                Ok(initial_state(p, g, kind.into(), self.config.solver.amplitude, &mut rng))
            }
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let ctx = Context::load(cli)?;
    let name = cli.command.name();
    match &cli.command {
        Command::Constant => constant(&ctx, out),
        Command::Spectrum { mode } => spectrum(&ctx, mode, out),
        Command::Evolve { init, perturbation } => {
            evolve_cmd(&ctx, init.as_deref(), *perturbation, out)
        }
        Command::Steady { init, perturbation } => {
            steady(&ctx, init.as_deref(), *perturbation, out)
        }
        Command::Sweep { svg } => sweep(&ctx, *svg, out),
        Command::Cover {
            n,
            count,
            radius,
            trials,
        } => cover(&ctx, *n, *count, *radius, *trials, out),
        Command::Identity { beta_eff, pairing } => identity(&ctx, *beta_eff, *pairing, out),
    }
    .map(|(code, outputs)| {
        ctx.finish(name, outputs).map(|_| code)
    })?
}

type Outcome = Result<(i32, Vec<String>), Failure>;

fn constant(ctx: &Context, out: &mut dyn Write) -> Outcome {
    let p = &ctx.config.model;
    let c = constant_coexistence_state(p);
    let residual = crate::model::reaction_terms(p, &vec![c.w; p.packs], c.u)
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    let verdict = classify_constant_stability(p);
    let population = total_population(p, ctx.config.domain.volume());
    writeln!(out, "w = {}", c.w)?;
    writeln!(out, "u = {}", c.u)?;
    writeln!(out, "residual = {residual:e}")?;
    writeln!(out, "stability = {:?}", verdict.label)?;
    writeln!(out, "W_N/W_1 = {}", population.ratio)?;

    #[derive(Serialize)]
    struct Record<'a> {
        state: crate::model::ConstantState,
        residual: f64,
        stability: &'a crate::stability::StabilityVerdict,
        population: crate::model::PopulationComparison,
    }
    let file = ctx.write_json(
        "constant.json",
        &Record {
            state: c,
            residual,
            stability: &verdict,
            population,
        },
    )?;
    Ok((0, vec![file]))
}

fn spectrum(ctx: &Context, modes: &[usize], out: &mut dyn Write) -> Outcome {
    let p = &ctx.config.model;
    let (closed, matrix) = if modes.is_empty() {
        (spectrum_closed_form(p), linearized_matrix(p))
    } else {
        let (nu, _) = ctx.config.domain.neumann_eigenvalues(modes)?;
        (mode_spectrum(p, nu)?, mode_block(p, nu)?)
    };
    let mut sources = vec![("closed_form", closed)];
    if p.packs <= DENSE_SPECTRUM_MAX_PACKS {
        let numeric = spectrum_numeric(&matrix)?;
        let scale = numeric.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
        sources.push(("numeric", io::group_eigenvalues(&numeric, 1e-8 * scale)));
    }
    let csv = io::spectrum_csv(&sources);
    write!(out, "{csv}")?;
    Ok((0, vec![ctx.write("spectrum.csv", &csv)?]))
}

fn evolve_options(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions {
        horizon: cfg.solver.horizon,
        dt: cfg.solver.dt,
        steady_tol: cfg.solver.steady_tol,
        sample_every: cfg.solver.sample_every,
        sum_cap: None,
    }
}

fn evolve_cmd(ctx: &Context, init: Option<&Path>, kind: PerturbationArg, out: &mut dyn Write) -> Outcome {
    let cfg = &ctx.config;
    let s0 = ctx.start_state(init, kind)?;
    let report = match evolve(&cfg.model, &cfg.domain, &s0, &evolve_options(cfg)) {
        Ok(r) => r,
        Err(Error::NonFinite { step, last_finite }) => {
            let file = ctx.snapshot("last_finite.json", &last_finite)?;
            ctx.finish("evolve", vec![file])?;
            return Err(Failure {
                code: 1,
                message: format!("non-finite state at step {step}; last finite state saved"),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let cls = classify_solution(&report.final_state, cfg.solver.flatness_tol);
    writeln!(out, "steps = {}", report.steps)?;
    writeln!(out, "time = {}", report.time)?;
    writeln!(out, "residual = {:e}", report.final_residual())?;
    writeln!(out, "converged = {}", report.converged)?;
    writeln!(out, "flatness = {:e}", cls.flatness)?;
    writeln!(out, "max_u = {}", report.max_u)?;
    writeln!(out, "max_sum_w = {}", report.max_sum_w)?;
    writeln!(out, "bound_violations = {}", report.bound_violations.len())?;
    let outputs = vec![
        ctx.snapshot("final.json", &report.final_state)?,
        ctx.write("history.csv", &io::history_csv(&report.residual_history))?,
    ];
    if report.converged {
        writeln!(out, "label = {}", cls.label.as_str())?;
        Ok((0, outputs))
    } else {
        writeln!(out, "label = NoConvergence")?;
        Ok((1, outputs))
    }
}

fn steady(ctx: &Context, init: Option<&Path>, kind: PerturbationArg, out: &mut dyn Write) -> Outcome {
    let cfg = &ctx.config;
    let guess = ctx.start_state(init, kind)?;
    let opts = NewtonOptions {
        max_iters: cfg.solver.newton_max_iters,
        tol: cfg.solver.steady_tol,
        ..NewtonOptions::default()
    };
    let rep = newton_steady(&cfg.model, &cfg.domain, &guess, &opts)?;
    let cls = classify_solution(&rep.state, cfg.solver.flatness_tol);
    writeln!(out, "iterations = {}", rep.iterations)?;
    writeln!(out, "residual = {:e}", rep.residual)?;
    writeln!(out, "flatness = {:e}", cls.flatness)?;
    writeln!(out, "label = {}", cls.label.as_str())?;
    if cfg.model.competition > 0.0 {
        let pairs = ordering_rigidity_probe(&rep.state, 1e-6);
        writeln!(out, "ordering_violations = {}", pairs.len())?;
    }
    Ok((0, vec![ctx.snapshot("steady.json", &rep.state)?]))
}

fn sweep(ctx: &Context, svg_flag: bool, out: &mut dyn Write) -> Outcome {
    let cfg = &ctx.config;
    let result = run_sweep(
        &cfg.model,
        &cfg.sweep.beta_grid,
        &cfg.sweep.n_grid,
        &cfg.domain,
        &cfg.protocol(),
        ctx.seed,
    )?;
    let (beta_bar, n_bar) = estimate_thresholds(&result);
    let mut outputs = vec![ctx.write("sweep.csv", &io::sweep_csv(&result, cfg.output.timings))?];
    if svg_flag || cfg.output.svg {
        outputs.push(ctx.write("sweep.svg", &io::sweep_svg(&result))?);
    }

    #[derive(Serialize)]
    struct Thresholds {
        beta_bar: crate::sweep::Threshold<f64>,
        n_bar: crate::sweep::Threshold<usize>,
        frontier: Vec<(usize, Option<f64>)>,
    }
    outputs.push(ctx.write_json(
        "thresholds.json",
        &Thresholds {
            beta_bar,
            n_bar,
            frontier: result.frontier(),
        },
    )?);
    for c in &result.cells {
        writeln!(
            out,
            "beta={} N={} {} flatness={:e}",
            c.beta,
            c.packs,
            c.classification.label.as_str(),
            c.classification.flatness
        )?;
    }
    writeln!(out, "beta_bar = {beta_bar:?}")?;
    writeln!(out, "N_bar = {n_bar:?}")?;
    Ok((0, outputs))
}

fn cover(ctx: &Context, n: usize, count: usize, radius: f64, trials: usize, out: &mut dyn Write) -> Outcome {
    let results = cover_trials(n, count, radius, trials, ctx.seed)?;
    let failures = results.iter().filter(|t| !t.ok).count();
    writeln!(out, "trials = {}", results.len())?;
    writeln!(out, "failures = {failures}")?;
    let file = ctx.write("cover.csv", &io::cover_csv(&results))?;
    Ok((i32::from(failures > 0), vec![file]))
}

fn identity(ctx: &Context, beta_eff: Option<f64>, pairing: PairingArg, out: &mut dyn Write) -> Outcome {
    let cfg = &ctx.config;
    let p = cfg.model;
    let n = p.packs as f64;
    let beta_eff = beta_eff.unwrap_or(p.competition * (n - 1.0) / n);
    if !(beta_eff.is_finite() && beta_eff >= 0.0) {
        return Err(Error::InvalidArgument("beta_eff ≥ 0".into()).into());
    }
    let pairing = match pairing {
        PairingArg::Lemma => DiffusionPairing::Lemma,
        PairingArg::Model => DiffusionPairing::Model,
    };
    let g = &cfg.domain;
    let coex = mimura_states(&p, beta_eff)[2];
    let shape = g.cosine_mode(&vec![1; g.dim()]);
    let amp = cfg.solver.amplitude;
    let h: Vec<f64> = shape.iter().map(|v| coex.h * (1.0 + amp * v)).collect();
    let u: Vec<f64> = shape.iter().map(|v| coex.u * (1.0 - amp * v)).collect();
    let guess = Field::new(g.clone(), vec![h, u])?;
    let sys = ReducedSystem {
        params: p,
        beta_eff,
        pairing,
    };
    let opts = NewtonOptions {
        max_iters: cfg.solver.newton_max_iters,
        tol: cfg.solver.steady_tol,
        ..NewtonOptions::default()
    };
    let rep = newton_system(&sys, g, &guess, &opts)?;
    let v = mimura_identity_check(&p, &rep.state, beta_eff, pairing)?;
    writeln!(out, "beta_eff = {beta_eff}")?;
    writeln!(out, "iterations = {}", rep.iterations)?;
    writeln!(out, "residual = {:e}", rep.residual)?;
    writeln!(out, "flatness = {:e}", flatness(&rep.state))?;
    writeln!(out, "I_reaction = {:e}", v.reaction)?;
    writeln!(out, "I_dirichlet = {:e}", v.dirichlet)?;
    writeln!(out, "gap = {:e}", v.gap())?;

    #[derive(Serialize)]
    struct Record {
        beta_eff: f64,
        pairing: &'static str,
        iterations: usize,
        residual: f64,
        i_reaction: f64,
        i_dirichlet: f64,
        gap: f64,
        h: Vec<f64>,
        u: Vec<f64>,
    }
    let file = ctx.write_json(
        "identity.json",
        &Record {
            beta_eff,
            pairing: match pairing {
                DiffusionPairing::Lemma => "lemma",
                DiffusionPairing::Model => "model",
            },
            iterations: rep.iterations,
            residual: rep.residual,
            i_reaction: v.reaction,
            i_dirichlet: v.dirichlet,
            gap: v.gap(),
            h: rep.state.components[0].clone(),
            u: rep.state.components[1].clone(),
        },
    )?;
    Ok((0, vec![file]))
}
