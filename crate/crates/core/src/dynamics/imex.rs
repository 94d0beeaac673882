use serde::Serialize;

use super::{max_residual, FullSystem, ReactionSystem};
use crate::grid::{Field, Grid};
use crate::linalg::ImplicitDiffusion;
use crate::model::ModelParams;
use crate::{Error, Result};

/// Values below this are counted as clamping events.
const UNDERSHOOT: f64 = -1e-12;

/// Relative slack on the prey ceiling before a sample counts as a violation.
pub const PREY_BOUND_SLACK: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub horizon: f64,
    /// Largest admissible step; each step is further capped by `0.5 / Lip`.
    pub dt: f64,
    pub steady_tol: f64,
    /// Residual and bounds are sampled every this many steps.
    pub sample_every: usize,
    /// Cap on `Σ w_i`; `None` means ten times the initial maximum.
    pub sum_cap: Option<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            horizon: 500.0,
            dt: 0.1,
            steady_tol: 1e-9,
            sample_every: 10,
            sum_cap: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualSample {
    pub step: usize,
    pub time: f64,
    pub residual: f64,
    pub max_u: f64,
    pub sum_w_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// `u > λ/μ (1 + 1e-8)`
    PreyCeiling,
    /// `Σ w_i` above the monitor cap
    PredatorSum,
    /// a value below `−1e-12` was clamped to zero
    Undershoot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundViolation {
    pub step: usize,
    pub kind: BoundKind,
}

#[derive(Clone, Debug)]
pub struct EvolveReport {
    pub final_state: Field,
    pub steps: usize,
    pub time: f64,
    pub residual_history: Vec<ResidualSample>,
    pub bound_violations: Vec<BoundViolation>,
    pub converged: bool,
    /// Largest prey value over all samples.
    pub max_u: f64,
    /// Largest `Σ w_i` over all samples.
    pub max_sum_w: f64,
}

impl EvolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().map_or(f64::NAN, |s| s.residual)
    }

    pub fn count(&self, kind: BoundKind) -> usize {
        self.bound_violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Working state of the integrator: scratch buffers and the diffusion solver.
struct Stepper<'a, S: ReactionSystem> {
    sys: &'a S,
    solver: ImplicitDiffusion,
    vals: Vec<f64>,
    rates: Vec<f64>,
    increments: Vec<Vec<f64>>,
}

impl<'a, S: ReactionSystem> Stepper<'a, S> {
    fn new(sys: &'a S, grid: &Grid) -> Self {
        let c = sys.components();
        Self {
            sys,
            solver: ImplicitDiffusion::new(grid),
            vals: vec![0.0; c],
            rates: vec![0.0; c],
            increments: (0..c).map(|_| vec![0.0; grid.len()]).collect(),
        }
    }

    /// Evaluates reaction rates into `increments`; returns the Lipschitz bound.
    fn rates(&mut self, comps: &[Vec<f64>]) -> f64 {
        let cc = comps.len();
        let nodes = comps[0].len();
        let mut lip = 0.0_f64;
        for node in 0..nodes {
            for c in 0..cc {
                self.vals[c] = comps[c][node];
            }
            self.sys.reaction(&self.vals, &mut self.rates);
            lip = lip.max(self.sys.lipschitz_bound(&self.vals));
            for c in 0..cc {
                self.increments[c][node] = self.rates[c];
            }
        }
        lip
    }

    /// One step with explicit reaction and backward-Euler diffusion, using
    /// rates already stored by [`Stepper::rates`]. Returns
    /// `(undershoots, all_finite)`.
    fn advance(&mut self, comps: &mut [Vec<f64>], dt: f64) -> (usize, bool) {
        let mut undershoots = 0;
        let mut finite = true;
        for (c, comp) in comps.iter_mut().enumerate() {
            for (x, r) in comp.iter_mut().zip(&self.increments[c]) {
                *x += dt * r;
            }
            self.solver.solve(dt * self.sys.diffusivity(c), comp);
            for x in comp.iter_mut() {
                if !x.is_finite() {
                    finite = false;
                } else if *x < 0.0 {
                    if *x < UNDERSHOOT {
                        undershoots += 1;
                    }
                    *x = 0.0;
                }
            }
        }
        (undershoots, finite)
    }
}

/// One IMEX step of size exactly `dt` for the N-pack system.
pub fn step_imex(p: &ModelParams, g: &Grid, s: &Field, dt: f64) -> Result<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    check_field(p.packs + 1, g, s)?;
    let sys = FullSystem::new(*p);
    let mut stepper = Stepper::new(&sys, g);
    let mut comps = s.components.clone();
    stepper.rates(&comps);
    let (_, finite) = stepper.advance(&mut comps, dt);
    if !finite {
        return Err(Error::NonFinite {
            step: 1,
            last_finite: Box::new(s.clone()),
        });
    }
    Ok(Field {
        grid: g.clone(),
        components: comps,
    })
}

fn check_field(components: usize, g: &Grid, s: &Field) -> Result<()> {
    if s.components.len() != components {
        return Err(Error::SizeMismatch {
            expected: components,
            got: s.components.len(),
        });
    }
    if &s.grid != g {
        return Err(Error::InvalidArgument("field lives on a different grid".into()));
    }
    if !s.is_finite() {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    Ok(())
}

/// Marches the N-pack parabolic system until the stationary residual drops
/// below `steady_tol` or the horizon is reached.
pub fn evolve(p: &ModelParams, g: &Grid, s0: &Field, opts: &EvolveOptions) -> Result<EvolveReport> {
    p.check()?;
    evolve_system(&FullSystem::new(*p), g, s0, opts)
}

pub fn evolve_system<S: ReactionSystem>(
    sys: &S,
    g: &Grid,
    s0: &Field,
    opts: &EvolveOptions,
) -> Result<EvolveReport> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", opts.dt)));
    }
    if !(opts.horizon >= 0.0) {
        return Err(Error::InvalidArgument("horizon must be ≥ 0".into()));
    }
    check_field(sys.components(), g, s0)?;
    let sample_every = opts.sample_every.max(1);
    let ceiling = sys.prey_ceiling() * (1.0 + PREY_BOUND_SLACK);

    let mut state = s0.clone();
    let initial_sum = max_sum(&state);
    let sum_cap = opts
        .sum_cap
        .unwrap_or(if initial_sum > 0.0 { 10.0 * initial_sum } else { f64::INFINITY });

    let mut stepper = Stepper::new(sys, g);
    let mut history = Vec::new();
    let mut violations = Vec::new();
    let mut last_finite = state.clone();
    let (mut step, mut time) = (0usize, 0.0_f64);
    let mut converged = false;
    let (mut max_u, mut max_sum_w) = (0.0_f64, 0.0_f64);

    loop {
        if step % sample_every == 0 || time >= opts.horizon {
            let residual = max_residual(sys, &state);
            let mu = state.prey().iter().copied().fold(0.0, f64::max);
            let sw = max_sum(&state);
            max_u = max_u.max(mu);
            max_sum_w = max_sum_w.max(sw);
            if mu > ceiling {
                violations.push(BoundViolation { step, kind: BoundKind::PreyCeiling });
            }
            if sw > sum_cap {
                violations.push(BoundViolation { step, kind: BoundKind::PredatorSum });
            }
            history.push(ResidualSample {
                step,
                time,
                residual,
                max_u: mu,
                sum_w_max: sw,
            });
            last_finite.clone_from(&state);
            if residual < opts.steady_tol {
                converged = true;
                break;
            }
            if time >= opts.horizon {
                break;
            }
        }
        let lip = stepper.rates(&state.components);
        if !lip.is_finite() {
            return Err(Error::NonFinite {
                step,
                last_finite: Box::new(last_finite),
            });
        }
        let cap = if lip > 0.0 { 0.5 / lip } else { f64::INFINITY };
        let dt = opts.dt.min(cap).min(opts.horizon - time);
        let (undershoots, finite) = stepper.advance(&mut state.components, dt);
        step += 1;
        time += dt;
        if !finite {
            return Err(Error::NonFinite {
                step,
                last_finite: Box::new(last_finite),
            });
        }
        if undershoots > 0 {
            violations.push(BoundViolation { step, kind: BoundKind::Undershoot });
        }
        // guard against an endless tail of tiny steps
        if opts.horizon - time < 1e-12 * opts.horizon.max(1.0) {
            time = opts.horizon;
        }
    }

    Ok(EvolveReport {
        final_state: state,
        steps: step,
        time,
        residual_history: history,
        bound_violations: violations,
        converged,
        max_u,
        max_sum_w,
    })
}

fn max_sum(s: &Field) -> f64 {
    s.aggregate().into_iter().fold(0.0, f64::max)
}
