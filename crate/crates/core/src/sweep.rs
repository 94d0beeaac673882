//! Classification of the (β, N) plane.
//!
//! Each cell starts several runs from the coexistence constant: one
//! perturbed along the predator-difference eigendirection and the rest with
//! seeded uniform noise. A run marches in time; if the residual has not
//! dropped below the steady tolerance by the horizon, the final state is
//! handed to Newton, and the steady state Newton lands on is classified.
//! Runs where both fail count as `NoConvergence`.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    classify_solution, evolve, flatness, newton_steady, Classification, EvolveOptions,
    NewtonOptions, SolutionLabel,
};
use crate::grid::{Field, Grid};
use crate::model::{constant_coexistence_state, ModelParams};
use crate::stability::difference_witness;
use crate::{seed, Error, Result};

/// Per-run settings shared by every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    /// Runs per cell: the eigendirection run plus `runs − 1` noise runs.
    pub runs: usize,
    pub horizon: f64,
    pub dt: f64,
    pub steady_tol: f64,
    pub flatness_tol: f64,
    /// Relative perturbation amplitude.
    pub amplitude: f64,
    pub sample_every: usize,
    /// Newton iteration cap for finishing runs that did not settle in time.
    pub newton_max_iters: usize,
    pub parallel: bool,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            runs: 3,
            horizon: 500.0,
            dt: 0.1,
            steady_tol: 1e-9,
            flatness_tol: 1e-5,
            amplitude: 1e-3,
            sample_every: 10,
            newton_max_iters: 50,
            parallel: true,
        }
    }
}

/// Default β grid.
pub const DEFAULT_BETAS: [f64; 10] = [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0];

/// Default pack-count grid.
pub const DEFAULT_PACKS: [usize; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 16, 32, 64];

/// How a run's initial data was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Perturbation {
    /// Spatially uniform shift along `(1, −1, 0, ..., 0)/√2` (or the first
    /// pack when there is only one).
    Eigen,
    /// Independent uniform noise at every node and component.
    Noise,
}

/// Outcome of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub perturbation: Perturbation,
    pub classification: Classification,
    pub evolve_steps: usize,
    pub evolve_converged: bool,
    pub newton_iterations: Option<usize>,
    /// Largest prey value seen while marching.
    pub max_u: f64,
    /// Largest `Σ w_i` seen while marching.
    pub max_sum_w: f64,
    /// Largest `Σ w_i` in the initial data.
    pub initial_sum_w: f64,
    pub prey_ceiling_violations: usize,
    /// `max_i ‖w_i − w*‖∞` of the classified state against the symmetric constant.
    pub deviation_from_symmetric: f64,
    #[serde(skip)]
    pub final_state: Option<Field>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub beta: f64,
    pub packs: usize,
    pub classification: Classification,
    pub runs: Vec<RunRecord>,
    pub seeds: Vec<u64>,
    pub runtime_s: f64,
}

/// β threshold surrogate read off a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Threshold<T> {
    Value(T),
    /// No nonconstant cell anywhere in the range.
    UnboundedInRange,
    /// The smallest grid value already fails.
    BelowRange,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub betas: Vec<f64>,
    pub packs: Vec<usize>,
    /// Row-major over `packs` × `betas`.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, beta_idx: usize, pack_idx: usize) -> &SweepCell {
        &self.cells[pack_idx * self.betas.len() + beta_idx]
    }

    /// Per pack count, the smallest β classified `NonConstant`.
    pub fn frontier(&self) -> Vec<(usize, Option<f64>)> {
        self.packs
            .iter()
            .enumerate()
            .map(|(ni, &n)| {
                let beta = (0..self.betas.len())
                    .map(|bi| self.cell(bi, ni))
                    .find(|c| c.classification.label == SolutionLabel::NonConstant)
                    .map(|c| c.beta);
                (n, beta)
            })
            .collect()
    }
}

/// Builds the initial field for one run. Perturbations are relative to the
/// coexistence constant, so nonnegativity and the prey ceiling are kept.
pub fn initial_state<R: Rng>(
    p: &ModelParams,
    g: &Grid,
    kind: Perturbation,
    amplitude: f64,
    rng: &mut R,
) -> Field {
    let c = constant_coexistence_state(p);
    let mut s = Field::from_constant(g, &c);
    match kind {
        Perturbation::Eigen => {
            let dir = if p.packs >= 2 {
                difference_witness(p.packs)
            } else {
                let mut v = vec![0.0; 2];
                v[0] = 1.0;
                v
            };
            for (comp, d) in s.components.iter_mut().zip(&dir) {
                comp.iter_mut().for_each(|x| *x += amplitude * c.w * d);
            }
        }
        Perturbation::Noise => {
            for comp in s.components.iter_mut() {
                for x in comp.iter_mut() {
                    *x *= 1.0 + amplitude * rng.random_range(-1.0..1.0);
                }
            }
        }
    }
    s
}

/// Runs one initial condition through the protocol.
pub fn run_once(
    p: &ModelParams,
    g: &Grid,
    protocol: &Protocol,
    kind: Perturbation,
    run_seed: u64,
) -> Result<RunRecord> {
    let mut rng = seed::stream(run_seed, "initial", &[]);
    let s0 = initial_state(p, g, kind, protocol.amplitude, &mut rng);
    let opts = EvolveOptions {
        horizon: protocol.horizon,
        dt: protocol.dt,
        steady_tol: protocol.steady_tol,
        sample_every: protocol.sample_every,
        sum_cap: None,
    };
    let initial_sum_w = s0.aggregate().into_iter().fold(0.0, f64::max);
    let constant = constant_coexistence_state(p);
    let deviation = |s: &Field| {
        s.predators()
            .iter()
            .flatten()
            .fold(0.0_f64, |m, w| m.max((w - constant.w).abs()))
    };

    let mut record = RunRecord {
        initial_sum_w,
        ..RunRecord::failed(run_seed, kind)
    };
    let report = match evolve(p, g, &s0, &opts) {
        Ok(r) => r,
        Err(Error::NonFinite { .. }) => return Ok(record),
        Err(e) => return Err(e),
    };
    record.evolve_steps = report.steps;
    record.evolve_converged = report.converged;
    record.max_u = report.max_u;
    record.max_sum_w = report.max_sum_w;
    record.prey_ceiling_violations = report.count(crate::dynamics::BoundKind::PreyCeiling);

    let steady = if report.converged {
        Some(report.final_state)
    } else {
        let newton = NewtonOptions {
            max_iters: protocol.newton_max_iters,
            tol: protocol.steady_tol,
            ..NewtonOptions::default()
        };
        match newton_steady(p, g, &report.final_state, &newton) {
            Ok(n) => {
                record.newton_iterations = Some(n.iterations);
                Some(n.state)
            }
            Err(Error::NoConvergence { .. }) => {
                record.classification =
                    Classification::no_convergence(flatness(&report.final_state));
                record.final_state = Some(report.final_state);
                None
            }
            Err(e) => return Err(e),
        }
    };
    if let Some(s) = steady {
        record.classification = classify_solution(&s, protocol.flatness_tol);
        record.deviation_from_symmetric = deviation(&s);
        record.final_state = Some(s);
    }
    Ok(record)
}

impl RunRecord {
    fn failed(seed: u64, perturbation: Perturbation) -> Self {
        Self {
            seed,
            perturbation,
            classification: Classification::no_convergence(f64::NAN),
            evolve_steps: 0,
            evolve_converged: false,
            newton_iterations: None,
            max_u: f64::NAN,
            max_sum_w: f64::NAN,
            initial_sum_w: f64::NAN,
            prey_ceiling_violations: 0,
            deviation_from_symmetric: f64::NAN,
            final_state: None,
        }
    }
}

fn cell_label(runs: &[RunRecord]) -> Classification {
    let labels: Vec<SolutionLabel> = runs.iter().map(|r| r.classification.label).collect();
    let label = if labels.contains(&SolutionLabel::NonConstant) {
        SolutionLabel::NonConstant
    } else if labels.contains(&SolutionLabel::NoConvergence) {
        SolutionLabel::NoConvergence
    } else {
        SolutionLabel::Constant
    };
    let flat = runs
        .iter()
        .filter(|r| r.classification.label != SolutionLabel::NoConvergence)
        .map(|r| r.classification.flatness)
        .fold(0.0, f64::max);
    Classification {
        label,
        flatness: flat,
    }
}

/// Evaluates one cell; seeds come from `(master, β index, N index, run)`.
/// A run whose solvers fail is recorded as `NoConvergence`.
pub fn run_cell(
    base: &ModelParams,
    g: &Grid,
    protocol: &Protocol,
    master_seed: u64,
    (beta_idx, beta): (usize, f64),
    (pack_idx, packs): (usize, usize),
) -> Result<SweepCell> {
    let p = base.with_competition(beta).with_packs(packs);
    p.check()?;
    let start = Instant::now();
    let seeds: Vec<u64> = (0..protocol.runs)
        .map(|r| seed::derive_seed(master_seed, "sweep", &[beta_idx as u64, pack_idx as u64, r as u64]))
        .collect();
    let runs = seeds
        .iter()
        .enumerate()
        .map(|(r, &s)| {
            let kind = if r == 0 {
                Perturbation::Eigen
            } else {
                Perturbation::Noise
            };
            let mut rec = run_once(&p, g, protocol, kind, s)
                .unwrap_or_else(|_| RunRecord::failed(s, kind));
            rec.final_state = None;
            rec
        })
        .collect::<Vec<_>>();
    Ok(SweepCell {
        beta,
        packs,
        classification: cell_label(&runs),
        runs,
        seeds,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Classifies every `(β, N)` grid point.
pub fn run_sweep(
    base: &ModelParams,
    betas: &[f64],
    packs: &[usize],
    g: &Grid,
    protocol: &Protocol,
    master_seed: u64,
) -> Result<SweepResult> {
    if betas.is_empty() || packs.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be nonempty".into()));
    }
    if protocol.runs == 0 {
        return Err(Error::InvalidArgument("protocol needs at least one run".into()));
    }
    for &b in betas {
        base.with_competition(b).check()?;
    }
    for &n in packs {
        base.with_packs(n).check()?;
    }
    let jobs: Vec<(usize, usize)> = (0..packs.len())
        .flat_map(|ni| (0..betas.len()).map(move |bi| (bi, ni)))
        .collect();
    let work = |&(bi, ni): &(usize, usize)| {
        run_cell(base, g, protocol, master_seed, (bi, betas[bi]), (ni, packs[ni]))
    };
    let cells = if protocol.parallel {
        jobs.par_iter().map(work).collect::<Result<Vec<_>>>()?
    } else {
        jobs.iter().map(work).collect::<Result<Vec<_>>>()?
    };
    Ok(SweepResult {
        betas: betas.to_vec(),
        packs: packs.to_vec(),
        cells,
    })
}

/// Empirical thresholds: the largest β such that every column up to it is
/// all-constant, and the smallest N such that every row from it on is
/// all-constant. `NoConvergence` cells are ignored.
pub fn estimate_thresholds(r: &SweepResult) -> (Threshold<f64>, Threshold<usize>) {
    let nonconstant =
        |bi: usize, ni: usize| r.cell(bi, ni).classification.label == SolutionLabel::NonConstant;
    let column_bad = |bi: usize| (0..r.packs.len()).any(|ni| nonconstant(bi, ni));
    let row_bad = |ni: usize| (0..r.betas.len()).any(|bi| nonconstant(bi, ni));

    let mut beta_order: Vec<usize> = (0..r.betas.len()).collect();
    beta_order.sort_by(|&a, &b| r.betas[a].total_cmp(&r.betas[b]));
    let mut pack_order: Vec<usize> = (0..r.packs.len()).collect();
    pack_order.sort_by_key(|&i| r.packs[i]);

    if !beta_order.iter().any(|&bi| column_bad(bi)) {
        return (Threshold::UnboundedInRange, Threshold::UnboundedInRange);
    }
    let first_bad = beta_order.iter().position(|&bi| column_bad(bi)).expect("some column fails");
    let beta_bar = if first_bad == 0 {
        Threshold::BelowRange
    } else {
        Threshold::Value(r.betas[beta_order[first_bad - 1]])
    };
    let last_bad = pack_order.iter().rposition(|&ni| row_bad(ni)).expect("some row fails");
    let n_bar = if last_bad + 1 == pack_order.len() {
        Threshold::UnboundedInRange
    } else {
        Threshold::Value(r.packs[pack_order[last_bad + 1]])
    };
    (beta_bar, n_bar)
}
