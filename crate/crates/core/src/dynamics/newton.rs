use super::{system_residual, FullSystem, ReactionSystem};
use crate::grid::{Field, Grid};
use crate::linalg::BandedMatrix;
use crate::model::ModelParams;
use crate::{Error, Result};

/// Banded storage beyond this many entries is refused.
const MAX_BAND_STORAGE: usize = 60_000_000;

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Target max-norm of the stationary residual.
    pub tol: f64,
    pub max_halvings: usize,
    /// Relative pivot size below which the Jacobian is declared singular.
    pub pivot_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-9,
            max_halvings: 30,
            pivot_tol: 1e-13,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub state: Field,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves the stationary N-pack system by damped Newton iteration on the
/// fully coupled discrete Jacobian.
pub fn newton_steady(
    p: &ModelParams,
    g: &Grid,
    guess: &Field,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    p.check()?;
    newton_system(&FullSystem::new(*p), g, guess, opts)
}

pub fn newton_system<S: ReactionSystem>(
    sys: &S,
    g: &Grid,
    guess: &Field,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let cc = sys.components();
    if guess.components.len() != cc {
        return Err(Error::SizeMismatch {
            expected: cc,
            got: guess.components.len(),
        });
    }
    if &guess.grid != g || !guess.is_finite() {
        return Err(Error::InvalidArgument("guess must be a finite field on the grid".into()));
    }
    let nodes = g.len();
    let n = cc * nodes;
    let stride = *g.strides().last().expect("grid has an axis");
    let band = cc * stride;
    if BandedMatrix::storage_len(n, band, band) > MAX_BAND_STORAGE {
        return Err(Error::InvalidArgument(format!(
            "Newton system with {n} unknowns and bandwidth {band} is too large"
        )));
    }

    let mut state = guess.clone();
    let mut res = flatten(&system_residual(sys, &state), cc);
    let mut norm = max_norm(&res);
    let mut iterations = 0;
    while norm >= opts.tol {
        if iterations == opts.max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
                reason: "iteration cap reached".into(),
            });
        }
        let jac = assemble_jacobian(sys, &state, band);
        let lu = jac.factorize(opts.pivot_tol).map_err(|sp| Error::NoConvergence {
            iterations,
            residual: norm,
            reason: format!(
                "singular Jacobian (pivot {:e} in column {})",
                sp.value, sp.column
            ),
        })?;
        let mut step: Vec<f64> = res.iter().map(|r| -r).collect();
        lu.solve(&mut step);

        let merit = l2(&res);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = state.clone();
            for node in 0..nodes {
                for c in 0..cc {
                    trial.components[c][node] += alpha * step[node * cc + c];
                }
            }
            if trial.is_finite() {
                let trial_res = flatten(&system_residual(sys, &trial), cc);
                if l2(&trial_res) < (1.0 - 1e-4 * alpha) * merit {
                    accepted = Some((trial, trial_res));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, trial_res)) = accepted else {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
                reason: "line search failed".into(),
            });
        };
        state = trial;
        res = trial_res;
        norm = max_norm(&res);
        iterations += 1;
    }
    Ok(NewtonReport {
        state,
        iterations,
        residual: norm,
    })
}

/// Node-major ordering: unknown `node * C + c`.
fn flatten(comps: &[Vec<f64>], cc: usize) -> Vec<f64> {
    let nodes = comps[0].len();
    let mut out = vec![0.0; nodes * cc];
    for (c, comp) in comps.iter().enumerate() {
        for (node, v) in comp.iter().enumerate() {
            out[node * cc + c] = *v;
        }
    }
    out
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn assemble_jacobian<S: ReactionSystem>(sys: &S, s: &Field, band: usize) -> BandedMatrix {
    let g = &s.grid;
    let cc = sys.components();
    let nodes = g.len();
    let mut jac = BandedMatrix::zeros(cc * nodes, band, band);
    let strides = g.strides();
    for (axis, (&m, &h)) in g.cells().iter().zip(g.spacing()).enumerate() {
        let stride = strides[axis];
        let inv_h2 = 1.0 / (h * h);
        for node in 0..nodes {
            let j = (node / stride) % m;
            for c in 0..cc {
                let d = sys.diffusivity(c) * inv_h2;
                let row = node * cc + c;
                if j > 0 {
                    jac.add(row, (node - stride) * cc + c, d);
                    jac.add(row, row, -d);
                }
                if j + 1 < m {
                    jac.add(row, (node + stride) * cc + c, d);
                    jac.add(row, row, -d);
                }
            }
        }
    }
    let mut vals = vec![0.0; cc];
    let mut block = vec![0.0; cc * cc];
    for node in 0..nodes {
        for c in 0..cc {
            vals[c] = s.components[c][node];
        }
        sys.jacobian(&vals, &mut block);
        for i in 0..cc {
            for j in 0..cc {
                let v = block[i * cc + j];
                if v != 0.0 {
                    jac.add(node * cc + i, node * cc + j, v);
                }
            }
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{classify_solution, evolve, EvolveOptions, SolutionLabel};
    use crate::model::constant_coexistence_state;

    #[test]
    fn exact_constant_needs_no_iteration() {
        let p = ModelParams::reference();
        let g = Grid::interval(1.0, 40).unwrap();
        let s = Field::from_constant(&g, &constant_coexistence_state(&p));
        let rep = newton_steady(&p, &g, &s, &NewtonOptions::default()).unwrap();
        assert!(rep.iterations <= 1);
        assert!(rep.state.max_distance(&s) < 1e-14);
    }

    #[test]
    fn weak_competition_converges_to_the_constant() {
        let p = ModelParams::reference().with_competition(0.01).with_packs(3);
        let g = Grid::interval(1.0, 60).unwrap();
        let c = constant_coexistence_state(&p);
        let mut guess = Field::from_constant(&g, &c);
        for (comp, shift) in guess.components.iter_mut().zip([1.0, 2.0, 3.0, 4.0]) {
            for (j, x) in comp.iter_mut().enumerate() {
                *x *= 1.0 + 1e-3 * ((j as f64 + shift) * 0.7).sin();
            }
        }
        let rep = newton_steady(&p, &g, &guess, &NewtonOptions::default()).unwrap();
        let cls = classify_solution(&rep.state, 1e-8);
        assert_eq!(cls.label, SolutionLabel::Constant);
        assert!(rep.state.max_distance(&Field::from_constant(&g, &c)) < 1e-9);

        // the single-pack analogue relaxes to the same kind of state under time marching
        let p1 = p.with_packs(1);
        let c1 = constant_coexistence_state(&p1);
        let mut s = Field::from_constant(&g, &c1);
        s.components[0][5] *= 1.001;
        let ev = evolve(&p1, &g, &s, &EvolveOptions::default()).unwrap();
        assert!(ev.converged);
        assert!(classify_solution(&ev.final_state, 1e-8).label == SolutionLabel::Constant);
    }

    #[test]
    fn solves_in_two_dimensions() {
        let p = ModelParams::reference().with_competition(0.5).with_packs(2);
        let g = Grid::new(&[1.0, 1.5], &[8, 10]).unwrap();
        let c = constant_coexistence_state(&p);
        let mut guess = Field::from_constant(&g, &c);
        let shape = g.cosine_mode(&[1, 1]);
        for (x, v) in guess.components[2].iter_mut().zip(&shape) {
            *x *= 1.0 + 0.01 * v;
        }
        let rep = newton_steady(&p, &g, &guess, &NewtonOptions::default()).unwrap();
        assert!(rep.residual < 1e-9);
        assert!(rep.state.max_distance(&Field::from_constant(&g, &c)) < 1e-9);
    }

    #[test]
    fn neutral_simplex_is_singular() {
        let p = ModelParams::reference().with_competition(0.0).with_packs(3);
        let g = Grid::interval(1.0, 10).unwrap();
        let c = constant_coexistence_state(&p);
        let mut guess = Field::from_constant(&g, &c);
        // trade mass between two packs so that H and u stay on the simplex
        for (j, x) in g.cosine_mode(&[1]).iter().enumerate() {
            guess.components[0][j] += 1e-3 * x;
            guess.components[1][j] -= 1e-3 * x;
        }
        match newton_steady(&p, &g, &guess, &NewtonOptions::default()) {
            Err(Error::NoConvergence { reason, .. }) => assert!(reason.contains("singular")),
            other => panic!("expected singular Jacobian, got {:?}", other.map(|r| r.residual)),
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let p = ModelParams::reference();
        let g = Grid::interval(1.0, 10).unwrap();
        let guess = Field::uniform(&g, &[0.3, 0.01, 0.2]);
        let opts = NewtonOptions {
            max_iters: 1,
            ..Default::default()
        };
        assert!(matches!(
            newton_steady(&p, &g, &guess, &opts),
            Err(Error::NoConvergence { iterations: 1, .. })
        ));
    }
}
