//! Time marching, steady-state solves and solution diagnostics.
//!
//! The solvers are written against [`ReactionSystem`], which is implemented
//! by the full N-pack system and by the two-component reduced system for the
//! aggregate predator density.

mod diagnostics;
mod imex;
mod newton;

pub use diagnostics::{
    classify_solution, flatness, mimura_identity_check, ordering_rigidity_probe, Classification,
    IdentityValues, SolutionLabel, FLATNESS_FLOOR,
};
pub use imex::{
    evolve, evolve_system, step_imex, BoundKind, BoundViolation, EvolveOptions, EvolveReport,
    ResidualSample,
};
pub use newton::{newton_steady, newton_system, NewtonOptions, NewtonReport};

use crate::grid::Field;
use crate::model::{reaction_into, ModelParams};

/// Pointwise reaction kinetics plus per-component diffusivities.
pub trait ReactionSystem: Sync {
    /// Number of components, the last of which is the prey.
    fn components(&self) -> usize;

    fn diffusivity(&self, c: usize) -> f64;

    /// Reaction rates at one node.
    fn reaction(&self, vals: &[f64], out: &mut [f64]);

    /// Row-major `C×C` Jacobian of [`ReactionSystem::reaction`] at one node.
    fn jacobian(&self, vals: &[f64], out: &mut [f64]);

    /// Upper bound on the infinity norm of the reaction Jacobian at one node.
    fn lipschitz_bound(&self, vals: &[f64]) -> f64 {
        let c = self.components();
        let mut jac = vec![0.0; c * c];
        self.jacobian(vals, &mut jac);
        jac.chunks(c)
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Invariant upper bound `λ/μ` on the prey component.
    fn prey_ceiling(&self) -> f64;
}

/// The N-pack system.
#[derive(Clone, Copy, Debug)]
pub struct FullSystem {
    pub params: ModelParams,
}

impl FullSystem {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }
}

impl ReactionSystem for FullSystem {
    fn components(&self) -> usize {
        self.params.packs + 1
    }

    fn diffusivity(&self, c: usize) -> f64 {
        self.params.diffusivity(c)
    }

    fn reaction(&self, vals: &[f64], out: &mut [f64]) {
        let n = self.params.packs;
        reaction_into(&self.params, &vals[..n], vals[n], out);
    }

    fn jacobian(&self, vals: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let n = p.packs;
        let c = n + 1;
        let u = vals[n];
        let total: f64 = vals[..n].iter().sum();
        for i in 0..n {
            let wi = vals[i];
            let row = &mut out[i * c..(i + 1) * c];
            row[..n].iter_mut().for_each(|x| *x = -p.competition * wi);
            row[i] = -p.mortality + p.predation * u - p.competition * (total - wi);
            row[n] = p.predation * wi;
        }
        let row = &mut out[n * c..];
        row[..n].iter_mut().for_each(|x| *x = -p.predation * u);
        row[n] = p.prey_growth - 2.0 * p.prey_crowding * u - p.predation * total;
    }

    fn lipschitz_bound(&self, vals: &[f64]) -> f64 {
        let p = &self.params;
        let n = p.packs;
        let u = vals[n];
        let total: f64 = vals[..n].iter().sum();
        let base = -p.mortality + p.predation * u;
        let spread = (n as f64 - 1.0) * p.competition + p.predation;
        let pack_rows = vals[..n]
            .iter()
            .map(|&wi| (base - p.competition * (total - wi)).abs() + spread * wi.abs())
            .fold(0.0, f64::max);
        let prey_row = n as f64 * p.predation * u.abs()
            + (p.prey_growth - 2.0 * p.prey_crowding * u - p.predation * total).abs();
        pack_rows.max(prey_row)
    }

    fn prey_ceiling(&self) -> f64 {
        self.params.prey_ceiling()
    }
}

/// How diffusivities are assigned in the reduced `(H, u)` system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DiffusionPairing {
    /// `H` diffuses with `D` and `u` with `d`, as in the classical
    /// predator-prey lemma statement.
    #[default]
    Lemma,
    /// `H` diffuses with `d` and `u` with `D`, as in the N-pack system.
    Model,
}

impl DiffusionPairing {
    /// `(diffusivity of H, diffusivity of u)`.
    pub fn diffusivities(self, p: &ModelParams) -> (f64, f64) {
        match self {
            Self::Lemma => (p.prey_diffusion, p.predator_diffusion),
            Self::Model => (p.predator_diffusion, p.prey_diffusion),
        }
    }
}

/// The reduced system `(−ω + ku − β_eff H) H`, `(λ − μu − kH) u`.
#[derive(Clone, Copy, Debug)]
pub struct ReducedSystem {
    pub params: ModelParams,
    pub beta_eff: f64,
    pub pairing: DiffusionPairing,
}

impl ReactionSystem for ReducedSystem {
    fn components(&self) -> usize {
        2
    }

    fn diffusivity(&self, c: usize) -> f64 {
        let (dh, du) = self.pairing.diffusivities(&self.params);
        if c == 0 {
            dh
        } else {
            du
        }
    }

    fn reaction(&self, vals: &[f64], out: &mut [f64]) {
        let [a, b] = crate::model::reduced_reaction(
            &self.params,
            self.beta_eff,
            crate::model::ReducedState {
                h: vals[0],
                u: vals[1],
            },
        );
        out[0] = a;
        out[1] = b;
    }

    fn jacobian(&self, vals: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let (h, u) = (vals[0], vals[1]);
        out[0] = -p.mortality + p.predation * u - 2.0 * self.beta_eff * h;
        out[1] = p.predation * h;
        out[2] = -p.predation * u;
        out[3] = p.prey_growth - 2.0 * p.prey_crowding * u - p.predation * h;
    }

    fn prey_ceiling(&self) -> f64 {
        self.params.prey_ceiling()
    }
}

/// `D_c Δ_h s_c + f_c(s)` for every component.
pub fn system_residual<S: ReactionSystem + ?Sized>(sys: &S, s: &Field) -> Vec<Vec<f64>> {
    let g = &s.grid;
    let cc = sys.components();
    let mut out: Vec<Vec<f64>> = (0..cc).map(|_| vec![0.0; g.len()]).collect();
    for (c, o) in out.iter_mut().enumerate() {
        g.laplacian_into(&s.components[c], o);
        let d = sys.diffusivity(c);
        o.iter_mut().for_each(|x| *x *= d);
    }
    let mut vals = vec![0.0; cc];
    let mut rates = vec![0.0; cc];
    for node in 0..g.len() {
        for c in 0..cc {
            vals[c] = s.components[c][node];
        }
        sys.reaction(&vals, &mut rates);
        for c in 0..cc {
            out[c][node] += rates[c];
        }
    }
    out
}

/// Max-norm of [`system_residual`].
pub fn max_residual<S: ReactionSystem + ?Sized>(sys: &S, s: &Field) -> f64 {
    system_residual(sys, s)
        .iter()
        .flatten()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_jacobian_matches_finite_differences() {
        let p = ModelParams::reference().with_packs(4).with_competition(2.5);
        let sys = FullSystem::new(p);
        let vals = [0.3, 0.1, 0.25, 0.05, 0.6];
        let c = vals.len();
        let mut jac = vec![0.0; c * c];
        sys.jacobian(&vals, &mut jac);
        let eps = 1e-7;
        for j in 0..c {
            let (mut plus, mut minus) = (vals, vals);
            plus[j] += eps;
            minus[j] -= eps;
            let (mut fp, mut fm) = (vec![0.0; c], vec![0.0; c]);
            sys.reaction(&plus, &mut fp);
            sys.reaction(&minus, &mut fm);
            for i in 0..c {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                assert!((fd - jac[i * c + j]).abs() < 1e-8, "({i},{j})");
            }
        }
        let dense_bound = jac
            .chunks(c)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        assert!((sys.lipschitz_bound(&vals) - dense_bound).abs() < 1e-14);
    }

    #[test]
    fn reduced_jacobian_matches_finite_differences() {
        let sys = ReducedSystem {
            params: ModelParams::reference(),
            beta_eff: 3.0,
            pairing: DiffusionPairing::Lemma,
        };
        let vals = [0.4, 0.7];
        let mut jac = [0.0; 4];
        sys.jacobian(&vals, &mut jac);
        let eps = 1e-7;
        for j in 0..2 {
            let (mut plus, mut minus) = (vals, vals);
            plus[j] += eps;
            minus[j] -= eps;
            let (mut fp, mut fm) = ([0.0; 2], [0.0; 2]);
            sys.reaction(&plus, &mut fp);
            sys.reaction(&minus, &mut fm);
            for i in 0..2 {
                assert!(((fp[i] - fm[i]) / (2.0 * eps) - jac[i * 2 + j]).abs() < 1e-8);
            }
        }
        assert_eq!(sys.diffusivity(0), 1.0);
        assert_eq!(sys.diffusivity(1), 0.5);
    }
}
