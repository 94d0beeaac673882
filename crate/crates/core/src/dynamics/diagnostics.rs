use serde::Serialize;

use crate::grid::Field;
use crate::model::{mimura_states, ModelParams};
use crate::{Error, Result};

use super::DiffusionPairing;

/// Denominator floor for relative flatness, so extinct components give 0/floor.
pub const FLATNESS_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolutionLabel {
    Constant,
    NonConstant,
    NoConvergence,
}

impl SolutionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "Constant",
            Self::NonConstant => "NonConstant",
            Self::NoConvergence => "NoConvergence",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub label: SolutionLabel,
    pub flatness: f64,
}

impl Classification {
    pub fn no_convergence(flatness: f64) -> Self {
        Self {
            label: SolutionLabel::NoConvergence,
            flatness,
        }
    }
}

/// Largest relative spatial spread `(max − min) / max(|mean|, floor)` over components.
pub fn flatness(s: &Field) -> f64 {
    s.components
        .iter()
        .map(|c| {
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            (hi - lo) / mean.abs().max(FLATNESS_FLOOR)
        })
        .fold(0.0, f64::max)
}

/// Labels a converged steady state `Constant` when every component is flat
/// to within `flatness_tol`.
pub fn classify_solution(s: &Field, flatness_tol: f64) -> Classification {
    let f = flatness(s);
    Classification {
        label: if f < flatness_tol {
            SolutionLabel::Constant
        } else {
            SolutionLabel::NonConstant
        },
        flatness: f,
    }
}

/// The two sides of the integral identity behind constancy of the reduced
/// system: `I_reaction = ∫ β_eff (H − 𝔥)² + μ (u − 𝔲)²` and
/// `I_dirichlet = −𝔥 ∫ D_H |∇H|²/H² − 𝔲 ∫ D_u |∇u|²/u²`.
/// For a steady state both equal the same integral, so they must agree
/// (and, having opposite signs, vanish).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityValues {
    pub reaction: f64,
    pub dirichlet: f64,
}

impl IdentityValues {
    pub fn gap(&self) -> f64 {
        (self.reaction - self.dirichlet).abs()
    }
}

/// Evaluates both sides of the identity on a reduced field `(H, u)`.
/// Gradients live on cell faces; `1/H²` on a face uses `1/(H_a H_b)`.
pub fn mimura_identity_check(
    p: &ModelParams,
    s: &Field,
    beta_eff: f64,
    pairing: DiffusionPairing,
) -> Result<IdentityValues> {
    if s.components.len() != 2 {
        return Err(Error::SizeMismatch {
            expected: 2,
            got: s.components.len(),
        });
    }
    let (h, u) = (&s.components[0], &s.components[1]);
    if h.iter().chain(u).any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(
            "identity needs strictly positive H and u".into(),
        ));
    }
    let coex = mimura_states(p, beta_eff)[2];
    let g = &s.grid;
    let reaction_density: Vec<f64> = h
        .iter()
        .zip(u)
        .map(|(&hv, &uv)| {
            beta_eff * (hv - coex.h).powi(2) + p.prey_crowding * (uv - coex.u).powi(2)
        })
        .collect();
    let reaction = g.integrate(&reaction_density);

    let (dh, du) = pairing.diffusivities(p);
    let dirichlet = -coex.h * dh * log_gradient_energy(s, 0) - coex.u * du * log_gradient_energy(s, 1);
    Ok(IdentityValues { reaction, dirichlet })
}

/// `∫ |∇a|² / a²` with face differences.
fn log_gradient_energy(s: &Field, comp: usize) -> f64 {
    let g = &s.grid;
    let a = &s.components[comp];
    let strides = g.strides();
    let mut total = 0.0;
    for (axis, (&m, &hx)) in g.cells().iter().zip(g.spacing()).enumerate() {
        let stride = strides[axis];
        for idx in 0..g.len() {
            if (idx / stride) % m + 1 < m {
                let (l, r) = (a[idx], a[idx + stride]);
                let grad = (r - l) / hx;
                total += grad * grad / (l * r);
            }
        }
    }
    total * g.cell_volume()
}

/// Pairs `(i, j)` of packs with `w_i ≥ w_j + δ` everywhere while `w_j` is
/// not negligible. For steady states with competition this list is empty.
pub fn ordering_rigidity_probe(s: &Field, delta: f64) -> Vec<(usize, usize)> {
    let packs = s.predators();
    let mut out = Vec::new();
    for (i, wi) in packs.iter().enumerate() {
        for (j, wj) in packs.iter().enumerate() {
            if i == j {
                continue;
            }
            let dominates = wi.iter().zip(wj).all(|(a, b)| *a >= b + delta);
            let alive = wj.iter().any(|&b| b > delta);
            let apart = wi.iter().zip(wj).any(|(a, b)| (a - b).abs() > delta);
            if dominates && alive && apart {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::constant_coexistence_state;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_is_flat() {
        let g = Grid::interval(1.0, 30).unwrap();
        let s = Field::from_constant(&g, &constant_coexistence_state(&ModelParams::reference()));
        let c = classify_solution(&s, 1e-5);
        assert_eq!(c.label, SolutionLabel::Constant);
        assert_eq!(c.flatness, 0.0);
    }

    #[test]
    fn bumped_prey_is_not_flat() {
        let g = Grid::interval(1.0, 100).unwrap();
        let mut s = Field::from_constant(&g, &constant_coexistence_state(&ModelParams::reference()));
        for (j, x) in s.components[2].iter_mut().enumerate() {
            *x += 0.1 * (PI * g.center(j)[0]).cos();
        }
        let c = classify_solution(&s, 1e-5);
        assert_eq!(c.label, SolutionLabel::NonConstant);
        // spread ≈ 0.2 over a mean of 2/3
        assert!((c.flatness - 0.3).abs() < 1e-3, "{}", c.flatness);
    }

    #[test]
    fn extinct_components_use_the_floor() {
        let g = Grid::interval(1.0, 10).unwrap();
        let s = Field::uniform(&g, &[0.5, 0.0, 0.5]);
        assert_eq!(flatness(&s), 0.0);
    }

    #[test]
    fn identity_vanishes_at_coexistence() {
        let p = ModelParams::reference();
        let g = Grid::interval(1.0, 50).unwrap();
        let coex = mimura_states(&p, 1.0)[2];
        let s = Field::uniform(&g, &[coex.h, coex.u]);
        let v = mimura_identity_check(&p, &s, 1.0, DiffusionPairing::Lemma).unwrap();
        assert_eq!(v.reaction, 0.0);
        assert_eq!(v.dirichlet, 0.0);
    }

    #[test]
    fn identity_rejects_nonpositive_values() {
        let p = ModelParams::reference();
        let g = Grid::interval(1.0, 10).unwrap();
        let s = Field::uniform(&g, &[0.0, 0.5]);
        assert!(mimura_identity_check(&p, &s, 1.0, DiffusionPairing::Lemma).is_err());
    }

    #[test]
    fn manufactured_field_matches_quadrature() {
        // H = 𝔥(1 + 0.1 cos πx), u = 𝔲: I_reaction = β 𝔥² 0.01 ∫ cos² πx = β 𝔥² / 200
        let p = ModelParams::reference();
        let beta = 1.0;
        let coex = mimura_states(&p, beta)[2];
        let exact_reaction = beta * coex.h * coex.h / 200.0;
        // ∫ |H'|²/H² = ∫ (0.1π sin πx)² / (1 + 0.1 cos πx)² dx, by fine Simpson
        let simpson = {
            let n = 20_000;
            let f = |x: f64| {
                let s = 0.1 * PI * (PI * x).sin();
                s * s / (1.0 + 0.1 * (PI * x).cos()).powi(2)
            };
            let h = 1.0 / n as f64;
            (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * f(i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let exact_dirichlet = -coex.h * p.prey_diffusion * simpson;
        let mut errs = Vec::new();
        for m in [100, 200] {
            let g = Grid::interval(1.0, m).unwrap();
            let h: Vec<f64> = (0..m)
                .map(|j| coex.h * (1.0 + 0.1 * (PI * g.center(j)[0]).cos()))
                .collect();
            let s = Field::new(g.clone(), vec![h, vec![coex.u; m]]).unwrap();
            let v = mimura_identity_check(&p, &s, beta, DiffusionPairing::Lemma).unwrap();
            assert!(v.reaction > 0.0 && v.dirichlet < 0.0);
            errs.push(((v.reaction - exact_reaction).abs(), (v.dirichlet - exact_dirichlet).abs()));
        }
        assert!(errs[1].0 < 1e-10 && errs[1].1 < 1e-6, "{errs:?}");
        // second-order convergence of the face quadrature
        assert!(errs[1].1 < errs[0].1 / 3.0, "{errs:?}");
    }

    #[test]
    fn rigidity_probe_cases() {
        let g = Grid::interval(1.0, 10).unwrap();
        let sym = Field::uniform(&g, &[0.2, 0.2, 0.2, 0.6]);
        assert!(ordering_rigidity_probe(&sym, 1e-6).is_empty());
        let extinct = Field::uniform(&g, &[0.4, 0.0, 0.6]);
        assert!(ordering_rigidity_probe(&extinct, 1e-6).is_empty());
        let ordered = Field::uniform(&g, &[0.4, 0.1, 0.6]);
        assert_eq!(ordering_rigidity_probe(&ordered, 1e-6), vec![(0, 1)]);
    }
}
