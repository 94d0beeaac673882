//! Model parameters, pointwise reaction terms and the closed-form constant
//! solutions of the N-pack predator / prey system.
//!
//! Component order everywhere in the crate is `(w_1, ..., w_N, u)`.

use serde::{Deserialize, Serialize};

/// Largest admissible pack count.
pub const MAX_PACKS: usize = 1_000_000;

/// The seven scalar coefficients of the system plus the pack count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Predator diffusivity `d`.
    pub predator_diffusion: f64,
    /// Prey diffusivity `D`.
    pub prey_diffusion: f64,
    /// Predator mortality `ω`.
    pub mortality: f64,
    /// Predation coupling `k`.
    pub predation: f64,
    /// Prey growth rate `λ`.
    pub prey_growth: f64,
    /// Prey self-limitation `μ`.
    pub prey_crowding: f64,
    /// Competition between packs `β`.
    pub competition: f64,
    /// Number of packs `N`.
    pub packs: usize,
}

/// One violated parameter invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Config key the violation is attributed to.
    pub key: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl ModelParams {
    /// Reference parameter set used throughout the tests:
    /// `d=0.5, D=1, ω=0.5, k=1, λ=1, μ=1, β=1, N=2`.
    pub fn reference() -> Self {
        Self {
            predator_diffusion: 0.5,
            prey_diffusion: 1.0,
            mortality: 0.5,
            predation: 1.0,
            prey_growth: 1.0,
            prey_crowding: 1.0,
            competition: 1.0,
            packs: 2,
        }
    }

    pub fn with_packs(self, packs: usize) -> Self {
        Self { packs, ..self }
    }

    pub fn with_competition(self, competition: f64) -> Self {
        Self {
            competition,
            ..self
        }
    }

    /// Checks every invariant and reports all violations; an empty list means
    /// the parameters are admissible.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut positive = |key: &'static str, name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push(Violation {
                    key,
                    message: format!("{name} > 0"),
                });
            }
        };
        positive("d", "d", self.predator_diffusion);
        positive("D", "D", self.prey_diffusion);
        positive("omega", "omega", self.mortality);
        positive("k", "k", self.predation);
        positive("lambda", "lambda", self.prey_growth);
        positive("mu", "mu", self.prey_crowding);
        if !(self.competition.is_finite() && self.competition >= 0.0) {
            out.push(Violation {
                key: "beta",
                message: "beta ≥ 0".into(),
            });
        }
        if self.packs < 1 {
            out.push(Violation {
                key: "N",
                message: "N ≥ 1".into(),
            });
        }
        if self.packs > MAX_PACKS {
            out.push(Violation {
                key: "N",
                message: format!("N ≤ {MAX_PACKS}"),
            });
        }
        if self.prey_growth * self.predation <= self.prey_crowding * self.mortality {
            out.push(Violation {
                key: "lambda",
                message: "λk ≤ μω".into(),
            });
        }
        out
    }

    /// `validate` folded into a `Result`, for callers that need admissible input.
    pub fn check(&self) -> crate::Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = v.iter().map(|v| v.message.clone()).collect();
            Err(crate::Error::InvalidParams(msgs.join("; ")))
        }
    }

    /// `λk − μω`, positive for viable parameters.
    pub fn viability_margin(&self) -> f64 {
        self.prey_growth * self.predation - self.prey_crowding * self.mortality
    }

    /// Diffusivity of component `c` in `(w_1, ..., w_N, u)` order.
    pub fn diffusivity(&self, c: usize) -> f64 {
        if c < self.packs {
            self.predator_diffusion
        } else {
            self.prey_diffusion
        }
    }

    /// Upper bound `λ/μ` for the prey density.
    pub fn prey_ceiling(&self) -> f64 {
        self.prey_growth / self.prey_crowding
    }
}

/// Pointwise right-hand sides with diffusion removed:
/// `(−ω + ku − β Σ_{j≠i} w_j) w_i` for each pack and `(λ − μu − k Σ w_i) u`.
pub fn reaction_terms(p: &ModelParams, w: &[f64], u: f64) -> Vec<f64> {
    let mut out = vec![0.0; w.len() + 1];
    reaction_into(p, w, u, &mut out);
    out
}

/// Allocation-free form of [`reaction_terms`]; `out` has length `w.len() + 1`.
pub fn reaction_into(p: &ModelParams, w: &[f64], u: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), w.len() + 1);
    let total: f64 = w.iter().sum();
    let base = -p.mortality + p.predation * u;
    for (o, &wi) in out.iter_mut().zip(w) {
        *o = (base - p.competition * (total - wi)) * wi;
    }
    out[w.len()] = (p.prey_growth - p.prey_crowding * u - p.predation * total) * u;
}

/// A spatially uniform state `(w, ..., w, u)` with `packs` predator components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantState {
    pub w: f64,
    pub u: f64,
    pub packs: usize,
}

impl ConstantState {
    /// Component values in `(w_1, ..., w_N, u)` order.
    pub fn components(&self) -> Vec<f64> {
        let mut v = vec![self.w; self.packs];
        v.push(self.u);
        v
    }

    /// Aggregate predator density `N w`.
    pub fn aggregate(&self) -> f64 {
        self.packs as f64 * self.w
    }
}

/// The unique positive constant solution
/// `w = (λk − μω)/(μβ(N−1) + Nk²)`, `u = (λβ(N−1) + ωkN)/(μβ(N−1) + Nk²)`.
pub fn constant_coexistence_state(p: &ModelParams) -> ConstantState {
    let n = p.packs as f64;
    let cross = p.competition * (n - 1.0);
    let den = p.prey_crowding * cross + n * p.predation * p.predation;
    ConstantState {
        w: p.viability_margin() / den,
        u: (p.prey_growth * cross + p.mortality * p.predation * n) / den,
        packs: p.packs,
    }
}

/// A state `(H, u)` of the two-component system for the aggregate predator density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub h: f64,
    pub u: f64,
}

/// Reaction terms of the reduced system:
/// `((−ω + ku − β_eff H) H, (λ − μu − kH) u)`.
pub fn reduced_reaction(p: &ModelParams, beta_eff: f64, s: ReducedState) -> [f64; 2] {
    [
        (-p.mortality + p.predation * s.u - beta_eff * s.h) * s.h,
        (p.prey_growth - p.prey_crowding * s.u - p.predation * s.h) * s.u,
    ]
}

/// The three nonnegative constant states of the reduced system: total
/// extinction, prey only, and coexistence.
pub fn mimura_states(p: &ModelParams, beta_eff: f64) -> [ReducedState; 3] {
    let k = p.predation;
    let den = k * k + p.prey_crowding * beta_eff;
    [
        ReducedState { h: 0.0, u: 0.0 },
        ReducedState {
            h: 0.0,
            u: p.prey_ceiling(),
        },
        ReducedState {
            h: p.viability_margin() / den,
            u: (p.mortality * k + p.prey_growth * beta_eff) / den,
        },
    ]
}

/// Total predator populations of the symmetric constant state with `N` packs
/// and with a single pack, on a domain of the given volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PopulationComparison {
    pub with_packs: f64,
    pub single_pack: f64,
    pub ratio: f64,
}

pub fn total_population(p: &ModelParams, domain_volume: f64) -> PopulationComparison {
    let n = p.packs as f64;
    let k2 = p.predation * p.predation;
    let margin = p.viability_margin();
    let with_packs =
        margin * n / (p.prey_crowding * p.competition * (n - 1.0) + n * k2) * domain_volume;
    let single_pack = margin / k2 * domain_volume;
    PopulationComparison {
        with_packs,
        single_pack,
        ratio: with_packs / single_pack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p0() -> ModelParams {
        ModelParams::reference()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn reference_params_are_valid() {
        assert!(p0().validate().is_empty());
    }

    #[test]
    fn low_prey_growth_breaks_viability() {
        let p = ModelParams {
            prey_growth: 0.4,
            ..p0()
        };
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "λk ≤ μω");
    }

    #[test]
    fn zero_packs_rejected() {
        let v = p0().with_packs(0).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "N ≥ 1");
    }

    #[test]
    fn every_violation_is_reported() {
        let p = ModelParams {
            predator_diffusion: 0.0,
            competition: -1.0,
            packs: MAX_PACKS + 1,
            ..p0()
        };
        let keys: Vec<_> = p.validate().iter().map(|v| v.key).collect();
        assert_eq!(keys, vec!["d", "beta", "N"]);
    }

    #[test]
    fn reaction_vanishes_at_reference_constant() {
        let r = reaction_terms(&p0(), &[1.0 / 6.0, 1.0 / 6.0], 2.0 / 3.0);
        assert!(max_abs(&r) < 1e-15, "{r:?}");
    }

    #[test]
    fn reaction_vanishes_at_extinction() {
        let p = p0().with_packs(5);
        assert_eq!(reaction_terms(&p, &[0.0; 5], 0.0), vec![0.0; 6]);
    }

    #[test]
    fn reaction_matches_scalar_evaluation() {
        let p = p0();
        let (w1, w2, u) = (1.0, 0.0, 1.0);
        // written out term by term
        let f1 = (-p.mortality + p.predation * u - p.competition * w2) * w1;
        let f2 = (-p.mortality + p.predation * u - p.competition * w1) * w2;
        let g = (p.prey_growth - p.prey_crowding * u - p.predation * (w1 + w2)) * u;
        let r = reaction_terms(&p, &[w1, w2], u);
        assert_eq!(r, vec![f1, f2, g]);
        assert_eq!(r, vec![0.5, 0.0, -1.0]);
    }

    #[test]
    fn coexistence_constants_match_closed_values() {
        let cases = [
            (p0(), 1.0 / 6.0, 2.0 / 3.0),
            (p0().with_packs(1), 0.5, 0.5),
            (p0().with_competition(0.0).with_packs(3), 1.0 / 6.0, 0.5),
        ];
        for (p, w, u) in cases {
            let s = constant_coexistence_state(&p);
            assert!((s.w - w).abs() < 1e-15 && (s.u - u).abs() < 1e-15, "{s:?}");
            let r = reaction_terms(&p, &vec![s.w; p.packs], s.u);
            assert!(max_abs(&r) < 1e-15);
        }
    }

    #[test]
    fn mimura_third_state_values() {
        let p = p0();
        let free = mimura_states(&p, 0.0);
        assert_eq!(free[2], ReducedState { h: 0.5, u: 0.5 });
        let comp = mimura_states(&p, 1.0);
        assert_eq!(comp[2], ReducedState { h: 0.25, u: 0.75 });
        assert_eq!(comp[0], ReducedState { h: 0.0, u: 0.0 });
        for beta_eff in [0.0, 1.0, 3.5] {
            for s in mimura_states(&p, beta_eff) {
                let r = reduced_reaction(&p, beta_eff, s);
                assert!(r[0].abs() < 1e-15 && r[1].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reduced_system_reproduces_prey_level() {
        for (beta, n) in [(1.0, 2), (0.3, 7), (12.0, 40)] {
            let p = p0().with_competition(beta).with_packs(n);
            let c = constant_coexistence_state(&p);
            // Σ_i Σ_{j≠i} w_i w_j = (N−1)/N H² on the symmetric state
            let red = mimura_states(&p, beta * (n as f64 - 1.0) / n as f64)[2];
            assert!((red.u - c.u).abs() < 1e-14);
            assert!((red.h - c.aggregate()).abs() < 1e-14);
        }
    }

    #[test]
    fn population_examples() {
        let pop = total_population(&p0(), 1.0);
        assert!((pop.with_packs - 1.0 / 3.0).abs() < 1e-15);
        assert!((pop.single_pack - 0.5).abs() < 1e-15);
        assert!((pop.ratio - 2.0 / 3.0).abs() < 1e-15);
        // oracle: N * w from the constant state
        let c = constant_coexistence_state(&p0());
        assert!((pop.with_packs - c.aggregate()).abs() < 1e-15);

        for n in [1, 2, 9, 100] {
            let r = total_population(&p0().with_competition(0.0).with_packs(n), 1.0).ratio;
            assert!((r - 1.0).abs() < 1e-14);
        }
        let single = total_population(&p0().with_packs(1), 2.0);
        assert_eq!(single.single_pack, 1.0);
        assert_eq!(single.ratio, 1.0);
    }

    #[test]
    fn ratio_decreases_with_competition() {
        for n in [2, 3, 10, 64] {
            let mut last = f64::INFINITY;
            for i in 0..50 {
                let beta = 0.05 * i as f64;
                let r = total_population(&p0().with_competition(beta).with_packs(n), 1.0).ratio;
                assert!(r < last);
                last = r;
            }
        }
    }
}
