//! Linearization at the coexistence constant and its spectrum.
//!
//! The matrix `A_β` has a zero predator diagonal, `−βw` off the diagonal of
//! the predator block, `kw` in the prey column and `−ku`, `−μu` in the prey
//! row. Its characteristic polynomial factors as
//! `(βw − γ)^{N−1} [γ² + γ(μu + (N−1)βw) + ((N−1)βμ + Nk²) uw]`, which is
//! what [`spectrum_closed_form`] evaluates. [`spectrum_numeric`] runs a dense
//! eigensolver and serves as the cross-check.
//!
//! [`mode_block`] extends the analysis to a Neumann eigenmode with Laplacian
//! eigenvalue `ν` by subtracting `ν·diag(d, ..., d, D)`. This is a heuristic:
//! with `d ≠ D` the spectrum of `A_β` alone does not settle stability of
//! nonconstant perturbations, so nothing here asserts mode-level theorems.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::model::{constant_coexistence_state, ModelParams};
use crate::{Error, Result};

/// Eigenvalues with multiplicities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub entries: Vec<(Complex64, usize)>,
}

impl Spectrum {
    /// Sum of multiplicities.
    pub fn dimension(&self) -> usize {
        self.entries.iter().map(|(_, m)| m).sum()
    }

    /// Flattened eigenvalue list, each repeated by its multiplicity.
    pub fn to_multiset(&self) -> Vec<Complex64> {
        self.entries
            .iter()
            .flat_map(|&(z, m)| std::iter::repeat_n(z, m))
            .collect()
    }

    /// Largest real part.
    pub fn spectral_abscissa(&self) -> f64 {
        self.entries
            .iter()
            .map(|(z, _)| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Roots of `γ² + bγ + c` without cancellation: `q = −(b + sign(b)√(b²−4c))/2`,
/// roots `q` and `c/q`; a conjugate pair when the discriminant is negative.
pub fn monic_quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
        if q == 0.0 {
            // b = 0 and c = 0
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// `A_β` evaluated at the coexistence constant, `(N+1)×(N+1)`.
pub fn linearized_matrix(p: &ModelParams) -> DMatrix<f64> {
    let s = constant_coexistence_state(p);
    let n = p.packs;
    let off = -p.competition * s.w;
    DMatrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) if i == j => 0.0,
        (true, true) => off,
        (true, false) => p.predation * s.w,
        (false, true) => -p.predation * s.u,
        (false, false) => -p.prey_crowding * s.u,
    })
}

/// `A_β − ν·diag(d, ..., d, D)` for a Laplacian eigenvalue `ν ≥ 0`.
pub fn mode_block(p: &ModelParams, nu: f64) -> Result<DMatrix<f64>> {
    check_mode(nu)?;
    let mut m = linearized_matrix(p);
    for c in 0..=p.packs {
        m[(c, c)] -= nu * p.diffusivity(c);
    }
    Ok(m)
}

/// Closed-form spectrum of [`mode_block`]: the predator-difference eigenvalue
/// `βw − νd` with multiplicity `N−1`, plus the two eigenvalues of the
/// symmetric-mode block `[[−(N−1)βw − νd, kw], [−Nku, −μu − νD]]`.
pub fn mode_spectrum(p: &ModelParams, nu: f64) -> Result<Spectrum> {
    check_mode(nu)?;
    let s = constant_coexistence_state(p);
    let n = p.packs as f64;
    let diff = p.competition * s.w - nu * p.predator_diffusion;
    let a11 = -(n - 1.0) * p.competition * s.w - nu * p.predator_diffusion;
    let a22 = -p.prey_crowding * s.u - nu * p.prey_diffusion;
    let det = a11 * a22 + n * p.predation * p.predation * s.u * s.w;
    let [l1, l2] = monic_quadratic_roots(-(a11 + a22), det);
    let mut entries = Vec::with_capacity(3);
    if p.packs >= 2 {
        entries.push((Complex64::new(diff, 0.0), p.packs - 1));
    }
    entries.push((l1, 1));
    entries.push((l2, 1));
    Ok(Spectrum { entries })
}

/// `{βw ×(N−1), Λ₁, Λ₂}`; for `N = 1` only the quadratic factor applies.
pub fn spectrum_closed_form(p: &ModelParams) -> Spectrum {
    mode_spectrum(p, 0.0).expect("zero mode is admissible")
}

fn check_mode(nu: f64) -> Result<()> {
    if nu.is_finite() && nu >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "Laplacian eigenvalue must be ≥ 0, got {nu}"
        )))
    }
}

/// Eigenvalues of a dense real matrix, unordered.
pub fn spectrum_numeric(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    // LAPACK dgeev: robust on the highly degenerate predator blocks
    let eig = nalgebra_lapack::Eigen::new(m.clone(), false, false).ok_or_else(|| Error::NoConvergence {
        iterations: 0,
        residual: f64::NAN,
        reason: "dense eigensolver failed".into(),
    })?;
    Ok(eig
        .eigenvalues_re
        .iter()
        .zip(eig.eigenvalues_im.iter())
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect())
}

/// Greedy multiset distance: the largest gap after matching each eigenvalue of
/// `a` with its nearest unused partner in `b`. Infinite when sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    for za in a {
        let (idx, dist) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, zb)| (i, (za - zb).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("sizes match");
        used[idx] = true;
        worst = worst.max(dist);
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StabilityLabel {
    StableN1,
    WeaklyStableSimplex,
    StronglyUnstable,
    ExtinctionUnstable,
}

/// Verdict on a constant state; `witness` is a unit eigenvector of a
/// positive eigenvalue and is present only for `StronglyUnstable`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub label: StabilityLabel,
    pub witness: Option<Vec<f64>>,
}

/// The deterministic unit witness `(1, −1, 0, ..., 0)/√2` of length `N+1`.
pub fn difference_witness(packs: usize) -> Vec<f64> {
    let mut v = vec![0.0; packs + 1];
    v[0] = std::f64::consts::FRAC_1_SQRT_2;
    v[1] = -std::f64::consts::FRAC_1_SQRT_2;
    v
}

/// Classifies the coexistence constant: stable for one pack, weakly stable
/// (a neutral simplex) without competition, strongly unstable otherwise.
pub fn classify_constant_stability(p: &ModelParams) -> StabilityVerdict {
    if p.packs == 1 {
        StabilityVerdict {
            label: StabilityLabel::StableN1,
            witness: None,
        }
    } else if p.competition == 0.0 {
        StabilityVerdict {
            label: StabilityLabel::WeaklyStableSimplex,
            witness: None,
        }
    } else {
        StabilityVerdict {
            label: StabilityLabel::StronglyUnstable,
            witness: Some(difference_witness(p.packs)),
        }
    }
}

/// Which semi-trivial constant state to examine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrivialState {
    /// `(0, 0)`
    Extinction,
    /// `(0, λ/μ)`
    PreyOnly,
}

/// Growth rates of the linearization at a semi-trivial state. The Jacobian
/// there is triangular, so its diagonal is its spectrum.
pub fn trivial_state_rates(p: &ModelParams, state: TrivialState) -> Vec<f64> {
    let (pack_rate, prey_rate) = match state {
        TrivialState::Extinction => (-p.mortality, p.prey_growth),
        TrivialState::PreyOnly => (
            -p.mortality + p.predation * p.prey_ceiling(),
            -p.prey_growth,
        ),
    };
    let mut v = vec![pack_rate; p.packs];
    v.push(prey_rate);
    v
}

/// Both semi-trivial states carry a positive growth rate for viable
/// parameters; returns `ExtinctionUnstable` when that holds.
pub fn classify_trivial_state(p: &ModelParams, state: TrivialState) -> Option<StabilityVerdict> {
    let unstable = trivial_state_rates(p, state).iter().any(|&r| r > 0.0);
    unstable.then_some(StabilityVerdict {
        label: StabilityLabel::ExtinctionUnstable,
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p0() -> ModelParams {
        ModelParams::reference()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reference_matrix_entries() {
        let m = linearized_matrix(&p0());
        let t = 1.0 / 6.0;
        let f = 2.0 / 3.0;
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, -t, t, -t, 0.0, t, -f, -f, -f]);
        assert!((m - expected).abs().max() < 1e-15);
    }

    #[test]
    fn no_competition_zeroes_predator_block() {
        let m = linearized_matrix(&p0().with_competition(0.0).with_packs(4));
        assert!(m.view((0, 0), (4, 4)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_pack_matrix() {
        let p = p0().with_packs(1);
        let m = linearized_matrix(&p);
        let s = constant_coexistence_state(&p);
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(0, 0)], 0.0);
        assert_eq!(m[(0, 1)], s.w);
        assert_eq!(m[(1, 0)], -s.u);
        assert_eq!(m[(1, 1)], -s.u);
    }

    #[test]
    fn reference_closed_form_spectrum() {
        let sp = spectrum_closed_form(&p0());
        let r23 = 23.0_f64.sqrt() / 12.0;
        let expected = [c(1.0 / 6.0, 0.0), c(-5.0 / 12.0, r23), c(-5.0 / 12.0, -r23)];
        assert_eq!(sp.dimension(), 3);
        assert!(multiset_distance(&sp.to_multiset(), &expected) < 1e-15);
        let numeric = spectrum_numeric(&linearized_matrix(&p0())).unwrap();
        assert!(multiset_distance(&sp.to_multiset(), &numeric) < 1e-10);
    }

    #[test]
    fn no_competition_spectrum() {
        let p = p0().with_competition(0.0).with_packs(3);
        let s = constant_coexistence_state(&p);
        let sp = spectrum_closed_form(&p);
        assert_eq!(sp.entries[0], (c(0.0, 0.0), 2));
        let quad = monic_quadratic_roots(p.prey_crowding * s.u, 3.0 * s.u * s.w);
        assert!(multiset_distance(&sp.to_multiset()[2..], &quad) < 1e-15);
        let numeric = spectrum_numeric(&linearized_matrix(&p)).unwrap();
        assert!(multiset_distance(&sp.to_multiset(), &numeric) < 1e-10);
    }

    #[test]
    fn quadratic_roots_vieta_for_two_packs() {
        for beta in [0.1, 1.0, 7.0] {
            let p = p0().with_competition(beta);
            let s = constant_coexistence_state(&p);
            let sp = spectrum_closed_form(&p);
            let (l1, l2) = (sp.entries[1].0, sp.entries[2].0);
            let prod = (beta * p.prey_crowding + 2.0) * s.u * s.w;
            let sum = -(p.prey_crowding * s.u + beta * s.w);
            assert!(((l1 * l2) - c(prod, 0.0)).norm() < 1e-14);
            assert!(((l1 + l2) - c(sum, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn quadratic_roots_real_branch_is_stable() {
        // γ² + 1e8 γ + 1: naive formula loses the small root entirely
        let [a, b] = monic_quadratic_roots(1e8, 1.0);
        let small = if a.re.abs() < b.re.abs() { a } else { b };
        assert!((small.re + 1e-8).abs() < 1e-22);
    }

    #[test]
    fn numeric_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!(multiset_distance(&spectrum_numeric(&id).unwrap(), &[c(1.0, 0.0); 3]) < 1e-14);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -3.0]));
        let ev = spectrum_numeric(&d).unwrap();
        assert!(multiset_distance(&ev, &[c(2.0, 0.0), c(-3.0, 0.0)]) < 1e-14);
        assert!(matches!(
            spectrum_numeric(&DMatrix::<f64>::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn verdicts() {
        let v = classify_constant_stability(&p0());
        assert_eq!(v.label, StabilityLabel::StronglyUnstable);
        let wit = v.witness.unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(wit, vec![h, -h, 0.0]);
        let m = linearized_matrix(&p0());
        let av = &m * nalgebra::DVector::from_vec(wit.clone());
        let s = constant_coexistence_state(&p0());
        for (a, x) in av.iter().zip(&wit) {
            assert!((a - s.w * x).abs() < 1e-15);
        }
        assert_eq!(
            classify_constant_stability(&p0().with_packs(1)).label,
            StabilityLabel::StableN1
        );
        let weak = classify_constant_stability(&p0().with_competition(0.0).with_packs(5));
        assert_eq!(weak.label, StabilityLabel::WeaklyStableSimplex);
        assert!(weak.witness.is_none());
    }

    #[test]
    fn semi_trivial_states_are_unstable() {
        for state in [TrivialState::Extinction, TrivialState::PreyOnly] {
            let v = classify_trivial_state(&p0(), state).unwrap();
            assert_eq!(v.label, StabilityLabel::ExtinctionUnstable);
        }
    }

    #[test]
    fn mode_examples() {
        let p = p0();
        assert_eq!(mode_block(&p, 0.0).unwrap(), linearized_matrix(&p));
        assert!(mode_block(&p, -1.0).is_err());
        assert!(mode_spectrum(&p, f64::NAN).is_err());

        let sp = mode_spectrum(&p, 1.0).unwrap();
        assert!((sp.entries[0].0.re + 1.0 / 3.0).abs() < 1e-15);
        let numeric = spectrum_numeric(&mode_block(&p, 1.0).unwrap()).unwrap();
        assert!(numeric.iter().any(|z| (z - c(-1.0 / 3.0, 0.0)).norm() < 1e-12));
        assert!(multiset_distance(&sp.to_multiset(), &numeric) < 1e-10);

        let marginal = mode_spectrum(&p, 1.0 / 3.0).unwrap();
        assert!(marginal.entries[0].0.norm() < 1e-15);
        let numeric = spectrum_numeric(&mode_block(&p, 1.0 / 3.0).unwrap()).unwrap();
        assert!(numeric.iter().any(|z| z.norm() < 1e-12));
    }

    fn params_strategy() -> impl Strategy<Value = ModelParams> {
        (
            0.05..3.0f64,
            0.05..3.0f64,
            0.05..2.0f64,
            0.1..3.0f64,
            0.0..5.0f64,
            0.05..3.0f64,
            0.0..20.0f64,
            1usize..=30,
        )
            .prop_map(|(d, dd, omega, k, excess, mu, beta, n)| ModelParams {
                predator_diffusion: d,
                prey_diffusion: dd,
                mortality: omega,
                predation: k,
                // λ chosen so that λk > μω
                prey_growth: mu * omega / k * (1.05 + excess),
                prey_crowding: mu,
                competition: beta,
                packs: n,
            })
    }

    proptest! {
        #[test]
        fn closed_and_numeric_spectra_agree(p in params_strategy()) {
            prop_assert!(p.validate().is_empty());
            let closed = spectrum_closed_form(&p);
            prop_assert_eq!(closed.dimension(), p.packs + 1);
            let numeric = spectrum_numeric(&linearized_matrix(&p)).unwrap();
            prop_assert!(multiset_distance(&closed.to_multiset(), &numeric) < 1e-10);
            let quad = &closed.entries[closed.entries.len() - 2..];
            prop_assert!(quad.iter().all(|(z, _)| z.re < 0.0));
        }

        #[test]
        fn mode_spectrum_matches_shifted_block(p in params_strategy(), nu in 0.0..50.0f64) {
            let closed = mode_spectrum(&p, nu).unwrap();
            let numeric = spectrum_numeric(&mode_block(&p, nu).unwrap()).unwrap();
            let scale = 1.0 + nu * p.predator_diffusion.max(p.prey_diffusion);
            prop_assert!(multiset_distance(&closed.to_multiset(), &numeric) < 1e-10 * scale);
        }

        #[test]
        fn characteristic_polynomial_vanishes_at_difference_rate(p in params_strategy()) {
            prop_assume!(p.packs >= 2);
            let s = constant_coexistence_state(&p);
            let gamma = p.competition * s.w;
            let n = p.packs + 1;
            let shifted = linearized_matrix(&p) - DMatrix::identity(n, n) * gamma;
            let scale = linearized_matrix(&p).abs().max().max(1e-300).powi(n as i32);
            prop_assert!(shifted.determinant().abs() <= 1e-10 * scale.max(1.0));
        }
    }
}
