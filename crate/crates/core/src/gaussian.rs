//! Closed-form expectations of `O_GKP(u)` in pure Gaussian states and the
//! Gaussian lower bound `5/3 − ‖u‖∞`.
//!
//! For a Gaussian with mean `(x₀, p₀)` and covariance `σ`, the symmetrically
//! ordered characteristic function turns each cosine into a damped cosine,
//! so `⟨O_GKP(u)⟩ = 2 − R` with `R` a sum of six such terms.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::BlochVector;
use crate::error::{GkpError, Result};
use crate::fock::{displacement_matrix, FockVector};
use crate::optimize::nelder_mead;

pub const DEFAULT_R_MAX: f64 = 6.0;

/// `(x₀, p₀, r, θ)`: displacement, squeezing magnitude and squeezing angle.
/// The quadrature `x cos θ + p sin θ` carries variance `e^{−2r}/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPureParams {
    pub x0: f64,
    pub p0: f64,
    pub r: f64,
    pub theta: f64,
}

impl GaussianPureParams {
    pub const VACUUM: GaussianPureParams = GaussianPureParams { x0: 0.0, p0: 0.0, r: 0.0, theta: 0.0 };

    fn from_slice(v: &[f64]) -> Self {
        Self { x0: v[0], p0: v[1], r: v[2], theta: v[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub xx: f64,
    pub xp: f64,
    pub pp: f64,
    /// `σ_xx − 2σ_xp + σ_pp = Var(x − p)`
    pub x_minus_p: f64,
}

impl Covariance {
    pub fn determinant(&self) -> f64 {
        self.xx * self.pp - self.xp * self.xp
    }
}

pub fn covariance_from_params(g: &GaussianPureParams) -> Covariance {
    let (em, ep) = ((-2.0 * g.r).exp(), (2.0 * g.r).exp());
    let (s, c) = g.theta.sin_cos();
    let s2 = (2.0 * g.theta).sin();
    Covariance {
        xx: 0.5 * (em * c * c + ep * s * s),
        xp: 0.25 * (em - ep) * s2,
        pp: 0.5 * (em * s * s + ep * c * c),
        x_minus_p: 0.5 * (em * (1.0 - s2) + ep * (1.0 + s2)),
    }
}

/// The six-term `R(x₀, p₀, r, θ)`; `⟨O_GKP(u)⟩ = 2 − R`.
pub fn gaussian_r(g: &GaussianPureParams, u: &BlochVector) -> f64 {
    let cov = covariance_from_params(g);
    let sp = PI.sqrt();
    let penalty = ((-2.0 * PI * cov.xx).exp() * (2.0 * sp * g.x0).cos()
        + (-2.0 * PI * cov.x_minus_p).exp() * (2.0 * sp * (g.x0 - g.p0)).cos()
        + (-2.0 * PI * cov.pp).exp() * (2.0 * sp * g.p0).cos())
        / 3.0;
    penalty
        + u.uz * (-0.5 * PI * cov.xx).exp() * (sp * g.x0).cos()
        + u.uy * (-0.5 * PI * cov.x_minus_p).exp() * (sp * (g.x0 - g.p0)).cos()
        + u.ux * (-0.5 * PI * cov.pp).exp() * (sp * g.p0).cos()
}

pub fn gaussian_expectation(g: &GaussianPureParams, u: &BlochVector) -> f64 {
    2.0 - gaussian_r(g, u)
}

/// `5/3 − ‖u‖∞`.
pub fn gaussian_bound(u: &BlochVector) -> f64 {
    5.0 / 3.0 - u.inf_norm()
}

/// Limits of `R` as `r → ∞` along the three squeezing angles that isolate a
/// single Pauli cosine: `θ = 0` (z), `θ = −π/4` (y), `θ = π/2` (x).
///
/// The surviving penalty cosine is kept, e.g. `cos(2√π x₀)/3 + u_z cos(√π x₀)`
/// for `θ = 0`; it equals `1/3` on the lattice points `x₀ ∈ √π ℤ` where the
/// maximum sits.
pub fn infinite_squeezing_limits(u: &BlochVector, x0: f64, p0: f64) -> [(f64, f64); 3] {
    let sp = PI.sqrt();
    let pen = |q: f64| (2.0 * sp * q).cos() / 3.0;
    [
        (0.0, pen(x0) + u.uz * (sp * x0).cos()),
        (-FRAC_PI_4, pen(x0 - p0) + u.uy * (sp * (x0 - p0)).cos()),
        (FRAC_PI_2, pen(p0) + u.ux * (sp * p0).cos()),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerStart {
    pub start: GaussianPureParams,
    pub best: GaussianPureParams,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianMinimum {
    pub min_value: f64,
    pub argmin: GaussianPureParams,
    pub bound: f64,
    /// Smallest `(2 − R) − bound` over every point the optimizer evaluated.
    pub min_visited_gap: f64,
    pub starts: Vec<OptimizerStart>,
}

#[derive(Debug, Clone, Copy)]
pub struct GaussianSearch {
    pub r_max: f64,
    pub random_starts: usize,
}

impl Default for GaussianSearch {
    fn default() -> Self {
        Self { r_max: DEFAULT_R_MAX, random_starts: 16 }
    }
}

/// Start points: `θ ∈ {0, ±π/4, π/2}`, `x₀, p₀ ∈ √π·{0, ½, 1}`,
/// `r ∈ {0, 2, 5}` (capped at `r_max`).
fn grid_starts(r_max: f64) -> Vec<GaussianPureParams> {
    let sp = PI.sqrt();
    let mut out = Vec::new();
    for theta in [0.0, FRAC_PI_4, -FRAC_PI_4, FRAC_PI_2] {
        for x0 in [0.0, 0.5 * sp, sp] {
            for p0 in [0.0, 0.5 * sp, sp] {
                for r in [0.0_f64, 2.0, 5.0] {
                    out.push(GaussianPureParams { x0, p0, r: r.min(r_max), theta });
                }
            }
        }
    }
    out
}

/// Multi-start Nelder–Mead minimization of `2 − R` over pure Gaussians with
/// `0 ≤ r ≤ r_max`. `budget` caps objective calls per start.
pub fn minimize_over_gaussians(
    u: &BlochVector,
    budget: usize,
    seed: u64,
    search: GaussianSearch,
) -> Result<GaussianMinimum> {
    let u = BlochVector::new(u.ux, u.uy, u.uz)?;
    if budget < 100 {
        return Err(GkpError::invalid(format!("budget must be at least 100, got {budget}")));
    }
    if !(search.r_max > 0.0) {
        return Err(GkpError::invalid("r_max must be positive"));
    }
    let bound = gaussian_bound(&u);
    let clamp = |v: &[f64]| -> GaussianPureParams {
        let mut g = GaussianPureParams::from_slice(v);
        g.r = g.r.abs().min(search.r_max);
        g
    };

    let mut starts = grid_starts(search.r_max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sp = PI.sqrt();
    for _ in 0..search.random_starts {
        starts.push(GaussianPureParams {
            x0: rng.random_range(-sp..sp),
            p0: rng.random_range(-sp..sp),
            r: rng.random_range(0.0..search.r_max),
            theta: rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        });
    }

    let mut min_visited_gap = f64::INFINITY;
    let mut reports = Vec::with_capacity(starts.len());
    for start in starts {
        let x0 = [start.x0, start.p0, start.r, start.theta];
        let res = nelder_mead(
            |v| {
                let value = gaussian_expectation(&clamp(v), &u);
                min_visited_gap = min_visited_gap.min(value - bound);
                value
            },
            &x0,
            0.3,
            1e-13,
            budget,
        );
        reports.push(OptimizerStart {
            start,
            best: clamp(&res.x),
            value: res.value,
            evaluations: res.evaluations,
            converged: res.converged,
        });
    }
    let best = reports
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    Ok(GaussianMinimum {
        min_value: best.value,
        argmin: best.best,
        bound,
        min_visited_gap,
        starts: reports,
    })
}

/// `D(α) S(ξ)|0⟩` in `cutoff` levels with `α = (x₀ + i p₀)/√2` and
/// `ξ = r e^{2iθ}`. The squeezed vacuum is built exactly; the displacement is
/// applied in `2·cutoff` levels before truncating and renormalizing.
pub fn gaussian_fock_state(g: &GaussianPureParams, cutoff: usize) -> Result<FockVector> {
    if cutoff < 1 {
        return Err(GkpError::invalid("cutoff must be positive"));
    }
    let dim = if g.x0 == 0.0 && g.p0 == 0.0 { cutoff } else { 2 * cutoff };
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    let ratio = -Complex64::from_polar(g.r.tanh(), 2.0 * g.theta);
    let mut c = Complex64::new(1.0 / g.r.cosh().sqrt(), 0.0);
    let mut n = 0;
    while 2 * n < dim {
        amps[2 * n] = c;
        let nf = n as f64;
        c *= ratio * ((2.0 * nf + 1.0) / (2.0 * nf + 2.0)).sqrt();
        n += 1;
    }
    if dim != cutoff {
        let alpha = Complex64::new(g.x0, g.p0) / std::f64::consts::SQRT_2;
        let d = displacement_matrix(alpha, dim);
        let v = d * nalgebra::DVector::from_vec(amps);
        amps = v.iter().copied().collect();
    }
    amps.truncate(cutoff);
    FockVector::new(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::core_states;
    use crate::fock::{quadrature_matrix, QuadratureSpec};
    use crate::operators::gkp_operator;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn vacuum_covariance() {
        for theta in [0.0, 0.4, -1.3] {
            let c = covariance_from_params(&GaussianPureParams { theta, ..GaussianPureParams::VACUUM });
            assert_abs_diff_eq!(c.xx, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(c.xp, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(c.pp, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn squeezed_covariance_examples() {
        let g = GaussianPureParams { r: 1.0, ..GaussianPureParams::VACUUM };
        let c = covariance_from_params(&g);
        assert_abs_diff_eq!(c.xx, (-2.0f64).exp() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.pp, 2.0f64.exp() / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.xp, 0.0, epsilon = 1e-15);

        let g = GaussianPureParams { r: 1.0, theta: -FRAC_PI_4, ..GaussianPureParams::VACUUM };
        let c = covariance_from_params(&g);
        assert_abs_diff_eq!(c.x_minus_p, (-2.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(c.xx - 2.0 * c.xp + c.pp, c.x_minus_p, epsilon = 1e-12);
    }

    #[test]
    fn vacuum_r_for_zero_state() {
        let r = gaussian_r(&GaussianPureParams::VACUUM, &BlochVector::ZERO_L);
        let closed = (2.0 * (-PI).exp() + (-2.0 * PI).exp()) / 3.0 + (-PI / 4.0).exp();
        assert_abs_diff_eq!(r, closed, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.4854, epsilon = 1e-4);
    }

    #[test]
    fn heavy_squeezing_reaches_the_printed_limits() {
        let u = BlochVector::normalized(0.3, -0.5, 0.8).unwrap();
        let (x0, p0) = (0.4, -1.1);
        for (theta, limit) in infinite_squeezing_limits(&u, x0, p0) {
            let g = GaussianPureParams { x0, p0, r: 12.0, theta };
            assert_abs_diff_eq!(gaussian_r(&g, &u), limit, epsilon = 1e-8);
        }
        // On the lattice the penalty term is exactly 1/3.
        let sp = PI.sqrt();
        for (theta, limit) in infinite_squeezing_limits(&u, sp, 0.0) {
            let g = GaussianPureParams { x0: sp, p0: 0.0, r: 12.0, theta };
            assert_abs_diff_eq!(gaussian_r(&g, &u), limit, epsilon = 1e-8);
        }
        let limits = infinite_squeezing_limits(&u, sp, 0.0);
        assert_abs_diff_eq!(limits[0].1, 1.0 / 3.0 - u.uz, epsilon = 1e-12);
        assert_abs_diff_eq!(limits[1].1, 1.0 / 3.0 - u.uy, epsilon = 1e-12);
        assert_abs_diff_eq!(limits[2].1, 1.0 / 3.0 + u.ux, epsilon = 1e-12);
        let g = GaussianPureParams { r: 20.0, ..GaussianPureParams::VACUUM };
        assert_abs_diff_eq!(gaussian_r(&g, &BlochVector::ZERO_L), 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_examples() {
        assert_abs_diff_eq!(gaussian_bound(&BlochVector::ZERO_L), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_bound(&BlochVector::H_L), 5.0 / 3.0 - FRAC_1_SQRT_2, epsilon = 1e-15);
        for (_, u) in core_states() {
            let b = gaussian_bound(&u);
            assert!((2.0 / 3.0 - 1e-15..=5.0 / 3.0 - 1.0 / 3.0f64.sqrt() + 1e-15).contains(&b));
        }
    }

    #[test]
    fn optimizer_reaches_the_bound() {
        let t = 1.0 / 3.0f64.sqrt();
        for u in [BlochVector::ZERO_L, BlochVector::H_L, BlochVector { ux: t, uy: t, uz: t }] {
            let m = minimize_over_gaussians(&u, 400, 1, GaussianSearch::default()).unwrap();
            assert!((m.min_value - gaussian_bound(&u)).abs() <= 1e-3, "{u:?}: {}", m.min_value);
            assert!(m.min_visited_gap >= -1e-9);
        }
    }

    #[test]
    fn r_max_saturates() {
        let u = BlochVector::normalized(0.2, 0.7, -0.4).unwrap();
        let a = minimize_over_gaussians(&u, 400, 9, GaussianSearch { r_max: 6.0, random_starts: 8 })
            .unwrap();
        let b = minimize_over_gaussians(&u, 400, 9, GaussianSearch { r_max: 8.0, random_starts: 8 })
            .unwrap();
        assert!((a.min_value - b.min_value).abs() < 1e-4);
    }

    #[test]
    fn optimizer_rejects_small_budget() {
        assert!(minimize_over_gaussians(&BlochVector::ZERO_L, 10, 0, GaussianSearch::default()).is_err());
    }

    #[test]
    fn fock_squeezed_vacuum_has_the_parametrized_covariance() {
        let n = 200;
        let x = quadrature_matrix(QuadratureSpec::X, n).unwrap();
        let p = quadrature_matrix(QuadratureSpec::P, n).unwrap();
        let xp = quadrature_matrix(QuadratureSpec::X_MINUS_P, n).unwrap();
        for g in [
            GaussianPureParams { r: 1.0, ..GaussianPureParams::VACUUM },
            GaussianPureParams { r: 0.6, theta: 0.7, ..GaussianPureParams::VACUUM },
            GaussianPureParams { r: 0.8, theta: -FRAC_PI_4, ..GaussianPureParams::VACUUM },
        ] {
            let state = gaussian_fock_state(&g, n).unwrap();
            let v = nalgebra::DVector::from_column_slice(state.amplitudes());
            let second = |m: &crate::fock::HermitianMatrix| v.dotc(&(m.matrix() * m.matrix() * &v)).re;
            let cov = covariance_from_params(&g);
            assert_abs_diff_eq!(second(&x), cov.xx, epsilon = 1e-8);
            assert_abs_diff_eq!(second(&p), cov.pp, epsilon = 1e-8);
            assert_abs_diff_eq!(second(&xp), cov.x_minus_p, epsilon = 1e-8);
        }
    }

    #[test]
    fn closed_form_matches_fock_expectation() {
        let n = 200;
        let ops: Vec<_> = [BlochVector::ZERO_L, BlochVector::H_L]
            .iter()
            .map(|u| (*u, gkp_operator(u, n).unwrap()))
            .collect();
        for g in [
            GaussianPureParams { r: 1.0, ..GaussianPureParams::VACUUM },
            GaussianPureParams { r: 0.5, theta: 0.3, ..GaussianPureParams::VACUUM },
            GaussianPureParams { x0: 0.7, p0: -0.4, r: 0.4, theta: -0.6 },
        ] {
            let state = gaussian_fock_state(&g, n).unwrap();
            for (u, op) in &ops {
                let fock = op.expectation(&state).unwrap();
                assert!((fock - gaussian_expectation(&g, u)).abs() <= 2e-3, "{g:?} {u:?}");
            }
        }
    }
}
