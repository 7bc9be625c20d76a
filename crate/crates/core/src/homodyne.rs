//! Ideal homodyne detection: rotated-quadrature wavefunctions, marginal
//! sampling and the six-cosine estimate of `⟨O_GKP(u)⟩`.
//!
//! `x_θ = x cos θ + p sin θ`. Its outcome distribution is `|⟨q|V_θ ψ⟩|²` with
//! `V_θ = e^{−iθn}`, so rotating a state only rephases its Fock amplitudes.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bloch::BlochVector;
use crate::error::{GkpError, Result};
use crate::fock::FockVector;

pub const GRID_POINTS: usize = 4096;
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Homodyne angles for `x`, `p` and `(x − p)/√2`.
pub const ANGLE_X: f64 = 0.0;
pub const ANGLE_P: f64 = FRAC_PI_2;
pub const ANGLE_X_MINUS_P: f64 = -FRAC_PI_4;

/// Order of [`WitnessEstimate::per_term`].
pub const TERM_LABELS: [&str; 6] = [
    "cos(2√π x)",
    "cos(2√π (x−p))",
    "cos(2√π p)",
    "cos(√π x)",
    "cos(√π (x−p))",
    "cos(√π p)",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSamples {
    pub angle: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub moment: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEstimate {
    pub value: f64,
    pub std_error: f64,
    pub per_term: [MomentEstimate; 6],
}

/// Evenly spaced grid over `±(√(2 n_max) + 5)`, where `n_max` is the highest
/// Fock index with amplitude above `1e-8`.
pub fn default_grid(state: &FockVector) -> Vec<f64> {
    let n_max = state.highest_occupied(1e-8);
    let half = (2.0 * n_max as f64).sqrt() + 5.0;
    linspace(-half, half, GRID_POINTS)
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Hermite functions `φ_0(q) … φ_{n−1}(q)` for vacuum variance ½, written
/// into `out`. The Gaussian factor is carried as a log-scale so that large
/// `|q|` underflows only in the final result, not halfway through.
pub fn hermite_functions(count: usize, q: f64, out: &mut Vec<f64>) {
    const RESCALE_AT: f64 = 1e100;
    out.clear();
    if count == 0 {
        return;
    }
    let mut log_scale = -0.5 * q * q;
    let emit = |h: f64, ls: f64| if h == 0.0 { 0.0 } else { h.signum() * (ls + h.abs().ln()).exp() };
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    out.push(emit(cur, log_scale));
    for n in 0..count - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * q * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_AT {
            prev /= RESCALE_AT;
            cur /= RESCALE_AT;
            log_scale += RESCALE_AT.ln();
        }
        out.push(emit(cur, log_scale));
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(GkpError::invalid("quadrature grid needs at least two points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GkpError::invalid("quadrature grid must be strictly increasing"));
    }
    Ok(())
}

/// `ψ_θ(q) = Σ_n c_n e^{−inθ} φ_n(q)` on `grid`.
///
/// Fails with [`GkpError::MassDeficit`] if the trapezoid mass on the grid
/// falls short of one by more than [`MASS_TOLERANCE`].
pub fn rotated_wavefunction(state: &FockVector, angle: f64, grid: &[f64]) -> Result<Vec<Complex64>> {
    check_grid(grid)?;
    let amps: Vec<Complex64> = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, c)| c * Complex64::from_polar(1.0, -(n as f64) * angle))
        .collect();
    let used = state.highest_occupied(0.0) + 1;
    let mut phi = Vec::with_capacity(used);
    let psi: Vec<Complex64> = grid
        .iter()
        .map(|&q| {
            hermite_functions(used, q, &mut phi);
            amps[..used].iter().zip(&phi).map(|(c, f)| c * f).sum()
        })
        .collect();
    let density: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let captured = trapezoid(grid, &density);
    if captured < 1.0 - MASS_TOLERANCE {
        return Err(GkpError::MassDeficit { captured });
    }
    Ok(psi)
}

/// Marginal density `|ψ_θ(q)|²` on `grid`.
pub fn marginal_density(state: &FockVector, angle: f64, grid: &[f64]) -> Result<Vec<f64>> {
    Ok(rotated_wavefunction(state, angle, grid)?.iter().map(|z| z.norm_sqr()).collect())
}

/// Draws `count` outcomes of `x_angle` by inverting the piecewise-linear CDF
/// of the marginal on [`default_grid`].
pub fn sample_quadrature(state: &FockVector, angle: f64, count: usize, seed: u64) -> Result<QuadratureSamples> {
    if count == 0 {
        return Err(GkpError::invalid("sample count must be at least 1"));
    }
    let grid = default_grid(state);
    let density = marginal_density(state, angle, &grid)?;
    let mut cdf = Vec::with_capacity(grid.len());
    cdf.push(0.0);
    for i in 1..grid.len() {
        let area = 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1]);
        cdf.push(cdf[i - 1] + area);
    }
    let total = *cdf.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..count)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            let hi = cdf.partition_point(|&c| c < target).clamp(1, grid.len() - 1);
            let (c0, c1) = (cdf[hi - 1], cdf[hi]);
            let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
            grid[hi - 1] + t * (grid[hi] - grid[hi - 1])
        })
        .collect();
    Ok(QuadratureSamples { angle, values, seed })
}

/// Sample mean of `f(q)` with its standard error.
pub fn sample_moment<F: Fn(f64) -> f64>(values: &[f64], f: F) -> MomentEstimate {
    let n = values.len() as f64;
    let mean = values.iter().map(|&q| f(q)).sum::<f64>() / n;
    if values.len() < 2 {
        return MomentEstimate { moment: mean, std_error: f64::INFINITY };
    }
    let var = values.iter().map(|&q| (f(q) - mean).powi(2)).sum::<f64>() / (n - 1.0);
    MomentEstimate { moment: mean, std_error: (var / n).sqrt() }
}

fn check_angle(samples: &QuadratureSamples, expected: f64, name: &str) -> Result<()> {
    if (samples.angle - expected).abs() > 1e-12 {
        return Err(GkpError::invalid(format!(
            "{name} samples taken at angle {}, expected {expected}",
            samples.angle
        )));
    }
    if samples.values.len() < 2 {
        return Err(GkpError::invalid(format!("{name} samples need at least two outcomes")));
    }
    Ok(())
}

/// Assembles `2 − [Σ(double-frequency)/3 + u_z m_x + u_y m_{x−p} + u_x m_p]`
/// from the three homodyne records.
///
/// Terms drawn from the same record are correlated, so the error of each
/// record's contribution comes from the sample variance of its combined
/// per-shot quantity; the three records are independent.
pub fn estimate_witness_from_samples(
    x: &QuadratureSamples,
    p: &QuadratureSamples,
    x_minus_p: &QuadratureSamples,
    u: &BlochVector,
) -> Result<WitnessEstimate> {
    BlochVector::new(u.ux, u.uy, u.uz)?;
    check_angle(x, ANGLE_X, "x")?;
    check_angle(p, ANGLE_P, "p")?;
    check_angle(x_minus_p, ANGLE_X_MINUS_P, "x−p")?;
    let sp = PI.sqrt();
    // x − p = √2 · x_{−π/4}
    let (fx, fd) = (sp, (2.0 * PI).sqrt());
    let per_term = [
        sample_moment(&x.values, |q| (2.0 * fx * q).cos()),
        sample_moment(&x_minus_p.values, |q| (2.0 * fd * q).cos()),
        sample_moment(&p.values, |q| (2.0 * fx * q).cos()),
        sample_moment(&x.values, |q| (fx * q).cos()),
        sample_moment(&x_minus_p.values, |q| (fd * q).cos()),
        sample_moment(&p.values, |q| (fx * q).cos()),
    ];
    let combined = |s: &QuadratureSamples, f: f64, weight: f64| {
        sample_moment(&s.values, |q| (2.0 * f * q).cos() / 3.0 + weight * (f * q).cos())
    };
    let parts = [combined(x, fx, u.uz), combined(x_minus_p, fd, u.uy), combined(p, fx, u.ux)];
    let value = 2.0 - parts.iter().map(|m| m.moment).sum::<f64>();
    let std_error = parts.iter().map(|m| m.std_error.powi(2)).sum::<f64>().sqrt();
    Ok(WitnessEstimate { value, std_error, per_term })
}

/// Simulates the three homodyne records (seeds `seed`, `seed + 1`,
/// `seed + 2`) and assembles the estimate.
pub fn estimate_witness(
    state: &FockVector,
    u: &BlochVector,
    count_per_quadrature: usize,
    seed: u64,
) -> Result<WitnessEstimate> {
    BlochVector::new(u.ux, u.uy, u.uz)?;
    let records = simulate_records(state, count_per_quadrature, seed)?;
    estimate_witness_from_samples(&records[0], &records[1], &records[2], u)
}

/// The `x`, `p` and `x − p` records used by [`estimate_witness`].
pub fn simulate_records(state: &FockVector, count: usize, seed: u64) -> Result<[QuadratureSamples; 3]> {
    Ok([
        sample_quadrature(state, ANGLE_X, count, seed)?,
        sample_quadrature(state, ANGLE_P, count, seed.wrapping_add(1))?,
        sample_quadrature(state, ANGLE_X_MINUS_P, count, seed.wrapping_add(2))?,
    ])
}
