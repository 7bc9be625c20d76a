//! Wigner functions of Fock-space states.
//!
//! With `α = (x + ip)/√2`, `W(x, p) = (1/π) ⟨ψ| D(2α) Π |ψ⟩` where `Π` is the
//! parity operator. The displacement elements between occupied levels are
//! exact, so no padding is involved.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GkpError, Result};
use crate::fock::{normalized_laguerre_diagonal, FockVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// `values[i][j] = W(xs[i], ps[j])`
    pub values: Vec<Vec<f64>>,
}

/// Grid description written alongside the CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerHeader {
    pub x_min: f64,
    pub x_max: f64,
    pub x_count: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_count: usize,
    pub integral: f64,
    pub min_value: f64,
    pub max_value: f64,
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn check_axis(axis: &[f64], name: &str) -> Result<()> {
    if axis.is_empty() || axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GkpError::invalid(format!("{name} axis must be non-empty and strictly increasing")));
    }
    Ok(())
}

/// `W(x, p)` at a single phase-space point.
pub fn wigner_point(state: &FockVector, x: f64, p: f64) -> f64 {
    let used = state.highest_occupied(0.0) + 1;
    let c = &state.amplitudes()[..used];
    let mut diag = Vec::with_capacity(used);
    point_with_buffer(c, x, p, &mut diag)
}

fn point_with_buffer(c: &[Complex64], x: f64, p: f64, diag: &mut Vec<f64>) -> f64 {
    let n = c.len();
    // D(2α) with 2α = √2 (x + ip)
    let beta = Complex64::new(x, p) * 2f64.sqrt();
    let r2 = beta.norm_sqr();
    let (ln_abs, arg) = if r2 > 0.0 { (beta.norm().ln(), beta.arg()) } else { (0.0, 0.0) };
    let mut total = 0.0;
    for k in 0..n {
        let len = n - k;
        if r2 == 0.0 {
            if k > 0 {
                break;
            }
            diag.clear();
            diag.resize(len, 1.0);
        } else {
            normalized_laguerre_diagonal(k, r2, k as f64 * ln_abs - 0.5 * r2, len, diag);
        }
        let phase = Complex64::from_polar(1.0, k as f64 * arg);
        let mut acc = 0.0;
        for (m, &v) in diag.iter().enumerate() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let term = (c[m + k].conj() * c[m] * phase).re * v;
            acc += sign * term;
        }
        total += if k == 0 { acc } else { 2.0 * acc };
    }
    total / PI
}

/// Evaluates `W` on the Cartesian product `xs × ps`, parallel over `xs`.
pub fn wigner(state: &FockVector, xs: &[f64], ps: &[f64]) -> Result<WignerGrid> {
    check_axis(xs, "x")?;
    check_axis(ps, "p")?;
    let used = state.highest_occupied(0.0) + 1;
    let c = &state.amplitudes()[..used];
    let values = xs
        .par_iter()
        .map_init(
            || Vec::with_capacity(used),
            |diag, &x| ps.iter().map(|&p| point_with_buffer(c, x, p, diag)).collect(),
        )
        .collect();
    Ok(WignerGrid { xs: xs.to_vec(), ps: ps.to_vec(), values })
}

impl WignerGrid {
    /// Trapezoid integral over the grid; falls short of one when the state
    /// is not contained in it.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.xs, &self.marginal_x())
    }

    /// `∫ W dp` at each `x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        self.values.iter().map(|row| trapezoid(&self.ps, row)).collect()
    }

    /// `∫ W dx` at each `p`.
    pub fn marginal_p(&self) -> Vec<f64> {
        (0..self.ps.len())
            .map(|j| {
                let col: Vec<f64> = self.values.iter().map(|row| row[j]).collect();
                trapezoid(&self.xs, &col)
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `1 − integral`, the probability the grid fails to capture.
    pub fn mass_deficit(&self) -> f64 {
        1.0 - self.integral()
    }

    pub fn header(&self) -> WignerHeader {
        let flat = self.values.iter().flatten();
        WignerHeader {
            x_min: self.xs[0],
            x_max: *self.xs.last().unwrap(),
            x_count: self.xs.len(),
            p_min: self.ps[0],
            p_max: *self.ps.last().unwrap(),
            p_count: self.ps.len(),
            integral: self.integral(),
            min_value: flat.clone().fold(f64::INFINITY, |m, &v| m.min(v)),
            max_value: flat.fold(f64::NEG_INFINITY, |m, &v| m.max(v)),
        }
    }

    /// `x,p,W` rows under a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,p,W")?;
        for (x, row) in self.xs.iter().zip(&self.values) {
            for (p, w) in self.ps.iter().zip(row) {
                writeln!(out, "{x},{p},{w}")?;
            }
        }
        Ok(())
    }
}
