//! GKP stabilizers and the target operators `O_GKP(u)`.
//!
//! With `X = e^{−i√π p}`, `Z = e^{i√π x}` and `Y = iXZ = e^{i√π(x−p)}`:
//!
//! ```text
//! O_1      = 1 − (X² + X²† + Y² + Y²† + Z² + Z²†)/6
//! O_k      = (K + K†)/2,                 k ∈ {x, y, z}
//! O_GKP(u) = O_1 + 1 − (u_x O_x + u_y O_y + u_z O_z)
//! ```
//!
//! Every matrix here is the exact compression of the infinite operator onto
//! the first `cutoff` number states; squared stabilizers are single
//! displacements of twice the amplitude, not products of truncated factors.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::BlochVector;
use crate::error::{GkpError, Result};
use crate::fock::{
    quadrature_exponential, spectral_function, CMatrix, FockVector, HermitianMatrix,
    QuadratureSpec,
};

/// Default bound on `⟨O_1⟩` for a ground state at cutoff 150 (measured
/// 0.067 for `u = (0,0,1)`).
pub const DEFAULT_LEAKAGE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stabilizer {
    X,
    Z,
    Y,
}

impl Stabilizer {
    /// The quadrature `q` with `K = e^{i√π q}`.
    pub fn quadrature(self) -> QuadratureSpec {
        match self {
            Stabilizer::X => QuadratureSpec { coeff_x: 0.0, coeff_p: -1.0 },
            Stabilizer::Z => QuadratureSpec::X,
            Stabilizer::Y => QuadratureSpec::X_MINUS_P,
        }
    }
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 2 {
        return Err(GkpError::invalid(format!("operators need cutoff >= 2, got {cutoff}")));
    }
    Ok(())
}

/// Truncated `K^power` for a stabilizer `K`.
pub fn stabilizer_power(which: Stabilizer, power: u32, cutoff: usize) -> Result<CMatrix> {
    quadrature_exponential(which.quadrature(), power as f64 * PI.sqrt(), cutoff)
}

/// Truncated (unitary only before truncation) stabilizer matrix.
pub fn stabilizer(which: Stabilizer, cutoff: usize) -> Result<CMatrix> {
    check_cutoff(cutoff)?;
    stabilizer_power(which, 1, cutoff)
}

/// `Y = iXZ` from `X` and `Z` built in `cutoff + padding` levels, truncated
/// afterwards. Cross-check for the single-displacement `Y`.
pub fn composed_y(cutoff: usize, padding: usize) -> Result<CMatrix> {
    check_cutoff(cutoff)?;
    let dim = cutoff + padding;
    let x = stabilizer_power(Stabilizer::X, 1, dim)?;
    let z = stabilizer_power(Stabilizer::Z, 1, dim)?;
    let y = (x * z) * Complex64::new(0.0, 1.0);
    Ok(y.view((0, 0), (cutoff, cutoff)).into_owned())
}

/// `O_1` and the three GKP Pauli analogues at a common cutoff.
#[derive(Debug, Clone)]
pub struct GkpOperatorSet {
    pub o1: HermitianMatrix,
    pub ox: HermitianMatrix,
    pub oy: HermitianMatrix,
    pub oz: HermitianMatrix,
    pub cutoff: usize,
}

pub fn build_operator_set(cutoff: usize) -> Result<GkpOperatorSet> {
    check_cutoff(cutoff)?;
    let cos_of = |which, power| -> Result<HermitianMatrix> {
        Ok(HermitianMatrix::hermitize(stabilizer_power(which, power, cutoff)?))
    };
    let cx2 = cos_of(Stabilizer::X, 2)?;
    let cy2 = cos_of(Stabilizer::Y, 2)?;
    let cz2 = cos_of(Stabilizer::Z, 2)?;
    let identity = HermitianMatrix::identity(cutoff);
    let third = 1.0 / 3.0;
    let o1 = HermitianMatrix::linear_combination(&[
        (1.0, &identity),
        (-third, &cx2),
        (-third, &cy2),
        (-third, &cz2),
    ])?;
    Ok(GkpOperatorSet {
        o1,
        ox: cos_of(Stabilizer::X, 1)?,
        oy: cos_of(Stabilizer::Y, 1)?,
        oz: cos_of(Stabilizer::Z, 1)?,
        cutoff,
    })
}

impl GkpOperatorSet {
    /// `O_GKP^[N](u)`.
    pub fn target(&self, u: &BlochVector) -> Result<HermitianMatrix> {
        let u = BlochVector::new(u.ux, u.uy, u.uz)?;
        let identity = HermitianMatrix::identity(self.cutoff);
        HermitianMatrix::linear_combination(&[
            (1.0, &self.o1),
            (1.0, &identity),
            (-u.ux, &self.ox),
            (-u.uy, &self.oy),
            (-u.uz, &self.oz),
        ])
    }

    /// `O_GKP(u) − O_1 = 1 − u·(O_x, O_y, O_z)`.
    pub fn complement(&self, u: &BlochVector) -> Result<HermitianMatrix> {
        let identity = HermitianMatrix::identity(self.cutoff);
        HermitianMatrix::linear_combination(&[
            (1.0, &identity),
            (-u.ux, &self.ox),
            (-u.uy, &self.oy),
            (-u.uz, &self.oz),
        ])
    }

    /// `(⟨O_1⟩, ⟨O_x⟩, ⟨O_y⟩, ⟨O_z⟩)` in `state`. By linearity
    /// `⟨O_GKP(u)⟩ = ⟨O_1⟩ + 1 − u·(⟨O_x⟩, ⟨O_y⟩, ⟨O_z⟩)`.
    pub fn component_expectations(&self, state: &FockVector) -> Result<[f64; 4]> {
        Ok([
            self.o1.expectation(state)?,
            self.ox.expectation(state)?,
            self.oy.expectation(state)?,
            self.oz.expectation(state)?,
        ])
    }
}

/// Evaluates `⟨O_GKP(u)⟩` from the four component expectations.
pub fn target_expectation(components: &[f64; 4], u: &BlochVector) -> f64 {
    components[0] + 1.0 - (u.ux * components[1] + u.uy * components[2] + u.uz * components[3])
}

/// `O_GKP^[N](u)`; `u` must be a unit vector.
pub fn gkp_operator(u: &BlochVector, cutoff: usize) -> Result<HermitianMatrix> {
    build_operator_set(cutoff)?.target(u)
}

/// `2 sin²(√π x) + 2 sin²(√π p / 2) = (1 − cos 2√π x) + (1 − O_x)`.
///
/// Its zero-eigenvalue state lives on `x ∈ √π ℤ`, `p ∈ 2√π ℤ`, the same
/// code state targeted by `u = (1, 0, 0)`.
pub fn reduced_zero_operator(cutoff: usize) -> Result<HermitianMatrix> {
    check_cutoff(cutoff)?;
    let cz2 = HermitianMatrix::hermitize(stabilizer_power(Stabilizer::Z, 2, cutoff)?);
    let ox = HermitianMatrix::hermitize(stabilizer_power(Stabilizer::X, 1, cutoff)?);
    let identity = HermitianMatrix::identity(cutoff);
    HermitianMatrix::linear_combination(&[(2.0, &identity), (-1.0, &cz2), (-1.0, &ox)])
}

/// `Re⟨ψ|op|ψ⟩`.
pub fn expectation(op: &HermitianMatrix, state: &FockVector) -> Result<f64> {
    op.expectation(state)
}

/// Targets with a closed-form complement `O_GKP − O_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableRow {
    Zero,
    One,
    Plus,
    Minus,
    Magic,
}

impl TableRow {
    pub const ALL: [TableRow; 5] =
        [TableRow::Zero, TableRow::One, TableRow::Plus, TableRow::Minus, TableRow::Magic];

    pub fn bloch(self) -> BlochVector {
        match self {
            TableRow::Zero => BlochVector::ZERO_L,
            TableRow::One => BlochVector::ONE_L,
            TableRow::Plus => BlochVector::PLUS_L,
            TableRow::Minus => BlochVector::MINUS_L,
            TableRow::Magic => BlochVector::H_L,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TableRow::Zero => "0_L",
            TableRow::One => "1_L",
            TableRow::Plus => "+_L",
            TableRow::Minus => "-_L",
            TableRow::Magic => "H_L",
        }
    }

    /// The closed-form complement, built through the spectral route with the
    /// given padding.
    pub fn analytic_complement(self, cutoff: usize, padding: usize) -> Result<HermitianMatrix> {
        let s = PI.sqrt();
        let sin2 = |t: f64| Complex64::new(2.0 * (t / 2.0).sin().powi(2), 0.0);
        let cos2 = |t: f64| Complex64::new(2.0 * (t / 2.0).cos().powi(2), 0.0);
        let m = match self {
            TableRow::Zero => spectral_function(QuadratureSpec::X, s, cutoff, padding, sin2)?,
            TableRow::One => spectral_function(QuadratureSpec::X, s, cutoff, padding, cos2)?,
            TableRow::Plus => spectral_function(QuadratureSpec::P, s, cutoff, padding, sin2)?,
            TableRow::Minus => spectral_function(QuadratureSpec::P, s, cutoff, padding, cos2)?,
            TableRow::Magic => {
                let cos = |t: f64| Complex64::new(t.cos(), 0.0);
                let cp = spectral_function(QuadratureSpec::P, s, cutoff, padding, cos)?;
                let cxp = spectral_function(QuadratureSpec::X_MINUS_P, s, cutoff, padding, cos)?;
                CMatrix::identity(cutoff, cutoff)
                    - (cp + cxp) * Complex64::new(FRAC_1_SQRT_2, 0.0)
            }
        };
        Ok(HermitianMatrix::hermitize(m))
    }
}

/// Row-major CSV, each matrix row one line of alternating `re,im` fields.
pub fn write_operator_csv<W: Write>(op: &HermitianMatrix, mut out: W) -> io::Result<()> {
    let n = op.cutoff();
    for r in 0..n {
        let mut line = String::with_capacity(n * 16);
        for c in 0..n {
            if c > 0 {
                line.push(',');
            }
            let v = op.get(r, c);
            line.push_str(&format!("{},{}", v.re, v.im));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    pub cutoff: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

pub fn operator_to_json(op: &HermitianMatrix) -> OperatorJson {
    let n = op.cutoff();
    let rows = |f: fn(Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..n).map(|r| (0..n).map(|c| f(op.get(r, c))).collect()).collect()
    };
    OperatorJson { cutoff: n, re: rows(|c| c.re), im: rows(|c| c.im) }
}
