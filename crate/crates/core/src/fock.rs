//! Dense linear algebra in the truncated number basis.
//!
//! Conventions: `x = (a + a†)/√2`, `p = i(a† − a)/√2`, so `[x, p] = i` and the
//! vacuum has `Var(x) = Var(p) = 1/2`.
//!
//! Two independent routes produce functions of quadratures:
//!
//! * the displacement route ([`displacement_matrix`]) gives the exact
//!   `N×N` compression of `exp(i s (a x + b p))` through the associated-Laguerre
//!   closed form;
//! * the spectral route ([`spectral_function`]) diagonalizes the truncated
//!   quadrature in a padded space, applies the function to the eigenvalues and
//!   keeps the top-left block.
//!
//! The first is what the operator constructors use; the second is kept as a
//! cross-check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{GkpError, Result};

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// Normalized pure state in the first `cutoff` number states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(GkpError::invalid("state needs at least one amplitude"));
        }
        let norm = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(GkpError::invalid(format!("cannot normalize state with norm {norm}")));
        }
        Ok(Self { amplitudes: amplitudes.into_iter().map(|c| c / norm).collect() })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Number state `|n⟩` embedded in `cutoff` levels.
    pub fn number(n: usize, cutoff: usize) -> Result<Self> {
        if n >= cutoff {
            return Err(GkpError::invalid(format!("number state {n} needs cutoff > {n}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); cutoff];
        amps[n] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: amps })
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::number(0, cutoff)
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        check_cutoff(self.cutoff(), other.cutoff())?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &FockVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Rotates the global phase so the largest-magnitude amplitude is real and
    /// positive. Ties go to the lowest index.
    pub fn with_canonical_phase(mut self) -> Self {
        let mut best = 0;
        for (i, c) in self.amplitudes.iter().enumerate() {
            if c.norm() > self.amplitudes[best].norm() {
                best = i;
            }
        }
        let pivot = self.amplitudes[best];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for c in &mut self.amplitudes {
                *c *= phase;
            }
        }
        self
    }

    /// Highest index whose amplitude magnitude exceeds `threshold`.
    pub fn highest_occupied(&self, threshold: f64) -> usize {
        self.amplitudes.iter().rposition(|c| c.norm() > threshold).unwrap_or(0)
    }

    pub(crate) fn as_dvector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amplitudes)
    }
}

/// Dense Hermitian operator on the first `cutoff` number states.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    entries: CMatrix,
}

impl HermitianMatrix {
    /// Accepts `entries` if it is Hermitian to within `1e-12` (relative to
    /// its largest entry), then symmetrizes away the residual.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(GkpError::invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let defect = hermiticity_defect(&entries);
        let scale = entries.iter().map(|c| c.norm()).fold(1.0, f64::max);
        if defect > HERMITIAN_TOL * scale {
            return Err(GkpError::invalid(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(Self::hermitize(entries))
    }

    /// `(M + M†)/2`, without any check.
    pub fn hermitize(entries: CMatrix) -> Self {
        let adj = entries.adjoint();
        Self { entries: (entries + adj) * Complex64::new(0.5, 0.0) }
    }

    pub fn identity(cutoff: usize) -> Self {
        Self { entries: CMatrix::identity(cutoff, cutoff) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        Self { entries: m }
    }

    pub fn cutoff(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// Real linear combination `Σ wᵢ Mᵢ` of operators with a common cutoff.
    pub fn linear_combination(terms: &[(f64, &HermitianMatrix)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| GkpError::invalid("empty linear combination"))?;
        let n = first.1.cutoff();
        let mut acc = CMatrix::zeros(n, n);
        for (w, m) in terms {
            check_cutoff(n, m.cutoff())?;
            acc += m.matrix() * Complex64::new(*w, 0.0);
        }
        Ok(Self::hermitize(acc))
    }

    /// Top-left `cutoff×cutoff` block.
    pub fn truncate(&self, cutoff: usize) -> Result<Self> {
        if cutoff == 0 || cutoff > self.cutoff() {
            return Err(GkpError::invalid(format!(
                "cannot truncate a {} level operator to {cutoff}",
                self.cutoff()
            )));
        }
        Ok(Self { entries: self.entries.view((0, 0), (cutoff, cutoff)).into_owned() })
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> Result<f64> {
        check_cutoff(self.cutoff(), other.cutoff())?;
        Ok(max_abs_diff(&self.entries, &other.entries))
    }

    /// `Re⟨ψ|self|ψ⟩`; the imaginary part must vanish to 1e-10.
    pub fn expectation(&self, state: &FockVector) -> Result<f64> {
        check_cutoff(self.cutoff(), state.cutoff())?;
        let v = state.as_dvector();
        let value = v.dotc(&(&self.entries * &v));
        if value.im.abs() > 1e-10 * value.re.abs().max(1.0) {
            return Err(GkpError::numerical(format!(
                "expectation has imaginary part {:e}",
                value.im
            )));
        }
        Ok(value.re)
    }

    /// Full eigendecomposition with ascending eigenvalues.
    pub fn eigen(&self) -> Result<(Vec<f64>, CMatrix)> {
        let n = self.cutoff();
        let eig = SymmetricEigen::try_new(self.entries.clone(), f64::EPSILON, 1000 * n.max(10))
            .ok_or_else(|| {
                GkpError::numerical(format!(
                    "Hermitian eigensolver did not converge within {} sweeps at dimension {n}",
                    1000 * n.max(10)
                ))
            })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok((values, vectors))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigen()?.0[0])
    }

    /// Spectrum bounds `(min, max)`.
    pub fn spectral_range(&self) -> Result<(f64, f64)> {
        let (values, _) = self.eigen()?;
        Ok((values[0], values[values.len() - 1]))
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Real linear form `coeff_x·x + coeff_p·p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub coeff_x: f64,
    pub coeff_p: f64,
}

impl QuadratureSpec {
    pub fn new(coeff_x: f64, coeff_p: f64) -> Result<Self> {
        if !(coeff_x.is_finite() && coeff_p.is_finite()) || (coeff_x == 0.0 && coeff_p == 0.0) {
            return Err(GkpError::invalid(format!(
                "quadrature coefficients ({coeff_x}, {coeff_p}) must be finite and not both zero"
            )));
        }
        Ok(Self { coeff_x, coeff_p })
    }

    pub const X: QuadratureSpec = QuadratureSpec { coeff_x: 1.0, coeff_p: 0.0 };
    pub const P: QuadratureSpec = QuadratureSpec { coeff_x: 0.0, coeff_p: 1.0 };
    /// `x − p`
    pub const X_MINUS_P: QuadratureSpec = QuadratureSpec { coeff_x: 1.0, coeff_p: -1.0 };

    /// Displacement amplitude `α` with `D(α) = exp(i·scale·(a x + b p))`.
    pub fn displacement_amplitude(&self, scale: f64) -> Complex64 {
        Complex64::new(-self.coeff_p, self.coeff_x) * (scale / std::f64::consts::SQRT_2)
    }
}

pub(crate) fn check_cutoff(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(GkpError::CutoffMismatch { left, right });
    }
    Ok(())
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Truncated matrix of `coeff_x·x + coeff_p·p`.
pub fn quadrature_matrix(spec: QuadratureSpec, cutoff: usize) -> Result<HermitianMatrix> {
    if cutoff < 2 {
        return Err(GkpError::invalid(format!("quadrature matrix needs cutoff >= 2, got {cutoff}")));
    }
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff - 1 {
        let s = ((n + 1) as f64 / 2.0).sqrt();
        // ⟨n+1|x|n⟩ = s, ⟨n+1|p|n⟩ = i s
        let lower = Complex64::new(spec.coeff_x * s, spec.coeff_p * s);
        m[(n + 1, n)] = lower;
        m[(n, n + 1)] = lower.conj();
    }
    Ok(HermitianMatrix { entries: m })
}

/// Top-left `cutoff×cutoff` block of `f(scale·q)` with `q` the quadrature
/// built in `cutoff + padding` levels.
pub fn spectral_function<F>(
    spec: QuadratureSpec,
    scale: f64,
    cutoff: usize,
    padding: usize,
    f: F,
) -> Result<CMatrix>
where
    F: Fn(f64) -> Complex64,
{
    if cutoff < 2 {
        return Err(GkpError::invalid(format!("spectral function needs cutoff >= 2, got {cutoff}")));
    }
    let dim = cutoff + padding;
    let q = quadrature_matrix(spec, dim)?;
    let (values, vectors) = q.eigen().map_err(|e| {
        GkpError::numerical(format!(
            "spectral route failed for ({}, {}) at dimension {dim}: {e}",
            spec.coeff_x, spec.coeff_p
        ))
    })?;
    let top = vectors.rows(0, cutoff).into_owned();
    let mut scaled = top.clone();
    for (k, &l) in values.iter().enumerate() {
        let w = f(scale * l);
        for r in 0..cutoff {
            scaled[(r, k)] *= w;
        }
    }
    Ok(scaled * top.adjoint())
}

/// `cos(scale·q)` through the spectral route.
pub fn cosine_of_quadrature(
    spec: QuadratureSpec,
    scale: f64,
    cutoff: usize,
    padding: usize,
) -> Result<HermitianMatrix> {
    let m = spectral_function(spec, scale, cutoff, padding, |t| Complex64::new(t.cos(), 0.0))?;
    Ok(HermitianMatrix::hermitize(m))
}

/// `sin(scale·q)` through the spectral route.
pub fn sine_of_quadrature(
    spec: QuadratureSpec,
    scale: f64,
    cutoff: usize,
    padding: usize,
) -> Result<HermitianMatrix> {
    let m = spectral_function(spec, scale, cutoff, padding, |t| Complex64::new(t.sin(), 0.0))?;
    Ok(HermitianMatrix::hermitize(m))
}

/// `exp(i·scale·q)` through the spectral route (unitary, not Hermitian).
pub fn exp_i_quadrature(
    spec: QuadratureSpec,
    scale: f64,
    cutoff: usize,
    padding: usize,
) -> Result<CMatrix> {
    spectral_function(spec, scale, cutoff, padding, |t| Complex64::new(0.0, t).exp())
}

/// Exact compression of `exp(i·scale·q)` through the displacement route.
pub fn quadrature_exponential(spec: QuadratureSpec, scale: f64, cutoff: usize) -> Result<CMatrix> {
    if cutoff < 1 {
        return Err(GkpError::invalid("cutoff must be positive"));
    }
    Ok(displacement_matrix(spec.displacement_amplitude(scale), cutoff))
}

/// Exact compression of `cos(scale·q)`, i.e. `(D(α) + D(α)†)/2`.
pub fn quadrature_cosine(spec: QuadratureSpec, scale: f64, cutoff: usize) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::hermitize(quadrature_exponential(spec, scale, cutoff)?))
}

/// Matrix elements `⟨m|D(α)|n⟩` for `m, n < cutoff`.
///
/// For `m ≥ n` the closed form is
/// `√(n!/m!) α^(m−n) e^(−|α|²/2) L_n^(m−n)(|α|²)`; the upper triangle follows
/// from `D(α)† = D(−α)`. Each sub-diagonal is produced by a normalized
/// three-term Laguerre recurrence carried with a running log-scale, so the
/// factorials never materialize.
pub fn displacement_matrix(alpha: Complex64, cutoff: usize) -> CMatrix {
    let mut d = CMatrix::zeros(cutoff, cutoff);
    let x = alpha.norm_sqr();
    if x == 0.0 {
        return CMatrix::identity(cutoff, cutoff);
    }
    let ln_abs = alpha.norm().ln();
    let arg = alpha.arg();
    let mut column = Vec::with_capacity(cutoff);
    for k in 0..cutoff {
        let len = cutoff - k;
        normalized_laguerre_diagonal(k, x, k as f64 * ln_abs - 0.5 * x, len, &mut column);
        let phase = Complex64::from_polar(1.0, k as f64 * arg);
        // (−1)^k relates ⟨n|D(α)|n+k⟩ to conj(⟨n+k|D(α)|n⟩)
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for (n, &v) in column.iter().enumerate() {
            let lower = phase * v;
            d[(n + k, n)] = lower;
            if k > 0 {
                d[(n, n + k)] = lower.conj() * sign;
            }
        }
    }
    d
}

/// Fills `out[n] = exp(log_prefactor) · √(n!/(n+k)!) · L_n^(k)(x)` for
/// `n < len`.
pub(crate) fn normalized_laguerre_diagonal(
    k: usize,
    x: f64,
    log_prefactor: f64,
    len: usize,
    out: &mut Vec<f64>,
) {
    const RESCALE_AT: f64 = 1e150;
    out.clear();
    if len == 0 {
        return;
    }
    let kf = k as f64;
    let mut log_scale = log_prefactor - 0.5 * ln_gamma(kf + 1.0);
    let emit = |h: f64, log_scale: f64| -> f64 {
        if h == 0.0 {
            0.0
        } else {
            h.signum() * (log_scale + h.abs().ln()).exp()
        }
    };
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(emit(cur, log_scale));
    for j in 0..len - 1 {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf * (jf + kf)).sqrt() * prev)
            / ((jf + 1.0) * (jf + 1.0 + kf)).sqrt();
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

/// Algebraically smallest eigenpair; the eigenvector carries the canonical
/// phase of [`FockVector::with_canonical_phase`].
pub fn ground_state(op: &HermitianMatrix) -> Result<(f64, FockVector)> {
    let (values, vectors) = op.eigen()?;
    let amps: Vec<Complex64> = vectors.column(0).iter().copied().collect();
    let state = FockVector::new(amps)?.with_canonical_phase();
    Ok((values[0], state))
}

/// `‖op·v − λ·v‖`.
pub fn eigen_residual(op: &HermitianMatrix, value: f64, state: &FockVector) -> Result<f64> {
    check_cutoff(op.cutoff(), state.cutoff())?;
    let v = state.as_dvector();
    let r = op.matrix() * &v - v * Complex64::new(value, 0.0);
    Ok(r.norm())
}

/// Operator 2-norm of a Hermitian matrix (largest |eigenvalue|).
pub fn spectral_norm(op: &HermitianMatrix) -> Result<f64> {
    let (lo, hi) = op.spectral_range()?;
    Ok(lo.abs().max(hi.abs()))
}

/// Applies a general (not necessarily Hermitian) matrix to a state without
/// renormalizing.
pub fn apply(m: &CMatrix, state: &FockVector) -> Result<Vec<Complex64>> {
    check_cutoff(m.ncols(), state.cutoff())?;
    Ok((m * state.as_dvector()).iter().copied().collect())
}
