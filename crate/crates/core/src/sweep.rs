//! Expectation-versus-infidelity sweeps over an atlas of Bloch vectors and
//! the statistics built on them: per-cutoff regression, KSG mutual
//! information and a saturating power-law extrapolation of the slope.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::bloch::{logical_infidelity, Atlas, BlochVector};
use crate::error::{GkpError, Result};
use crate::fock::ground_state;
use crate::operators::{build_operator_set, target_expectation};

pub type RealMatrix = Vec<Vec<f64>>;

pub const DEFAULT_KSG_K: usize = 4;
/// Seed of the tie-breaking jitter applied inside the KSG estimator.
pub const KSG_JITTER_SEED: u64 = 0x006b_7367;
pub const KSG_JITTER: f64 = 1e-12;

/// Expectation matrices of `O_GKP^[N](u_j)` in the ground states `ψ_i^(N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub atlas: Atlas,
    pub cutoffs: Vec<usize>,
    /// `expectation[N][i][j] = ⟨ψ_i|O_GKP^[N](u_j)|ψ_i⟩`
    pub expectation: BTreeMap<usize, RealMatrix>,
    pub infidelity: RealMatrix,
    pub ground_energies: BTreeMap<usize, Vec<f64>>,
    /// `(⟨O_1⟩, ⟨O_x⟩, ⟨O_y⟩, ⟨O_z⟩)` per ground state.
    pub components: BTreeMap<usize, Vec<[f64; 4]>>,
}

impl SweepRecord {
    /// A record with the infidelity matrix filled and no cutoff computed.
    pub fn empty(atlas: Atlas, cutoffs: Vec<usize>) -> Result<Self> {
        if atlas.is_empty() {
            return Err(GkpError::invalid("atlas is empty"));
        }
        if cutoffs.is_empty() {
            return Err(GkpError::invalid("no cutoffs requested"));
        }
        if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GkpError::invalid("cutoffs must be strictly ascending"));
        }
        if cutoffs[0] < 2 {
            return Err(GkpError::invalid("cutoffs must be at least 2"));
        }
        let infidelity = infidelity_matrix(&atlas.points);
        Ok(Self {
            atlas,
            cutoffs,
            expectation: BTreeMap::new(),
            infidelity,
            ground_energies: BTreeMap::new(),
            components: BTreeMap::new(),
        })
    }

    pub fn is_complete(&self) -> bool {
        self.cutoffs.iter().all(|n| self.expectation.contains_key(n))
    }

    pub fn pending_cutoffs(&self) -> Vec<usize> {
        self.cutoffs.iter().copied().filter(|n| !self.expectation.contains_key(n)).collect()
    }

    pub fn expectation_at(&self, n: usize) -> Result<&RealMatrix> {
        self.expectation.get(&n).ok_or_else(|| GkpError::invalid(format!("cutoff {n} not present in sweep")))
    }

    /// Probe Bloch vectors `(⟨O_x⟩, ⟨O_y⟩, ⟨O_z⟩)` of the ground states.
    pub fn probe_bloch(&self, n: usize) -> Result<Vec<[f64; 3]>> {
        let comps = self.components.get(&n).ok_or_else(|| GkpError::invalid(format!("cutoff {n} not present in sweep")))?;
        Ok(comps.iter().map(|c| [c[1], c[2], c[3]]).collect())
    }
}

pub fn infidelity_matrix(points: &[BlochVector]) -> RealMatrix {
    points.iter().map(|ui| points.iter().map(|uj| logical_infidelity(ui, uj)).collect()).collect()
}

/// Ground states and expectation rows for one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffResult {
    pub cutoff: usize,
    pub expectation: RealMatrix,
    pub ground_energies: Vec<f64>,
    pub components: Vec<[f64; 4]>,
}

/// Thread pool with `workers` threads for the per-point ground-state solves.
pub fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(GkpError::invalid("workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GkpError::numerical(format!("could not start worker pool: {e}")))
}

/// One ground-state solve per atlas point; rows land in index order so the
/// result does not depend on scheduling.
pub fn compute_cutoff(points: &[BlochVector], cutoff: usize, pool: &rayon::ThreadPool) -> Result<CutoffResult> {
    let ops = build_operator_set(cutoff)?;
    let solved: Vec<Result<(f64, [f64; 4])>> = pool.install(|| {
        points
            .par_iter()
            .map(|u| {
                let wrap = |e: GkpError| {
                    GkpError::numerical(format!("ground state for u = ({}, {}, {}) at N = {cutoff}: {e}", u.ux, u.uy, u.uz))
                };
                let op = ops.target(u).map_err(wrap)?;
                let (energy, state) = ground_state(&op).map_err(wrap)?;
                Ok((energy, ops.component_expectations(&state).map_err(wrap)?))
            })
            .collect()
    });
    let mut ground_energies = Vec::with_capacity(points.len());
    let mut components = Vec::with_capacity(points.len());
    for s in solved {
        let (e, c) = s?;
        ground_energies.push(e);
        components.push(c);
    }
    let expectation = components.iter().map(|c| points.iter().map(|u| target_expectation(c, u)).collect()).collect();
    Ok(CutoffResult { cutoff, expectation, ground_energies, components })
}

pub fn run_sweep(atlas: &Atlas, cutoffs: &[usize], workers: usize) -> Result<SweepRecord> {
    let record = SweepRecord::empty(atlas.clone(), cutoffs.to_vec())?;
    resume_sweep(record, workers, |_| Ok(()))
}

/// Computes every cutoff the record is still missing, calling `checkpoint`
/// after each one.
pub fn resume_sweep<F>(mut record: SweepRecord, workers: usize, mut checkpoint: F) -> Result<SweepRecord>
where
    F: FnMut(&SweepRecord) -> Result<()>,
{
    let pool = build_pool(workers)?;
    for n in record.pending_cutoffs() {
        let r = compute_cutoff(&record.atlas.points, n, &pool)?;
        record.expectation.insert(n, r.expectation);
        record.ground_energies.insert(n, r.ground_energies);
        record.components.insert(n, r.components);
        checkpoint(&record)?;
    }
    Ok(record)
}

/// Affine rescale onto `[0, 1]`.
pub fn normalize_matrix(m: &[Vec<f64>]) -> Result<RealMatrix> {
    let (lo, hi) = m.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(GkpError::DegenerateInput("cannot normalize a constant matrix".into()));
    }
    Ok(m.iter().map(|row| row.iter().map(|v| (v - lo) / (hi - lo)).collect()).collect())
}

/// Rows and columns whose minimum is not strictly on the diagonal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalReport {
    pub row_violations: Vec<usize>,
    pub column_violations: Vec<usize>,
}

impl DiagonalReport {
    pub fn count(&self) -> usize {
        self.row_violations.len() + self.column_violations.len()
    }
}

pub fn diagonal_minima(m: &[Vec<f64>]) -> DiagonalReport {
    let size = m.len();
    let mut report = DiagonalReport::default();
    for i in 0..size {
        if (0..size).any(|j| j != i && m[i][j] <= m[i][i]) {
            report.row_violations.push(i);
        }
        if (0..size).any(|j| j != i && m[j][i] <= m[i][i]) {
            report.column_violations.push(i);
        }
    }
    report
}

/// `max_ij |⟨O⟩_ij − 2(1 − F_ij)|` at cutoff `n`.
pub fn logical_subspace_identity_check(record: &SweepRecord, n: usize) -> Result<f64> {
    let e = record.expectation_at(n)?;
    Ok(e.iter()
        .zip(&record.infidelity)
        .flat_map(|(er, fr)| er.iter().zip(fr).map(|(a, b)| (a - 2.0 * b).abs()))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionStats {
    pub slope: f64,
    pub intercept: f64,
    /// `1 − r` with `r` the Pearson coefficient.
    pub correlation_error: f64,
    /// KSG estimate, nats.
    pub mutual_information: f64,
}

/// Least-squares line `y = slope·x + intercept` and Pearson `r`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(GkpError::invalid("regression inputs differ in length"));
    }
    if xs.len() < 3 {
        return Err(GkpError::invalid("regression needs at least 3 points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GkpError::DegenerateInput("regression input has zero variance".into()));
    }
    let slope = sxy / sxx;
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok((slope, my - slope * mx, r))
}

/// Regression of expectation against infidelity over all `M²` pairs, per
/// cutoff present in the record.
pub fn regression_per_cutoff(record: &SweepRecord, ksg_k: usize) -> Result<BTreeMap<usize, RegressionStats>> {
    let xs: Vec<f64> = record.infidelity.iter().flatten().copied().collect();
    let mut out = BTreeMap::new();
    for (&n, e) in &record.expectation {
        let ys: Vec<f64> = e.iter().flatten().copied().collect();
        let (slope, intercept, r) = linear_fit(&xs, &ys)?;
        let mutual_information = ksg_mutual_information(&xs, &ys, ksg_k)?;
        out.insert(n, RegressionStats { slope, intercept, correlation_error: 1.0 - r, mutual_information });
    }
    Ok(out)
}

/// Kraskov–Stögbauer–Grassberger estimator (first variant, max-norm):
/// `ψ(k) + ψ(M) − ⟨ψ(n_x + 1) + ψ(n_y + 1)⟩`.
///
/// Every coordinate receives a seeded uniform jitter of size
/// [`KSG_JITTER`] so that exact ties cannot produce zero-radius
/// neighbourhoods.
pub fn ksg_mutual_information(xs: &[f64], ys: &[f64], k: usize) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(GkpError::invalid("KSG inputs differ in length"));
    }
    if k == 0 {
        return Err(GkpError::invalid("KSG needs k ≥ 1"));
    }
    let m = xs.len();
    if m < k + 1 {
        return Err(GkpError::invalid(format!("KSG with k = {k} needs at least {} points, got {m}", k + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(KSG_JITTER_SEED);
    let mut jitter = |v: f64| v + KSG_JITTER * (2.0 * rng.random::<f64>() - 1.0);
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(&x, &y)| (jitter(x), jitter(y))).collect();

    let mut by_x: Vec<usize> = (0..m).collect();
    by_x.sort_by(|&a, &b| pts[a].0.total_cmp(&pts[b].0));
    let sorted_x: Vec<f64> = by_x.iter().map(|&i| pts[i].0).collect();
    let mut sorted_y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    sorted_y.sort_by(f64::total_cmp);

    // Strictly-within-eps count, excluding the point itself. Differences
    // are compared rather than `v ± eps`, which can round past a neighbour.
    let count_within = |sorted: &[f64], v: f64, eps: f64| {
        sorted.partition_point(|&s| s - v < eps) - sorted.partition_point(|&s| v - s >= eps) - 1
    };

    let mut acc = 0.0;
    let mut nearest = Vec::with_capacity(k + 1);
    for (rank, &i) in by_x.iter().enumerate() {
        let (xi, yi) = pts[i];
        nearest.clear();
        let kth = |nearest: &Vec<f64>| if nearest.len() < k { f64::INFINITY } else { nearest[k - 1] };
        let visit = |j: usize, nearest: &mut Vec<f64>| {
            let d = (pts[j].0 - xi).abs().max((pts[j].1 - yi).abs());
            let pos = nearest.partition_point(|&v| v <= d);
            if pos < k {
                nearest.insert(pos, d);
                nearest.truncate(k);
            }
        };
        let (mut lo, mut hi) = (rank, rank + 1);
        loop {
            let left_gap = if lo > 0 { xi - sorted_x[lo - 1] } else { f64::INFINITY };
            let right_gap = if hi < m { sorted_x[hi] - xi } else { f64::INFINITY };
            let gap = left_gap.min(right_gap);
            if gap == f64::INFINITY || gap >= kth(&nearest) {
                break;
            }
            if left_gap <= right_gap {
                lo -= 1;
                visit(by_x[lo], &mut nearest);
            } else {
                visit(by_x[hi], &mut nearest);
                hi += 1;
            }
        }
        let eps = kth(&nearest);
        let nx = count_within(&sorted_x, xi, eps);
        let ny = count_within(&sorted_y, yi, eps);
        acc += digamma(nx as f64 + 1.0) + digamma(ny as f64 + 1.0);
    }
    Ok(digamma(k as f64) + digamma(m as f64) - acc / m as f64)
}

/// `m(N) = m_∞ − A N^{−d}` fitted on `[n_min, n_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub n_min: usize,
    pub n_max: usize,
    pub points: usize,
    pub m_infinity: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationResult {
    /// Parameters of the widest successful window.
    pub m_infinity: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub window_mean: f64,
    pub window_std: f64,
    pub windows: Vec<WindowFit>,
    /// Windows whose fit failed, with the reason.
    pub skipped: Vec<(usize, String)>,
}

pub const MIN_WINDOW_POINTS: usize = 5;

/// Levenberg–Marquardt fit of `m_∞ − A N^{−d}`, started from
/// `m_∞ = max(m)`, `d = 1` and `A` from the two-point solve at the window
/// ends.
pub fn fit_power_law(ns: &[f64], ms: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let k = ns.len();
    if k < 3 || ms.len() != k {
        return Err(GkpError::invalid("power-law fit needs at least 3 matching points"));
    }
    let m_inf0 = ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (na, nb) = (ns[0], ns[k - 1]);
    let a0 = (ms[k - 1] - ms[0]) / (1.0 / na - 1.0 / nb);
    let mut theta = Vector3::new(m_inf0, if a0 > 0.0 { a0 } else { 1.0 }, 1.0);

    let sse = |t: &Vector3<f64>| -> f64 {
        ns.iter().zip(ms).map(|(&n, &m)| (m - (t[0] - t[1] * n.powf(-t[2]))).powi(2)).sum()
    };
    let mut cost = sse(&theta);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..2000 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&n, &m) in ns.iter().zip(ms) {
            let p = n.powf(-theta[2]);
            let resid = m - (theta[0] - theta[1] * p);
            let grad = Vector3::new(1.0, -p, theta[1] * p * n.ln());
            jtj += grad * grad.transpose();
            jtr += grad * resid;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for d in 0..3 {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = theta + step;
            let c = sse(&trial);
            if c.is_finite() && c <= cost {
                let small = step.norm() <= 1e-12 * (theta.norm() + 1e-12) || cost - c <= 1e-30 + 1e-13 * cost;
                theta = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged || !theta.iter().all(|v| v.is_finite()) {
        return Err(GkpError::numerical("power-law fit did not converge"));
    }
    if !(theta[1] > 0.0 && theta[2] > 0.0) {
        return Err(GkpError::numerical(format!(
            "power-law fit left the admissible region (A = {}, d = {})",
            theta[1], theta[2]
        )));
    }
    Ok((theta[0], theta[1], theta[2], (cost / k as f64).sqrt()))
}

/// Fits every window `[N_min, n_max]` with `N_min ≥ n_min` holding at least
/// [`MIN_WINDOW_POINTS`] cutoffs and summarizes the spread of `m_∞`.
pub fn extrapolate_slope(slopes: &BTreeMap<usize, f64>, n_min: usize, n_max: usize) -> Result<ExtrapolationResult> {
    let data: Vec<(usize, f64)> = slopes.range(..=n_max).map(|(&n, &m)| (n, m)).collect();
    let starts: Vec<usize> = data
        .iter()
        .map(|&(n, _)| n)
        .filter(|&n| n >= n_min && data.iter().filter(|&&(c, _)| c >= n).count() >= MIN_WINDOW_POINTS)
        .collect();
    if starts.is_empty() {
        return Err(GkpError::DegenerateInput(format!(
            "no extrapolation window starting at N ≥ {n_min} holds {MIN_WINDOW_POINTS} cutoffs"
        )));
    }
    let mut windows = Vec::new();
    let mut skipped = Vec::new();
    for &start in &starts {
        let (ns, ms): (Vec<f64>, Vec<f64>) =
            data.iter().filter(|&&(n, _)| n >= start).map(|&(n, m)| (n as f64, m)).unzip();
        match fit_power_law(&ns, &ms) {
            Ok((m_infinity, amplitude, rate, rms_residual)) => windows.push(WindowFit {
                n_min: start,
                n_max: ns[ns.len() - 1] as usize,
                points: ns.len(),
                m_infinity,
                amplitude,
                rate,
                rms_residual,
            }),
            Err(e) => skipped.push((start, e.to_string())),
        }
    }
    let Some(first) = windows.first().copied() else {
        return Err(GkpError::numerical("power-law fit failed in every window"));
    };
    let k = windows.len() as f64;
    let window_mean = windows.iter().map(|w| w.m_infinity).sum::<f64>() / k;
    let window_std = if windows.len() > 1 {
        (windows.iter().map(|w| (w.m_infinity - window_mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ExtrapolationResult {
        m_infinity: first.m_infinity,
        amplitude: first.amplitude,
        rate: first.rate,
        window_mean,
        window_std,
        windows,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::core_states;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn stabilizer_atlas() -> Atlas {
        let pts = core_states().into_iter().take(6).map(|(_, p)| p).collect();
        Atlas::from_points(pts)
    }

    #[test]
    fn stabilizer_infidelities() {
        let f = infidelity_matrix(&stabilizer_atlas().points);
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j {
                    0.0
                } else if i / 2 == j / 2 {
                    1.0
                } else {
                    0.5
                };
                assert_abs_diff_eq!(f[i][j], expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn diagonal_is_ground_energy_and_row_minimum() {
        let rec = run_sweep(&Atlas::core(), &[50], 4).unwrap();
        let e = &rec.expectation[&50];
        for (i, row) in e.iter().enumerate() {
            assert_abs_diff_eq!(row[i], rec.ground_energies[&50][i], epsilon = 1e-10);
        }
        assert_eq!(diagonal_minima(e).count(), 0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let atlas = stabilizer_atlas();
        let a = run_sweep(&atlas, &[10, 20], 1).unwrap();
        let b = run_sweep(&atlas, &[10, 20], 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resume_finishes_a_partial_sweep_identically() {
        let atlas = stabilizer_atlas();
        let full = run_sweep(&atlas, &[8, 12, 16], 2).unwrap();
        let mut seen = 0;
        let partial = SweepRecord::empty(atlas.clone(), vec![8, 12, 16]).unwrap();
        let res = resume_sweep(partial, 2, |r| {
            seen += 1;
            if r.expectation.len() == 2 {
                Err(GkpError::numerical("interrupted"))
            } else {
                Ok(())
            }
        });
        assert!(res.is_err());
        assert_eq!(seen, 2);
        let mut partial = full.clone();
        partial.expectation.remove(&16);
        partial.ground_energies.remove(&16);
        partial.components.remove(&16);
        assert_eq!(partial.pending_cutoffs(), vec![16]);
        assert_eq!(resume_sweep(partial, 2, |_| Ok(())).unwrap(), full);
    }

    #[test]
    fn rejects_bad_cutoff_lists() {
        assert!(SweepRecord::empty(Atlas::core(), vec![]).is_err());
        assert!(SweepRecord::empty(Atlas::core(), vec![10, 5]).is_err());
        assert!(SweepRecord::empty(Atlas::core(), vec![1]).is_err());
    }

    #[test]
    fn identity_deviation_shrinks_with_cutoff() {
        let rec = run_sweep(&Atlas::core(), &[30, 60], 4).unwrap();
        let d30 = logical_subspace_identity_check(&rec, 30).unwrap();
        let d60 = logical_subspace_identity_check(&rec, 60).unwrap();
        assert!(d60 < d30, "{d60} !< {d30}");
        for i in 0..rec.atlas.len() {
            let diag = (rec.expectation[&60][i][i] - rec.ground_energies[&60][i]).abs();
            assert!(diag < 1e-10);
        }
        let norm = |n| {
            rec.probe_bloch(n).unwrap().iter().map(|b| (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt()).sum::<f64>()
                / rec.atlas.len() as f64
        };
        assert!(norm(60) > norm(30));
    }

    #[test]
    fn normalize_examples() {
        let m = normalize_matrix(&[vec![0.0, 2.0], vec![4.0, 2.0]]).unwrap();
        assert_eq!(m, vec![vec![0.0, 0.5], vec![1.0, 0.5]]);
        let unit = vec![vec![0.0, 0.3], vec![1.0, 0.7]];
        assert_eq!(normalize_matrix(&unit).unwrap(), unit);
        assert!(matches!(normalize_matrix(&[vec![3.0, 3.0]]), Err(GkpError::DegenerateInput(_))));
    }

    #[test]
    fn exact_line_has_zero_correlation_error() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let (slope, intercept, r) = linear_fit(&xs, &ys).unwrap();
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(intercept, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(1.0 - r, 0.0, epsilon = 1e-14);
        assert!(linear_fit(&xs[..2], &ys[..2]).is_err());
    }

    fn gaussian_pairs(rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                (a, rho * a + (1.0 - rho * rho).sqrt() * b)
            })
            .unzip()
    }

    #[test]
    fn ksg_matches_gaussian_mutual_information() {
        for (rho, seed) in [(0.0, 1), (0.5, 2), (0.9, 3)] {
            let (xs, ys) = gaussian_pairs(rho, 10_000, seed);
            let mi = ksg_mutual_information(&xs, &ys, 4).unwrap();
            let exact = -0.5 * (1.0 - rho * rho).ln();
            assert!((mi - exact).abs() < 0.05, "rho {rho}: {mi} vs {exact}");
        }
    }

    #[test]
    fn ksg_brute_force_agreement() {
        let (xs, ys) = gaussian_pairs(0.6, 300, 9);
        let k = 3;
        let m = xs.len();
        let mut acc = 0.0;
        for i in 0..m {
            let mut d: Vec<f64> =
                (0..m).filter(|&j| j != i).map(|j| (xs[j] - xs[i]).abs().max((ys[j] - ys[i]).abs())).collect();
            d.sort_by(f64::total_cmp);
            let eps = d[k - 1];
            let nx = (0..m).filter(|&j| j != i && (xs[j] - xs[i]).abs() < eps).count();
            let ny = (0..m).filter(|&j| j != i && (ys[j] - ys[i]).abs() < eps).count();
            acc += digamma(nx as f64 + 1.0) + digamma(ny as f64 + 1.0);
        }
        let brute = digamma(k as f64) + digamma(m as f64) - acc / m as f64;
        assert_abs_diff_eq!(ksg_mutual_information(&xs, &ys, k).unwrap(), brute, epsilon = 1e-9);
    }

    #[test]
    fn ksg_grows_for_deterministic_pairs() {
        let small: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin()).collect();
        let large: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = ksg_mutual_information(&small, &small, 4).unwrap();
        let b = ksg_mutual_information(&large, &large, 4).unwrap();
        assert!(a > 3.0 && b > a, "{a} {b}");
        assert!(ksg_mutual_information(&small[..4], &small[..4], 4).is_err());
    }

    #[test]
    fn recovers_exact_power_law() {
        let slopes: BTreeMap<usize, f64> = (5..=30).map(|k| (5 * k, 2.0 - 5.0 / (5 * k) as f64)).collect();
        let r = extrapolate_slope(&slopes, 21, 150).unwrap();
        assert_abs_diff_eq!(r.m_infinity, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.amplitude, 5.0, epsilon = 1e-4);
        assert_abs_diff_eq!(r.rate, 1.0, epsilon = 1e-6);
        assert!(r.window_std < 1e-6);
        assert!(r.windows.iter().all(|w| w.n_min > 20 && w.points >= MIN_WINDOW_POINTS));
    }

    #[test]
    fn too_few_cutoffs_skips_extrapolation() {
        let slopes: BTreeMap<usize, f64> = [(50, 1.5), (100, 1.8)].into_iter().collect();
        assert!(matches!(extrapolate_slope(&slopes, 21, 150), Err(GkpError::DegenerateInput(_))));
    }

    proptest! {
        #[test]
        fn normalized_matrices_span_the_unit_interval(
            vals in proptest::collection::vec(-50.0f64..50.0, 4..30)
        ) {
            let cols = 2;
            let rows: Vec<Vec<f64>> = vals.chunks(cols).filter(|c| c.len() == cols).map(|c| c.to_vec()).collect();
            prop_assume!(rows.iter().flatten().any(|v| *v != rows[0][0]));
            let n = normalize_matrix(&rows).unwrap();
            let flat: Vec<f64> = n.iter().flatten().copied().collect();
            prop_assert!(flat.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(flat.contains(&0.0));
            prop_assert!(flat.iter().any(|v| (*v - 1.0).abs() < 1e-15));
            // argmin per row is preserved
            for (a, b) in rows.iter().zip(&n) {
                let am = |r: &Vec<f64>| (0..r.len()).min_by(|&i, &j| r[i].total_cmp(&r[j])).unwrap();
                prop_assert_eq!(am(a), am(b));
            }
        }

        #[test]
        fn correlation_error_lies_in_zero_two(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..60)
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            if let Ok((_, _, r)) = linear_fit(&xs, &ys) {
                prop_assert!((0.0..=2.0).contains(&(1.0 - r)));
            }
        }

        #[test]
        fn infidelity_is_symmetric_with_zero_diagonal(seed in 0u64..1000) {
            let pts = crate::bloch::random_unit_vectors(8, seed);
            let f = infidelity_matrix(&pts);
            for i in 0..8 {
                prop_assert!(f[i][i].abs() < 1e-15);
                for j in 0..8 {
                    prop_assert_eq!(f[i][j], f[j][i]);
                }
            }
        }
    }
}
