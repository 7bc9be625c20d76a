//! Logical Bloch sphere: unit vectors, infidelities, the 26 core states,
//! Fibonacci sampling and the greedy nearest-neighbour tour.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GkpError, Result};
use crate::fock::{FockVector, HermitianMatrix};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub ux: f64,
    pub uy: f64,
    pub uz: f64,
}

impl BlochVector {
    /// Requires `ux² + uy² + uz² = 1` within 1e-9.
    pub fn new(ux: f64, uy: f64, uz: f64) -> Result<Self> {
        let v = Self { ux, uy, uz };
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(GkpError::invalid(format!(
                "Bloch vector ({ux}, {uy}, {uz}) has norm {n}, expected 1"
            )));
        }
        Ok(v)
    }

    /// Rescales any non-zero vector onto the sphere.
    pub fn normalized(ux: f64, uy: f64, uz: f64) -> Result<Self> {
        let n = (ux * ux + uy * uy + uz * uz).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(GkpError::invalid("cannot normalize a zero vector"));
        }
        Ok(Self { ux: ux / n, uy: uy / n, uz: uz / n })
    }

    pub const ZERO_L: BlochVector = BlochVector { ux: 0.0, uy: 0.0, uz: 1.0 };
    pub const ONE_L: BlochVector = BlochVector { ux: 0.0, uy: 0.0, uz: -1.0 };
    pub const PLUS_L: BlochVector = BlochVector { ux: 1.0, uy: 0.0, uz: 0.0 };
    pub const MINUS_L: BlochVector = BlochVector { ux: -1.0, uy: 0.0, uz: 0.0 };
    /// The magic state `(|0⟩ + e^{iπ/4}|1⟩)/√2`.
    pub const H_L: BlochVector = BlochVector { ux: FRAC_1_SQRT_2, uy: FRAC_1_SQRT_2, uz: 0.0 };

    pub fn as_array(&self) -> [f64; 3] {
        [self.ux, self.uy, self.uz]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.ux * other.ux + self.uy * other.uy + self.uz * other.uz
    }

    pub fn neg(&self) -> BlochVector {
        BlochVector { ux: -self.ux, uy: -self.uy, uz: -self.uz }
    }

    pub fn inf_norm(&self) -> f64 {
        self.ux.abs().max(self.uy.abs()).max(self.uz.abs())
    }

    pub fn euclidean_distance(&self, other: &BlochVector) -> f64 {
        let d = [self.ux - other.ux, self.uy - other.uy, self.uz - other.uz];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Great-circle angle, computed as `acos` of the clamped dot product.
    pub fn angular_distance(&self, other: &BlochVector) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }
}

/// `(θ, φ)` of `cos θ |0⟩ + e^{iφ} sin θ |1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitAngles {
    pub theta: f64,
    pub phi: f64,
}

/// `1 − F = (1 − uᵢ·uⱼ)/2`, clamped to `[0, 1]`.
pub fn logical_infidelity(ui: &BlochVector, uj: &BlochVector) -> f64 {
    (0.5 * (1.0 - ui.dot(uj))).clamp(0.0, 1.0)
}

/// Inverts `cos θ = √((1+u_z)/2)`, `e^{iφ} sin θ = (u_x + i u_y)/√(2(1+u_z))`.
/// At the south pole `θ = π/2`, `φ = 0`.
pub fn bloch_to_angles(u: &BlochVector) -> QubitAngles {
    let c = ((1.0 + u.uz) / 2.0).max(0.0).sqrt().min(1.0);
    let theta = c.acos();
    let transverse = u.ux.hypot(u.uy);
    let phi = if 1.0 + u.uz <= 0.0 || transverse == 0.0 { 0.0 } else { u.uy.atan2(u.ux) };
    QubitAngles { theta, phi }
}

pub fn angles_to_bloch(a: &QubitAngles) -> BlochVector {
    let s2 = (2.0 * a.theta).sin();
    BlochVector { ux: s2 * a.phi.cos(), uy: s2 * a.phi.sin(), uz: (2.0 * a.theta).cos() }
}

/// Two-level operator `1 − u·σ`.
pub fn qubit_operator(u: &BlochVector) -> HermitianMatrix {
    let mut m = nalgebra::DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 0)] = Complex64::new(1.0 - u.uz, 0.0);
    m[(1, 1)] = Complex64::new(1.0 + u.uz, 0.0);
    m[(0, 1)] = Complex64::new(-u.ux, u.uy);
    m[(1, 0)] = Complex64::new(-u.ux, -u.uy);
    HermitianMatrix::hermitize(m)
}

/// `(cos θ, e^{iφ} sin θ)` as a two-level state.
pub fn qubit_state(a: &QubitAngles) -> FockVector {
    FockVector::new(vec![
        Complex64::new(a.theta.cos(), 0.0),
        Complex64::from_polar(a.theta.sin(), a.phi),
    ])
    .expect("qubit state is normalized")
}

/// The 26 core logical states: six stabilizer states, twelve H-type and
/// eight T-type magic states.
pub fn core_states() -> Vec<(String, BlochVector)> {
    let mut out = Vec::with_capacity(26);
    let axes = [
        ("0", [0.0, 0.0, 1.0]),
        ("1", [0.0, 0.0, -1.0]),
        ("+", [1.0, 0.0, 0.0]),
        ("-", [-1.0, 0.0, 0.0]),
        ("+i", [0.0, 1.0, 0.0]),
        ("-i", [0.0, -1.0, 0.0]),
    ];
    for (label, [x, y, z]) in axes {
        out.push((label.to_string(), BlochVector { ux: x, uy: y, uz: z }));
    }
    let h = FRAC_1_SQRT_2;
    let h_states = [
        ("H+x+y", [h, h, 0.0]),
        ("H+x-y", [h, -h, 0.0]),
        ("H+x+z", [h, 0.0, h]),
        ("H+x-z", [h, 0.0, -h]),
        ("H-x+y", [-h, h, 0.0]),
        ("H-x-y", [-h, -h, 0.0]),
        ("H-x+z", [-h, 0.0, h]),
        ("H-x-z", [-h, 0.0, -h]),
        ("H+y+z", [0.0, h, h]),
        ("H+y-z", [0.0, h, -h]),
        ("H-y+z", [0.0, -h, h]),
        ("H-y-z", [0.0, -h, -h]),
    ];
    for (label, [x, y, z]) in h_states {
        out.push((label.to_string(), BlochVector { ux: x, uy: y, uz: z }));
    }
    let t = 1.0 / 3.0_f64.sqrt();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                let label = format!("T{}{}{}", sign_char(sx), sign_char(sy), sign_char(sz));
                out.push((label, BlochVector { ux: sx * t, uy: sy * t, uz: sz * t }));
            }
        }
    }
    out
}

fn sign_char(s: f64) -> char {
    if s > 0.0 {
        '+'
    } else {
        '-'
    }
}

/// Ordered set of sampled Bloch vectors; the 26 core states carry labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub points: Vec<BlochVector>,
    pub labels: Vec<Option<String>>,
    pub delta: f64,
    pub seed: u64,
}

impl Atlas {
    /// The 26 core states alone, unordered.
    pub fn core() -> Self {
        let (labels, points): (Vec<_>, Vec<_>) =
            core_states().into_iter().map(|(l, p)| (Some(l), p)).unzip();
        Self { points, labels, delta: 0.0, seed: 0 }
    }

    pub fn from_points(points: Vec<BlochVector>) -> Self {
        let labels = vec![None; points.len()];
        Self { points, labels, delta: 0.0, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_core(&self, i: usize) -> bool {
        self.labels[i].is_some()
    }
}

/// Size of the oversampled Fibonacci candidate pool, `⌈16/δ²⌉`.
pub fn candidate_pool_size(delta: f64) -> usize {
    (16.0 / (delta * delta)).ceil() as usize
}

/// Fibonacci spiral `θ_j = acos(1 − (2j + 0.5)/N)`, `φ_j = 2πj/golden`.
pub fn fibonacci_lattice(count: usize) -> Vec<BlochVector> {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    (0..count)
        .map(|j| {
            let theta = (1.0 - (2.0 * j as f64 + 0.5) / count as f64).clamp(-1.0, 1.0).acos();
            let phi = 2.0 * PI * j as f64 / golden;
            BlochVector {
                ux: theta.sin() * phi.cos(),
                uy: theta.sin() * phi.sin(),
                uz: theta.cos(),
            }
        })
        .collect()
}

/// Seeds with the core states, shuffles the Fibonacci pool with a ChaCha8
/// generator and greedily keeps candidates at least `delta` away from
/// everything accepted so far.
pub fn sample_sphere(delta: f64, seed: u64) -> Result<Atlas> {
    if !(delta > 0.0 && delta <= PI) {
        return Err(GkpError::invalid(format!("delta must lie in (0, π], got {delta}")));
    }
    let mut atlas = Atlas::core();
    atlas.delta = delta;
    atlas.seed = seed;
    let mut pool = fibonacci_lattice(candidate_pool_size(delta));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    // Comparing dot products avoids an acos per pair.
    let cos_delta = delta.cos();
    for c in pool {
        if atlas.points.iter().all(|p| c.dot(p).clamp(-1.0, 1.0) <= cos_delta) {
            atlas.points.push(c);
            atlas.labels.push(None);
        }
    }
    Ok(atlas)
}

/// Nearest-neighbour tour from the point with the smallest `u_z`, as the
/// sequence of original indices. Ties go to the lowest original index.
pub fn greedy_tour(atlas: &Atlas) -> Result<Vec<usize>> {
    let m = atlas.len();
    if m == 0 {
        return Err(GkpError::invalid("cannot order an empty atlas"));
    }
    let mut start = 0;
    for i in 1..m {
        if atlas.points[i].uz < atlas.points[start].uz {
            start = i;
        }
    }
    let mut visited = vec![false; m];
    let mut order = Vec::with_capacity(m);
    let mut current = start;
    visited[current] = true;
    order.push(current);
    while order.len() < m {
        let here = atlas.points[current];
        let mut best: Option<(usize, f64)> = None;
        for (j, p) in atlas.points.iter().enumerate() {
            if visited[j] {
                continue;
            }
            let d = here.euclidean_distance(p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (next, _) = best.expect("unvisited point remains");
        visited[next] = true;
        order.push(next);
        current = next;
    }
    Ok(order)
}

/// The atlas rearranged along [`greedy_tour`].
pub fn order_greedy(atlas: &Atlas) -> Result<Atlas> {
    let order = greedy_tour(atlas)?;
    Ok(Atlas {
        points: order.iter().map(|&i| atlas.points[i]).collect(),
        labels: order.iter().map(|&i| atlas.labels[i].clone()).collect(),
        delta: atlas.delta,
        seed: atlas.seed,
    })
}

/// `count` seeded unit vectors, uniform on the sphere.
pub fn random_unit_vectors(count: usize, seed: u64) -> Vec<BlochVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        let z: f64 = StandardNormal.sample(&mut rng);
        if let Ok(v) = BlochVector::normalized(x, y, z) {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ground_state;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn core_states_match_the_table() {
        let core = core_states();
        assert_eq!(core.len(), 26);
        let find = |l: &str| core.iter().find(|(x, _)| x == l).unwrap().1;
        assert_eq!(find("0"), BlochVector::ZERO_L);
        let t = find("T+++");
        for c in t.as_array() {
            assert_abs_diff_eq!(c, 1.0 / 3.0_f64.sqrt(), epsilon = 1e-15);
        }
        let h = find("H+x+y");
        assert_abs_diff_eq!(h.ux, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(h.uy, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(h.uz, 0.0);
        assert_eq!(core.iter().filter(|(l, _)| l.starts_with('H')).count(), 12);
        assert_eq!(core.iter().filter(|(l, _)| l.starts_with('T')).count(), 8);
        for (_, v) in &core {
            assert!(BlochVector::new(v.ux, v.uy, v.uz).is_ok());
        }
        // All distinct.
        for i in 0..26 {
            for j in i + 1..26 {
                assert!(core[i].1.euclidean_distance(&core[j].1) > 0.1);
            }
        }
    }

    #[test]
    fn infidelity_examples() {
        let z = BlochVector::ZERO_L;
        assert_eq!(logical_infidelity(&z, &z), 0.0);
        assert_eq!(logical_infidelity(&z, &BlochVector::ONE_L), 1.0);
        assert_abs_diff_eq!(logical_infidelity(&z, &BlochVector::PLUS_L), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn angle_examples() {
        let a = bloch_to_angles(&BlochVector::ZERO_L);
        assert_eq!((a.theta, a.phi), (0.0, 0.0));
        let a = bloch_to_angles(&BlochVector::H_L);
        assert_abs_diff_eq!(a.theta, PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.phi, PI / 4.0, epsilon = 1e-12);
        let a = bloch_to_angles(&BlochVector::PLUS_L);
        assert_abs_diff_eq!(a.theta, PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.phi, 0.0, epsilon = 1e-12);
        let a = bloch_to_angles(&BlochVector::ONE_L);
        assert_abs_diff_eq!(a.theta, PI / 2.0, epsilon = 1e-12);
        assert_eq!(a.phi, 0.0);
    }

    #[test]
    fn qubit_operator_ground_state_is_the_bloch_state() {
        for (_, u) in core_states() {
            let (e, gs) = ground_state(&qubit_operator(&u)).unwrap();
            assert_abs_diff_eq!(e, 0.0, epsilon = 1e-12);
            let expect = qubit_state(&bloch_to_angles(&u));
            assert_abs_diff_eq!(gs.overlap(&expect).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_non_unit_vectors_and_bad_delta() {
        assert!(BlochVector::new(1.0, 1.0, 0.0).is_err());
        assert!(sample_sphere(0.0, 1).is_err());
        assert!(sample_sphere(f64::NAN, 1).is_err());
        assert!(sample_sphere(3.5, 1).is_err());
    }

    #[test]
    fn wide_delta_keeps_only_core_states() {
        assert_eq!(sample_sphere(2.0, 0).unwrap().len(), 26);
    }

    #[test]
    fn fine_sampling_gives_order_a_thousand_points() {
        assert_eq!(candidate_pool_size(0.1), 1600);
        let atlas = sample_sphere(0.1, 7).unwrap();
        // The 1600-point pool is spaced slightly under δ, so roughly a third survives.
        assert!((500..=1500).contains(&atlas.len()), "{}", atlas.len());
    }

    #[test]
    fn coarse_sampling_keeps_core_states() {
        let atlas = sample_sphere(PI / 3.0, 3).unwrap();
        assert!(atlas.len() >= 26);
        assert_eq!(atlas.labels.iter().filter(|l| l.is_some()).count(), 26);
    }

    #[test]
    fn sampling_is_deterministic_and_separated() {
        let a = sample_sphere(0.3, 11).unwrap();
        let b = sample_sphere(0.3, 11).unwrap();
        assert_eq!(a, b);
        let n = a.len();
        for i in 0..n {
            for j in i + 1..n {
                if a.is_core(i) && a.is_core(j) {
                    continue;
                }
                assert!(a.points[i].angular_distance(&a.points[j]) >= 0.3 - 1e-12);
            }
        }
    }

    #[test]
    fn greedy_order_small_cases() {
        let one = Atlas::from_points(vec![BlochVector::PLUS_L]);
        assert_eq!(order_greedy(&one).unwrap().points, one.points);
        let two = Atlas::from_points(vec![BlochVector::ZERO_L, BlochVector::ONE_L]);
        assert_eq!(order_greedy(&two).unwrap().points[0], BlochVector::ONE_L);
        assert!(order_greedy(&Atlas::from_points(vec![])).is_err());
    }

    #[test]
    fn greedy_order_runs_into_a_corner() {
        let ordered = order_greedy(&sample_sphere(0.3, 5).unwrap()).unwrap();
        let steps: Vec<f64> =
            ordered.points.windows(2).map(|w| w[0].euclidean_distance(&w[1])).collect();
        let mut sorted = steps.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let tail = &steps[steps.len() * 9 / 10..];
        let tail_max = tail.iter().cloned().fold(0.0, f64::max);
        assert!(tail_max > 2.0 * median, "tail max {tail_max}, median {median}");
        let mut start_min = f64::INFINITY;
        for p in &ordered.points {
            start_min = start_min.min(p.uz);
        }
        assert_eq!(ordered.points[0].uz, start_min);
    }

    proptest! {
        #[test]
        fn angles_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -0.999f64..1.0) {
            prop_assume!(x * x + y * y + z * z > 1e-3);
            let u = BlochVector::normalized(x, y, z).unwrap();
            prop_assume!(u.uz > -0.999);
            let back = angles_to_bloch(&bloch_to_angles(&u));
            prop_assert!(u.euclidean_distance(&back) < 1e-12);
        }

        #[test]
        fn infidelity_is_symmetric_and_bounded(seed in 0u64..500) {
            let v = random_unit_vectors(2, seed);
            let f = logical_infidelity(&v[0], &v[1]);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f, logical_infidelity(&v[1], &v[0]));
            prop_assert!(logical_infidelity(&v[0], &v[0]) < 1e-15);
            prop_assert!((logical_infidelity(&v[0], &v[0].neg()) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn greedy_order_is_a_permutation(seed in 0u64..50, count in 1usize..40) {
            let atlas = Atlas::from_points(random_unit_vectors(count, seed));
            let ordered = order_greedy(&atlas).unwrap();
            let key = |v: &BlochVector| v.as_array().map(f64::to_bits);
            let mut a: Vec<_> = atlas.points.iter().map(key).collect();
            let mut b: Vec<_> = ordered.points.iter().map(key).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
