use gkp_core::bloch::{order_greedy, random_unit_vectors, sample_sphere};
use gkp_core::fock::{cosine_of_quadrature, eigen_residual, ground_state, sine_of_quadrature, spectral_norm};
use gkp_core::gaussian::{covariance_from_params, gaussian_bound, gaussian_expectation, gaussian_fock_state};
use gkp_core::homodyne::{linspace, marginal_density};
use gkp_core::operators::{build_operator_set, gkp_operator};
use gkp_core::sweep::run_sweep;
use gkp_core::wigner::wigner;
use gkp_core::{Atlas, BlochVector, FockVector, GaussianPureParams, HermitianMatrix, QuadratureSpec};
use proptest::prelude::*;

fn unit() -> impl Strategy<Value = BlochVector> {
    (0u64..10_000).prop_map(|seed| random_unit_vectors(1, seed)[0])
}

fn squeezed() -> impl Strategy<Value = GaussianPureParams> {
    (-1.5f64..1.5, -1.5f64..1.5, 0.0f64..0.6, -3.2f64..3.2).prop_map(|(x0, p0, r, theta)| GaussianPureParams {
        x0,
        p0,
        r,
        theta,
    })
}

fn hermitian_residual(m: &HermitianMatrix) -> f64 {
    let a = m.matrix();
    a.iter().zip(a.adjoint().iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn target_is_hermitian_and_bloch_symmetric(u in unit(), n in 4usize..40) {
        let set = build_operator_set(n).unwrap();
        let plus = set.target(&u).unwrap();
        let minus = set.target(&u.neg()).unwrap();
        prop_assert!(hermitian_residual(&plus) <= 1e-12);
        let identity = HermitianMatrix::identity(n);
        let sum = HermitianMatrix::linear_combination(&[(1.0, &plus), (1.0, &minus)]).unwrap();
        let twice = HermitianMatrix::linear_combination(&[(2.0, &set.o1), (2.0, &identity)]).unwrap();
        prop_assert!(sum.max_abs_diff(&twice).unwrap() <= 1e-12);
    }

    #[test]
    fn ground_states_are_eigenpairs_with_nonnegative_energy(u in unit(), n in 4usize..60) {
        let op = gkp_operator(&u, n).unwrap();
        let (energy, state) = ground_state(&op).unwrap();
        prop_assert!(energy >= -1e-8);
        prop_assert!((state.norm_sqr() - 1.0).abs() <= 1e-10);
        prop_assert!(eigen_residual(&op, energy, &state).unwrap() <= 1e-8 * spectral_norm(&op).unwrap());
    }

    #[test]
    fn cosine_and_sine_square_to_identity(scale in 0.5f64..4.0, n in 8usize..40) {
        // Products need the levels above the checked block, so build larger.
        let m = 2 * n + 80;
        let c = cosine_of_quadrature(QuadratureSpec::X_MINUS_P, scale, m, m).unwrap();
        let s = sine_of_quadrature(QuadratureSpec::X_MINUS_P, scale, m, m).unwrap();
        let k = n;
        let sum = c.matrix() * c.matrix() + s.matrix() * s.matrix();
        for i in 0..k {
            for j in 0..k {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((sum[(i, j)].re - expected).abs() <= 1e-8 && sum[(i, j)].im.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn gaussian_states_respect_the_bound(g in squeezed(), u in unit()) {
        let cov = covariance_from_params(&g);
        prop_assert!((cov.determinant() - 0.25).abs() <= 1e-10);
        prop_assert!(gaussian_expectation(&g, &u) >= gaussian_bound(&u) - 1e-9);
    }

    #[test]
    fn gaussian_closed_form_matches_fock_expectation(g in squeezed(), u in unit()) {
        let n = 90;
        let state = gaussian_fock_state(&g, n).unwrap();
        let op = gkp_operator(&u, n).unwrap();
        let fock = op.expectation(&state).unwrap();
        prop_assert!((fock - gaussian_expectation(&g, &u)).abs() <= 1e-6, "{} vs {}", fock, gaussian_expectation(&g, &u));
    }

    #[test]
    fn wigner_of_random_states_is_normalized_and_bounded(seed in 0u64..1000, n in 1usize..8) {
        let amps: Vec<f64> = random_unit_vectors(n, seed).iter().map(|v| v.ux + 0.3 * v.uy).collect();
        prop_assume!(amps.iter().map(|a| a * a).sum::<f64>() > 1e-3);
        let state = FockVector::from_real(&amps).unwrap();
        let axis = linspace(-8.0, 8.0, 161);
        let w = wigner(&state, &axis, &axis).unwrap();
        prop_assert!((w.integral() - 1.0).abs() <= 1e-4);
        prop_assert!(w.max_abs() <= std::f64::consts::FRAC_1_PI + 1e-9);
        let exact = marginal_density(&state, 0.0, &axis).unwrap();
        for (a, b) in w.marginal_x().iter().zip(&exact) {
            prop_assert!((a - b).abs() <= 1e-4);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sampled_atlas_is_separated_and_ordering_permutes(seed in 0u64..1000, delta in 0.5f64..1.2) {
        let atlas = sample_sphere(delta, seed).unwrap();
        for i in 0..atlas.len() {
            for j in 0..i {
                if !atlas.is_core(i) && !atlas.is_core(j) {
                    prop_assert!(atlas.points[i].angular_distance(&atlas.points[j]) >= delta - 1e-12);
                }
            }
        }
        let ordered = order_greedy(&atlas).unwrap();
        let key = |a: &Atlas| {
            let mut v: Vec<[u64; 3]> = a.points.iter().map(|p| p.as_array().map(f64::to_bits)).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(key(&atlas), key(&ordered));
        let lowest = atlas.points.iter().map(|p| p.uz).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(ordered.points[0].uz, lowest);
    }
}

#[test]
fn sweeps_do_not_depend_on_worker_count() {
    let atlas = Atlas::from_points(random_unit_vectors(9, 5));
    let one = run_sweep(&atlas, &[8, 16], 1).unwrap();
    let many = run_sweep(&atlas, &[8, 16], 4).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
}
