use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use ringamp::amplitude::bloch_twist;
use ringamp::glsolver::{gl_integrate, gl_linear_growth_rates, GlField, GlOptions, GlParams};
use ringamp::linalg::{eigenvalues, max_pairing_distance};
use ringamp::scan::ScanRecord;
use ringamp::simulate::modified_gram_schmidt;
use ringamp::spectrum::symbol_matrix;
use ringamp::{make_duffing_ring, DuffingRingParams, RingModel};

fn ring(a: f64, d: f64, nodes: usize) -> RingModel {
    make_duffing_ring(DuffingRingParams { a, d, k: 0.0 }, nodes).unwrap()
}

fn state(nodes: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 2 * nodes)
}

fn rotate(y: &[f64], n: usize) -> Vec<f64> {
    let mut out = y.to_vec();
    out.rotate_left(n);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn origin_is_equilibrium(nodes in 2usize..40, k in 0.0..2.0f64) {
        let model = ring(0.1, 0.3, nodes);
        let f = model.vector_field(&vec![0.0; 2 * nodes], k).unwrap();
        prop_assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vector_field_commutes_with_rotation((nodes, y) in (3usize..20).prop_flat_map(|n| (Just(n), state(n))), k in 0.0..1.0f64) {
        let model = ring(0.1, 0.3, nodes);
        let lhs = model.vector_field(&rotate(&y, 2), k).unwrap();
        let rhs = rotate(&model.vector_field(&y, k).unwrap(), 2);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn banded_matvec_matches_dense((nodes, y) in (2usize..12).prop_flat_map(|n| (Just(n), state(n))), k in 0.0..1.0f64) {
        let model = ring(0.1, 0.3, nodes);
        let jac = model.jacobian(&y, k).unwrap();
        let v: Vec<f64> = y.iter().map(|x| (3.0 * x).cos()).collect();
        let mut banded = vec![0.0; v.len()];
        jac.matvec(&v, &mut banded);
        let dense = jac.to_dense() * nalgebra::DVector::from_column_slice(&v);
        for (a, b) in banded.iter().zip(dense.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences((nodes, y) in (2usize..8).prop_flat_map(|n| (Just(n), state(n))), k in 0.0..1.0f64) {
        let model = ring(0.1, 0.3, nodes);
        let exact = model.jacobian(&y, k).unwrap().to_dense();
        let fd = model.jacobian_fd(&y, k).unwrap().to_dense();
        prop_assert!((exact - fd).amax() < 1e-5);
    }

    #[test]
    fn symbol_spectrum_is_conjugate_symmetric(a in 0.01..1.0f64, d in 0.05..1.0f64, k in 0.0..1.0f64, phi in 0.0..TAU) {
        let model = ring(a, d, 8);
        let plus = eigenvalues(&symbol_matrix(&model, k, phi)).unwrap();
        let minus: Vec<C64> = eigenvalues(&symbol_matrix(&model, k, -phi)).unwrap()
            .into_iter().map(|z| z.conj()).collect();
        prop_assert!(max_pairing_distance(&plus, &minus) < 1e-12);
    }

    #[test]
    fn twist_selects_a_ring_mode(phi0 in 0.0..TAU, nodes in 2usize..500) {
        let theta = bloch_twist(phi0, nodes);
        prop_assert!(theta.abs() <= 0.5);
        let mode = (phi0 + TAU * theta / nodes as f64) * nodes as f64 / TAU;
        prop_assert!((mode - mode.round()).abs() < 1e-9);
    }

    #[test]
    fn real_growth_rates_are_even(r in -2.0..2.0f64, k2 in 0.1..2.0f64, k3 in 0.01..1.0f64) {
        let params = GlParams::real(k2, k3, -1.0);
        let rates = gl_linear_growth_rates(r, &params, 6);
        for (q, rate) in &rates {
            let mirror = rates.iter().find(|(p, _)| *p == -q).unwrap().1;
            prop_assert_eq!(*rate, mirror);
        }
    }

    #[test]
    fn rescaled_interval_identity(k_h in 0.1..0.2f64, dk in 0.0..0.1f64, nodes in 2usize..200) {
        let k_ch = k_h + dk;
        prop_assert_eq!(ScanRecord::rescaled(k_h, k_ch, nodes), (k_ch - k_h) * (nodes * nodes) as f64);
    }

    #[test]
    fn gram_schmidt_orthonormalizes(v in prop::collection::vec(-1.0..1.0f64, 18)) {
        let mut vectors = v;
        // keep the frame well conditioned
        for i in 0..3 {
            vectors[i * 6 + i] += 3.0;
        }
        let diag = modified_gram_schmidt(&mut vectors, 6, 3);
        prop_assert!(diag.iter().all(|&d| d > 0.0));
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..6).map(|c| vectors[i * 6 + c] * vectors[j * 6 + c]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gl_is_phase_equivariant(theta in 0.0..TAU, seed in 0u64..1000) {
        let params = GlParams {
            kappa2: C64::new(0.7, 1.0),
            kappa3: C64::new(0.15, 0.0),
            zeta: C64::new(-0.9, 2.5),
        };
        let field = GlField::random(16, 0.3, seed).unwrap();
        let mut turned = field.clone();
        let g = C64::from_polar(1.0, theta);
        turned.values.iter_mut().for_each(|z| *z *= g);
        let run = |f: &GlField| gl_integrate(f, 2.0, &params, 0.5, 1e-2, usize::MAX, GlOptions::default(), |_| {}).unwrap();
        let (a, b) = (run(&field), run(&turned));
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x * g - y).norm() < 1e-12);
        }
    }
}
