use feedcap_core::mac_code::{self, build_system, SimConfig};
use feedcap_core::matrix::{circulant_from_eigs, cyclic_shift, dft_matrix, frobenius_distance, spectral_radius};
use feedcap_core::p2p::{self, Arma1Spectrum, ArmaConvention, QuadratureSpec};
use feedcap_core::riccati::{self, dare_circulant, SystemAB};
use feedcap_core::sum_capacity::{self as sc, MacParams};
use feedcap_core::{Complex, ComplexMatrix, LogBase};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dft_is_unitary(n in 1usize..=64) {
        let q = dft_matrix(n);
        let prod = &q * &q.adjoint();
        prop_assert!(frobenius_distance(&prod, &ComplexMatrix::identity(n)).unwrap() < 1e-12 * (n as f64).max(1.0));
    }

    #[test]
    fn circulant_commutes_with_shift(eigs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..10)) {
        let eigs: Vec<Complex> = eigs.into_iter().map(|(a, b)| Complex::new(a, b)).collect();
        let c = circulant_from_eigs(&eigs).unwrap();
        let s = cyclic_shift(eigs.len());
        prop_assert!(frobenius_distance(&(&s * &c), &(&c * &s)).unwrap() < 1e-11);
    }

    #[test]
    fn spectral_radius_is_similarity_invariant(vals in prop::collection::vec(-2.0f64..2.0, 9), n in 1usize..=6) {
        let m = ComplexMatrix::from_fn(n, n, |r, c| Complex::new(vals[(r * 3 + c) % 9], vals[(r + c * 2) % 9] * 0.5));
        let q = dft_matrix(n);
        let sim = &(&q * &m) * &q.adjoint();
        let (a, b) = (spectral_radius(&m).unwrap(), spectral_radius(&sim).unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
    }

    #[test]
    fn dare_iteration_is_start_independent(n in 1usize..=6, beta in 1.05f64..2.0, scale in prop::sample::select(vec![1.0, 10.0])) {
        let sys = SystemAB::symmetric(n, beta).unwrap();
        let closed = dare_circulant(n, beta).unwrap();
        let size = closed.g.frobenius_norm();
        let it = riccati::dare_iterate(&sys, &ComplexMatrix::identity(n).scale_real(scale), 1e-12 * size.max(1.0), riccati::DEFAULT_MAX_ITER).unwrap();
        prop_assert!(frobenius_distance(&it.g, &closed.g).unwrap() < 1e-7 * size.max(1.0));
        prop_assert!(it.g.is_hermitian(1e-12));
        prop_assert!(it.min_eigenvalue().unwrap() > 0.0);
    }

    #[test]
    fn gauss_mi_reproduces_capacity_functions(n in 2usize..=5, p in 0.01f64..20.0, rho in 0.0f64..0.99) {
        let phi = 1.0 + (n as f64 - 1.0) * rho;
        let cov = sc::GaussCov::symmetric(n, p, rho).unwrap();
        let params = MacParams::new(n, p).unwrap();
        prop_assert!((sc::gaussian_mutual_info(&cov, LogBase::Bits).unwrap() - sc::c1(&params, phi)).abs() <= 1e-12);
        prop_assert!((sc::c2_of_cov(&cov, LogBase::Bits).unwrap() - sc::c2(&params, phi).unwrap()).abs() <= 1e-11);
    }
}

#[test]
fn eigenvalue_ladder() {
    for n in 1..=6 {
        for beta in [1.05, 1.3, 2.0] {
            let l = riccati::circulant_eigenvalues(n, beta);
            assert!((1.0 + n as f64 * l[0] - beta.powi(2 * n as i32)).abs() < 1e-12 * beta.powi(2 * n as i32));
            for w in l.windows(2) {
                assert!((w[0] / w[1] - beta * beta).abs() < 1e-12);
            }
            assert!(dare_circulant(n, beta).unwrap().residual <= 1e-10);
        }
    }
}

#[test]
fn crossing_is_unique() {
    for n in 2..=6 {
        for p in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let nf = n as f64;
            let diff = |phi: f64| nf / (nf - 1.0) * (p * phi * (nf - phi)).ln_1p() - (nf * p * phi).ln_1p();
            let signs: Vec<bool> = (0..=10_000).map(|i| diff(1.0 + (nf - 1.0) * i as f64 / 10_000.0) > 0.0).collect();
            let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
            assert_eq!(changes, 1, "N={n} P={p}");
        }
    }
}

#[test]
fn uniqueness_inequality_chain() {
    for n in 2..=8 {
        for i in 0..=100 {
            let p = 0.5 * i as f64;
            let nf = n as f64;
            assert!(sc::bracket_margin(n, p) >= -1e-12 * nf * (nf * p).ln_1p().max(1.0));
        }
    }
}

#[test]
fn g_is_concave_in_x() {
    let h = 0.05;
    for n in [2, 3, 5] {
        for gamma in [1.1, 1.5, 2.5, 5.0] {
            for i in 1..100 {
                let x = 0.1 * i as f64;
                let g = |t: f64| sc::g_value(n, gamma, t, LogBase::Bits).unwrap();
                assert!(g(x + h) - 2.0 * g(x) + g(x - h) <= 1e-8, "N={n} gamma={gamma} x={x}");
            }
        }
    }
}

#[test]
fn quadrature_gate_holds_for_all_integrals() {
    let q = QuadratureSpec::default();
    let s_z = Arma1Spectrum::new(0.5, 0.2, ArmaConvention::Squared).unwrap();
    let f = p2p::pole_placement_filter(&[Complex::new(1.4, 0.0)], &[Complex::new(0.3, 0.0)]).unwrap();
    let b = p2p::feedback_transform(&f).unwrap();
    let a = p2p::power_integral(&b, &s_z, &q).unwrap();
    let doubled = QuadratureSpec { points: 2 * q.points, ..q };
    assert!((a - p2p::power_integral(&b, &s_z, &doubled).unwrap()).abs() < 1e-8);
    let r = p2p::rate_integral(&b, &q).unwrap();
    assert!((r - p2p::rate_integral(&b, &doubled).unwrap()).abs() < 1e-8);
    // rate of a stabilised loop equals its instability
    assert!((r - 1.4f64.ln()).abs() < 1e-8);
}

#[test]
fn simulation_reproducible_and_seed_sensitive() {
    let sys = build_system(2, 1.4).unwrap();
    let ctrl = mac_code::lqg_controller(&sys).unwrap();
    let cfg = SimConfig::new(12, 1500, 99);
    let a = mac_code::simulate(&sys, &ctrl, &cfg).unwrap();
    let b = mac_code::simulate(&sys, &ctrl, &cfg).unwrap();
    assert_eq!(a, b);
    let c = mac_code::simulate(&sys, &ctrl, &SimConfig::new(12, 1500, 100)).unwrap();
    assert_ne!(a.per_sender_mse, c.per_sender_mse);
}

#[test]
fn arma_moving_average_search_is_recorded() {
    // reported, not asserted against a closed form: only feasibility and a positive rate
    let s_z = Arma1Spectrum::new(0.9, 0.0, ArmaConvention::Squared).unwrap();
    let r = p2p::grid_capacity_search(&s_z, 1.0, p2p::SearchGrid { pole_points: 199, gain_points: 201 }, &QuadratureSpec::default()).unwrap();
    assert!(r.power_used <= 1.0 + 1e-9);
    assert!(r.rate > 0.0 && (r.rate - r.rate_check).abs() < 1e-7);
    println!("ARMA(1) alpha=0.9: rate {:.6} nats at pole {:.4}, gain {:.4}", r.rate, r.pole, r.gain);
}
