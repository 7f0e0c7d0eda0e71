use mpec_core::generate::{monotone_lcp, random_affine_instance, random_interior_iterate, random_lcp_instance};
use mpec_core::implicit::{implicit_solve, lower_directional_derivative, lower_solve, ImplicitParams};
use mpec_core::linalg::{norm_inf, Vector};
use mpec_core::model::{phi_general, MpecEvaluator};
use mpec_core::oracle::{enumerate_global, finite_difference_gradient};
use mpec_core::pipa::{pipa_direction, pipa_solve, PipaParams};
use mpec_core::psqp::{psqp_step, select_piece, KktMpecInstance};
use mpec_core::subsolvers::{solve_lcp, solve_lcp_by_enumeration};
use mpec_core::Execution;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lcp_solvers_agree(seed in any::<u64>(), m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mm, q) = monotone_lcp(&mut rng, m);
        let a = solve_lcp(&mm, &q).unwrap();
        let b = solve_lcp_by_enumeration(&mm, &q, Execution::Sequential).unwrap();
        prop_assert!(norm_inf(&(&a.y - &b.y)) <= 1e-9);
        prop_assert!(a.y.iter().all(|&v| v >= 0.0) && a.w.iter().all(|&v| v >= 0.0));
        prop_assert!(a.y.dot(&a.w).abs() <= 1e-10);
    }

    #[test]
    fn pipa_direction_rows_and_ball(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m, l) = (rng.random_range(1..=3), rng.random_range(1..=5), rng.random_range(0..=2));
        let inst = random_affine_instance(&mut rng, n, m, l);
        let u = random_interior_iterate(&mut rng, inst.dims);
        let params = PipaParams::default();
        let dir = pipa_direction(&inst, &u, &params.q_matrix(&inst), &params).unwrap();
        let d = &dir.d;
        let centering = u.w.component_mul(&d.y) + u.y.component_mul(&d.w) + u.y.component_mul(&u.w)
            - Vector::from_element(m, params.sigma * u.mu());
        prop_assert!(norm_inf(&centering) <= 1e-10 * (1.0 + u.y.dot(&u.w)));
        let newton = inst.lower_residual(&u) + inst.lower_jacobian(&u).apply(d);
        prop_assert!(norm_inf(&newton) <= 1e-10 * (1.0 + norm_inf(&inst.lower_residual(&u))));
        let f = inst.lower_residual(&u);
        prop_assert!(d.x.norm_squared() <= params.c * (f.norm() + u.y.dot(&u.w)) + 1e-12);
    }

    #[test]
    fn pipa_phi_decreases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_affine_instance(&mut rng, 2, 3, 1);
        let params = PipaParams { max_iters: 40, ..Default::default() };
        let r = pipa_solve(&inst, &inst.interior_start().unwrap(), &params).unwrap();
        for w in r.trace.windows(2) {
            if let Some(tau) = w[0].tau {
                let bound = (1.0 - params.armijo_eta * tau * (1.0 - params.sigma)) * w[0].phi;
                prop_assert!(w[1].phi <= bound + 1e-14);
            }
        }
        let start = inst.interior_start().unwrap();
        prop_assert!(r.final_phi <= phi_general(&inst, &start).unwrap());
    }

    #[test]
    fn lower_derivative_matches_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=4));
        let inst = random_lcp_instance(&mut rng, n, m);
        let x = Vector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
        let sol = lower_solve(&inst, &x).unwrap();
        // a generic point is nondegenerate, so ybar is smooth there
        prop_assume!(sol.sets.beta.is_empty());
        let dx = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let dy = lower_directional_derivative(&inst, &x, &sol, &dx).unwrap();
        for i in 0..m {
            let g = finite_difference_gradient(|v| lower_solve(&inst, v).unwrap().y[i], &x, 1e-7);
            prop_assert!((g.dot(&dx) - dy[i]).abs() <= 1e-5);
        }
    }

    #[test]
    fn oracle_dominates_implicit(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.random_range(1..=2), rng.random_range(1..=3));
        let inst = random_lcp_instance(&mut rng, n, m);
        let g = enumerate_global(&inst).unwrap();
        let r = implicit_solve(&inst, &Vector::zeros(n), &ImplicitParams::default()).unwrap();
        prop_assert!(r.final_value >= g.best.value - 1e-8);
    }

    #[test]
    fn psqp_steps_hold_their_rows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=4));
        let inst = random_lcp_instance(&mut rng, n, m);
        let x = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let sol = lower_solve(&inst, &x).unwrap();
        let kkt = KktMpecInstance::from_lcp(&inst).unwrap();
        let v = KktMpecInstance::stack_lcp(&sol.iterate(&x));
        let piece = select_piece(&kkt, &v, 1e-8).unwrap();
        let step = psqp_step(&kkt, &v, &piece).unwrap();
        let next = &v + &step.dw;
        prop_assert!(norm_inf(&kkt.l_value(&next)) <= 1e-9);
        let g = kkt.g_value(&next);
        for &i in &piece.j1 {
            prop_assert_eq!(next[n + m + i], 0.0);
            prop_assert!(g[i] <= 1e-9);
        }
        for &i in &piece.j2 {
            prop_assert!(g[i].abs() <= 1e-9);
            prop_assert!(next[n + m + i] >= -1e-9);
        }
        prop_assert!(kkt.upper_value(&next).iter().all(|&s| s <= 1e-9));
    }
}
