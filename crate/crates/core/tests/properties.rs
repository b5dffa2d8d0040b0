mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use mfomo::bench::neighborhood_init;
use mfomo::formulation::{objective, objective_matrix_form, warm_start, ThetaPoint};
use mfomo::game::{exploitability, propagate_flow};
use mfomo::mdp::policy_from_occupation;
use mfomo::optim::{random_feasible_theta, Reparametrization};
use mfomo::projection::{
    is_feasible, project_capped_nonneg, project_l2_ball, project_scaled_simplex, project_simplex,
    project_theta, ThetaBounds,
};
use mfomo::zoo::{
    random_game, CongregationGame, CongregationParams, RandomGameParams, SisGame, SisParams,
};
use mfomo::{Dims, MeanFieldFlow, MeanFieldGame};

fn vector(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_len)
}

fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

fn small_dims() -> impl Strategy<Value = Dims> {
    (1usize..=3, 1usize..=3, 0usize..=3).prop_map(|(s, a, t)| Dims::new(s, a, t))
}

fn simplex_slices(dims: Dims, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dims.n_times())
        .flat_map(|_| simplex_point(dims.sa(), &mut rng))
        .collect()
}

proptest! {
    #[test]
    fn simplex_projection_matches_active_set_search(v in vector(6), mass in 0.01f64..5.0) {
        let p = project_scaled_simplex(&v, mass);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - mass).abs() <= 1e-12 * mass.max(1.0));
        prop_assert!(max_abs_diff(&p, &brute_simplex(&v, mass)) <= 1e-9);
    }

    #[test]
    fn capped_projection_matches_active_set_search(v in vector(6), budget in 0.01f64..5.0) {
        let p = project_capped_nonneg(&v, budget);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!(p.iter().sum::<f64>() <= budget * (1.0 + 1e-12));
        prop_assert!(max_abs_diff(&p, &brute_capped(&v, budget)) <= 1e-9);
    }

    #[test]
    fn ball_projection_matches_closed_form(v in vector(6), radius in 0.01f64..5.0) {
        let p = project_l2_ball(&v, radius);
        prop_assert!(max_abs_diff(&p, &brute_ball(&v, radius)) <= 1e-9);
    }

    #[test]
    fn projections_are_idempotent_and_nonexpansive((u, v) in pair(8), r in 0.1f64..5.0) {
        for proj in [
            &(|x: &[f64]| project_simplex(x)) as &dyn Fn(&[f64]) -> Vec<f64>,
            &|x: &[f64]| project_capped_nonneg(x, r),
            &|x: &[f64]| project_l2_ball(x, r),
        ] {
            let (pu, pv) = (proj(&u), proj(&v));
            prop_assert!(max_abs_diff(&proj(&pu), &pu) <= 1e-12);
            prop_assert!(l2(&pu, &pv) <= l2(&u, &v) + 1e-12);
        }
    }

    #[test]
    fn theta_projection_is_feasible(dims in small_dims(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds = ThetaBounds::new(dims, 1.0);
        let raw: Vec<f64> = (0..dims.value_len() + 2 * dims.flow_len())
            .map(|i| 50.0 * ((seed as f64 + i as f64) * 0.7).sin())
            .collect();
        let theta = ThetaPoint::from_vec(dims, &raw).unwrap();
        let projected = project_theta(&theta, &bounds);
        prop_assert!(is_feasible(&projected, &bounds, 1e-9));
        let inside = random_feasible_theta(dims, &bounds, &mut rng);
        prop_assert!(inside.distance(&project_theta(&inside, &bounds)) <= 1e-9);
    }

    #[test]
    fn objective_forms_agree_and_are_nonnegative(dims in small_dims(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&RandomGameParams::new(dims.n_states, dims.n_actions, dims.horizon, seed));
        let theta = random_feasible_theta(dims, &ThetaBounds::new(dims, game.r_max()), &mut rng);
        let a = objective(&game, &theta);
        let b = objective_matrix_form(&game, &theta);
        prop_assert!(a.total >= 0.0);
        prop_assert!((a.total - b.total).abs() <= 1e-9 * a.total.max(1.0));
        prop_assert!((a.complementarity - theta.z.iter().zip(&theta.l).map(|(z, l)| z * l).sum::<f64>()).abs()
            <= 1e-9 * a.total.max(1.0));
    }

    #[test]
    fn warm_start_is_feasible_and_prices_exploitability(dims in small_dims(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&RandomGameParams::new(dims.n_states, dims.n_actions, dims.horizon, seed));
        let flow = MeanFieldFlow::new(dims, simplex_slices(dims, seed)).unwrap();
        let theta = warm_start(&game, &flow).unwrap();
        prop_assert!(is_feasible(&theta, &ThetaBounds::new(dims, game.r_max()), 1e-9));
        prop_assert!(theta.z.iter().all(|z| *z >= 0.0));
        let pi = random_policy(dims, 0.5, &mut rng);
        let gamma = propagate_flow(&game, &pi);
        let f = objective(&game, &warm_start(&game, &gamma).unwrap()).total;
        prop_assert!((f - exploitability(&game, &pi).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn induced_flows_are_distributions(dims in small_dims(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = random_game(&RandomGameParams::new(dims.n_states, dims.n_actions, dims.horizon, seed));
        let pi = random_policy(dims, 0.3, &mut rng);
        let flow = propagate_flow(&game, &pi);
        prop_assert!(flow.validate(1e-12).is_ok());
        let oracle = flow_of(&game, &pi);
        for t in 0..dims.n_times() {
            prop_assert!(max_abs_diff(flow.slice(t), &oracle[t]) <= 1e-12);
        }
        let back = policy_from_occupation(&flow, None);
        prop_assert!(back.validate(1e-12).is_ok());
    }

    #[test]
    fn random_game_rows_are_stochastic(dims in small_dims(), seed in any::<u64>(), knob in 0.0f64..=1.0) {
        let mut p = RandomGameParams::new(dims.n_states, dims.n_actions, dims.horizon, seed);
        p.lipschitz_knob = knob;
        let game = random_game(&p);
        let again = random_game(&p);
        let l = simplex_slices(dims, seed ^ 1);
        for t in 0..dims.horizon {
            let lt = &l[t * dims.sa()..(t + 1) * dims.sa()];
            let pt = game.transition(t, lt);
            prop_assert_eq!(&pt, &again.transition(t, lt));
            for col in pt.chunks(dims.n_states) {
                prop_assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(col.iter().all(|x| *x >= 0.0));
            }
        }
        for t in 0..dims.n_times() {
            let lt = &l[t * dims.sa()..(t + 1) * dims.sa()];
            prop_assert!(game.reward(t, lt).iter().all(|r| r.abs() <= game.r_max() + 1e-12));
        }
    }

    #[test]
    fn congregation_transitions_normalize(n in 2usize..=5, seed in any::<u64>(), c in 0.0f64..3.0) {
        let mut params = CongregationParams::new(n, 3, vec![1.0; n]);
        params.noise = vec![c; 2];
        let game = CongregationGame::new(params).unwrap();
        let l = simplex_slices(game.dims(), seed);
        let sa = game.dims().sa();
        for t in 0..3 {
            let pt = game.transition(t, &l[t * sa..(t + 1) * sa]);
            for col in pt.chunks(n) {
                prop_assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(col.iter().all(|x| *x >= 0.0));
            }
        }
    }

    #[test]
    fn sis_marginals_stay_probability_vectors(seed in any::<u64>(), beta in 0.0f64..=1.0, gamma in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = SisGame::new(SisParams {
            horizon: 8,
            infection_rate: beta,
            recovery_rate: gamma,
            ..SisParams::default()
        })
        .unwrap();
        let pi = random_policy(game.dims(), 0.3, &mut rng);
        let flow = propagate_flow(&game, &pi);
        for t in 0..game.dims().n_times() {
            let m = flow.state_marginal(t);
            prop_assert!(m.iter().all(|x| *x >= 0.0));
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn reparametrization_lands_in_theta(dims in small_dims(), seed in any::<u64>(), scale in 0.0f64..50.0) {
        let bounds = ThetaBounds::new(dims, 1.0);
        let rep = Reparametrization::new(dims, bounds);
        let p: Vec<f64> = (0..rep.len()).map(|i| scale * ((seed % 1000) as f64 + 1.3 * i as f64).sin()).collect();
        prop_assert!(is_feasible(&rep.map(&p), &bounds, 1e-9));
    }

    #[test]
    fn neighborhoods_stay_close_and_feasible(seed in any::<u64>(), eps in 0.0f64..0.5) {
        let game = CongregationGame::new(CongregationParams::new(3, 4, vec![1.0, 1.0, 0.3])).unwrap();
        let (_, ne) = game.nash_construction(1).unwrap();
        let theta = neighborhood_init(&game, &ne, eps, seed).unwrap();
        prop_assert!(is_feasible(&theta, &ThetaBounds::new(game.dims(), game.r_max()), 1e-9));
        let sa = game.dims().sa();
        for t in 0..game.dims().n_times() {
            // The noise has ℓ1 size eps, so ℓ2 size at most eps, and the
            // simplex projection does not expand ℓ2 distances.
            prop_assert!(l2(&theta.l[t * sa..(t + 1) * sa], ne.slice(t)) <= eps + 1e-12);
        }
    }
}
