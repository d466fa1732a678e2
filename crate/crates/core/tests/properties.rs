use proptest::prelude::*;

use dsmm::direct_search::{ds_step, forcing, minimize, DsConfig, SearchState, StoppingRule};
use dsmm::minmax::GameConstants;
use dsmm::objective::Objective;
use dsmm::point::Point;
use dsmm::problems::{
    pl_nonconvex_min, quadratic_min, rosenbrock, BlockConstants, Game, LabeledDataset, QuadraticGame, RobustRegression,
};
use dsmm::rng::RngStream;
use dsmm::spanning::{self, random_unit_vector, SpanningKind};
use dsmm::stochastic::{required_samples, AccuracyConfig, NoiseModel, NoisyOracle};
use dsmm::theory::{stationary_tail, walk_confinement_k, WalkConfig};
use dsmm::trace::{read_trace_csv, trace_to_csv_string};

fn coords(dim: usize, r: f64) -> impl Strategy<Value = Point> {
    prop::collection::vec(-r..r, dim).prop_map(Point::from)
}

fn deterministic_kind() -> impl Strategy<Value = SpanningKind> {
    prop_oneof![
        Just(SpanningKind::OrthonormalPm),
        Just(SpanningKind::MinimalUniform),
        Just(SpanningKind::Rotated),
    ]
}

fn small_dataset() -> impl Strategy<Value = LabeledDataset> {
    (1u64..1000, 2usize..12, 1usize..4).prop_map(|(seed, n, d)| LabeledDataset::synthetic(seed, n, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn offset_then_distance(x in coords(4, 10.0), d in coords(4, 1.0), a in -5.0f64..5.0) {
        let y = x.offset(a, &d);
        let expected: f64 = d.iter().map(|v| (a * v) * (a * v)).sum::<f64>().sqrt();
        prop_assert!((x.distance(&y) - expected).abs() <= 1e-9 * (1.0 + expected));
    }

    #[test]
    fn spanning_directions_are_unit(kind in deterministic_kind(), dim in 1usize..9, seed in 0u64..100) {
        let set = spanning::make(kind, dim, RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(set.dim(), dim);
        for d in set.directions() {
            let n: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn declared_kappa_bounds_alignment(kind in deterministic_kind(), dim in 1usize..7, seed in 0u64..100) {
        let set = spanning::make(kind, dim, RngStream::new(seed, 0)).unwrap();
        let mut rng = RngStream::new(seed, 1).rng();
        for _ in 0..50 {
            let u = random_unit_vector(dim, &mut rng);
            let best = set
                .directions()
                .iter()
                .map(|d| d.iter().zip(u.iter()).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(best >= set.kappa_lower() - 1e-12, "{} < {}", best, set.kappa_lower());
        }
    }

    #[test]
    fn sample_count_is_monotone(
        s1 in 0.01f64..2.0,
        s2 in 0.01f64..2.0,
        sf in 0.01f64..2.0,
        eps in 0.01f64..1.0,
        p in 0.55f64..0.99,
    ) {
        let acc = AccuracyConfig { eps_f: eps, p_f: p, l_f: 0.5, c0: 2.0, n_max: u64::MAX };
        let noise = NoiseModel::gaussian(sf);
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let n_lo = required_samples(&acc, &noise, lo).unwrap().samples;
        let n_hi = required_samples(&acc, &noise, hi).unwrap().samples;
        prop_assert!(n_lo >= n_hi);
        let louder = required_samples(&acc, &NoiseModel::gaussian(2.0 * sf), hi).unwrap().samples;
        prop_assert!(louder >= n_hi);
        // Variance condition of the mean: σ_f²/N ≤ l_f² σ⁴.
        prop_assert!(sf * sf / n_hi as f64 <= 0.25 * hi.powi(4) * (1.0 + 1e-12));
    }

    #[test]
    fn forcing_is_quadratic(c in 1e-4f64..10.0, s in 1e-3f64..10.0) {
        let a = forcing(c, s).unwrap();
        let b = forcing(c, 2.0 * s).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((b - 4.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn step_updates_follow_the_rule(
        x in coords(3, 5.0),
        sigma in 1e-3f64..5.0,
        c in 1e-3f64..1.0,
        gamma in 1.1f64..4.0,
        kind in deterministic_kind(),
    ) {
        let problem = quadratic_min(3).unwrap();
        let oracle = NoisyOracle::noiseless(&problem);
        let set = spanning::make(kind, 3, RngStream::new(0, 0)).unwrap();
        let cfg = DsConfig { c, gamma, sigma0: sigma, sigma_max: 2.0, ..DsConfig::default() };
        let mut st = SearchState::new(x.clone(), sigma);
        let out = ds_step(&mut st, &set, &oracle, &cfg, RngStream::new(0, 1)).unwrap();
        let f0 = problem.value(&x);
        if out.success {
            prop_assert!(problem.value(&st.x) < f0 - c * sigma * sigma);
            prop_assert_eq!(st.sigma, (gamma * sigma).min(2.0));
        } else {
            prop_assert_eq!(&st.x, &x);
            prop_assert!((st.sigma - sigma / gamma).abs() <= 1e-15 * sigma);
            // No direction achieves the decrease.
            for d in set.directions() {
                prop_assert!(problem.value(&x.offset(sigma, d)) >= f0 - c * sigma * sigma);
            }
        }
        prop_assert_eq!(st.history.len(), 1);
    }

    #[test]
    fn noiseless_values_never_increase(x in coords(2, 3.0), seed in 0u64..50) {
        let problem = pl_nonconvex_min();
        let oracle = NoisyOracle::noiseless(&problem);
        let set = spanning::make(SpanningKind::OrthonormalPm, 1, RngStream::new(seed, 0)).unwrap();
        let stop = StoppingRule { max_iter: Some(200), ..StoppingRule::default() };
        let st = minimize(Point::from([x[0]]), &set, &oracle, &DsConfig::default(), &stop, RngStream::new(seed, 1)).unwrap();
        for w in st.history.windows(2) {
            prop_assert!(w[1].f_estimate_current <= w[0].f_estimate_current);
        }
    }

    #[test]
    fn walk_k_is_minimal(p in 0.55f64..0.95, n in 1u64..5000, delta in 0.05f64..0.95) {
        let k = walk_confinement_k(&WalkConfig { p_f: p, n, delta }).unwrap();
        let target = delta.powf(1.0 / n as f64);
        prop_assert!(stationary_tail(p, k) >= target - 1e-12);
        if k > 0 {
            prop_assert!(stationary_tail(p, k - 1) < target + 1e-12);
        }
    }

    #[test]
    fn walk_k_is_monotone(p in 0.55f64..0.9, n in 1u64..1000, delta in 0.05f64..0.9) {
        let k = |p_f, n, delta| walk_confinement_k(&WalkConfig { p_f, n, delta }).unwrap();
        let base = k(p, n, delta);
        prop_assert!(k(p, 2 * n, delta) >= base);
        prop_assert!(k(p, n, delta + 0.05) >= base);
        prop_assert!(k(p + 0.05, n, delta) <= base);
    }

    #[test]
    fn dataset_round_trips(data in small_dataset()) {
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = LabeledDataset::from_csv_reader(buf.as_slice()).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn trace_round_trips(seed in 0u64..100) {
        let problem = quadratic_min(2).unwrap();
        let oracle = NoisyOracle::noiseless(&problem);
        let set = spanning::make(SpanningKind::Rotated, 2, RngStream::new(seed, 0)).unwrap();
        let stop = StoppingRule { max_iter: Some(30), ..StoppingRule::default() };
        let st = minimize(Point::from([1.0, 2.0]), &set, &oracle, &DsConfig::default(), &stop, RngStream::new(seed, 1)).unwrap();
        let csv = trace_to_csv_string(&st.history);
        prop_assert_eq!(read_trace_csv(csv.as_bytes()).unwrap(), st.history);
    }

    #[test]
    fn inner_argmax_zeroes_the_gradient(data in small_dataset(), lambda in 0.1f64..5.0, theta_seed in 0u64..100) {
        let game = RobustRegression::new(&data, lambda).unwrap();
        let mut rng = RngStream::new(theta_seed, 0).rng();
        let theta = random_unit_vector(game.dim_x(), &mut rng).scaled(2.0);
        let p = game.inner_argmax(&theta).unwrap();
        prop_assert!(game.grad_y(&theta, &p).norm() <= 1e-10);
        // Strict concavity: any move lowers f.
        let d = random_unit_vector(game.dim_y(), &mut rng);
        prop_assert!(game.value(&theta, &p.offset(1e-3, &d)) < game.value(&theta, &p));
    }

    #[test]
    fn min_problem_gradients_are_lipschitz(a in coords(2, 5.0), b in coords(2, 5.0)) {
        prop_assume!(a.distance(&b) > 1e-9);
        let quad = quadratic_min(2).unwrap();
        let pl = pl_nonconvex_min();
        for (p, u, v) in [(&quad, a.clone(), b.clone()), (&pl, Point::from([a[0]]), Point::from([b[0]]))] {
            let ratio = p.gradient(&u).unwrap().distance(&p.gradient(&v).unwrap()) / u.distance(&v);
            prop_assert!(ratio <= p.lipschitz_grad().unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rosenbrock_is_lipschitz_on_its_box(x1 in -2.0f64..2.0, y1 in -1.0f64..3.0, x2 in -2.0f64..2.0, y2 in -1.0f64..3.0) {
        let r = rosenbrock();
        let (u, v) = (Point::from([x1, y1]), Point::from([x2, y2]));
        prop_assume!(u.distance(&v) > 1e-9);
        let ratio = r.gradient(&u).unwrap().distance(&r.gradient(&v).unwrap()) / u.distance(&v);
        prop_assert!(ratio <= r.lipschitz_grad().unwrap());
    }

    #[test]
    fn game_block_constants_dominate_quotients(data in small_dataset(), lambda in 0.1f64..5.0, seed in 0u64..100) {
        let game = RobustRegression::new(&data, lambda).unwrap();
        let k = game.constants().unwrap();
        let mut rng = RngStream::new(seed, 0).rng();
        let t1 = random_unit_vector(game.dim_x(), &mut rng);
        let t2 = random_unit_vector(game.dim_x(), &mut rng).scaled(0.5);
        // Weights on the simplex, where the local L11 bound applies.
        let p = Point::from(vec![1.0 / game.n() as f64; game.n()]);
        let q = game.inner_argmax(&t1).unwrap();
        let dx = t1.distance(&t2);
        let dy = p.distance(&q);
        prop_assert!(game.grad_x(&t1, &p).distance(&game.grad_x(&t2, &p)) <= k.l11 * dx * (1.0 + 1e-9));
        prop_assert!(game.grad_x(&t1, &p).distance(&game.grad_x(&t1, &q)) <= k.l12 * dy * (1.0 + 1e-9) + 1e-15);
        prop_assert!(game.grad_y(&t1, &p).distance(&game.grad_y(&t2, &p)) <= k.l21 * dx * (1.0 + 1e-9));
        prop_assert!(game.grad_y(&t1, &p).distance(&game.grad_y(&t1, &q)) <= k.l22 * dy * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn solution_map_is_lipschitz(data in small_dataset(), lambda in 0.1f64..5.0, seed in 0u64..100) {
        let game = RobustRegression::new(&data, lambda).unwrap();
        let k = game.constants().unwrap();
        let mut rng = RngStream::new(seed, 0).rng();
        let t1 = random_unit_vector(game.dim_x(), &mut rng).scaled(3.0);
        let t2 = random_unit_vector(game.dim_x(), &mut rng);
        let gap = game.inner_argmax(&t1).unwrap().distance(&game.inner_argmax(&t2).unwrap());
        prop_assert!(gap <= k.l12 / k.mu * t1.distance(&t2) * (1.0 + 1e-9));
    }

    #[test]
    fn solution_map_is_lipschitz_for_quadratic_games(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.1f64..3.0, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0) {
        let game = QuadraticGame { a, b, c };
        let k = game.constants().unwrap();
        let gap = game.inner_argmax(&Point::from([x1])).unwrap().distance(&game.inner_argmax(&Point::from([x2])).unwrap());
        prop_assert!(gap <= k.l12 / k.mu * (x1 - x2).abs() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn near_stationary_means_near_optimal(data in small_dataset(), lambda in 0.1f64..5.0, seed in 0u64..100, r in 1e-6f64..1.0) {
        let game = RobustRegression::new(&data, lambda).unwrap();
        let mu = game.constants().unwrap().mu;
        let mut rng = RngStream::new(seed, 0).rng();
        let theta = random_unit_vector(game.dim_x(), &mut rng);
        let star = game.inner_argmax(&theta).unwrap();
        let p = star.offset(r, &random_unit_vector(game.dim_y(), &mut rng));
        let eps = game.grad_y(&theta, &p).norm();
        prop_assert!(p.distance(&star) <= eps / mu * (1.0 + 1e-9));
    }

    #[test]
    fn derived_constants_match_closed_forms(
        l11 in 0.0f64..5.0, l12 in 0.0f64..5.0, l22 in 0.1f64..5.0, mu_frac in 0.1f64..1.0,
        cx in 0.1f64..10.0, cy in 0.1f64..10.0, kx in 0.1f64..1.0, ky in 0.1f64..1.0, ex in 0.0f64..0.5, ey in 0.0f64..0.5,
    ) {
        let mu = mu_frac * l22;
        let block = BlockConstants { l11, l12, l21: l12, l22, mu };
        let g = GameConstants::derive(&block, cx, cy, kx, ky, ex, ey).unwrap();
        let lxy = l12 / (2.0 * mu);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
        prop_assert!(close(g.l_xy, lxy));
        prop_assert!(close(g.d1, l12 * lxy + l22 * lxy * lxy / 2.0));
        prop_assert!(close(g.d2, l12 / mu + lxy + l22 * lxy / mu));
        prop_assert!(close(g.d3, (1.0 + l22 / (2.0 * mu)) / mu));
        prop_assert!(close(g.c_min, 2.0 * kx / (l11 + 2.0 * cx + 4.0 * ex)));
        prop_assert!(close(g.c_max, 2.0 * ky / (l22 + 2.0 * cy + 4.0 * ey)));
    }

    #[test]
    fn forks_are_reproducible(seed in any::<u64>(), stream in any::<u64>(), tag in any::<u64>()) {
        use rand::Rng;
        let a = RngStream::new(seed, stream).fork(tag);
        let b = RngStream::new(seed, stream).fork(tag);
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.rng().random::<u64>(), b.rng().random::<u64>());
        prop_assert_ne!(a, RngStream::new(seed, stream).fork(tag.wrapping_add(1)));
    }
}
