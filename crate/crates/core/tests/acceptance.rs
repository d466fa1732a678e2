//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use dsmm::direct_search::{minimize, DsConfig, OneStepStatus, StoppingRule};
use dsmm::gda::{gda_grid, gda_solve, GdaConfig, GdaMode, ETA_GRID};
use dsmm::minmax::{fne_residual, solve, GameConstants, InnerToleranceMode, MinMaxConfig, MinMaxResult, PlayerNoise};
use dsmm::point::Point;
use dsmm::problems::{
    envelope, pl_nonconvex_min, quadratic_min, quadratic_saddle, rosenbrock, LabeledDataset, RobustRegression,
};
use dsmm::rng::RngStream;
use dsmm::spanning::{make_orthonormal_pm, make_probabilistic_pair};
use dsmm::stochastic::{AccuracyConfig, NoiseModel, NoisyOracle};
use dsmm::theory::{
    check_nonconvex_constants, check_pl_implications, estimate_complexity_slope, lemma2_audit, lyapunov_decrease,
    simulate_reflected_walk, walk_confinement_k, SlopeConfig, SlopeMode, WalkConfig,
};
use dsmm::trace::{phased_trace_to_csv_string, trace_to_csv_string};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn lemma2_trace_audit() -> Outcome {
    let mut violations = 0;
    let mut outside = 0;
    let mut unsuccessful = 0;
    let mut min_ratio = f64::INFINITY;
    let quad = quadratic_min(2).unwrap();
    let rosen = rosenbrock();
    let set = make_orthonormal_pm(2).unwrap();
    for seed in 0..20 {
        let mut r = RngStream::new(seed, 0).rng();
        let xq = Point::from([r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)]);
        let xr = Point::from([-1.2 + r.random_range(-0.2..0.2), 1.0 + r.random_range(-0.2..0.2)]);
        let cq = DsConfig {
            c: 0.01,
            sigma0: 1.0,
            sigma_max: 10.0,
            ..DsConfig::default()
        };
        let cr = DsConfig {
            c: 1e-3,
            sigma0: 0.25,
            sigma_max: 0.5,
            ..DsConfig::default()
        };
        for audit in [
            lemma2_audit(&quad, &set, &cq, xq, 300, RngStream::new(seed, 1)).unwrap(),
            lemma2_audit(&rosen, &set, &cr, xr, 5000, RngStream::new(seed, 2)).unwrap(),
        ] {
            violations += audit.violations;
            outside += audit.outside_region;
            unsuccessful += audit.unsuccessful;
            min_ratio = min_ratio.min(audit.min_ratio);
        }
    }
    outcome(
        violations == 0 && outside == 0,
        format!("{unsuccessful} unsuccessful steps, {violations} violations, {outside} outside the smoothness box, min σ/(C‖∇f‖) = {min_ratio:.3}"),
    )
}

fn lyapunov_decrease_suite() -> Outcome {
    let (c, eps_f, v, p_f, gamma, l_f) = (1.0, 0.1, 0.825, 0.9, 2.0, 0.1);
    let report = check_nonconvex_constants(c, eps_f, v, p_f, gamma, l_f);
    if !report.satisfied {
        return outcome(
            false,
            format!("constants infeasible: {:?}", report.violated().collect::<Vec<_>>()),
        );
    }
    let acc = AccuracyConfig {
        eps_f,
        p_f,
        l_f,
        c0: 2.0,
        n_max: 1_000_000_000,
    };
    let oracle = NoisyOracle::new(quadratic_min(2).unwrap(), NoiseModel::gaussian(1.0), acc);
    let set = make_orthonormal_pm(2).unwrap();
    let cfg = DsConfig {
        c,
        gamma,
        sigma0: 1.0,
        sigma_max: 100.0,
        ..DsConfig::default()
    };
    let states = [
        (Point::from([1.0, 1.0]), 1.0),
        (Point::from([2.0, -1.0]), 0.5),
        (Point::from([0.5, 0.5]), 0.5),
        (Point::from([-3.0, 2.0]), 2.0),
        (Point::from([0.05, 0.02]), 1.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (x, sigma)) in states.iter().enumerate() {
        if oracle.required_samples(*sigma).unwrap().capped {
            return outcome(false, format!("sample cap reached at σ = {sigma}"));
        }
        let est = lyapunov_decrease(
            &oracle,
            0.0,
            &set,
            &cfg,
            v,
            x,
            *sigma,
            2000,
            RngStream::new(100 + i as u64, 0),
        )
        .unwrap();
        pass &= est.passed();
        parts.push(format!("{:.4}≤{:.4}", est.mean, est.bound + 3.0 * est.stderr));
    }
    outcome(
        pass,
        format!("mean ΔΦ vs bound + 3·stderr at 5 states: {}", parts.join(", ")),
    )
}

fn pl_rate_shape() -> Outcome {
    let p = quadratic_min(2).unwrap();
    let set = make_orthonormal_pm(2).unwrap();
    let cfg = SlopeConfig {
        mode: SlopeMode::Pl,
        eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
        replicates: 20,
        center: Point::zeros(2),
        radius: 1.0,
        ds: DsConfig {
            c: 0.01,
            sigma0: 1.0,
            sigma_max: 10.0,
            ..DsConfig::default()
        },
        max_iter: 100_000,
    };
    match estimate_complexity_slope(&p, &set, &cfg, RngStream::new(3, 0)) {
        Ok(est) => outcome(
            (est.slope - 1.0).abs() <= 0.3,
            format!(
                "slope {:.3} (target 1 ± 0.3), mean hitting times {:?}",
                est.slope, est.mean_hitting_times
            ),
        ),
        Err(e) => outcome(false, format!("inconclusive: {e}")),
    }
}

fn nonconvex_rate_envelope() -> Outcome {
    let p = rosenbrock();
    let set = make_orthonormal_pm(2).unwrap();
    let cfg = SlopeConfig {
        mode: SlopeMode::Nonconvex,
        eps_grid: vec![1e-1, 3e-2, 1e-2, 3e-3],
        replicates: 20,
        center: Point::from([-1.2, 1.0]),
        radius: 0.1,
        ds: DsConfig {
            c: 1e-3,
            sigma0: 0.25,
            sigma_max: 0.5,
            ..DsConfig::default()
        },
        max_iter: 2_000_000,
    };
    match estimate_complexity_slope(&p, &set, &cfg, RngStream::new(4, 0)) {
        Ok(est) => outcome(
            est.slope <= 2.5,
            format!(
                "slope {:.3} (limit 2.5), mean hitting times {:?}",
                est.slope, est.mean_hitting_times
            ),
        ),
        Err(e) => outcome(false, format!("inconclusive: {e}")),
    }
}

fn random_walk_confinement() -> Outcome {
    let mut pass = true;
    let mut worst = f64::INFINITY;
    let mut i = 0;
    for p_f in [0.6, 0.7, 0.9] {
        for n in [100, 1000] {
            for delta in [0.5, 0.9] {
                let cfg = WalkConfig { p_f, n, delta };
                let k = walk_confinement_k(&cfg).unwrap();
                let est = simulate_reflected_walk(&cfg, k, 100_000, RngStream::new(5, i)).unwrap();
                let margin = est.probability - (delta - 3.0 * est.stderr);
                pass &= margin >= 0.0;
                worst = worst.min(margin);
                i += 1;
            }
        }
    }
    outcome(
        pass,
        format!("12 configurations, worst margin over δ − 3·stderr = {worst:.4}"),
    )
}

fn saddle_config() -> MinMaxConfig {
    MinMaxConfig {
        eps_target: 5e-3,
        inner_tolerance_mode: InnerToleranceMode::TheoryDriven,
        ..MinMaxConfig::default()
    }
}

fn run_saddle() -> (MinMaxResult, GameConstants) {
    let g = quadratic_saddle();
    let cfg = saddle_config();
    let noise = PlayerNoise::noiseless();
    let gc = GameConstants::for_game(&g, &cfg, &noise).unwrap();
    let r = solve(
        &g,
        Point::from([1.0]),
        Point::from([1.0]),
        Some(&gc),
        &cfg,
        &noise,
        RngStream::new(6, 0),
    )
    .unwrap();
    (r, gc)
}

fn saddle_end_to_end() -> Outcome {
    let g = quadratic_saddle();
    let (r, gc) = run_saddle();
    let k = r.k.expect("theory-driven run resolves K");
    let e = r.eps_max;
    let (mut drift_bad, mut net_bad, mut successes) = (0, 0, 0);
    for w in r.outer.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let s = a.sigma_x;
        let drift = b.f_after_inner - a.f_after_min;
        if drift > gc.d1 * s * s + gc.d2 * s * e + gc.d3 * e * e {
            drift_bad += 1;
        }
        if a.min_status == OneStepStatus::Success {
            successes += 1;
            if b.f_after_inner - a.f_after_inner >= -k * s * s {
                net_bad += 1;
            }
        }
    }
    let (rx, ry) = fne_residual(&g, &r.x, &r.y);
    outcome(
        r.converged && rx <= 1e-2 && ry <= 1e-2 && drift_bad == 0 && net_bad == 0,
        format!(
            "residual ({rx:.2e}, {ry:.2e}) after {} outer iterations; drift violations {drift_bad}, net-decrease violations {net_bad} over {successes} successful steps",
            r.outer.len()
        ),
    )
}

fn regression_game() -> RobustRegression {
    RobustRegression::new(&LabeledDataset::synthetic(2, 50, 5).unwrap(), 1.0).unwrap()
}

fn regression_config() -> MinMaxConfig {
    MinMaxConfig {
        c_x: 10.0,
        c_y: 0.5,
        eps_target: 1e-3,
        inner_tolerance_mode: InnerToleranceMode::Fixed,
        eps_max_fixed: Some(1e-2),
        t_outer_max: 20_000,
        sigma0_x: 0.5,
        sigma_max_x: 1.0,
        ..MinMaxConfig::default()
    }
}

fn run_regression(game: &RobustRegression) -> MinMaxResult {
    let cfg = regression_config();
    let noise = PlayerNoise::noiseless();
    let gc = GameConstants::for_game(game, &cfg, &noise).unwrap();
    solve(
        game,
        Point::zeros(6),
        Point::from(vec![1.0 / 50.0; 50]),
        Some(&gc),
        &cfg,
        &noise,
        RngStream::new(7, 0),
    )
    .unwrap()
}

fn inner_max_equivalence() -> Outcome {
    let game = regression_game();
    let r = run_regression(&game);
    let mu = 2.0 * game.lambda();
    let bound = r.eps_max / (2.0 * mu) + 1e-6;
    let worst = r.outer.iter().map(|o| o.inner_gap.unwrap()).fold(0.0, f64::max);
    outcome(
        worst <= bound,
        format!(
            "{} inner solves, worst ‖p − p*(θ)‖ = {worst:.3e} (bound {bound:.3e})",
            r.outer.len()
        ),
    )
}

fn ds_vs_gda() -> Outcome {
    let game = regression_game();
    let r = run_regression(&game);
    let ds = envelope(&game, &r.x).unwrap();
    let base = GdaConfig {
        mode: GdaMode::Alternating,
        inner_steps_y: 1,
        max_epochs: u64::MAX,
        max_gradient_calls: Some(r.oracle_calls),
        ..GdaConfig::default()
    };
    let runs = gda_grid(
        &game,
        &Point::zeros(6),
        &Point::from(vec![1.0 / 50.0; 50]),
        &base,
        &ETA_GRID,
        |res| envelope(&game, &res.x).unwrap(),
    );
    let best = runs.iter().min_by(|a, b| a.score.total_cmp(&b.score)).unwrap();
    outcome(
        ds <= best.score * 1.05,
        format!(
            "max_p f(θ, p): DS {ds:.6} vs best GDA {:.6} (η = {}) at {} calls",
            best.score, best.eta, r.oracle_calls
        ),
    )
}

fn pl_implications() -> Outcome {
    let a = check_pl_implications(&quadratic_min(2).unwrap(), 5.0, 1000, 1e-10, RngStream::new(9, 0)).unwrap();
    let b = check_pl_implications(&pl_nonconvex_min(), 10.0, 1000, 1e-10, RngStream::new(9, 1)).unwrap();
    outcome(
        a.passed() && b.passed(),
        format!(
            "violations {} + {}; worst margins PL {:.2e}/{:.2e}, QG {:.2e}/{:.2e}, gradient {:.2e}/{:.2e}",
            a.violations,
            b.violations,
            a.pl_margin,
            b.pl_margin,
            a.qg_margin,
            b.qg_margin,
            a.gradient_margin,
            b.gradient_margin
        ),
    )
}

fn trace_bytes() -> Vec<String> {
    let acc = AccuracyConfig {
        n_max: 100_000,
        ..AccuracyConfig::default()
    };
    let oracle = NoisyOracle::new(quadratic_min(3).unwrap(), NoiseModel::gaussian(0.5), acc);
    let set = make_probabilistic_pair(3, RngStream::new(10, 1)).unwrap();
    let stop = StoppingRule {
        max_iter: Some(200),
        ..StoppingRule::default()
    };
    let ds = minimize(
        Point::from([1.0, -2.0, 0.5]),
        &set,
        &oracle,
        &DsConfig::default(),
        &stop,
        RngStream::new(10, 2),
    )
    .unwrap();
    let gda = gda_solve(
        &quadratic_saddle(),
        Point::from([1.0]),
        Point::from([1.0]),
        &GdaConfig {
            max_epochs: 100,
            ..GdaConfig::default()
        },
    )
    .unwrap();
    vec![
        trace_to_csv_string(&ds.history),
        phased_trace_to_csv_string(&run_saddle().0.trace),
        phased_trace_to_csv_string(&run_regression(&regression_game()).trace),
        phased_trace_to_csv_string(&gda.trace),
    ]
}

fn determinism() -> Outcome {
    let a = trace_bytes();
    let b = trace_bytes();
    let same = a == b;
    let bytes: usize = a.iter().map(String::len).sum();
    outcome(
        same,
        format!("4 trace CSVs ({bytes} bytes) identical across repeated runs: {same}"),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            1,
            "unsuccessful-step bound audit",
            Duration::from_secs(10),
            lemma2_trace_audit,
        ),
        (
            2,
            "expected Lyapunov decrease",
            Duration::from_secs(120),
            lyapunov_decrease_suite,
        ),
        (3, "PL hitting-time shape", Duration::from_secs(30), pl_rate_shape),
        (
            4,
            "nonconvex hitting-time envelope",
            Duration::from_secs(120),
            nonconvex_rate_envelope,
        ),
        (
            5,
            "random-walk confinement",
            Duration::from_secs(60),
            random_walk_confinement,
        ),
        (
            6,
            "min-max end to end on the saddle",
            Duration::from_secs(30),
            saddle_end_to_end,
        ),
        (
            7,
            "inner maximizer accuracy",
            Duration::from_secs(60),
            inner_max_equivalence,
        ),
        (8, "direct search vs GDA", Duration::from_secs(300), ds_vs_gda),
        (9, "PL implications", Duration::from_secs(5), pl_implications),
        (10, "determinism", Duration::from_secs(300), determinism),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= limit;
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
