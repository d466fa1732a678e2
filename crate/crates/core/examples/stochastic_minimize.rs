//! Direct search with noisy evaluations: check the constants, then run.

use dsmm::direct_search::{minimize, DsConfig, StoppingRule};
use dsmm::experiment::tight_lyapunov_weight;
use dsmm::objective::Objective;
use dsmm::point::Point;
use dsmm::problems::quadratic_min;
use dsmm::rng::RngStream;
use dsmm::spanning::{make_probabilistic_pair, SpanningKind};
use dsmm::stochastic::{AccuracyConfig, NoiseModel, NoisyOracle};
use dsmm::theory::check_nonconvex_constants;

fn main() -> dsmm::error::Result<()> {
    let acc = AccuracyConfig {
        eps_f: 0.1,
        p_f: 0.9,
        l_f: 0.1,
        ..AccuracyConfig::default()
    };
    let cfg = DsConfig {
        c: 1.0,
        sigma0: 1.0,
        sigma_max: 10.0,
        ..DsConfig::default()
    };
    let v = tight_lyapunov_weight(cfg.c, acc.eps_f, cfg.gamma);
    let report = check_nonconvex_constants(cfg.c, acc.eps_f, v, acc.p_f, cfg.gamma, acc.l_f);
    for i in &report.inequalities {
        println!(
            "{} {:<40} {:.4} vs {:.4}",
            if i.satisfied { "ok  " } else { "FAIL" },
            i.name,
            i.lhs,
            i.rhs
        );
    }
    assert!(report.satisfied);

    let problem = quadratic_min(3)?;
    let oracle = NoisyOracle::new(&problem, NoiseModel::gaussian(0.5), acc);
    let stop = StoppingRule {
        max_iter: Some(40),
        ..StoppingRule::default()
    };
    let set = make_probabilistic_pair(3, RngStream::new(4, 0))?;
    assert_eq!(set.kind(), SpanningKind::ProbabilisticPair);
    let st = minimize(
        Point::from([1.0, -2.0, 0.5]),
        &set,
        &oracle,
        &cfg,
        &stop,
        RngStream::new(4, 1),
    )?;
    for r in st.history.iter().step_by(5) {
        println!(
            "k {:>3} sigma {:.3e} F {:.4}",
            r.iteration, r.sigma, r.f_estimate_current
        );
    }
    println!(
        "f(x_final) = {:.3e} after {} noisy draws",
        problem.value(&st.x),
        st.oracle_calls
    );
    Ok(())
}
