//! Noiseless direct search on Rosenbrock until the gradient drops below 1e-4.

use dsmm::direct_search::{minimize, DsConfig, StoppingRule};
use dsmm::objective::Objective;
use dsmm::point::Point;
use dsmm::problems::rosenbrock;
use dsmm::rng::RngStream;
use dsmm::spanning::make_orthonormal_pm;
use dsmm::stochastic::NoisyOracle;

fn main() -> dsmm::error::Result<()> {
    let problem = rosenbrock();
    let oracle = NoisyOracle::noiseless(&problem);
    let cfg = DsConfig {
        c: 1e-3,
        sigma0: 0.25,
        sigma_max: 0.5,
        ..DsConfig::default()
    };
    let stop = StoppingRule {
        max_iter: Some(200_000),
        grad_target: Some(1e-4),
        ..StoppingRule::default()
    };
    let st = minimize(
        Point::from([-1.2, 1.0]),
        &make_orthonormal_pm(2)?,
        &oracle,
        &cfg,
        &stop,
        RngStream::new(0, 0),
    )?;
    println!("termination {:?}", st.termination.unwrap());
    println!("x = {:?}", st.x.as_slice());
    println!(
        "f = {:.3e}, |grad| = {:.3e}",
        problem.value(&st.x),
        problem.gradient(&st.x).unwrap().norm()
    );
    println!(
        "{} iterations, {} successful, {} evaluations",
        st.iteration,
        st.successes(),
        st.oracle_calls
    );
    Ok(())
}
