//! How many draws an estimate needs as the step size shrinks, and how close
//! the averaged value lands.

use dsmm::point::Point;
use dsmm::problems::quadratic_min;
use dsmm::rng::RngStream;
use dsmm::stochastic::{AccuracyConfig, NoiseModel, NoisyOracle};

fn main() -> dsmm::error::Result<()> {
    let acc = AccuracyConfig {
        eps_f: 0.1,
        p_f: 0.9,
        l_f: 0.1,
        ..AccuracyConfig::default()
    };
    let x = Point::from([0.5, -0.5]);
    for noise in [
        NoiseModel::gaussian(0.2),
        NoiseModel::uniform(0.2),
        NoiseModel::bernoulli_spike(0.2),
    ] {
        let oracle = NoisyOracle::new(quadratic_min(2)?, noise, acc);
        println!("{:?}", noise.kind);
        for (i, sigma) in [1.0, 0.5, 0.25, 0.125].into_iter().enumerate() {
            let est = oracle.estimate(&x, sigma, RngStream::new(3, i as u64))?;
            let err = (est.value - 0.5).abs();
            println!(
                "  sigma {sigma:<6} draws {:>8}  |F - f| = {err:.2e}  (eps_f sigma^2 = {:.2e})",
                est.samples_used,
                acc.eps_f * sigma * sigma
            );
        }
    }
    Ok(())
}
