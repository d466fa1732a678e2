//! Robust logistic regression: direct-search min-max against a GDA grid at
//! the same number of calls.

use dsmm::gda::{gda_grid, GdaConfig, ETA_GRID};
use dsmm::minmax::{solve, GameConstants, InnerToleranceMode, MinMaxConfig, PlayerNoise};
use dsmm::point::Point;
use dsmm::problems::{envelope, LabeledDataset, RobustRegression};
use dsmm::rng::RngStream;

fn main() -> dsmm::error::Result<()> {
    let data = LabeledDataset::synthetic(2, 50, 5)?;
    let game = RobustRegression::new(&data, 1.0)?;
    let cfg = MinMaxConfig {
        c_x: 10.0,
        inner_tolerance_mode: InnerToleranceMode::Fixed,
        eps_max_fixed: Some(1e-2),
        t_outer_max: 20_000,
        ..MinMaxConfig::default()
    };
    let noise = PlayerNoise::noiseless();
    let gc = GameConstants::for_game(&game, &cfg, &noise)?;
    let theta0 = Point::zeros(6);
    let p0 = Point::from(vec![1.0 / 50.0; 50]);
    let res = solve(
        &game,
        theta0.clone(),
        p0.clone(),
        Some(&gc),
        &cfg,
        &noise,
        RngStream::new(7, 0),
    )?;
    let ds = envelope(&game, &res.x).unwrap();
    println!(
        "direct search: max_p f = {ds:.6} after {} outer steps, {} calls",
        res.outer.len(),
        res.oracle_calls
    );

    let base = GdaConfig {
        max_epochs: u64::MAX,
        max_gradient_calls: Some(res.oracle_calls),
        ..GdaConfig::default()
    };
    for run in gda_grid(&game, &theta0, &p0, &base, &ETA_GRID, |r| {
        envelope(&game, &r.x).unwrap()
    }) {
        println!("gda eta {:<7} max_p f = {:.6}", run.eta, run.score);
    }
    Ok(())
}
