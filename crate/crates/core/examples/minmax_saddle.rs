//! Min-max direct search on f(x, y) = x²/2 + xy − y²/2 with the inner
//! tolerance derived from the game constants.

use dsmm::minmax::{derive_inner_tolerance, fne_residual, solve, GameConstants, MinMaxConfig, PlayerNoise};
use dsmm::point::Point;
use dsmm::problems::quadratic_saddle;
use dsmm::rng::RngStream;

fn main() -> dsmm::error::Result<()> {
    let game = quadratic_saddle();
    let cfg = MinMaxConfig {
        eps_target: 5e-3,
        ..MinMaxConfig::default()
    };
    let noise = PlayerNoise::noiseless();
    let gc = GameConstants::for_game(&game, &cfg, &noise)?;
    println!("L_xy {} D1 {} D2 {} D3 {}", gc.l_xy, gc.d1, gc.d2, gc.d3);
    println!(
        "K {} eps_max {:.3e}",
        gc.resolve_k(&cfg)?,
        derive_inner_tolerance(&gc, &cfg, 0)?
    );

    let res = solve(
        &game,
        Point::from([1.0]),
        Point::from([1.0]),
        Some(&gc),
        &cfg,
        &noise,
        RngStream::new(6, 0),
    )?;
    for o in &res.outer {
        println!(
            "t {:>2} x {:+.5} y {:+.5} sigma_x {:.3e} {:?} inner {}",
            o.t, o.x[0], o.y[0], o.sigma_x, o.min_status, o.inner_iterations
        );
    }
    let (rx, ry) = fne_residual(&game, &res.x, &res.y);
    println!(
        "converged {} residual ({rx:.2e}, {ry:.2e}), {} evaluations",
        res.converged, res.oracle_calls
    );
    Ok(())
}
