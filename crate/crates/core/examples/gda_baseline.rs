//! Alternating and simultaneous GDA on three quadratic games.

use dsmm::gda::{gda_solve, GdaConfig, GdaMode};
use dsmm::point::Point;
use dsmm::problems::{bilinear, decoupled, quadratic_saddle, QuadraticGame};

fn main() {
    let games: [(&str, QuadraticGame); 3] = [
        ("saddle", quadratic_saddle()),
        ("bilinear", bilinear()),
        ("decoupled", decoupled()),
    ];
    for (name, game) in games {
        for mode in [GdaMode::Alternating, GdaMode::Simultaneous] {
            let cfg = GdaConfig {
                eta_x: 0.1,
                eta_y: 0.1,
                mode,
                max_epochs: 200,
                ..GdaConfig::default()
            };
            match gda_solve(&game, Point::from([1.0]), Point::from([1.0]), &cfg) {
                Ok(r) => {
                    let (gx, gy) = r.residuals[r.residuals.len() - 1];
                    println!("{name:<10} {mode:?}: residual ({gx:.2e}, {gy:.2e})");
                }
                Err(e) => println!("{name:<10} {mode:?}: {e}"),
            }
        }
    }
}
