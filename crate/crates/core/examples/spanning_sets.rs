//! Builds each kind of positive spanning set and compares its declared
//! cosine-measure bound with a Monte Carlo estimate. A probabilistic pair does
//! not span; its bound is the median alignment of a fresh draw, so the
//! deterministic column says nothing about it.
//!
//! cargo run --example spanning_sets -- 4

use dsmm::rng::RngStream;
use dsmm::spanning::{self, cosine_measure_mc, SpanningKind};

fn main() -> dsmm::error::Result<()> {
    let dim: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let kinds = [
        SpanningKind::OrthonormalPm,
        SpanningKind::MinimalUniform,
        SpanningKind::Rotated,
        SpanningKind::ProbabilisticPair,
    ];
    println!("{:<20} {:>4} {:>10} {:>10}", "kind", "|D|", "kappa", "mc");
    for kind in kinds {
        let set = spanning::make(kind, dim, RngStream::new(1, 0))?;
        let mc = match kind {
            SpanningKind::ProbabilisticPair => "-".to_string(),
            _ => format!("{:.4}", cosine_measure_mc(&set, 20_000, RngStream::new(1, 1))?),
        };
        println!(
            "{:<20} {:>4} {:>10.4} {:>10}",
            kind.as_str(),
            set.len(),
            set.kappa_lower(),
            mc
        );
    }
    println!();
    print!(
        "{}",
        spanning::make(SpanningKind::MinimalUniform, dim, RngStream::new(0, 0))?.to_matrix_string()
    );
    Ok(())
}
