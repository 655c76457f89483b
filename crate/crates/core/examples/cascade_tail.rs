//! Measures how fast single-round cascade sizes decay on a chain with fair
//! coin arcs and on a random graph with mean out-weight 0.8.

use adaptim::verify::cascade_tail;
use adaptim::verify::tail::{chain, subcritical_random};
use adaptim::NodeId;

fn main() -> adaptim::Result<()> {
    let line = chain(30, 0.5)?;
    let est = cascade_tail(&line, 50_000, Some(&[NodeId::from(0)]), 1)?;
    println!("chain from its head, P(size > L) against 2^-L:");
    for (l, p) in est.survival.iter().enumerate().take(8) {
        println!("  L={:2}  {p:.4}  {:.4}", l + 1, 0.5f64.powi(l as i32 + 1));
    }
    println!("  log-slope {:.3}", est.slope.unwrap_or(f64::NAN));

    let g = subcritical_random(200, 800, 0.8, 2)?;
    let est = cascade_tail(&g, 50_000, None, 3)?;
    println!("random graph: largest cascade {}, log-slope {:.3}", est.survival.len(), est.slope.unwrap_or(f64::NAN));
    Ok(())
}
