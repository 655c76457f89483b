//! Estimates marginal gains with reverse-reachable sets and lets the
//! approximate greedy oracle pick seeds round by round.

use adaptim::rr::{estimate_marginals, greedy_select, GreedyParams};
use adaptim::{graph, ObservedHistory, StreamingDraws};

fn main() -> adaptim::Result<()> {
    let mut rng = adaptim::rng::stream(&[7]);
    let g = graph::random_digraph(200, 1000, &mut rng)?;
    let probs: Vec<f64> = (0..g.arc_count()).map(|i| 0.02 + 0.08 * ((i * 37 % 100) as f64 / 100.0)).collect();
    let g = g.with_probabilities(probs)?;

    let params = GreedyParams { m_cap: Some(20_000), ..GreedyParams::default() };
    println!("sample count per decision: {}", params.sample_count(g.node_count(), g.max_reward()));

    let history = ObservedHistory::new(&g, usize::MAX);
    let gains = estimate_marginals(history.view(), g.probabilities(), g.rewards(), history.activated_mask(), 20_000, &mut rng)?;
    let mut top: Vec<_> = gains.iter().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(a.1));
    println!("largest estimated first-round gains:");
    for (v, gain) in top.iter().take(5) {
        println!("  node {v}: {gain:.3}");
    }

    let draws = StreamingDraws::new(99, g.probabilities());
    let mut history = ObservedHistory::new(&g, usize::MAX);
    for _ in 0..10 {
        let Some(v) = greedy_select(&history, g.probabilities(), &params, &mut rng)? else { break };
        let fb = history.run_round(v, &draws)?;
        println!("round {:2}: seed {v:3} activated {:2} new", fb.round, fb.newly_activated.len());
    }
    println!("total reward {}", history.reward());
    Ok(())
}
