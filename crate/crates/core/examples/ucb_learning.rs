//! Runs the linear UCB learner on a well-specified instance and tracks how
//! close its parameter estimate gets to the hidden one.

use adaptim::graph::{random_digraph, synth_node_features};
use adaptim::policies::Policy;
use adaptim::rr::GreedyParams;
use adaptim::{recommended_c, ObservedHistory, StreamingDraws, UcbAimi};

fn main() -> adaptim::Result<()> {
    let mut rng = adaptim::rng::stream(&[11]);
    let g = random_digraph(150, 900, &mut rng)?;
    let synth = synth_node_features(&g, 4, (0.01, 0.1), &mut rng)?;
    let g = g.with_probabilities(synth.probabilities.clone())?;
    let rounds = 60;
    println!("theory-driven exploration weight: {:.2}", recommended_c(4, rounds, g.arc_count(), 0.1, synth.theta_norm()));

    let params = GreedyParams { m_cap: Some(5_000), ..GreedyParams::default() };
    let mut learner = UcbAimi::new(synth.edge_features.clone(), 1.0, params)?;
    let draws = StreamingDraws::new(3, g.probabilities());
    let mut history = ObservedHistory::new(&g, usize::MAX);
    for t in 1..=rounds {
        let Some(v) = learner.next_seed(&history, t, &mut rng)? else { break };
        let fb = history.run_round(v, &draws)?.clone();
        learner.observe(&fb);
        if t % 10 == 0 {
            let est = learner.state().theta_hat();
            let err: f64 = est.iter().zip(&synth.theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            println!("round {t:2}: reward {:5.1}, |theta_hat - theta| = {err:.4}", history.reward());
        }
    }
    println!("true theta      {:?}", synth.theta.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
    println!("estimated theta {:?}", learner.state().theta_hat().iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
    Ok(())
}
