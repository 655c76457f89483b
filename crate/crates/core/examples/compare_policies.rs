//! Pits all five seeding policies against each other on a random graph and
//! prints the mean cumulative reward curve, every tenth round.

use adaptim::graph::random_digraph;
use adaptim::harness::{aggregate, run_on, ExperimentConfig, Instance};
use adaptim::PolicyId;

fn main() -> adaptim::Result<()> {
    let mut rng = adaptim::rng::stream(&[5]);
    let g = random_digraph(100, 500, &mut rng)?;
    let probs = (0..g.arc_count()).map(|_| rand::Rng::random_range(&mut rng, 0.0..0.1)).collect();
    let g = g.with_probabilities(probs)?;
    let instance = Instance::misspecified(g, 5, 5)?;

    let mut config = ExperimentConfig { rounds: Some(40), reps: 5, master_seed: 5, ..ExperimentConfig::default() };
    config.greedy.m_cap = Some(3_000);
    let table = run_on(&instance, &config)?;

    let rows = aggregate(&table);
    print!("{:>6}", "round");
    for p in PolicyId::ALL {
        print!("{:>10}", p.as_str());
    }
    println!();
    for round in (10..=40).step_by(10) {
        print!("{round:>6}");
        for p in PolicyId::ALL {
            let row = rows.iter().find(|r| r.policy == p && r.round == round).expect("complete table");
            print!("{:>10.1}", row.mean);
        }
        println!();
    }
    Ok(())
}
