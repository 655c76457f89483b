//! Plays three seeding rounds by hand on a small graph and prints what each
//! round reveals: the arcs tried, who got activated, and which nodes became
//! intermediaries (and so lost their incoming arcs).

use adaptim::{GraphBuilder, ObservedHistory, RealizationMatrix};

fn main() -> adaptim::Result<()> {
    let mut b = GraphBuilder::new();
    b.add_arc("alice", "bob", 0.9)?;
    b.add_arc("bob", "carol", 0.6)?;
    b.add_arc("carol", "alice", 0.5)?;
    b.add_arc("bob", "dave", 0.3)?;
    b.add_arc("dave", "erin", 0.8)?;
    b.add_arc("erin", "bob", 0.4)?;
    let graph = b.build();

    let rounds = 3;
    let mut rng = adaptim::rng::stream(&[42]);
    let draws = RealizationMatrix::sample(&graph, rounds, &mut rng);
    let mut history = ObservedHistory::new(&graph, rounds);

    for seed in ["alice", "dave", "carol"] {
        let v = graph.node_by_label(seed).expect("known label");
        let fb = history.run_round(v, &draws)?.clone();
        println!("round {} seed {}", fb.round, seed);
        for (arc, live) in &fb.observed {
            let e = graph.edge(*arc);
            println!("  {} -> {}: {}", graph.label(e.origin), graph.label(e.target), if *live { "live" } else { "blocked" });
        }
        let names = |vs: &[adaptim::NodeId]| vs.iter().map(|&v| graph.label(v)).collect::<Vec<_>>().join(", ");
        println!("  activated this round: [{}]", names(&fb.round_activated));
        println!("  new intermediaries:   [{}]", names(&fb.new_intermediaries));
        println!("  live arcs left: {}, reward so far: {}", history.view().live_count(), history.reward());
    }
    Ok(())
}
