//! On four nodes, seeding node 1 then node 2 is worth less in expectation
//! than seeding them the other way round. The exact values come from full
//! enumeration of the arc outcomes.

use adaptim::verify::{order_gap, sequence_value, TinyInstance};
use adaptim::{DiGraph, NodeId, ObservedHistory};

fn main() -> adaptim::Result<()> {
    let graph = DiGraph::from_edges(4, &[(0, 1, 0.5), (2, 0, 0.89), (1, 0, 0.5), (1, 3, 0.5)])?;
    let root = ObservedHistory::new(&graph, 2);
    let (a, b) = (NodeId::from(1), NodeId::from(2));
    let ab = sequence_value(&root, &[a, b], graph.probabilities())?;
    let ba = sequence_value(&root, &[b, a], graph.probabilities())?;
    println!("E[reward | seed 1 then 2] = {ab:.6}");
    println!("E[reward | seed 2 then 1] = {ba:.6}");

    // With every arc certain the order stops mattering.
    let sure = TinyInstance { graph: graph.clone().with_probabilities(vec![1.0; 4])?, horizon: 2 };
    println!("same pair with certain arcs: gap {:.6}", order_gap(&sure, a, b)?);
    Ok(())
}
