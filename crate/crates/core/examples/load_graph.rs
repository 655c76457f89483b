//! Loads an edge list (a path argument, or a built-in sample) and prints its
//! statistics. Missing arc probabilities are drawn from (0, 0.1).

use std::io::{BufRead, BufReader, Cursor};

use adaptim::graph::{graph_stats, load_edge_list, LoadOptions};

const SAMPLE: &str = "\
# u v [p]
1 2 0.05
2 3
3 1 0.2
3 4
4 5
5 3 0.01
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reader: Box<dyn BufRead> = match std::env::args().nth(1) {
        Some(path) => Box::new(BufReader::new(std::fs::File::open(path)?)),
        None => Box::new(Cursor::new(SAMPLE)),
    };
    let mut rng = adaptim::rng::stream(&[0]);
    let g = load_edge_list(reader, &LoadOptions::default(), &mut rng)?;
    for e in g.arcs() {
        let edge = g.edge(e);
        println!("{} -> {}  p = {:.4}", g.label(edge.origin), g.label(edge.target), g.probability(e));
    }
    println!("{}", serde_json::to_string_pretty(&graph_stats(&g))?);
    Ok(())
}
