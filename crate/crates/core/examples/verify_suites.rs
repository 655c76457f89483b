//! Runs every verification suite at reduced size and prints the reports.

use adaptim::verify::{run_suite, Suite};

fn main() -> adaptim::Result<()> {
    for suite in Suite::ALL {
        let mut opts = suite.defaults();
        opts.trials = match suite {
            Suite::Tail => 20_000,
            Suite::Order => 2_000,
            _ => opts.trials.min(100),
        };
        let report = run_suite(suite, &opts)?;
        println!("{:9} {} over {} instances", suite.as_str(), if report.passed { "ok" } else { "VIOLATED" }, report.instances);
        if let Some(summary) = report.summary.as_object() {
            for (k, v) in summary.iter().filter(|(k, _)| *k != "examples") {
                println!("          {k}: {v}");
            }
        }
    }
    Ok(())
}
