//! Sum rate against the similarity radius, run through the campaign engine.

use std::path::Path;

use drip::experiments::{execute, Campaign};

fn main() -> drip::Result<()> {
    let text = "\
campaign = rate_vs_epsilon
trials = 10
set.n_tx = 4
set.n_users = 2
set.constellation = qpsk
sweep = epsilon: 0, 0.05, 0.2, 0.6, 1.0, 1.4, 2.0
";
    let c = Campaign::parse(text, Path::new("."))?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let res = execute(&c, threads)?;
    println!("epsilon  rate    chirp   similarity");
    for p in &res.points {
        println!(
            "{:7.2}  {:6.3}  {:6.3}  {:.4}",
            p.cfg.epsilon,
            p.mean(|r| r.report.sum_rate_bps_hz),
            p.mean(|r| r.chirp_sum_rate),
            p.mean(|r| r.report.similarity)
        );
    }
    Ok(())
}
