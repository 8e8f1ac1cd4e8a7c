//! Where the similarity constraint stops binding as the radius grows.

use std::path::Path;

use drip::experiments::{execute, similarity_breakpoints, Campaign};

fn main() -> drip::Result<()> {
    let text = "\
campaign = similarity_regions
trials = 5
sweep = epsilon: 0.2, 0.6, 1.0, 1.2, 1.3, 1.4, 1.5, 1.6, 2.0
";
    let c = Campaign::parse(text, Path::new("."))?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let res = execute(&c, threads)?;
    for p in &res.points {
        let sim = p.mean(|r| r.report.similarity);
        let region = if p.cfg.epsilon - sim <= 1e-3 {
            'S'
        } else {
            'C'
        };
        println!("eps {:4.2}  similarity {:.4}  {region}", p.cfg.epsilon, sim);
    }
    for b in similarity_breakpoints(&res) {
        match b.epsilon {
            Some(e) => println!("breakpoint eps = {e:.3} (eps^2 = {:.3})", e * e),
            None => println!("no breakpoint inside the sweep"),
        }
    }
    Ok(())
}
