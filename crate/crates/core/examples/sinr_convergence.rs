//! Radar SINR and MUI per outer iteration, averaged over a few channel draws.

use drip::bccd::drip_solve;
use drip::signals::{lfm_chirp, CommBlock};
use drip::ScenarioConfig;

fn main() -> drip::Result<()> {
    let cfg = ScenarioConfig::default();
    let x0 = lfm_chirp(&cfg);
    let trials = 10;
    let k = cfg.outer_iters;
    let mut sinr = vec![[0.0; 2]; k];
    let mut mui = vec![0.0; k];
    for t in 0..trials {
        let comm = CommBlock::draw(&cfg, 100 + t)?;
        let res = drip_solve(&cfg, &comm, &x0)?;
        for i in 0..k {
            // hold the last value when the solve stopped early
            let j = i.min(res.iterations() - 1);
            for q in 0..2 {
                sinr[i][q] += res.sinr_trace[j][q] / trials as f64;
            }
            mui[i] += res.mui_trace[j] / trials as f64;
        }
    }
    println!("iter  sinr0_db  sinr1_db  mui");
    for i in 0..k {
        println!(
            "{:4}  {:8.3}  {:8.3}  {:.4}",
            i + 1,
            sinr[i][0],
            sinr[i][1],
            mui[i]
        );
    }
    Ok(())
}
