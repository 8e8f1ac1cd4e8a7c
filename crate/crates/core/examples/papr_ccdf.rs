//! Empirical PAPR CCDF for a few PAPR caps.

use drip::bccd::drip_solve;
use drip::metrics::{papr_ccdf, papr_db};
use drip::signals::{lfm_chirp, CommBlock};
use drip::ScenarioConfig;

fn main() -> drip::Result<()> {
    let thresholds = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0];
    print!("eta_db ");
    for t in thresholds {
        print!(" >{t:<4}");
    }
    println!();
    for eta_db in [1.0, 2.0, 3.0, 6.0] {
        let cfg = ScenarioConfig {
            eta_db,
            ..ScenarioConfig::default()
        };
        let x0 = lfm_chirp(&cfg);
        let mut samples = Vec::new();
        for t in 0..20 {
            let comm = CommBlock::draw(&cfg, 1 + t)?;
            let res = drip_solve(&cfg, &comm, &x0)?;
            samples.push(papr_db(res.waveform.vector_form().as_slice())?);
        }
        print!("{eta_db:6.1} ");
        for (_, p) in papr_ccdf(&samples, &thresholds) {
            print!(" {p:5.2}");
        }
        println!();
    }
    Ok(())
}
