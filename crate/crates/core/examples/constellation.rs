//! Write the received constellation `H X` of one solve to a CSV file.

use drip::bccd::drip_solve;
use drip::experiments::emit_constellation;
use drip::signals::{lfm_chirp, CommBlock};
use drip::{Constellation, ScenarioConfig};

fn main() -> drip::Result<()> {
    let cfg = ScenarioConfig {
        n_tx: 4,
        n_users: 2,
        constellation: Constellation::Qpsk,
        epsilon: 2.0,
        ..ScenarioConfig::default()
    };
    let comm = CommBlock::draw(&cfg, 3)?;
    let res = drip_solve(&cfg, &comm, &lfm_chirp(&cfg))?;
    let out = std::env::temp_dir().join("drip_constellation.csv");
    emit_constellation(&res, &comm.channel, &out)?;
    println!("{}", std::fs::read_to_string(&out)?);
    println!("intended symbols scaled by {:.4}", comm.symbol_scale);
    Ok(())
}
