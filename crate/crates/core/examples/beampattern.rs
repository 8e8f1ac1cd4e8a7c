//! Receive beampattern of a designed waveform next to that of the chirp.

use drip::array_model::Scene;
use drip::bccd::drip_solve;
use drip::metrics::{beampattern, uniform_grid};
use drip::signals::{lfm_chirp, CommBlock};
use drip::ScenarioConfig;

fn main() -> drip::Result<()> {
    let cfg = ScenarioConfig {
        target_angles: vec![-40.0, 20.0],
        sinr_floors_db: vec![33.0, 33.0],
        epsilon: 2.0,
        ..ScenarioConfig::default()
    };
    let scene = Scene::new(&cfg);
    let comm = CommBlock::draw(&cfg, 7)?;
    let x0 = lfm_chirp(&cfg);
    let res = drip_solve(&cfg, &comm, &x0)?;
    let grid = uniform_grid(-90.0, 90.0, 37);
    let designed = beampattern(res.waveform.vector_form().as_slice(), &scene, &grid)?;
    let chirp = beampattern(x0.vector_form().as_slice(), &scene, &grid)?;
    println!("angle  designed_db  chirp_db");
    for ((a, d), (_, c)) in designed.iter().zip(&chirp) {
        println!("{a:5.0}  {d:11.2}  {c:8.2}");
    }
    Ok(())
}
