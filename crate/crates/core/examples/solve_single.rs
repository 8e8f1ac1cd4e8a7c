//! Solve the default scenario once and print the resulting metrics.

use drip::array_model::Scene;
use drip::bccd::drip_solve;
use drip::metrics::MetricReport;
use drip::signals::{lfm_chirp, CommBlock};
use drip::ScenarioConfig;

fn main() -> drip::Result<()> {
    let cfg = ScenarioConfig::default();
    let comm = CommBlock::draw(&cfg, cfg.rng_seed)?;
    let x0 = lfm_chirp(&cfg);
    let res = drip_solve(&cfg, &comm, &x0)?;
    let scene = Scene::new(&cfg);
    let m = MetricReport::evaluate(
        res.waveform.matrix_form(),
        x0.vector_form().as_slice(),
        &comm,
        &res.beamformers,
        &scene,
    )?;

    println!("status        {}", res.status.name());
    println!("iterations    {}", res.iterations());
    println!("sum rate      {:.3} bps/Hz", m.sum_rate_bps_hz);
    println!("MUI energy    {:.4}", m.mui_energy);
    println!("PAPR          {:.3} dB (cap {} dB)", m.papr_db, cfg.eta_db);
    println!("similarity    {:.4} (radius {})", m.similarity, cfg.epsilon);
    for (q, s) in m.sinr_per_target_db.iter().enumerate() {
        println!(
            "SINR target {q} {s:.2} dB (floor {} dB)",
            cfg.sinr_floors_db[q]
        );
    }
    Ok(())
}
