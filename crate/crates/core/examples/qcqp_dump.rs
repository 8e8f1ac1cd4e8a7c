//! Assemble the waveform QCQP at the chirp and dump it as CSV.

use drip::array_model::Scene;
use drip::beamformer::BeamformerBank;
use drip::qcqp::{assemble, phi_vec};
use drip::scenario::load_scenario;
use drip::signals::{lfm_chirp, CommBlock};

fn main() -> drip::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "scenarios/small_qpsk.cfg".into());
    let cfg = load_scenario(&path)?;
    let scene = Scene::new(&cfg);
    let comm = CommBlock::draw(&cfg, cfg.rng_seed)?;
    let x0 = lfm_chirp(&cfg);
    let bank = BeamformerBank::compute(x0.vector_form().as_slice(), &scene)?;
    let prob = assemble(
        comm.zf_reference.vector_form().as_slice(),
        x0.vector_form().as_slice(),
        &bank,
        &scene,
    )?;
    eprintln!("{} real unknowns, {} constraints", prob.n_real(), prob.m());
    eprintln!(
        "max violation at the chirp: {:e}",
        prob.max_violation(phi_vec(x0.vector_form().as_slice()).as_slice())
    );
    prob.write_dump(std::io::stdout().lock())?;
    Ok(())
}
