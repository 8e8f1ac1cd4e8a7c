//! Compare the solver against the brute-force oracle on a tiny instance.

use drip::array_model::Scene;
use drip::bccd::drip_solve;
use drip::oracles::projected_gradient_restarts;
use drip::qcqp::{assemble, phi_vec};
use drip::scenario::load_scenario;
use drip::signals::{lfm_chirp, trial_rng, CommBlock};

fn main() -> drip::Result<()> {
    let cfg = load_scenario("scenarios/tiny_nt2.cfg")?;
    let scene = Scene::new(&cfg);
    let x0 = lfm_chirp(&cfg);
    for seed in 0..5 {
        let comm = CommBlock::draw(&cfg, 100 + seed)?;
        let res = drip_solve(&cfg, &comm, &x0)?;
        let prob = assemble(
            comm.zf_reference.vector_form().as_slice(),
            x0.vector_form().as_slice(),
            &res.beamformers,
            &scene,
        )?;
        let ours = prob.objective(phi_vec(res.waveform.vector_form().as_slice()).as_slice())
            + prob.objective_offset;
        let oracle = projected_gradient_restarts(&prob, 100, 300, &mut trial_rng(seed));
        println!(
            "seed {seed}: solver {ours:.8}  oracle {:.8}  feasible {}",
            oracle.objective, oracle.feasible
        );
    }
    Ok(())
}
