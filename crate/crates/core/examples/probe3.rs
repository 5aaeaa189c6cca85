//! Scratch probe: reflecting walls and near-equilibrium diagnostics.

use kinlim_core::kinetic::{run_kinetic, KineticRunOptions};
use kinlim_core::macroscale::{run_macro, MacroRunOptions};
use kinlim_core::scenario::{self};
use kinlim_core::space::{Boundary, SpaceGrid};

fn main() {
    let scen = scenario::heat(&scenario::HeatParams::default()).unwrap();

    // Reflecting kinetic vs no-flux macro.
    for eps in [0.1, 0.05, 0.025] {
        let space = SpaceGrid::line(128, 1.0 / 128.0, Boundary::Reflecting).unwrap();
        let u0 = scen.initial_fields(&space);
        let model = scen.derived_model().unwrap();
        let mac = run_macro(&u0, &model, &space, &[0.1], &MacroRunOptions::default())
            .unwrap()
            .pop()
            .unwrap();
        let kin = run_kinetic(
            &scen.kinetic_model(eps),
            &space,
            &u0,
            &[0.1],
            &KineticRunOptions::default(),
        )
        .unwrap();
        let l1: f64 = kin.snapshots[0].u[0]
            .iter()
            .zip(&mac.u[0])
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 128.0;
        println!("reflecting eps={eps}: L1 gap = {l1:.4e}");
    }

    // Distance to own local equilibrium for the periodic heat run.
    let space = SpaceGrid::line(128, 1.0 / 128.0, Boundary::Periodic).unwrap();
    let u0 = scen.initial_fields(&space);
    for eps in [0.1, 0.05, 0.025] {
        let km = scen.kinetic_model(eps);
        let run = run_kinetic(&km, &space, &u0, &[0.1], &KineticRunOptions::default()).unwrap();
        let d = run.final_state.equilibrium_distance(&km, &space)[0];
        println!("equilibrium distance eps={eps}: {d:.4e}  (d/eps = {:.4e})", d / eps);
    }
}
