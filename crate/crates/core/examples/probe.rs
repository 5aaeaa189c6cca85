//! Scratch probe for sweep behaviour (not part of the library).

use kinlim_core::harness::{epsilon_sweep, estimate_order, SweepConfig};
use kinlim_core::kinetic::{run_kinetic, KineticRunOptions};
use kinlim_core::macroscale::{run_macro, MacroRunOptions};
use kinlim_core::scenario;
use kinlim_core::space::{Boundary, SpaceGrid};

fn main() {
    let space = SpaceGrid::line(128, 1.0 / 128.0, Boundary::Periodic).unwrap();
    let eps_list = [0.2, 0.1, 0.05, 0.025];

    for (name, scen) in [
        (
            "heat",
            scenario::heat(&scenario::HeatParams::default()).unwrap(),
        ),
        (
            "ks-virus",
            scenario::ks_virus(&scenario::VirusParams::default()).unwrap(),
        ),
    ] {
        let t0 = std::time::Instant::now();
        let config = SweepConfig::new(space.clone(), 0.1);
        let report = epsilon_sweep(&scen, &eps_list, &config).unwrap();
        println!("== {name} ({:?})", t0.elapsed());
        print!("{}", report.summary());

        // Phase-space distance to M * u_macro at the final time.
        let u0 = scen.initial_fields(&space);
        let model = scen.derived_model().unwrap();
        let reference = run_macro(&u0, &model, &space, &[0.1], &MacroRunOptions::default())
            .unwrap()
            .pop()
            .unwrap();
        let mut dists = Vec::new();
        for eps in eps_list {
            let km = scen.kinetic_model(eps);
            let run =
                run_kinetic(&km, &space, &u0, &[0.1], &KineticRunOptions::default()).unwrap();
            let mut total = 0.0;
            for s in 0..scen.species() {
                let m = &km.equilibria[s];
                for k in 0..km.grid.len() {
                    let w = km.grid.weight(k);
                    for c in 0..space.cells() {
                        let f = run.final_state.values(s)[k * space.cells() + c];
                        total += w * (f - m.value(k) * reference.u[s][c]).abs();
                    }
                }
            }
            total *= space.cell_volume();
            dists.push(total);
        }
        let (order, c) = estimate_order(&eps_list, &dists).unwrap();
        println!(
            "phase-space distance to M*u_macro: {:?}\n  fitted order {order:.4}, intercept {c:.4e}",
            dists
        );
    }
}
