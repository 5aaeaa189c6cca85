//! Scratch probe for ODE-reduction accuracy and preset equivalence.

use kinlim_core::macroscale::{run_macro, MacroRunOptions};
use kinlim_core::scenario::{self, Scenario};
use kinlim_core::space::{Boundary, SpaceGrid};

fn rk4(rhs: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t1: f64, n: usize) -> Vec<f64> {
    let h = t1 / n as f64;
    let mut y = y0.to_vec();
    for _ in 0..n {
        let k1 = rhs(&y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = rhs(&y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = rhs(&y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = rhs(&y4);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

fn ode_error(scen: &Scenario, u0: &[f64], rhs: impl Fn(&[f64]) -> Vec<f64>, dt_max: f64) -> f64 {
    let grid = SpaceGrid::line(4, 0.25, Boundary::Periodic).unwrap();
    let model = scen.derived_model().unwrap();
    let fields: Vec<Vec<f64>> = u0.iter().map(|v| vec![*v; 4]).collect();
    let times: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let opts = MacroRunOptions {
        cfl: 0.9,
        dt_max: Some(dt_max),
    };
    let t0 = std::time::Instant::now();
    let snaps = run_macro(&fields, &model, &grid, &times, &opts).unwrap();
    let mut worst = 0.0f64;
    for (snap, t) in snaps.iter().zip(&times) {
        let oracle = rk4(&rhs, u0, *t, (t / 1e-4).ceil() as usize);
        for s in 0..u0.len() {
            worst = worst.max((snap.u[s][0] - oracle[s]).abs());
        }
    }
    println!("  {} dt_max={dt_max:.0e}: L_inf = {worst:.3e} ({:?})", scen.name, t0.elapsed());
    worst
}

fn main() {
    // KS-virus reaction ODE.
    let vp = scenario::VirusParams::default();
    let virus = scenario::ks_virus(&vp).unwrap();
    let rhs_virus = move |u: &[f64]| {
        vec![
            -vp.decay[0] * u[0] - vp.beta * u[0] * u[2] + vp.r,
            vp.beta * u[0] * u[2] - vp.decay[1] * u[1],
            vp.k * u[1] - vp.decay[2] * u[2],
        ]
    };

    let op = scenario::OncolyticParams::default();
    let onc = scenario::oncolytic(&op).unwrap();
    let rhs_onc = move |u: &[f64]| {
        let sat = op.rho * u[0] * u[3] / (op.k_u1 + op.theta_sat * u[0]);
        vec![
            op.mu1 * u[0] * (1.0 - u[0].powf(op.r_exp)) - sat,
            sat - op.delta2 * u[1],
            -u[2] * (op.alpha1 * u[0] + op.alpha2 * u[1]) + op.mu3 * u[2] * (1.0 - u[2]),
            op.beta * u[1] - op.delta4 * u[3] - sat,
        ]
    };

    let ip = scenario::InvasionParams::default();
    let inv = scenario::invasion(&ip).unwrap();
    let rhs_inv = move |u: &[f64]| {
        vec![
            ip.mu * u[0] * (ip.r - u[0] - u[2]),
            -(u[1] - u[0]) / ip.sigma,
            -u[1] * u[2] + ip.eta * u[2] * (1.0 - u[0] - u[2]),
        ]
    };

    let fp = scenario::ForagerParams::default();
    let for_ = scenario::forager(&fp).unwrap();
    let rhs_for = move |u: &[f64]| {
        vec![
            0.0,
            0.0,
            -fp.lambda * (u[0] + u[1]) * u[2] - fp.mu * u[2] + fp.r0 * u[2] * (1.0 - u[2]),
        ]
    };

    for dt_max in [1e-5, 2e-6, 1e-6] {
        ode_error(&virus, &[0.8, 0.1, 0.1], &rhs_virus, dt_max);
        ode_error(&onc, &[0.6, 0.1, 0.5, 0.2], &rhs_onc, dt_max);
        ode_error(&inv, &[0.5, 0.3, 0.6], &rhs_inv, dt_max);
        ode_error(&for_, &[0.5, 0.4, 0.8], &rhs_for, dt_max);
        println!();
    }

    // Preset equivalence: derived vs hand trajectories.
    let space = SpaceGrid::line(64, 1.0 / 64.0, Boundary::Periodic).unwrap();
    for scen in [
        scenario::oncolytic(&scenario::OncolyticParams::default()).unwrap(),
        scenario::invasion(&scenario::InvasionParams::default()).unwrap(),
        scenario::forager(&scenario::ForagerParams::default()).unwrap(),
        scenario::flux_limited(&scenario::FluxLimitedParams::default()).unwrap(),
    ] {
        let u0 = scen.initial_fields(&space);
        let derived = scen.derived_model().unwrap();
        let times = [0.25, 0.5, 1.0];
        let opts = MacroRunOptions::default();
        let a = run_macro(&u0, &derived, &space, &times, &opts).unwrap();
        let b = run_macro(&u0, &scen.hand_model, &space, &times, &opts).unwrap();
        let mut worst = 0.0f64;
        for (sa, sb) in a.iter().zip(&b) {
            for (fa, fb) in sa.u.iter().zip(&sb.u) {
                for (x, y) in fa.iter().zip(fb) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        println!("preset equivalence {}: max |derived - hand| = {worst:.3e}", scen.name);
    }
}
