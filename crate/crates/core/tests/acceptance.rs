//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them). Every tolerance is pinned here, in
//! code; the oracles (RK4 reaction integration, closed-form algebra) live in
//! `common` and stay independent of the solver paths they judge.

mod common;

use common::{forager_rhs, invasion_rhs, oncolytic_rhs, rk4, virus_rhs, SplitMix64};
use kinlim_core::harness::{epsilon_sweep, SweepConfig};
use kinlim_core::hilbert::{diffusion_tensor, taxis_coefficient, DerivedModel, SourceSpec};
use kinlim_core::kinetic::{KineticSolver, KineticState};
use kinlim_core::macroscale::{run_macro, step_macro, stable_dt, MacroRunOptions, MacroState};
use kinlim_core::scenario::{self, Scenario};
use kinlim_core::space::{Boundary, SpaceGrid};
use kinlim_core::turning::{
    self, solve_theta, validate_assumptions, ScalingExponents, TaxisTarget, TurningKernel,
};
use kinlim_core::velocity::{build_velocity_grid, Equilibrium};

use std::time::Instant;

fn report(number: u32, name: &str, passed: bool, detail: &str) {
    println!(
        "[{}] criterion {number}: {name} — {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {number} ({name}) failed: {detail}");
}

fn max_abs(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst
}

fn identity2(s: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    m[0][0] = s;
    m[1][1] = s;
    m
}

#[test]
fn criterion_1_coefficient_reproduction() {
    let start = Instant::now();
    let grid = build_velocity_grid(2, 1.0, 16).unwrap();
    let m = Equilibrium::uniform(&grid);
    let tol = 1e-10;
    let mut worst = 0.0f64;

    // sigma_1 = R^2/d must give the unit tensor.
    let d1 = diffusion_tensor(&TurningKernel::relaxation(0, 0.5).unwrap(), &grid, &m).unwrap();
    worst = worst.max(max_abs(&d1, &identity2(1.0)));

    // Arbitrary sigma_2 gives (1/sigma) I with sigma = d sigma_2 / R^2.
    for sigma2 in [0.25, 0.5, 1.0, 1.7, 3.2] {
        let d2 =
            diffusion_tensor(&TurningKernel::relaxation(1, sigma2).unwrap(), &grid, &m).unwrap();
        let sigma = 2.0 * sigma2;
        worst = worst.max(max_abs(&d2, &identity2(1.0 / sigma)));
    }

    // 100 random couplings in (0, 5]: the taxis matrix is xi * I.
    let scaling = ScalingExponents::uniform(3, 2, 1).unwrap();
    let mut rng = SplitMix64::new(0x1d6f0e5a2c3b4d01);
    for _ in 0..100 {
        let xi = rng.uniform(1e-6, 5.0);
        let kernel = TurningKernel::relaxation(0, 0.8)
            .unwrap()
            .with_gradient_taxis(vec![TaxisTarget {
                field: 2,
                coupling: xi,
            }]);
        let terms = taxis_coefficient(&kernel, &grid, &m, &scaling).unwrap();
        worst = worst.max(max_abs(&terms[0].matrix, &identity2(xi)));
    }

    let elapsed = start.elapsed();
    report(
        1,
        "coefficient reproduction",
        worst <= tol && elapsed.as_secs_f64() < 1.0,
        &format!("max entrywise error {worst:.3e} (tol {tol:.0e}), runtime {elapsed:?}"),
    );
}

#[test]
fn criterion_2_source_projection_duality() {
    let start = Instant::now();
    let tol = 1e-10;
    let mut worst = 0.0f64;
    let mut rng = SplitMix64::new(0x0badcafe12345678);

    let families: Vec<(&str, Scenario)> = vec![
        (
            "oncolytic",
            scenario::oncolytic(&scenario::OncolyticParams::default()).unwrap(),
        ),
        (
            "invasion",
            scenario::invasion(&scenario::InvasionParams::default()).unwrap(),
        ),
        (
            "forager",
            scenario::forager(&scenario::ForagerParams::default()).unwrap(),
        ),
        (
            "flux-limited",
            scenario::flux_limited(&scenario::FluxLimitedParams::default()).unwrap(),
        ),
    ];

    for (_, scen) in &families {
        let n = scen.species();
        let mut u = vec![0.0; n];
        for _ in 0..1000 {
            for v in u.iter_mut() {
                *v = rng.uniform(0.0, 2.0);
            }
            for i in 0..n {
                let closed = scen.sources.closed_form(i, &u).unwrap();
                let quad = scen
                    .sources
                    .projected(i, &scen.grid, &scen.equilibria, &u)
                    .unwrap();
                worst = worst.max((closed - quad).abs());
            }
        }
    }

    let elapsed = start.elapsed();
    report(
        2,
        "source-projection duality",
        worst <= tol && elapsed.as_secs_f64() < 5.0,
        &format!(
            "4 families x 1000 states in [0,2]^n, max |closed - quadrature| {worst:.3e} (tol {tol:.0e}), runtime {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_3_operator_structure_suite() {
    let start = Instant::now();
    let tol = 1e-10;
    let mut worst = 0.0f64;
    let mut all_passed = true;

    let presets = vec![
        scenario::heat(&scenario::HeatParams::default()).unwrap(),
        scenario::ks_virus(&scenario::VirusParams::default()).unwrap(),
        scenario::oncolytic(&scenario::OncolyticParams::default()).unwrap(),
        scenario::invasion(&scenario::InvasionParams::default()).unwrap(),
        scenario::forager(&scenario::ForagerParams::default()).unwrap(),
        scenario::flux_limited(&scenario::FluxLimitedParams::default()).unwrap(),
    ];
    for scen in &presets {
        let rep = validate_assumptions(&scen.kernels, &scen.grid, &scen.equilibria).unwrap();
        all_passed &= rep.passed();
        for check in &rep.checks {
            if check.threshold > 0.0 {
                worst = worst.max(check.residual);
            }
        }
        // Exact identity theta = -v M / sigma for relaxation kernels.
        for (kernel, m) in scen.kernels.iter().zip(&scen.equilibria) {
            if let turning::LeadingKernel::Relaxation { sigma } = kernel.leading() {
                let theta = solve_theta(kernel, &scen.grid, m).unwrap();
                for (k, t) in theta.iter().enumerate() {
                    let v = scen.grid.node(k);
                    let mk = m.value(k);
                    for axis in 0..2 {
                        worst = worst.max((t[axis] + v[axis] * mk / sigma).abs());
                    }
                }
            }
        }
    }

    let elapsed = start.elapsed();
    report(
        3,
        "operator structure suite",
        all_passed && worst <= tol && elapsed.as_secs_f64() < 1.0,
        &format!("max residual {worst:.3e} (tol {tol:.0e}), runtime {elapsed:?}"),
    );
}

#[test]
fn criterion_4_micro_macro_convergence() {
    let eps_list = [0.2, 0.1, 0.05, 0.025];
    let mut passed = true;
    let mut details = Vec::new();

    for scen in [
        scenario::heat(&scenario::HeatParams::default()).unwrap(),
        scenario::ks_virus(&scenario::VirusParams::default()).unwrap(),
    ] {
        let start = Instant::now();
        let space = SpaceGrid::line(128, 1.0 / 128.0, Boundary::Periodic).unwrap();
        let config = SweepConfig::new(space, 0.1);
        let rep = epsilon_sweep(&scen, &eps_list, &config).unwrap();
        let elapsed = start.elapsed();

        let order_ok = rep.passed();
        let monotone_ok = rep.strictly_decreasing_from(0.1);
        let time_ok = elapsed.as_secs_f64() < 300.0;
        passed &= order_ok && monotone_ok && time_ok;
        details.push(format!(
            "{}: fitted L1 order {:.3} in [0.7, 1.3] {}, strictly decreasing for eps <= 0.1 {}, runtime {elapsed:?}",
            rep.scenario,
            rep.order_l1,
            if order_ok { "yes" } else { "NO" },
            if monotone_ok { "yes" } else { "NO" },
        ));
    }

    report(4, "micro-macro convergence", passed, &details.join("; "));
}

#[test]
fn criterion_5_ode_reduction_oracle() {
    let start = Instant::now();
    let tol = 1e-6;
    let space = SpaceGrid::line(4, 0.25, Boundary::Periodic).unwrap();
    let times: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let opts = MacroRunOptions {
        cfl: 0.9,
        dt_max: Some(2e-6),
    };
    let mut worst = 0.0f64;

    let vp = scenario::VirusParams::default();
    let op = scenario::OncolyticParams::default();
    let ip = scenario::InvasionParams::default();
    let fp = scenario::ForagerParams::default();
    let cases: Vec<(Scenario, Vec<f64>, Box<dyn Fn(&[f64]) -> Vec<f64>>)> = vec![
        (
            scenario::ks_virus(&vp).unwrap(),
            vec![0.8, 0.1, 0.1],
            Box::new(virus_rhs(&vp)),
        ),
        (
            scenario::oncolytic(&op).unwrap(),
            vec![0.6, 0.1, 0.5, 0.2],
            Box::new(oncolytic_rhs(&op)),
        ),
        (
            scenario::invasion(&ip).unwrap(),
            vec![0.5, 0.3, 0.6],
            Box::new(invasion_rhs(&ip)),
        ),
        (
            scenario::forager(&fp).unwrap(),
            vec![0.5, 0.4, 0.8],
            Box::new(forager_rhs(&fp)),
        ),
    ];

    for (scen, u0, rhs) in &cases {
        let model = scen.derived_model().unwrap();
        let fields: Vec<Vec<f64>> = u0.iter().map(|v| vec![*v; space.cells()]).collect();
        let snaps = run_macro(&fields, &model, &space, &times, &opts).unwrap();
        for (snap, t) in snaps.iter().zip(&times) {
            let oracle = rk4(rhs, u0, *t, (t / 1e-4).ceil() as usize);
            for s in 0..u0.len() {
                for c in 0..space.cells() {
                    worst = worst.max((snap.u[s][c] - oracle[s]).abs());
                }
            }
        }
    }

    // Decoupled virus model relaxes to (r/d1, 0, 0) by t = 50/d1.
    let mut vp0 = scenario::VirusParams::default();
    vp0.beta = 0.0;
    let scen = scenario::ks_virus(&vp0).unwrap();
    let model = scen.derived_model().unwrap();
    let fields = vec![
        vec![0.8; space.cells()],
        vec![0.1; space.cells()],
        vec![0.1; space.cells()],
    ];
    let eq_opts = MacroRunOptions {
        cfl: 0.9,
        dt_max: Some(1e-3),
    };
    let t_eq = 50.0 / vp0.decay[0];
    let snap = run_macro(&fields, &model, &space, &[t_eq], &eq_opts)
        .unwrap()
        .pop()
        .unwrap();
    let target = [vp0.r / vp0.decay[0], 0.0, 0.0];
    let mut eq_err = 0.0f64;
    for s in 0..3 {
        for c in 0..space.cells() {
            eq_err = eq_err.max((snap.u[s][c] - target[s]).abs());
        }
    }

    let elapsed = start.elapsed();
    report(
        5,
        "ODE reduction oracle",
        worst <= tol && eq_err <= tol && elapsed.as_secs_f64() < 30.0,
        &format!(
            "max |macro - RK4| {worst:.3e} over t in [0,5] (tol {tol:.0e}), equilibrium error {eq_err:.3e} at t = 50, runtime {elapsed:?}"
        ),
    );
}

fn strip_sources(model: &DerivedModel) -> DerivedModel {
    let n = model.species();
    DerivedModel::new(
        model.dim(),
        (0..n).map(|i| model.terms(i).clone()).collect(),
        SourceSpec::none(n),
    )
    .unwrap()
}

#[test]
fn criterion_6_conservation_and_positivity() {
    let start = Instant::now();
    let steps = 10_000usize;
    let space = SpaceGrid::line(128, 1.0 / 128.0, Boundary::Periodic).unwrap();
    let scen = scenario::ks_virus(&scenario::VirusParams::default()).unwrap();
    let u0 = scen.initial_fields(&space);

    // Kinetic side: psi = 0, taxis and relaxation active.
    let mut km = scen.kinetic_model(0.1);
    km.sources = SourceSpec::none(3);
    let mut solver = KineticSolver::new(km.clone()).unwrap();
    let mut state = KineticState::well_prepared(&km, &space, &u0).unwrap();
    let mass0 = state.masses(&km, &space);
    let dt = km.max_dt(&space);
    let mut min_f = f64::INFINITY;
    for _ in 0..steps {
        solver.step(&mut state, &space, dt).unwrap();
    }
    for s in 0..3 {
        for v in state.values(s) {
            min_f = min_f.min(*v);
        }
    }
    let mass1 = state.masses(&km, &space);
    let kinetic_drift = mass0
        .iter()
        .zip(&mass1)
        .map(|(a, b)| ((a - b) / a).abs())
        .fold(0.0f64, f64::max);

    // Macroscopic side: same spatial terms, no reactions.
    let model = strip_sources(&scen.derived_model().unwrap());
    let mut mstate = MacroState::new(0.0, u0.clone());
    let mdt = stable_dt(&model, &mstate, &space).unwrap() * 0.9;
    let mmass0 = mstate.masses(&space);
    let mut min_u = f64::INFINITY;
    for _ in 0..steps {
        step_macro(&mut mstate, &model, &space, mdt).unwrap();
    }
    for s in 0..3 {
        for v in &mstate.u[s] {
            min_u = min_u.min(*v);
        }
    }
    let mmass1 = mstate.masses(&space);
    let macro_drift = mmass0
        .iter()
        .zip(&mmass1)
        .map(|(a, b)| ((a - b) / a).abs())
        .fold(0.0f64, f64::max);

    let elapsed = start.elapsed();
    let passed = kinetic_drift <= 1e-10
        && macro_drift <= 1e-10
        && min_f >= -1e-13
        && min_u >= -1e-13
        && elapsed.as_secs_f64() < 60.0;
    report(
        6,
        "conservation and positivity",
        passed,
        &format!(
            "over {steps} steps: kinetic mass drift {kinetic_drift:.3e}, macro mass drift {macro_drift:.3e} (tol 1e-10), min f {min_f:.3e}, min u {min_u:.3e} (floor -1e-13), runtime {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_7_preset_equivalence() {
    let start = Instant::now();
    let tol = 1e-12;
    let space = SpaceGrid::line(64, 1.0 / 64.0, Boundary::Periodic).unwrap();
    let times = [0.25, 0.5, 1.0];
    let opts = MacroRunOptions::default();
    let mut worst = 0.0f64;
    let mut names = Vec::new();

    for scen in [
        scenario::oncolytic(&scenario::OncolyticParams::default()).unwrap(),
        scenario::invasion(&scenario::InvasionParams::default()).unwrap(),
        scenario::forager(&scenario::ForagerParams::default()).unwrap(),
        scenario::flux_limited(&scenario::FluxLimitedParams::default()).unwrap(),
    ] {
        let u0 = scen.initial_fields(&space);
        let derived = scen.derived_model().unwrap();
        let a = run_macro(&u0, &derived, &space, &times, &opts).unwrap();
        let b = run_macro(&u0, &scen.hand_model, &space, &times, &opts).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            for (fa, fb) in sa.u.iter().zip(&sb.u) {
                for (x, y) in fa.iter().zip(fb) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        names.push(scen.name.clone());
    }

    let elapsed = start.elapsed();
    report(
        7,
        "preset equivalence",
        worst <= tol && elapsed.as_secs_f64() < 60.0,
        &format!(
            "{}: max trajectory difference {worst:.3e} (tol {tol:.0e}), runtime {elapsed:?}",
            names.join(", ")
        ),
    );
}
