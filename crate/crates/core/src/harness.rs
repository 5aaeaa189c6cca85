//! eps-sweeps: run the kinetic solver over a list of scaling parameters,
//! compare the moment fields against the limit system at the final time, and
//! fit the convergence order by least squares on `(log eps, log error)`.
//!
//! Both solvers share one space grid and final time, so errors are plain
//! cell-wise differences with no interpolation. Independent eps runs may
//! execute concurrently; results are merged in eps order, and repeated
//! sweeps with the same configuration are bit-identical.

use crate::error::Error;
use crate::kinetic::{run_kinetic, KineticRunOptions};
use crate::macroscale::{run_macro, MacroRunOptions, MacroState};
use crate::scenario::Scenario;
use crate::space::SpaceGrid;
use crate::Result;

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Sweep configuration: grid, horizon, solver options, and the acceptance
/// window for the fitted order.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub space: SpaceGrid,
    pub t_final: f64,
    /// Kinetic CFL number.
    pub cfl: f64,
    /// Optional accuracy bound for the macroscopic step.
    pub macro_dt_max: Option<f64>,
    /// `(low, high)` window the fitted order is judged against.
    pub order_window: (f64, f64),
    /// Maximum concurrent eps runs (1 = serial).
    pub parallel: usize,
}

impl SweepConfig {
    pub fn new(space: SpaceGrid, t_final: f64) -> Self {
        SweepConfig {
            space,
            t_final,
            cfl: 0.9,
            macro_dt_max: None,
            order_window: (0.7, 1.3),
            parallel: 4,
        }
    }
}

/// Error trace of one species across the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesErrors {
    pub err_l1: Vec<f64>,
    pub err_linf: Vec<f64>,
    pub order_l1: f64,
    pub intercept_l1: f64,
    pub order_linf: f64,
}

/// Outcome of an eps-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scenario: String,
    /// Strictly decreasing list of scaling parameters.
    pub eps: Vec<f64>,
    pub species: Vec<SpeciesErrors>,
    /// Total L1 error (summed over species) per eps.
    pub total_l1: Vec<f64>,
    /// Fitted order and intercept of the total L1 error.
    pub order_l1: f64,
    pub intercept_l1: f64,
    pub order_window: (f64, f64),
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    /// Does the fitted total order sit inside the window?
    pub fn passed(&self) -> bool {
        self.order_l1 >= self.order_window.0 && self.order_l1 <= self.order_window.1
    }

    /// Are the total errors strictly decreasing for every eps at or below
    /// `threshold`?
    pub fn strictly_decreasing_from(&self, threshold: f64) -> bool {
        let mut prev: Option<f64> = None;
        for (e, err) in self.eps.iter().zip(&self.total_l1) {
            if *e <= threshold * (1.0 + 1e-12) {
                if let Some(p) = prev {
                    if *err >= p {
                        return false;
                    }
                }
                prev = Some(*err);
            }
        }
        true
    }

    /// Plain-text summary with fitted orders.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "eps-sweep: {}", self.scenario);
        let _ = writeln!(
            out,
            "eps = [{}]",
            self.eps
                .iter()
                .map(|e| crate::io::fmt_sci(*e))
                .collect::<Vec<_>>()
                .join(", ")
        );
        for (s, spec) in self.species.iter().enumerate() {
            let _ = writeln!(
                out,
                "species {}: L1 order {:.4} (intercept {:.4e}), Linf order {:.4}",
                s + 1,
                spec.order_l1,
                spec.intercept_l1,
                spec.order_linf
            );
            let _ = writeln!(
                out,
                "  err_l1  = [{}]",
                spec.err_l1
                    .iter()
                    .map(|e| crate::io::fmt_sci(*e))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        let _ = writeln!(
            out,
            "total L1 order = {:.4} (intercept {:.4e}); window [{}, {}]: {}",
            self.order_l1,
            self.intercept_l1,
            self.order_window.0,
            self.order_window.1,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Least-squares fit of `log(error) = intercept' + order * log(eps)`.
/// Returns `(order, exp(intercept'))`, so `error ≈ intercept * eps^order`.
pub fn estimate_order(eps: &[f64], errors: &[f64]) -> Result<(f64, f64)> {
    if eps.len() != errors.len() || eps.len() < 2 {
        return Err(Error::InvalidSweepData(format!(
            "need at least two matching (eps, error) pairs, got {} and {}",
            eps.len(),
            errors.len()
        )));
    }
    for (e, r) in eps.iter().zip(errors) {
        if !(*e > 0.0) || !(*r > 0.0) || !e.is_finite() || !r.is_finite() {
            return Err(Error::InvalidSweepData(
                "eps values and errors must be positive and finite".into(),
            ));
        }
    }
    let n = eps.len() as f64;
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|r| r.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - xbar) * (y - ybar);
        sxx += (x - xbar) * (x - xbar);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidSweepData(
            "eps values must not all coincide".into(),
        ));
    }
    let order = sxy / sxx;
    let intercept = (ybar - order * xbar).exp();
    Ok((order, intercept))
}

/// Run the sweep: one macroscopic reference solve, one kinetic run per eps,
/// error tables, and order fits.
pub fn epsilon_sweep(
    scenario: &Scenario,
    eps_list: &[f64],
    config: &SweepConfig,
) -> Result<ConvergenceReport> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidSweepData(format!(
            "an eps-sweep needs at least 3 values, got {}",
            eps_list.len()
        )));
    }
    for pair in eps_list.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::InvalidSweepData(
                "eps list must be strictly decreasing".into(),
            ));
        }
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidSweepData("eps values must be positive".into()));
    }

    let u0 = scenario.initial_fields(&config.space);
    let model = scenario.derived_model()?;
    let macro_opts = MacroRunOptions {
        cfl: 0.9,
        dt_max: config.macro_dt_max,
    };
    let reference = run_macro(&u0, &model, &config.space, &[config.t_final], &macro_opts)?
        .pop()
        .expect("one snapshot per output time");

    // Kinetic runs, optionally concurrent, merged in eps order.
    let kinetic_opts = KineticRunOptions { cfl: config.cfl };
    let n_eps = eps_list.len();
    let results: Vec<Option<Result<MacroState>>> = {
        let slots: Vec<Mutex<Option<Result<MacroState>>>> =
            (0..n_eps).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = config.parallel.clamp(1, n_eps);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= n_eps {
                        break;
                    }
                    let eps = eps_list[idx];
                    let outcome = run_kinetic(
                        &scenario.kinetic_model(eps),
                        &config.space,
                        &u0,
                        &[config.t_final],
                        &kinetic_opts,
                    )
                    .map(|mut run| run.snapshots.pop().expect("one snapshot"));
                    *slots[idx].lock().unwrap() = Some(outcome);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap())
            .collect()
    };

    let n_species = scenario.species();
    let volume = config.space.cell_volume();
    let mut err_l1 = vec![Vec::with_capacity(n_eps); n_species];
    let mut err_linf = vec![Vec::with_capacity(n_eps); n_species];
    let mut total_l1 = Vec::with_capacity(n_eps);

    for (idx, slot) in results.into_iter().enumerate() {
        let eps = eps_list[idx];
        let snapshot = slot
            .expect("worker filled every slot")
            .map_err(|e| Error::SweepRunFailure {
                eps,
                source: Box::new(e),
            })?;
        let mut total = 0.0;
        for s in 0..n_species {
            let mut l1 = 0.0;
            let mut linf = 0.0f64;
            for (a, b) in snapshot.u[s].iter().zip(&reference.u[s]) {
                let d = (a - b).abs();
                l1 += d;
                linf = linf.max(d);
            }
            l1 *= volume;
            err_l1[s].push(l1);
            err_linf[s].push(linf);
            total += l1;
        }
        total_l1.push(total);
    }

    let mut species = Vec::with_capacity(n_species);
    let mut warnings = Vec::new();
    for s in 0..n_species {
        let (order_l1, intercept_l1) = estimate_order(eps_list, &err_l1[s])?;
        let (order_linf, _) = estimate_order(eps_list, &err_linf[s])?;
        species.push(SpeciesErrors {
            err_l1: err_l1[s].clone(),
            err_linf: err_linf[s].clone(),
            order_l1,
            intercept_l1,
            order_linf,
        });
    }
    let (order_l1, intercept_l1) = estimate_order(eps_list, &total_l1)?;

    // Monotonicity sanity: flag inversions, separately for the largest eps
    // (often outside the asymptotic regime) and the rest.
    for i in 1..n_eps {
        if total_l1[i] >= total_l1[i - 1] {
            let place = if i == 1 {
                "at the largest eps (often pre-asymptotic)"
            } else {
                "inside the sweep"
            };
            warnings.push(format!(
                "total L1 error increased from eps = {} to eps = {} {place}",
                eps_list[i - 1],
                eps_list[i]
            ));
        }
    }

    Ok(ConvergenceReport {
        scenario: scenario.name.clone(),
        eps: eps_list.to_vec(),
        species,
        total_l1,
        order_l1,
        intercept_l1,
        order_window: config.order_window,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{heat, HeatParams};
    use crate::space::Boundary;
    use proptest::prelude::*;

    #[test]
    fn exact_orders_on_synthetic_data() {
        let (p, c) = estimate_order(&[0.2, 0.1], &[0.1, 0.05]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((c - 0.5).abs() < 1e-12);

        let (p, _) = estimate_order(&[0.2, 0.1], &[0.04, 0.01]).unwrap();
        assert!((p - 2.0).abs() < 1e-12);

        let (p, _) = estimate_order(&[0.2, 0.1, 0.05], &[0.3, 0.3, 0.3]).unwrap();
        assert!(p.abs() < 1e-12);

        // errors = 0.2 eps over three points fits order one exactly.
        let eps = [0.2, 0.1, 0.05];
        let errs: Vec<f64> = eps.iter().map(|e| 0.2 * e).collect();
        let (p, c) = estimate_order(&eps, &errs).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((c - 0.2).abs() < 1e-12);
    }

    #[test]
    fn order_estimation_rejects_bad_input() {
        assert!(estimate_order(&[0.2], &[0.1]).is_err());
        assert!(estimate_order(&[0.2, 0.1], &[0.1]).is_err());
        assert!(estimate_order(&[0.2, -0.1], &[0.1, 0.05]).is_err());
        assert!(estimate_order(&[0.2, 0.1], &[0.0, 0.05]).is_err());
        assert!(estimate_order(&[0.1, 0.1], &[0.2, 0.2]).is_err());
    }

    #[test]
    fn sweep_requires_a_decreasing_list_of_three() {
        let scenario = heat(&HeatParams::default()).unwrap();
        let space = SpaceGrid::line(16, 1.0 / 16.0, Boundary::Periodic).unwrap();
        let config = SweepConfig::new(space, 0.01);
        assert!(epsilon_sweep(&scenario, &[0.2, 0.1], &config).is_err());
        assert!(epsilon_sweep(&scenario, &[0.1, 0.2, 0.05], &config).is_err());
    }

    #[test]
    fn small_heat_sweep_is_deterministic() {
        let scenario = heat(&HeatParams::default()).unwrap();
        let space = SpaceGrid::line(32, 1.0 / 32.0, Boundary::Periodic).unwrap();
        let mut config = SweepConfig::new(space, 0.02);
        config.parallel = 3;
        let a = epsilon_sweep(&scenario, &[0.2, 0.1, 0.05], &config).unwrap();
        let b = epsilon_sweep(&scenario, &[0.2, 0.1, 0.05], &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summary(), b.summary());
        assert_eq!(crate::io::convergence_csv(&a), crate::io::convergence_csv(&b));
        for errs in [&a.total_l1] {
            assert!(errs.iter().all(|e| *e > 0.0));
        }
    }

    proptest! {
        // Synthetic power-law data recovers its exponent.
        #[test]
        fn order_fit_recovers_power_laws(
            p in 0.25f64..3.0,
            c in 0.01f64..10.0,
        ) {
            let eps = [0.4, 0.2, 0.1, 0.05];
            let errs: Vec<f64> = eps.iter().map(|&e: &f64| c * e.powf(p)).collect();
            let (fit, fit_c) = estimate_order(&eps, &errs).unwrap();
            prop_assert!((fit - p).abs() < 1e-9);
            prop_assert!((fit_c - c).abs() < 1e-9 * c);
        }
    }
}
