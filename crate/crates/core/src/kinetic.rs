//! Split integrator for the scaled kinetic system at finite `eps`.
//!
//! After dividing the scaled equations by `eps`, one step of length `dt`
//! advances, in order:
//!
//! 1. upwind transport of every phase-space density along its node velocity
//!    with effective speed `v/eps` (dimensional splitting in 2D);
//! 2. the stiff relaxation `eps^{-p} T0` with `p = 2` (driving species:
//!    `p = q + 1`), using the exact exponential of the relaxation ODE, or an
//!    implicit update with a precomputed resolvent for tabulated kernels;
//! 3. the perturbation `eps^{b-2} T1`, explicit, with field gradients taken
//!    from the current moments by central differences;
//! 4. the sources `G_i`, explicit and pointwise in `(x, v)`.
//!
//! Transport obeys the CFL bound `dt <= 0.9 eps dx / R`; the relaxation
//! update is unconditionally stable, which is what keeps the scheme usable
//! uniformly in `eps`. Steps 1–3 conserve mass per species up to boundary
//! flux (exactly, in the flux forms used here); only the sources change
//! totals.

use crate::error::Error;
use crate::hilbert::SourceSpec;
use crate::macroscale::MacroState;
use crate::space::{steps_for, Boundary, SpaceGrid};
use crate::turning::{self, LeadingKernel, ScalingExponents, TurningKernel};
use crate::velocity::{Equilibrium, VelocityGrid};
use crate::{linalg, Result};

use nalgebra::DMatrix;

/// Hard bound on the transport CFL number.
pub const CFL_LIMIT: f64 = 0.9;

/// Negative phase-space densities beyond this band abort the run.
pub const NEGATIVITY_BAND: f64 = 1e-13;

/// Everything that defines the kinetic system at one value of `eps`.
#[derive(Debug, Clone)]
pub struct KineticModel {
    pub grid: VelocityGrid,
    pub equilibria: Vec<Equilibrium>,
    pub kernels: Vec<TurningKernel>,
    pub scaling: ScalingExponents,
    pub sources: SourceSpec,
    pub eps: f64,
}

impl KineticModel {
    pub fn species(&self) -> usize {
        self.kernels.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.kernels.len();
        if self.equilibria.len() != n
            || self.scaling.species() != n
            || self.sources.species() != n
        {
            return Err(Error::SpeciesMismatch(
                "kernel, equilibrium, scaling, and source species counts differ".into(),
            ));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParameter {
                name: "eps".into(),
                constraint: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// Transport stability bound `CFL_LIMIT * eps * dx / R`.
    pub fn max_dt(&self, space: &SpaceGrid) -> f64 {
        CFL_LIMIT * self.eps * space.dx() / self.grid.radius()
    }
}

/// Phase-space densities `f_i(t, x, v)`, stored per species with node-major
/// layout `f[species][node * cells + cell]`.
#[derive(Debug, Clone)]
pub struct KineticState {
    pub t: f64,
    f: Vec<Vec<f64>>,
    cells: usize,
}

impl KineticState {
    /// Well-prepared initial data `f_i = M_i u_i`: the state sits on the
    /// leading-order manifold, so no initial layer forms.
    pub fn well_prepared(model: &KineticModel, space: &SpaceGrid, u0: &[Vec<f64>]) -> Result<Self> {
        model.check()?;
        let cells = space.cells();
        if u0.len() != model.species() {
            return Err(Error::SpeciesMismatch(format!(
                "{} initial fields for {} species",
                u0.len(),
                model.species()
            )));
        }
        let nodes = model.grid.len();
        let mut f = Vec::with_capacity(u0.len());
        for (i, field) in u0.iter().enumerate() {
            if field.len() != cells {
                return Err(Error::LengthMismatch {
                    what: "initial data",
                    expected: cells,
                    got: field.len(),
                });
            }
            if field.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: format!("u0[{}]", i + 1),
                    constraint: "must be nonnegative and finite".into(),
                });
            }
            let m = &model.equilibria[i];
            let mut data = vec![0.0; nodes * cells];
            for k in 0..nodes {
                let mk = m.value(k);
                for c in 0..cells {
                    data[k * cells + c] = mk * field[c];
                }
            }
            f.push(data);
        }
        Ok(KineticState { t: 0.0, f, cells })
    }

    pub fn species(&self) -> usize {
        self.f.len()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn values(&self, species: usize) -> &[f64] {
        &self.f[species]
    }

    /// Macroscopic densities `u_i = ⟨f_i⟩` per species and cell.
    pub fn moments(&self, model: &KineticModel) -> Vec<Vec<f64>> {
        let w = model.grid.weights();
        self.f
            .iter()
            .map(|data| {
                let mut u = vec![0.0; self.cells];
                for (k, wk) in w.iter().enumerate() {
                    let row = &data[k * self.cells..(k + 1) * self.cells];
                    for (uc, fv) in u.iter_mut().zip(row) {
                        *uc += wk * fv;
                    }
                }
                u
            })
            .collect()
    }

    /// Total mass per species.
    pub fn masses(&self, model: &KineticModel, space: &SpaceGrid) -> Vec<f64> {
        self.moments(model)
            .iter()
            .map(|u| u.iter().sum::<f64>() * space.cell_volume())
            .collect()
    }

    /// `Σ_x Σ_v w |f_i - M_i u_i| dx^d` per species: the distance to the
    /// local-equilibrium manifold, which must shrink like `eps` after the
    /// initial transient.
    pub fn equilibrium_distance(&self, model: &KineticModel, space: &SpaceGrid) -> Vec<f64> {
        let moments = self.moments(model);
        let mut out = Vec::with_capacity(self.f.len());
        for (i, data) in self.f.iter().enumerate() {
            let m = &model.equilibria[i];
            let mut total = 0.0;
            for k in 0..model.grid.len() {
                let w = model.grid.weight(k);
                let mk = m.value(k);
                let row = &data[k * self.cells..(k + 1) * self.cells];
                for (c, fv) in row.iter().enumerate() {
                    total += w * (fv - mk * moments[i][c]).abs();
                }
            }
            out.push(total * space.cell_volume());
        }
        out
    }

    fn check_health(&self, t: f64) -> Result<()> {
        for (i, data) in self.f.iter().enumerate() {
            for v in data {
                if !v.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "species {} phase-space density became non-finite at t = {t:.6}",
                        i + 1
                    )));
                }
                if *v < -NEGATIVITY_BAND {
                    return Err(Error::NegativeDensity {
                        species: i,
                        value: *v,
                        t,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Integrator with per-run scratch space and cached resolvents.
pub struct KineticSolver {
    model: KineticModel,
    scratch: Vec<f64>,
    /// `(dt, resolvent)` cache per species, for tabulated leading kernels.
    implicit: Vec<Option<(f64, DMatrix<f64>)>>,
}

impl KineticSolver {
    pub fn new(model: KineticModel) -> Result<Self> {
        model.check()?;
        let n = model.species();
        Ok(KineticSolver {
            model,
            scratch: Vec::new(),
            implicit: (0..n).map(|_| None).collect(),
        })
    }

    pub fn model(&self) -> &KineticModel {
        &self.model
    }

    /// One full splitting step.
    pub fn step(&mut self, state: &mut KineticState, space: &SpaceGrid, dt: f64) -> Result<()> {
        let limit = self.model.max_dt(space);
        if dt > limit * (1.0 + 1e-9) {
            return Err(Error::CflViolation { dt, limit });
        }

        self.transport(state, space, dt);
        let moments = state.moments(&self.model);
        self.relax(state, &moments, dt)?;
        self.perturb(state, space, &moments, dt)?;
        self.react(state, dt)?;

        state.t += dt;
        state.check_health(state.t)
    }

    /// Upwind transport of every node row at speed `v/eps`, flux form.
    fn transport(&mut self, state: &mut KineticState, space: &SpaceGrid, dt: f64) {
        let cells = state.cells;
        let nodes = self.model.grid.len();
        let eps = self.model.eps;
        let (nx, ny) = (space.nx(), space.ny());
        let reflecting = space.boundary() == Boundary::Reflecting;

        if self.scratch.len() != nodes * cells {
            self.scratch = vec![0.0; nodes * cells];
        }

        for data in state.f.iter_mut() {
            // x-sweep: rows are contiguous per node. Node speeds v/eps carry
            // the scaling already.
            let lambda = dt / space.dx();
            for k in 0..nodes {
                let a = self.model.grid.node(k)[0] / eps;
                let mirror = self.model.grid.mirror_x(k);
                for iy in 0..ny {
                    for ix in 0..nx {
                        let c = iy * nx + ix;
                        // Faces left (ix-1/2) and right (ix+1/2) of cell ix.
                        let left = if ix > 0 {
                            upwind(a, data[k * cells + c - 1], data[k * cells + c])
                        } else if reflecting {
                            // Ghost carries the mirrored node at the wall cell.
                            upwind(a, data[mirror * cells + c], data[k * cells + c])
                        } else {
                            upwind(
                                a,
                                data[k * cells + iy * nx + (nx - 1)],
                                data[k * cells + c],
                            )
                        };
                        let right = if ix + 1 < nx {
                            upwind(a, data[k * cells + c], data[k * cells + c + 1])
                        } else if reflecting {
                            upwind(a, data[k * cells + c], data[mirror * cells + c])
                        } else {
                            upwind(a, data[k * cells + c], data[k * cells + iy * nx])
                        };
                        self.scratch[k * cells + c] =
                            data[k * cells + c] - lambda * (right - left);
                    }
                }
            }
            data.copy_from_slice(&self.scratch);

            // y-sweep (2D only).
            if ny > 1 {
                for k in 0..nodes {
                    let a = self.model.grid.node(k)[1] / eps;
                    let mirror = self.model.grid.mirror_y(k);
                    for iy in 0..ny {
                        for ix in 0..nx {
                            let c = iy * nx + ix;
                            let below = if iy > 0 {
                                upwind(a, data[k * cells + c - nx], data[k * cells + c])
                            } else if reflecting {
                                upwind(a, data[mirror * cells + c], data[k * cells + c])
                            } else {
                                upwind(
                                    a,
                                    data[k * cells + (ny - 1) * nx + ix],
                                    data[k * cells + c],
                                )
                            };
                            let above = if iy + 1 < ny {
                                upwind(a, data[k * cells + c], data[k * cells + c + nx])
                            } else if reflecting {
                                upwind(a, data[k * cells + c], data[mirror * cells + c])
                            } else {
                                upwind(a, data[k * cells + c], data[k * cells + ix])
                            };
                            self.scratch[k * cells + c] =
                                data[k * cells + c] - lambda * (above - below);
                        }
                    }
                }
                data.copy_from_slice(&self.scratch);
            }
        }
    }

    /// Stiff relaxation, exact exponential (relaxation kernels) or implicit
    /// resolvent (tabulated kernels).
    fn relax(&mut self, state: &mut KineticState, moments: &[Vec<f64>], dt: f64) -> Result<()> {
        let cells = state.cells;
        let nodes = self.model.grid.len();
        let eps = self.model.eps;
        let n = self.model.species();

        // Per-cell state vector, needed by state-dependent rates.
        let state_dependent = (0..n).any(|i| {
            matches!(
                self.model.kernels[i].perturbation(),
                turning::Perturbation::FluxLimited { .. }
            )
        });
        let mut local = vec![0.0; n];

        for i in 0..n {
            let p = self.model.scaling.stiff_exponent(i) as i32;
            let lambda = dt / eps.powi(p);
            let kernel = &self.model.kernels[i];
            let m = &self.model.equilibria[i];
            match kernel.leading() {
                LeadingKernel::Relaxation { sigma } => {
                    if state_dependent
                        && matches!(
                            kernel.perturbation(),
                            turning::Perturbation::FluxLimited { .. }
                        )
                    {
                        for c in 0..cells {
                            for (j, mj) in moments.iter().enumerate() {
                                local[j] = mj[c];
                            }
                            let sig = kernel.relaxation_sigma(&local).unwrap_or(*sigma);
                            let decay = (-sig * lambda).exp();
                            for k in 0..nodes {
                                let eq = m.value(k) * moments[i][c];
                                let fv = &mut state.f[i][k * cells + c];
                                *fv = eq + (*fv - eq) * decay;
                            }
                        }
                    } else {
                        let decay = (-sigma * lambda).exp();
                        for k in 0..nodes {
                            let mk = m.value(k);
                            let row = &mut state.f[i][k * cells..(k + 1) * cells];
                            for (c, fv) in row.iter_mut().enumerate() {
                                let eq = mk * moments[i][c];
                                *fv = eq + (*fv - eq) * decay;
                            }
                        }
                    }
                }
                LeadingKernel::Table { .. } => {
                    let resolvent = self.implicit[i]
                        .as_ref()
                        .filter(|(cached_dt, _)| *cached_dt == dt)
                        .map(|(_, r)| r.clone());
                    let resolvent = match resolvent {
                        Some(r) => r,
                        None => {
                            let l = turning::operator_matrix(kernel, &self.model.grid, m);
                            let a = DMatrix::identity(nodes, nodes) - l * lambda;
                            let inv = a.try_inverse().ok_or_else(|| {
                                Error::SingularOperator(
                                    "implicit relaxation matrix is singular".into(),
                                )
                            })?;
                            self.implicit[i] = Some((dt, inv.clone()));
                            inv
                        }
                    };
                    let mut profile = vec![0.0; nodes];
                    let mut updated = vec![0.0; nodes];
                    for c in 0..cells {
                        for k in 0..nodes {
                            profile[k] = state.f[i][k * cells + c];
                        }
                        for k in 0..nodes {
                            let mut acc = 0.0;
                            for j in 0..nodes {
                                acc += resolvent[(k, j)] * profile[j];
                            }
                            updated[k] = acc;
                        }
                        for k in 0..nodes {
                            state.f[i][k * cells + c] = updated[k];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Explicit perturbation update `f += dt eps^{b-2} T1[f](f)`.
    fn perturb(
        &mut self,
        state: &mut KineticState,
        space: &SpaceGrid,
        moments: &[Vec<f64>],
        dt: f64,
    ) -> Result<()> {
        let n = self.model.species();
        if !(0..n).any(|i| self.model.kernels[i].has_perturbation()) {
            return Ok(());
        }
        let cells = state.cells;
        let nodes = self.model.grid.len();
        let eps = self.model.eps;

        // Gradients of every field, once per step.
        let gradients: Vec<Vec<[f64; 2]>> =
            moments.iter().map(|u| space.gradient(u)).collect();

        let mut local_u = vec![0.0; n];
        let mut local_grad = vec![linalg::ZERO_VEC; n];
        let mut profile = vec![0.0; nodes];

        for i in 0..n {
            let kernel = &self.model.kernels[i];
            if !kernel.has_perturbation() {
                continue;
            }
            let b = self.model.scaling.b(i).unwrap_or(1) as i32;
            let factor = dt * eps.powi(b - 2);
            let m = &self.model.equilibria[i];
            for c in 0..cells {
                for j in 0..n {
                    local_u[j] = moments[j][c];
                    local_grad[j] = [gradients[j][c][0], gradients[j][c][1], 0.0];
                }
                for k in 0..nodes {
                    profile[k] = state.f[i][k * cells + c];
                }
                let fields = turning::MacroFields {
                    u: &local_u,
                    gradients: &local_grad,
                };
                let action = turning::apply_t1(kernel, &self.model.grid, m, &fields, &profile)?;
                for k in 0..nodes {
                    state.f[i][k * cells + c] += factor * action[k];
                }
            }
        }
        Ok(())
    }

    /// Explicit source update, pointwise in `(x, v)`.
    fn react(&mut self, state: &mut KineticState, dt: f64) -> Result<()> {
        if self.model.sources.is_empty() {
            return Ok(());
        }
        let cells = state.cells;
        let nodes = self.model.grid.len();
        let n = self.model.species();
        let measure = self.model.grid.measure();
        let mut ratios = vec![0.0; n];
        for k in 0..nodes {
            for c in 0..cells {
                for (j, mj) in self.model.equilibria.iter().enumerate() {
                    ratios[j] = state.f[j][k * cells + c] / mj.value(k);
                }
                for i in 0..n {
                    let g = self.model.sources.microscopic(i, &ratios, measure)?;
                    state.f[i][k * cells + c] += dt * g;
                }
            }
        }
        Ok(())
    }
}

/// Snapshots of a kinetic run plus the final phase-space state.
#[derive(Debug, Clone)]
pub struct KineticRun {
    pub snapshots: Vec<MacroState>,
    pub final_state: KineticState,
}

/// Options for a kinetic run.
#[derive(Debug, Clone, Copy)]
pub struct KineticRunOptions {
    /// CFL number in `(0, 0.9]`.
    pub cfl: f64,
}

impl Default for KineticRunOptions {
    fn default() -> Self {
        KineticRunOptions { cfl: CFL_LIMIT }
    }
}

/// Integrate from well-prepared data `f = M u0` and record the moment fields
/// at each output time.
pub fn run_kinetic(
    model: &KineticModel,
    space: &SpaceGrid,
    u0: &[Vec<f64>],
    output_times: &[f64],
    options: &KineticRunOptions,
) -> Result<KineticRun> {
    if !(options.cfl > 0.0 && options.cfl <= CFL_LIMIT) {
        return Err(Error::InvalidParameter {
            name: "cfl".into(),
            constraint: format!("must lie in (0, {CFL_LIMIT}]"),
        });
    }
    let mut solver = KineticSolver::new(model.clone())?;
    let mut state = KineticState::well_prepared(model, space, u0)?;
    let bound = options.cfl * model.eps * space.dx() / model.grid.radius();

    let mut snapshots = Vec::with_capacity(output_times.len());
    for &t_out in output_times {
        let span = t_out - state.t;
        if span < 0.0 {
            return Err(Error::InvalidParameter {
                name: "output_times".into(),
                constraint: "must be nondecreasing".into(),
            });
        }
        if span > 0.0 {
            let n_steps = steps_for(span, bound);
            let dt = span / n_steps as f64;
            for _ in 0..n_steps {
                solver.step(&mut state, space, dt)?;
            }
        }
        snapshots.push(MacroState::new(t_out, state.moments(model)));
    }
    Ok(KineticRun {
        snapshots,
        final_state: state,
    })
}

#[inline]
fn upwind(a: f64, f_left: f64, f_right: f64) -> f64 {
    if a > 0.0 {
        a * f_left
    } else {
        a * f_right
    }
}
