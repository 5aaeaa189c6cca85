//! Explicit finite-volume solver for the derived macroscopic systems.
//!
//! One step advances `∂_t u_i = div(D_i grad u_i - u_i a_i) + ψ_i(u)` with
//! central-difference diffusion, taxis fluxes upwinded on the advective
//! velocity `a_i = Σ χ grad u_target` (donor-cell density at each face), and
//! a pointwise reaction update. Species without spatial terms reduce to the
//! reaction ODE, cell by cell.
//!
//! The time step obeys `0.9 · min(dx²/(2 d max D), dx / max |a|)`, recomputed
//! against the current state inside every step; exceeding it is a hard error.
//! Densities in `[-1e-12, 0)` are snapped to zero (round-off); anything more
//! negative aborts the run, to keep instabilities from masquerading as data.

use crate::error::Error;
use crate::hilbert::DerivedModel;
use crate::space::{steps_for, Boundary, SpaceGrid};
use crate::turning::FIELD_FLOOR;
use crate::Result;

/// Tolerance band for negative densities produced by round-off.
pub const NEGATIVITY_SNAP: f64 = 1e-12;

/// Macroscopic densities on a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub t: f64,
    /// `u[species][cell]`.
    pub u: Vec<Vec<f64>>,
}

impl MacroState {
    pub fn new(t: f64, u: Vec<Vec<f64>>) -> Self {
        MacroState { t, u }
    }

    pub fn species(&self) -> usize {
        self.u.len()
    }

    /// Total mass per species (cell sums times cell volume).
    pub fn masses(&self, grid: &SpaceGrid) -> Vec<f64> {
        self.u
            .iter()
            .map(|field| field.iter().sum::<f64>() * grid.cell_volume())
            .collect()
    }
}

/// Options for a macroscopic run.
#[derive(Debug, Clone, Copy)]
pub struct MacroRunOptions {
    /// Safety factor applied to the stability bound.
    pub cfl: f64,
    /// Optional upper bound on the step, for accuracy rather than stability.
    pub dt_max: Option<f64>,
}

impl Default for MacroRunOptions {
    fn default() -> Self {
        MacroRunOptions {
            cfl: 0.9,
            dt_max: None,
        }
    }
}

/// Advective velocity of one taxis term at a face, given left/right states.
/// Face gradients use the two adjacent cells; transverse gradient components
/// (2D, full-matrix couplings) average the cell-centred gradients.
struct FaceContext<'a> {
    model: &'a DerivedModel,
    grid: &'a SpaceGrid,
}

impl FaceContext<'_> {
    /// Total flux for species `i` through the face between cells `l` and `r`
    /// along `axis`, using precomputed cell gradients of every field.
    fn flux(
        &self,
        i: usize,
        u: &[Vec<f64>],
        gradients: &[Vec<[f64; 2]>],
        l: usize,
        r: usize,
        axis: usize,
    ) -> Result<f64> {
        let terms = self.model.terms(i);
        let inv_dx = 1.0 / self.grid.dx();
        let mut flux = 0.0;

        if let Some(d) = &terms.diffusion {
            let coeff = match &d.limiter {
                Some(law) => {
                    let n = u.len();
                    let mut face_state = Vec::with_capacity(n);
                    for field in u {
                        face_state.push(0.5 * (field[l] + field[r]));
                    }
                    d.tensor[axis][axis] / law.eval(&face_state)
                }
                None => d.tensor[axis][axis],
            };
            flux += coeff * (u[i][r] - u[i][l]) * inv_dx;
        }

        for taxis in &terms.taxis {
            let target = &u[taxis.target];
            // Gradient of the target at the face: normal component from the
            // face difference, transverse from averaged cell gradients.
            let mut grad = [0.0f64; 2];
            grad[axis] = (target[r] - target[l]) * inv_dx;
            if self.grid.sdim() == 2 {
                let other = 1 - axis;
                grad[other] =
                    0.5 * (gradients[taxis.target][l][other] + gradients[taxis.target][r][other]);
            }
            let mut a = taxis.matrix[axis][0] * grad[0] + taxis.matrix[axis][1] * grad[1];
            if taxis.flux_limited {
                let face_value = 0.5 * (target[l] + target[r]);
                if face_value < FIELD_FLOOR {
                    return Err(Error::FieldBelowFloor {
                        field: taxis.target,
                        value: face_value,
                        floor: FIELD_FLOOR,
                    });
                }
                a /= face_value;
            }
            let donor = if a > 0.0 { u[i][l] } else { u[i][r] };
            flux -= a * donor;
        }
        Ok(flux)
    }
}

/// Largest stable step at the current state: diffusive bound
/// `dx²/(2 sdim max D)` and advective bound `dx / max |a|`, both over all
/// species, cells, and directions.
pub fn stable_dt(model: &DerivedModel, state: &MacroState, grid: &SpaceGrid) -> Result<f64> {
    let mut max_d = 0.0f64;
    let mut max_a = 0.0f64;
    let n = model.species();
    let cells = grid.cells();
    let sdim = grid.sdim();

    let needs_gradients = (0..n).any(|i| !model.terms(i).taxis.is_empty());
    let gradients: Vec<Vec<[f64; 2]>> = if needs_gradients {
        state.u.iter().map(|f| grid.gradient(f)).collect()
    } else {
        Vec::new()
    };

    for i in 0..n {
        let terms = model.terms(i);
        if let Some(d) = &terms.diffusion {
            match &d.limiter {
                Some(law) => {
                    let mut face_state = vec![0.0; n];
                    for c in 0..cells {
                        for (j, field) in state.u.iter().enumerate() {
                            face_state[j] = field[c];
                        }
                        let denom = law.eval(&face_state);
                        if denom <= 0.0 {
                            return Err(Error::NumericalFailure(
                                "state-dependent diffusion rate is not positive".into(),
                            ));
                        }
                        for axis in 0..sdim {
                            max_d = max_d.max(d.tensor[axis][axis] / denom);
                        }
                    }
                }
                None => {
                    for axis in 0..sdim {
                        max_d = max_d.max(d.tensor[axis][axis]);
                    }
                }
            }
        }
        for taxis in &terms.taxis {
            for c in 0..cells {
                let g = gradients[taxis.target][c];
                for axis in 0..sdim {
                    let mut a = taxis.matrix[axis][0] * g[0] + taxis.matrix[axis][1] * g[1];
                    if taxis.flux_limited {
                        let value = state.u[taxis.target][c];
                        if value < FIELD_FLOOR {
                            return Err(Error::FieldBelowFloor {
                                field: taxis.target,
                                value,
                                floor: FIELD_FLOOR,
                            });
                        }
                        a /= value;
                    }
                    max_a = max_a.max(a.abs());
                }
            }
        }
    }

    let dx = grid.dx();
    let mut bound = f64::INFINITY;
    if max_d > 0.0 {
        bound = bound.min(dx * dx / (2.0 * sdim as f64 * max_d));
    }
    if max_a > 0.0 {
        bound = bound.min(dx / max_a);
    }
    Ok(bound)
}

/// One explicit finite-volume step. Errors if `dt` exceeds the stability
/// bound at the current state, if any density leaves the round-off band, or
/// if the state stops being finite.
pub fn step_macro(
    state: &mut MacroState,
    model: &DerivedModel,
    grid: &SpaceGrid,
    dt: f64,
) -> Result<()> {
    let n = model.species();
    if state.u.len() != n {
        return Err(Error::SpeciesMismatch(format!(
            "state holds {} species, model {}",
            state.u.len(),
            n
        )));
    }
    let limit = stable_dt(model, state, grid)?;
    if dt > limit * (1.0 + 1e-9) {
        return Err(Error::CflViolation { dt, limit });
    }

    let cells = grid.cells();
    let (nx, ny) = (grid.nx(), grid.ny());
    let dt_over_dx = dt / grid.dx();
    let ctx = FaceContext { model, grid };

    // Transverse gradient components are only needed by 2D taxis fluxes.
    let needs_gradients =
        grid.sdim() == 2 && (0..n).any(|i| !model.terms(i).taxis.is_empty());
    let gradients: Vec<Vec<[f64; 2]>> = if needs_gradients {
        state.u.iter().map(|f| grid.gradient(f)).collect()
    } else {
        Vec::new()
    };

    let mut next = state.u.clone();

    for i in 0..n {
        let terms = model.terms(i);
        let spatial = terms.diffusion.is_some() || !terms.taxis.is_empty();
        if spatial {
            // x-direction faces.
            for iy in 0..ny {
                for ix in 0..nx {
                    let l = grid.index(ix, iy);
                    let r_ix = (ix + 1) % nx;
                    let interior = ix + 1 < nx;
                    if !interior && grid.boundary() == Boundary::Reflecting {
                        continue; // zero-flux wall
                    }
                    let r = grid.index(r_ix, iy);
                    let f = ctx.flux(i, &state.u, &gradients, l, r, 0)?;
                    next[i][l] += dt_over_dx * f;
                    next[i][r] -= dt_over_dx * f;
                }
            }
            // y-direction faces.
            if ny > 1 {
                for iy in 0..ny {
                    let interior = iy + 1 < ny;
                    if !interior && grid.boundary() == Boundary::Reflecting {
                        continue;
                    }
                    let r_iy = (iy + 1) % ny;
                    for ix in 0..nx {
                        let l = grid.index(ix, iy);
                        let r = grid.index(ix, r_iy);
                        let f = ctx.flux(i, &state.u, &gradients, l, r, 1)?;
                        next[i][l] += dt_over_dx * f;
                        next[i][r] -= dt_over_dx * f;
                    }
                }
            }
        }
    }

    // Pointwise reaction update.
    if !model.sources().is_empty() {
        let mut local = vec![0.0; n];
        for c in 0..cells {
            for (j, field) in state.u.iter().enumerate() {
                local[j] = field[c];
            }
            for (i, field) in next.iter_mut().enumerate() {
                field[c] += dt * model.reaction(i, &local)?;
            }
        }
    }

    // Positivity bookkeeping: snap round-off, abort on instability.
    let t_next = state.t + dt;
    for (i, field) in next.iter_mut().enumerate() {
        for v in field.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "species {} became non-finite at t = {t_next:.6}",
                    i + 1
                )));
            }
            if *v < 0.0 {
                if *v >= -NEGATIVITY_SNAP {
                    *v = 0.0;
                } else {
                    return Err(Error::NegativeDensity {
                        species: i,
                        value: *v,
                        t: t_next,
                    });
                }
            }
        }
    }

    state.u = next;
    state.t = t_next;
    Ok(())
}

/// Drive the solver to each requested output time; snapshots include `t = 0`
/// only if requested. Deterministic for a given configuration.
pub fn run_macro(
    u0: &[Vec<f64>],
    model: &DerivedModel,
    grid: &SpaceGrid,
    output_times: &[f64],
    options: &MacroRunOptions,
) -> Result<Vec<MacroState>> {
    if !(options.cfl > 0.0 && options.cfl <= 0.9) {
        return Err(Error::InvalidParameter {
            name: "cfl".into(),
            constraint: "must lie in (0, 0.9]".into(),
        });
    }
    for (i, field) in u0.iter().enumerate() {
        if field.len() != grid.cells() {
            return Err(Error::LengthMismatch {
                what: "initial data",
                expected: grid.cells(),
                got: field.len(),
            });
        }
        if field.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: format!("u0[{}]", i + 1),
                constraint: "must be nonnegative and finite".into(),
            });
        }
    }
    let mut last = 0.0;
    for t in output_times {
        if *t < last {
            return Err(Error::InvalidParameter {
                name: "output_times".into(),
                constraint: "must be nondecreasing and nonnegative".into(),
            });
        }
        last = *t;
    }

    let mut state = MacroState::new(0.0, u0.to_vec());
    let mut snapshots = Vec::with_capacity(output_times.len());
    for &t_out in output_times {
        let span = t_out - state.t;
        if span > 0.0 {
            let mut bound = stable_dt(model, &state, grid)? * options.cfl;
            if let Some(dt_max) = options.dt_max {
                bound = bound.min(dt_max);
            }
            if !bound.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "dt_max".into(),
                    constraint: "required for models without spatial terms".into(),
                });
            }
            let n_steps = steps_for(span, bound);
            let dt = span / n_steps as f64;
            for _ in 0..n_steps {
                step_macro(&mut state, model, grid, dt)?;
            }
        }
        let mut snap = state.clone();
        snap.t = t_out;
        snapshots.push(snap);
    }
    Ok(snapshots)
}
