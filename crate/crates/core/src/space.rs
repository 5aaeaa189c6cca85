//! Uniform spatial grids in one or two dimensions.

use crate::error::Error;
use crate::Result;

/// Boundary treatment shared by both solvers. `Reflecting` means specular
/// walls for the kinetic equation and zero-flux faces for the macroscopic
/// one; the two limits match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Reflecting,
}

/// Uniform cell-centred grid with square cells; `ny = 1` collapses to 1D.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGrid {
    nx: usize,
    ny: usize,
    dx: f64,
    boundary: Boundary,
}

impl SpaceGrid {
    pub fn line(nx: usize, dx: f64, boundary: Boundary) -> Result<Self> {
        Self::plane(nx, 1, dx, boundary)
    }

    pub fn plane(nx: usize, ny: usize, dx: f64, boundary: Boundary) -> Result<Self> {
        if nx < 2 || (ny != 1 && ny < 2) {
            return Err(Error::InvalidParameter {
                name: "cells".into(),
                constraint: "needs at least 2 cells per spatial direction".into(),
            });
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dx".into(),
                constraint: "must be positive".into(),
            });
        }
        Ok(SpaceGrid {
            nx,
            ny,
            dx,
            boundary,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of spatial dimensions (1 or 2).
    pub fn sdim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    /// Cell volume `dx^sdim`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.sdim() as i32)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Cell-centre x coordinates (row-major order for 2D callers).
    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| (i as f64 + 0.5) * self.dx).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|i| (i as f64 + 0.5) * self.dx).collect()
    }

    /// Central-difference gradient of a cell field, with periodic wrap or
    /// mirror ghosts at reflecting walls. Returns `(d/dx, d/dy)` per cell.
    pub fn gradient(&self, field: &[f64]) -> Vec<[f64; 2]> {
        let (nx, ny) = (self.nx, self.ny);
        let inv2dx = 1.0 / (2.0 * self.dx);
        let mut out = vec![[0.0; 2]; self.cells()];
        for iy in 0..ny {
            for ix in 0..nx {
                let c = self.index(ix, iy);
                let (xl, xr) = match self.boundary {
                    Boundary::Periodic => (
                        self.index((ix + nx - 1) % nx, iy),
                        self.index((ix + 1) % nx, iy),
                    ),
                    Boundary::Reflecting => (
                        self.index(ix.saturating_sub(1), iy),
                        self.index((ix + 1).min(nx - 1), iy),
                    ),
                };
                out[c][0] = (field[xr] - field[xl]) * inv2dx;
                if ny > 1 {
                    let (yl, yr) = match self.boundary {
                        Boundary::Periodic => (
                            self.index(ix, (iy + ny - 1) % ny),
                            self.index(ix, (iy + 1) % ny),
                        ),
                        Boundary::Reflecting => (
                            self.index(ix, iy.saturating_sub(1)),
                            self.index(ix, (iy + 1).min(ny - 1)),
                        ),
                    };
                    out[c][1] = (field[yr] - field[yl]) * inv2dx;
                }
            }
        }
        out
    }
}

/// Split `[0, span]` into `n` uniform steps with `n` the smallest count whose
/// step obeys `bound`. The small slack keeps the count stable when the bound
/// itself carries round-off from derived coefficients.
pub fn steps_for(span: f64, bound: f64) -> usize {
    ((span / bound) * (1.0 - 1e-9)).ceil().max(1.0) as usize
}
