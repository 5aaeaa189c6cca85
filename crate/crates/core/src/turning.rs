//! Turning operators of the velocity-jump process.
//!
//! Each species carries an operator `T = T0 + eps^b T1` acting on velocity
//! profiles at a fixed spatial cell. The discrete gain–loss form is
//!
//! ```text
//! (T g)(v_k) = Σ_j w_j [ T(v_k, v_j) g_j  -  T(v_j, v_k) g_k ]
//! ```
//!
//! with the kernel convention `T(new, previous)`. The leading part `T0` is
//! either the relaxation kernel `T0(v, v*) = σ M(v)`, whose operator reduces
//! to `-σ (g - M⟨g⟩)`, or a general nonnegative table satisfying detailed
//! balance. The perturbation `T1` drifts a population along gradients of
//! coupled macroscopic fields; it integrates to zero for every profile, so it
//! never creates or destroys mass.
//!
//! `L = T0` is self-adjoint in the `1/M`-weighted inner product, its kernel
//! is spanned by `M`, and it is invertible on mean-zero data; `solve_theta`
//! computes the unique mean-zero solution of `L θ_a = v_a M`, the building
//! block of the diffusion tensor.

use crate::error::Error;
use crate::linalg::{self, Vec3};
use crate::velocity::{Equilibrium, VelocityGrid};
use crate::Result;

use nalgebra::{DMatrix, DVector};

/// Floor on macroscopic field values wherever a turning law divides by a
/// field. Falling below it aborts the run; clamping would silently corrupt
/// convergence measurements.
pub const FIELD_FLOOR: f64 = 1e-8;

/// Residual threshold for the structural operator checks.
pub const OPERATOR_TOL: f64 = 1e-10;

/// Scaling exponents of the parabolic limit: the relaxation strength `q` of
/// the driving species and the perturbation order `b_l` of every other one.
///
/// Species are 0-indexed; for three or more species, index 2 is the driving
/// species `u_3`, whose turning operator has no perturbation part and hence
/// no order `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingExponents {
    q: u32,
    b: Vec<Option<u32>>,
}

/// Index of the driving (pure-relaxation) species, if the mixture has one.
pub fn driving_species(n: usize) -> Option<usize> {
    (n >= 3).then_some(2)
}

impl ScalingExponents {
    /// `b[i]` must be `None` exactly at the driving slot and `Some(>= 1)`
    /// everywhere else; `q >= 1`.
    pub fn new(q: u32, b: Vec<Option<u32>>) -> Result<Self> {
        if q < 1 {
            return Err(Error::InvalidParameter {
                name: "q".into(),
                constraint: "must be an integer >= 1".into(),
            });
        }
        let driving = driving_species(b.len());
        for (i, order) in b.iter().enumerate() {
            match (Some(i) == driving, order) {
                (true, Some(_)) => {
                    return Err(Error::InvalidParameter {
                        name: format!("b_{}", i + 1),
                        constraint: "species 3 admits no perturbation order".into(),
                    })
                }
                (false, None) => {
                    return Err(Error::InvalidParameter {
                        name: format!("b_{}", i + 1),
                        constraint: "must be set for non-driving species".into(),
                    })
                }
                (false, Some(v)) if *v < 1 => {
                    return Err(Error::InvalidParameter {
                        name: format!("b_{}", i + 1),
                        constraint: "must be an integer >= 1".into(),
                    })
                }
                _ => {}
            }
        }
        Ok(ScalingExponents { q, b })
    }

    /// Convenience constructor: same order `b` for every non-driving species.
    pub fn uniform(n: usize, q: u32, b: u32) -> Result<Self> {
        let driving = driving_species(n);
        Self::new(
            q,
            (0..n)
                .map(|i| if Some(i) == driving { None } else { Some(b) })
                .collect(),
        )
    }

    pub fn species(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Perturbation order of species `i`; `None` for the driving species.
    pub fn b(&self, i: usize) -> Option<u32> {
        self.b[i]
    }

    /// Kronecker flag `δ_{b_i,1}`: does species `i` keep its taxis term in
    /// the limit?
    pub fn taxis_active(&self, i: usize) -> bool {
        self.b[i] == Some(1)
    }

    /// Kronecker flag `δ_{q,1}`: does the driving species keep diffusion?
    pub fn driving_diffuses(&self) -> bool {
        self.q == 1
    }

    /// Exponent `p` of the stiff factor `1/eps^p` in front of `T0` once the
    /// scaled equation is divided by `eps`: `q + 1` for the driving species,
    /// `2` for every other one.
    pub fn stiff_exponent(&self, i: usize) -> u32 {
        if Some(i) == driving_species(self.species()) {
            self.q + 1
        } else {
            2
        }
    }
}

/// Leading part of a turning kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum LeadingKernel {
    /// `T0(v, v*) = σ M(v)`: relax to the equilibrium at rate `σ`.
    Relaxation { sigma: f64 },
    /// General tabulated kernel, `entries[k * n + j] = T0(v_k, v_j)`.
    Table { entries: Vec<f64> },
}

/// Law `β(s) = (offset + slope · s) e_1` entering the state-dependent
/// relaxation rate `σ = |β_1(u_1) · β_2(u_2)|` of the flux-limited family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaLaw {
    pub offset: f64,
    pub slope: f64,
}

impl Default for BetaLaw {
    fn default() -> Self {
        BetaLaw {
            offset: 1.0,
            slope: 1.0,
        }
    }
}

impl BetaLaw {
    pub fn eval(&self, s: f64) -> f64 {
        self.offset + self.slope * s
    }
}

/// Perturbation part `T1` of a turning kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    None,
    /// Drift along gradients of the listed fields:
    /// `T1(v, v*) = -(σ d / (|V|² R² M(v*))) v* · Σ_t ξ_t ∇u_t`.
    GradientTaxis { targets: Vec<TaxisTarget> },
    /// Same structure with drift `∇u_target / u_target` and the
    /// state-dependent rate `σ = |β_1(u_1) · β_2(u_2)|`.
    FluxLimited {
        target: usize,
        beta1: BetaLaw,
        beta2: BetaLaw,
    },
}

/// One taxis coupling: chase the gradient of `field` with strength `coupling`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxisTarget {
    pub field: usize,
    pub coupling: f64,
}

/// Turning kernel of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct TurningKernel {
    species: usize,
    leading: LeadingKernel,
    perturbation: Perturbation,
}

/// Macroscopic state of all species at one spatial cell, as needed by the
/// perturbation kernels. Gradients are supplied by the caller; the turning
/// module is purely local in space.
#[derive(Debug, Clone, Copy)]
pub struct MacroFields<'a> {
    pub u: &'a [f64],
    pub gradients: &'a [Vec3],
}

impl TurningKernel {
    pub fn relaxation(species: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: format!("sigma_{}", species + 1),
                constraint: "must be positive".into(),
            });
        }
        Ok(TurningKernel {
            species,
            leading: LeadingKernel::Relaxation { sigma },
            perturbation: Perturbation::None,
        })
    }

    pub fn table(species: usize, grid: &VelocityGrid, entries: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if entries.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "kernel table",
                expected: n * n,
                got: entries.len(),
            });
        }
        Ok(TurningKernel {
            species,
            leading: LeadingKernel::Table { entries },
            perturbation: Perturbation::None,
        })
    }

    pub fn with_gradient_taxis(mut self, targets: Vec<TaxisTarget>) -> Self {
        self.perturbation = Perturbation::GradientTaxis { targets };
        self
    }

    /// The state-dependent rate `|β_1(u_1)·β_2(u_2)|` replaces the constant
    /// one, so the nominal rate is pinned at one.
    pub fn with_flux_limited(mut self, target: usize, beta1: BetaLaw, beta2: BetaLaw) -> Self {
        if let LeadingKernel::Relaxation { sigma } = &mut self.leading {
            *sigma = 1.0;
        }
        self.perturbation = Perturbation::FluxLimited {
            target,
            beta1,
            beta2,
        };
        self
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn leading(&self) -> &LeadingKernel {
        &self.leading
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn has_perturbation(&self) -> bool {
        !matches!(self.perturbation, Perturbation::None)
    }

    /// Leading relaxation rate at macroscopic state `u`. Constant except for
    /// the flux-limited family, where `σ = |β_1(u_1) · β_2(u_2)|`. `None` for
    /// tabulated kernels.
    pub fn relaxation_sigma(&self, u: &[f64]) -> Option<f64> {
        match &self.leading {
            LeadingKernel::Relaxation { sigma } => match &self.perturbation {
                Perturbation::FluxLimited { beta1, beta2, .. } => {
                    let u1 = u.first().copied().unwrap_or(0.0);
                    let u2 = u.get(1).copied().unwrap_or(0.0);
                    Some((beta1.eval(u1) * beta2.eval(u2)).abs())
                }
                _ => Some(*sigma),
            },
            LeadingKernel::Table { .. } => None,
        }
    }
}

/// Apply the leading operator `T0` to a velocity profile `g`.
pub fn apply_t0(
    kernel: &TurningKernel,
    grid: &VelocityGrid,
    m: &Equilibrium,
    g: &[f64],
) -> Result<Vec<f64>> {
    if g.len() != grid.len() {
        return Err(Error::LengthMismatch {
            what: "turning operand",
            expected: grid.len(),
            got: g.len(),
        });
    }
    match &kernel.leading {
        LeadingKernel::Relaxation { sigma } => {
            let mean = grid.moment(g)?;
            Ok(g.iter()
                .zip(m.values())
                .map(|(gk, mk)| -sigma * (gk - mk * mean))
                .collect())
        }
        LeadingKernel::Table { entries } => Ok(apply_table(entries, grid, g)),
    }
}

fn apply_table(entries: &[f64], grid: &VelocityGrid, g: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let w = grid.weights();
    let mut out = vec![0.0; n];
    for k in 0..n {
        let mut gain = 0.0;
        let mut loss_rate = 0.0;
        for j in 0..n {
            gain += w[j] * entries[k * n + j] * g[j];
            loss_rate += w[j] * entries[j * n + k];
        }
        out[k] = gain - loss_rate * g[k];
    }
    out
}

/// Drift vector `A` and rate prefactor of the perturbation kernel at the
/// given macroscopic state.
fn perturbation_drift(
    kernel: &TurningKernel,
    fields: &MacroFields,
) -> Result<(Vec3, f64)> {
    match &kernel.perturbation {
        Perturbation::None => Err(Error::SpeciesMismatch(format!(
            "species {} has no perturbation part",
            kernel.species + 1
        ))),
        Perturbation::GradientTaxis { targets } => {
            let mut a = linalg::ZERO_VEC;
            for t in targets {
                let grad = fields
                    .gradients
                    .get(t.field)
                    .ok_or(Error::MissingGradient { field: t.field })?;
                linalg::add_assign(&mut a, &linalg::scale(grad, t.coupling));
            }
            let sigma = kernel.relaxation_sigma(fields.u).ok_or_else(|| {
                Error::SpeciesMismatch("gradient taxis requires a relaxation leading part".into())
            })?;
            Ok((a, sigma))
        }
        Perturbation::FluxLimited { target, .. } => {
            let grad = fields
                .gradients
                .get(*target)
                .ok_or(Error::MissingGradient { field: *target })?;
            let value = fields.u.get(*target).copied().unwrap_or(0.0);
            if value < FIELD_FLOOR {
                return Err(Error::FieldBelowFloor {
                    field: *target,
                    value,
                    floor: FIELD_FLOOR,
                });
            }
            let sigma = kernel.relaxation_sigma(fields.u).ok_or_else(|| {
                Error::SpeciesMismatch("flux-limited taxis requires a relaxation leading part".into())
            })?;
            Ok((linalg::scale(grad, 1.0 / value), sigma))
        }
    }
}

/// Apply the perturbation operator `T1[fields]` to a velocity profile `g`.
///
/// With `c = σ d / (|V|² R²)` and drift `A`:
///
/// ```text
/// (T1 g)(v_k) = -c Σ_j w_j (v_j · A) g_j / M_j  +  c (Σ_j w_j) (v_k · A) g_k / M_k
/// ```
///
/// Both terms share the quadrature `Σ_j w_j`, so the discrete integral of the
/// result vanishes identically.
pub fn apply_t1(
    kernel: &TurningKernel,
    grid: &VelocityGrid,
    m: &Equilibrium,
    fields: &MacroFields,
    g: &[f64],
) -> Result<Vec<f64>> {
    if g.len() != grid.len() {
        return Err(Error::LengthMismatch {
            what: "turning operand",
            expected: grid.len(),
            got: g.len(),
        });
    }
    let (a, sigma) = perturbation_drift(kernel, fields)?;
    let r = grid.radius();
    let c = sigma * grid.dim() as f64 / (grid.measure() * grid.measure() * r * r);
    let w = grid.weights();
    let nodes = grid.nodes();

    let mut gain = 0.0;
    let mut wsum = 0.0;
    for j in 0..grid.len() {
        gain += w[j] * linalg::dot(&nodes[j], &a) * g[j] / m.value(j);
        wsum += w[j];
    }
    Ok((0..grid.len())
        .map(|k| c * (wsum * linalg::dot(&nodes[k], &a) * g[k] / m.value(k) - gain))
        .collect())
}

/// Dense matrix of the leading operator in the nodal basis.
pub(crate) fn operator_matrix(kernel: &TurningKernel, grid: &VelocityGrid, m: &Equilibrium) -> DMatrix<f64> {
    let n = grid.len();
    let w = grid.weights();
    match &kernel.leading {
        LeadingKernel::Relaxation { sigma } => DMatrix::from_fn(n, n, |k, j| {
            let mut e = sigma * m.value(k) * w[j];
            if k == j {
                e -= sigma;
            }
            e
        }),
        LeadingKernel::Table { entries } => {
            let mut a = DMatrix::zeros(n, n);
            for k in 0..n {
                let mut loss = 0.0;
                for j in 0..n {
                    a[(k, j)] = w[j] * entries[k * n + j];
                    loss += w[j] * entries[j * n + k];
                }
                a[(k, k)] -= loss;
            }
            a
        }
    }
}

/// Solve `L g = rhs` for the unique mean-zero solution.
///
/// The right-hand side must itself be mean-zero (solvability); the kernel
/// direction `M` is pinned by a bordered direct solve, which is exact for the
/// small velocity grids used here.
pub fn solve_mean_zero(
    kernel: &TurningKernel,
    grid: &VelocityGrid,
    m: &Equilibrium,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = grid.len();
    if rhs.len() != n {
        return Err(Error::LengthMismatch {
            what: "solve right-hand side",
            expected: n,
            got: rhs.len(),
        });
    }
    let scale = rhs.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-300);
    let mean = grid.moment(rhs)?;
    if mean.abs() > OPERATOR_TOL * scale.max(1.0) {
        return Err(Error::NonMeanZeroRhs { mean });
    }

    let a = operator_matrix(kernel, grid, m);
    let mut bordered = DMatrix::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(&a);
    for k in 0..n {
        bordered[(k, n)] = m.value(k);
        bordered[(n, k)] = grid.weight(k);
    }
    let mut b = DVector::zeros(n + 1);
    for k in 0..n {
        b[k] = rhs[k];
    }
    let solution = bordered
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularOperator("bordered system has no LU solution".into()))?;
    let g: Vec<f64> = solution.iter().take(n).copied().collect();

    // Residual check guards against tables that violate the kernel lower
    // bound and leave L effectively singular.
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut r = -rhs[k];
        for j in 0..n {
            r += a[(k, j)] * g[j];
        }
        worst = worst.max(r.abs());
    }
    if worst > OPERATOR_TOL * scale.max(1.0) {
        return Err(Error::SingularOperator(format!(
            "solve residual {worst:.3e} exceeds {OPERATOR_TOL:.0e}"
        )));
    }
    Ok(g)
}

/// Solve `L θ_a = v_a M` for each velocity component; `⟨θ_a⟩ = 0`.
///
/// For relaxation kernels the closed form `θ(v) = -v M(v) / σ` is exact and
/// used directly.
pub fn solve_theta(
    kernel: &TurningKernel,
    grid: &VelocityGrid,
    m: &Equilibrium,
) -> Result<Vec<Vec3>> {
    match &kernel.leading {
        LeadingKernel::Relaxation { sigma } => Ok(grid
            .nodes()
            .iter()
            .zip(m.values())
            .map(|(v, mk)| linalg::scale(v, -mk / sigma))
            .collect()),
        LeadingKernel::Table { .. } => {
            let mut theta = vec![linalg::ZERO_VEC; grid.len()];
            for axis in 0..grid.dim() {
                let rhs: Vec<f64> = grid
                    .nodes()
                    .iter()
                    .zip(m.values())
                    .map(|(v, mk)| v[axis] * mk)
                    .collect();
                let component = solve_mean_zero(kernel, grid, m, &rhs)?;
                for (t, c) in theta.iter_mut().zip(component) {
                    t[axis] = c;
                }
            }
            Ok(theta)
        }
    }
}

/// Outcome of one structural check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub species: usize,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

/// Report of the structural assumptions for a full kernel set.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, species: usize, residual: f64, threshold: f64, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            species,
            residual,
            threshold,
            passed: residual <= threshold,
            detail,
        });
    }

    fn push_info(&mut self, name: &str, species: usize, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            species,
            residual: 0.0,
            threshold: 0.0,
            passed: true,
            detail,
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            write!(
                f,
                "[{status}] species {} {:<24} residual {:.3e} (tol {:.1e})",
                c.species + 1,
                c.name,
                c.residual,
                c.threshold
            )?;
            if c.detail.is_empty() {
                writeln!(f)?;
            } else {
                writeln!(f, "  {}", c.detail)?;
            }
        }
        writeln!(
            f,
            "overall: {}",
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

fn table_entry<'a>(kernel: &'a TurningKernel, grid: &VelocityGrid, m: &Equilibrium, k: usize, j: usize) -> f64 {
    match &kernel.leading {
        LeadingKernel::Relaxation { sigma } => sigma * m.value(k),
        LeadingKernel::Table { entries } => entries[k * grid.len() + j],
    }
}

/// Check the structural assumptions of a kernel set: mass conservation of
/// `T0` and `T1`, detailed balance, equilibrium normalisation and zero flux,
/// the kernel lower bound, weighted self-adjointness, the null space, and the
/// residual of the `θ` solve.
pub fn validate_assumptions(
    kernels: &[TurningKernel],
    grid: &VelocityGrid,
    equilibria: &[Equilibrium],
) -> Result<ValidationReport> {
    if kernels.len() != equilibria.len() {
        return Err(Error::SpeciesMismatch(format!(
            "{} kernels vs {} equilibria",
            kernels.len(),
            equilibria.len()
        )));
    }
    let n = grid.len();
    let mut report = ValidationReport::default();

    for (i, (kernel, m)) in kernels.iter().zip(equilibria).enumerate() {
        // Equilibrium normalisation and vanishing flux.
        let mass = grid.moment(m.values())?;
        report.push(
            "equilibrium mass",
            i,
            (mass - 1.0).abs(),
            1e-12,
            String::new(),
        );
        let flux = grid.first_moment(m.values())?;
        report.push(
            "equilibrium flux",
            i,
            linalg::norm(&flux),
            1e-12,
            String::new(),
        );

        // Conservation of T0 over the full nodal basis.
        let mut worst = 0.0f64;
        for j in 0..n {
            let mut basis = vec![0.0; n];
            basis[j] = 1.0 / grid.weight(j);
            let out = apply_t0(kernel, grid, m, &basis)?;
            worst = worst.max(grid.moment(&out)?.abs());
        }
        report.push("T0 conservation", i, worst, OPERATOR_TOL, String::new());

        // Detailed balance of the leading kernel.
        let mut db = 0.0f64;
        let mut db_pair = (0usize, 0usize);
        for k in 0..n {
            for j in 0..n {
                let r = (table_entry(kernel, grid, m, k, j) * m.value(j)
                    - table_entry(kernel, grid, m, j, k) * m.value(k))
                .abs();
                if r > db {
                    db = r;
                    db_pair = (k, j);
                }
            }
        }
        report.push(
            "detailed balance",
            i,
            db,
            1e-12,
            if db > 1e-12 {
                format!("worst pair (v_{}, v_{})", db_pair.0, db_pair.1)
            } else {
                String::new()
            },
        );

        // Lower bound T0(v, v*) >= sigma M(v) for some sigma > 0.
        let mut sigma_lb = f64::INFINITY;
        let mut lb_pair = (0usize, 0usize);
        for k in 0..n {
            for j in 0..n {
                let ratio = table_entry(kernel, grid, m, k, j) / m.value(k);
                if ratio < sigma_lb {
                    sigma_lb = ratio;
                    lb_pair = (k, j);
                }
            }
        }
        let lb_ok = sigma_lb > 0.0;
        report.checks.push(Check {
            name: "kernel lower bound".into(),
            species: i,
            residual: if lb_ok { 0.0 } else { sigma_lb },
            threshold: 0.0,
            passed: lb_ok,
            detail: if lb_ok {
                format!("sigma = {sigma_lb:.6e}")
            } else {
                format!(
                    "violated at (v_{}, v_{}): T0/M = {sigma_lb:.3e}",
                    lb_pair.0, lb_pair.1
                )
            },
        });

        // Self-adjointness of L in the 1/M inner product.
        let mut sym = 0.0f64;
        let mut smax = 0.0f64;
        let a = operator_matrix(kernel, grid, m);
        for k in 0..n {
            for j in 0..n {
                let skj = grid.weight(k) * a[(k, j)] / m.value(k);
                let sjk = grid.weight(j) * a[(j, k)] / m.value(j);
                sym = sym.max((skj - sjk).abs());
                smax = smax.max(skj.abs());
            }
        }
        report.push(
            "weighted self-adjointness",
            i,
            sym / smax.max(1e-300),
            OPERATOR_TOL,
            String::new(),
        );

        // Null space: L M = 0.
        let lm = apply_t0(kernel, grid, m, m.values())?;
        let null = lm.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        report.push("null space L(M) = 0", i, null, 1e-12, String::new());

        // theta solve residual (skipped if the solve itself fails; the
        // failure is reported instead).
        match solve_theta(kernel, grid, m) {
            Ok(theta) => {
                let mut worst = 0.0f64;
                for axis in 0..grid.dim() {
                    let comp: Vec<f64> = theta.iter().map(|t| t[axis]).collect();
                    let lt = apply_t0(kernel, grid, m, &comp)?;
                    for (k, v) in grid.nodes().iter().enumerate() {
                        worst = worst.max((lt[k] - v[axis] * m.value(k)).abs());
                    }
                    worst = worst.max(grid.moment(&comp)?.abs());
                }
                report.push("theta solve residual", i, worst, OPERATOR_TOL, String::new());
            }
            Err(e) => report.checks.push(Check {
                name: "theta solve residual".into(),
                species: i,
                residual: f64::INFINITY,
                threshold: OPERATOR_TOL,
                passed: false,
                detail: e.to_string(),
            }),
        }

        // Conservation of T1 with unit gradient probes.
        if kernel.has_perturbation() {
            let n_fields = kernels.len().max(
                match kernel.perturbation() {
                    Perturbation::GradientTaxis { targets } => targets
                        .iter()
                        .map(|t| t.field + 1)
                        .max()
                        .unwrap_or(0),
                    Perturbation::FluxLimited { target, .. } => target + 1,
                    Perturbation::None => 0,
                },
            );
            let u = vec![1.0; n_fields];
            let mut worst = 0.0f64;
            for axis in 0..grid.dim() {
                let mut grad = linalg::ZERO_VEC;
                grad[axis] = 1.0;
                let gradients = vec![grad; n_fields];
                let fields = MacroFields {
                    u: &u,
                    gradients: &gradients,
                };
                for j in 0..n {
                    let mut basis = vec![0.0; n];
                    basis[j] = 1.0 / grid.weight(j);
                    let out = apply_t1(kernel, grid, m, &fields, &basis)?;
                    worst = worst.max(grid.moment(&out)?.abs());
                }
            }
            report.push("T1 conservation", i, worst, OPERATOR_TOL, String::new());
        }

        // The eps-expansion property of the perturbation cannot be checked
        // pointwise; for the built-in families it is exercised by the
        // eps-sweep harness, for user tables it is out of reach.
        let status = match (&kernel.leading, &kernel.perturbation) {
            (LeadingKernel::Table { .. }, _) => "unverifiable for user tables",
            _ => "verified indirectly via eps-sweep",
        };
        report.push_info("perturbation expansion", i, status.into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::build_velocity_grid;
    use proptest::prelude::*;

    fn setup(n: usize) -> (VelocityGrid, Equilibrium) {
        let grid = build_velocity_grid(2, 1.0, n).unwrap();
        let m = Equilibrium::uniform(&grid);
        (grid, m)
    }

    /// Detailed-balance table: T(v_k, v_j) = S(k, j) M(v_k) with S symmetric
    /// and strictly positive.
    fn balanced_table(grid: &VelocityGrid, m: &Equilibrium) -> TurningKernel {
        let n = grid.len();
        let mut entries = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                let s = 1.0
                    + 0.3
                        * (grid.node(k)[0] * grid.node(j)[0]
                            + grid.node(k)[1] * grid.node(j)[1]);
                entries[k * n + j] = s * m.value(k);
            }
        }
        TurningKernel::table(0, grid, entries).unwrap()
    }

    #[test]
    fn relaxation_annihilates_equilibrium_multiples() {
        let (grid, m) = setup(8);
        let kernel = TurningKernel::relaxation(0, 1.7).unwrap();
        let g: Vec<f64> = m.values().iter().map(|v| 3.25 * v).collect();
        let out = apply_t0(&kernel, &grid, &m, &g).unwrap();
        for x in out {
            assert!(x.abs() < 1e-14);
        }
    }

    #[test]
    fn relaxation_matches_closed_form_on_cosine() {
        let (grid, m) = setup(16);
        let kernel = TurningKernel::relaxation(0, 2.0).unwrap();
        let g: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(m.values())
            .map(|(v, mk)| mk * (1.0 + v[0]))
            .collect();
        let out = apply_t0(&kernel, &grid, &m, &g).unwrap();
        for ((v, mk), x) in grid.nodes().iter().zip(m.values()).zip(&out) {
            assert!((x - (-2.0 * mk * v[0])).abs() < 1e-14);
        }
    }

    #[test]
    fn table_of_relaxation_entries_matches_closed_form() {
        let (grid, m) = setup(8);
        let sigma = 1.3;
        let n = grid.len();
        let entries: Vec<f64> = (0..n * n).map(|i| sigma * m.value(i / n)).collect();
        let table = TurningKernel::table(0, &grid, entries).unwrap();
        let relax = TurningKernel::relaxation(0, sigma).unwrap();
        let g: Vec<f64> = (0..n).map(|k| 0.2 + (k as f64 * 0.7).sin().powi(2)).collect();
        let a = apply_t0(&table, &grid, &m, &g).unwrap();
        let b = apply_t0(&relax, &grid, &m, &g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // Same for theta: independent bordered solve vs the closed form.
        let ta = solve_theta(&table, &grid, &m).unwrap();
        let tb = solve_theta(&relax, &grid, &m).unwrap();
        for (x, y) in ta.iter().zip(&tb) {
            assert!((x[0] - y[0]).abs() < 1e-12);
            assert!((x[1] - y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn t1_vanishes_without_gradient() {
        let (grid, m) = setup(8);
        let kernel = TurningKernel::relaxation(0, 0.5)
            .unwrap()
            .with_gradient_taxis(vec![TaxisTarget {
                field: 2,
                coupling: 0.7,
            }]);
        let u = [1.0, 1.0, 1.0];
        let gradients = [linalg::ZERO_VEC; 3];
        let fields = MacroFields {
            u: &u,
            gradients: &gradients,
        };
        let out = apply_t1(&kernel, &grid, &m, &fields, m.values()).unwrap();
        for x in out {
            assert!(x.abs() < 1e-15);
        }
    }

    #[test]
    fn t1_first_moment_reproduces_taxis_flux() {
        // With xi = 0.7 and grad u_3 = e_x, the quadrature
        // (1/sigma) <v T1(M)> must equal 0.7 e_x exactly.
        let (grid, m) = setup(16);
        let sigma = 0.5;
        let kernel = TurningKernel::relaxation(0, sigma)
            .unwrap()
            .with_gradient_taxis(vec![TaxisTarget {
                field: 2,
                coupling: 0.7,
            }]);
        let u = [1.0, 1.0, 1.0];
        let mut gradients = [linalg::ZERO_VEC; 3];
        gradients[2] = [1.0, 0.0, 0.0];
        let fields = MacroFields {
            u: &u,
            gradients: &gradients,
        };
        let out = apply_t1(&kernel, &grid, &m, &fields, m.values()).unwrap();
        let flux = grid.first_moment(&out).unwrap();
        assert!((flux[0] - sigma * 0.7).abs() < 1e-12);
        assert!(flux[1].abs() < 1e-12);
    }

    #[test]
    fn flux_limited_constant_field_gives_zero() {
        let (grid, m) = setup(8);
        let kernel = TurningKernel::relaxation(0, 1.0)
            .unwrap()
            .with_flux_limited(1, BetaLaw::default(), BetaLaw::default());
        let u = [0.5, 2.0];
        let gradients = [linalg::ZERO_VEC; 2];
        let fields = MacroFields {
            u: &u,
            gradients: &gradients,
        };
        let out = apply_t1(&kernel, &grid, &m, &fields, m.values()).unwrap();
        for x in out {
            assert!(x.abs() < 1e-15);
        }
    }

    #[test]
    fn flux_limited_floor_is_a_hard_error() {
        let (grid, m) = setup(8);
        let kernel = TurningKernel::relaxation(0, 1.0)
            .unwrap()
            .with_flux_limited(1, BetaLaw::default(), BetaLaw::default());
        let u = [0.5, 1e-9];
        let gradients = [[1.0, 0.0, 0.0]; 2];
        let fields = MacroFields {
            u: &u,
            gradients: &gradients,
        };
        assert!(matches!(
            apply_t1(&kernel, &grid, &m, &fields, m.values()),
            Err(Error::FieldBelowFloor { field: 1, .. })
        ));
    }

    #[test]
    fn missing_gradient_is_reported() {
        let (grid, m) = setup(8);
        let kernel = TurningKernel::relaxation(0, 1.0)
            .unwrap()
            .with_gradient_taxis(vec![TaxisTarget {
                field: 2,
                coupling: 1.0,
            }]);
        let u = [1.0];
        let gradients = [linalg::ZERO_VEC; 1];
        let fields = MacroFields {
            u: &u,
            gradients: &gradients,
        };
        assert!(matches!(
            apply_t1(&kernel, &grid, &m, &fields, m.values()),
            Err(Error::MissingGradient { field: 2 })
        ));
    }

    #[test]
    fn theta_closed_form_and_normalisation() {
        let (grid, m) = setup(8);
        let sigma = 0.5;
        let kernel = TurningKernel::relaxation(0, sigma).unwrap();
        let theta = solve_theta(&kernel, &grid, &m).unwrap();
        for (t, (v, mk)) in theta.iter().zip(grid.nodes().iter().zip(m.values())) {
            assert!((t[0] + v[0] * mk / sigma).abs() < 1e-15);
            assert!((t[1] + v[1] * mk / sigma).abs() < 1e-15);
        }
        for axis in 0..2 {
            let comp: Vec<f64> = theta.iter().map(|t| t[axis]).collect();
            assert!(grid.moment(&comp).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn solve_rejects_nonzero_mean_rhs() {
        let (grid, m) = setup(8);
        let kernel = TurningKernel::relaxation(0, 1.0).unwrap();
        let rhs = vec![1.0; grid.len()];
        assert!(matches!(
            solve_mean_zero(&kernel, &grid, &m, &rhs),
            Err(Error::NonMeanZeroRhs { .. })
        ));
    }

    #[test]
    fn solve_then_reapply_hits_rhs() {
        let (grid, m) = setup(16);
        let kernel = balanced_table(&grid, &m);
        // Mean-zero right-hand side with two harmonics.
        let rhs: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|v| 0.4 * v[0] + 0.2 * (v[0] * v[1]))
            .collect();
        let mean = grid.moment(&rhs).unwrap();
        let rhs: Vec<f64> = rhs.iter().map(|x| x - mean / grid.measure()).collect();
        let g = solve_mean_zero(&kernel, &grid, &m, &rhs).unwrap();
        let back = apply_t0(&kernel, &grid, &m, &g).unwrap();
        for (x, y) in back.iter().zip(&rhs) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(grid.moment(&g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn validation_passes_for_builtin_kernels() {
        let (grid, m) = setup(16);
        let kernels = vec![
            TurningKernel::relaxation(0, 0.5)
                .unwrap()
                .with_gradient_taxis(vec![TaxisTarget {
                    field: 2,
                    coupling: 0.7,
                }]),
            TurningKernel::relaxation(1, 1.25).unwrap(),
            TurningKernel::relaxation(2, 2.0).unwrap(),
        ];
        let ms = vec![m.clone(), m.clone(), m];
        let report = validate_assumptions(&kernels, &grid, &ms).unwrap();
        assert!(report.passed(), "{report}");
        for c in &report.checks {
            assert!(c.residual <= c.threshold.max(1e-10), "{}: {}", c.name, c.residual);
        }
    }

    #[test]
    fn validation_catches_negative_entry() {
        let (grid, m) = setup(8);
        let n = grid.len();
        let mut entries: Vec<f64> = (0..n * n).map(|i| 0.8 * m.value(i / n)).collect();
        entries[3 * n + 5] = -0.1;
        let kernel = TurningKernel::table(0, &grid, entries).unwrap();
        let report = validate_assumptions(&[kernel], &grid, &[m]).unwrap();
        assert!(!report.passed());
        let lb = report
            .checks
            .iter()
            .find(|c| c.name == "kernel lower bound")
            .unwrap();
        assert!(!lb.passed);
        assert!(lb.detail.contains("(v_3, v_5)"), "{}", lb.detail);
    }

    #[test]
    fn validation_catches_broken_detailed_balance() {
        let (grid, m) = setup(8);
        let n = grid.len();
        let mut entries: Vec<f64> = (0..n * n).map(|i| 0.8 * m.value(i / n)).collect();
        entries[2 * n + 6] *= 1.5;
        let kernel = TurningKernel::table(0, &grid, entries).unwrap();
        let report = validate_assumptions(&[kernel], &grid, &[m]).unwrap();
        let db = report
            .checks
            .iter()
            .find(|c| c.name == "detailed balance")
            .unwrap();
        assert!(!db.passed);
        assert!(db.residual > 0.0);
    }

    #[test]
    fn self_adjointness_of_balanced_table() {
        let (grid, m) = setup(16);
        let kernel = balanced_table(&grid, &m);
        let report = validate_assumptions(&[kernel], &grid, &[m]).unwrap();
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn scaling_exponent_rules() {
        assert!(ScalingExponents::uniform(4, 2, 1).is_ok());
        assert!(ScalingExponents::new(0, vec![Some(1)]).is_err());
        // Species 3 must not carry an order.
        assert!(ScalingExponents::new(1, vec![Some(1), Some(1), Some(1)]).is_err());
        let s = ScalingExponents::new(2, vec![Some(1), Some(2), None, Some(1)]).unwrap();
        assert!(s.taxis_active(0));
        assert!(!s.taxis_active(1));
        assert!(!s.taxis_active(2));
        assert!(!s.driving_diffuses());
        assert_eq!(s.stiff_exponent(2), 3);
        assert_eq!(s.stiff_exponent(0), 2);
    }

    proptest! {
        // Mass conservation of both operator parts for arbitrary profiles
        // and drift data.
        #[test]
        fn operators_conserve_mass(
            g in proptest::collection::vec(0.01f64..5.0, 16),
            gx in -2.0f64..2.0,
            gy in -2.0f64..2.0,
            sigma in 0.1f64..4.0,
        ) {
            let (grid, m) = setup(16);
            let kernel = TurningKernel::relaxation(0, sigma)
                .unwrap()
                .with_gradient_taxis(vec![TaxisTarget { field: 1, coupling: 0.9 }]);
            let out0 = apply_t0(&kernel, &grid, &m, &g).unwrap();
            prop_assert!(grid.moment(&out0).unwrap().abs() < 1e-10);

            let u = [1.0, 1.0];
            let gradients = [[0.0, 0.0, 0.0], [gx, gy, 0.0]];
            let fields = MacroFields { u: &u, gradients: &gradients };
            let out1 = apply_t1(&kernel, &grid, &m, &fields, &g).unwrap();
            prop_assert!(grid.moment(&out1).unwrap().abs() < 1e-10);
        }
    }
}
